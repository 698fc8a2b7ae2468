"""Immutable function terms closed under partial differentiation.

A :class:`Term` is a node in an expression DAG over variables ``x1, x2, ...``,
exact rational constants, sums, products, natural powers, and applications of
registered basic functions (``exp`` ships by default).  Construction goes
through the smart constructors (:func:`add`, :func:`mul`, :func:`npow`,
:func:`apply_basic`, ...) which maintain a lightweight canonical form:
nested sums/products are flattened, constants are folded, like summands and
repeated factors are merged, and children are sorted by a deterministic
structural digest.  There is no full polynomial expansion.

Evaluation is dual-mode: polynomial terms at exact rational points produce
exact :class:`fractions.Fraction` values; any float input (or a transcendental
basic away from a representable point) switches the result to 64-bit floats.
"""

from __future__ import annotations

import hashlib
import math
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Mapping, Sequence, Union

Scalar = Union[Fraction, float]
Point = Sequence[Scalar]
MultiIndex = tuple[int, ...]


class TermError(Exception):
    """Base class for term-algebra failures."""


class ParseError(TermError):
    """Source text does not conform to the term grammar."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnknownBasicError(TermError):
    """A basic-function name is not present in the registry."""


class EvaluationOverflow(TermError):
    """A registered basic was evaluated outside its numeric range."""


class RegistryFrozenError(TermError):
    """Attempted to register a basic after the registry was frozen."""


def as_scalar(value) -> Scalar:
    """Coerce a number to the tagged scalar domain (Fraction or float)."""
    if isinstance(value, bool):
        raise TypeError("booleans are not scalars")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, float):
        return value
    raise TypeError(f"not a scalar: {value!r}")


def scalar_is_exact(value: Scalar) -> bool:
    return isinstance(value, Fraction)


# ---------------------------------------------------------------------------
# Basic-function registry
# ---------------------------------------------------------------------------


class BasicFunction:
    """Registry entry: arity, derivative rule, evaluation rule, control template.

    ``derivatives(args)`` must return, for each argument slot, the term for the
    partial derivative of the basic with respect to that slot, applied to
    ``args``.  The rule may only mention registered names, which keeps the
    term ring closed under differentiation.
    """

    __slots__ = ("name", "arity", "derivatives", "evaluate", "control_omega",
                 "control_coeff", "control_exp")

    def __init__(self, name, arity, derivatives, evaluate,
                 control_omega, control_coeff, control_exp):
        self.name = name
        self.arity = arity
        self.derivatives = derivatives
        self.evaluate = evaluate
        # Control template: |D^k basic| <= control_coeff(k) * omega^control_exp(k),
        # with omega a term in the argument slot(s).
        self.control_omega = control_omega
        self.control_coeff = control_coeff
        self.control_exp = control_exp


class BasicRegistry:
    """Name -> :class:`BasicFunction` map, frozen before heavy use."""

    def __init__(self):
        self._entries: dict[str, BasicFunction] = {}
        self._frozen = False

    def register(self, entry: BasicFunction) -> None:
        if self._frozen:
            raise RegistryFrozenError("registry is frozen")
        if entry.name in self._entries:
            raise TermError(f"basic {entry.name!r} already registered")
        self._entries[entry.name] = entry

    def freeze(self) -> None:
        self._frozen = True

    def get(self, name: str) -> BasicFunction:
        try:
            return self._entries[name]
        except KeyError:
            raise UnknownBasicError(f"unknown basic function {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def names(self) -> tuple[str, ...]:
        return tuple(sorted(self._entries))


REGISTRY = BasicRegistry()


# ---------------------------------------------------------------------------
# Term nodes
# ---------------------------------------------------------------------------

_DIGEST_SIZE = 16


def _digest(tag: bytes, *parts: bytes) -> bytes:
    h = hashlib.blake2b(digest_size=_DIGEST_SIZE)
    h.update(tag)
    for p in parts:
        h.update(p)
    return h.digest()


class Term:
    """Immutable expression node.  Compare and hash by structural digest."""

    __slots__ = ("arity", "_digest", "_hash")

    def _init(self, arity: int, digest: bytes) -> None:
        self.arity = arity
        self._digest = digest
        self._hash = int.from_bytes(digest[:8], "big")

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        return isinstance(other, Term) and self._digest == other._digest

    def __ne__(self, other) -> bool:
        return not self.__eq__(other)

    # Arithmetic sugar used throughout tests and the engine.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, negate(other))

    def __rsub__(self, other):
        return add(other, negate(self))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return negate(self)

    def __pow__(self, exponent):
        return npow(self, exponent)

    def __repr__(self) -> str:
        src = to_source(self)
        if len(src) > 120:
            src = src[:117] + "..."
        return f"<Term {src}>"


class Var(Term):
    __slots__ = ("index",)

    def __init__(self, index: int):
        if index < 1:
            raise TermError(f"variable index must be >= 1, got {index}")
        self.index = index
        self._init(index, _digest(b"v", str(index).encode()))


class Const(Term):
    __slots__ = ("value",)

    def __init__(self, value: Fraction):
        self.value = Fraction(value)
        self._init(0, _digest(b"c", str(self.value).encode()))


class Sum(Term):
    __slots__ = ("children",)

    def __init__(self, children: tuple[Term, ...]):
        self.children = children
        self._init(max(c.arity for c in children),
                   _digest(b"+", *(c._digest for c in children)))


class Product(Term):
    __slots__ = ("children",)

    def __init__(self, children: tuple[Term, ...]):
        self.children = children
        self._init(max(c.arity for c in children),
                   _digest(b"*", *(c._digest for c in children)))


class Power(Term):
    __slots__ = ("base", "exponent")

    def __init__(self, base: Term, exponent: int):
        self.base = base
        self.exponent = exponent
        self._init(base.arity,
                   _digest(b"^", base._digest, str(exponent).encode()))


class Basic(Term):
    __slots__ = ("name", "args")

    def __init__(self, name: str, args: tuple[Term, ...]):
        entry = REGISTRY.get(name)
        if len(args) != entry.arity:
            raise TermError(
                f"basic {name!r} takes {entry.arity} argument(s), got {len(args)}")
        self.name = name
        self.args = args
        self._init(max((a.arity for a in args), default=0),
                   _digest(b"f", name.encode(), *(a._digest for a in args)))


ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))


# ---------------------------------------------------------------------------
# Smart constructors (normalizing)
# ---------------------------------------------------------------------------


def _coerce(value) -> Term:
    if isinstance(value, Term):
        return value
    if isinstance(value, (int, Fraction)) and not isinstance(value, bool):
        return Const(Fraction(value))
    raise TypeError(f"cannot interpret {value!r} as a term")


def var(index: int) -> Term:
    return Var(index)


def const(value) -> Term:
    return Const(Fraction(value))


def _split_coeff(t: Term) -> tuple[Fraction, Term]:
    """Split a rational coefficient off a normalized non-Sum term."""
    if isinstance(t, Const):
        return t.value, ONE
    if isinstance(t, Product) and isinstance(t.children[0], Const):
        rest = t.children[1:]
        core = rest[0] if len(rest) == 1 else Product(rest)
        return t.children[0].value, core
    return Fraction(1), t


def add(*args) -> Term:
    """Pointwise sum; flattens, folds constants, merges like summands."""
    const_total = Fraction(0)
    buckets: dict[bytes, list] = {}

    def absorb(t: Term) -> None:
        nonlocal const_total
        if isinstance(t, Sum):
            for c in t.children:
                absorb(c)
        elif isinstance(t, Const):
            const_total += t.value
        else:
            coeff, core = _split_coeff(t)
            slot = buckets.setdefault(core._digest, [Fraction(0), core])
            slot[0] += coeff

    for a in args:
        absorb(_coerce(a))

    rebuilt = []
    for coeff, core in buckets.values():
        if coeff == 0:
            continue
        rebuilt.append(core if coeff == 1 else mul(Const(coeff), core))
    rebuilt.sort(key=lambda t: t._digest)
    if const_total != 0:
        rebuilt.append(Const(const_total))
    if not rebuilt:
        return ZERO
    if len(rebuilt) == 1:
        return rebuilt[0]
    return Sum(tuple(rebuilt))


def mul(*args) -> Term:
    """Pointwise product; flattens, folds constants, merges repeated factors."""
    coeff = Fraction(1)
    buckets: dict[bytes, list] = {}

    def absorb(t: Term) -> None:
        nonlocal coeff
        if isinstance(t, Product):
            for c in t.children:
                absorb(c)
        elif isinstance(t, Const):
            coeff *= t.value
        elif isinstance(t, Power):
            slot = buckets.setdefault(t.base._digest, [0, t.base])
            slot[0] += t.exponent
        else:
            slot = buckets.setdefault(t._digest, [0, t])
            slot[0] += 1

    for a in args:
        absorb(_coerce(a))

    if coeff == 0:
        return ZERO
    rebuilt = []
    for exponent, base in buckets.values():
        rebuilt.append(base if exponent == 1 else Power(base, exponent))
    rebuilt.sort(key=lambda t: t._digest)
    if not rebuilt:
        return Const(coeff)
    if coeff != 1:
        rebuilt.insert(0, Const(coeff))
    if len(rebuilt) == 1:
        return rebuilt[0]
    return Product(tuple(rebuilt))


def npow(t, exponent: int) -> Term:
    """Natural power.  ``t ** 0`` normalizes to 1, including at the base's zeros."""
    t = _coerce(t)
    if not isinstance(exponent, int) or isinstance(exponent, bool) or exponent < 0:
        raise TermError(f"exponent must be a natural number, got {exponent!r}")
    if exponent == 0:
        return ONE
    if exponent == 1:
        return t
    if isinstance(t, Const):
        return Const(t.value ** exponent)
    if isinstance(t, Product):
        return mul(*(npow(c, exponent) for c in t.children))
    if isinstance(t, Power):
        return Power(t.base, t.exponent * exponent)
    return Power(t, exponent)


def negate(t) -> Term:
    return mul(Const(Fraction(-1)), _coerce(t))


def subtract(a, b) -> Term:
    return add(a, negate(b))


def scale(q, t) -> Term:
    """Scale by a rational: ``scale(1/2, t)``."""
    return mul(Const(Fraction(q)), t)


def apply_basic(name: str, *args) -> Term:
    return Basic(name, tuple(_coerce(a) for a in args))


def is_zero_term(t: Term) -> bool:
    """True only if the canonical form is the zero constant.

    Sound but incomplete: disguised transcendental zeros (for example
    ``exp(x1) * exp(-x1) - 1``) may return False.
    """
    return isinstance(t, Const) and t.value == 0


def subst(t: Term, mapping: Mapping[int, Term]) -> Term:
    """Substitute terms for variables (by 1-based index)."""
    memo: dict[int, Term] = {}

    def walk(node: Term) -> Term:
        got = memo.get(id(node))
        if got is not None:
            return got
        if isinstance(node, Var):
            out = mapping.get(node.index, node)
        elif isinstance(node, Const):
            out = node
        elif isinstance(node, Sum):
            out = add(*(walk(c) for c in node.children))
        elif isinstance(node, Product):
            out = mul(*(walk(c) for c in node.children))
        elif isinstance(node, Power):
            out = npow(walk(node.base), node.exponent)
        else:
            assert isinstance(node, Basic)
            out = apply_basic(node.name, *(walk(a) for a in node.args))
        memo[id(node)] = out
        return out

    return walk(t)


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------


@lru_cache(maxsize=65536)
def partial(t: Term, j: int) -> Term:
    """Partial derivative with respect to ``x_j`` (1-based).

    Indices beyond the term's arity yield the zero term.
    """
    if j < 1:
        raise TermError(f"variable index must be >= 1, got {j}")
    if j > t.arity:
        return ZERO
    if isinstance(t, Var):
        return ONE if t.index == j else ZERO
    if isinstance(t, Const):
        return ZERO
    if isinstance(t, Sum):
        return add(*(partial(c, j) for c in t.children))
    if isinstance(t, Product):
        pieces = []
        for i, c in enumerate(t.children):
            dc = partial(c, j)
            if is_zero_term(dc):
                continue
            pieces.append(mul(*t.children[:i], dc, *t.children[i + 1:]))
        return add(*pieces)
    if isinstance(t, Power):
        return mul(Const(Fraction(t.exponent)),
                   npow(t.base, t.exponent - 1),
                   partial(t.base, j))
    assert isinstance(t, Basic)
    rules = REGISTRY.get(t.name).derivatives(t.args)
    pieces = []
    for rule_term, arg in zip(rules, t.args):
        da = partial(arg, j)
        if is_zero_term(da):
            continue
        pieces.append(mul(rule_term, da))
    return add(*pieces)


def d_alpha(t: Term, alpha: Sequence[int]) -> Term:
    """Iterated partial ``D^alpha``; applied in ascending variable order.

    Mixed partials of the smooth basics commute, so fixing the application
    order makes the result independent of how ``alpha`` was accumulated.
    """
    for j, k in enumerate(alpha, start=1):
        if k < 0:
            raise TermError("multi-index entries must be naturals")
        for _ in range(k):
            t = partial(t, j)
    return t


def multi_indices(n: int, order: int) -> Iterator[MultiIndex]:
    """All alpha in N^n with |alpha| == order, ascending lexicographic."""
    if n == 0:
        if order == 0:
            yield ()
        return
    if n == 1:
        yield (order,)
        return
    for first in range(order + 1):
        for rest in multi_indices(n - 1, order - first):
            yield (first,) + rest


def graded_multi_indices(n: int, max_order: int) -> Iterator[MultiIndex]:
    """Multi-indices by increasing total order, lexicographic within each grade."""
    for order in range(max_order + 1):
        yield from multi_indices(n, order)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def evaluate(t: Term, point: Point) -> Scalar:
    """Evaluate at a point (length >= arity).

    Exact rationals stay exact through ring operations; any float operand
    makes the result a float.  A non-finite float result raises
    :class:`EvaluationOverflow` rather than propagating silently.
    """
    if len(point) < t.arity:
        raise ValueError(
            f"point has {len(point)} coordinates, term needs {t.arity}")
    values = [as_scalar(v) for v in point]
    memo: dict[int, Scalar] = {}

    def ev(node: Term) -> Scalar:
        got = memo.get(id(node))
        if got is not None:
            return got
        if isinstance(node, Var):
            out = values[node.index - 1]
        elif isinstance(node, Const):
            out = node.value
        elif isinstance(node, Sum):
            acc: Scalar = Fraction(0)
            for c in node.children:
                acc = acc + ev(c)
            out = acc
        elif isinstance(node, Product):
            acc = Fraction(1)
            for c in node.children:
                acc = acc * ev(c)
            out = acc
        elif isinstance(node, Power):
            try:
                out = ev(node.base) ** node.exponent
            except OverflowError as exc:
                raise EvaluationOverflow(str(exc)) from None
        else:
            assert isinstance(node, Basic)
            out = REGISTRY.get(node.name).evaluate(
                tuple(ev(a) for a in node.args))
        memo[id(node)] = out
        return out

    result = ev(t)
    if isinstance(result, float) and not math.isfinite(result):
        raise EvaluationOverflow("evaluation produced a non-finite float")
    return result


# ---------------------------------------------------------------------------
# Parsing and printing (s-expression grammar)
# ---------------------------------------------------------------------------

_OPERATORS = {"+", "*", "-", "^", "/"}


def _tokenize(source: str) -> list[tuple[str, int]]:
    tokens = []
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "()":
            tokens.append((ch, i))
            i += 1
            continue
        j = i
        while j < n and not source[j].isspace() and source[j] not in "()":
            j += 1
        tokens.append((source[i:j], i))
        i = j
    return tokens


def _is_int(token: str) -> bool:
    body = token[1:] if token[:1] == "-" else token
    return body.isdigit()


def parse(source: str) -> Term:
    """Parse a term from the whitespace-separated s-expression grammar.

    Atoms are ``x<digits>`` variables, integers, and ``(/ INT INT)``
    rationals; compound forms are ``(+ ...)``, ``(* ...)``, ``(- a b)``,
    ``(- a)``, ``(^ expr NAT)``, and ``(<name> ...)`` for registered basics.
    """
    tokens = _tokenize(source)
    pos = 0

    def peek():
        if pos >= len(tokens):
            raise ParseError("unexpected end of input", len(source))
        return tokens[pos]

    def expr() -> Term:
        nonlocal pos
        token, at = peek()
        if token == ")":
            raise ParseError("unexpected ')'", at)
        if token != "(":
            pos += 1
            return atom(token, at)
        pos += 1  # consume '('
        head, head_at = peek()
        pos += 1
        args = []
        while True:
            token, at = peek()
            if token == ")":
                pos += 1
                break
            if head == "^" and len(args) == 1:
                # The exponent slot only admits a natural-number literal.
                pos += 1
                if not _is_int(token) or token.startswith("-"):
                    raise ParseError(
                        f"non-natural exponent {token!r}", at)
                args.append(int(token))
                continue
            if head == "/":
                pos += 1
                if not _is_int(token):
                    raise ParseError(
                        f"rational literal needs integer parts, got {token!r}", at)
                args.append(int(token))
                continue
            args.append(expr())
        return combine(head, head_at, args)

    def atom(token: str, at: int) -> Term:
        if token[:1] == "x" and token[1:].isdigit():
            index = int(token[1:])
            if index < 1:
                raise ParseError(f"variable index must be >= 1: {token!r}", at)
            return Var(index)
        if _is_int(token):
            return Const(Fraction(int(token)))
        raise ParseError(f"unrecognized atom {token!r}", at)

    def combine(head: str, at: int, args: list) -> Term:
        if head == "+":
            if len(args) < 2:
                raise ParseError("'+' needs at least two arguments", at)
            return add(*args)
        if head == "*":
            if len(args) < 2:
                raise ParseError("'*' needs at least two arguments", at)
            return mul(*args)
        if head == "-":
            if len(args) == 1:
                return negate(args[0])
            if len(args) == 2:
                return subtract(args[0], args[1])
            raise ParseError("'-' takes one or two arguments", at)
        if head == "^":
            if len(args) != 2:
                raise ParseError("'^' takes a base and a natural exponent", at)
            return npow(args[0], args[1])
        if head == "/":
            if len(args) != 2:
                raise ParseError("'/' takes two integers", at)
            num, den = args
            if den == 0:
                raise ParseError("zero denominator", at)
            return Const(Fraction(num, den))
        if head in _OPERATORS or head in "()":
            raise ParseError(f"malformed operator use {head!r}", at)
        if head not in REGISTRY:
            raise ParseError(f"unknown function name {head!r}", at)
        for a in args:
            if not isinstance(a, Term):
                raise ParseError(f"bad argument to {head!r}", at)
        try:
            return apply_basic(head, *args)
        except TermError as exc:
            raise ParseError(str(exc), at) from None

    result = expr()
    if pos != len(tokens):
        raise ParseError("trailing input", tokens[pos][1])
    return result


def to_source(t: Term) -> str:
    """Print in the grammar; ``parse(to_source(t)) == t`` for normalized terms."""
    memo: dict[int, str] = {}

    def fmt(node: Term) -> str:
        got = memo.get(id(node))
        if got is not None:
            return got
        if isinstance(node, Var):
            out = f"x{node.index}"
        elif isinstance(node, Const):
            v = node.value
            out = str(v.numerator) if v.denominator == 1 else \
                f"(/ {v.numerator} {v.denominator})"
        elif isinstance(node, Sum):
            out = "(+ " + " ".join(fmt(c) for c in node.children) + ")"
        elif isinstance(node, Product):
            out = "(* " + " ".join(fmt(c) for c in node.children) + ")"
        elif isinstance(node, Power):
            out = f"(^ {fmt(node.base)} {node.exponent})"
        else:
            assert isinstance(node, Basic)
            inner = " ".join(fmt(a) for a in node.args)
            out = f"({node.name} {inner})"
        memo[id(node)] = out
        return out

    return fmt(t)


# ---------------------------------------------------------------------------
# Shipped basics: exp
# ---------------------------------------------------------------------------


def _exp_eval(args: tuple[Scalar, ...]) -> Scalar:
    (x,) = args
    if isinstance(x, Fraction):
        if x == 0:
            return Fraction(1)  # the one rational point where exp is rational
        try:
            x = float(x)
        except OverflowError:
            raise EvaluationOverflow("exp argument too large for float") from None
    try:
        return math.exp(x)
    except OverflowError:
        raise EvaluationOverflow(f"exp overflow at {x!r}") from None


REGISTRY.register(BasicFunction(
    name="exp",
    arity=1,
    derivatives=lambda args: (Basic("exp", args),),
    evaluate=_exp_eval,
    control_omega=None,  # set below once constructors exist
    control_coeff=lambda k: Fraction(1),
    control_exp=lambda k: 1,
))

# omega template for exp: 1 + exp(u), in the argument slot x1.
REGISTRY.get("exp").control_omega = add(ONE, apply_basic("exp", Var(1)))
