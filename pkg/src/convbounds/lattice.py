"""Finite-dimensional mixed-norm sequence lattices with pointwise calculus.

A spec ``l^{q1}_{M1}(l^{q2}_{M2}(...))`` nests levels outermost-first; an
element is a flat float64 array of length ``M1*M2*...`` whose reshape to
``(M1, M2, ...)`` puts one level per axis.  Norms reduce innermost-out.

Exponents live in [1, inf].  Finite exponents are stored as ``Fraction`` so
that conjugation and 2-concavification round-trip exactly; infinity is the
``INF`` singleton, never a float, and every norm routine branches on it
explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np


class _Infinity:
    """The exponent infinity. A singleton; compares equal only to itself."""

    __slots__ = ()
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "inf"


INF = _Infinity()

Exponent = Union[Fraction, _Infinity]
ExponentLike = Union[int, float, str, Fraction, _Infinity]


def is_inf(q) -> bool:
    return q is INF or (isinstance(q, float) and np.isinf(q))


def as_exponent(q: ExponentLike) -> Exponent:
    """Normalize an exponent-like value to Fraction or INF; must be >= 1."""
    if is_inf(q):
        return INF
    if isinstance(q, str):
        if q.strip().lower() == "inf":
            return INF
        q = Fraction(q)
    q = Fraction(q)
    if q < 1:
        raise ValueError(f"exponent must lie in [1, inf], got {q}")
    return q


def conjugate(q: Exponent) -> Exponent:
    """Hoelder conjugate: 1/q + 1/q' = 1, with 1' = inf and inf' = 1."""
    if q is INF:
        return Fraction(1)
    if q == 1:
        return INF
    return q / (q - 1)


def exponent_str(q: Exponent) -> str:
    if q is INF:
        return "inf"
    if q.denominator == 1:
        return str(q.numerator)
    return str(float(q))


def _reduce_last_axis(arr: np.ndarray, q: Exponent) -> np.ndarray:
    # arr is nonnegative
    if q is INF:
        return arr.max(axis=-1)
    qf = float(q)
    if qf == 1.0:
        return arr.sum(axis=-1)
    if qf == 2.0:
        return np.sqrt((arr * arr).sum(axis=-1))
    return (arr**qf).sum(axis=-1) ** (1.0 / qf)


@dataclass(frozen=True)
class LatticeSpec:
    """Nested mixed-norm stack; ``levels`` is ((q1, M1), (q2, M2), ...)."""

    levels: tuple

    def __post_init__(self):
        if not self.levels:
            raise ValueError("spec needs at least one level")
        norm_levels = []
        for q, m in self.levels:
            m = int(m)
            if m < 1:
                raise ValueError(f"level dimension must be >= 1, got {m}")
            norm_levels.append((as_exponent(q), m))
        object.__setattr__(self, "levels", tuple(norm_levels))

    @property
    def shape(self) -> tuple:
        return tuple(m for _, m in self.levels)

    @property
    def total_dim(self) -> int:
        n = 1
        for m in self.shape:
            n *= m
        return n

    @property
    def exponents(self) -> tuple:
        return tuple(q for q, _ in self.levels)

    def is_finite(self) -> bool:
        return all(q is not INF for q in self.exponents)

    def dual(self) -> "LatticeSpec":
        return LatticeSpec(tuple((conjugate(q), m) for q, m in self.levels))

    def concavify(self, power: int = 2) -> "LatticeSpec":
        """The 2-concavification: halves every exponent; needs all q >= 2."""
        if power != 2:
            raise ValueError("only 2-concavification is supported")
        for q in self.exponents:
            if q is not INF and q < 2:
                raise ValueError(
                    f"concavify(2) requires all exponents >= 2, found {q}"
                )
        return LatticeSpec(
            tuple((INF if q is INF else q / 2, m) for q, m in self.levels)
        )

    def convexify(self, power: int = 2) -> "LatticeSpec":
        if power != 2:
            raise ValueError("only 2-convexification is supported")
        return LatticeSpec(
            tuple((INF if q is INF else q * 2, m) for q, m in self.levels)
        )

    def extend(self, q: ExponentLike, m: int, innermost: bool = True) -> "LatticeSpec":
        """Append a level (innermost by default), e.g. X -> X(l^s_N)."""
        lvl = (as_exponent(q), int(m))
        if innermost:
            return LatticeSpec(self.levels + (lvl,))
        return LatticeSpec((lvl,) + self.levels)

    def norm_many(self, values: np.ndarray) -> np.ndarray:
        """Norms of a batch: values has shape (..., total_dim)."""
        values = np.asarray(values, dtype=float)
        arr = np.abs(values).reshape(values.shape[:-1] + self.shape)
        for q, _ in reversed(self.levels):
            arr = _reduce_last_axis(arr, q)
        return arr

    def norm(self, coords: np.ndarray) -> float:
        return float(self.norm_many(np.asarray(coords, dtype=float)))

    def to_string(self) -> str:
        s = ""
        for q, m in reversed(self.levels):
            inner = f",{s}" if s else ""
            s = f"l{exponent_str(q)}({m}{inner})"
        return s

    def __str__(self):
        return self.to_string()


def parse_spec(text: str) -> LatticeSpec:
    """Parse the compact grammar: "l2(4)", "linf(8,l2(12))", "l1.5(3)"."""
    s = text.replace(" ", "")
    levels, pos = _parse_levels(s, 0)
    if pos != len(s):
        raise ValueError(f"trailing input in spec string: {text!r}")
    return LatticeSpec(tuple(levels))


def _parse_levels(s: str, pos: int):
    if pos >= len(s) or s[pos] != "l":
        raise ValueError(f"expected 'l' at position {pos} in {s!r}")
    pos += 1
    start = pos
    while pos < len(s) and s[pos] != "(":
        pos += 1
    if pos == len(s):
        raise ValueError(f"missing '(' in spec string {s!r}")
    q = as_exponent(s[start:pos])
    pos += 1  # consume '('
    start = pos
    while pos < len(s) and s[pos].isdigit():
        pos += 1
    if start == pos:
        raise ValueError(f"missing dimension at position {pos} in {s!r}")
    m = int(s[start:pos])
    inner = []
    if pos < len(s) and s[pos] == ",":
        inner, pos = _parse_levels(s, pos + 1)
    if pos >= len(s) or s[pos] != ")":
        raise ValueError(f"missing ')' at position {pos} in {s!r}")
    return [(q, m)] + inner, pos + 1


@dataclass(frozen=True)
class LatticeVec:
    """An element of a LatticeSpec; coords immutable after construction."""

    spec: LatticeSpec
    coords: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coords, dtype=float).reshape(-1)
        if arr.size != self.spec.total_dim:
            raise ValueError(
                f"coordinate count {arr.size} does not match spec dimension "
                f"{self.spec.total_dim}"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "coords", arr)

    def norm(self) -> float:
        return self.spec.norm(self.coords)

    def __abs__(self) -> "LatticeVec":
        return LatticeVec(self.spec, np.abs(self.coords))

    def power(self, theta: float) -> "LatticeVec":
        if theta <= 0:
            raise ValueError("power exponent must be positive")
        if (self.coords < 0).any():
            raise ValueError("power is defined only for nonnegative coordinates")
        return LatticeVec(self.spec, self.coords**theta)

    def sup(self, other: "LatticeVec") -> "LatticeVec":
        self._check_same_spec(other)
        return LatticeVec(self.spec, np.maximum(self.coords, other.coords))

    def __add__(self, other: "LatticeVec") -> "LatticeVec":
        self._check_same_spec(other)
        return LatticeVec(self.spec, self.coords + other.coords)

    def __sub__(self, other: "LatticeVec") -> "LatticeVec":
        self._check_same_spec(other)
        return LatticeVec(self.spec, self.coords - other.coords)

    def __mul__(self, c: float) -> "LatticeVec":
        return LatticeVec(self.spec, self.coords * float(c))

    __rmul__ = __mul__

    def pointwise_mul(self, other: "LatticeVec") -> "LatticeVec":
        self._check_same_spec(other)
        return LatticeVec(self.spec, self.coords * other.coords)

    def _check_same_spec(self, other: "LatticeVec"):
        if other.spec != self.spec:
            raise ValueError("operands live in different lattice specs")


def norm(x: LatticeVec) -> float:
    return x.norm()


def mixed_seq_norm(xs: Sequence[LatticeVec], s: ExponentLike) -> float:
    """|| (x_n) ||_{X(l^s_N)} = || (sum_n |x_n|^s)^{1/s} ||_X (sup for s=inf)."""
    if not xs:
        raise ValueError("mixed_seq_norm needs a nonempty sequence")
    spec = xs[0].spec
    for x in xs[1:]:
        if x.spec != spec:
            raise ValueError("all vectors must share one spec")
    s = as_exponent(s)
    stacked = np.abs(np.stack([x.coords for x in xs], axis=-1))
    combined = _reduce_last_axis(stacked, s) if s is INF else _lse(stacked, s)
    return spec.norm(combined)


def _lse(stacked: np.ndarray, s: Exponent) -> np.ndarray:
    sf = float(s)
    if sf == 1.0:
        return stacked.sum(axis=-1)
    if sf == 2.0:
        return np.sqrt((stacked * stacked).sum(axis=-1))
    return (stacked**sf).sum(axis=-1) ** (1.0 / sf)


_KRIVINE_OPS = ("abs", "power", "sup", "sum", "product")


def krivine(op: str, xs: Sequence[LatticeVec], theta: float | None = None) -> LatticeVec:
    """Coordinatewise lattice calculus: abs, power, pointwise sup/sum/product."""
    if op not in _KRIVINE_OPS:
        raise ValueError(f"unknown Krivine op {op!r}; expected one of {_KRIVINE_OPS}")
    if not xs:
        raise ValueError("krivine needs at least one operand")
    if op == "abs":
        return abs(xs[0])
    if op == "power":
        if theta is None:
            raise ValueError("power requires theta")
        return xs[0].power(theta)
    out = xs[0]
    for x in xs[1:]:
        if op == "sup":
            out = out.sup(x)
        elif op == "sum":
            out = out + x
        else:
            out = out.pointwise_mul(x)
    return out


def norming_functional(x: LatticeVec) -> LatticeVec:
    """Hoelder-extremal x* in the dual spec: <x,x*> = ||x|| and ||x*||_* = 1.

    Finite exponents use the (|x_i|/||x||)^{q-1} weights; an inf level puts
    its mass on the first maximizing child, a 1-level spreads uniformly.
    Returns the zero functional for x = 0.
    """
    spec = x.spec
    arr = np.abs(x.coords).reshape(spec.shape)
    # subtree norms by depth: norms[l] has shape shape[:l]
    norms = [None] * (len(spec.levels) + 1)
    norms[len(spec.levels)] = arr
    for lvl in range(len(spec.levels) - 1, -1, -1):
        norms[lvl] = _reduce_last_axis(norms[lvl + 1], spec.levels[lvl][0])
    if norms[0] == 0.0:
        return LatticeVec(spec.dual(), np.zeros(spec.total_dim))
    weights = np.ones(())
    for lvl, (q, m) in enumerate(spec.levels):
        child = norms[lvl + 1]
        parent = np.asarray(norms[lvl])[..., None]
        if q is INF:
            w = (child == np.max(child, axis=-1, keepdims=True)).astype(float)
            # break ties deterministically: keep only the first maximizer
            first = np.argmax(w, axis=-1)
            w = np.zeros_like(w)
            np.put_along_axis(w, first[..., None], 1.0, axis=-1)
        elif q == 1:
            w = np.ones_like(child)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                w = np.where(parent > 0, child / np.where(parent > 0, parent, 1.0), 0.0)
            w = w ** (float(q) - 1.0)
        weights = weights[..., None] * w if np.ndim(weights) else weights * w
    functional = np.sign(x.coords).reshape(spec.shape) * weights
    return LatticeVec(spec.dual(), functional.reshape(-1))


def pairing(x: LatticeVec, y: LatticeVec) -> float:
    """Coordinate pairing <x, y> = sum_i x_i y_i (duality form)."""
    if x.spec.shape != y.spec.shape:
        raise ValueError("pairing requires identical level dimensions")
    return float(np.dot(x.coords, y.coords))
