"""Parameter families, exact sparse vectors, and interval projections.

Everything downstream works over a finite list of (weight, width) pairs
(m_j, n_j), j = 1, 2, ...  The weight m_j is the denominator of the scaling
factor 1/m_j applied at a depth-j averaging step; the width n_j caps how many
successive blocks such a step may combine.  The official parameters double
exponentially: m_1 = n_1 = 4, m_{j+1} = m_j^2, and

    n_{j+1} = m_{j+1}^2 * (4 n_j)^(log2 m_{j+1}),

which is an exact integer because every m_j is a power of two.  Relaxed
(toy) parameters are allowed everywhere; ``validate_params`` reports which
growth conditions they satisfy instead of rejecting them.

All arithmetic is exact rational (fractions.Fraction).  No floats.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Iterator, Mapping


class ParameterHorizonError(Exception):
    """A family index beyond the finite truncation was requested."""


class UndecidableGrowthError(Exception):
    """The width growth comparison did not separate at the precision cap."""


def _exact_log2(a: int) -> int | None:
    """log2(a) if a is a power of two, else None."""
    if a >= 1 and a & (a - 1) == 0:
        return a.bit_length() - 1
    return None


def _width_condition(m_next: int, n_prev: int, n_next: int) -> bool:
    """Decide n_next >= m_next^2 * (4 n_prev)^(log2 m_next) exactly.

    Since (4k)^(log2 m) = m^(log2 4k), the threshold equals m^(log2 16k)
    with k = n_prev.  Power-of-two cases reduce to integer powers.  The
    general case brackets x = log2(16k) by p/q <= x < (p+1)/q using
    floor(q*x) = bitlength((16k)^q) - 1 and compares n^q against m^p,
    m^(p+1); q doubles until the integers separate.
    """
    e = _exact_log2(m_next)
    if e is not None:
        return n_next >= m_next ** 2 * (4 * n_prev) ** e
    a = 16 * n_prev
    b = _exact_log2(a)
    if b is not None:
        return n_next >= m_next ** b
    q = 8
    while q <= 4096:
        p = (a ** q).bit_length() - 1  # p = floor(q * log2 a)
        nq = n_next ** q
        if nq >= m_next ** (p + 1):
            return True
        if nq < m_next ** p:
            return False
        q *= 2
    raise UndecidableGrowthError(
        f"width comparison for (m={m_next}, prev n={n_prev}, n={n_next}) "
        "did not separate at exponent denominator 4096"
    )


class Params:
    """A finite 1-indexed list of (m_j, n_j) weight/width families.

    Construction enforces only the structural invariants (m_j >= 2, n_j >= 1,
    m strictly increasing); the growth conditions of the official parameters
    are checked separately by validate_params and never block construction.
    """

    __slots__ = ("families",)

    def __init__(self, families: Iterable[tuple[int, int]]):
        fams = tuple((int(m), int(n)) for m, n in families)
        if not fams:
            raise ValueError("at least one (m, n) family is required")
        for m, n in fams:
            if m < 2:
                raise ValueError(f"weight m={m} must be >= 2")
            if n < 1:
                raise ValueError(f"width n={n} must be >= 1")
        for (m1, _), (m2, _) in zip(fams, fams[1:]):
            if m2 <= m1:
                raise ValueError(f"weights must strictly increase, got {m1} then {m2}")
        self.families = fams

    @classmethod
    def official(cls, count: int) -> "Params":
        """The first `count` official families, all values exact integers."""
        if count < 1:
            raise ValueError("count must be >= 1")
        fams = [(4, 4)]
        for _ in range(count - 1):
            m_prev, n_prev = fams[-1]
            m_next = m_prev ** 2
            e = _exact_log2(m_next)
            assert e is not None  # every official weight is a power of two
            fams.append((m_next, m_next ** 2 * (4 * n_prev) ** e))
        return cls(fams)

    @property
    def horizon(self) -> int:
        return len(self.families)

    def _check(self, j: int) -> None:
        if not 1 <= j <= len(self.families):
            raise ParameterHorizonError(
                f"family index j={j} beyond parameter horizon {len(self.families)}"
            )

    def m(self, j: int) -> int:
        self._check(j)
        return self.families[j - 1][0]

    def n(self, j: int) -> int:
        self._check(j)
        return self.families[j - 1][1]

    def weight(self, j: int) -> Fraction:
        """The scaling factor 1/m_j."""
        return Fraction(1, self.m(j))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Params) and self.families == other.families

    def __repr__(self) -> str:
        return f"Params({list(self.families)!r})"

    def to_json(self) -> list[list[int]]:
        return [[m, n] for m, n in self.families]

    @classmethod
    def from_json(cls, data: Iterable[Iterable[int]]) -> "Params":
        return cls(tuple((int(m), int(n)) for m, n in data))


class GrowthStep:
    """Growth flags for the step from family j to family j+1."""

    __slots__ = ("j", "weight_ok", "width_ok")

    def __init__(self, j: int, weight_ok: bool, width_ok: bool):
        self.j = j
        self.weight_ok = weight_ok
        self.width_ok = width_ok

    @property
    def ok(self) -> bool:
        return self.weight_ok and self.width_ok

    def __repr__(self) -> str:
        return f"GrowthStep(j={self.j}, weight_ok={self.weight_ok}, width_ok={self.width_ok})"


class GrowthReport:
    """Per-step growth flags plus the base condition m_1 = n_1 = 4."""

    __slots__ = ("base_ok", "steps")

    def __init__(self, base_ok: bool, steps: tuple[GrowthStep, ...]):
        self.base_ok = base_ok
        self.steps = steps

    @property
    def all_ok(self) -> bool:
        return self.base_ok and all(s.ok for s in self.steps)

    def __repr__(self) -> str:
        return f"GrowthReport(base_ok={self.base_ok}, steps={list(self.steps)!r})"


def validate_params(p: Params) -> GrowthReport:
    """Report which growth conditions hold; never rejects relaxed parameters.

    Checks m_1 = n_1 = 4, then per step j: m_{j+1} >= m_j^2 and
    n_{j+1} >= m_{j+1}^2 (4 n_j)^(log2 m_{j+1}), decided exactly.
    """
    base_ok = p.families[0] == (4, 4)
    steps = []
    for j in range(1, p.horizon):
        m_j, n_j = p.families[j - 1]
        m_next, n_next = p.families[j]
        steps.append(
            GrowthStep(
                j,
                weight_ok=m_next >= m_j ** 2,
                width_ok=_width_condition(m_next, n_j, n_next),
            )
        )
    return GrowthReport(base_ok, tuple(steps))


def _clean_coords(coords: Mapping[int, Fraction] | Iterable[tuple[int, Fraction]]) -> dict:
    items = coords.items() if isinstance(coords, Mapping) else coords
    out = {}
    for k, v in items:
        k = int(k)
        if k < 1:
            raise ValueError(f"basis index {k} must be a positive integer")
        v = Fraction(v)
        if v != 0:
            out[k] = v
    return out


class FinVector:
    """A finitely supported exact-rational vector over positive indices.

    Zero coordinates are never stored.  Instances are treated as immutable
    after construction; all operations return fresh vectors.
    """

    __slots__ = ("coords",)

    def __init__(self, coords: Mapping[int, Fraction] | Iterable[tuple[int, Fraction]] = ()):
        self.coords = _clean_coords(coords)

    @classmethod
    def unit(cls, k: int, sign: int = 1) -> "FinVector":
        return cls({k: Fraction(sign)})

    def __getitem__(self, k: int) -> Fraction:
        return self.coords.get(k, Fraction(0))

    def support(self) -> list[int]:
        return sorted(self.coords)

    @property
    def is_zero(self) -> bool:
        return not self.coords

    def min_support(self) -> int:
        if not self.coords:
            raise ValueError("zero vector has no support")
        return min(self.coords)

    def max_support(self) -> int:
        if not self.coords:
            raise ValueError("zero vector has no support")
        return max(self.coords)

    def __add__(self, other: "FinVector") -> "FinVector":
        out = dict(self.coords)
        for k, v in other.coords.items():
            w = out.get(k, Fraction(0)) + v
            if w == 0:
                out.pop(k, None)
            else:
                out[k] = w
        return type(self)(out)

    def __sub__(self, other: "FinVector") -> "FinVector":
        return self + other.scale(Fraction(-1))

    def scale(self, c: Fraction) -> "FinVector":
        c = Fraction(c)
        if c == 0:
            return type(self)()
        return type(self)({k: c * v for k, v in self.coords.items()})

    def __neg__(self) -> "FinVector":
        return self.scale(Fraction(-1))

    def dot(self, other: "FinVector") -> Fraction:
        a, b = self.coords, other.coords
        if len(b) < len(a):
            a, b = b, a
        return sum((v * b[k] for k, v in a.items() if k in b), Fraction(0))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FinVector) and self.coords == other.coords

    def __iter__(self) -> Iterator[tuple[int, Fraction]]:
        return iter(sorted(self.coords.items()))

    def __repr__(self) -> str:
        body = ", ".join(f"{k}: {v}" for k, v in self)
        return f"{type(self).__name__}({{{body}}})"


class FinFunctional(FinVector):
    """A finitely supported exact-rational functional; pairs with FinVector."""

    __slots__ = ()


class IndexInterval:
    """A closed integer interval [lo, hi] of positive basis indices."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo: int, hi: int):
        lo, hi = int(lo), int(hi)
        if lo < 1:
            raise ValueError(f"interval start {lo} must be >= 1")
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        self.lo = lo
        self.hi = hi

    @classmethod
    def half_open(cls, p: int, q: int) -> "IndexInterval":
        """The interval (p, q] as a closed interval [p+1, q]."""
        return cls(p + 1, q)

    def __contains__(self, k: int) -> bool:
        return self.lo <= k <= self.hi

    def intersect(self, other: "IndexInterval") -> "IndexInterval | None":
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        return IndexInterval(lo, hi) if lo <= hi else None

    def contains_interval(self, other: "IndexInterval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, IndexInterval)
            and (self.lo, self.hi) == (other.lo, other.hi)
        )

    def __hash__(self) -> int:
        return hash((self.lo, self.hi))

    def __repr__(self) -> str:
        return f"IndexInterval({self.lo}, {self.hi})"


def project_interval(x: FinVector, e: IndexInterval) -> FinVector:
    """Restrict x to the coordinates inside e; exact, zero-free."""
    return type(x)({k: v for k, v in x.coords.items() if e.lo <= k <= e.hi})


def rat_to_str(v: Fraction) -> str:
    """Serialize a rational as "p/q" (always with the denominator)."""
    v = Fraction(v)
    return f"{v.numerator}/{v.denominator}"


def rat_from_str(s: str) -> Fraction:
    if "/" in s:
        num, den = s.split("/", 1)
        return Fraction(int(num), int(den))
    return Fraction(int(s))
