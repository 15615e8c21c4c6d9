"""Moebius maps of the upper half-plane, Fuchsian group data and coset rows.

Maps are stored as real 2x2 matrices normalized to unit determinant.  The
sign ambiguity of PSL(2, R) is removed by a canonical sign: the first nonzero
entry among (c, d, a) is made positive.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MoebiusMap",
    "GroupKind",
    "CuspRecord",
    "FuchsianGroupSpec",
    "BottomRowSet",
    "UnsupportedEnumeration",
    "apply",
    "enumerate_bottom_rows",
    "cusp_normalize",
]

_DET_TOL = 1e-12


class UnsupportedEnumeration(NotImplementedError):
    """Raised when coset rows are requested for a group without an enumerator."""


@dataclass(frozen=True, eq=False)
class MoebiusMap:
    """Real Moebius transformation zeta -> (a zeta + b) / (c zeta + d).

    Any matrix with positive determinant is accepted and rescaled so that
    ``ad - bc = 1``.  Equality is up to an overall sign.
    """

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        vals = np.array([self.a, self.b, self.c, self.d], dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError("Moebius entries must be finite")
        det = vals[0] * vals[3] - vals[1] * vals[2]
        if det <= 0:
            raise ValueError(f"determinant must be positive, got {det!r}")
        if abs(det - 1.0) > _DET_TOL:
            vals = vals / math.sqrt(det)
        # canonical sign: first nonzero of (c, d, a) positive
        for k in (2, 3, 0):
            if vals[k] != 0.0:
                if vals[k] < 0:
                    vals = -vals
                break
        for name, v in zip("abcd", vals):
            object.__setattr__(self, name, float(v))

    # construction helpers
    @classmethod
    def from_matrix(cls, m) -> "MoebiusMap":
        m = np.asarray(m, dtype=float)
        if m.shape != (2, 2):
            raise ValueError("expected a 2x2 matrix")
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    @classmethod
    def identity(cls) -> "MoebiusMap":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def translation(cls, b: float) -> "MoebiusMap":
        return cls(1.0, b, 0.0, 1.0)

    @classmethod
    def scaling(cls, k: float) -> "MoebiusMap":
        """The dilation zeta -> k zeta (k > 0)."""
        if k <= 0:
            raise ValueError("scale factor must be positive")
        return cls(k, 0.0, 0.0, 1.0)

    @classmethod
    def inversion(cls) -> "MoebiusMap":
        """zeta -> -1/zeta."""
        return cls(0.0, -1.0, 1.0, 0.0)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    @property
    def trace(self) -> float:
        return self.a + self.d

    def inverse(self) -> "MoebiusMap":
        return MoebiusMap(self.d, -self.b, -self.c, self.a)

    def compose(self, other: "MoebiusMap") -> "MoebiusMap":
        """Return self o other."""
        return MoebiusMap.from_matrix(self.matrix @ other.matrix)

    __matmul__ = compose

    def __call__(self, zeta):
        return apply(self, zeta)

    def image_of_infinity(self) -> float:
        return math.inf if self.c == 0 else self.a / self.c

    def derivative(self, zeta):
        """d/dzeta of the map, 1/(c zeta + d)^2."""
        zeta = np.asarray(zeta, dtype=complex)
        return 1.0 / (self.c * zeta + self.d) ** 2

    def fixed_points(self) -> tuple[float, float]:
        """Real fixed points of a hyperbolic map, ordered (repelling, attracting)."""
        tr = abs(self.trace)
        if tr <= 2:
            raise ValueError("map is not hyperbolic")
        if self.c == 0:
            raise ValueError("hyperbolic map fixes infinity")
        disc = math.sqrt((self.a + self.d) ** 2 - 4.0)
        p = (self.a - self.d - disc) / (2 * self.c)
        q = (self.a - self.d + disc) / (2 * self.c)
        # the derivative at a fixed point x is (c x + d)^-2
        if abs(self.c * p + self.d) > 1:
            p, q = q, p
        return p, q

    def _key(self) -> tuple:
        return tuple(round(v, 9) + 0.0 for v in (self.a, self.b, self.c, self.d))

    def __eq__(self, other):
        if not isinstance(other, MoebiusMap):
            return NotImplemented
        mine = np.array([self.a, self.b, self.c, self.d])
        theirs = np.array([other.a, other.b, other.c, other.d])
        return bool(np.allclose(mine, theirs, rtol=0, atol=1e-10)
                    or np.allclose(mine, -theirs, rtol=0, atol=1e-10))

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return f"MoebiusMap([[{self.a:.6g}, {self.b:.6g}], [{self.c:.6g}, {self.d:.6g}]])"


def apply(m: MoebiusMap, zeta):
    """Apply ``m`` to points of the upper half-plane.

    Parameters
    ----------
    m : MoebiusMap
    zeta : complex or array_like of complex
        Points with positive imaginary part.

    Returns
    -------
    complex or ndarray
        ``(a zeta + b) / (c zeta + d)``; its imaginary part equals
        ``Im zeta / |c zeta + d|**2``.
    """
    z = np.asarray(zeta, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise ValueError("non-finite point")
    if np.any(z.imag <= 0):
        raise ValueError("points must lie in the upper half-plane")
    den = m.c * z + m.d
    w = (m.a * z + m.b) / den
    # recompute the imaginary part from the exact identity to avoid cancellation
    w = w.real + 1j * (z.imag / np.abs(den) ** 2)
    return w[()] if w.ndim == 0 else w


class GroupKind(enum.Enum):
    PARABOLIC_CYLINDER = "ParabolicCylinder"
    GAMMA_TWO = "GammaTwo"
    EXPLICIT_GENERATORS = "ExplicitGenerators"


@dataclass(frozen=True)
class CuspRecord:
    """A cusp of a Fuchsian group.

    ``normalizer`` sends infinity to the cusp point and ``width_scale`` is the
    dilation that turns the conjugated stabilizer into unit translations.
    """

    label: str
    normalizer: MoebiusMap
    width_scale: float = 1.0

    def __post_init__(self):
        if not (self.width_scale > 0 and math.isfinite(self.width_scale)):
            raise ValueError("width_scale must be a positive finite number")

    @property
    def point(self) -> float:
        return self.normalizer.image_of_infinity()

    @property
    def width(self) -> float:
        return 1.0 / self.width_scale

    @property
    def chart(self) -> MoebiusMap:
        """Map from the unit-width cusp coordinate to the group's coordinate."""
        return self.normalizer @ MoebiusMap.scaling(1.0 / self.width_scale)

    def stabilizer_generator(self) -> MoebiusMap:
        """Primitive parabolic element fixing the cusp."""
        n = self.chart
        return n @ MoebiusMap.translation(1.0) @ n.inverse()


def _is_integral(m: MoebiusMap, tol=1e-9) -> bool:
    v = np.array([m.a, m.b, m.c, m.d])
    return bool(np.all(np.abs(v - np.round(v)) < tol))


@dataclass(frozen=True)
class FuchsianGroupSpec:
    """Description of a Fuchsian group with a list of cusps.

    ``conjugation`` records the map ``N`` such that the described group is
    ``N^-1 G N`` for the base group ``G`` of the given kind; points move from
    the present coordinate to the base coordinate by ``N``.
    """

    kind: GroupKind
    cusps: tuple[CuspRecord, ...]
    generators: tuple[MoebiusMap, ...] = ()
    conjugation: MoebiusMap = field(default_factory=MoebiusMap.identity)

    def __post_init__(self):
        object.__setattr__(self, "cusps", tuple(self.cusps))
        object.__setattr__(self, "generators", tuple(self.generators))
        labels = [c.label for c in self.cusps]
        if len(set(labels)) != len(labels):
            raise ValueError("cusp labels must be distinct")
        if self.kind is not GroupKind.EXPLICIT_GENERATORS:
            for cusp in self.cusps:
                g = cusp.stabilizer_generator()
                if not self.contains(g):
                    raise ValueError(
                        f"cusp {cusp.label!r}: normalizer does not produce a stabilizer element")
                # the translation by a smaller fraction must not lie in the group
                half = cusp.chart @ MoebiusMap.translation(0.5) @ cusp.chart.inverse()
                if self.contains(half):
                    raise ValueError(f"cusp {cusp.label!r}: width is not primitive")

    @classmethod
    def parabolic_cylinder(cls) -> "FuchsianGroupSpec":
        """The integer translations, a single cusp at infinity of width one."""
        cusp = CuspRecord("inf", MoebiusMap.identity(), 1.0)
        return cls(GroupKind.PARABOLIC_CYLINDER, (cusp,), (MoebiusMap.translation(1.0),))

    @classmethod
    def gamma_two(cls) -> "FuchsianGroupSpec":
        """Principal congruence group of level two; cusps at infinity, 0 and 1."""
        cusps = (
            CuspRecord("inf", MoebiusMap.identity(), 0.5),
            CuspRecord("0", MoebiusMap(0.0, -1.0, 1.0, 0.0), 0.5),
            CuspRecord("1", MoebiusMap(1.0, -1.0, 1.0, 0.0), 0.5),
        )
        gens = (MoebiusMap(1.0, 2.0, 0.0, 1.0), MoebiusMap(1.0, 0.0, 2.0, 1.0))
        return cls(GroupKind.GAMMA_TWO, cusps, gens)

    @classmethod
    def explicit(cls, generators, cusps=()) -> "FuchsianGroupSpec":
        return cls(GroupKind.EXPLICIT_GENERATORS, tuple(cusps), tuple(generators))

    def cusp(self, label: str) -> CuspRecord:
        for c in self.cusps:
            if c.label == label:
                return c
        raise KeyError(f"no cusp labelled {label!r}")

    def contains(self, m: MoebiusMap) -> bool:
        """Membership test, available for the enumerable kinds."""
        g = self.conjugation @ m @ self.conjugation.inverse()
        if self.kind is GroupKind.PARABOLIC_CYLINDER:
            return (_is_integral(g) and abs(g.c) < 1e-9
                    and abs(abs(g.a) - 1) < 1e-9 and abs(abs(g.d) - 1) < 1e-9)
        if self.kind is GroupKind.GAMMA_TWO:
            if not _is_integral(g):
                return False
            v = np.round([g.a, g.b, g.c, g.d]).astype(int)
            return bool(v[1] % 2 == 0 and v[2] % 2 == 0 and v[0] % 2 == 1 and v[3] % 2 == 1)
        raise UnsupportedEnumeration("membership is not available for explicit generators")


@dataclass(frozen=True)
class BottomRowSet:
    """Representatives (c, d) of the cosets of the cusp stabilizer.

    Each row with ``c > 0`` stands for the whole class ``{(c, d + k c)}``
    under integer translation; ``d`` is reduced to ``0 < d < c``.  The class
    sums are carried out in closed form by the evaluators.
    """

    rows: tuple[tuple[int, int], ...]
    cutoff: int

    def __post_init__(self):
        seen = set()
        for c, d in self.rows:
            if c < 0 or math.gcd(c, d) != 1:
                raise ValueError(f"invalid bottom row {(c, d)}")
            if c == 0 and d != 1:
                raise ValueError("the only row with c = 0 is (0, 1)")
            if (c, d) in seen:
                raise ValueError(f"duplicate bottom row {(c, d)}")
            seen.add((c, d))

    def __len__(self):
        return len(self.rows)

    def __contains__(self, row):
        return tuple(row) in set(self.rows)

    def arrays(self, include_identity: bool = False) -> tuple[np.ndarray, np.ndarray]:
        rows = [r for r in self.rows if include_identity or r[0] > 0]
        if not rows:
            return np.zeros(0), np.zeros(0)
        a = np.array(rows, dtype=float)
        return a[:, 0], a[:, 1]


def enumerate_bottom_rows(spec: FuchsianGroupSpec, cusp: CuspRecord, C: int) -> BottomRowSet:
    """List coset representatives with ``0 < c <= C`` plus the row (0, 1).

    For the level-two group the rows satisfy ``c`` even and ``d`` odd; rows
    are returned in lexicographic order.
    """
    if int(C) != C or C < 1:
        raise ValueError("cutoff must be a positive integer")
    C = int(C)
    if cusp not in spec.cusps:
        raise ValueError("cusp does not belong to the group")
    if spec.kind is GroupKind.PARABOLIC_CYLINDER:
        return BottomRowSet(((0, 1),), C)
    if spec.kind is GroupKind.GAMMA_TWO:
        rows = [(0, 1)]
        for c in range(2, C + 1, 2):
            rows.extend((c, d) for d in range(1, c, 2) if math.gcd(c, d) == 1)
        return BottomRowSet(tuple(rows), C)
    raise UnsupportedEnumeration("coset enumeration needs ParabolicCylinder or GammaTwo")


def cusp_normalize(spec: FuchsianGroupSpec, cusp: CuspRecord) -> FuchsianGroupSpec:
    """Conjugate ``spec`` so that ``cusp`` sits at infinity with width one.

    The returned spec records the accumulated conjugation ``N``; a point
    ``w`` of the new chart corresponds to ``N(w)`` in the base chart.
    """
    if cusp not in spec.cusps:
        raise ValueError("cusp does not belong to the group")
    n = cusp.chart
    new_cusps = []
    for other in spec.cusps:
        if other == cusp:
            new_cusps.append(CuspRecord(other.label, MoebiusMap.identity(), 1.0))
        else:
            new_cusps.append(CuspRecord(other.label, n.inverse() @ other.chart, 1.0))
    # move the distinguished cusp to the front
    new_cusps.sort(key=lambda c: c.label != cusp.label)
    return FuchsianGroupSpec(spec.kind, tuple(new_cusps),
                             tuple(n.inverse() @ g @ n for g in spec.generators),
                             spec.conjugation @ n)
