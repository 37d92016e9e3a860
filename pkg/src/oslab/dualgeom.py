"""Geometry of the two-sphere compactification of the punctured dual space.

The punctured frequency space R^d \\ {0} is completed by a sphere of
directions at the origin and another at infinity.  The whole set is realised
as a spherical shell inside R^{1+d}: a nonzero frequency xi is sent to

    J(xi) = ( 1/sqrt(1+(|xi|+rho0)^2),
              (|xi|+rho0)/sqrt(1+(|xi|+rho0)^2) * xi/|xi| ),

the origin sphere to the cap zeta0 = r1 = 1/sqrt(1+rho0^2), and the sphere
at infinity to the equator zeta0 = 0.  Pulling the Euclidean distance of
R^{1+d} back through J gives a metric under which interior sequences converge
to boundary points exactly when their moduli go to 0 or infinity with
converging directions.

Everything here is exact closed-form arithmetic; the only numerics are the
tolerances used to snap floating-point images onto the boundary spheres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CompactParams",
    "CompactPoint",
    "Interior",
    "SigmaZero",
    "SigmaInfinity",
    "SpherePoint",
    "compactify",
    "decompactify",
    "metric",
    "classify_limit",
]

# Snap tolerance for boundary detection in decompactify (double-precision
# roundtrip stability).
BOUNDARY_SNAP = 1e-10

# Unit vectors are renormalized on construction; worse than this is rejected.
UNIT_NORM_TOL = 1e-6


def _as_vector(x, d=None):
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise ValueError("expected a 1-d vector, got shape %s" % (v.shape,))
    if d is not None and v.size != d:
        raise ValueError("expected a vector of length %d, got %d" % (d, v.size))
    return v


@dataclass(frozen=True)
class CompactParams:
    """Dimension and the translation radius rho0 of the shell model.

    The derived cap height r1 = (1+rho0^2)^{-1/2} is always recomputed from
    rho0, never stored.  rho0 defaults to 1; any fixed positive value gives
    the same topology.
    """

    d: int
    rho0: float = 1.0

    def __post_init__(self):
        if int(self.d) < 1:
            raise ValueError("dimension must be >= 1")
        if not (self.rho0 > 0):
            raise ValueError("rho0 must be positive")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "rho0", float(self.rho0))

    @property
    def r1(self) -> float:
        return 1.0 / math.sqrt(1.0 + self.rho0 * self.rho0)


class CompactPoint:
    """Base class: a point of the compactified punctured dual space."""

    __slots__ = ()


@dataclass(frozen=True)
class Interior(CompactPoint):
    """A nonzero frequency xi in R^d."""

    xi: np.ndarray

    def __init__(self, xi):
        v = _as_vector(xi)
        if not np.all(np.isfinite(v)):
            raise ValueError("interior point must be finite")
        if np.linalg.norm(v) == 0.0:
            raise ValueError("interior point must be nonzero")
        object.__setattr__(self, "xi", v)

    def __eq__(self, other):
        return isinstance(other, Interior) and np.array_equal(self.xi, other.xi)

    def __hash__(self):
        return hash(("interior", self.xi.tobytes()))


def _unit(e) -> np.ndarray:
    v = _as_vector(e)
    n = np.linalg.norm(v)
    if abs(n - 1.0) > UNIT_NORM_TOL:
        raise ValueError("direction must be a unit vector (|e| = %.6g)" % n)
    return v / n


@dataclass(frozen=True)
class SigmaZero(CompactPoint):
    """Boundary point of the origin sphere in direction e."""

    e: np.ndarray

    def __init__(self, e):
        object.__setattr__(self, "e", _unit(e))

    def __eq__(self, other):
        return isinstance(other, SigmaZero) and np.array_equal(self.e, other.e)

    def __hash__(self):
        return hash(("zero", self.e.tobytes()))


@dataclass(frozen=True)
class SigmaInfinity(CompactPoint):
    """Boundary point of the sphere at infinity in direction e."""

    e: np.ndarray

    def __init__(self, e):
        object.__setattr__(self, "e", _unit(e))

    def __eq__(self, other):
        return isinstance(other, SigmaInfinity) and np.array_equal(self.e, other.e)

    def __hash__(self):
        return hash(("infinity", self.e.tobytes()))


@dataclass(frozen=True)
class SpherePoint:
    """A point (zeta0, zeta) on the unit sphere of R^{1+d} with zeta0 >= 0."""

    zeta0: float
    zeta: np.ndarray = field(compare=False)

    def __init__(self, zeta0, zeta):
        z = _as_vector(zeta)
        zeta0 = float(zeta0)
        norm2 = zeta0 * zeta0 + float(np.dot(z, z))
        if abs(norm2 - 1.0) > 1e-12 * 10:
            raise ValueError("(zeta0, zeta) must lie on the unit sphere")
        if zeta0 < -1e-12:
            raise ValueError("zeta0 must be nonnegative")
        object.__setattr__(self, "zeta0", zeta0)
        object.__setattr__(self, "zeta", z)

    def embed(self) -> np.ndarray:
        """Coordinates in R^{1+d}."""
        return np.concatenate(([self.zeta0], self.zeta))


def compactify(p: CompactPoint, params: CompactParams) -> SpherePoint:
    """The shell map J, extended to both boundary spheres.

    Interior xi:  J(xi) = ((1+(|xi|+rho0)^2)^{-1/2},
                           ((|xi|+rho0)/sqrt(1+(|xi|+rho0)^2)) xi/|xi|).
    Origin sphere: J(0^e) = (r1, rho0 r1 e).
    Sphere at infinity: J(inf^e) = (0, e).
    """
    if isinstance(p, Interior):
        xi = _as_vector(p.xi, params.d)
        r = float(np.linalg.norm(xi))
        if r == 0.0:
            raise ValueError("interior point must be nonzero")
        t = r + params.rho0
        den = math.sqrt(1.0 + t * t)
        return SpherePoint(1.0 / den, (t / den) * (xi / r))
    if isinstance(p, SigmaZero):
        e = _as_vector(p.e, params.d)
        r1 = params.r1
        return SpherePoint(r1, params.rho0 * r1 * e)
    if isinstance(p, SigmaInfinity):
        e = _as_vector(p.e, params.d)
        return SpherePoint(0.0, e.copy())
    raise TypeError("not a CompactPoint: %r" % (p,))


def decompactify(s: SpherePoint, params: CompactParams) -> CompactPoint:
    """Inverse of the shell map: (zeta0, zeta) -> zeta/zeta0 - rho0 zeta/|zeta|.

    First coordinates within BOUNDARY_SNAP of 0 or r1 snap to the boundary
    spheres.
    """
    z = _as_vector(s.zeta, params.d)
    nz = float(np.linalg.norm(z))
    if nz == 0.0:
        raise ValueError("zeta must be nonzero on the shell")
    if abs(s.zeta0) < BOUNDARY_SNAP:
        return SigmaInfinity(z / nz)
    if abs(s.zeta0 - params.r1) < BOUNDARY_SNAP:
        return SigmaZero(z / nz)
    if not (0.0 < s.zeta0 < params.r1):
        raise ValueError(
            "zeta0 = %.17g outside [0, r1 = %.17g]" % (s.zeta0, params.r1)
        )
    return Interior(z / s.zeta0 - params.rho0 * z / nz)


def metric(p: CompactPoint, q: CompactPoint, params: CompactParams) -> float:
    """Distance pulled back from the Euclidean metric of R^{1+d} through J."""
    a = compactify(p, params).embed()
    b = compactify(q, params).embed()
    return float(np.linalg.norm(a - b))


def _tail_length(n: int) -> int:
    return max(8, -(-n // 4))  # max(8, ceil(n/4))


def classify_limit(xis, params: CompactParams):
    """Classify the limit of a sequence of nonzero frequencies.

    Returns the CompactPoint the sequence converges to in the shell metric,
    or the string "divergent" when the tail is not Cauchy.  The tail is the
    last max(8, ceil(len/4)) entries; it counts as Cauchy when all successive
    shell-image gaps are below 1e-6 and do not grow (1.25x jitter allowed).

    The limiting shell point is estimated from the last entry plus a
    geometric-tail correction, and snapped to a boundary sphere when its
    first coordinate is within max(1e-9, 4x the estimated remaining gap).
    """
    pts = list(xis)
    if not pts:
        raise ValueError("classify_limit needs a nonempty sequence")
    images = np.array(
        [compactify(Interior(xi), params).embed() for xi in pts], dtype=float
    )
    tail = images[-_tail_length(len(pts)):]
    if len(tail) < 2:
        tail = images[-2:] if len(images) >= 2 else images
    gaps = np.linalg.norm(np.diff(tail, axis=0), axis=1)
    if len(gaps) == 0:
        gaps = np.array([0.0])
    cauchy = bool(np.all(gaps < 1e-6)) and bool(
        np.all(gaps[1:] <= 1.25 * gaps[:-1] + 1e-15)
    )
    if not cauchy:
        return "divergent"

    limit = tail[-1].copy()
    g_last = float(gaps[-1])
    remaining = g_last
    if len(gaps) >= 2 and gaps[-2] > 0 and g_last > 0:
        # geometric remainder estimate g r/(1-r) and the matching
        # extrapolated limit point; polynomial tails have ratios just under
        # 1 and underestimate the remainder by a bounded factor, which the
        # 4x snap window below absorbs (ratio capped for stability)
        ratio = min(gaps[-1] / gaps[-2], 0.9999)
        remaining = g_last * ratio / (1.0 - ratio)
        limit = tail[-1] + (tail[-1] - tail[-2]) * ratio / (1.0 - ratio)

    snap = max(1e-9, 4.0 * remaining)
    zeta0, zeta = limit[0], limit[1:]
    nz = float(np.linalg.norm(zeta))
    if nz == 0.0:
        return "divergent"
    if abs(zeta0) < snap:
        return SigmaInfinity(zeta / nz)
    if abs(zeta0 - params.r1) < snap:
        return SigmaZero(zeta / nz)
    # renormalize the extrapolated point onto the sphere before inverting
    vec = limit / np.linalg.norm(limit)
    return decompactify(SpherePoint(vec[0], vec[1:]), params)
