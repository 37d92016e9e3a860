"""Canonical weakly null sequence families on the torus grid.

Three generators cover the sequences the pairing experiments need:

  concentration   zeta_{p,w}u(x) = w^(-d/p) u(|x - z|/w),   w = omega_n,
  oscillation     u(x - z) e^(2 pi i x.k/eps_n),
  composite53     u_n(x1,x2) = u1(x1) e^(2 pi i n x1) + n^(2/p) u2(n^2 x2)
                  v_n(x1,x2) = n^(2/p') v1(n^2 x1) + v2(x2) e^(2 pi i n x2),

together with the canonical duality partner |w|^(p-2) w, which for a
concentration is again a concentration (of the dual profile, at exponent p')
and for an oscillation carries the same modulation so that the pairing
<term, conj(dual_term)> = ||u||_p^p holds at every n.

Discretization rules:

  * concentration terms are sampled pointwise with nearest-image torus wrap;
    a resolution guard omega_n >= guard_cells * (L/N) rejects spikes the grid
    cannot hold, and a wrap guard L >= 20 * (dilated support radius) keeps
    the periodization error below 1e-8;
  * oscillation frequencies k/eps_n are snapped to the nearest grid mode
    m/L, the relative snap error is recorded in family provenance, and
    frequencies outside the Nyquist band are rejected;
  * composite53 samples the displayed formulas literally (no guard on the
    n^2-scale pieces; the modulation index must be a representable mode).
    Callers that need band-limited versions of the n^2 pieces build them
    from the profile data; this module keeps sampling semantics so a term
    always equals direct assembly of its two pieces.

Profiles are scalar functions of one real variable: gaussian, a compactly
supported polynomial-exponential bump, constant, or user-sampled data with
linear interpolation.  Concentration and oscillation use them radially about
the family center; composite53 applies them to single coordinates.
"""

from __future__ import annotations

import numpy as np

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

from .fourmult import Grid, GridFunction, fourier_mode, pair

WRAP_GUARD_FACTOR = 20.0
DEFAULT_GUARD_CELLS = 8.0

_PROFILE_KINDS = ("gaussian", "bump", "constant", "user_sampled")
_FAMILY_KINDS = ("concentration", "oscillation", "composite53")


@dataclass(frozen=True, eq=False)
class Profile:
    """A scalar base profile t -> u(t).

    fn evaluates the profile, deriv its first derivative (None when not
    available), ft the continuous Fourier transform xi -> u_hat(xi) for
    profiles that have one in closed form.  support_radius bounds the
    distance from `center` beyond which |u| <= 1e-9 * max|u| (exactly 0
    for the bump), and is what the torus wrap guard works with.
    """

    kind: str
    width: float
    center: float
    fn: Callable[[np.ndarray], np.ndarray]
    deriv: Optional[Callable[[np.ndarray], np.ndarray]]
    ft: Optional[Callable[[np.ndarray], np.ndarray]]
    support_radius: float


def make_profile(kind, width=1.0, center=0.0, value=1.0, samples=None):
    """Build a named base profile.

    gaussian:     u(t) = exp(-pi ((t-c)/w)^2), closed-form derivative and
                  Fourier transform w * exp(-pi (w xi)^2) e^(-2 pi i c xi).
    bump:         u(t) = value * exp(1 - 1/(1 - s^2)) for s = (t-c)/w inside
                  |s| < 1, zero outside; compact support radius w.
    constant:     u == value; support radius 0 (wrap-immune).
    user_sampled: linear interpolation of (t, u(t)) arrays passed as
                  `samples`; derivative from sample-wise slopes.
    """
    if kind not in _PROFILE_KINDS:
        raise ValueError("unknown profile kind %r; expected one of %s"
                         % (kind, ", ".join(_PROFILE_KINDS)))
    width = float(width)
    center = float(center)
    if kind != "constant" and not width > 0.0:
        raise ValueError("profile width must be positive, got %r" % width)

    if kind == "gaussian":
        def fn(t, _w=width, _c=center):
            s = (np.asarray(t, dtype=float) - _c) / _w
            return np.exp(-np.pi * s * s)

        def deriv(t, _w=width, _c=center):
            s = (np.asarray(t, dtype=float) - _c) / _w
            return (-2.0 * np.pi * s / _w) * np.exp(-np.pi * s * s)

        def ft(xi, _w=width, _c=center):
            xi = np.asarray(xi, dtype=float)
            return (_w * np.exp(-np.pi * (_w * xi) ** 2)
                    * np.exp(-2j * np.pi * _c * xi))

        # exp(-pi * 2.6^2) ~ 6e-10, so 2.6 widths hold the 1e-9 cut.
        return Profile("gaussian", width, center, fn, deriv, ft, 2.6 * width)

    if kind == "bump":
        def fn(t, _w=width, _c=center, _v=value):
            s = (np.asarray(t, dtype=float) - _c) / _w
            out = np.zeros_like(s)
            inside = np.abs(s) < 1.0
            si = s[inside]
            out[inside] = np.exp(1.0 - 1.0 / (1.0 - si * si))
            return _v * out

        def deriv(t, _w=width, _c=center, _v=value):
            s = (np.asarray(t, dtype=float) - _c) / _w
            out = np.zeros_like(s)
            inside = np.abs(s) < 1.0
            si = s[inside]
            core = np.exp(1.0 - 1.0 / (1.0 - si * si))
            out[inside] = core * (-2.0 * si / (1.0 - si * si) ** 2)
            return (_v / _w) * out

        return Profile("bump", width, center, fn, deriv, None, width)

    if kind == "constant":
        def fn(t, _v=value):
            return np.full_like(np.asarray(t, dtype=float), _v)

        def deriv(t):
            return np.zeros_like(np.asarray(t, dtype=float))

        return Profile("constant", width, center, fn, deriv, None, 0.0)

    # user_sampled
    if samples is None:
        raise ValueError("user_sampled profile needs samples=(t, values)")
    t_s = np.asarray(samples[0], dtype=float)
    v_s = np.asarray(samples[1])
    if t_s.ndim != 1 or t_s.shape != v_s.shape or t_s.size < 2:
        raise ValueError("samples must be two equal-length 1-d arrays")
    if not np.all(np.diff(t_s) > 0):
        raise ValueError("sample abscissae must be strictly increasing")
    slopes = np.gradient(v_s.real, t_s)

    def fn(t, _t=t_s, _v=v_s):
        t = np.asarray(t, dtype=float)
        out = np.interp(t, _t, _v.real).astype(complex)
        if np.iscomplexobj(_v):
            out = out + 1j * np.interp(t, _t, _v.imag)
        return out

    def deriv(t, _t=t_s, _s=slopes):
        return np.interp(np.asarray(t, dtype=float), _t, _s)

    radius = max(abs(t_s[0]), abs(t_s[-1]))
    return Profile("user_sampled", width, center, fn, deriv, None, radius)


def _as_schedule(spec):
    """Normalize a schedule given as callable, dict, or array to a callable."""
    if callable(spec):
        return spec
    if isinstance(spec, dict):
        table = {int(k): float(v) for k, v in spec.items()}
        return lambda n, _t=table: _t[int(n)]
    arr = np.asarray(spec, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("schedule must be callable, dict, or 1-d sequence")
    return lambda n, _a=arr: float(_a[int(n) - 1])


def snapped_frequency(freq, grid):
    """Snap a target frequency vector to the nearest grid mode.

    Returns (m, rel_error) where m is the integer mode vector (frequency
    m/L) and rel_error = |m/L - freq| / |freq|.  Raises when the snapped
    mode falls outside the representable band [-N/2, N/2).
    """
    freq = np.atleast_1d(np.asarray(freq, dtype=float))
    m = np.rint(freq * grid.L).astype(int)
    if np.any(m < -grid.N // 2) or np.any(m > grid.N // 2 - 1):
        raise ValueError(
            "frequency %s outside the Nyquist band of N=%d, L=%r"
            % (freq.tolist(), grid.N, grid.L))
    norm = float(np.linalg.norm(freq))
    err = float(np.linalg.norm(m / grid.L - freq)) / norm if norm > 0 else 0.0
    return m, err


@dataclass(frozen=True, eq=False)
class SequenceFamily:
    """One of the canonical weakly null families; see the module docstring.

    The exponent stored in `p` is always the primal Lebesgue exponent; a
    composite53 family with role="dual" lives in L^{p'} and its formulas
    and duality partner use p' = p/(p-1) internally (the `exponent`
    property).  provenance collects per-n discretization records, currently
    the oscillation frequency snap errors.
    """

    kind: str
    d: int
    p: float
    profiles: Tuple[Profile, ...]
    center: Optional[Tuple[float, ...]] = None
    k: Optional[Tuple[float, ...]] = None
    scale_schedule: Optional[Callable[[int], float]] = None
    epsilon_schedule: Optional[Callable[[int], float]] = None
    role: Optional[str] = None
    guard_cells: float = DEFAULT_GUARD_CELLS
    provenance: dict = field(default_factory=dict)

    @property
    def exponent(self):
        """Lebesgue exponent of the generated terms."""
        if self.kind == "composite53" and self.role == "dual":
            return self.p / (self.p - 1.0)
        return self.p


def make_family(kind, d, p, **kw):
    """Validated constructor for SequenceFamily.

    concentration: profile=Profile, center=z (length d), omega=schedule.
    oscillation:   profile=Profile, k=wavevector (length d, nonzero),
                   epsilon=schedule, center=z optional.
    composite53:   profiles=(u1, u2) or (v1, v2), role="primal"|"dual";
                   requires d == 2.
    """
    if kind not in _FAMILY_KINDS:
        raise ValueError("unknown family kind %r; expected one of %s"
                         % (kind, ", ".join(_FAMILY_KINDS)))
    d = int(d)
    p = float(p)
    if d < 1:
        raise ValueError("dimension must be >= 1, got %d" % d)
    if not 1.0 < p < np.inf:
        raise ValueError("exponent p must lie in (1, inf), got %r" % p)
    guard_cells = float(kw.pop("guard_cells", DEFAULT_GUARD_CELLS))

    if kind == "concentration":
        profile = kw.pop("profile", None) or make_profile("gaussian")
        center = tuple(float(c) for c in kw.pop("center", (0.0,) * d))
        if len(center) != d:
            raise ValueError("center must have length d=%d" % d)
        omega = _as_schedule(kw.pop("omega"))
        if kw:
            raise ValueError("unexpected arguments: %s" % sorted(kw))
        return SequenceFamily("concentration", d, p, (profile,),
                              center=center, scale_schedule=omega,
                              guard_cells=guard_cells)

    if kind == "oscillation":
        profile = kw.pop("profile", None) or make_profile("constant")
        center = tuple(float(c) for c in kw.pop("center", (0.0,) * d))
        k = tuple(float(c) for c in np.atleast_1d(kw.pop("k")))
        if len(k) != d or len(center) != d:
            raise ValueError("k and center must have length d=%d" % d)
        if not np.linalg.norm(k) > 0:
            raise ValueError("oscillation wavevector k must be nonzero")
        epsilon = _as_schedule(kw.pop("epsilon"))
        if kw:
            raise ValueError("unexpected arguments: %s" % sorted(kw))
        return SequenceFamily("oscillation", d, p, (profile,),
                              center=center, k=k, epsilon_schedule=epsilon,
                              guard_cells=guard_cells)

    # composite53
    if d != 2:
        raise ValueError("composite53 is a two-dimensional family (d=2)")
    profiles = tuple(kw.pop("profiles"))
    if len(profiles) != 2:
        raise ValueError("composite53 needs exactly two profiles")
    role = kw.pop("role", "primal")
    if role not in ("primal", "dual"):
        raise ValueError("role must be 'primal' or 'dual', got %r" % role)
    if kw:
        raise ValueError("unexpected arguments: %s" % sorted(kw))
    return SequenceFamily("composite53", 2, p, profiles, role=role,
                          guard_cells=guard_cells)


def _wrap(delta, L):
    """Nearest-image representative of delta on the torus of period L."""
    return (delta + 0.5 * L) % L - 0.5 * L


def _check_positive_int(n):
    n = int(n)
    if n < 1:
        raise ValueError("schedule index n must be a positive integer")
    return n


def _wrapped_radius(fam, grid):
    """Per-point distance to the family center with torus wrap."""
    axes = np.meshgrid(*(grid.x_axis(),) * grid.d, indexing="ij")
    acc = np.zeros(grid.shape)
    for i in range(grid.d):
        dx = _wrap(axes[i] - fam.center[i], grid.L)
        acc += dx * dx
    return np.sqrt(acc)


def _largest_resolved(fam, n, floor):
    best = None
    for m in range(1, n + 1):
        if fam.scale_schedule(m) >= floor:
            best = m
    return best


def term(fam, n, grid):
    """Sample the n-th term of the family on the grid."""
    n = _check_positive_int(n)
    if grid.d != fam.d:
        raise ValueError("family dimension %d does not match grid dimension %d"
                         % (fam.d, grid.d))

    if fam.kind == "concentration":
        omega = float(fam.scale_schedule(n))
        if not omega > 0.0:
            raise ValueError("scale schedule must be positive; omega_%d=%r"
                             % (n, omega))
        floor = fam.guard_cells * grid.L / grid.N
        if omega < floor:
            ok = _largest_resolved(fam, n, floor)
            raise ValueError(
                "concentration under-resolved at n=%d: omega=%.6g is below "
                "%.3g cells = %.6g; largest resolved index is %s"
                % (n, omega, fam.guard_cells, floor,
                   "none" if ok is None else "n=%d" % ok))
        prof = fam.profiles[0]
        if omega * prof.support_radius * WRAP_GUARD_FACTOR > grid.L:
            raise ValueError(
                "torus wrap guard violated at n=%d: need L >= %g * dilated "
                "support radius %.6g, have L=%r"
                % (n, WRAP_GUARD_FACTOR, omega * prof.support_radius, grid.L))
        r = _wrapped_radius(fam, grid)
        vals = omega ** (-fam.d / fam.p) * prof.fn(r / omega)
        return GridFunction(grid, vals.astype(complex))

    if fam.kind == "oscillation":
        eps = float(fam.epsilon_schedule(n))
        if not eps > 0.0:
            raise ValueError("epsilon schedule must be positive; eps_%d=%r"
                             % (n, eps))
        prof = fam.profiles[0]
        if prof.support_radius * WRAP_GUARD_FACTOR > grid.L:
            raise ValueError(
                "torus wrap guard violated: need L >= %g * support radius "
                "%.6g, have L=%r"
                % (WRAP_GUARD_FACTOR, prof.support_radius, grid.L))
        target = np.asarray(fam.k, dtype=float) / eps
        try:
            m, err = snapped_frequency(target, grid)
        except ValueError as exc:
            raise ValueError("oscillation term at n=%d: %s" % (n, exc))
        fam.provenance.setdefault("snap", {})[n] = {
            "target": target.tolist(),
            "snapped": (m / grid.L).tolist(),
            "rel_error": err,
        }
        r = _wrapped_radius(fam, grid)
        mode = fourier_mode(grid, m)
        vals = prof.fn(r).astype(complex) * mode.values
        return GridFunction(grid, vals)

    # composite53: the two displayed pieces, sampled literally.
    mod_m = int(round(n * grid.L))
    if abs(mod_m) > grid.N // 2 - 1:
        raise ValueError(
            "composite53 modulation at n=%d exceeds the Nyquist band "
            "(mode %d, N=%d)" % (n, mod_m, grid.N))
    x1 = grid.x_axis()
    x2 = x1
    pa, pb = fam.profiles
    if fam.role == "primal":
        q = fam.p
        osc = pa.fn(x1) * np.exp(2j * np.pi * mod_m * x1 / grid.L)
        conc = n ** (2.0 / q) * pb.fn(n * n * _wrap(x2, grid.L))
        vals = osc[:, None] + conc[None, :]
    else:
        q = fam.p / (fam.p - 1.0)
        conc = n ** (2.0 / q) * pa.fn(n * n * _wrap(x1, grid.L))
        osc = pb.fn(x2) * np.exp(2j * np.pi * mod_m * x2 / grid.L)
        vals = conc[:, None] + osc[None, :]
    return GridFunction(grid, vals.astype(complex))


def dual_term(fam, n, grid):
    """Canonical L^{p'} partner |w|^(p-2) w of the n-th term, 0 where w=0.

    Computed as |w|^(p-1) * (w/|w|) so that exponents p < 2 stay finite
    at the small-|w| tail.
    """
    q = fam.exponent
    if q == 2.0:
        return term(fam, n, grid)
    w = term(fam, n, grid).values
    aw = np.abs(w)
    # Subnormal magnitudes are flushed to 0 along with exact zeros: their
    # phase is not reliably computable and their L^{p'} contribution is nil.
    mask = aw >= np.finfo(float).tiny
    out = np.zeros_like(w)
    out[mask] = aw[mask] ** (q - 1.0) * (w[mask] / aw[mask])
    return GridFunction(grid, out)


def weak_null_check(fam, grid, tests, n_schedule):
    """Profile of max over tests of |<term(n), phi>| for reporting.

    Returns a dict with the schedule, the per-test pairing magnitudes
    (rows indexed by n), and their row-wise maximum.  Nothing is asserted:
    decreasing profiles are evidence of weak nullity, flat ones of its
    failure, and the caller decides what to do with either.
    """
    n_schedule = [int(n) for n in n_schedule]
    table = np.zeros((len(n_schedule), len(tests)))
    for i, n in enumerate(n_schedule):
        f = term(fam, n, grid)
        for j, phi in enumerate(tests):
            table[i, j] = abs(pair(f, phi))
    return {
        "n": np.asarray(n_schedule),
        "per_test": table,
        "max_pairing": table.max(axis=1),
    }
