"""Symbols on the compactified dual space: built-in families, boundary
traces, dilation, and Mihlin-constant estimation.

A symbol is a bounded complex function psi on R^d minus the origin, smooth
enough to act as a Fourier multiplier.  Families built by ``make_builtin``
carry their boundary behaviour analytically:

    homogeneous     psi(xi) = psit(xi/|xi|);  trace0 = traceInf = psit
    schwartz        psi(xi) = exp(-pi |xi|^2);  trace0 = psi(0), traceInf = 0
    rational        psi(xi) = xi^alpha / (|xi|^l + |xi|^m),  l <= |alpha| <= m
    sobolev_weight  psi(xi) = (1 + |xi|^m) / (1 + |xi|^2)^(m/2), or 1 / that
    user_sampled    scattered samples, inverse-distance interpolation

Mihlin estimation samples the scale-invariant quantity

    M_alpha(xi) = |xi|^|alpha| |D^alpha psi(xi)|

over dyadic shells and a fixed direction set.  Derivatives are nested
central differences with step 1e-3 * |xi| per axis, so M_alpha collapses to
|sum of stencil values| / (2e-3)^|alpha|, a weight with no radius in it.
Sample points are always built as (scale * radius) * direction with the
scale folded in first; dilating a symbol by a while dividing the shell radii
by a therefore reproduces every sampled value bit for bit whenever
a * (r / a) == r holds in floating point, which it does for the dyadic
lattices used here with a in {0.1, 10}.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

# Relative finite-difference step per axis (fraction of the shell radius).
FD_REL_STEP = 1e-3

# A residual at the last shell below this (relative) floor counts as
# converged outright, before any decay-rate test.
TRACE_ATOL = 1e-12


def directions(d: int, n: Optional[int] = None) -> np.ndarray:
    """Deterministic unit-direction set in R^d, shape (count, d).

    d=1 gives {+1, -1}; d=2 gives n uniform angles; d=3 a Fibonacci
    sphere with n points; higher d a fixed-seed normalized Gaussian cloud.
    """
    if d < 1:
        raise ValueError("dimension must be positive")
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if n is None:
        n = 64 if d == 2 else 128
    if n < 1:
        raise ValueError("need at least one direction")
    if d == 2:
        theta = 2.0 * np.pi * np.arange(n) / n
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    if d == 3:
        # Fibonacci sphere: near-uniform, reproducible, no RNG.
        i = np.arange(n) + 0.5
        phi = np.arccos(1.0 - 2.0 * i / n)
        golden = np.pi * (1.0 + math.sqrt(5.0))
        theta = golden * i
        return np.stack(
            [
                np.sin(phi) * np.cos(theta),
                np.sin(phi) * np.sin(theta),
                np.cos(phi),
            ],
            axis=-1,
        )
    rng = np.random.default_rng(0)
    v = rng.standard_normal((n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def dyadic_shells(j_min: int = -8, j_max: int = 8, per_octave: int = 1) -> np.ndarray:
    """Shell radii 2^(j_min + k/per_octave) up to and including 2^j_max."""
    if j_max < j_min:
        raise ValueError("empty shell range")
    if per_octave < 1:
        raise ValueError("per_octave must be >= 1")
    steps = (j_max - j_min) * per_octave
    exps = j_min + np.arange(steps + 1) / per_octave
    return 2.0 ** exps


def multi_indices(d: int, max_order: int) -> list:
    """All derivative multi-indices alpha in N^d with |alpha| <= max_order."""
    out = []
    for total in range(max_order + 1):
        for alpha in itertools.product(range(total + 1), repeat=d):
            if sum(alpha) == total:
                out.append(alpha)
    return out


def _const(value: complex) -> Callable[[np.ndarray], np.ndarray]:
    def fn(e: np.ndarray) -> np.ndarray:
        e = np.asarray(e, dtype=float)
        return np.full(e.shape[:-1], complex(value))

    return fn


@dataclass(frozen=True, eq=False)
class Symbol:
    """A multiplier symbol with its boundary data.

    ``base`` is the unscaled evaluator; ``scale`` accumulates dilations, so
    the symbol's value at xi is base(scale * xi).  ``trace0`` and
    ``traceInf`` map unit directions to the radial limits at 0 and infinity
    (None where undefined).  ``deriv(alpha, pts)`` gives closed-form partial
    derivatives of base where a family provides them; otherwise finite
    differences are used.  ``zero_freq_policy`` is the value a multiplier
    engine should assign at the zero frequency: an explicit complex number,
    or "trace_average" for the mean of trace0 over a direction set.
    """

    d: int
    family: str
    base: Callable[[np.ndarray], np.ndarray]
    params: dict = field(default_factory=dict)
    scale: float = 1.0
    trace0: Optional[Callable[[np.ndarray], np.ndarray]] = None
    traceInf: Optional[Callable[[np.ndarray], np.ndarray]] = None
    zero_freq_policy: Union[complex, str] = "trace_average"
    deriv: Optional[Callable[[tuple, np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be positive")
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise ValueError("scale must be positive and finite")

    def eval(self, pts) -> np.ndarray:
        """Evaluate at Cartesian points, shape (..., d) -> complex (...)."""
        pts = np.asarray(pts, dtype=float)
        if pts.shape[-1] != self.d:
            raise ValueError(f"points have dimension {pts.shape[-1]}, symbol has {self.d}")
        return np.asarray(self.base(self.scale * pts), dtype=complex)

    def eval_polar(self, radius: float, dirs: np.ndarray) -> np.ndarray:
        """Evaluate at radius * dirs with the dilation folded into the radius.

        The effective radius scale*radius is formed first, as one scalar
        product; this is what makes dilation/lattice-rescale pairs agree
        bit for bit.
        """
        r_eff = self.scale * float(radius)
        pts = r_eff * np.asarray(dirs, dtype=float)
        return np.asarray(self.base(pts), dtype=complex)

    def zero_value(self) -> complex:
        """Resolve the zero-frequency policy to a number.

        "trace_average" means the mean of trace0 over the 2d axis
        directions +-e_i, or 0 when no trace0 is attached.
        """
        if self.zero_freq_policy != "trace_average":
            return complex(self.zero_freq_policy)
        if self.trace0 is None:
            return 0.0 + 0.0j
        e = np.concatenate([np.eye(self.d), -np.eye(self.d)])
        return complex(np.mean(np.asarray(self.trace0(e), dtype=complex)))


def _norm(pts: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(pts * pts, axis=-1))


def _gaussian_base(pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    return np.exp(-np.pi * np.sum(pts * pts, axis=-1)).astype(complex)


def _gaussian_deriv(alpha: tuple, pts: np.ndarray) -> np.ndarray:
    # d^n/dx^n exp(-pi x^2) = (-sqrt(pi))^n H_n(sqrt(pi) x) exp(-pi x^2),
    # applied per axis since the Gaussian separates.
    pts = np.asarray(pts, dtype=float)
    total = sum(alpha)
    out = np.full(pts.shape[:-1], (-math.sqrt(math.pi)) ** total, dtype=complex)
    for i, a in enumerate(alpha):
        if a > 0:
            coeffs = np.zeros(a + 1)
            coeffs[a] = 1.0
            out = out * np.polynomial.hermite.hermval(math.sqrt(math.pi) * pts[..., i], coeffs)
    return out * _gaussian_base(pts)


def make_builtin(family: str, d: int, **params) -> Symbol:
    """Construct a built-in symbol family with analytic traces attached.

    Families: "homogeneous" (psi_tilde: unit-sphere callable or constant),
    "schwartz" (optional fn/value_at_zero; default Gaussian exp(-pi|xi|^2)),
    "rational" (alpha: multi-index, l, m with l <= |alpha| <= m),
    "sobolev_weight" (m >= 1, reciprocal: bool),
    "user_sampled" (points: (M,d), values: (M,)).
    """
    if family == "homogeneous":
        psit = params.get("psi_tilde", 1.0)
        if callable(psit):
            tilde = psit

            def base(pts, _f=tilde):
                pts = np.asarray(pts, dtype=float)
                n = _norm(pts)
                e = pts / n[..., None]
                return np.asarray(_f(e), dtype=complex)

            return Symbol(d=d, family=family, base=base,
                          params={"psi_tilde": getattr(psit, "__name__", "callable")},
                          trace0=tilde, traceInf=tilde)
        value = complex(psit)

        def cbase(pts, _v=value):
            pts = np.asarray(pts, dtype=float)
            return np.full(pts.shape[:-1], _v)

        def cderiv(alpha, pts, _v=value):
            pts = np.asarray(pts, dtype=float)
            fill = _v if sum(alpha) == 0 else 0.0
            return np.full(pts.shape[:-1], complex(fill))

        return Symbol(d=d, family=family, base=cbase, params={"psi_tilde": value},
                      trace0=_const(value), traceInf=_const(value),
                      zero_freq_policy=value, deriv=cderiv)

    if family == "schwartz":
        fn = params.get("fn")
        if fn is None:
            return Symbol(d=d, family=family, base=_gaussian_base,
                          params={"profile": "gaussian"},
                          trace0=_const(1.0), traceInf=_const(0.0),
                          zero_freq_policy=1.0 + 0.0j, deriv=_gaussian_deriv)
        if "value_at_zero" not in params:
            raise ValueError("custom schwartz symbol needs value_at_zero")
        v0 = complex(params["value_at_zero"])
        return Symbol(d=d, family=family, base=fn, params={"profile": "custom"},
                      trace0=_const(v0), traceInf=_const(0.0), zero_freq_policy=v0)

    if family == "rational":
        alpha = tuple(int(a) for a in params["alpha"])
        if len(alpha) != d or any(a < 0 for a in alpha):
            raise ValueError(f"alpha must be a nonnegative multi-index of length {d}")
        l = params["l"]
        m = params["m"]
        if not (0 <= l <= m):
            raise ValueError(f"need 0 <= l <= m, got l={l}, m={m}")
        if not (l <= sum(alpha) <= m):
            raise ValueError(f"need l <= |alpha| <= m, got l={l}, |alpha|={sum(alpha)}, m={m}")

        def base(pts, _a=alpha, _l=float(l), _m=float(m)):
            pts = np.asarray(pts, dtype=float)
            r = _norm(pts)
            num = np.ones(pts.shape[:-1])
            for i, a in enumerate(_a):
                if a:
                    num = num * pts[..., i] ** a
            return (num / (r ** _l + r ** _m)).astype(complex)

        half = 0.5 if l == m else 1.0

        def trace_at(e, active, _a=alpha, _w=half):
            e = np.asarray(e, dtype=float)
            if not active:
                return np.zeros(e.shape[:-1], dtype=complex)
            out = np.full(e.shape[:-1], _w, dtype=complex)
            for i, a in enumerate(_a):
                if a:
                    out = out * e[..., i] ** a
            return out

        tot = sum(alpha)
        return Symbol(d=d, family=family, base=base,
                      params={"alpha": alpha, "l": l, "m": m},
                      trace0=lambda e: trace_at(e, tot == l),
                      traceInf=lambda e: trace_at(e, tot == m))

    if family == "sobolev_weight":
        m = params["m"]
        if not m >= 1:
            raise ValueError("sobolev_weight needs m >= 1")
        reciprocal = bool(params.get("reciprocal", False))

        def base(pts, _m=float(m), _rec=reciprocal):
            pts = np.asarray(pts, dtype=float)
            r = _norm(pts)
            w = (1.0 + r ** _m) / (1.0 + r * r) ** (_m / 2.0)
            return (1.0 / w if _rec else w).astype(complex)

        return Symbol(d=d, family=family, base=base,
                      params={"m": m, "reciprocal": reciprocal},
                      trace0=_const(1.0), traceInf=_const(1.0),
                      zero_freq_policy=1.0 + 0.0j)

    if family == "user_sampled":
        points = np.asarray(params["points"], dtype=float)
        values = np.asarray(params["values"], dtype=complex)
        if points.ndim != 2 or points.shape[1] != d:
            raise ValueError(f"sample points must have shape (M, {d})")
        if values.shape != (points.shape[0],):
            raise ValueError("one value per sample point required")
        if points.shape[0] < 1:
            raise ValueError("need at least one sample")
        k = min(2 * d + 2, points.shape[0])

        def base(pts, _p=points, _v=values, _k=k):
            pts = np.asarray(pts, dtype=float)
            flat = pts.reshape(-1, pts.shape[-1])
            d2 = np.sum((flat[:, None, :] - _p[None, :, :]) ** 2, axis=-1)
            idx = np.argsort(d2, axis=1)[:, :_k]
            near = np.take_along_axis(d2, idx, axis=1)
            w = 1.0 / (near + 1e-300)
            out = np.sum(w * _v[idx], axis=1) / np.sum(w, axis=1)
            return out.reshape(pts.shape[:-1])

        return Symbol(d=d, family=family, base=base,
                      params={"n_samples": points.shape[0]})

    raise ValueError(f"unknown symbol family {family!r}")


def dilate(s: Symbol, a: float) -> Symbol:
    """The symbol xi -> psi(a xi); traces unchanged, family preserved."""
    a = float(a)
    if not (a > 0.0 and math.isfinite(a)):
        raise ValueError("dilation factor must be positive and finite")
    return replace(s, scale=a * s.scale)


def conjugate_symbol(s: Symbol) -> Symbol:
    """Pointwise complex conjugate (the adjoint multiplier's symbol)."""
    base = s.base

    def cbase(pts):
        return np.conj(base(pts))

    def wrap(tr):
        return None if tr is None else (lambda e: np.conj(tr(e)))

    deriv = None
    if s.deriv is not None:
        inner = s.deriv
        deriv = lambda alpha, pts: np.conj(inner(alpha, pts))
    policy = s.zero_freq_policy
    if policy != "trace_average":
        policy = complex(policy).conjugate()
    return replace(s, base=cbase, trace0=wrap(s.trace0), traceInf=wrap(s.traceInf),
                   zero_freq_policy=policy, deriv=deriv)


def _combine(s1: Symbol, s2: Symbol, op, tag: str) -> Symbol:
    if s1.d != s2.d:
        raise ValueError("symbol dimensions differ")

    def base(pts):
        return op(s1.eval(pts), s2.eval(pts))

    def comb_trace(t1, t2):
        if t1 is None or t2 is None:
            return None
        return lambda e: op(np.asarray(t1(e), dtype=complex), np.asarray(t2(e), dtype=complex))

    p1, p2 = s1.zero_freq_policy, s2.zero_freq_policy
    if p1 != "trace_average" and p2 != "trace_average":
        policy = complex(op(complex(p1), complex(p2)))
    else:
        policy = "trace_average"
    return Symbol(d=s1.d, family=tag, base=base,
                  params={"left": s1.family, "right": s2.family},
                  trace0=comb_trace(s1.trace0, s2.trace0),
                  traceInf=comb_trace(s1.traceInf, s2.traceInf),
                  zero_freq_policy=policy)


def symbol_product(s1: Symbol, s2: Symbol) -> Symbol:
    """Pointwise product; traces multiply where both exist."""
    return _combine(s1, s2, lambda a, b: a * b, "product")


def symbol_sum(s1: Symbol, s2: Symbol) -> Symbol:
    """Pointwise sum; traces add where both exist."""
    return _combine(s1, s2, lambda a, b: a + b, "sum")


def load_user_symbol(path, d: Optional[int] = None) -> Symbol:
    """Load a user_sampled symbol from CSV rows (xi_1..xi_d, Re, Im)."""
    raw = np.genfromtxt(path, delimiter=",", comments="#")
    if raw.ndim == 1:
        raw = raw[None, :]
    # a header row genfromtxt could not parse shows up as NaNs; drop it
    raw = raw[~np.isnan(raw).any(axis=1)]
    if raw.size == 0 or raw.shape[1] < 3:
        raise ValueError("symbol CSV needs columns xi_1..xi_d, Re, Im")
    cols = raw.shape[1]
    if d is None:
        d = cols - 2
    if cols != d + 2:
        raise ValueError(f"expected {d + 2} columns for d={d}, got {cols}")
    points = raw[:, :d]
    values = raw[:, d] + 1j * raw[:, d + 1]
    return make_builtin("user_sampled", d, points=points, values=values)


# ---------------------------------------------------------------------------
# Boundary traces


def _aitken(v1: complex, v2: complex, v3: complex) -> complex:
    d1 = v2 - v1
    d2 = v3 - v2
    den = d2 - d1
    if abs(den) < 1e-300 or abs(d2) >= abs(d1):
        return v3
    return v3 - d2 * d2 / den


@dataclass(frozen=True)
class BoundaryTraces:
    """Radial limit estimates of a symbol at both ends of the dual space."""

    dirs: np.ndarray
    trace0: np.ndarray
    traceInf: np.ndarray
    resid0: np.ndarray
    residInf: np.ndarray
    trace0_exists: bool
    traceInf_exists: bool

    @property
    def max_resid0(self) -> float:
        return float(np.max(self.resid0))

    @property
    def max_residInf(self) -> float:
        return float(np.max(self.residInf))


def _radial_limits(values: np.ndarray) -> tuple:
    """Limit estimate and verdict for each column of a (n_shells, n_dirs)
    value table whose rows approach the boundary.

    The estimate is one Aitken step on the last three shells.  A direction
    counts as converged when its shell-to-shell gaps either sit at the
    floor or keep halving toward the boundary; the reported residual is
    the distance from the last shell to the estimate.
    """
    v1, v2, v3 = values[-3], values[-2], values[-1]
    est = np.empty_like(v3)
    for i in range(v3.shape[0]):
        est[i] = _aitken(v1[i], v2[i], v3[i])
    scale = 1.0 + np.abs(est)
    resid = np.abs(v3 - est)

    gaps = np.abs(values[1:] - values[:-1])
    at_floor = gaps[-1] <= TRACE_ATOL * scale
    halving = gaps[-1] <= 0.55 * gaps[-2]
    if gaps.shape[0] >= 3:
        halving &= (gaps[-2] <= 0.55 * gaps[-3]) | (gaps[-2] <= TRACE_ATOL * scale)
    ok = bool(np.all(at_floor | halving))
    return est, resid, ok


def boundary_traces(s: Symbol, n_dirs: Optional[int] = None,
                    radii_schedule: Optional[Sequence[float]] = None) -> BoundaryTraces:
    """Estimate trace0 and traceInf by sampling shrinking/growing shells.

    Non-convergence is reported through the exists flags, never raised.
    """
    dirs = directions(s.d, n_dirs)
    radii = np.sort(np.asarray(radii_schedule if radii_schedule is not None
                               else dyadic_shells(), dtype=float))
    if radii.size < 3:
        raise ValueError("need at least three shells to judge convergence")
    table = np.stack([s.eval_polar(r, dirs) for r in radii])
    t_inf, r_inf, ok_inf = _radial_limits(table)
    t_0, r_0, ok_0 = _radial_limits(table[::-1])
    return BoundaryTraces(dirs=dirs, trace0=t_0, traceInf=t_inf,
                          resid0=r_0, residInf=r_inf,
                          trace0_exists=ok_0, traceInf_exists=ok_inf)


# ---------------------------------------------------------------------------
# Mihlin estimation


@dataclass(frozen=True)
class MihlinReport:
    """Shell-by-shell record of max_alpha,e |xi|^|alpha| |D^alpha psi|."""

    order: int
    constant: float
    per_shell: tuple
    d: int
    n_dirs: int
    shells: tuple

    def shell_values(self) -> np.ndarray:
        return np.array([v for _, v in self.per_shell])


def _fd_stencil(alpha: tuple) -> dict:
    """Offsets (integer vectors, units of the relative step) -> coefficient
    for nested central differencing of D^alpha."""
    d = len(alpha)
    stencil = {(0,) * d: 1.0}
    for axis, reps in enumerate(alpha):
        for _ in range(reps):
            nxt = {}
            for off, c in stencil.items():
                up = list(off)
                up[axis] += 1
                dn = list(off)
                dn[axis] -= 1
                nxt[tuple(up)] = nxt.get(tuple(up), 0.0) + c
                nxt[tuple(dn)] = nxt.get(tuple(dn), 0.0) - c
            stencil = nxt
    return stencil


def _checked_eval(s: Symbol, pts: np.ndarray, where: str) -> np.ndarray:
    try:
        vals = np.asarray(s.base(pts), dtype=complex)
    except Exception as exc:
        raise RuntimeError(f"symbol evaluation failed at {where}") from exc
    if not np.all(np.isfinite(vals)):
        bad = np.argwhere(~np.isfinite(vals))[0]
        raise RuntimeError(f"symbol evaluation not finite at {where}, sample index {tuple(bad)}")
    return vals


def mihlin_estimate(s: Symbol, order: Optional[int] = None,
                    dirs_per_shell: Optional[int] = None,
                    shells: Optional[Sequence[float]] = None) -> MihlinReport:
    """Estimate the Mihlin constant sup |xi|^|alpha| |D^alpha psi(xi)|.

    Closed-form derivatives are used when the family provides them; the
    fallback is the radius-relative central-difference scheme described in
    the module docstring.  Every quantity depends on the shell only through
    the effective radius scale*r, which is what the dilation invariance
    test pins down.
    """
    kappa_cap = s.d // 2 + 1
    if order is None:
        order = kappa_cap
    if not (0 <= order <= kappa_cap):
        raise ValueError(f"order must lie in [0, {kappa_cap}] for d={s.d}")
    dirs = directions(s.d, dirs_per_shell)
    radii = np.asarray(shells if shells is not None else dyadic_shells(), dtype=float)
    if np.any(radii <= 0):
        raise ValueError("shell radii must be positive")

    alphas = multi_indices(s.d, order)
    stencils = None if s.deriv is not None else {a: _fd_stencil(a) for a in alphas}

    per_shell = []
    for r in radii:
        r_eff = s.scale * float(r)
        best = 0.0
        for alpha in alphas:
            k = sum(alpha)
            if s.deriv is not None:
                pts = r_eff * dirs
                vals = np.asarray(s.deriv(alpha, pts), dtype=complex)
                if not np.all(np.isfinite(vals)):
                    raise RuntimeError(f"symbol derivative not finite at radius {r}, alpha {alpha}")
                term = (r_eff ** k) * np.abs(vals)
            else:
                acc = np.zeros(dirs.shape[0], dtype=complex)
                for off, c in stencils[alpha].items():
                    g = dirs + FD_REL_STEP * np.asarray(off, dtype=float)
                    acc += c * _checked_eval(s, r_eff * g, f"radius {r}, alpha {alpha}, offset {off}")
                term = np.abs(acc) / (2.0 * FD_REL_STEP) ** k
            m = float(np.max(term))
            if m > best:
                best = m
        per_shell.append((float(r), best))
    constant = max(v for _, v in per_shell)
    return MihlinReport(order=order, constant=constant, per_shell=tuple(per_shell),
                        d=s.d, n_dirs=dirs.shape[0], shells=tuple(float(r) for r in radii))
