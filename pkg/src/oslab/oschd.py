"""Dilated-multiplier pairing traces and their closed-form limits.

The central object is the trace of pairings

    I_n = <A_{psi(omega_n .)}(phi1 u_n), conj(phi2 v_n)>,

computed with the grid multiplier engine for a weakly null pair (u_n, v_n),
a dilation schedule omega_n, test functions phi1, phi2 and a symbol psi.
The trace is extrapolated (iterated Aitken) when the Cauchy gaps say the
schedule has converged, and can be compared against closed forms:

  concentration at z:   phi1(z) conj(phi2(z)) * <A_{psi_c} u, conj(v)>
  oscillation along k:  (int |u|^p phi1 conj(phi2)) * psi_c-value at k

where psi_c is psi(c .) for a finite scale ratio c = lim omega_n/eps_n,
and the radial boundary values psi_0, psi_inf take over for c = 0, inf.

The remaining operations probe structure: purity_scan classifies the
ratio schedule (0, finite, infinite, or "non-pure" when the tail has
separated accumulation points), pi_pushforward_check verifies that
homogeneous symbols cannot see the scale at all, corrector_term evaluates
the zero-trace pairing that survives at omega-scales faster than the
sequence scale, and strong_compactness_probe cross-checks the vanishing
of pairings against the canonical dual with the vanishing of ||phi u_n||_p.

Nothing here extracts subsequences: one explicit schedule is evaluated and
non-convergence is reported as data ("not converged", "non-pure").
"""

from __future__ import annotations

import csv
import json
import math

import numpy as np

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .fourmult import (
    Grid,
    GridFunction,
    apply_multiplier,
    lp_norm,
    multiply_pointwise,
    pair,
)
from .symcalc import Symbol, conjugate_symbol, make_builtin
from .seqgen import (
    SequenceFamily,
    _as_schedule,
    _wrap,
    dual_term,
    make_profile,
    term,
)

# Geometric index schedule: gaps between consecutive I_n then measure
# convergence order directly.
DEFAULT_N_SCHEDULE = tuple(2 ** j for j in range(7))

# Cauchy rule: converged when the final gap is below this times max(1, |I|)
# and the last three gaps do not increase.
CAUCHY_REL = 1e-3

# strong_compactness_probe verdict thresholds (see its docstring).
PAIRING_NULL_REL = 1e-3
NORM_NULL_REL = 5e-2


@dataclass
class PairingTrace:
    """A pairing trace over an increasing index schedule.

    I holds the complex pairings, cauchy_gaps their consecutive absolute
    differences, limit_estimate the Aitken-extrapolated limit or the string
    "not converged", reference an externally attached closed form or
    "none", ratio_class the scale-ratio classification (0.0, a finite
    float, math.inf, or "non-pure"), and adjoint_gaps the per-n absolute
    difference between the two sides of the multiplier adjoint identity.
    omega and epsilon record the schedules for reporting.  corrector is
    filled only by the rapid-decay pairing when the inputs carry nonzero
    weak limits.
    """

    n_schedule: tuple
    I: np.ndarray
    cauchy_gaps: np.ndarray
    limit_estimate: object
    reference: object = "none"
    ratio_class: object = None
    adjoint_gaps: Optional[np.ndarray] = None
    omega: Optional[np.ndarray] = None
    epsilon: Optional[np.ndarray] = None
    corrector: object = None

    def __post_init__(self):
        m = len(self.n_schedule)
        if len(self.I) != m:
            raise ValueError("one pairing value per schedule index required")
        if len(self.cauchy_gaps) != max(m - 1, 0):
            raise ValueError("cauchy_gaps must have length len(n_schedule)-1")
        for arr in (self.adjoint_gaps, self.omega, self.epsilon):
            if arr is not None and len(arr) != m:
                raise ValueError("per-n arrays must match the schedule length")

    @property
    def converged(self) -> bool:
        return not isinstance(self.limit_estimate, str)


def aitken_limit(values):
    """Iterated Aitken delta-squared extrapolation of a numeric sequence.

    Two sweeps; entries whose second difference is at roundoff are passed
    through unchanged, so exactly convergent (eventually constant)
    sequences come back exact.
    """
    v = [complex(x) for x in values]
    if not v:
        raise ValueError("need at least one value")
    for _ in range(2):
        if len(v) < 3:
            break
        w = []
        for i in range(len(v) - 2):
            d2 = v[i + 2] - 2.0 * v[i + 1] + v[i]
            if abs(d2) <= 1e-14 * max(1.0, abs(v[i + 2])):
                w.append(v[i + 2])
                continue
            cand = v[i] - (v[i + 1] - v[i]) ** 2 / d2
            w.append(cand if np.isfinite(cand) else v[i + 2])
        v = w
    return v[-1]


def _normalized_schedule(n_schedule):
    ns = tuple(int(n) for n in (DEFAULT_N_SCHEDULE if n_schedule is None
                                else n_schedule))
    if len(ns) < 1 or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n_schedule must be strictly increasing")
    if ns[0] < 1:
        raise ValueError("schedule indices must be positive")
    return ns


def _cauchy_limit(I, gaps):
    """Apply the Cauchy rule; Aitken limit when it passes."""
    if len(gaps) >= 3:
        tol = CAUCHY_REL * max(1.0, abs(I[-1]))
        if gaps[-1] < tol and gaps[-3] >= gaps[-2] >= gaps[-1]:
            return aitken_limit(I)
    return "not converged"


def _family_scale(fam):
    """The internal length-scale schedule eps_n of a sequence family."""
    if isinstance(fam, SequenceFamily):
        if fam.kind == "concentration":
            return fam.scale_schedule
        if fam.kind == "oscillation":
            return fam.epsilon_schedule
        return lambda n: 1.0 / float(n)  # composite53 carries scale 1/n
    sched = getattr(fam, "scale", None)
    return sched if sched is not None else (lambda n: 1.0 / float(n))


def power_dual(u: GridFunction, p: float) -> GridFunction:
    """The pointwise partner |u|^(p-2) u, with 0 kept at u = 0."""
    p = float(p)
    if p == 2.0:
        return u
    w = u.values
    aw = np.abs(w)
    mask = aw >= np.finfo(float).tiny
    out = np.zeros_like(w)
    out[mask] = aw[mask] ** (p - 1.0) * (w[mask] / aw[mask])
    return GridFunction(u.grid, out)


@dataclass
class CustomSequence:
    """Escape hatch for sequences outside the canonical families.

    term_fn(n, grid) produces the n-th term; the dual partner is the same
    pointwise power law the families use, scale is the eps_n schedule for
    ratio classification (default 1/n).
    """

    term_fn: Callable[[int, Grid], GridFunction]
    p: float = 2.0
    scale: Optional[Callable[[int], float]] = None

    @property
    def exponent(self) -> float:
        return float(self.p)

    def term(self, n, grid) -> GridFunction:
        return self.term_fn(int(n), grid)

    def dual(self, n, grid) -> GridFunction:
        return power_dual(self.term(n, grid), self.p)


def _sequence_accessors(obj, grid):
    """(term_fn, dual_fn, exponent, eps_schedule) for family or custom."""
    if isinstance(obj, SequenceFamily):
        return (lambda n: term(obj, n, grid),
                lambda n: dual_term(obj, n, grid),
                float(obj.exponent), _family_scale(obj))
    return (lambda n: obj.term(n, grid),
            lambda n: obj.dual(n, grid),
            float(obj.exponent), _family_scale(obj))


def _trace_core(term_u, term_v, omega_schedule, phi1, phi2, s, ns, grid,
                eps_schedule):
    s_adj = conjugate_symbol(s)
    m = len(ns)
    I = np.zeros(m, dtype=complex)
    agaps = np.zeros(m)
    om = np.zeros(m)
    ep = np.full(m, np.nan)
    for j, n in enumerate(ns):
        f = multiply_pointwise(phi1, term_u(n))
        g = multiply_pointwise(phi2, term_v(n))
        w = float(omega_schedule(n))
        if not w > 0.0:
            raise ValueError("omega schedule must be positive; omega_%d=%r"
                             % (n, w))
        left = pair(apply_multiplier(s, w, f), g)
        right = pair(f, apply_multiplier(s_adj, w, g))
        I[j] = left
        agaps[j] = abs(left - right)
        om[j] = w
        if eps_schedule is not None:
            ep[j] = float(eps_schedule(n))
    gaps = np.abs(np.diff(I))
    limit = _cauchy_limit(I, gaps)
    ratio = (purity_scan(omega_schedule, eps_schedule, ns)
             if eps_schedule is not None else None)
    return PairingTrace(ns, I, gaps, limit, ratio_class=ratio,
                        adjoint_gaps=agaps, omega=om, epsilon=ep)


def pairing(u_fam, v_fam, omega_schedule, phi1, phi2, s: Symbol,
            n_schedule=None, grid=None) -> PairingTrace:
    """Trace of I_n = <A_{psi(omega_n .)}(phi1 u_n), conj(phi2 v_n)>.

    u_fam and v_fam are SequenceFamily or CustomSequence objects assumed to
    share the internal scale of u_fam (which is what ratio_class is
    computed against).  Both sides of the adjoint identity
    <A_psi f, g> = <f, A_{conj psi} g> are evaluated and their gap stored
    per n.  The limit estimate appears only when the Cauchy rule passes:
    final gap < 1e-3 * max(1, |I|) and last three gaps not increasing.
    """
    if grid is None:
        grid = phi1.grid
    ns = _normalized_schedule(n_schedule)
    omega = _as_schedule(omega_schedule)
    tu = _sequence_accessors(u_fam, grid)
    tv = _sequence_accessors(v_fam, grid)
    return _trace_core(tu[0], tv[0], omega, phi1, phi2, s, ns, grid, tu[3])


def _value_at(gf: GridFunction, z) -> complex:
    """Sample of a grid function at the grid point nearest to z."""
    grid = gf.grid
    idx = tuple(int(round(float(c) / grid.spacing)) % grid.N for c in z)
    return complex(gf.values[idx])


def _radial_values(fam: SequenceFamily, grid: Grid) -> GridFunction:
    """The family's base profile sampled radially about its center."""
    axes = np.meshgrid(*(grid.x_axis(),) * grid.d, indexing="ij")
    acc = np.zeros(grid.shape)
    for i in range(grid.d):
        dx = _wrap(axes[i] - fam.center[i], grid.L)
        acc += dx * dx
    return GridFunction(grid, fam.profiles[0].fn(np.sqrt(acc)).astype(complex))


def _boundary_symbol(s: Symbol, which: str) -> Symbol:
    trace = s.trace0 if which == "0" else s.traceInf
    if trace is None:
        raise ValueError(
            "closed form at the %s boundary needs trace%s on the symbol"
            % (("zero", "0") if which == "0" else ("infinite", "Inf")))
    return make_builtin("homogeneous", s.d, psi_tilde=trace)


def closed_form_reference(kind, c, s: Symbol, u=None, v=None, phi1=None,
                          phi2=None, grid=None) -> complex:
    """Closed-form limit for the canonical families at scale ratio c.

    kind "concentration": u, v are concentration families about a common
    center z; returns phi1(z) conj(phi2(z)) <A u0, conj(v0)> with the base
    profiles u0, v0 and the multiplier psi(c .), or the radial boundary
    symbol psi_0 (c = 0) / psi_inf (c = inf).

    kind "oscillation": u is an oscillation family; assumes v_n is the
    canonical dual partner, so the spatial factor is
    int |u0|^p phi1 conj(phi2); the frequency factor is psi_0(k/|k|),
    psi(c k), or psi_inf(k/|k|).

    Raises ValueError for ratio class "non-pure" and when a boundary case
    needs a trace the symbol does not carry.
    """
    if isinstance(c, str):
        raise ValueError("no closed form for ratio class %r" % c)
    c = float(c)
    if c < 0.0:
        raise ValueError("scale ratio must be nonnegative")

    if kind == "concentration":
        for fam in (u, v):
            if not (isinstance(fam, SequenceFamily)
                    and fam.kind == "concentration"):
                raise ValueError("concentration reference needs two "
                                 "concentration families")
        if u.center != v.center:
            raise ValueError("families must share the concentration center")
        ug = _radial_values(u, grid)
        vg = _radial_values(v, grid)
        if c == 0.0:
            s_eff, w = _boundary_symbol(s, "0"), 1.0
        elif math.isinf(c):
            s_eff, w = _boundary_symbol(s, "inf"), 1.0
        else:
            s_eff, w = s, c
        inner = pair(apply_multiplier(s_eff, w, ug), vg)
        return (_value_at(phi1, u.center) * np.conj(_value_at(phi2, u.center))
                * inner)

    if kind == "oscillation":
        if not (isinstance(u, SequenceFamily) and u.kind == "oscillation"):
            raise ValueError("oscillation reference needs an oscillation "
                             "family")
        base = _radial_values(u, grid)
        w = np.abs(base.values) ** u.p
        mass = grid.spacing ** grid.d * np.sum(
            w * phi1.values * np.conj(phi2.values))
        k = np.asarray(u.k, dtype=float)
        khat = (k / np.linalg.norm(k))[None, :]
        if c == 0.0:
            if s.trace0 is None:
                raise ValueError("ratio class 0 needs trace0 on the symbol")
            val = complex(np.asarray(s.trace0(khat), dtype=complex)[0])
        elif math.isinf(c):
            if s.traceInf is None:
                raise ValueError("ratio class inf needs traceInf on the "
                                 "symbol")
            val = complex(np.asarray(s.traceInf(khat), dtype=complex)[0])
        else:
            val = complex(s.eval((c * k)[None, :])[0])
        return val * complex(mass)

    raise ValueError("kind must be 'concentration' or 'oscillation', got %r"
                     % (kind,))


def _classify_ratio_tail(r):
    """Classify a positive ratio sequence tail; None when mixed."""
    r = np.asarray(r, dtype=float)
    if r.size == 1:
        return float(r[0])
    tail = r[-5:]
    g = tail[1:] / tail[:-1]
    if np.all(g > 1.15):
        return math.inf
    if np.all(g < 0.87):
        return 0.0
    if np.all(np.abs(g - 1.0) <= 0.1):
        return float(np.real(aitken_limit(tail)))
    return None


def purity_scan(omega_schedule, epsilon_schedule, n_schedule=None):
    """Classify lim omega_n/eps_n over the schedule tail.

    Returns 0.0, a finite float (the limit value), math.inf, or the string
    "non-pure".  A tail whose growth factors are neither uniformly
    expanding (> 1.15), contracting (< 0.87), nor settled (within 10% of
    1) is split into even- and odd-index subsequences: if those classify
    to values separated by more than 10% relative, the schedule has two
    accumulation points and is reported "non-pure".
    """
    ns = _normalized_schedule(n_schedule)
    w = _as_schedule(omega_schedule)
    e = _as_schedule(epsilon_schedule)
    r = []
    for n in ns:
        wn, en = float(w(n)), float(e(n))
        if not (wn > 0.0 and en > 0.0):
            raise ValueError("schedules must be positive at n=%d" % n)
        r.append(wn / en)
    r = np.asarray(r)
    c = _classify_ratio_tail(r)
    if c is not None:
        return c
    ce = _classify_ratio_tail(r[0::2])
    co = _classify_ratio_tail(r[1::2])
    if ce is not None and co is not None:
        if ce == co:
            return ce
        if (math.isfinite(ce) and math.isfinite(co)
                and abs(ce - co) <= 0.1 * max(abs(ce), abs(co))):
            return 0.5 * (ce + co)
    return "non-pure"


def pi_pushforward_check(u_fam, v_fam, omega_schedule, phi1, phi2,
                         tilde_psi, n_schedule=None, grid=None):
    """Dilation-blindness of homogeneous symbols.

    Runs the pairing with the radially homogeneous symbol built from
    tilde_psi (a unit-sphere callable or constant) under omega_schedule,
    and again under omega == 1, which is the plain (scale-free) pairing.
    Since the symbol is dilation invariant the two traces must agree at
    every n; the maximum per-n absolute difference is the reported gap.

    Returns (trace_scaled, trace_plain, gap).
    """
    if grid is None:
        grid = phi1.grid
    d = grid.d
    s_hom = make_builtin("homogeneous", d, psi_tilde=tilde_psi)
    tr_w = pairing(u_fam, v_fam, omega_schedule, phi1, phi2, s_hom,
                   n_schedule, grid)
    tr_1 = pairing(u_fam, v_fam, lambda n: 1.0, phi1, phi2, s_hom,
                   n_schedule, grid)
    gap = float(np.max(np.abs(tr_w.I - tr_1.I)))
    return tr_w, tr_1, gap


def corrector_term(u_limit: GridFunction, v_limit: GridFunction,
                   phi1: GridFunction, phi2: GridFunction,
                   s: Symbol) -> complex:
    """The zero-trace pairing <A_{psi_0 o pi}(phi1 u), conj(phi2 v)>.

    This is the term that survives when the dilation schedule outruns the
    sequence scale and only the weak limits u, v are left.  When psi
    extends continuously to 0 (constant trace0 value psi(0)) it equals
    psi(0) <phi1 u, conj(phi2 v)>.
    """
    if s.trace0 is None:
        raise ValueError("corrector term needs trace0 on the symbol")
    s0 = make_builtin("homogeneous", s.d, psi_tilde=s.trace0)
    return pair(apply_multiplier(s0, 1.0, multiply_pointwise(phi1, u_limit)),
                multiply_pointwise(phi2, v_limit))


def bump_test(grid: Grid, center, width: float) -> GridFunction:
    """A radial compactly supported bump test function on the grid."""
    prof = make_profile("bump", width=width)
    center = tuple(float(c) for c in center)
    if len(center) != grid.d:
        raise ValueError("center must have length d=%d" % grid.d)
    axes = np.meshgrid(*(grid.x_axis(),) * grid.d, indexing="ij")
    acc = np.zeros(grid.shape)
    for i in range(grid.d):
        dx = _wrap(axes[i] - center[i], grid.L)
        acc += dx * dx
    return GridFunction(grid, prof.fn(np.sqrt(acc)).astype(complex))


def default_test_bank(grid: Grid):
    """Three bumps at distinct centers x three symbols, one per trace
    behavior (homogeneous, Schwartz, rational)."""
    L = grid.L
    phis = [bump_test(grid, (c,) * grid.d, L / 6.0)
            for c in (0.0, 0.25 * L, 0.5 * L)]
    symbols = [
        make_builtin("homogeneous", grid.d, psi_tilde=1.0),
        make_builtin("schwartz", grid.d),
        make_builtin("rational", grid.d, alpha=(0,) * grid.d, l=0, m=2),
    ]
    return phis, symbols


def strong_compactness_probe(u_fam, grid: Grid, omega_schedule, bank=None,
                             n_schedule=None) -> dict:
    """Cross-check pairing-nullity against norm-nullity.

    For each (phi, psi) in the bank the pairing trace against the
    canonical dual partner v_n = |u_n|^(p-2) u_n is computed; the pairing
    verdict is max |limit| < 1e-3 * max(1, largest |I_n| seen).  The norm
    verdict looks at the profile max_phi ||phi u_n||_p: null when the tail
    does not increase and the final value is below 5e-2 of the initial.
    The two verdicts agree for sequences that are (or are not) strongly
    null on the bank's supports; "agree" reports that comparison.
    """
    ns = _normalized_schedule(n_schedule)
    phis, symbols = bank if bank is not None else default_test_bank(grid)
    term_fn, dual_fn, p, eps = _sequence_accessors(u_fam, grid)
    omega = _as_schedule(omega_schedule)

    traces = []
    limits = []
    scale = 1.0
    for phi in phis:
        for s in symbols:
            tr = _trace_core(term_fn, dual_fn, omega, phi, phi, s, ns, grid,
                             eps)
            traces.append(tr)
            limits.append(tr.limit_estimate if tr.converged else tr.I[-1])
            scale = max(scale, float(np.max(np.abs(tr.I))))
    max_limit = max(abs(x) for x in limits)

    norms = np.zeros(len(ns))
    for j, n in enumerate(ns):
        un = term_fn(n)
        norms[j] = max(lp_norm(multiply_pointwise(phi, un), p)
                       for phi in phis)
    tail_ok = len(norms) >= 3 and norms[-3] >= norms[-2] >= norms[-1]
    norms_vanish = bool(tail_ok and norms[-1] < NORM_NULL_REL * norms[0])
    pairings_vanish = bool(max_limit < PAIRING_NULL_REL * scale)

    return {
        "n_schedule": ns,
        "traces": traces,
        "max_limit": float(max_limit),
        "norm_profile": norms,
        "pairings_vanish": pairings_vanish,
        "norms_vanish": norms_vanish,
        "agree": pairings_vanish == norms_vanish,
    }


# ---------------------------------------------------------------------------
# Reporting

CSV_COLUMNS = ["n", "omega_n", "epsilon_n", "Re I_n", "Im I_n",
               "cauchy_gap", "adjoint_gap"]


def _fmt(x) -> str:
    return "%.17g" % float(x)


def save_trace_csv(trace: PairingTrace, path) -> None:
    """One row per schedule index; the first row has no Cauchy gap."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for j, n in enumerate(trace.n_schedule):
            gap = "" if j == 0 else _fmt(trace.cauchy_gaps[j - 1])
            if trace.epsilon is None or not np.isfinite(trace.epsilon[j]):
                eps = ""
            else:
                eps = _fmt(trace.epsilon[j])
            om = "" if trace.omega is None else _fmt(trace.omega[j])
            ag = ("" if trace.adjoint_gaps is None
                  else _fmt(trace.adjoint_gaps[j]))
            w.writerow([n, om, eps, _fmt(trace.I[j].real),
                        _fmt(trace.I[j].imag), gap, ag])


def _complex_json(z):
    if isinstance(z, str):
        return z
    z = complex(z)
    return [z.real, z.imag]


def _ratio_json(c):
    if c is None or isinstance(c, str):
        return c
    c = float(c)
    return "inf" if math.isinf(c) else c


def trace_summary(trace: PairingTrace) -> dict:
    """JSON-ready summary: limit, reference, ratio class, verdicts."""
    return {
        "limit": _complex_json(trace.limit_estimate),
        "reference": (trace.reference if isinstance(trace.reference, str)
                      else _complex_json(trace.reference)),
        "ratio_class": _ratio_json(trace.ratio_class),
        "converged": trace.converged,
        "final_gap": (float(trace.cauchy_gaps[-1])
                      if len(trace.cauchy_gaps) else 0.0),
        "max_adjoint_gap": (float(np.max(trace.adjoint_gaps))
                            if trace.adjoint_gaps is not None else None),
    }


def save_summary_json(trace: PairingTrace, path) -> None:
    with open(path, "w") as fh:
        json.dump(trace_summary(trace), fh, indent=2, sort_keys=True)
        fh.write("\n")
