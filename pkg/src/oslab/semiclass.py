"""t-quantised phase-space operators, Wigner transforms, and their identities.

Quantisation convention, at scale omega and ordering parameter t in [0,1]:

    Op_t(a)u(x) = int int e^(2 pi i (x-y).xi) a(t x + (1-t) y, omega xi)
                  u(y) dy dxi,

so t=1 is the multiply-then-differentiate ordering, t=1/2 the symmetric
one, and xi-only symbols are plain Fourier multipliers for every t.  The
grid realization decomposes the symbol over spatial modes,

    Op_t(e_m ox psi) u = e^(2 pi i m t x / L) A_{psi(omega .)}
                         [e^(2 pi i m (1-t) x / L) u],

which is exact in the grid samples and needs no off-lattice symbol
evaluations; fractional modulation frequencies m(1-t) are sampled
pointwise.  The companion transform over an extended transversal window
of s*N points (spacing L/N),

    W_t(u,v)(x, xi) = (L/N)^d sum_y e^(-2 pi i y.xi) u(x + omega t y)
                      conj(v(x - omega (1-t) y)),

uses exact spectral phase shifts for the fractional translates and puts
xi on the refined lattice k/(sL).  With the window factor
s = 2^floor(log2(1/(omega max(t,1-t)))) (clamped to [1,64]) the pairing

    <W_t(u,v), a> = <Op_t(a)u, conj(v)>

is an exact discrete identity whenever omega*s is an integer (all dyadic
omega), because the transversal DFT then lands each data frequency on a
single xi-lattice point; otherwise it holds to spectral accuracy.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .fourmult import (
    Grid,
    GridFunction,
    apply_multiplier,
    lp_norm,
    multiplier_values,
    multiply_pointwise,
    pair,
)
from .symcalc import Symbol, multi_indices
from . import oschd

# Mode coefficients below this fraction of the largest are skipped in the
# spatial-mode decomposition.
MODE_THRESHOLD = 1e-15

# Hard size guards: general-path symbol matrix and Wigner array entries.
GENERAL_PATH_MAX = 2 ** 16
WIGNER_ENTRY_MAX = 2 ** 22


@dataclass(frozen=True)
class QuantParams:
    """Quantisation ordering t in [0,1] and scale omega in (0,1]."""

    t: float
    omega: float

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise ValueError("quantisation parameter t must lie in [0,1]")
        if not 0.0 < self.omega <= 1.0:
            raise ValueError("scale omega must lie in (0,1]")


@dataclass(frozen=True, eq=False)
class PhaseSymbol:
    """A phase-space symbol a(x, xi) with a structure tag.

    structure is one of "xi_only", "x_only", "separable", "general";
    xi_symbol holds the frequency factor as a multiplier Symbol (so its
    zero-frequency policy is honored), x_part the spatial factor as a
    callable on points (..., d), and evaluator the joint callable for
    general symbols (evaluated literally, so it must be finite at xi=0).
    schwartz tags rapid decay in xi; bandwidth is the factor in the
    resolution guard omega >= 4 (L/N) bandwidth.
    """

    d: int
    structure: str
    x_part: Optional[Callable] = None
    xi_symbol: Optional[Symbol] = None
    evaluator: Optional[Callable] = None
    schwartz: bool = False
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.structure not in ("xi_only", "x_only", "separable",
                                  "general"):
            raise ValueError("unknown structure tag %r" % (self.structure,))
        need = {"xi_only": self.xi_symbol, "x_only": self.x_part,
                "general": self.evaluator}
        if self.structure == "separable":
            if self.x_part is None or self.xi_symbol is None:
                raise ValueError("separable symbol needs x_part and "
                                 "xi_symbol")
        elif need[self.structure] is None:
            raise ValueError("structure %r lacks its evaluator"
                             % (self.structure,))
        if self.xi_symbol is not None and self.xi_symbol.d != self.d:
            raise ValueError("xi_symbol dimension mismatch")

    def eval_phase(self, x_pts, xi_pts) -> np.ndarray:
        """a at broadcastable point arrays (..., d); xi taken literally
        except that a Symbol factor resolves xi = 0 by its policy."""
        if self.structure == "general":
            return np.asarray(self.evaluator(x_pts, xi_pts), dtype=complex)
        out = 1.0 + 0.0j
        if self.x_part is not None:
            out = out * np.asarray(self.x_part(x_pts), dtype=complex)
        if self.xi_symbol is not None:
            out = out * _xi_values(self.xi_symbol, xi_pts)
        shape = np.broadcast_shapes(np.asarray(x_pts).shape[:-1],
                                    np.asarray(xi_pts).shape[:-1])
        return np.broadcast_to(np.asarray(out, dtype=complex), shape).copy()


def xi_phase_symbol(s: Symbol, bandwidth: float = 1.0) -> PhaseSymbol:
    """Wrap a multiplier symbol as a xi-only phase symbol."""
    return PhaseSymbol(d=s.d, structure="xi_only", xi_symbol=s,
                       schwartz=(s.family == "schwartz"),
                       bandwidth=float(bandwidth))


def x_phase_symbol(fn: Callable, d: int) -> PhaseSymbol:
    """A spatial multiplication symbol a(x); no xi content (bandwidth 0)."""
    return PhaseSymbol(d=d, structure="x_only", x_part=fn, bandwidth=0.0)


def separable_phase_symbol(x_fn: Callable, s: Symbol,
                           bandwidth: float = 1.0) -> PhaseSymbol:
    return PhaseSymbol(d=s.d, structure="separable", x_part=x_fn,
                       xi_symbol=s, schwartz=(s.family == "schwartz"),
                       bandwidth=float(bandwidth))


def general_phase_symbol(evaluator: Callable, d: int, schwartz: bool = False,
                         bandwidth: float = 1.0) -> PhaseSymbol:
    return PhaseSymbol(d=d, structure="general", evaluator=evaluator,
                       schwartz=bool(schwartz), bandwidth=float(bandwidth))


def phase_symbol_sum(a: PhaseSymbol, b: PhaseSymbol) -> PhaseSymbol:
    """Pointwise sum (general structure; literal evaluation)."""
    if a.d != b.d:
        raise ValueError("dimension mismatch")
    return PhaseSymbol(
        d=a.d, structure="general",
        evaluator=lambda x, xi: a.eval_phase(x, xi) + b.eval_phase(x, xi),
        schwartz=a.schwartz and b.schwartz,
        bandwidth=max(a.bandwidth, b.bandwidth))


def _xi_values(s: Symbol, pts) -> np.ndarray:
    """Symbol values at literal frequency points, zero resolved by policy."""
    pts = np.asarray(pts, dtype=float)
    flat = pts.reshape(-1, pts.shape[-1])
    nonzero = np.any(flat != 0.0, axis=1)
    vals = np.empty(flat.shape[0], dtype=complex)
    if np.any(nonzero):
        vals[nonzero] = s.eval(flat[nonzero])
    vals[~nonzero] = s.zero_value()
    return vals.reshape(pts.shape[:-1])


def _resolution_guard(a: PhaseSymbol, q: QuantParams, grid: Grid):
    floor = 4.0 * grid.spacing * a.bandwidth
    if q.omega < floor:
        raise ValueError(
            "scale omega=%.6g under-resolves the symbol: need omega >= "
            "4 (L/N) bandwidth = %.6g" % (q.omega, floor))


def _mode_phases(grid: Grid, m_int, factor: float) -> np.ndarray:
    """Samples of exp(2 pi i factor m.x / L) on the grid (factor may make
    the frequency fractional; the samples are exact either way)."""
    x = grid.x_points()
    phase = np.tensordot(x, np.asarray(m_int, dtype=float), axes=([-1], [0]))
    return np.exp(2j * np.pi * factor / grid.L * phase)


def _mode_apply(amps, mults, q: QuantParams, u: GridFunction,
                grid: Grid) -> GridFunction:
    """Sum over spatial modes m of e^(i t m x) A_m [e^(i (1-t) m x) u].

    amps has the grid shape (DFT order over the x-axes) and holds each
    mode's magnitude, used only for thresholding; mults maps a mode
    position to its full multiplier array over the frequency grid
    (mode coefficient included).
    """
    kint = grid.freq_integers()
    mesh = np.meshgrid(*([kint] * grid.d), indexing="ij")
    thresh = MODE_THRESHOLD * np.max(amps)
    out = np.zeros(grid.shape, dtype=complex)
    for pos in np.ndindex(*amps.shape):
        if amps[pos] <= thresh:
            continue
        m_int = [int(mesh[i][pos]) for i in range(grid.d)]
        pre = _mode_phases(grid, m_int, q.t)
        post = _mode_phases(grid, m_int, 1.0 - q.t)
        spec = np.fft.fftn(post * u.values)
        out += pre * np.fft.ifftn(mults(pos) * spec)
    return GridFunction(grid, out)


def op_t_apply(a: PhaseSymbol, q: QuantParams, u: GridFunction) -> GridFunction:
    """Apply the t-quantised operator of a at scale omega to u.

    xi-only symbols reduce exactly to apply_multiplier (any t); x-only
    symbols are the multiplication operator (any t; the transversal
    integral collapses); separable symbols decompose the spatial factor
    over modes; general symbols sample a(x, omega k/L) on the full
    (x, k) product (cost guard N^d <= 2^16) and decompose likewise.
    """
    grid = u.grid
    if a.d != grid.d:
        raise ValueError("symbol dimension %d does not match grid %d"
                         % (a.d, grid.d))
    if a.structure == "xi_only":
        _resolution_guard(a, q, grid)
        return apply_multiplier(a.xi_symbol, q.omega, u)
    if a.structure == "x_only":
        vals = np.asarray(a.x_part(grid.x_points()), dtype=complex)
        return GridFunction(grid, vals * u.values)
    _resolution_guard(a, q, grid)
    if a.structure == "separable":
        phi = np.asarray(a.x_part(grid.x_points()), dtype=complex)
        coeffs = np.fft.fftn(phi) / grid.N ** grid.d
        mvals = multiplier_values(a.xi_symbol, q.omega, grid)
        return _mode_apply(np.abs(coeffs),
                           lambda pos: coeffs[pos] * mvals, q, u, grid)
    # general
    if grid.N ** grid.d > GENERAL_PATH_MAX:
        raise ValueError("general symbol path limited to N^d <= 2^16")
    flat_x = grid.x_points().reshape(-1, grid.d)
    flat_k = (q.omega * grid.freq_points()).reshape(-1, grid.d)
    A = np.asarray(a.evaluator(flat_x[:, None, :], flat_k[None, :, :]),
                   dtype=complex)
    A = A.reshape(grid.shape + grid.shape)
    coeffs = np.fft.fftn(A, axes=tuple(range(grid.d))) / grid.N ** grid.d
    amps = np.max(np.abs(coeffs), axis=tuple(range(grid.d, 2 * grid.d)))
    return _mode_apply(amps, lambda pos: coeffs[pos], q, u, grid)


def window_factor(q: QuantParams) -> int:
    """Transversal window s = 2^floor(log2(1/(omega max(t,1-t)))), in
    [1, 64]."""
    raw = 1.0 / (q.omega * max(q.t, 1.0 - q.t))
    s = 2 ** int(math.floor(math.log2(raw))) if raw >= 1.0 else 1
    return max(1, min(64, s))


@dataclass(frozen=True, eq=False)
class WignerArray:
    """Phase-space samples over (x grid) x (refined xi lattice).

    values has shape (N,)*d + (sN,)*d; the xi axes are DFT-ordered on the
    lattice k/(sL) and carry quadrature weight (1/(sL))^d.
    """

    grid: Grid
    q: QuantParams
    window: int
    values: np.ndarray

    def xi_axis(self) -> np.ndarray:
        M = self.window * self.grid.N
        k = np.arange(M)
        k[k >= M // 2] -= M
        return k / (self.window * self.grid.L)

    def xi_weight(self) -> float:
        return (1.0 / (self.window * self.grid.L)) ** self.grid.d


def wigner(u: GridFunction, v: GridFunction, q: QuantParams) -> WignerArray:
    """W_t(u,v) by transversal quadrature with spectral phase shifts."""
    if u.grid != v.grid:
        raise ValueError("grid mismatch")
    grid = u.grid
    s = window_factor(q)
    M = s * grid.N
    if (grid.N ** grid.d) * (M ** grid.d) > WIGNER_ENTRY_MAX:
        raise ValueError(
            "Wigner array would hold %d entries (guard %d); reduce N or "
            "increase omega" % ((grid.N ** grid.d) * (M ** grid.d),
                                WIGNER_ENTRY_MAX))
    h = grid.spacing
    jj = np.arange(M)
    jj[jj >= M // 2] -= M
    yshift = jj * h  # signed transversal offsets, DFT order

    U = np.fft.fftn(u.values)
    V = np.fft.fftn(v.values)
    k = grid.freq_axis()  # k/L, per axis

    if grid.d == 1:
        # phase matrices (M, N): rows are shifts, columns frequencies
        pu = np.exp(2j * np.pi * (q.omega * q.t) * np.outer(yshift, k))
        pv = np.exp(-2j * np.pi * (q.omega * (1.0 - q.t))
                    * np.outer(yshift, k))
        ush = np.fft.ifft(U[None, :] * pu, axis=1)
        vsh = np.fft.ifft(V[None, :] * pv, axis=1)
        G = (ush * np.conj(vsh)).T  # (N, M): x rows, transversal columns
        W = h * np.fft.fft(G, axis=1)
        return WignerArray(grid, q, s, W)

    kmesh = np.meshgrid(*([k] * grid.d), indexing="ij")
    out = np.zeros(grid.shape + (M,) * grid.d, dtype=complex)
    for pos in np.ndindex(*((M,) * grid.d)):
        y = np.array([yshift[p] for p in pos])
        ph_u = np.zeros(grid.shape)
        for i in range(grid.d):
            ph_u = ph_u + kmesh[i] * y[i]
        ush = np.fft.ifftn(U * np.exp(2j * np.pi * q.omega * q.t * ph_u))
        vsh = np.fft.ifftn(V * np.exp(-2j * np.pi * q.omega * (1.0 - q.t)
                                      * ph_u))
        out[(Ellipsis,) + pos] = ush * np.conj(vsh)
    W = (h ** grid.d) * np.fft.fftn(out, axes=tuple(range(grid.d,
                                                          2 * grid.d)))
    return WignerArray(grid, q, s, W)


def wigner_pairing(W: WignerArray, a: PhaseSymbol) -> complex:
    """Quadrature of W against a over (x grid) x (xi lattice)."""
    grid = W.grid
    d = grid.d
    xw = grid.spacing ** d
    if d == 1:
        xpts = grid.x_points()  # (N, 1)
        xipts = W.xi_axis()[:, None]  # (M, 1)
        avals = a.eval_phase(xpts[:, None, :], xipts[None, :, :])
        return complex(xw * W.xi_weight() * np.sum(W.values * avals))
    xpts = grid.x_points().reshape(-1, d)
    M = W.window * grid.N
    ax = W.xi_axis()
    mesh = np.meshgrid(*([ax] * d), indexing="ij")
    xipts = np.stack(mesh, axis=-1).reshape(-1, d)
    avals = a.eval_phase(xpts[:, None, :], xipts[None, :, :])
    Wflat = W.values.reshape(xpts.shape[0], xipts.shape[0])
    return complex(xw * W.xi_weight() * np.sum(Wflat * avals))


def wigner_pairing_gap(u: GridFunction, v: GridFunction, q: QuantParams,
                       a: PhaseSymbol) -> float:
    """|<W_t(u,v), a> - <Op_t(a)u, conj(v)>| (absolute)."""
    lhs = wigner_pairing(wigner(u, v, q), a)
    rhs = pair(op_t_apply(a, q, u), v)
    return abs(lhs - rhs)


def quantisation_gap(a: PhaseSymbol, t: float, s_param: float,
                     omegas: Sequence[float], u: GridFunction,
                     p: float = 2.0) -> dict:
    """||Op_t(a)u - Op_s(a)u||_p per omega with a log-log slope fit.

    The transition between orderings carries one factor of omega, so the
    fitted slope is expected near 1.  Identically zero profiles (xi-only
    symbols, or t = s) report slope None.
    """
    omegas = [float(w) for w in omegas]
    norms = []
    for w in omegas:
        qt = QuantParams(t, w)
        qs = QuantParams(s_param, w)
        diff = op_t_apply(a, qt, u) - op_t_apply(a, qs, u)
        norms.append(lp_norm(diff, p))
    norms = np.asarray(norms)
    if np.all(norms <= 1e-300):
        slope = None
    else:
        slope = float(np.polyfit(np.log(omegas), np.log(norms), 1)[0])
    return {"omegas": np.asarray(omegas), "norms": norms, "slope": slope}


def op_commutator_profile(a: PhaseSymbol, b: PhaseSymbol, t: float,
                          omegas: Sequence[float], u: GridFunction,
                          p: float = 2.0) -> np.ndarray:
    """||[Op_t(a), Op_t(b)] u||_p per omega (expected to shrink with
    omega for smooth rapidly decaying symbols)."""
    out = []
    for w in omegas:
        q = QuantParams(t, float(w))
        ab = op_t_apply(a, q, op_t_apply(b, q, u))
        ba = op_t_apply(b, q, op_t_apply(a, q, u))
        out.append(lp_norm(ab - ba, p))
    return np.asarray(out)


def semiclassical_pairing(u_fam, v_fam, omega_schedule, phi1, phi2,
                          psi, n_schedule=None, grid=None,
                          u_limit=None, v_limit=None):
    """The pairing trace restricted to rapidly decaying symbols.

    Same computation (same code path) as the general pairing trace, with
    the symbol required to be Schwartz-class: boundary information at
    |xi| = infinity is invisible here (psi_inf = 0).  When weak limits
    u_limit, v_limit are supplied (inputs that are merely bounded, not
    weakly null), the corrector psi(0) <phi1 u, conj(phi2 v)> is attached
    to the returned trace.
    """
    s = psi.xi_symbol if isinstance(psi, PhaseSymbol) else psi
    if s is None or getattr(s, "family", None) != "schwartz":
        raise ValueError("semiclassical pairing needs a Schwartz symbol")
    tr = oschd.pairing(u_fam, v_fam, omega_schedule, phi1, phi2, s,
                       n_schedule, grid)
    if u_limit is not None and v_limit is not None:
        tr.corrector = oschd.corrector_term(u_limit, v_limit, phi1, phi2, s)
    return tr


def sampled_seminorms(a: PhaseSymbol, grid: Grid, orders: int = 2,
                      per_axis: int = 16) -> dict:
    """max |z^alpha d^beta a| over a coarse phase-space sample lattice.

    z runs over the 2d phase variables (x then xi); derivatives are
    nested central differences with steps (grid spacing, 1/L).  Returned
    dict maps (|alpha|, |beta|) with both <= orders to the max sampled
    magnitude; pure reporting, nothing is asserted.
    """
    d = grid.d
    step = max(1, grid.N // per_axis)
    xs = grid.x_axis()[::step]
    xis = np.sort(grid.freq_axis())[::step]
    mx = np.meshgrid(*([xs] * d + [xis] * d), indexing="ij")
    pts = np.stack(mx, axis=-1).reshape(-1, 2 * d)
    hs = np.array([grid.spacing] * d + [1.0 / grid.L] * d)

    def F(z):
        return a.eval_phase(z[..., :d], z[..., d:])

    out = {}
    for beta in multi_indices(2 * d, orders):
        vals = _central_diff(F, pts, beta, hs)
        tb = sum(beta)
        for alpha in multi_indices(2 * d, orders):
            mono = np.ones(pts.shape[0])
            for i, ai in enumerate(alpha):
                if ai:
                    mono = mono * pts[:, i] ** ai
            key = (sum(alpha), tb)
            cand = float(np.max(np.abs(mono * vals)))
            out[key] = max(out.get(key, 0.0), cand)
    return out


def _central_diff(F, pts, beta, hs):
    """Nested central differences of F at pts for multi-index beta."""
    order = sum(beta)
    if order == 0:
        return F(pts)
    i = next(j for j, b in enumerate(beta) if b > 0)
    rest = list(beta)
    rest[i] -= 1
    up = pts.copy()
    up[:, i] += hs[i]
    dn = pts.copy()
    dn[:, i] -= hs[i]
    return (_central_diff(F, up, tuple(rest), hs)
            - _central_diff(F, dn, tuple(rest), hs)) / (2.0 * hs[i])


def save_wigner_csv(W: WignerArray, path) -> None:
    """Rows (x index, xi index, Re, Im) over the flattened arrays."""
    grid = W.grid
    nx = grid.N ** grid.d
    flat = W.values.reshape(nx, -1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x_index", "xi_index", "Re", "Im"])
        for i in range(nx):
            row = flat[i]
            for k in range(row.shape[0]):
                w.writerow([i, k, "%.17g" % row[k].real,
                            "%.17g" % row[k].imag])
