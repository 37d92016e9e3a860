"""Acceptance suite: the nine shipped numerical criteria.

One test per criterion; each prints a single pass/fail line with the
measured figure of merit (run pytest with -s to see the lines inline).
Tolerances and runtime budgets are stated next to each check.
"""

import math
import time

import numpy as np

from oslab import dualgeom, locprinc, semiclass as sc
from oslab import oschd as oc
from oslab.fourmult import (Grid, GridFunction, apply_multiplier, lp_norm,
                            pair, sample_function)
from oslab.seqgen import make_family, make_profile
from oslab.symcalc import (conjugate_symbol, dilate, dyadic_shells,
                           make_builtin, mihlin_estimate, symbol_product)

SEED = 20260815


def report(num, desc, ok, detail):
    line = ("criterion %d (%s): %s [%s]"
            % (num, desc, "PASS" if ok else "FAIL", detail))
    print(line, flush=True)
    assert ok, line


def fourier_mode(grid, k):
    x = grid.x_points()
    phase = np.tensordot(x, 2j * np.pi * np.asarray(k, float) / grid.L,
                         axes=([-1], [0]))
    return GridFunction(grid, np.exp(phase))


def band_limited_noise(grid, rng, modes=6):
    # mean-zero on purpose: direction-dependent homogeneous symbols have
    # no canonical value at the zero frequency (the library assigns the
    # direction-average there), so the multiplier laws are asserted away
    # from that singular mode
    coef = np.zeros(grid.shape, dtype=complex)
    for _ in range(modes):
        idx = tuple(int(k) % grid.N
                    for k in rng.integers(-4, 5, size=grid.d))
        if all(i == 0 for i in idx):
            continue
        coef[idx] = rng.normal() + 1j * rng.normal()
    vals = np.fft.ifftn(coef) * grid.N ** grid.d
    return GridFunction(grid, vals)


def richardson_sqrt(n_schedule, values):
    """Neville extrapolation to h = 0 on nodes h = 1/sqrt(n).

    For a dilation schedule omega_n = 1/sqrt(n) acting on a mode at
    frequency n, the trace is a smooth function of h = 1/sqrt(n) (for
    the rational symbol it is exactly h/(1+h) times the mass), so
    polynomial extrapolation on the doubling nodes recovers the h -> 0
    limit far inside the blunt Cauchy gate's resolution.
    """
    hs = [1.0 / math.sqrt(n) for n in n_schedule]
    cur = [complex(v) for v in values]
    k = len(cur)
    for j in range(1, k):
        cur = [(cur[i + 1] * hs[i] - cur[i] * hs[i + j])
               / (hs[i] - hs[i + j]) for i in range(k - j)]
    return cur[0]


def test_criterion_1_geometry_roundtrip():
    t0 = time.perf_counter()
    worst = 0.0
    for d in (1, 2, 3):
        params = dualgeom.CompactParams(d)
        rng = np.random.default_rng([SEED, d])
        radii = np.exp(rng.uniform(np.log(1e-5), np.log(1e5), 10000))
        dirs = rng.standard_normal((10000, d))
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        for r, e in zip(radii, dirs):
            xi = r * e
            back = dualgeom.decompactify(
                dualgeom.compactify(dualgeom.Interior(xi), params), params)
            worst = max(worst,
                        float(np.linalg.norm(back.xi - xi)) / float(r))
    dt = time.perf_counter() - t0
    ok = worst < 1e-10 and dt < 1.0
    report(1, "geometry roundtrip", ok,
           "max rel err %.2e, %.2fs for 3x10^4 roundtrips" % (worst, dt))


def test_criterion_2_oscillation_closed_form():
    t0 = time.perf_counter()
    g = Grid(1, 1.0, 4096)
    phi = oc.bump_test(g, (0.5,), 0.3)
    mass = lp_norm(phi, 2.0) ** 2
    osc = make_family("oscillation", 1, 2.0, k=(1.0,),
                      epsilon=lambda n: 1.0 / n)
    s = make_builtin("rational", 1, alpha=(0,), l=0, m=1)

    # omega = 1/n: ratio 1, limit psi(1) * mass
    tr1 = oc.pairing(osc, osc, lambda n: 1.0 / n, phi, phi, s,
                     (1, 2, 4, 8, 16, 32, 64), g)
    err1 = abs(tr1.limit_estimate - 0.5 * mass) / (0.5 * mass)

    # omega = 1/n^2: ratio 0, limit trace0 * mass; gaps shrink like 1/n
    # so the schedule is linear to meet the Cauchy rule by n = 64
    tr0 = oc.pairing(osc, osc, lambda n: 1.0 / n ** 2, phi, phi, s,
                     tuple(range(8, 65, 8)), g)
    err0 = abs(tr0.limit_estimate - mass) / mass

    # omega = 1/sqrt(n): ratio inf, limit traceInf * mass = 0.  The raw
    # trace decays like 1/sqrt(n) and is honestly 'not converged' at
    # n = 64; extrapolating the same data in h = 1/sqrt(n) reaches the
    # limit, measured against the shared mass scale.
    ns = (1, 2, 4, 8, 16, 32, 64)
    trI = oc.pairing(osc, osc, lambda n: 1.0 / math.sqrt(n), phi, phi, s,
                     ns, g)
    assert not trI.converged
    errI = abs(richardson_sqrt(ns, trI.I)) / mass

    dt = time.perf_counter() - t0
    ok = (tr1.converged and tr0.converged
          and err1 < 0.01 and err0 < 0.01 and errI < 0.01 and dt < 10.0)
    report(2, "oscillation closed form", ok,
           "rel errs c=1 %.2e, c=0 %.2e, c=inf %.2e, %.1fs"
           % (err1, err0, errI, dt))


def test_criterion_3_concentration_closed_form():
    g = Grid(1, 64.0, 32768)
    phi = oc.bump_test(g, (0.0,), 8.0)
    fam = make_family("concentration", 1, 2.0, omega=lambda n: 1.0 / n)
    s = make_builtin("rational", 1, alpha=(0,), l=0, m=2)

    # dense-trapezoid oracles for the quadrature references
    xi = np.linspace(-40.0, 40.0, 2 ** 21)
    dens = np.exp(-2.0 * np.pi * xi ** 2)
    theta = {0.0: float(np.trapezoid(dens, xi)),
             1.0: float(np.trapezoid(dens / (1.0 + xi ** 2), xi)),
             math.inf: 0.0}
    gauge = theta[0.0]

    errs = []
    for c, om in ((0.0, lambda n: 1.0 / n ** 2),
                  (1.0, lambda n: 1.0 / n),
                  (math.inf, lambda n: 1.0 / math.sqrt(n))):
        ref = oc.closed_form_reference("concentration", c, s, u=fam, v=fam,
                                       phi1=phi, phi2=phi, grid=g)
        assert abs(ref - theta[c]) < 1e-3 * max(gauge, abs(theta[c]))
        if c is math.inf:
            # the trace vanishes like a Poisson-kernel tail ~1/sqrt(n),
            # so extrapolate in h = 1/sqrt(n) as in the oscillation suite
            ns = (1, 2, 4, 8, 16, 32, 64)
            tr = oc.pairing(fam, fam, om, phi, phi, s, ns, g)
            est = richardson_sqrt(ns, tr.I)
        else:
            tr = oc.pairing(fam, fam, om, phi, phi, s,
                            (1, 2, 4, 8, 16, 32), g)
            est = tr.limit_estimate
            assert tr.converged
        errs.append(abs(est - ref) / (abs(ref) if abs(ref) > 0 else gauge))

    # pi-pushforward: scale-blind value, identical across schedules
    gp = Grid(1, 32.0, 4096)
    up = make_family("concentration", 1, 2.0,
                     profile=make_profile("gaussian", width=0.5),
                     omega=lambda n: 1.0 / n)
    pp = oc.bump_test(gp, (0.0,), 6.0)
    runs = []
    for om in (lambda n: 1.0 / n ** 2, lambda n: 1.0 / n,
               lambda n: 1.0 / math.sqrt(n)):
        tw, _, gap = oc.pi_pushforward_check(up, up, om, pp, pp,
                                             lambda e: 2.0 + e[..., 0],
                                             (1, 2, 4, 8, 16), gp)
        assert gap < 1e-8
        runs.append(tw.I)
    push_gap = max(float(np.max(np.abs(runs[i] - runs[0])))
                   for i in (1, 2))

    ok = all(e < 0.01 for e in errs) and push_gap < 1e-8
    report(3, "concentration closed form", ok,
           "rel errs c=0 %.2e, c=1 %.2e, c=inf %.2e, pushforward gap %.1e"
           % (errs[0], errs[1], errs[2], push_gap))


def test_criterion_4_multiplier_laws():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    grids = [Grid(1, 1.0, 128), Grid(1, 2.0, 256), Grid(2, 1.0, 32)]

    def pool(d):
        e_axis = lambda e: e[..., 0]
        return [make_builtin("homogeneous", d, psi_tilde=1.3),
                make_builtin("homogeneous", d, psi_tilde=e_axis),
                make_builtin("schwartz", d),
                make_builtin("rational", d, alpha=(0,) * d, l=0, m=1),
                make_builtin("rational", d,
                             alpha=(1,) + (0,) * (d - 1), l=0, m=2),
                make_builtin("sobolev_weight", d, m=2),
                make_builtin("sobolev_weight", d, m=2, reciprocal=True)]
    pools = {g.d: pool(g.d) for g in grids}
    noises = {id(g): [band_limited_noise(g, rng) for _ in range(4)]
              for g in grids}

    worst_eig = worst_comp = worst_adj = 0.0
    cases = 0
    for _ in range(400):
        g = grids[rng.integers(len(grids))]
        s = pools[g.d][rng.integers(len(pools[g.d]))]
        k = rng.integers(-g.N // 2 + 1, g.N // 2, size=g.d)
        omega = float(rng.uniform(0.2, 3.0))
        u = fourier_mode(g, k)
        lam = s.eval(np.asarray([omega * k / g.L], float))[0]
        out = apply_multiplier(s, omega, u)
        err = (np.max(np.abs(out.values - lam * u.values))
               / max(1.0, abs(lam)))
        worst_eig = max(worst_eig, float(err))
        cases += 1
    for _ in range(300):
        g = grids[rng.integers(len(grids))]
        ps = pools[g.d]
        s1, s2 = ps[rng.integers(len(ps))], ps[rng.integers(len(ps))]
        u = noises[id(g)][rng.integers(4)]
        omega = float(rng.uniform(0.2, 3.0))
        two = apply_multiplier(s1, omega, apply_multiplier(s2, omega, u))
        one = apply_multiplier(symbol_product(s1, s2), omega, u)
        err = (np.max(np.abs(two.values - one.values))
               / max(1.0, float(np.max(np.abs(one.values)))))
        worst_comp = max(worst_comp, float(err))
        cases += 1
    for _ in range(300):
        g = grids[rng.integers(len(grids))]
        s = pools[g.d][rng.integers(len(pools[g.d]))]
        u, v = (noises[id(g)][rng.integers(4)] for _ in range(2))
        omega = float(rng.uniform(0.2, 3.0))
        lhs = pair(apply_multiplier(s, omega, u), v)
        rhs = pair(u, apply_multiplier(conjugate_symbol(s), omega, v))
        err = abs(lhs - rhs) / max(1.0, abs(lhs))
        worst_adj = max(worst_adj, float(err))
        cases += 1

    dt = time.perf_counter() - t0
    worst = max(worst_eig, worst_comp, worst_adj)
    ok = cases >= 1000 and worst <= 1e-10 and dt < 5.0
    report(4, "multiplier laws", ok,
           "%d cases, worst rel err %.1e (eig %.1e comp %.1e adj %.1e), "
           "%.1fs" % (cases, worst, worst_eig, worst_comp, worst_adj, dt))


def test_criterion_5_mihlin_dilation_invariance():
    d = 2
    e_axis = lambda e: e[..., 0]
    suite = [make_builtin("homogeneous", d, psi_tilde=1.3),
             make_builtin("homogeneous", d, psi_tilde=e_axis),
             make_builtin("schwartz", d),
             make_builtin("rational", d, alpha=(0, 0), l=0, m=1),
             make_builtin("rational", d, alpha=(1, 0), l=0, m=2),
             make_builtin("sobolev_weight", d, m=2),
             make_builtin("sobolev_weight", d, m=2, reciprocal=True)]
    radii = dyadic_shells()
    fine = dyadic_shells(per_octave=8)
    all_bit = True
    worst_dev = 0.0
    for s in suite:
        base = mihlin_estimate(s).constant
        base_fine = mihlin_estimate(s, shells=fine).constant
        for a in (0.1, 10.0):
            resc = mihlin_estimate(dilate(s, a), shells=radii / a).constant
            all_bit = all_bit and (resc == base)
            ca = mihlin_estimate(dilate(s, a), shells=fine).constant
            worst_dev = max(worst_dev, abs(ca - base_fine) / base_fine)
    ok = all_bit and worst_dev < 0.05
    report(5, "Mihlin dilation invariance", ok,
           "%d symbols, bit-identical %s, fixed-lattice dev %.2e"
           % (len(suite), all_bit, worst_dev))


def test_criterion_6_wigner_pairing_identity():
    g = Grid(1, 4.0, 256)
    x = g.x_axis()
    gu = make_profile("gaussian", width=0.5, center=2.0)
    gv = make_profile("gaussian", width=0.7, center=1.8)
    u = GridFunction(g, gu.fn(x) * np.exp(2j * np.pi * 3.0 * x / g.L))
    v = GridFunction(g, gv.fn(x) * np.exp(2j * np.pi * 1.0 * x / g.L))
    bump = make_profile("bump", width=1.2, center=2.0)
    gx = make_profile("gaussian", width=0.8, center=2.0)
    suite = [
        sc.separable_phase_symbol(lambda p: bump.fn(p[..., 0]) + 0j,
                                  make_builtin("schwartz", 1)),
        sc.separable_phase_symbol(
            lambda p: gx.fn(p[..., 0]) + 0j,
            make_builtin("rational", 1, alpha=(0,), l=0, m=2)),
    ]
    worst = 0.0
    for a in suite:
        for t in (0.5, 1.0):
            for w in (0.25, 0.0625):
                q = sc.QuantParams(t, w)
                W = sc.wigner(u, v, q)
                lhs = sc.wigner_pairing(W, a)
                rhs = pair(sc.op_t_apply(a, q, u), v)
                worst = max(worst, abs(lhs - rhs) / abs(lhs))

    xi0 = 1.0 / math.sqrt(2.0 * math.pi)
    psi = make_builtin(
        "schwartz", 1,
        fn=lambda p: np.exp(-np.pi * (p[..., 0] - xi0) ** 2),
        value_at_zero=float(np.exp(-np.pi * xi0 ** 2)))
    gs = Grid(1, 2.0, 2048)
    us = sample_function(
        gs, lambda p: np.exp(-np.pi * (p[..., 0] - 1.0) ** 2 / 0.42 ** 2))
    a_slope = sc.separable_phase_symbol(
        lambda p: make_profile("bump", width=1.0).fn(p[..., 0] - 1.0) + 0j,
        psi, bandwidth=1.5)
    res = sc.quantisation_gap(a_slope, 1.0, 0.5,
                              [2.0 ** -j for j in range(2, 8)], us)
    slope = res["slope"]

    ok = worst < 1e-8 and 0.8 <= slope <= 1.2
    report(6, "Wigner pairing identity", ok,
           "max rel gap %.1e over 8 cases, quantisation slope %.3f"
           % (worst, slope))


def test_criterion_7_eps_compactness_dichotomy():
    t0 = time.perf_counter()
    g = Grid(1, 16.0, 4096)
    x = g.x_axis()

    # concentration right-hand side with two vanishing moments (second
    # Gaussian derivative), so the m = 3 test decays like n^(-5/2)
    def spike(n):
        y = n * (x - 8.0)
        vals = (math.sqrt(n) * (4.0 * np.pi ** 2 * y ** 2 - 2.0 * np.pi)
                * np.exp(-np.pi * y ** 2))
        return GridFunction(g, vals.astype(complex))

    ns = (1, 2, 4, 8, 16, 32)
    dec = locprinc.eps_compactness_norms(spike, lambda n: 1.0, 3, 2.0,
                                         n_schedule=ns)
    ratio = dec["norms"][-1] / dec["norms"][0]

    plat = locprinc.eps_compactness_norms(spike, lambda n: 1.0 / n, 3, 2.0,
                                          n_schedule=ns)
    xi = np.linspace(-60.0, 60.0, 2 ** 21)
    ref = math.sqrt(np.trapezoid(
        16.0 * np.pi ** 4 * xi ** 4 * np.exp(-2.0 * np.pi * xi ** 2)
        / (1.0 + np.abs(xi) ** 3) ** 2, xi))
    plat_dev = max(abs(v - ref) / ref for v in plat["norms"])

    dt = time.perf_counter() - t0
    ok = (dec["verdict"] == "compact" and ratio < 1e-2
          and plat["verdict"] == "not compact" and plat_dev < 0.05
          and dt < 10.0)
    report(7, "eps-compactness dichotomy", ok,
           "decay ratio %.2e, plateau dev %.2e vs quadrature, %.1fs"
           % (ratio, plat_dev, dt))


def test_criterion_8_worked_example():
    t0 = time.perf_counter()
    rec = locprinc.worked_example_53()
    dt = time.perf_counter() - t0
    pm = rec["weak_star_pairings"]
    res_ratio = max(
        max(abs(z) for z in rec[tag]["residuals"].values())
        / rec[tag]["scale"]
        for tag in ("residual_first", "residual_second"))
    ok = (rec["verdict"] == "pass" and rec["rhs_compact"]
          and pm[-1] < 0.05 * pm[0] and res_ratio < 1e-2 and dt < 60.0)
    report(8, "two-equation worked example", ok,
           "test-pairing ratio %.2e, residual ratio %.2e, %.1fs"
           % (pm[-1] / pm[0], res_ratio, dt))


def test_criterion_9_strong_compactness():
    g = Grid(1, 1.0, 256)
    base = oc.bump_test(g, (0.5,), 0.125)
    null = oc.CustomSequence(term_fn=lambda n, gr: (1.0 / n) * base)
    rec_null = oc.strong_compactness_probe(null, g, lambda n: 1.0 / n)

    osc = make_family("oscillation", 1, 2.0, k=(1.0,),
                      epsilon=lambda n: 1.0 / n)
    rec_osc = oc.strong_compactness_probe(osc, g, lambda n: 1.0 / n)

    gc = Grid(1, 32.0, 4096)
    conc = make_family("concentration", 1, 2.0,
                       profile=make_profile("gaussian", width=0.5),
                       omega=lambda n: 1.0 / n)
    rec_conc = oc.strong_compactness_probe(conc, gc, lambda n: 1.0 / n,
                                           n_schedule=(1, 2, 4, 8, 16))

    null_ok = (rec_null["pairings_vanish"] and rec_null["norms_vanish"])
    osc_fails = (not rec_osc["pairings_vanish"]
                 and not rec_osc["norms_vanish"])
    conc_fails = (not rec_conc["pairings_vanish"]
                  and not rec_conc["norms_vanish"])
    agree = (rec_null["agree"] and rec_osc["agree"] and rec_conc["agree"])
    ok = null_ok and osc_fails and conc_fails and agree
    report(9, "strong-compactness criterion", ok,
           "null control %s, oscillation/concentration controls rejected "
           "%s/%s, verdicts agree %s"
           % (null_ok, osc_fails, conc_fails, agree))
