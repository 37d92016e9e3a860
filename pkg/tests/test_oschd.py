"""Tests for the pairing-trace estimator and its closed forms."""

import csv
import json
import math

import numpy as np
import pytest

from hypothesis import given, settings, strategies as st

from oslab.fourmult import Grid, GridFunction, lp_norm, multiply_pointwise, pair
from oslab.symcalc import Symbol, conjugate_symbol, make_builtin
from oslab.seqgen import make_family, make_profile, term
from oslab import oschd as oc

# dense-trapezoid oracles (4e6-point panels)
BUMP03_MASS = 0.29501424387381797   # ||bump(width 0.3)||_2^2
C_CONC = 0.6607229993740072         # int exp(-2 pi xi^2)/(1+xi^2) dxi

G = Grid(1, 1.0, 256)
PHI = oc.bump_test(G, (0.5,), 0.3)
OSC = make_family("oscillation", 1, 2.0, k=(1.0,), epsilon=lambda n: 1.0 / n)
S_RAT1 = make_builtin("rational", 1, alpha=(0,), l=0, m=1)  # 1/(1+|xi|)


def assert_adjoint_ok(tr):
    tol = 1e-10 * np.maximum(1.0, np.abs(tr.I))
    assert np.all(tr.adjoint_gaps <= tol)


def test_oscillation_finite_ratio_limit():
    mass = lp_norm(PHI, 2.0) ** 2
    assert abs(mass - BUMP03_MASS) < 1e-12
    tr = oc.pairing(OSC, OSC, lambda n: 1.0 / n, PHI, PHI, S_RAT1)
    assert tr.converged
    want = 0.5 * mass
    assert abs(tr.limit_estimate - want) < 0.01 * want
    assert isinstance(tr.ratio_class, float) and abs(tr.ratio_class - 1.0) < 1e-9
    assert_adjoint_ok(tr)


def test_oscillation_zero_ratio_hits_trace0():
    # gaps decay like 1/n here, so a linear schedule is needed to satisfy
    # the Cauchy tolerance by n = 64
    mass = lp_norm(PHI, 2.0) ** 2
    tr = oc.pairing(OSC, OSC, lambda n: 1.0 / n ** 2, PHI, PHI, S_RAT1,
                    n_schedule=tuple(range(8, 65, 8)))
    assert tr.converged
    assert abs(tr.limit_estimate - mass) < 0.01 * mass
    assert tr.ratio_class == 0.0
    assert_adjoint_ok(tr)


def test_oscillation_infinite_ratio_gaussian_vanishes():
    s = make_builtin("schwartz", 1)
    tr = oc.pairing(OSC, OSC, lambda n: 1.0 / math.sqrt(n), PHI, PHI, s)
    assert tr.converged
    assert abs(tr.limit_estimate) < 1e-6
    assert tr.ratio_class == math.inf
    assert_adjoint_ok(tr)


def test_concentration_finite_ratio_limit_and_reference():
    g = Grid(1, 64.0, 32768)
    phi = oc.bump_test(g, (0.0,), 8.0)
    fam = make_family("concentration", 1, 2.0, omega=lambda n: 1.0 / n)
    s = make_builtin("rational", 1, alpha=(0,), l=0, m=2)  # 1/(1+xi^2)
    ref = oc.closed_form_reference("concentration", 1.0, s, u=fam, v=fam,
                                   phi1=phi, phi2=phi, grid=g)
    # phi(0) = 1 exactly, so the reference is the quadrature of
    # exp(-2 pi xi^2)/(1+xi^2)
    assert abs(ref - C_CONC) < 1e-3
    tr = oc.pairing(fam, fam, lambda n: 1.0 / n, phi, phi, s)
    assert tr.converged
    assert abs(tr.limit_estimate - ref) < 0.01 * abs(ref)
    assert_adjoint_ok(tr)


def test_concentration_infinite_ratio_reference_is_zero():
    g = Grid(1, 64.0, 32768)
    phi = oc.bump_test(g, (0.0,), 8.0)
    fam = make_family("concentration", 1, 2.0, omega=lambda n: 1.0 / n)
    s = make_builtin("schwartz", 1)
    ref = oc.closed_form_reference("concentration", math.inf, s, u=fam, v=fam,
                                   phi1=phi, phi2=phi, grid=g)
    assert ref == 0.0


def test_closed_form_reference_oscillation_values():
    mass = lp_norm(PHI, 2.0) ** 2
    ref = oc.closed_form_reference("oscillation", 1.0, S_RAT1, u=OSC,
                                   phi1=PHI, phi2=PHI, grid=G)
    assert abs(ref - 0.5 * mass) < 1e-12
    ref0 = oc.closed_form_reference("oscillation", 0.0, S_RAT1, u=OSC,
                                    phi1=PHI, phi2=PHI, grid=G)
    assert abs(ref0 - mass) < 1e-12


def test_closed_form_reference_errors():
    bare = Symbol(d=1, family="anon",
                  base=lambda pts: np.ones(np.asarray(pts).shape[:-1],
                                           dtype=complex))
    with pytest.raises(ValueError):
        oc.closed_form_reference("oscillation", 0.0, bare, u=OSC,
                                 phi1=PHI, phi2=PHI, grid=G)
    with pytest.raises(ValueError):
        oc.closed_form_reference("oscillation", math.inf, bare, u=OSC,
                                 phi1=PHI, phi2=PHI, grid=G)
    with pytest.raises(ValueError):
        oc.closed_form_reference("oscillation", "non-pure", S_RAT1, u=OSC,
                                 phi1=PHI, phi2=PHI, grid=G)
    with pytest.raises(ValueError):
        oc.closed_form_reference("modulation", 1.0, S_RAT1, u=OSC,
                                 phi1=PHI, phi2=PHI, grid=G)
    fam = make_family("concentration", 1, 2.0, omega=lambda n: 1.0 / n)
    with pytest.raises(ValueError):
        oc.closed_form_reference("concentration", 0.0, bare, u=fam, v=fam,
                                 phi1=PHI, phi2=PHI, grid=G)


def test_purity_scan_examples():
    assert oc.purity_scan(lambda n: 1.0 / n, lambda n: 1.0 / n) == 1.0
    alt = lambda n: (1.0 / n if int(round(math.log2(n))) % 2 == 0
                     else 1.0 / n ** 2)
    assert oc.purity_scan(alt, lambda n: 1.0 / n) == "non-pure"
    assert oc.purity_scan(lambda n: 1.0 / math.log(n + 1),
                          lambda n: 1.0 / n) == math.inf
    assert oc.purity_scan(lambda n: 1.0 / n ** 2, lambda n: 1.0 / n) == 0.0


def test_nonconvergence_is_surfaced():
    alt = lambda n: (1.0 / n if int(round(math.log2(n))) % 2 == 0 else 1.0)
    tr = oc.pairing(OSC, OSC, alt, PHI, PHI, S_RAT1)
    assert tr.limit_estimate == "not converged"
    assert not tr.converged
    assert tr.ratio_class == "non-pure"


def test_sesquilinear_symmetry():
    g = Grid(1, 32.0, 4096)
    u = make_family("concentration", 1, 2.0,
                    profile=make_profile("gaussian", width=0.5),
                    omega=lambda n: 1.0 / n)
    v = make_family("concentration", 1, 2.0,
                    profile=make_profile("bump", width=0.5),
                    omega=lambda n: 1.0 / n)
    p1 = oc.bump_test(g, (0.0,), 6.0)
    p2 = oc.bump_test(g, (1.0,), 6.0)
    s = make_builtin("homogeneous", 1, psi_tilde=lambda e: e[..., 0] + 0.5j)
    ns = (1, 2, 4, 8, 16)
    a = oc.pairing(u, v, lambda n: 1.0 / n, p1, p2, s, ns, g)
    b = oc.pairing(v, u, lambda n: 1.0 / n, p2, p1, conjugate_symbol(s),
                   ns, g)
    assert np.max(np.abs(b.I - np.conj(a.I))) < 1e-10
    if a.converged and b.converged:
        assert abs(b.limit_estimate - np.conj(a.limit_estimate)) < 1e-8


def test_constant_symbol_is_plain_pairing():
    g = Grid(1, 32.0, 4096)
    u = make_family("concentration", 1, 2.0,
                    profile=make_profile("gaussian", width=0.5),
                    omega=lambda n: 1.0 / n)
    p1 = oc.bump_test(g, (0.0,), 6.0)
    s1 = make_builtin("homogeneous", 1, psi_tilde=1.0)
    ns = (1, 2, 4, 8)
    tr = oc.pairing(u, u, lambda n: 1.0 / n, p1, p1, s1, ns, g)
    plain = np.array([pair(multiply_pointwise(p1, term(u, n, g)),
                           multiply_pointwise(p1, term(u, n, g)))
                      for n in ns])
    assert np.max(np.abs(tr.I - plain)) < 1e-12


def test_pushforward_oscillation_blind_to_scale():
    mass = lp_norm(PHI, 2.0) ** 2
    tw, t1, gap = oc.pi_pushforward_check(OSC, OSC, lambda n: 1.0 / n,
                                          PHI, PHI, lambda e: e[..., 0])
    assert gap < 1e-12
    assert tw.converged
    assert abs(tw.limit_estimate - mass) < 1e-8
    tw2, _, gap2 = oc.pi_pushforward_check(OSC, OSC, lambda n: 1.0 / n ** 2,
                                           PHI, PHI, lambda e: e[..., 0])
    assert gap2 < 1e-12
    assert np.max(np.abs(tw2.I - tw.I)) < 1e-12


def test_pushforward_concentration_three_schedules():
    g = Grid(1, 32.0, 4096)
    u = make_family("concentration", 1, 2.0,
                    profile=make_profile("gaussian", width=0.5),
                    omega=lambda n: 1.0 / n)
    p1 = oc.bump_test(g, (0.0,), 6.0)
    ns = (1, 2, 4, 8, 16)
    runs = []
    for om in (lambda n: 1.0 / n ** 2, lambda n: 1.0 / n,
               lambda n: 1.0 / math.sqrt(n)):
        tw, _, gap = oc.pi_pushforward_check(u, u, om, p1, p1,
                                             lambda e: 2.0 + e[..., 0],
                                             ns, g)
        assert gap < 1e-8
        runs.append(tw.I)
    assert np.max(np.abs(runs[0] - runs[1])) < 1e-8
    assert np.max(np.abs(runs[1] - runs[2])) < 1e-8


def test_corrector_term_cases():
    g = Grid(1, 1.0, 256)
    x = g.x_axis()
    u = GridFunction(g, np.exp(-np.pi * (((x + 0.5) % 1.0 - 0.5) / 0.2) ** 2))
    one = GridFunction(g, np.ones(g.N))
    s_g = make_builtin("schwartz", 1)
    got = oc.corrector_term(u, u, one, one, s_g)
    assert abs(got - pair(u, u)) < 1e-12
    zero = GridFunction(g, np.zeros(g.N))
    assert oc.corrector_term(zero, u, one, one, s_g) == 0.0
    s_sign = make_builtin("homogeneous", 1, psi_tilde=lambda e: e[..., 0])
    assert abs(oc.corrector_term(u, u, one, one, s_sign)) < 1e-13
    bare = Symbol(d=1, family="anon",
                  base=lambda pts: np.ones(np.asarray(pts).shape[:-1],
                                           dtype=complex))
    with pytest.raises(ValueError):
        oc.corrector_term(u, u, one, one, bare)


def test_strong_compactness_strongly_null_sequence():
    base = oc.bump_test(G, (0.5,), 0.125)
    null = oc.CustomSequence(term_fn=lambda n, gr: (1.0 / n) * base)
    rec = oc.strong_compactness_probe(null, G, lambda n: 1.0 / n)
    assert rec["pairings_vanish"] and rec["norms_vanish"] and rec["agree"]
    assert rec["max_limit"] < 1e-5


def test_strong_compactness_oscillation_not_null():
    rec = oc.strong_compactness_probe(OSC, G, lambda n: 1.0 / n)
    assert not rec["pairings_vanish"] and not rec["norms_vanish"]
    assert rec["agree"]
    assert rec["max_limit"] > 0.01


def test_strong_compactness_concentration_value():
    g = Grid(1, 32.0, 4096)
    u = make_family("concentration", 1, 2.0,
                    profile=make_profile("gaussian", width=0.5),
                    omega=lambda n: 1.0 / n)
    rec = oc.strong_compactness_probe(u, g, lambda n: 1.0 / n,
                                      n_schedule=(1, 2, 4, 8, 16))
    assert not rec["pairings_vanish"] and not rec["norms_vanish"]
    assert rec["agree"]
    # identity symbol with the bump at the concentration point:
    # limit = ||u||_2^2 |phi(0)|^2 = (0.5/sqrt(2)) * 1
    want = 0.5 / math.sqrt(2.0)
    assert abs(rec["max_limit"] - want) < 1e-4 * want


def test_trace_csv_layout(tmp_path):
    tr = oc.pairing(OSC, OSC, lambda n: 1.0 / n, PHI, PHI, S_RAT1)
    path = tmp_path / "trace.csv"
    oc.save_trace_csv(tr, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["n", "omega_n", "epsilon_n", "Re I_n", "Im I_n",
                       "cauchy_gap", "adjoint_gap"]
    assert len(rows) == 1 + len(tr.n_schedule)
    assert rows[1][5] == ""  # no gap before the first index
    for j, row in enumerate(rows[1:]):
        assert int(row[0]) == tr.n_schedule[j]
        assert float(row[1]) == tr.omega[j]
        assert float(row[3]) == tr.I[j].real
        assert float(row[4]) == tr.I[j].imag
        if j > 0:
            assert float(row[5]) == tr.cauchy_gaps[j - 1]


def test_summary_json_serialization(tmp_path):
    s = make_builtin("schwartz", 1)
    tr = oc.pairing(OSC, OSC, lambda n: 1.0 / math.sqrt(n), PHI, PHI, s)
    tr.reference = 0.0 + 0.0j
    path = tmp_path / "summary.json"
    oc.save_summary_json(tr, path)
    data = json.load(open(path))
    assert set(data) == {"limit", "reference", "ratio_class", "converged",
                         "final_gap", "max_adjoint_gap"}
    assert data["ratio_class"] == "inf"
    assert data["converged"] is True
    assert data["reference"] == [0.0, 0.0]


def test_trace_length_validation():
    with pytest.raises(ValueError):
        oc.PairingTrace((1, 2, 4), np.zeros(2, complex), np.zeros(1), 0.0)
    with pytest.raises(ValueError):
        oc.PairingTrace((1, 2), np.zeros(2, complex), np.zeros(2), 0.0)


def test_bump_test_shape():
    b = oc.bump_test(G, (0.5,), 0.2)
    assert abs(b.values[G.N // 2] - 1.0) == 0.0
    x = G.x_axis()
    outside = np.abs((x - 0.5 + 0.5) % 1.0 - 0.5) >= 0.2
    assert np.all(b.values[outside] == 0.0)


@settings(max_examples=40, deadline=None)
@given(c_re=st.floats(-5, 5), c_im=st.floats(-5, 5),
       a=st.floats(-3, 3), r=st.floats(-0.8, 0.8))
def test_aitken_exact_on_geometric(c_re, c_im, a, r):
    c = complex(c_re, c_im)
    vals = [c + a * r ** j for j in range(7)]
    got = oc.aitken_limit(vals)
    assert abs(got - c) < 1e-8 * max(1.0, abs(c), abs(a))


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0.2, 5.0), b=st.floats(0.2, 5.0))
def test_purity_recovers_constant_ratio(a, b):
    got = oc.purity_scan(lambda n: a / n, lambda n: b / n)
    assert isinstance(got, float)
    assert abs(got - a / b) < 1e-12 * (a / b)
