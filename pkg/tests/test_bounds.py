"""Q-windows, sampled system norms, and slope fitting."""

import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from trunclog import bounds as bd
from trunclog import flows as fl
from trunclog import tensor_algebra as ta
from trunclog.free_lie import build_hall_basis

CUBE = np.vstack([
    np.random.default_rng(0).uniform(-1, 1, size=(64, 3)),
    [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
])


# ---------------------------------------------------------------------------
# Q-functions
# ---------------------------------------------------------------------------

def test_q_eval_closed_window():
    q = bd.QSpec(1, 3)
    assert bd.q_eval(q, 0.5) == 0.5
    assert bd.q_eval(q, 2.0) == 8.0
    assert bd.q_eval(q, 1.0) == 1.0
    assert bd.q_eval(q, 0.0) == 0.0


def test_q_eval_half_open_window():
    # on (kappa, kappa+1] only the top exponent survives for lam <= 1
    for kappa in (1, 2, 3):
        q = bd.QSpec(kappa, kappa + 1, closed_left=False)
        for lam in (0.0, 0.3, 0.5, 1.0):
            assert bd.q_eval(q, lam) == lam ** (kappa + 1)
    assert bd.QSpec(2, 5, closed_left=False).label() == "Q_(2,5]"


def test_q_spec_validation():
    with pytest.raises(ValueError):
        bd.QSpec(0, 3)
    with pytest.raises(ValueError):
        bd.QSpec(3, 3)
    with pytest.raises(ValueError):
        bd.q_eval(bd.QSpec(1, 2), -0.1)


@given(st.floats(0.0, 10.0), st.floats(0.0, 10.0))
def test_q_monotone(a, b):
    q = bd.QSpec(2, 5)
    lo, hi = min(a, b), max(a, b)
    assert bd.q_eval(q, lo) <= bd.q_eval(q, hi)


@given(
    st.floats(0.0, 10.0),
    st.floats(0.0, 10.0),
    st.integers(1, 4),
    st.integers(1, 4),
)
def test_q_half_open_subadditive_up_to_2n(lam, mu, m, extra):
    # Q_(m,n](lam+mu) <= 2^n (Q_(m,n](lam) + Q_(m,n](mu)), the explicit
    # constant behind the asymptotic statement
    q = bd.QSpec(m, m + extra, closed_left=False)
    lhs = bd.q_eval(q, lam + mu)
    rhs = 2.0 ** q.n * (bd.q_eval(q, lam) + bd.q_eval(q, mu))
    assert lhs <= rhs * (1 + 1e-12)


# ---------------------------------------------------------------------------
# norm estimation
# ---------------------------------------------------------------------------

def test_heisenberg_cube_estimates_respect_analytic_sups():
    # over the unit cube: sup_A sup_x |V_A(x)| = sqrt((2+sqrt(2))/2) at a
    # corner with a1=a2, and sup |DV_A| = 1/2 (constant Jacobian); sampled
    # maxima are lower estimates and should come close from below
    heis = fl.built_in_system("heisenberg", kappa=2)
    est = bd.estimate_dyn_norms(heis, CUBE, lie_samples=200, seed=1)
    v_sup = np.sqrt((2 + np.sqrt(2)) / 2)
    assert est["V"].value <= v_sup + 1e-12
    assert est["V"].value >= 0.95 * v_sup
    assert est["DV"].value <= 0.5 + 1e-12
    assert est["DV"].value >= 0.45
    assert est["D2V"].value == 0.0          # affine fields
    assert est["V"].n_points == len(CUBE)


def test_heisenberg_commutator_constants_vanish():
    # truncation at kappa=2 is exact for a step-2 system: every sampled
    # bracket with m+n > 2 is the zero field
    heis = fl.built_in_system("heisenberg", kappa=2)
    est = bd.estimate_dyn_norms(heis, CUBE, lie_samples=50, seed=2)
    assert est["C0"].value == 0.0
    assert est["C1"].value == 0.0


def test_abelian_commutator_constants_vanish():
    basis = build_hall_basis(ta.AlgebraParams(2, 2))
    sys = fl.DynamicalSystem(
        fl.FlatManifold(3),
        [fl.PolyVectorField.linear(np.diag([1.0, 2.0, 3.0])),
         fl.PolyVectorField.linear(np.diag([-1.0, 0.5, 2.0]))],
        basis, name="abelian",
    )
    est = bd.estimate_dyn_norms(sys, CUBE, lie_samples=50, seed=3)
    assert est["C0"].value <= 1e-12
    assert est["C1"].value <= 1e-12


def test_graded_commutator_bounds_hold():
    # C0 <= k(k+1)|V||DV| and C1 <= k(k+1)(|D2V||V| + |DV|^2) with shared
    # sample pools; polyquad has genuinely nonzero brackets and Hessians
    sys = fl.built_in_system("polyquad", kappa=2, seed=3)
    pts = np.random.default_rng(4).uniform(-1, 1, size=(32, 2))
    est = bd.estimate_dyn_norms(sys, pts, lie_samples=60, seed=5)
    k = 2
    assert est["C0"].value > 0
    assert est["C1"].value > 0
    assert est["C0"].value <= k * (k + 1) * est["V"].value * est["DV"].value
    assert est["C1"].value <= k * (k + 1) * (
        est["D2V"].value * est["V"].value + est["DV"].value ** 2)
    # ordered-pair split: mirrored windows share the estimate,
    # and the total is the ordered sum
    assert est["C0[1,2]"].value == est["C0[2,1]"].value
    total = 2 * est["C0[1,2]"].value + est["C0[2,2]"].value
    assert est["C0"].value == pytest.approx(total, rel=1e-15)


def test_estimates_deterministic_and_monotone():
    heis = fl.built_in_system("heisenberg", kappa=2)
    a = bd.estimate_dyn_norms(heis, CUBE, lie_samples=50, seed=3)
    b = bd.estimate_dyn_norms(heis, CUBE, lie_samples=50, seed=3)
    assert all(a[k].value == b[k].value for k in a)
    # supersets of points or draws never decrease any estimate
    sub_pts = bd.estimate_dyn_norms(heis, CUBE[:10], lie_samples=50, seed=3)
    more_lie = bd.estimate_dyn_norms(heis, CUBE, lie_samples=100, seed=3)
    assert all(sub_pts[k].value <= a[k].value for k in a)
    assert all(a[k].value <= more_lie[k].value for k in a)


def test_estimate_input_validation():
    heis = fl.built_in_system("heisenberg", kappa=2)
    with pytest.raises(ValueError):
        bd.estimate_dyn_norms(heis, np.zeros((0, 3)))
    with pytest.raises(ValueError):
        bd.estimate_dyn_norms(heis, CUBE, lie_samples=0)
    with pytest.raises(ValueError):
        bd.estimate_dyn_norms(heis, np.zeros((4, 2)))


def test_norm_estimate_json():
    e = bd.NormEstimate("V", 1.5, 16, 200, "cube")
    assert json.loads(json.dumps(e.to_json_dict()))["value"] == 1.5


# ---------------------------------------------------------------------------
# slope fitting and reports
# ---------------------------------------------------------------------------

LAMS = 0.5 * 2.0 ** -np.arange(8)


def test_fit_slope_exact_power_law():
    slope, resid = bd.fit_slope(LAMS, 3.7 * LAMS ** 3)
    assert slope == pytest.approx(3.0, abs=1e-10)
    assert resid <= 1e-12


def test_fit_slope_perturbed_power_law():
    lam = np.geomspace(1e-1, 1e-3, 9)
    slope, _ = bd.fit_slope(lam, 2.0 * lam ** 3 * (1 + 0.1 * lam))
    assert 2.99 <= slope <= 3.02


def test_fit_slope_constant_distances():
    slope, _ = bd.fit_slope(LAMS, np.full(8, 0.3))
    assert abs(slope) < 1e-12


def test_fit_slope_errors():
    with pytest.raises(ValueError):
        bd.fit_slope([0.5, 0.25], [1.0, 0.5])
    with pytest.raises(ValueError):
        bd.fit_slope(LAMS, np.zeros(8))           # all nonpositive
    with pytest.raises(ValueError):
        bd.fit_slope([0.5, 0.25, 0.1], [1.0, 0.5, -0.1])
    with pytest.raises(ValueError):
        bd.fit_slope([0.5, -0.25, 0.1], [1.0, 0.5, 0.1])


def test_build_report_noise_floor_and_notes():
    dist = 2.0 * LAMS ** 3
    dist[-2:] = 1e-12                              # at solver noise
    dist[3] = 0.0
    rep = bd.build_report(LAMS, dist, noise_floor=1e-10, metadata={"name": "demo"})
    assert rep.used == (True, True, True, False, True, True, False, False)
    assert "zero distance" in rep.notes[3]
    assert "noise floor" in rep.notes[-1]
    assert rep.slope == pytest.approx(3.0, abs=1e-12)
    assert rep.metadata["name"] == "demo"


def test_build_report_without_enough_points_has_no_slope():
    rep = bd.build_report(LAMS, np.full(8, 1e-13), noise_floor=1e-10)
    assert rep.slope is None and rep.residual is None
    assert not any(rep.used)


def test_report_grid_validation():
    with pytest.raises(ValueError):
        bd.build_report([0.5, 0.5, 0.25], [1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        bd.build_report([0.25, 0.5], [1.0, 1.0])
    with pytest.raises(ValueError):
        bd.build_report([0.5, 0.25], [1.0, 1.0], extras={"q": (1.0,)})


def test_report_running_slopes_and_csv():
    rep = bd.build_report(LAMS[:4], 2.0 * LAMS[:4] ** 2, extras={"qshape": LAMS[:4] ** 2})
    rs = rep.running_slopes()
    assert rs[0] is None
    assert rs[1] == pytest.approx(2.0, abs=1e-12)
    csv_text = rep.to_csv()
    lines = csv_text.strip().split("\n")
    assert lines[0] == "lambda,distance,running_slope,qshape"
    assert lines[1].startswith("0.5,0.5,")
    assert csv_text == rep.to_csv()                # deterministic
    body = json.dumps(rep.to_json_dict())
    assert json.loads(body)["slope"] == pytest.approx(2.0)
