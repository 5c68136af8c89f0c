import numpy as np
import pytest

from floquet_lap.lap import lap_solution
from floquet_lap.multipliers import MultiplierSet
from floquet_lap.oracles import plane_wave_multipliers
from floquet_lap.translation import (
    TraceVector,
    annihilation_error,
    build_translation_operator,
    decay_check,
    decompose_trace,
    eigen_action_error,
    h_half_norm,
    operator_spectrum,
    power_identity_error,
    trace,
)

from conftest import K2


@pytest.fixture(scope="module")
def R_const(mset_const, ops_const):
    return build_translation_operator(mset_const, ops_const, K2)


@pytest.fixture(scope="module")
def R_pert(mset_pert, ops_pert):
    return build_translation_operator(mset_pert, ops_pert, K2)


class TestTraces:
    def test_constant_function(self, ops_const):
        t = trace(ops_const.basis.unit(0, 0), "left")
        e0 = np.zeros(ops_const.basis.M + 1)
        e0[0] = 1
        assert np.allclose(t.dirichlet, e0) and np.allclose(t.neumann, 0)

    def test_periodic_function(self, ops_const):
        u = ops_const.basis.unit(1, 2)
        assert np.allclose(trace(u, "left").dirichlet, trace(u, "right").dirichlet)

    def test_bloch_mode(self, mset_pert):
        for m in mset_pert.s_plus[:4]:
            left = trace(m.mode, "left", m.z)
            right = trace(m.mode, "right", m.z)
            assert np.allclose(right.dirichlet, m.z * left.dirichlet, atol=1e-8 * h_half_norm(left.dirichlet))

    def test_h_half_norm(self):
        c = np.zeros(4)
        c[2] = 1.0
        assert TraceVector(c, c).norm() == pytest.approx((1 + 4 * np.pi**2) ** 0.25)

    def test_bad_edge(self, ops_const):
        with pytest.raises(ValueError):
            trace(ops_const.basis.unit(0, 0), "top")


def test_eigenvalues_match_plane_waves(R_const):
    spec = operator_spectrum(R_const)
    oracle = plane_wave_multipliers(K2, 6)
    want = oracle["unit_right"] + oracle["evanescent"]
    got = np.array([e.eigenvalue for e in spec])
    for w in want:
        assert np.min(np.abs(got - w)) <= 1e-6 * max(abs(w), 1e-300) + 1e-12


@pytest.mark.parametrize("which", ["const", "pert"])
def test_mode_relations(which, R_const, R_pert, mset_const, mset_pert):
    R, ms = (R_const, mset_const) if which == "const" else (R_pert, mset_pert)
    for z, t in R.modes:
        assert eigen_action_error(R, z, t) <= 1e-7
        assert power_identity_error(R, z, t, 3) <= 1e-7
        assert annihilation_error(R, z, t) <= 1e-7


def test_spectrum_properties(R_pert, mset_pert):
    spec = operator_spectrum(R_pert)
    assert R_pert.spectral_radius <= 1 + 1e-6
    assert sum(abs(abs(e.eigenvalue) - 1) <= 1e-6 for e in spec) == len(mset_pert.unit) // 2
    for e in spec:
        assert e.residual <= 1e-10
        for m in mset_pert.s_minus:
            assert abs(e.eigenvalue - m.z) > 1e-3


def test_methods_agree(R_pert, mset_pert, ops_pert):
    assert R_pert.cross_validation <= 1e-5
    lp = build_translation_operator(mset_pert, ops_pert, K2, "lap_pairs")
    assert lp.cross_validation <= 1e-5


def test_insufficient_modes(mset_const, ops_const):
    few = MultiplierSet(K2, mset_const.s_plus[:3], mset_const.tau, mset_const.lambda_cap)
    with pytest.raises(ValueError, match="insufficient independent modes"):
        build_translation_operator(few, ops_const, K2, validate=False)


def test_unknown_method(mset_const, ops_const):
    with pytest.raises(ValueError):
        build_translation_operator(mset_const, ops_const, K2, "magic", validate=False)


def test_decompose_eigenvector(R_pert):
    spec = operator_spectrum(R_pert)
    k = 2
    coef, resid = decompose_trace(spec[k].vector, R_pert, len(spec))
    want = np.zeros(len(spec))
    want[k] = 1
    assert np.allclose(coef, want, atol=1e-10)
    assert resid <= 1e-9
    coef0, resid0 = decompose_trace(np.zeros(R_pert.matrix.shape[0]), R_pert, 3)
    assert np.all(coef0 == 0) and resid0 == 0


def test_decompose_lap_trace(R_pert, ops_pert, mset_pert, source):
    sol = lap_solution(ops_pert, K2, source, [1], mset=mset_pert, decompose=False)
    t = sol[1].edge("left")[0]
    resid = [decompose_trace(t, R_pert, J)[1] for J in range(1, R_pert.matrix.shape[0] + 1)]
    tnorm = h_half_norm(t)
    assert all(b <= a + 1e-14 * tnorm for a, b in zip(resid, resid[1:]))
    assert resid[-1] <= 1e-4 * tnorm
    with pytest.raises(ValueError):
        decompose_trace(t, R_pert, R_pert.matrix.shape[0] + 1)


def test_decay_rows(ops_pert, mset_pert, source):
    sol = lap_solution(ops_pert, K2, source, [1, 2, 3, 4], mset=mset_pert)
    rows = decay_check(sol, mset_pert)
    assert rows and all(r.ok for r in rows)
    fitted = [r for r in rows if r.ratio is not None and r.cls == "evanescent"]
    assert fitted
    for r in fitted:
        assert r.ratio == pytest.approx(abs(r.z), rel=1e-6)
