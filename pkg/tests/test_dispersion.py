
import numpy as np
import pytest

from floquet_lap.cell import assemble_operators, build_basis
from floquet_lap.dispersion import (
    NearDegenerateWarning,
    alpha_eigenpairs,
    branch_eigenpairs,
    classify_crossings,
    closed_form_mu,
    crossing_set_from_json,
    dispersion_diagram,
    group_velocity,
)

from conftest import K2, perturbed_medium

ALPHAS = np.linspace(-np.pi, np.pi, 65)[1:]


def _oracle_levels(alpha, count, P=6, Mm=6):
    vals = sorted(closed_form_mu(alpha, p, m) for p in range(-P, P + 1) for m in range(Mm + 1))
    return np.array(vals[:count])


@pytest.fixture(scope="module")
def curves_const(ops_const):
    return dispersion_diagram(ops_const, ALPHAS, 20)


@pytest.fixture(scope="module")
def curves_pert(ops_pert):
    return dispersion_diagram(ops_pert, ALPHAS, 8)


def test_levels_at_zero_momentum(ops_const):
    mus = [mu for mu, _ in alpha_eigenpairs(ops_const, 0.0, 4)]
    assert np.allclose(mus, [0, np.pi**2, 4 * np.pi**2, 4 * np.pi**2], atol=1e-10)


def test_lowest_level_at_zone_edge(ops_const):
    assert alpha_eigenpairs(ops_const, np.pi, 1)[0][0] == pytest.approx(np.pi**2, rel=1e-12)


def test_constant_function_is_always_in_the_kernel(ops_pert):
    mu, psi = alpha_eigenpairs(ops_pert, 0.0, 1)[0]
    assert abs(mu) < 1e-10
    c = psi.coeffs / psi.coeffs[ops_pert.basis.index(0, 0)]
    assert np.linalg.norm(c - ops_pert.basis.unit(0, 0).coeffs) < 1e-10


def test_eigenvectors_q_orthonormal(ops_pert):
    pairs = alpha_eigenpairs(ops_pert, 0.37, 6)
    V = np.array([p.coeffs for _, p in pairs]).T
    assert np.max(np.abs(V.conj().T @ ops_pert.Qm @ V - np.eye(6))) < 1e-12
    assert all(mu >= -1e-12 for mu, _ in pairs)


def test_diagram_matches_closed_form(curves_const):
    # tracked curves need not stay the lowest ones, so compare with a wide oracle set
    for c in curves_const:
        assert c.mus[0] == pytest.approx(_oracle_levels(ALPHAS[0], 20)[c.mode_index], rel=1e-12)
        for a, mu in zip(ALPHAS, c.mus):
            assert np.min(np.abs(_oracle_levels(a, 200) - mu)) <= 1e-12 * max(1.0, mu)


def test_curves_follow_one_plane_wave(curves_const, ops_const):
    # for q = 1 each analytic branch is a single basis function
    b = ops_const.basis
    for c in curves_const:
        pairs = {b.pair(int(np.argmax(np.abs(v)))) for v in c.vectors}
        assert len(pairs) == 1


def test_tracking_unflagged_and_continuous(curves_pert, ops_pert):
    for c in curves_pert:
        assert not c.flagged.any()
        V = c.vectors
        ov = np.abs(np.einsum("an,nm,am->a", V[:-1].conj(), ops_pert.Qm, V[1:]))
        assert ov.min() >= 0.9


def test_zone_edges_agree(ops_pert):
    left = [mu for mu, _ in alpha_eigenpairs(ops_pert, -np.pi, 6)]
    right = [mu for mu, _ in alpha_eigenpairs(ops_pert, np.pi, 6)]
    assert np.allclose(left, right, rtol=1e-12)


def test_gap_opens_and_is_resolved():
    gaps = []
    for J in (6, 10):
        ops = assemble_operators(build_basis(J, 4), perturbed_medium())
        mus = [mu for mu, _ in alpha_eigenpairs(ops, np.pi, 2)]
        gaps.append(mus[1] - mus[0])
    assert gaps[0] > 1.0
    assert abs(gaps[0] - gaps[1]) < 1e-8


def test_group_velocity_closed_form(ops_const):
    alpha = np.sqrt(3) * np.pi - 2 * np.pi
    pairs = alpha_eigenpairs(ops_const, alpha, 6)
    mu, psi = min(pairs, key=lambda p: abs(p[0] - K2))
    assert mu == pytest.approx(K2, rel=1e-12)
    assert group_velocity(ops_const, alpha, mu, psi) == pytest.approx(2 * np.sqrt(3) * np.pi, rel=1e-10)


def test_transverse_mode_is_flat_at_zero(ops_const):
    pairs = alpha_eigenpairs(ops_const, 0.0, 2)
    mu, psi = pairs[1]
    assert mu == pytest.approx(np.pi**2)
    assert abs(group_velocity(ops_const, 0.0, mu, psi)) < 1e-12


def test_slope_matches_finite_difference(ops_pert):
    h = 1e-4
    for a in (0.4, -1.3, 2.2):
        bd = branch_eigenpairs(ops_pert, a, 6)
        lo = np.array([mu for mu, _ in alpha_eigenpairs(ops_pert, a - h, 6)])
        hi = np.array([mu for mu, _ in alpha_eigenpairs(ops_pert, a + h, 6)])
        assert np.max(np.abs(bd.dmus - (hi - lo) / (2 * h))) < 1e-6


def test_degenerate_slope_warns(ops_const):
    pairs = alpha_eigenpairs(ops_const, 0.0, 4)
    mu, psi = pairs[2]
    with pytest.warns(NearDegenerateWarning):
        group_velocity(ops_const, 0.0, mu, psi)


def test_cluster_slopes_resolved(ops_const):
    bd = branch_eigenpairs(ops_const, 0.0, 4)
    # at alpha = 0 the 4 pi^2 cluster holds the (0, 2) mode (slope 0) and p = +-1 (slopes +-4 pi)
    s = np.sort(bd.dmus[2:5])
    assert np.allclose(s, [-4 * np.pi, 0.0, 4 * np.pi], atol=1e-9)


def test_crossings_constant_medium(curves_const):
    cs = classify_crossings(curves_const, K2)
    # (alpha + 2 pi p)^2 + pi^2 m^2 = 3 pi^2 for m = 0, 1
    plus = sorted([np.sqrt(3) * np.pi - 2 * np.pi, np.sqrt(2) * np.pi - 2 * np.pi])
    assert cs.assumption1_ok and not cs.p_zero
    assert np.allclose(sorted(c.alpha for c in cs.p_plus), plus, atol=1e-10)
    assert np.allclose(sorted(-c.alpha for c in cs.p_minus), plus, atol=1e-10)
    for c in cs.p_plus + cs.p_minus:
        assert abs(c.mu - K2) <= 1e-10 * K2
    slopes = sorted(abs(c.dmu) for c in cs.p_plus)
    assert np.allclose(slopes, [2 * np.sqrt(2) * np.pi, 2 * np.sqrt(3) * np.pi], rtol=1e-8)


def test_crossings_perturbed_agree_with_direct_solves(curves_pert, ops_pert):
    cs = classify_crossings(curves_pert, K2)
    assert cs.assumption1_ok
    assert len(cs.p_plus) == len(cs.p_minus) > 0
    for c in cs.p_plus + cs.p_minus:
        mus = [mu for mu, _ in alpha_eigenpairs(ops_pert, c.alpha, 8)]
        assert min(abs(mu - K2) for mu in mus) <= 1e-10 * K2


def test_below_spectrum_is_empty(curves_const):
    cs = classify_crossings(curves_const, -1.0)
    assert not (cs.p_plus or cs.p_minus or cs.p_zero)


def test_flat_crossing_detected(curves_const):
    cs = classify_crossings(curves_const, 4 * np.pi**2)
    assert not cs.assumption1_ok
    assert any(abs(c.alpha) < 1e-6 for c in cs.p_zero)


def test_crossing_json_round_trip(curves_const):
    cs = classify_crossings(curves_const, K2)
    again = crossing_set_from_json(cs.to_json())
    assert [c.alpha for c in again.p_plus] == [c.alpha for c in cs.p_plus]
    assert again.k2 == cs.k2


def test_grid_validation(ops_const):
    with pytest.raises(ValueError):
        dispersion_diagram(ops_const, np.linspace(0, 1, 8), 2)
    with pytest.raises(ValueError):
        dispersion_diagram(ops_const, np.linspace(-4.0, 0.0, 32), 2)
