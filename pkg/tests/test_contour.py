import numpy as np
import pytest
import scipy.linalg

from floquet_lap.cell import CellField
from floquet_lap.cell_solver import solve_cell
from floquet_lap.contour import (
    ContourSpec,
    QuadratureError,
    contour_integral,
    propagating_coefficient,
    propagating_residue,
    residue_at_pole,
    vanishing_radius,
    verify_vanishing_radii,
)
from floquet_lap.multipliers import MultiplierClass

from conftest import K2

Z_PLUS = np.exp(1j * (np.sqrt(3) * np.pi - 2 * np.pi))


def _w(ops, k2, f, z, n=1):
    """Cell field of w(z, .) z^(n-1)."""
    r = solve_cell(ops, z, k2, f)
    return CellField.from_quasiperiodic(r.v, np.log(z), complex(z) ** (n - 1))


def _unit(mset, z):
    return min(mset.unit, key=lambda m: abs(m.z - z))


def test_zero_source(ops_const):
    res = contour_integral(ops_const, K2, ops_const.basis.zeros(), ContourSpec(0.5, 0.1), 1)
    assert res[1].l2_norm() == 0


def test_pole_free_circle_vanishes(ops_pert, source, mset_pert):
    res = contour_integral(ops_pert, K2, source, ContourSpec(0.5 + 0.3j, 0.05), [1, 2], mset=mset_pert)
    assert res[1].l2_norm() <= 1e-10 and res[2].l2_norm() <= 1e-10


def test_deformation_invariance(ops_pert, source):
    a = contour_integral(ops_pert, K2, source, ContourSpec(0.0, 0.15), 1)[1]
    b = contour_integral(ops_pert, K2, source, ContourSpec(0.0, 0.3), 1)[1]
    assert (a - b).l2_norm() <= 1e-9


def test_residue_matches_limit(ops_const, source):
    z0 = np.exp(-np.pi)
    res = residue_at_pole(ops_const, K2, source, z0, delta=0.01, n=2)[2]

    def g(t):
        z = z0 * (1 + t)
        return _w(ops_const, K2, source, z, 2) * (z - z0)

    t = 1e-4
    limit = g(t / 2) * 2 - g(t)
    assert (res - limit).l2_norm() <= 1e-6 * res.l2_norm()


def test_residue_independent_of_radius(ops_const, source):
    z0 = np.exp(-np.pi)
    a = residue_at_pole(ops_const, K2, source, z0, delta=0.02)[1]
    b = residue_at_pole(ops_const, K2, source, z0, delta=0.01)[1]
    assert (a - b).l2_norm() <= 1e-9


def test_residues_fill_the_annulus(ops_const, source, mset_const):
    outer = contour_integral(ops_const, K2, source, ContourSpec(0.0, 0.3), 1)[1]
    inner = contour_integral(ops_const, K2, source, ContourSpec(0.0, 0.01), 1)[1]
    res = residue_at_pole(ops_const, K2, source, np.exp(-np.pi), mset=mset_const)[1]
    assert (outer - inner - res).l2_norm() <= 1e-8


def test_pole_cluster_refused(ops_const, source, mset_const):
    with pytest.raises(ValueError, match="pole cluster"):
        residue_at_pole(ops_const, K2, source, np.exp(-np.pi), delta=0.5, mset=mset_const)


def test_propagating_residue_matches_contour(ops_const, source, mset_const):
    m = _unit(mset_const, Z_PLUS)
    for n in (1, 3):
        quad = residue_at_pole(ops_const, K2, source, m.z, mset=mset_const, n=n)[n]
        closed = propagating_residue(m.mode, m.group_velocity, source, m.z, n)
        assert (quad - closed).l2_norm() <= 1e-8 * closed.l2_norm()


def test_propagating_coefficient_closed_form(ops_const, mset_const):
    m = _unit(mset_const, Z_PLUS)
    b = ops_const.basis
    assert np.allclose(m.mode.coeffs, b.unit(1, 0).coeffs, atol=1e-12)
    f = b.unit(1, 0)
    gamma = 2 * np.pi - np.sqrt(3) * np.pi
    pairing = (np.exp(1j * gamma) - 1) / (1j * gamma)  # int e^{2 pi i x} conj(e^{i sqrt3 pi x}) dx
    c = propagating_coefficient(m.mode, m.group_velocity, f, m.z)
    assert c / pairing == pytest.approx(-1j / (2 * np.sqrt(3) * np.pi), rel=1e-10)


def test_propagating_residue_has_unit_cell_ratio(ops_const, source, mset_const):
    m = _unit(mset_const, Z_PLUS)
    norms = [propagating_residue(m.mode, m.group_velocity, source, m.z, n).h1_norm() for n in (1, 2, 5)]
    assert np.allclose(norms, norms[0], rtol=1e-12)


def test_orthogonal_source_has_no_propagating_residue(ops_const, mset_const):
    m = _unit(mset_const, Z_PLUS)
    f = ops_const.basis.unit(0, 3)
    assert propagating_residue(m.mode, m.group_velocity, f, m.z, 1).l2_norm() <= 1e-15


def test_flat_crossing_refused(ops_const, source, mset_const):
    m = _unit(mset_const, Z_PLUS)
    with pytest.raises(ValueError, match="LAP invalid"):
        propagating_residue(m.mode, 0.0, source, m.z, 1)


def test_absorbing_residue_converges(ops_const, source, mset_const):
    m = _unit(mset_const, Z_PLUS)
    closed = propagating_residue(m.mode, m.group_velocity, source, m.z, 1)
    N = ops_const.N
    errs = []
    for eps in (2e-3, 1e-3):
        k2 = K2 + 1j * eps
        C = np.zeros((2 * N, 2 * N), dtype=complex)
        C[:N, N:] = np.eye(N)
        C[N:, :N] = -(np.diag(ops_const.L_diag) + k2 * ops_const.Qm)
        C[N:, N:] = -np.diag(2 * ops_const.D_diag)
        lams = scipy.linalg.eigvals(C)
        lam = lams[np.argmin(np.abs(lams - np.log(m.z)))]
        z_eps = np.exp(lam)
        assert abs(z_eps) < 1  # the forward wave moves inside the unit circle
        quad = residue_at_pole(ops_const, k2, source, z_eps, delta=0.01)[1]
        errs.append((quad - closed).l2_norm() / closed.l2_norm())
    assert errs[1] < 1e-2
    assert 1.8 < errs[0] / errs[1] < 2.2


def test_vanishing_radius_value():
    assert vanishing_radius(1) == pytest.approx(np.exp(-np.pi * np.sqrt(2.5)), rel=1e-14)
    assert vanishing_radius(1) == pytest.approx(6.9620e-3, rel=1e-4)


def test_vanishing_radii_rows(ops_const, source):
    rows = verify_vanishing_radii(ops_const, 1.0, source, ell_max=3, n=2)
    norms = [r.norm for r in rows]
    assert norms[0] > norms[1] > norms[2]
    for r in rows:
        assert r.norm <= r.envelope and r.norm <= r.measured_envelope


def test_vanishing_radii_zero_source(ops_const):
    rows = verify_vanishing_radii(ops_const, 1.0, ops_const.basis.zeros(), ell_max=2)
    assert all(r.norm == 0 for r in rows)


def test_vanishing_radii_limits(ops_const, source):
    with pytest.raises(ValueError):
        verify_vanishing_radii(ops_const, 1.0, source, ell_max=4)
    with pytest.raises(ValueError):
        verify_vanishing_radii(ops_const, 1.0, source, n=0)


def test_quadrature_doubling(ops_pert, source):
    res = contour_integral(ops_pert, K2, source, ContourSpec(0.0, np.exp(-1.0)), 1)
    assert res.history and res.history[-1][1] <= 1e-10
    assert res.Q > 64
    with pytest.raises(QuadratureError):
        contour_integral(ops_pert, K2, source, ContourSpec(0.0, np.exp(-1.0)), 1, tol_quad=1e-16, Q_max=128)


def test_contour_spec_validation(mset_const):
    with pytest.raises(ValueError):
        ContourSpec(0.0, -1.0)
    with pytest.raises(ValueError):
        ContourSpec(0.0, 1.0, Q=8)
    with pytest.raises(ValueError):
        ContourSpec(0.0, 1.0).check_clear(mset_const)
    assert {m.cls for m in ContourSpec(0.0, 0.5).enclosed(mset_const)} == {MultiplierClass.EVANESCENT}
