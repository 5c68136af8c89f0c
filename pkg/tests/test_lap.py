import numpy as np
import pytest

from floquet_lap.cell import CellField, random_source
from floquet_lap.lap import (
    AssumptionViolation,
    absorbing_fields,
    edge_traces,
    lap_solution,
    lap_via_absorption,
    load_lap_solution,
    wronskian_identity,
)
from floquet_lap.multipliers import MultiplierClass, floquet_multipliers
from floquet_lap.oracles import green_cell_field

from conftest import K2

CELLS = [-3, -1, 1, 2, 3, 4, 5]


@pytest.fixture(scope="module")
def sol_const(ops_const, source, mset_const):
    return lap_solution(ops_const, K2, source, CELLS, mset=mset_const)


@pytest.fixture(scope="module")
def sol_pert(ops_pert, source, mset_pert):
    return lap_solution(ops_pert, K2, source, [-2, -1, 1, 2, 3], mset=mset_pert)


def _bilinear_w(u: CellField, v: CellField) -> complex:
    du, nu = u.edge("left")
    dv, nv = v.edge("left")
    return complex(np.sum(nv * du - dv * nu))


def test_zero_source(ops_const, mset_const):
    sol = lap_solution(ops_const, K2, ops_const.basis.zeros(), [-2, 0, 3], mset=mset_const)
    assert all(c.l2_norm() == 0 for c in sol.cells.values())


def test_agrees_with_exact_green_function(sol_const, source):
    for n in CELLS:
        exact = green_cell_field(source, K2, n)
        assert (sol_const[n] - exact).h1_norm() <= 1e-6 * exact.h1_norm()


def test_flat_crossing_refused(ops_const, source):
    k2 = 4 * np.pi**2
    ms = floquet_multipliers(ops_const, k2)
    with pytest.raises(AssumptionViolation, match="LAP fails"):
        lap_solution(ops_const, k2, source, [1], mset=ms)


def test_decomposition_reconstructs(sol_pert):
    for n, dec in sol_pert.decomposition.items():
        assert (dec.reconstruct() - sol_pert[n]).l2_norm() <= 1e-12 * sol_pert[n].l2_norm()
        assert dec.contour_remainder.l2_norm() <= dec.truncation_bound


def test_evanescent_tail_decays_at_leading_rate(sol_const):
    tails = []
    for n in (3, 4, 5):
        dec = sol_const.decomposition[n]
        prop = sum((t.field for t in dec.propagating[1:]), dec.propagating[0].field)
        tails.append((sol_const[n] - prop).h1_norm())
    for a, b in zip(tails, tails[1:]):
        assert b / a == pytest.approx(np.exp(-np.pi), rel=1e-2)


@pytest.mark.parametrize("side", [1, -1])
def test_no_incoming_waves(sol_pert, mset_pert, side):
    n = 3 if side > 0 else -2
    u = sol_pert[n]
    out_cls = MultiplierClass.UNIT_RIGHT if side > 0 else MultiplierClass.UNIT_LEFT
    for m in mset_pert.unit:
        if m.cls != out_cls:
            continue
        partner = min(mset_pert.unit, key=lambda p: abs(p.z - 1 / m.z))
        psi_out = CellField.from_quasiperiodic(m.mode, m.lam, m.z**n)
        psi_in = CellField.from_quasiperiodic(partner.mode, partner.lam, partner.z**n)
        incoming = abs(_bilinear_w(u, psi_out) / _bilinear_w(psi_in, psi_out))
        outgoing = abs(_bilinear_w(u, psi_in) / _bilinear_w(psi_out, psi_in))
        assert outgoing > 1e-3
        assert incoming <= 1e-6 * outgoing


def test_absorption_path(ops_pert, source, mset_pert, sol_pert):
    ab = lap_via_absorption(ops_pert, K2, source, (0.1, 0.05, 0.025, 0.0125), [1, 2], mset=mset_pert)
    assert all(0.8 <= o <= 1.2 for o in ab.orders)
    assert all(a > b for a, b in zip(ab.differences, ab.differences[1:]))
    for n in (1, 2):
        assert (ab[n] - sol_pert[n]).h1_norm() <= 1e-6 * sol_pert[n].h1_norm()


def test_absorbing_field_against_exact_green_function(ops_const, source, mset_const):
    eps = 0.1
    pts = [float(np.angle(m.z)) for m in mset_const.unit]
    got = absorbing_fields(ops_const, K2, eps, source, [0, 2], points=pts)
    for n in (0, 2):
        exact = green_cell_field(source, K2 + 1j * eps, n)
        assert (got[n] - exact).h1_norm() <= 1e-7 * exact.h1_norm()
    with pytest.raises(ValueError):
        absorbing_fields(ops_const, K2, 0.0, source, [1])


def test_source_cell(ops_const, source, mset_const):
    sol = lap_solution(ops_const, K2, source, [0], mset=mset_const)
    exact = green_cell_field(source, K2, 0)
    assert (sol[0] - exact).h1_norm() <= 1e-6 * exact.h1_norm()


def test_wronskian_vanishes(ops_pert, mset_pert):
    rng = np.random.default_rng(11)
    f = random_source(ops_pert.basis, rng)
    g = random_source(ops_pert.basis, rng)
    uf = lap_solution(ops_pert, K2, f, [-1, 1, 2], mset=mset_pert, decompose=False)
    ug = lap_solution(ops_pert, K2, g, [-1, 1, 2], mset=mset_pert, decompose=False)
    scale = uf[1].h1_norm() * ug[1].h1_norm()
    w1 = wronskian_identity(uf, ug, 1)
    w2 = wronskian_identity(uf, ug, 2)
    assert abs(w1) <= 1e-8 * scale
    assert abs(w1 - w2) <= 1e-8 * scale
    assert abs(wronskian_identity(uf, ug, "Γ₀")) <= 1e-8 * scale
    d, _ = edge_traces(uf, 0)
    assert np.allclose(d, uf[-1].edge("right")[0])


def test_wronskian_of_zero_solutions(ops_const, mset_const):
    z = lap_solution(ops_const, K2, ops_const.basis.zeros(), [-1, 1], mset=mset_const)
    assert wronskian_identity(z, z, 1) == 0


def test_export_round_trip(sol_pert, tmp_path):
    sol_pert.export(tmp_path)
    again = load_lap_solution(tmp_path)
    assert sorted(again.cells) == sorted(sol_pert.cells)
    for n in sol_pert.cells:
        assert np.array_equal(again[n].values, sol_pert[n].values)
    assert again.k2 == sol_pert.k2
    assert (tmp_path / "decomposition.csv").exists()
