"""Acceptance criteria as runnable checks.

Each ``criterion_<k>`` function computes its evidence from scratch (sharing
cached operator and multiplier setups) and returns a
:class:`CriterionResult`.  The pytest acceptance suite and the ``verify-all``
CLI command both call :func:`run_all`.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .cell import CellField, MediumSpec, assemble_operators, bump_source, build_basis, random_source
from .contour import ContourSpec, contour_integral, residue_at_pole, verify_vanishing_radii
from .dispersion import closed_form_mu, dispersion_diagram
from .lap import lap_solution, lap_via_absorption, wronskian_identity
from .multipliers import MultiplierClass, floquet_multipliers, reciprocity_check
from .oracles import green_cell_field, plane_wave_multipliers
from .translation import (
    annihilation_error,
    build_translation_operator,
    decay_check,
    eigen_action_error,
    operator_spectrum,
    power_identity_error,
    trace,
)

K2 = 3 * np.pi**2
J_STD, M_STD = 8, 6
EPS_LIST = (0.1, 0.05, 0.025, 0.0125)
PERTURBED = {"kind": "fourier_cosine", "coeffs": [[0, 0, 1.0, 0.0], [1, 0, 0.25, 0.0], [-1, 0, 0.25, 0.0]]}


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number:2d} ({self.name}): {self.summary}"


@lru_cache(maxsize=None)
def _ops(J: int, M: int, medium: str):
    q = MediumSpec.constant(1.0) if medium == "constant" else MediumSpec.from_json(PERTURBED)
    return assemble_operators(build_basis(J, M), q)


@lru_cache(maxsize=None)
def _mset(J: int, M: int, medium: str, k2: float):
    return floquet_multipliers(_ops(J, M, medium), k2)


def _unit(f):
    return f * (1.0 / f.norm())


def broad_source(basis):
    """Unit-norm bump with every transverse mode present."""
    return _unit(bump_source(basis, [1.0 / (1 + m) for m in range(basis.M + 1)], 4))


def transverse_source(basis):
    """Unit-norm bump with a few low transverse modes."""
    return _unit(bump_source(basis, {0: 1.0, 1: 0.5, 2: 0.3j, 3: 0.2}, 4))


# ---------------------------------------------------------------------------


def criterion_1() -> CriterionResult:
    J, M = 12, 8
    ops = _ops(J, M, "constant")
    alphas = np.linspace(-np.pi, np.pi, 65)[1:]
    t0 = time.perf_counter()
    curves = dispersion_diagram(ops, alphas, 40)
    elapsed = time.perf_counter() - t0
    worst, checked, switches = 0.0, 0, 0
    for cv in curves:
        ident = None
        for i, a in enumerate(alphas):
            p, m = ops.basis.pair(int(np.argmax(np.abs(cv.vectors[i]))))
            if ident is not None and (p, m) != ident:
                switches += 1
            ident = (p, m)
            if abs(p) <= J - 2 and m <= M - 2:
                exact = closed_form_mu(a, p, m)
                worst = max(worst, abs(cv.mus[i] - exact) / max(abs(exact), 1.0))
                checked += 1
    ok = worst <= 1e-8 and elapsed < 30 and switches == 0 and checked > 0
    return CriterionResult(
        1,
        "dispersion oracle",
        ok,
        f"max rel err {worst:.2e} over {checked} samples, {switches} identity switches, {elapsed:.1f}s for 64 alphas",
        {"max_rel_error": worst, "seconds": elapsed, "samples": checked},
    )


def criterion_2() -> CriterionResult:
    ms = _mset(J_STD, M_STD, "constant", K2)
    oracle = plane_wave_multipliers(K2, M_STD)
    unit = ms.unit
    err_unit = 0.0
    expected_unit = oracle["unit_right"] + oracle["unit_left"]
    for z in expected_unit:
        err_unit = max(err_unit, min(abs(m.z - z) for m in unit))
    s0_plus = sorted((m.z for m in ms.by_class(MultiplierClass.UNIT_RIGHT)), key=np.angle)
    s0_ok = len(s0_plus) == 2 and all(min(abs(z - w) for w in s0_plus) <= 1e-7 for z in oracle["unit_right"])
    ev = [m.z for m in ms.by_class(MultiplierClass.EVANESCENT)]
    trust = [z for z in oracle["evanescent"] if -np.log(z) <= ms.lambda_cap]
    err_ev = max(min(abs(w - z) / z for w in ev) for z in trust)
    count_ok = len(ev) == len(trust)
    rec = reciprocity_check(ms, tol=1e-7)
    ok = len(unit) == 4 and err_unit <= 1e-7 and s0_ok and err_ev <= 1e-7 and count_ok and rec.ok
    return CriterionResult(
        2,
        "multiplier oracle",
        ok,
        f"{len(unit)} unit (err {err_unit:.1e}), {len(ev)} evanescent (rel err {err_ev:.1e}), reciprocity err {rec.max_error:.1e}",
        {"unit_error": err_unit, "evanescent_rel_error": err_ev, "reciprocity": rec.max_error},
    )


def _residue_identity(medium: str):
    ops = _ops(J_STD, M_STD, medium)
    ms = _mset(J_STD, M_STD, medium, K2)
    f = broad_source(ops.basis)
    ns = [1, 2, 3, 4]
    spec = ContourSpec(0.0, np.exp(-ms.tau), 64)
    res = contour_integral(ops, K2, f, spec, ns, mset=ms)
    enclosed = [m for m in ms.items if m.cls == MultiplierClass.EVANESCENT]
    sums = {n: CellField.zeros(ops.basis) for n in ns}
    for m in enclosed:
        r = residue_at_pole(ops, K2, f, m.z, n=ns, mset=ms)
        for n in ns:
            sums[n] = sums[n] + r[n]
    # all enclosed multipliers inside the trust region are summed; the first omitted
    # one would be the next multiplier beyond the trust region
    smallest = min(abs(m.z) for m in enclosed)
    omitted = np.exp(-ms.lambda_cap)
    out = {}
    for n in ns:
        disc = (res[n] - sums[n]).l2_norm()
        allowed = max(1e-8, omitted ** (n - 1) * f.norm())
        out[n] = (disc, allowed)
    return out, smallest


def criterion_3() -> CriterionResult:
    out, _ = _residue_identity("constant")
    ok = all(d <= a for d, a in out.values())
    worst = max(d for d, _ in out.values())
    return CriterionResult(
        3,
        "generalized residue identity",
        ok,
        "n=1..4 discrepancies " + ", ".join(f"{d:.1e}" for d, _ in out.values()),
        {"discrepancy": {n: d for n, (d, _) in out.items()}, "max": worst},
    )


def criterion_4() -> CriterionResult:
    k2 = 1.0
    ops = _ops(J_STD, M_STD, "constant")
    f = broad_source(ops.basis)
    rows = verify_vanishing_radii(ops, k2, f, ell_max=3, n=2)
    norms = [r.norm for r in rows]
    decreasing = all(norms[i + 1] < norms[i] for i in range(len(norms) - 1))
    below = all(r.norm <= r.envelope and r.norm <= r.measured_envelope for r in rows)
    capped = False
    try:
        verify_vanishing_radii(ops, k2, f, ell_max=4, n=2)
    except ValueError:
        capped = True
    ok = decreasing and below and capped
    return CriterionResult(
        4,
        "vanishing radii",
        ok,
        "norms " + ", ".join(f"{r.norm:.2e}<=env {r.envelope:.1e}/meas {r.measured_envelope:.1e}" for r in rows)
        + f"; l=4 refused: {capped}",
        {"rows": [r.__dict__ for r in rows]},
    )


def _two_path(medium: str, cells=range(1, 6)):
    ops = _ops(J_STD, M_STD, medium)
    ms = _mset(J_STD, M_STD, medium, K2)
    f = transverse_source(ops.basis)
    sol = lap_solution(ops, K2, f, cells, mset=ms, decompose=False)
    ab = lap_via_absorption(ops, K2, f, EPS_LIST, cells, mset=ms)
    diffs = {n: (sol[n] - ab[n]).h1_norm() for n in cells}
    return diffs, ab, sol, f


def criterion_5() -> CriterionResult:
    diffs, ab, sol, f = _two_path("constant")
    oracle = max((sol[n] - green_cell_field(f, K2, n)).h1_norm() for n in diffs)
    worst = max(diffs.values())
    ok = worst <= 1e-4 and np.all(np.isfinite(ab.orders))
    return CriterionResult(
        5,
        "LAP two-path agreement",
        ok,
        f"max H1 diff {worst:.2e} on cells 1..5, eps order {', '.join(f'{o:.3f}' for o in ab.orders)}, exact-oracle diff {oracle:.1e}",
        {"diffs": diffs, "orders": ab.orders, "oracle_diff": oracle},
    )


def _stability(medium: str, n_max: int = 20, floor: float = 1e-3):
    ops = _ops(J_STD, M_STD, medium)
    ms = _mset(J_STD, M_STD, medium, K2)
    f = broad_source(ops.basis)
    ns = list(range(1, n_max + 1))
    sol = lap_solution(ops, K2, f, ns, mset=ms)
    ratios = {n: sol[n].h1_norm() / f.norm() for n in ns}
    n0 = None
    for n in ns:
        prop = CellField.zeros(ops.basis)
        for t in sol.decomposition[n].propagating:
            prop = prop + t.field
        frac = (sol[n] - prop).h1_norm() / sol[n].h1_norm()
        if frac < floor:
            n0 = n
            break
    if n0 is None:
        return ratios, None, np.inf, np.inf
    tail = np.array([ratios[n] for n in ns if n >= n0])
    variation = float((tail.max() - tail.min()) / tail.min())
    slope = float(np.polyfit(np.arange(tail.size), tail, 1)[0] * (tail.size - 1) / tail.mean()) if tail.size > 1 else 0.0
    return ratios, n0, variation, slope


def criterion_6() -> CriterionResult:
    ratios, n0, var, slope = _stability("constant")
    ok = n0 is not None and var < 1e-2 and slope < 1e-2
    return CriterionResult(
        6,
        "stability",
        ok,
        f"H1/||f|| in [{min(ratios.values()):.6f}, {max(ratios.values()):.6f}] for n=1..20; variation {var:.1e} from n={n0}, trend {slope:.1e}",
        {"ratios": ratios, "n0": n0, "variation": var, "trend": slope},
    )


def criterion_7() -> CriterionResult:
    ops = _ops(J_STD, M_STD, "constant")
    ms = _mset(J_STD, M_STD, "constant", K2)
    rng = np.random.default_rng(7)
    worst = 0.0
    cross = 0.0
    for _ in range(5):
        sols = []
        for _ in range(2):
            f = _unit(random_source(ops.basis, rng))
            sols.append(lap_solution(ops, K2, f, [-1, 1, 2], mset=ms, decompose=False))
        uf, ug = sols
        scale = np.sqrt(uf[-1].h1_norm() ** 2 + uf[1].h1_norm() ** 2) * np.sqrt(ug[-1].h1_norm() ** 2 + ug[1].h1_norm() ** 2)
        i0 = abs(wronskian_identity(uf, ug, 0))
        i1 = abs(wronskian_identity(uf, ug, 1))
        i2 = abs(wronskian_identity(uf, ug, 2))
        worst = max(worst, i0 / scale, i1 / scale)
        cross = max(cross, abs(i1 - i2))
    ok = worst <= 1e-6
    return CriterionResult(
        7,
        "Wronskian identity",
        ok,
        f"max |I|/(||u_f|| ||u_g||) = {worst:.1e} over 5 pairs; Gamma1 vs Gamma2 {cross:.1e}",
        {"relative": worst, "cross_edge": cross},
    )


def _translation_checks(medium: str):
    ops = _ops(J_STD, M_STD, medium)
    ms = _mset(J_STD, M_STD, medium, K2)
    R = build_translation_operator(ms, ops, K2, "mode_synthesis")
    spec = operator_spectrum(R)
    rho = R.spectral_radius
    out = {"rho": rho, "cross_validation": R.cross_validation}
    eig_act = power = 0.0
    for m in ms.s_plus[: ops.basis.M + 1]:
        t = trace(m.mode, "left", m.z).dirichlet
        eig_act = max(eig_act, eigen_action_error(R, m.z, t))
        for p in range(1, 6):
            power = max(power, power_identity_error(R, m.z, t, p))
    out["eigen_action"] = eig_act
    out["power"] = power
    f = broad_source(ops.basis)
    ann = 0.0
    for m in ms.s_plus[: ops.basis.M + 1]:
        if m.cls != MultiplierClass.EVANESCENT:
            continue
        r = residue_at_pole(ops, K2, f, m.z, n=1, mset=ms)[1]
        t = trace(r, "left").dirichlet
        ann = max(ann, annihilation_error(R, m.z, t, m.mult_estimate))
    out["annihilation"] = ann
    out["eigenvalues"] = [e.eigenvalue for e in spec]
    return out, ms


def criterion_8() -> CriterionResult:
    out, ms = _translation_checks("constant")
    oracle = plane_wave_multipliers(K2, M_STD)
    s_plus = list(oracle["unit_right"]) + list(oracle["evanescent"])
    ev = out["eigenvalues"]
    match = max(min(abs(e - z) for e in ev) for z in s_plus)
    lp = build_translation_operator(ms, _ops(J_STD, M_STD, "constant"), K2, "lap_pairs")
    ok = (
        out["rho"] <= 1 + 1e-6
        and match <= 1e-6
        and out["eigen_action"] <= 1e-6
        and out["power"] <= 1e-6
        and out["annihilation"] <= 1e-5
    )
    return CriterionResult(
        8,
        "translation operator",
        ok,
        f"rho={out['rho']:.12f}, eig match {match:.1e}, eigen-action {out['eigen_action']:.1e}, power {out['power']:.1e}, "
        f"annihilation {out['annihilation']:.1e}; lap_pairs misfit {out['cross_validation']:.1e}/{lp.cross_validation:.1e}",
        {**{k: v for k, v in out.items() if k != "eigenvalues"}, "eig_match": match, "lap_pairs_cross_validation": lp.cross_validation},
    )


def criterion_9() -> CriterionResult:
    ops = _ops(J_STD, M_STD, "constant")
    ms = _mset(J_STD, M_STD, "constant", K2)
    f = broad_source(ops.basis)
    sol = lap_solution(ops, K2, f, range(1, 9), mset=ms)
    rows = decay_check(sol, ms)
    worst_ev, worst_prop, fitted = 0.0, 0.0, 0
    for r in rows:
        if r.cls.startswith("unit"):
            worst_prop = max(worst_prop, r.ratio)
        elif r.ratio is not None:
            fitted += 1
            worst_ev = max(worst_ev, abs(r.ratio / r.expected - 1.0))
    ok = fitted >= 1 and worst_ev <= 1e-3 and worst_prop <= 1e-8
    return CriterionResult(
        9,
        "decay theorem",
        ok,
        f"{fitted} evanescent fits, max |ratio/|z| - 1| = {worst_ev:.1e}; propagating spread {worst_prop:.1e}",
        {"evanescent": worst_ev, "propagating": worst_prop, "fitted": fitted},
    )


def criterion_10() -> CriterionResult:
    medium = "perturbed"
    ms = _mset(J_STD, M_STD, medium, K2)
    rec = reciprocity_check(ms, tol=1e-7)
    res, _ = _residue_identity(medium)
    res_ok = all(d <= a for d, a in res.values())
    _, n0, var, slope = _stability(medium)
    trans, _ = _translation_checks(medium)
    diffs, ab, _, _ = _two_path(medium)
    two = max(diffs.values())
    ok = (
        ms.assumption1_ok
        and rec.ok
        and rec.max_error <= 1e-7
        and res_ok
        and n0 is not None
        and var < 1e-2
        and slope < 1e-2
        and trans["rho"] <= 1 + 1e-6
        and trans["eigen_action"] <= 1e-6
        and two <= 1e-3
    )
    return CriterionResult(
        10,
        "perturbed medium",
        ok,
        f"reciprocity {rec.max_error:.1e}, residue {max(d for d, _ in res.values()):.1e}, stability var {var:.1e}, "
        f"rho={trans['rho']:.12f}, two-path {two:.1e} (eps order {ab.orders[-1]:.2f})",
        {"reciprocity": rec.max_error, "two_path": two, "stability": var, "rho": trans["rho"]},
    )


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
}


def run_criterion(k: int) -> CriterionResult:
    t0 = time.perf_counter()
    try:
        res = CRITERIA[k]()
    except Exception as exc:  # a crash is reported as a failed criterion
        res = CriterionResult(k, CRITERIA[k].__name__, False, f"raised {type(exc).__name__}: {exc}")
    res.seconds = time.perf_counter() - t0
    return res


def run_all(selected=None) -> list[CriterionResult]:
    keys = sorted(CRITERIA) if selected is None else sorted(selected)
    return [run_criterion(k) for k in keys]
