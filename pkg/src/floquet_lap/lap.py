"""Limiting-absorption solutions assembled cell by cell.

Right of the source (n >= 1) the LAP solution is

    u|_{cell n} = (1/2 pi i) oint_{|z| = e^{-tau}} w(z, .) z^(n-1) dz + sum_{S+ unit} Res_j,

and left of it (n <= -1)

    u|_{cell n} = (1/2 pi i) oint_{|z| = e^{tau}} w(z, .) z^(n-1) dz - sum_{S- unit} Res_j,

where Res_j is the residue of w z^(n-1) at a unit multiplier.  The source
cell n = 0 comes from the absorbing unit-circle integral extrapolated to
zero absorption, which also serves as an independent check on every cell.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import quad_vec

from .cell import CellField, CellOperatorSet, Field, cheb_data
from .cell_solver import solve_many
from .contour import (
    ContourSpec,
    cut_floor,
    contour_integral,
    node_fields,
    propagating_coefficient,
    residue_at_pole,
)
from .multipliers import MultiplierClass, MultiplierSet, floquet_multipliers


class AssumptionViolation(RuntimeError):
    """A unit multiplier has zero group velocity, so the LAP formula does not apply."""


@dataclass(eq=False)
class ModeTerm:
    z: complex
    coefficient: complex
    field: CellField
    cls: MultiplierClass
    mode: Field | None = None


@dataclass(eq=False)
class ModeDecomposition:
    """Split of one cell field into propagating, evanescent and remainder parts.

    ``propagating`` terms carry the coefficient c with field c z^n psi.
    ``evanescent`` fields are the signed contributions of the enclosed
    non-unit multipliers, so that propagating + evanescent + remainder equals
    the cell field.
    """

    propagating: list[ModeTerm]
    evanescent: list[ModeTerm]
    contour_remainder: CellField
    truncation_bound: float
    remainder_radius: float

    def reconstruct(self) -> CellField:
        out = self.contour_remainder.copy()
        for t in self.propagating + self.evanescent:
            out = out + t.field
        return out


@dataclass(eq=False)
class LapSolution:
    k2: float
    f: Field
    cells: dict[int, CellField]
    decomposition: dict[int, ModeDecomposition] = field(default_factory=dict)
    mset: MultiplierSet | None = None
    tau: float = float("nan")
    contour_terms: dict[int, CellField] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __getitem__(self, n: int) -> CellField:
        return self.cells[n]

    def h1_norms(self) -> dict[int, float]:
        return {n: c.h1_norm() for n, c in sorted(self.cells.items())}

    def export(self, outdir: str | Path) -> Path:
        """Write manifest.json, cell_<n>.csv files and decomposition.csv."""
        from .io import write_cell_csv, write_json, write_rows_csv

        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        files = {}
        for n, c in sorted(self.cells.items()):
            name = f"cell_{n}.csv"
            write_cell_csv(outdir / name, c)
            files[str(n)] = name
        rows = []
        for n, dec in sorted(self.decomposition.items()):
            for t in dec.propagating + dec.evanescent:
                rows.append([n, t.z.real, t.z.imag, abs(t.coefficient) if t.cls.value.startswith("unit") else t.field.l2_norm(), t.cls.value])
            rows.append([n, np.nan, np.nan, dec.contour_remainder.l2_norm(), "remainder"])
        write_rows_csv(outdir / "decomposition.csv", ["cell", "z_re", "z_im", "magnitude", "class"], rows)
        manifest = {
            "k2": self.k2,
            "tau": self.tau,
            "cells": files,
            "h1_norms": {str(n): v for n, v in self.h1_norms().items()},
            "f_norm": self.f.norm(),
            "source": {"J": self.f.basis.J, "M": self.f.basis.M, "re": self.f.coeffs.real.tolist(), "im": self.f.coeffs.imag.tolist()},
            "decomposition": "decomposition.csv",
            "meta": self.meta,
        }
        write_json(outdir / "manifest.json", manifest)
        return outdir / "manifest.json"


def h1_norm_on_cell(u, z: complex | None = None, P: int | None = None) -> float:
    """(||u||^2 + ||grad u||^2)^(1/2) on one cell.

    ``u`` is a :class:`CellField`, or a periodic :class:`Field` optionally
    multiplied by the quasi-periodic factor z^{x1}.
    """
    if isinstance(u, CellField):
        return u.h1_norm()
    lam = 0.0 if z is None else complex(np.log(complex(z)))
    return CellField.from_quasiperiodic(u, lam, 1.0, P).h1_norm()


def _unit_terms(mset: MultiplierSet, f: Field, side: int, n: int, P: int) -> list[ModeTerm]:
    terms = []
    want = MultiplierClass.UNIT_RIGHT if side > 0 else MultiplierClass.UNIT_LEFT
    sign = 1.0 if side > 0 else -1.0
    for m in mset.items:
        if m.cls != want:
            continue
        c = sign * propagating_coefficient(m.mode, m.group_velocity, f, m.z)
        fld = CellField.from_quasiperiodic(m.mode, m.lam, c * m.z**n, P)
        terms.append(ModeTerm(m.z, c, fld, m.cls, m.mode))
    return terms


def lap_solution(
    ops: CellOperatorSet,
    k2: float,
    f: Field,
    n_range,
    mset: MultiplierSet | None = None,
    decompose: bool = True,
    evanescent_cutoff: float = 1e-12,
    tol_quad: float = 1e-10,
    eps_list=(0.1, 0.05, 0.025, 0.0125),
    allow_p0: bool = False,
    P: int | None = None,
) -> LapSolution:
    """LAP solution on the requested cells.

    Args:
        ops: Assembled cell operators.
        k2: Real wavenumber squared.
        f: Source supported in the reference cell.
        n_range: Iterable of cell indices.
        mset: Precomputed multipliers at ``k2`` (computed when omitted).
        decompose: Populate the per-cell mode decomposition for n != 0.
        evanescent_cutoff: Evanescent residues with (|z_j| / |z_1|)^(|n|-1)
            below this are left in the remainder.
        tol_quad: Contour quadrature tolerance.
        eps_list: Absorption levels used for the source cell n = 0.
        allow_p0: Skip the group-velocity assumption check.
        P: Chebyshev order of the cell fields.

    Raises:
        AssumptionViolation: "LAP fails: P₀ ≠ ∅" when a unit multiplier has
            zero group velocity.
    """
    ns = sorted({int(n) for n in n_range})
    P = ops.basis.n_cheb if P is None else P
    if mset is None:
        mset = floquet_multipliers(ops, k2)
    if not mset.assumption1_ok and not allow_p0:
        raise AssumptionViolation("LAP fails: P₀ ≠ ∅")
    tau = mset.tau
    sol = LapSolution(float(k2), f, {}, {}, mset, tau)
    right = [n for n in ns if n >= 1]
    left = [n for n in ns if n <= -1]
    if f.norm() == 0:
        for n in ns:
            sol.cells[n] = CellField(np.zeros((P + 1, ops.basis.M + 1), dtype=complex))
        return sol

    for side, cells, radius in ((1, right, np.exp(-tau)), (-1, left, np.exp(tau))):
        if not cells:
            continue
        res = contour_integral(ops, k2, f, ContourSpec(0.0, radius, 64), cells, tol_quad=tol_quad, P=P, mset=mset)
        sol.meta[f"contour_Q_{'right' if side > 0 else 'left'}"] = res.Q
        for n in cells:
            terms = _unit_terms(mset, f, side, n, P)
            u = res[n].copy()
            for t in terms:
                u = u + t.field
            sol.cells[n] = u
            sol.contour_terms[n] = res[n]
        if decompose:
            _decompose_side(ops, k2, f, mset, sol, side, cells, evanescent_cutoff, tol_quad, P)

    if 0 in ns:
        ab = lap_via_absorption(ops, k2, f, eps_list, [0], P=P, mset=mset)
        sol.cells[0] = ab.extrapolated[0]
        sol.meta["cell0_order"] = ab.order
    return sol


def _decompose_side(ops, k2, f, mset, sol, side, cells, cutoff, tol_quad, P):
    if side > 0:
        poles = sorted((m for m in mset.items if m.cls == MultiplierClass.EVANESCENT), key=lambda m: -abs(m.z))
        mag = lambda m: abs(m.z)  # noqa: E731
    else:
        poles = sorted((m for m in mset.items if m.cls == MultiplierClass.GROWING), key=lambda m: abs(m.z))
        mag = lambda m: 1.0 / abs(m.z)  # noqa: E731
    # one residue quadrature per distinct pole, shared by all cells
    distinct = []
    for m in poles:
        if not any(abs(m.z - d.z) <= 1e-12 * abs(d.z) for d in distinct):
            distinct.append(m)
    residues = {}
    for m in distinct:
        r = residue_at_pole(ops, k2, f, m.z, n=cells, mset=mset, tol_quad=tol_quad, P=P)
        residues[id(m)] = r
    lead = mag(distinct[0]) if distinct else 1.0
    for n in cells:
        k = abs(n)
        included = [m for m in distinct if (mag(m) / lead) ** (k - 1) >= cutoff]
        ev_terms = []
        for m in included:
            fld = residues[id(m)][n] * (1.0 if side > 0 else -1.0)
            ev_terms.append(ModeTerm(m.z, complex(np.nan), fld, m.cls, m.mode))
        prop = _unit_terms(mset, f, side, n, P)
        remainder = sol.contour_terms[n].copy()
        for t in ev_terms:
            remainder = remainder - t.field
        rho, bound = _remainder_bound(ops, k2, f, mset, included, distinct, side, n, mag, P)
        sol.decomposition[n] = ModeDecomposition(prop, ev_terms, remainder, bound, rho)


def _remainder_bound(ops, k2, f, mset, included, distinct, side, n, mag, P):
    """Bound on the remainder after the included evanescent residues.

    The ML estimate r^n max ||w|| on a circle separating included from
    omitted poles, plus the branch-jump floor of the outer contour.
    """
    rest = [m for m in distinct if m not in included]
    if included and rest:
        rho_in = np.sqrt(mag(included[-1]) * mag(rest[0]))
    elif included:
        rho_in = mag(included[-1]) * np.exp(-2.0)
    else:
        rho_in = mag(rest[0]) * np.exp(1.0) if rest else np.exp(-1.0)
        rho_in = min(rho_in, np.exp(-mset.tau))
    radius = rho_in if side > 0 else 1.0 / rho_in
    spec = ContourSpec(0.0, radius, 64)
    zs = spec.nodes()
    W = node_fields(ops, k2, f, zs, P)
    wmax = max(CellField(W[q]).l2_norm() for q in range(len(zs)))
    # contours through the negative real axis also carry the branch-jump floor
    r_out = np.exp(-mset.tau) if side > 0 else np.exp(mset.tau)
    floor = cut_floor(ops, k2, f, radius, r_out, n, P)
    return float(radius), float(radius ** n * wmax + floor)


# ---------------------------------------------------------------------------
# Absorption path
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class AbsorptionResult:
    eps_list: list[float]
    fields: dict[float, dict[int, CellField]]
    extrapolated: dict[int, CellField]
    order: float
    orders: list[float]
    differences: list[float]

    def __getitem__(self, n: int) -> CellField:
        return self.extrapolated[n]


def absorbing_fields(
    ops: CellOperatorSet,
    k2: float,
    eps: float,
    f: Field,
    ns,
    P: int | None = None,
    points=None,
    epsabs: float = 1e-12,
    epsrel: float = 1e-11,
) -> dict[int, CellField]:
    """(1/2 pi) int_{-pi}^{pi} w_eps(e^{i theta}, .) e^{i n theta} d theta for each n.

    The integrand is analytic but sharply peaked near the unperturbed unit
    multipliers, so it is integrated adaptively with breakpoints there.
    """
    if not eps > 0:
        raise ValueError("absorption eps must be positive")
    ns = list(ns)
    P = ops.basis.n_cheb if P is None else P
    M1 = ops.basis.M + 1
    if f.norm() == 0:
        return {n: CellField(np.zeros((P + 1, M1), dtype=complex)) for n in ns}
    x = cheb_data(P)[0]
    jv = ops.basis.j_values
    kk = complex(k2) + 1j * eps
    nvec = np.asarray(ns)

    def integrand(theta):
        z = np.exp(1j * theta)
        v = solve_many(ops, [z], kk, f)[0].reshape(ops.basis.shape)
        W = np.exp(np.outer(x, 1j * theta + 2j * np.pi * jv)) @ v
        return (np.exp(1j * nvec * theta)[:, None, None] * W[None]).ravel() / (2 * np.pi)

    pts = None if points is None else sorted(p for p in points if -np.pi < p < np.pi)
    val, err = quad_vec(integrand, -np.pi, np.pi, epsabs=epsabs * f.norm(), epsrel=epsrel, points=pts, limit=20000)
    val = val.reshape(len(ns), P + 1, M1)
    return {n: CellField(val[i]) for i, n in enumerate(ns)}


def _neville_at_zero(eps: np.ndarray, vals: list[np.ndarray]) -> np.ndarray:
    """Polynomial extrapolation of vals(eps) to eps = 0."""
    T = [v.copy() for v in vals]
    m = len(eps)
    for k in range(1, m):
        for i in range(m - k):
            T[i] = (eps[i] * T[i + 1] - eps[i + k] * T[i]) / (eps[i] - eps[i + k])
    return T[0]


def lap_via_absorption(
    ops: CellOperatorSet,
    k2: float,
    f: Field,
    eps_list,
    n_range,
    P: int | None = None,
    mset: MultiplierSet | None = None,
    epsabs: float = 1e-12,
) -> AbsorptionResult:
    """Absorbing solutions u_eps on the requested cells and their eps -> 0 limit.

    The limit is a polynomial (Richardson) extrapolation through all
    eps values.  The empirical convergence order is
    log2(d_i / d_{i+1}) with d_i = ||u_{eps_i} - u_{eps_{i+1}}||_{H1}, which
    presumes eps_list decreases by a factor of two per step.
    """
    eps = np.asarray(sorted(eps_list, reverse=True), dtype=float)
    if eps.size < 2 or np.any(eps <= 0):
        raise ValueError("eps_list needs at least two positive values")
    ns = sorted({int(n) for n in n_range})
    P = ops.basis.n_cheb if P is None else P
    points = None
    if mset is not None:
        points = [float(np.angle(m.z)) for m in mset.unit]
    fields = {float(e): absorbing_fields(ops, k2, float(e), f, ns, P, points, epsabs) for e in eps}
    extrap = {}
    for n in ns:
        vals = [fields[float(e)][n].values for e in eps]
        extrap[n] = CellField(_neville_at_zero(eps, vals))
    diffs = []
    for i in range(len(eps) - 1):
        diffs.append(max((fields[float(eps[i])][n] - fields[float(eps[i + 1])][n]).h1_norm() for n in ns))
    orders = [float(np.log2(diffs[i] / diffs[i + 1])) if diffs[i + 1] > 0 else float("nan") for i in range(len(diffs) - 1)]
    order = orders[-1] if orders else float("nan")
    return AbsorptionResult([float(e) for e in eps], fields, extrap, order, orders, diffs)


# ---------------------------------------------------------------------------
# Wronskian
# ---------------------------------------------------------------------------


def edge_traces(sol: LapSolution, edge: int) -> tuple[np.ndarray, np.ndarray]:
    """(Dirichlet, d/dx1) cosine coefficients of the solution on Gamma_edge (x1 = edge).

    Gamma_j with j >= 1 is read from the left edge of cell j, and with
    j <= 0 from the right edge of cell j - 1, so the source cell is never needed.
    """
    if edge >= 1:
        return sol.cells[edge].edge("left")
    return sol.cells[edge - 1].edge("right")


def wronskian_identity(u_f: LapSolution, u_g: LapSolution, edge: int | str = 1) -> complex:
    """int_Gamma [d1 u(g) u(f) - u(g) d1 u(f)] dx2 (bilinear, no conjugation)."""
    if isinstance(edge, str):
        edge = {"Γ₀": 0, "Gamma0": 0, "G0": 0, "Γ₁": 1, "Gamma1": 1, "G1": 1}[edge]
    Df, Nf = edge_traces(u_f, edge)
    Dg, Ng = edge_traces(u_g, edge)
    return complex(np.sum(Ng * Df - Dg * Nf))


def load_lap_solution(outdir: str | Path) -> LapSolution:
    """Re-read an exported solution (cells, source and k^2; decomposition omitted)."""
    from .cell import SpectralBasis
    from .io import read_cell_csv

    outdir = Path(outdir)
    man = json.loads((outdir / "manifest.json").read_text())
    src = man["source"]
    basis = SpectralBasis(int(src["J"]), int(src["M"]))
    f = Field(np.asarray(src["re"]) + 1j * np.asarray(src["im"]), basis)
    cells = {int(n): read_cell_csv(outdir / name) for n, name in man["cells"].items()}
    tau = man["tau"] if man["tau"] is not None else float("nan")
    return LapSolution(float(man["k2"]), f, cells, tau=float(tau), meta=man.get("meta", {}))
