"""Quasi-periodic cell solves: the resolvent evaluation w(z, .) for z off the multipliers.

For z not a Floquet multiplier, u_z = z^{x1} v solves the cell problem with
source f when the periodic part satisfies

    T(log z) v = P(log z) f,

where P(lambda) projects exp(-lambda x1) f onto the periodic basis.  The
projection is evaluated with exact exponential integrals, so it carries no
aliasing error even though exp(-lambda x1) is not band-limited.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .cell import CellOperatorSet, Field, principal_log, project_weighted


@dataclass(eq=False)
class CellSolveResult:
    """Periodic part ``v`` of the quasi-periodic solution at ``z``."""

    v: Field
    z: complex
    residual: float
    condition_estimate: float

    @property
    def lam(self) -> complex:
        return principal_log(self.z)


def _lu_solve_with_condition(T: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, float]:
    lu, piv = scipy.linalg.lu_factor(T, check_finite=False)
    anorm = np.linalg.norm(T, 1)
    (gecon,) = scipy.linalg.get_lapack_funcs(("gecon",), (lu,))
    rcond, info = gecon(lu, anorm, norm="1")
    cond = np.inf if rcond == 0 else 1.0 / rcond
    x = scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)
    return x, float(cond)


def solve_cell(
    ops: CellOperatorSet,
    z: complex,
    k2: complex,
    f: Field,
    tol_pole: float = 1e-12,
    mset=None,
    pole_distance: float = 1e-10,
) -> CellSolveResult:
    """Solve T(log z) v = P(log z) f.

    Args:
        ops: Assembled cell operators.
        z: Nonzero complex point, not a Floquet multiplier.
        k2: Wavenumber squared; may carry a positive imaginary part.
        f: Source on the reference cell.
        tol_pole: The solve is refused when the 1-norm condition estimate
            exceeds ``1 / tol_pole``.
        mset: Optional multiplier set; z within ``pole_distance * max(1, |z|)``
            of one of its members is refused before factorizing.
        pole_distance: Relative distance guard used with ``mset``.

    Returns:
        The periodic part with its certified relative residual.
    """
    if z == 0:
        raise ValueError("branch point, solver undefined")
    if mset is not None:
        for m in mset.items:
            if abs(z - m.z) <= pole_distance * max(1.0, abs(z)):
                raise ValueError("z too close to a Floquet multiplier")
    lam = principal_log(z)
    T = ops.pencil(lam, k2)
    rhs = project_weighted(f, lam)
    x, cond = _lu_solve_with_condition(T, rhs)
    if cond > 1.0 / tol_pole:
        raise ValueError(f"z too close to a Floquet multiplier (condition estimate {cond:.3e})")
    rn = np.linalg.norm(rhs)
    res = 0.0 if rn == 0 else float(np.linalg.norm(T @ x - rhs) / rn)
    return CellSolveResult(Field(x, ops.basis), complex(z), res, cond)


def solve_absorbing(
    ops: CellOperatorSet, z: complex, k2: float, eps: float, f: Field, tol_pole: float = 1e-12
) -> CellSolveResult:
    """:func:`solve_cell` with the absorbing wavenumber k^2 + i eps, eps > 0."""
    if not eps > 0:
        raise ValueError("absorption eps must be positive")
    return solve_cell(ops, z, complex(k2) + 1j * eps, f, tol_pole)


def solve_many(ops: CellOperatorSet, zs, k2: complex, f: Field) -> np.ndarray:
    """Periodic parts at many points without certification, rows are v(z_q).

    Used inside contour quadratures where the contour has already been
    checked to stay clear of multipliers.
    """
    out = np.empty((len(zs), ops.N), dtype=complex)
    for q, z in enumerate(zs):
        lam = principal_log(z)
        out[q] = scipy.linalg.solve(ops.pencil(lam, k2), project_weighted(f, lam), check_finite=False)
    return out
