"""Dispersion curves of the alpha-quasi-periodic cell operator.

For real alpha the substitution u = exp(i alpha x1) psi turns the cell
problem into the generalized Hermitian eigenproblem

    A(alpha) psi = mu Qm psi,   A(alpha) = -(L + 2 i alpha D - alpha^2 I),

whose eigenvalues mu_n(alpha) form the dispersion diagram.  Group velocities
mu_n'(alpha) come from the Hellmann-Feynman identity.  Where eigenvalues
cluster, the slope matrix is diagonalized inside the cluster, which picks out
the analytic branches and makes curve tracking through crossings reliable.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .cell import CellOperatorSet, Field


class NearDegenerateWarning(UserWarning):
    """Hellmann-Feynman slope requested at a (nearly) repeated eigenvalue."""


@dataclass
class BranchData:
    """Eigenpairs at one alpha, rotated onto analytic branches."""

    alpha: float
    mus: np.ndarray
    dmus: np.ndarray
    vectors: np.ndarray  # (N, n), q-orthonormal columns
    degenerate: np.ndarray  # bool per eigenpair: member of a cluster


def _solve_hermitian(ops: CellOperatorSet, alpha: float, n: int):
    A = np.diag(ops.alpha_operator(alpha)).astype(complex)
    try:
        mus, vecs = scipy.linalg.eigh(A, ops.Qm, subset_by_index=[0, n - 1])
    except np.linalg.LinAlgError as exc:
        raise ValueError("Qm is not positive definite (medium violates q >= c0)") from exc
    return mus, vecs


def alpha_eigenpairs(ops: CellOperatorSet, alpha: float, n_modes: int) -> list[tuple[float, Field]]:
    """The ``n_modes`` smallest eigenpairs of A(alpha) psi = mu Qm psi.

    Eigenvectors are q-orthonormal.

    Args:
        ops: Assembled cell operators.
        alpha: Quasi-momentum in (-pi, pi].
        n_modes: Number of eigenpairs, at most ``ops.N``.

    Returns:
        List of ``(mu, psi)`` pairs in ascending order of mu.
    """
    if not 1 <= n_modes <= ops.N:
        raise ValueError(f"n_modes must lie in [1, {ops.N}]")
    mus, vecs = _solve_hermitian(ops, alpha, n_modes)
    return [(float(mus[i]), Field(vecs[:, i], ops.basis)) for i in range(n_modes)]


def _slope(ops: CellOperatorSet, alpha: float, psi: np.ndarray) -> float:
    dA = ops.alpha_operator_derivative(alpha)
    num = np.real(np.vdot(psi, dA * psi))
    den = np.real(np.vdot(psi, ops.Qm @ psi))
    return float(num / den)


def group_velocity(
    ops: CellOperatorSet, alpha: float, mu: float, psi: Field, tol_gap: float = 1e-8
) -> float:
    """Hellmann-Feynman slope mu'(alpha) = (dA psi, psi) / (psi, psi)_q.

    Emits :class:`NearDegenerateWarning` when another eigenvalue lies within
    ``tol_gap * max(1, |mu|)`` of ``mu``; for those use
    :func:`branch_eigenpairs`, which resolves the cluster.
    """
    A = np.diag(ops.alpha_operator(alpha)).astype(complex)
    evals = scipy.linalg.eigh(A, ops.Qm, eigvals_only=True)
    gaps = np.abs(evals - mu)
    gaps = np.sort(gaps)
    if gaps.size > 1 and gaps[1] < tol_gap * max(1.0, abs(mu)):
        warnings.warn(
            f"eigenvalue {mu:.6g} is nearly degenerate at alpha={alpha:.6g}; slope is not unique",
            NearDegenerateWarning,
            stacklevel=2,
        )
    return _slope(ops, alpha, psi.coeffs)


def _clusters(mus: np.ndarray, tol: float) -> list[np.ndarray]:
    groups = []
    start = 0
    for i in range(1, len(mus) + 1):
        if i == len(mus) or mus[i] - mus[i - 1] > tol * max(1.0, abs(mus[i])):
            groups.append(np.arange(start, i))
            start = i
    return groups


def rotate_to_branches(
    ops: CellOperatorSet, alpha: float, mus: np.ndarray, vecs: np.ndarray, tol_cluster: float = 1e-9
) -> BranchData:
    """Diagonalize the slope matrix inside eigenvalue clusters.

    ``vecs`` must be q-orthonormal.  Within a cluster the slope matrix
    V^H dA V is Hermitian; its eigenvectors are the limits of the analytic
    branches and its eigenvalues their slopes.
    """
    dA = ops.alpha_operator_derivative(alpha)
    vecs = vecs.copy()
    dmus = np.empty(len(mus))
    degenerate = np.zeros(len(mus), dtype=bool)
    for g in _clusters(mus, tol_cluster):
        V = vecs[:, g]
        S = V.conj().T @ (dA[:, None] * V)
        if len(g) == 1:
            dmus[g] = np.real(S[0, 0])
            continue
        s, W = np.linalg.eigh(0.5 * (S + S.conj().T))
        vecs[:, g] = V @ W
        dmus[g] = s
        degenerate[g] = True
    return BranchData(float(alpha), np.asarray(mus, float), dmus, vecs, degenerate)


def branch_eigenpairs(ops: CellOperatorSet, alpha: float, n_modes: int, tol_cluster: float = 1e-9) -> BranchData:
    """Lowest eigenpairs at ``alpha`` with slopes, rotated onto analytic branches.

    At least ``n_modes`` pairs are returned; the count grows so that an
    eigenvalue cluster straddling the cutoff is kept whole.
    """
    n_try = min(ops.N, n_modes + 4)
    while True:
        mus, vecs = _solve_hermitian(ops, alpha, n_try)
        groups = _clusters(mus, tol_cluster)
        keep = next(g[-1] + 1 for g in groups if g[-1] + 1 >= n_modes)
        if keep < n_try or n_try == ops.N:
            break
        n_try = min(ops.N, 2 * n_try)
    bd = rotate_to_branches(ops, alpha, mus[:keep], vecs[:, :keep], tol_cluster)
    return bd


@dataclass(eq=False)
class DispersionCurve:
    """One tracked dispersion curve mu_n(alpha) sampled on an alpha grid."""

    alphas: np.ndarray
    mus: np.ndarray
    dmus: np.ndarray
    mode_index: int
    vectors: np.ndarray | None = None  # (n_alpha, N)
    flagged: np.ndarray | None = None  # bool per sample: tracking fell back to sorted order
    ops: CellOperatorSet | None = field(default=None, repr=False)


def dispersion_diagram(
    ops: CellOperatorSet,
    alpha_grid,
    n_curves: int,
    overlap_threshold: float = 0.9,
    keep_vectors: bool = True,
) -> list[DispersionCurve]:
    """Track the ``n_curves`` lowest curves (at the first sample) across ``alpha_grid``.

    Consecutive samples are matched by maximizing the q-overlap of
    eigenvectors (Hungarian assignment).  Curves are tracked inside a wider
    window of eigenpairs.  The window is doubled whenever a tracked curve's
    best overlap falls below ``overlap_threshold``, so a curve rising above
    its neighbours is not lost.  A sample is flagged only when even the full
    spectrum gives no continuation above the threshold.
    """
    alphas = np.asarray(alpha_grid, dtype=float)
    if alphas.ndim != 1 or alphas.size < 16:
        raise ValueError("alpha grid needs at least 16 samples")
    if np.any(np.diff(alphas) <= 0):
        raise ValueError("alpha grid must be strictly increasing")
    if alphas[0] <= -np.pi - 1e-12 or alphas[-1] > np.pi + 1e-12:
        raise ValueError("alpha grid must lie in (-pi, pi]")
    n_win = min(ops.N, max(2 * n_curves, n_curves + 10))
    na = alphas.size
    mus = np.empty((na, n_curves))
    dmus = np.empty((na, n_curves))
    vecs = np.empty((na, n_curves, ops.N), dtype=complex) if keep_vectors else None
    flags = np.zeros((na, n_curves), dtype=bool)

    prev = None  # vectors of the window in tracked order, one per row
    for i, a in enumerate(alphas):
        while True:
            bd = branch_eigenpairs(ops, a, n_win)
            ncol = bd.mus.size
            if prev is None:
                order = np.arange(ncol)
                break
            P = prev[: min(prev.shape[0], ncol)]
            O = np.abs(P.conj() @ (ops.Qm @ bd.vectors))  # (tracked, new)
            rows, cols = linear_sum_assignment(-O)
            order = np.empty(P.shape[0], dtype=int)
            order[rows] = cols
            bad = O[np.arange(P.shape[0]), order][:n_curves] < overlap_threshold
            if not bad.any() or n_win >= ops.N:
                flags[i, bad] = True
                break
            # a tracked curve left the window: widen it and redo this sample
            n_win = min(ops.N, 2 * n_win)
        rest = np.setdiff1d(np.arange(ncol), order)
        order = np.concatenate([order, rest])
        mus[i] = bd.mus[order[:n_curves]]
        dmus[i] = bd.dmus[order[:n_curves]]
        if keep_vectors:
            vecs[i] = bd.vectors[:, order[:n_curves]].T
        prev = bd.vectors[:, order].T
    return [
        DispersionCurve(
            alphas.copy(),
            mus[:, c].copy(),
            dmus[:, c].copy(),
            c,
            vecs[:, c, :].copy() if keep_vectors else None,
            flags[:, c].copy(),
            ops,
        )
        for c in range(n_curves)
    ]


# ---------------------------------------------------------------------------
# Crossings with k^2
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Crossing:
    alpha: float
    curve_index: int
    mu: float
    dmu: float


@dataclass
class CrossingSet:
    k2: float
    p_plus: list[Crossing]
    p_minus: list[Crossing]
    p_zero: list[Crossing]
    tol_flat: float = 1e-6

    @property
    def assumption1_ok(self) -> bool:
        return not self.p_zero

    @property
    def flag(self) -> str | None:
        return None if self.assumption1_ok else "Assumption 1 violated"

    def to_json(self) -> dict:
        def rows(lst):
            return [{"alpha": c.alpha, "curve_index": c.curve_index, "mu": c.mu, "dmu": c.dmu} for c in lst]

        return {
            "k2": self.k2,
            "assumption1_ok": self.assumption1_ok,
            "p_plus": rows(self.p_plus),
            "p_minus": rows(self.p_minus),
            "p_zero": rows(self.p_zero),
        }


def crossing_set_from_json(obj) -> CrossingSet:
    if isinstance(obj, str):
        obj = json.loads(obj)

    def rows(lst):
        return [Crossing(float(r["alpha"]), int(r["curve_index"]), float(r["mu"]), float(r["dmu"])) for r in lst]

    return CrossingSet(float(obj["k2"]), rows(obj["p_plus"]), rows(obj["p_minus"]), rows(obj["p_zero"]))


def _branch_at(ops: CellOperatorSet, alpha: float, ref: np.ndarray, n_win: int) -> tuple[float, float, np.ndarray]:
    bd = branch_eigenpairs(ops, alpha, n_win)
    ov = np.abs(ref.conj() @ (ops.Qm @ bd.vectors))
    i = int(np.argmax(ov))
    return float(bd.mus[i]), float(bd.dmus[i]), bd.vectors[:, i]


def _hermite(a0, a1, g0, g1, d0, d1):
    """Cubic Hermite interpolant on [a0, a1] returning (value, slope) callables."""
    h = a1 - a0

    def val(a):
        t = (a - a0) / h
        h00 = 2 * t**3 - 3 * t**2 + 1
        h10 = t**3 - 2 * t**2 + t
        h01 = -2 * t**3 + 3 * t**2
        h11 = t**3 - t**2
        return h00 * g0 + h10 * h * d0 + h01 * g1 + h11 * h * d1

    def der(a):
        t = (a - a0) / h
        return ((6 * t**2 - 6 * t) * g0 + (3 * t**2 - 4 * t + 1) * h * d0 + (-6 * t**2 + 6 * t) * g1 + (3 * t**2 - 2 * t) * h * d1) / h

    return val, der


def _safeguarded_root(fun, lo, hi, f_lo, tol, maxit=100):
    """Newton steps inside a shrinking bisection bracket; fun returns (value, slope, extra)."""
    a = 0.5 * (lo + hi)
    best = None
    for _ in range(maxit):
        g, d, extra = fun(a)
        best = (a, g, d, extra)
        if abs(g) <= tol or hi - lo < 1e-15 * max(1.0, abs(a)):
            break
        if np.sign(g) == np.sign(f_lo):
            lo, f_lo = a, g
        else:
            hi = a
        step = a - g / d if d != 0 else None
        a = step if step is not None and lo < step < hi else 0.5 * (lo + hi)
    return best


def classify_crossings(
    curves: list[DispersionCurve],
    k2: float,
    tol_flat: float = 1e-6,
    tol_cross: float = 1e-10,
) -> CrossingSet:
    """Locate and classify the roots of mu_n(alpha) = k^2.

    Each sign change of mu_n - k^2 is refined by safeguarded Newton on fresh
    eigen-solves (or on a cubic Hermite interpolant when the curves carry no
    operator handle).  Interior extrema of a curve that touch k^2 within
    ``sqrt(tol_cross)`` scale are reported in P0.
    """
    p_plus, p_minus, p_zero = [], [], []
    for cv in curves:
        a, g, d = cv.alphas, cv.mus - k2, cv.dmus
        ops = cv.ops
        has_vec = ops is not None and cv.vectors is not None
        n_win = min(ops.N, cv.mode_index + 12) if ops is not None else 0
        scale = max(1.0, abs(k2))
        touch_tol = 1e-8 * scale

        def evaluator(i0, i1):
            if has_vec:
                ref = cv.vectors[i0]

                def fun(x):
                    mu, dmu, _ = _branch_at(ops, x, ref, n_win)
                    return mu - k2, dmu, mu

                return fun
            val, der = _hermite(a[i0], a[i1], g[i0], g[i1], d[i0], d[i1])
            return lambda x: (val(x), der(x), val(x) + k2)

        extrema = []
        for i in range(len(a) - 1):
            if d[i] == 0 or np.sign(d[i]) != np.sign(d[i + 1]):
                fun = evaluator(i, i + 1)

                def slope_fun(x, fun=fun):
                    gv, dv, mu = fun(x)
                    # derivative of the slope by a tiny central difference
                    h = 1e-6
                    return dv, (fun(x + h)[1] - fun(x - h)[1]) / (2 * h), (gv, mu)

                lo, hi = a[i], a[i + 1]
                res = _safeguarded_root(slope_fun, lo, hi, d[i], 1e-12 * scale)
                x, dv, _, (gv, mu) = res
                if abs(gv) <= touch_tol:
                    extrema.append(x)
                    p_zero.append(Crossing(float(x), cv.mode_index, float(mu), float(dv)))
        for end in (0, len(a) - 1):
            if abs(g[end]) <= touch_tol and abs(d[end]) <= max(tol_flat, 1e-6 * scale):
                if all(abs(a[end] - x) > 1e-8 for x in extrema):
                    extrema.append(a[end])
                    p_zero.append(Crossing(float(a[end]), cv.mode_index, float(cv.mus[end]), float(d[end])))

        h_grid = np.max(np.diff(a))
        for i in range(len(a) - 1):
            if g[i] == 0 or np.sign(g[i]) == np.sign(g[i + 1]):
                continue
            fun = evaluator(i, i + 1)
            x, gv, dv, mu = _safeguarded_root(fun, a[i], a[i + 1], g[i], tol_cross)
            if any(abs(x - e) <= h_grid for e in extrema):
                continue
            c = Crossing(float(x), cv.mode_index, float(mu), float(dv))
            if abs(dv) <= tol_flat:
                p_zero.append(c)
            elif dv > 0:
                p_plus.append(c)
            else:
                p_minus.append(c)
        # exact zero at the final sample has no right bracket
        if g[-1] == 0 and abs(d[-1]) > tol_flat:
            c = Crossing(float(a[-1]), cv.mode_index, float(cv.mus[-1]), float(d[-1]))
            (p_plus if d[-1] > 0 else p_minus).append(c)
    key = lambda c: (c.alpha, c.curve_index)  # noqa: E731
    return CrossingSet(float(k2), sorted(p_plus, key=key), sorted(p_minus, key=key), sorted(p_zero, key=key), tol_flat)


def closed_form_mu(alpha, p: int, m: int):
    """mu for the constant medium: (alpha + 2 pi p)^2 + pi^2 m^2."""
    return (np.asarray(alpha) + 2 * np.pi * p) ** 2 + (np.pi * m) ** 2
