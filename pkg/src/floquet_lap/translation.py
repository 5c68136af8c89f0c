"""The translation operator on edge traces and its spectral decomposition.

The operator maps the Dirichlet trace of a LAP solution on Gamma_n (x1 = n)
to its trace on Gamma_{n+1}.  On the truncated trace space (cosine
coefficients m = 0..M) it is an (M+1) x (M+1) matrix, built either from the
Bloch modes of S_+ or by least squares from traces of computed LAP solutions.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .cell import CellField, CellOperatorSet, principal_log
from .lap import LapSolution, lap_solution
from .multipliers import MultiplierSet


def h_half_weights(M: int) -> np.ndarray:
    return np.sqrt(1.0 + (np.pi * np.arange(M + 1)) ** 2)


@dataclass(eq=False)
class TraceVector:
    """Cosine coefficients of u and d1 u on one vertical edge."""

    dirichlet: np.ndarray
    neumann: np.ndarray

    def __post_init__(self):
        self.dirichlet = np.asarray(self.dirichlet, dtype=complex)
        self.neumann = np.asarray(self.neumann, dtype=complex)

    @property
    def h_half_weights(self) -> np.ndarray:
        return h_half_weights(self.dirichlet.size - 1)

    def norm(self) -> float:
        """H^{1/2}(Gamma) norm of the Dirichlet trace."""
        return h_half_norm(self.dirichlet)


def h_half_norm(c: np.ndarray) -> float:
    c = np.asarray(c)
    w = h_half_weights(c.shape[0] - 1)
    return float(np.sqrt(np.sum(w * np.abs(c) ** 2)))


def trace(u, edge: str = "left", z: complex | None = None) -> TraceVector:
    """Trace of a periodic Field (optionally times z^{x1}) or of a CellField.

    Args:
        u: :class:`Field` or :class:`CellField`.
        edge: "left" (x1 = 0) or "right" (x1 = 1) of the cell.
        z: Quasi-periodic factor applied to a Field.
    """
    if edge not in ("left", "right"):
        raise ValueError("edge must be 'left' or 'right'")
    if isinstance(u, CellField):
        d, nm = u.edge(edge)
        return TraceVector(d, nm)
    lam = 0.0 if z is None else principal_log(z)
    g = u.grid
    kj = lam + 2j * np.pi * u.basis.j_values
    fac = 1.0 if edge == "left" else np.exp(lam)
    return TraceVector(fac * g.sum(axis=0), fac * (kj[:, None] * g).sum(axis=0))


@dataclass(eq=False)
class TranslationOperator:
    matrix: np.ndarray
    construction: str
    cross_validation: float = float("nan")
    modes: list = field(default_factory=list)  # (z, trace) used by mode synthesis
    trace_matrix: np.ndarray | None = None
    fit_data: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.matrix))))

    def apply(self, t) -> np.ndarray:
        c = t.dirichlet if isinstance(t, TraceVector) else np.asarray(t)
        return self.matrix @ c

    def fit_residual(self, X: np.ndarray, Y: np.ndarray) -> float:
        """||R X - Y||_F / ||Y||_F."""
        return float(np.linalg.norm(self.matrix @ X - Y) / np.linalg.norm(Y))


def _mode_traces(mset: MultiplierSet, M1: int) -> list[tuple[complex, np.ndarray]]:
    out = []
    for m in mset.s_plus:
        t = trace(m.mode, "left", m.z).dirichlet
        out.append((m.z, t))
    return out[:M1]


def lap_trace_pairs(
    ops: CellOperatorSet,
    k2: float,
    mset: MultiplierSet,
    n_sources: int = 8,
    n_cells: int = 1,
    seed: int = 0,
    power: int = 4,
) -> tuple[np.ndarray, np.ndarray, list[LapSolution]]:
    """Traces X = u|Gamma_n and Y = u|Gamma_{n+1}, n = 1..n_cells, from random sources."""
    from .cell import random_source

    rng = np.random.default_rng(seed)
    X, Y, sols = [], [], []
    for _ in range(n_sources):
        f = random_source(ops.basis, rng, power)
        sol = lap_solution(ops, k2, f, range(1, n_cells + 2), mset=mset, decompose=False)
        sols.append(sol)
        for n in range(1, n_cells + 1):
            X.append(sol[n].edge("left")[0])
            Y.append(sol[n + 1].edge("left")[0])
    return np.array(X).T, np.array(Y).T, sols


def build_translation_operator(
    mset: MultiplierSet,
    ops: CellOperatorSet,
    k2: float,
    method: str = "mode_synthesis",
    rank_tol: float = 1e-12,
    n_sources: int = 8,
    n_cells: int = 1,
    seed: int = 0,
    validate: bool = True,
) -> TranslationOperator:
    """Matrix of the translation operator on the truncated trace space.

    ``mode_synthesis`` sets R = T diag(z) T^+ from the Dirichlet traces T of
    the M+1 dominant S_+ Bloch modes.  ``lap_pairs`` fits R = Y X^+ to traces
    of LAP solutions from seeded random sources.  With ``validate`` each
    operator records its relative misfit on the other method's data (LAP
    pairs for mode synthesis, the Bloch-mode eigen-relation for lap_pairs).

    Raises:
        ValueError: "insufficient independent modes at this truncation" when
            fewer than M+1 modes are available or their traces are dependent.
    """
    M1 = ops.basis.M + 1
    traces = _mode_traces(mset, M1)
    if method == "mode_synthesis":
        if len(traces) < M1:
            raise ValueError("insufficient independent modes at this truncation")
        T = np.array([t for _, t in traces]).T
        s = np.linalg.svd(T, compute_uv=False)
        if s[-1] <= rank_tol * s[0]:
            raise ValueError("insufficient independent modes at this truncation")
        zs = np.array([z for z, _ in traces])
        R = T @ np.diag(zs) @ np.linalg.pinv(T)
        op = TranslationOperator(R, method, modes=traces, trace_matrix=T)
        if validate:
            X, Y, _ = lap_trace_pairs(ops, k2, mset, n_sources, n_cells, seed)
            op.fit_data = (X, Y)
            op.cross_validation = op.fit_residual(X, Y)
        return op
    if method == "lap_pairs":
        X, Y, _ = lap_trace_pairs(ops, k2, mset, n_sources, n_cells, seed)
        s = np.linalg.svd(X, compute_uv=False)
        if s.size < M1 or s[-1] <= rank_tol * s[0]:
            raise ValueError("insufficient independent modes at this truncation")
        R = Y @ np.linalg.pinv(X)
        op = TranslationOperator(R, method, fit_data=(X, Y), modes=traces)
        if validate and traces:
            T = np.array([t for _, t in traces]).T
            zs = np.array([z for z, _ in traces])
            op.cross_validation = float(np.linalg.norm(R @ T - T * zs) / np.linalg.norm(T))
        return op
    raise ValueError(f"unknown construction method {method!r}")


@dataclass
class SpectrumEntry:
    eigenvalue: complex
    vector: np.ndarray
    residual: float


def operator_spectrum(R: TranslationOperator) -> list[SpectrumEntry]:
    """Eigenpairs of R sorted by modulus descending, with relative residuals."""
    w, V = np.linalg.eig(R.matrix)
    order = np.lexsort((np.angle(w), -np.abs(w)))
    out = []
    for i in order:
        v = V[:, i]
        res = float(np.linalg.norm(R.matrix @ v - w[i] * v) / np.linalg.norm(v))
        out.append(SpectrumEntry(complex(w[i]), v, res))
    return out


def decompose_trace(t, R: TranslationOperator, J: int, cond_limit: float = 1e10) -> tuple[np.ndarray, float]:
    """Least-squares expansion of a trace in the first J eigenvector traces of R.

    The fit is done in the H^{1/2} inner product.  Returns the coefficients
    and the H^{1/2} norm of the residual.  A warning is issued when the
    selected eigenvectors have condition number above ``cond_limit``.
    """
    c = t.dirichlet if isinstance(t, TraceVector) else np.asarray(t, dtype=complex)
    spec = operator_spectrum(R)
    if J > len(spec):
        raise ValueError(f"J={J} exceeds the number of eigenvectors {len(spec)}")
    B = np.array([e.vector for e in spec[:J]]).T
    w = np.sqrt(h_half_weights(c.size - 1))
    Bw = w[:, None] * B
    if np.linalg.cond(Bw) > cond_limit:
        warnings.warn("ill-conditioned eigenvector basis in trace decomposition", RuntimeWarning, stacklevel=2)
    coef, *_ = np.linalg.lstsq(Bw, w * c, rcond=None)
    resid = h_half_norm(c - B @ coef)
    return coef, resid


def eigen_action_error(R: TranslationOperator, z: complex, t: np.ndarray) -> float:
    """||R t - z t||_{H^1/2} / ||t||_{H^1/2}."""
    return h_half_norm(R.matrix @ t - z * t) / h_half_norm(t)


def power_identity_error(R: TranslationOperator, z: complex, t: np.ndarray, m: int) -> float:
    """||R^m t - z^m t|| / ||t|| in H^{1/2}."""
    return h_half_norm(np.linalg.matrix_power(R.matrix, m) @ t - z**m * t) / h_half_norm(t)


def annihilation_error(R: TranslationOperator, z: complex, t: np.ndarray, mult: int = 1) -> float:
    """||(R - z I)^mult t|| / ||t|| in H^{1/2}."""
    A = np.linalg.matrix_power(R.matrix - z * np.eye(R.matrix.shape[0]), mult)
    return h_half_norm(A @ t) / h_half_norm(t)


@dataclass
class DecayRow:
    z: complex
    cls: str
    ratio: float | None
    expected: float
    bound: float
    norms: dict[int, float]
    ok: bool


def decay_check(lap: LapSolution, mset: MultiplierSet, n_range=None, floor: float = 1e-13, delta: float = 0.0, fit_tol: float = 1e-3) -> list[DecayRow]:
    """Per-cell decay of each decomposed component.

    Evanescent components: fit log ||u_j||_{H1(cell n)} against n and compare
    the per-cell ratio with |z_j| (allowed up to |z_j| + delta, relative
    slack ``fit_tol``).  Propagating components: report the spread of the
    norms relative to their mean as ``ratio`` (ideal 0).  Components below
    ``floor`` are excluded from the fit.
    """
    ns = sorted(n for n in lap.decomposition if n >= 1) if n_range is None else sorted(n for n in n_range if n in lap.decomposition)
    rows: list[DecayRow] = []
    if not ns:
        return rows
    first = lap.decomposition[ns[0]]
    for k, t in enumerate(first.propagating):
        norms = {n: lap.decomposition[n].propagating[k].field.h1_norm() for n in ns}
        vals = np.array(list(norms.values()))
        spread = float((vals.max() - vals.min()) / vals.mean()) if vals.mean() > 0 else 0.0
        rows.append(DecayRow(t.z, t.cls.value, spread, 1.0, 1.0, norms, spread <= 1e-8))
    for t in first.evanescent:
        norms = {}
        for n in ns:
            for e in lap.decomposition[n].evanescent:
                if abs(e.z - t.z) <= 1e-12 * abs(t.z):
                    nv = e.field.h1_norm()
                    if nv > floor:
                        norms[n] = nv
        expected = abs(t.z)
        bound = expected + delta
        if len(norms) < 2:
            rows.append(DecayRow(t.z, t.cls.value, None, expected, bound, norms, True))
            continue
        x = np.array(list(norms.keys()), dtype=float)
        y = np.log(np.array(list(norms.values())))
        slope = np.polyfit(x, y, 1)[0]
        ratio = float(np.exp(slope))
        rows.append(DecayRow(t.z, t.cls.value, ratio, expected, bound, norms, ratio <= bound * (1 + fit_tol)))
    return rows
