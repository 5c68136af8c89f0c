"""Contour integrals of z -> w(z, .) z^(n-1) and residue extraction.

The inverse Floquet-Bloch transform evaluates a cell field as a contour
integral of the resolvent family.  On a circle the trapezoid rule converges
geometrically for analytic integrands, so

    (1/(2 pi i)) oint g(z) dz  ~  (1/Q) sum_q g(z_q) (z_q - c),

with nodes z_q = c + r exp(2 pi i q / Q).  Results are physical fields on a
cell (:class:`~floquet_lap.cell.CellField`), since w(z, .) = z^{x1} v_z is not
periodic in x1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .cell import CellField, CellOperatorSet, Field, cheb_data, pairing_with_mode, principal_log, project_weighted
from .cell_solver import solve_many
from .parallel import ordered_map


@dataclass(frozen=True)
class ContourSpec:
    """Circle |z - center| = radius discretized with Q trapezoid nodes."""

    center: complex
    radius: float
    Q: int = 64

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("contour radius must be positive")
        if self.Q < 16:
            raise ValueError("contour needs at least 16 nodes")
        if abs(self.center) <= self.radius * (1 + 1e-12) and abs(self.center) != 0:
            raise ValueError("contour would enclose the branch point z = 0 off-center")

    def nodes(self, Q: int | None = None) -> np.ndarray:
        Q = self.Q if Q is None else Q
        return self.center + self.radius * np.exp(2j * np.pi * np.arange(Q) / Q)

    def check_clear(self, mset, tol_pole: float = 1e-6) -> None:
        """Raise if a multiplier of ``mset`` lies within tol_pole * radius of the circle."""
        for m in mset.items:
            if abs(abs(m.z - self.center) - self.radius) <= tol_pole * self.radius:
                raise ValueError(f"multiplier {m.z:.6g} lies on the contour")

    def enclosed(self, mset) -> list:
        return [m for m in mset.items if abs(m.z - self.center) < self.radius]


@dataclass(eq=False)
class ContourResult:
    """Cell fields (1/2 pi i) oint w(z, .) z^(n-1) dz for each requested n."""

    fields: dict[int, CellField]
    spec: ContourSpec
    Q: int
    history: list[tuple[int, float]] = field(default_factory=list)
    node_residuals: list[float] = field(default_factory=list)

    def __getitem__(self, n: int) -> CellField:
        return self.fields[n]

    def diagnostics(self) -> dict:
        return {
            "center": [float(np.real(self.spec.center)), float(np.imag(self.spec.center))],
            "radius": self.spec.radius,
            "Q": self.Q,
            "history": [{"Q": q, "change": c} for q, c in self.history],
        }


class QuadratureError(RuntimeError):
    def __init__(self, message: str, history):
        super().__init__(message)
        self.history = history


def node_fields(ops: CellOperatorSet, k2: complex, f: Field, zs: np.ndarray, P: int) -> np.ndarray:
    """w(z_q, .) on the Chebyshev grid for every node, shape (Q, P+1, M+1)."""
    x = cheb_data(P)[0]
    jv = ops.basis.j_values
    chunks = np.array_split(np.arange(len(zs)), max(1, min(len(zs), 8)))

    def work(idx):
        V = solve_many(ops, zs[idx], k2, f)
        out = np.empty((len(idx), P + 1, ops.basis.M + 1), dtype=complex)
        for a, q in enumerate(idx):
            lam = principal_log(zs[q])
            E = np.exp(np.outer(x, lam + 2j * np.pi * jv))
            out[a] = E @ V[a].reshape(ops.basis.shape)
        return out

    return np.concatenate(ordered_map(work, chunks), axis=0)


def _combine(W: np.ndarray, zs: np.ndarray, c: complex, n: int) -> np.ndarray:
    Q = len(zs)
    wts = zs ** (n - 1) * (zs - c) / Q
    return np.tensordot(wts, W, axes=(0, 0))


def contour_integral(
    ops: CellOperatorSet,
    k2: complex,
    f: Field,
    spec: ContourSpec,
    n,
    tol_quad: float = 1e-10,
    Q_max: int = 4096,
    P: int | None = None,
    mset=None,
    auto: bool = True,
) -> ContourResult:
    """(1/2 pi i) oint w(z, .) z^(n-1) dz by trapezoid quadrature with auto-doubling.

    Args:
        ops: Assembled cell operators.
        k2: Wavenumber squared (complex values model absorption).
        f: Source on the reference cell.
        spec: Circle and starting node count.
        n: Cell index or an iterable of cell indices sharing the same solves.
        tol_quad: Doubling stops when every requested cell changes by at most
            ``tol_quad * max(||f||, ||result||)`` in L2.
        Q_max: Largest node count tried.
        P: Chebyshev order of the output fields.
        mset: Optional multiplier set used to check the circle is pole-free.
        auto: If False, use exactly ``spec.Q`` nodes.

    Returns:
        A :class:`ContourResult`; ``result[n]`` is the field on cell n.

    Raises:
        QuadratureError: if ``Q_max`` is reached without convergence.
    """
    ns = [int(n)] if np.isscalar(n) else [int(v) for v in n]
    P = ops.basis.n_cheb if P is None else P
    if mset is not None:
        spec.check_clear(mset)
    fnorm = f.norm()
    if fnorm == 0:
        zero = CellField(np.zeros((P + 1, ops.basis.M + 1), dtype=complex))
        return ContourResult({m: zero.copy() for m in ns}, spec, spec.Q)

    Q = spec.Q
    zs = spec.nodes(Q)
    W = node_fields(ops, k2, f, zs, P)
    cur = {m: _combine(W, zs, spec.center, m) for m in ns}
    history: list[tuple[int, float]] = []
    if not auto:
        return ContourResult({m: CellField(v) for m, v in cur.items()}, spec, Q, history)
    while True:
        if 2 * Q > Q_max:
            raise QuadratureError(
                f"contour quadrature did not converge by Q={Q} (last change {history[-1][1] if history else np.nan:.3e})",
                history,
            )
        new_z = spec.center + spec.radius * np.exp(2j * np.pi * (2 * np.arange(Q) + 1) / (2 * Q))
        W_new = node_fields(ops, k2, f, new_z, P)
        zs2 = np.empty(2 * Q, dtype=complex)
        zs2[0::2], zs2[1::2] = zs, new_z
        W2 = np.empty((2 * Q,) + W.shape[1:], dtype=complex)
        W2[0::2], W2[1::2] = W, W_new
        nxt = {m: _combine(W2, zs2, spec.center, m) for m in ns}
        change = 0.0
        ok = True
        for m in ns:
            d = CellField(nxt[m] - cur[m]).l2_norm()
            size = CellField(nxt[m]).l2_norm()
            change = max(change, d)
            if d > tol_quad * max(fnorm, size):
                ok = False
        Q, zs, W, cur = 2 * Q, zs2, W2, nxt
        history.append((Q, change))
        if ok:
            break
    return ContourResult({m: CellField(v) for m, v in cur.items()}, spec, Q, history)


def _jump_at(ops: CellOperatorSet, k2: complex, f: Field, s: float, x: np.ndarray) -> float:
    jv = ops.basis.j_values
    W = []
    for lam in (np.log(s) + 1j * np.pi, np.log(s) - 1j * np.pi):
        v = scipy.linalg.solve(ops.pencil(lam, k2), project_weighted(f, lam)).reshape(ops.basis.shape)
        W.append(np.exp(np.outer(x, lam + 2j * np.pi * jv)) @ v)
    return CellField(W[0] - W[1]).l2_norm()


def branch_jump(ops: CellOperatorSet, k2: complex, f: Field, radius: float, P: int | None = None) -> float:
    """L2 jump of w(z, .) across the negative real axis at z = -radius.

    The continuous w is analytic across the cut; the truncated basis is not
    invariant under lambda -> lambda + 2 pi i, so a small jump remains.
    """
    P = ops.basis.n_cheb if P is None else P
    return _jump_at(ops, k2, f, radius, cheb_data(P)[0])


def cut_floor(ops: CellOperatorSet, k2: complex, f: Field, r_in: float, r_out: float, n: int, P: int | None = None) -> float:
    """Estimate of int_{r_in}^{r_out} jump(s) s^(n-1) ds.

    This is the discrepancy between a contour that crosses the cut and the sum
    of residues in the annulus r_in < |z| < r_out, caused by the branch jump.
    """
    P = ops.basis.n_cheb if P is None else P
    x = cheb_data(P)[0]
    lo, hi = sorted((r_in, r_out))
    num = max(4, int(3 * np.log10(hi / lo)) + 1)
    s = np.geomspace(lo, hi, num)
    vals = np.array([_jump_at(ops, k2, f, si, x) * si ** n for si in s])
    return float(np.trapezoid(vals, np.log(s)))


def default_delta(z_pole: complex, mset) -> float:
    """Half the distance to the nearest other multiplier, capped at |z_pole| / 2."""
    others = [abs(m.z - z_pole) for m in mset.items if abs(m.z - z_pole) > 1e-12 * max(1.0, abs(z_pole))]
    d = 0.5 * min(others) if others else 0.5 * abs(z_pole)
    return min(d, 0.5 * abs(z_pole))


def residue_at_pole(
    ops: CellOperatorSet,
    k2: complex,
    f: Field,
    z_pole: complex,
    delta: float | None = None,
    n=1,
    mset=None,
    check_cluster: bool = True,
    **kwargs,
) -> ContourResult:
    """Residue of w(z, .) z^(n-1) at ``z_pole`` by a small-circle quadrature.

    Raises:
        ValueError: "pole cluster; shrink δ" when ``mset`` has two or more
            multipliers inside the disc.
    """
    if delta is None:
        if mset is None:
            raise ValueError("delta or a multiplier set is required")
        delta = default_delta(z_pole, mset)
    if mset is not None and check_cluster:
        inside = {complex(m.z) for m in mset.items if abs(m.z - z_pole) < delta}
        if len(inside) > 1:
            raise ValueError("pole cluster; shrink δ")
    spec = ContourSpec(complex(z_pole), float(delta), kwargs.pop("Q", 64))
    return contour_integral(ops, k2, f, spec, n, mset=mset if check_cluster else None, **kwargs)


def propagating_residue(
    mode: Field,
    dmu: float,
    f: Field,
    z_plus: complex,
    n: int,
    P: int | None = None,
) -> CellField:
    """Closed-form residue of w(z, .) z^(n-1) at a simple unit multiplier.

    For a q-normalized Bloch mode psi = z^{x1} v with group velocity mu',

        Res = -i (z+)^n <f, psi> psi / mu',   <f, psi> = int f conj(psi).

    The sign corresponds to the equation Delta u + k^2 q u = f.

    Raises:
        ValueError: "P₀ crossing, LAP invalid" when mu' = 0.
    """
    if dmu == 0:
        raise ValueError("P₀ crossing, LAP invalid")
    lam = principal_log(z_plus)
    coef = -1j * complex(z_plus) ** n * pairing_with_mode(f, mode, lam) / dmu
    return CellField.from_quasiperiodic(mode, lam, coef, P)


def propagating_coefficient(mode: Field, dmu: float, f: Field, z_plus: complex) -> complex:
    """Coefficient c with Res = c (z+)^n psi in :func:`propagating_residue`."""
    if dmu == 0:
        raise ValueError("P₀ crossing, LAP invalid")
    return -1j * pairing_with_mode(f, mode, principal_log(z_plus)) / dmu


def vanishing_radius(ell: int) -> float:
    """r_l = exp(-pi sqrt((l^2 + (l+1)^2) / 2))."""
    return float(np.exp(-np.pi * np.sqrt((ell**2 + (ell + 1) ** 2) / 2.0)))


@dataclass
class VanishingRadiusRow:
    ell: int
    radius: float
    norm: float
    envelope: float
    measured_envelope: float
    Q: int


def verify_vanishing_radii(
    ops: CellOperatorSet,
    k2: float,
    f: Field,
    ell_max: int = 3,
    n: int = 2,
    tol_quad: float = 1e-10,
) -> list[VanishingRadiusRow]:
    """L2 norms of (1/2 pi i) oint_{|z|=r_l} w z^(n-1) dz for l = 1..ell_max.

    Each row carries two envelopes.  ``envelope`` is the a-priori bound

        ||f|| r^(n-1) [2 e_l / (pi^2 l - k^2 ||q||) + 2 pi / (2 |log r| e_l - k^2 ||q||)],

    with e_l = (l^2 + (l+1)^2)^(-1/4), and applies once both denominators are
    positive.  ``measured_envelope`` is r^n max_theta ||w(r e^{i theta})||,
    the trapezoid-node estimate of the standard ML bound.

    Raises:
        ValueError: for ``ell_max > 3``, where the pencil is too badly
            conditioned at double precision, or ``n < 1``.
    """
    if ell_max > 3:
        raise ValueError("radii beyond l = 3 are not resolvable at double precision; smallest usable r is r_3")
    if n < 1:
        raise ValueError("vanishing radii are used with n >= 1")
    qinf = ops.q_max
    fn = f.norm()
    rows = []
    for ell in range(1, ell_max + 1):
        r = vanishing_radius(ell)
        spec = ContourSpec(0.0, r, 64)
        res = contour_integral(ops, k2, f, spec, n, tol_quad=tol_quad)
        e = (ell**2 + (ell + 1) ** 2) ** -0.25
        d1 = np.pi**2 * ell - k2 * qinf
        d2 = 2 * abs(np.log(r)) * e - k2 * qinf
        env = np.inf if d1 <= 0 or d2 <= 0 else fn * r ** (n - 1) * (2 * e / d1 + 2 * np.pi / d2)
        zs = spec.nodes(res.Q)
        W = node_fields(ops, k2, f, zs, ops.basis.n_cheb)
        wmax = max(CellField(W[q]).l2_norm() for q in range(len(zs)))
        rows.append(VanishingRadiusRow(ell, r, res[n].l2_norm(), float(env), float(r**n * wmax), res.Q))
    return rows
