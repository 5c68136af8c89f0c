"""Floquet multipliers from the quadratic eigenvalue problem in lambda = log z.

A z-quasi-periodic solution u = z^{x1} v with periodic v exists exactly when

    T(lambda) v = (lambda^2 I + 2 lambda D + L + k^2 Qm) v = 0

has a nontrivial solution.  The pencil is linearized in companion form and
solved densely.  Eigenvalues lambda and lambda + 2 pi i s describe the same
multiplier, so only principal-strip representatives are kept and the
resulting z values are deduplicated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg

from .cell import CellOperatorSet, Field, principal_log
from .dispersion import rotate_to_branches


class MultiplierClass(str, Enum):
    UNIT_RIGHT = "unit_right"
    UNIT_LEFT = "unit_left"
    EVANESCENT = "evanescent"
    GROWING = "growing"


@dataclass(eq=False)
class Multiplier:
    """One Floquet multiplier with its Bloch mode (periodic part)."""

    z: complex
    lam: complex
    cls: MultiplierClass
    mode: Field
    group_velocity: float | None = None
    mult_estimate: int = 1
    residual: float = 0.0

    @property
    def is_unit(self) -> bool:
        return self.cls in (MultiplierClass.UNIT_RIGHT, MultiplierClass.UNIT_LEFT)

    @property
    def rightward(self) -> bool:
        """Member of S_+ (unit_right or evanescent)."""
        return self.cls in (MultiplierClass.UNIT_RIGHT, MultiplierClass.EVANESCENT)

    def to_json(self) -> dict:
        return {
            "re": float(np.real(self.z)),
            "im": float(np.imag(self.z)),
            "class": self.cls.value,
            "group_velocity": self.group_velocity,
            "mult_estimate": self.mult_estimate,
            "residual": self.residual,
        }


@dataclass(eq=False)
class MultiplierSet:
    k2: float
    items: list[Multiplier]
    tau: float
    lambda_cap: float
    tol_unit: float = 1e-6
    tol_flat: float = 1e-6
    assumption1_ok: bool = True
    p0_items: list[Multiplier] = field(default_factory=list)

    def by_class(self, cls: MultiplierClass) -> list[Multiplier]:
        return [m for m in self.items if m.cls == cls]

    @property
    def unit(self) -> list[Multiplier]:
        return [m for m in self.items if m.is_unit]

    @property
    def s_plus(self) -> list[Multiplier]:
        """S_+ sorted by |z| descending (propagating first)."""
        return sorted((m for m in self.items if m.rightward), key=lambda m: (-abs(m.z), np.angle(m.z)))

    @property
    def s_minus(self) -> list[Multiplier]:
        """S_- sorted by |z| ascending."""
        return sorted(
            (m for m in self.items if m.cls in (MultiplierClass.UNIT_LEFT, MultiplierClass.GROWING)),
            key=lambda m: (abs(m.z), np.angle(m.z)),
        )

    @property
    def zs(self) -> np.ndarray:
        return np.array([m.z for m in self.items], dtype=complex)

    def to_json(self) -> dict:
        return {
            "k2": self.k2,
            "tau": self.tau,
            "assumption1_ok": self.assumption1_ok,
            "lambda_cap": self.lambda_cap,
            "items": [m.to_json() for m in self.items],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _classify(z: complex, gv: float | None, tol_unit: float) -> MultiplierClass:
    r = abs(z)
    if abs(r - 1.0) <= tol_unit:
        return MultiplierClass.UNIT_RIGHT if (gv is not None and gv > 0) else MultiplierClass.UNIT_LEFT
    return MultiplierClass.EVANESCENT if r < 1.0 else MultiplierClass.GROWING


def _null_space(T: np.ndarray, rel_tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Right singular vectors whose singular values are below rel_tol * sigma_max."""
    _, s, Vh = np.linalg.svd(T)
    thresh = rel_tol * s[0]
    k = max(1, int(np.sum(s <= thresh)))
    return Vh[-k:].conj().T, s[::-1]


def bloch_mode(
    ops: CellOperatorSet,
    z: complex,
    k2: complex,
    tol_null: float = 1e-8,
    return_sigma: bool = False,
):
    """Periodic part v of the Bloch wave at multiplier ``z``.

    v is the right singular vector of T(log z) belonging to the smallest
    singular value, normalized so that (v, v)_q = 1 with its largest
    coefficient real and positive.

    Raises:
        ValueError: if the smallest singular value exceeds ``tol_null * ||T||``.
    """
    lam = principal_log(z)
    T = ops.pencil(lam, k2)
    _, s, Vh = np.linalg.svd(T)
    if s[-1] > tol_null * s[0]:
        raise ValueError(
            f"z is not a multiplier at this accuracy (sigma_min/||T|| = {s[-1] / s[0]:.3e})"
        )
    v = Vh[-1].conj()
    v = _normalize_q(ops, v)
    mode = Field(v, ops.basis)
    return (mode, float(s[-1])) if return_sigma else mode


def _normalize_q(ops: CellOperatorSet, v: np.ndarray) -> np.ndarray:
    nq = np.sqrt(np.real(np.vdot(v, ops.Qm @ v)))
    v = v / nq
    i = int(np.argmax(np.abs(v)))
    return v * (abs(v[i]) / v[i])


def unit_modes(ops: CellOperatorSet, alpha: float, k2: float, tol_null: float = 1e-8):
    """q-orthonormal null vectors of T(i alpha) with Hellmann-Feynman slopes.

    If the null space is more than one-dimensional (several curves cross k^2
    at the same alpha) the slope matrix is diagonalized inside it.
    """
    T = ops.pencil(1j * alpha, k2)
    V, _ = _null_space(T, tol_null)
    # q-orthonormalize
    G = V.conj().T @ ops.Qm @ V
    Lc = np.linalg.cholesky(G)
    V = V @ np.linalg.inv(Lc).conj().T
    mus = np.full(V.shape[1], float(np.real(k2)))
    bd = rotate_to_branches(ops, alpha, mus, V, tol_cluster=np.inf)
    vecs = [_normalize_q(ops, bd.vectors[:, i]) for i in range(V.shape[1])]
    return list(zip(bd.dmus, vecs))


def floquet_multipliers(
    ops: CellOperatorSet,
    k2: float,
    lambda_cap: float | None = None,
    tol_unit: float = 1e-6,
    tol_flat: float = 1e-6,
    tol_dedup: float = 1e-7,
    tol_null: float = 1e-8,
    select: bool = True,
) -> MultiplierSet:
    """All Floquet multipliers whose |log|z|| lies inside the trust region.

    Args:
        ops: Assembled cell operators.
        k2: Real wavenumber squared.
        lambda_cap: Keep eigenvalues with |Re lambda| <= lambda_cap; defaults to
            0.8 * 2 pi J.
        tol_unit: Unit-circle membership tolerance on |z|.
        tol_flat: Group velocities at or below this magnitude mark a P0 crossing.
        tol_dedup: Relative tolerance for merging aliased z values.
        tol_null: Null-space tolerance used when extracting modes.
        select: Also choose the annulus parameter tau.

    Returns:
        The classified multiplier set.  ``assumption1_ok`` is False when a
        unit multiplier has a flat group velocity.
    """
    J = ops.basis.J
    if lambda_cap is None:
        lambda_cap = 0.8 * 2 * np.pi * J
    N = ops.N
    C = np.zeros((2 * N, 2 * N), dtype=complex)
    C[:N, N:] = np.eye(N)
    C[N:, :N] = -(np.diag(ops.L_diag) + k2 * ops.Qm)
    C[N:, N:] = -np.diag(2.0 * ops.D_diag)
    lam_all = scipy.linalg.eigvals(C, overwrite_a=True, check_finite=False)

    keep = (np.abs(lam_all.real) <= lambda_cap) & (lam_all.imag > -np.pi - 1e-9) & (lam_all.imag <= np.pi + 1e-9)
    lams = lam_all[keep]
    zs = np.exp(lams)

    # cluster by relative distance in z
    order = np.argsort(-np.abs(zs))
    clusters: list[list[int]] = []
    for i in order:
        for cl in clusters:
            zc = zs[cl[0]]
            if abs(zs[i] - zc) <= tol_dedup * max(abs(zc), 1e-300):
                cl.append(i)
                break
        else:
            clusters.append([i])

    items: list[Multiplier] = []
    p0: list[Multiplier] = []
    for cl in clusters:
        z = complex(np.mean(zs[cl]))
        mult = len(cl)
        if abs(abs(z) - 1.0) <= tol_unit:
            z = z / abs(z)
            alpha = float(np.angle(z))
            lam = complex(0.0, alpha)
            for gv, v in unit_modes(ops, alpha, k2, tol_null):
                T = ops.pencil(lam, k2)
                res = float(np.linalg.norm(T @ v) / np.linalg.norm(T, 2))
                m = Multiplier(z, lam, _classify(z, gv, tol_unit), Field(v, ops.basis), float(gv), mult, res)
                items.append(m)
                if abs(gv) <= tol_flat:
                    p0.append(m)
        else:
            lam = principal_log(z)
            T = ops.pencil(lam, k2)
            V, _ = _null_space(T, tol_null)
            for c in range(V.shape[1]):
                v = _normalize_q(ops, V[:, c])
                res = float(np.linalg.norm(T @ v) / np.linalg.norm(T, 2))
                items.append(Multiplier(z, lam, _classify(z, None, tol_unit), Field(v, ops.basis), None, mult, res))

    items.sort(key=lambda m: (-abs(m.z), np.angle(m.z)))
    mset = MultiplierSet(float(k2), items, np.nan, float(lambda_cap), tol_unit, tol_flat, not p0, p0)
    if select:
        mset.tau = select_tau(mset)
    return mset


def select_tau(mset: MultiplierSet, guard: float = 1e-6) -> float:
    """Annulus parameter tau with exp(-tau) the geometric mean of max_RS |z| and 1.

    Defaults to log 10 when RS is empty.

    Raises:
        ValueError: if a multiplier lies within ``guard`` of either circle
            |z| = exp(-tau) or |z| = exp(tau).
    """
    rs = [abs(m.z) for m in mset.items if m.cls == MultiplierClass.EVANESCENT]
    tau = float(-0.5 * np.log(max(rs))) if rs else float(np.log(10.0))
    for r in (np.exp(-tau), np.exp(tau)):
        for m in mset.items:
            if abs(abs(m.z) - r) <= guard * max(1.0, r):
                raise ValueError("no pole-free annulus at requested tolerance")
    return tau


@dataclass
class ReciprocityReport:
    pairs: list[tuple[complex, complex, float]]
    unpaired: list[complex]
    truncation_artifacts: list[complex]

    @property
    def max_error(self) -> float:
        return max((p[2] for p in self.pairs), default=0.0)

    @property
    def ok(self) -> bool:
        return not self.unpaired


def reciprocity_check(mset: MultiplierSet, tol: float = 1e-7, edge_margin: float = 1.0) -> ReciprocityReport:
    """Pair every multiplier z with one within relative ``tol`` of 1/z.

    Unpaired multipliers with |log|z|| within ``edge_margin`` of the trust
    boundary are reported as truncation artifacts rather than failures.
    """
    zs = mset.zs
    pairs, unpaired, artifacts = [], [], []
    for z in zs:
        target = 1.0 / z
        if zs.size == 0:
            break
        d = np.abs(zs - target) / abs(target)
        j = int(np.argmin(d))
        if d[j] <= tol:
            pairs.append((complex(z), complex(zs[j]), float(d[j])))
        elif abs(np.log(abs(z))) >= mset.lambda_cap - edge_margin:
            artifacts.append(complex(z))
        else:
            unpaired.append(complex(z))
    return ReciprocityReport(pairs, unpaired, artifacts)


def multiplier_set_from_json(obj) -> dict:
    """Parse a serialized MultiplierSet into plain data (modes are not stored)."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    out = dict(obj)
    out["items"] = [
        {**it, "z": complex(it["re"], it["im"]), "class": MultiplierClass(it["class"])} for it in obj["items"]
    ]
    return out
