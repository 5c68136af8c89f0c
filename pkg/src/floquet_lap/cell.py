"""Spectral Galerkin discretization of the unit cell (0, 1)^2.

Periodic functions on the cell are expanded in the orthonormal basis

    e_{jm}(x) = exp(2 pi i j x1) * c_m * cos(pi m x2),   c_0 = 1, c_m = sqrt(2),

with ``-J <= j <= J`` and ``0 <= m <= M``.  In this basis the Laplacian and
d/dx1 are diagonal, and multiplication by the refractive index q is a dense
Hermitian matrix assembled by tensor quadrature.

Two field containers live here:

* :class:`Field` holds Galerkin coefficients of a *periodic* function (sources,
  periodic parts of Bloch modes, cell-solver output).
* :class:`CellField` holds a physical field restricted to one cell in
  cell-local coordinates.  Such fields are not periodic in x1, so they are
  stored as values on Chebyshev-Lobatto nodes in x1 times orthonormal cosine
  coefficients in x2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.fft

TWO_PI = 2.0 * np.pi


def cosine_norm(m):
    """Normalization constant c_m of the orthonormal cosine basis."""
    return np.where(np.asarray(m) == 0, 1.0, np.sqrt(2.0))


@dataclass(frozen=True)
class SpectralBasis:
    """Index bookkeeping for the Fourier(x1) x cosine(x2) basis.

    Coefficient vectors are ordered with the Fourier index slowest, i.e. the
    vector reshapes to an array of shape ``(2J+1, M+1)``.
    """

    J: int
    M: int

    def __post_init__(self):
        if int(self.J) < 1 or int(self.M) < 1:
            raise ValueError("J and M must both be >= 1")

    @property
    def N(self) -> int:
        return (2 * self.J + 1) * (self.M + 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (2 * self.J + 1, self.M + 1)

    @cached_property
    def j_values(self) -> np.ndarray:
        return np.arange(-self.J, self.J + 1)

    @cached_property
    def m_values(self) -> np.ndarray:
        return np.arange(self.M + 1)

    @cached_property
    def js(self) -> np.ndarray:
        """Fourier index of every basis function, length N."""
        return np.repeat(self.j_values, self.M + 1)

    @cached_property
    def ms(self) -> np.ndarray:
        """Cosine index of every basis function, length N."""
        return np.tile(self.m_values, 2 * self.J + 1)

    def index(self, j: int, m: int) -> int:
        if not (-self.J <= j <= self.J and 0 <= m <= self.M):
            raise IndexError(f"(j={j}, m={m}) outside basis J={self.J}, M={self.M}")
        return (j + self.J) * (self.M + 1) + m

    def pair(self, i: int) -> tuple[int, int]:
        if not 0 <= i < self.N:
            raise IndexError(f"index {i} outside basis of size {self.N}")
        jj, m = divmod(int(i), self.M + 1)
        return jj - self.J, m

    @property
    def n_cheb(self) -> int:
        """Default Chebyshev order used for :class:`CellField` in x1."""
        return max(32, 6 * self.J + 16)

    def unit(self, j: int, m: int) -> "Field":
        c = np.zeros(self.N, dtype=complex)
        c[self.index(j, m)] = 1.0
        return Field(c, self)

    def zeros(self) -> "Field":
        return Field(np.zeros(self.N, dtype=complex), self)


def build_basis(J: int, M: int) -> SpectralBasis:
    """Return the Galerkin basis with Fourier cutoff J and cosine cutoff M."""
    if J < 1 or M < 1:
        raise ValueError(
            "J and M must both be >= 1 (J=0 cannot represent d/dx1, M=0 has no Neumann modes)"
        )
    return SpectralBasis(int(J), int(M))


@dataclass(frozen=True, eq=False)
class Field:
    """Galerkin coefficients of a periodic function on the cell."""

    coeffs: np.ndarray
    basis: SpectralBasis

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex).reshape(-1)
        if c.size != self.basis.N:
            raise ValueError(f"expected {self.basis.N} coefficients, got {c.size}")
        object.__setattr__(self, "coeffs", c)

    @property
    def grid(self) -> np.ndarray:
        """Coefficients reshaped to ``(2J+1, M+1)``."""
        return self.coeffs.reshape(self.basis.shape)

    def norm(self) -> float:
        """L2(cell) norm, equal to the Euclidean norm of the coefficients."""
        return float(np.linalg.norm(self.coeffs))

    def q_norm(self, ops: "CellOperatorSet") -> float:
        return float(np.sqrt(max(np.real(np.vdot(self.coeffs, ops.Qm @ self.coeffs)), 0.0)))

    def __add__(self, other: "Field") -> "Field":
        return Field(self.coeffs + other.coeffs, self.basis)

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.coeffs - other.coeffs, self.basis)

    def __mul__(self, s) -> "Field":
        return Field(self.coeffs * s, self.basis)

    __rmul__ = __mul__


def inner(u: Field, v: Field) -> complex:
    """Plain L2 inner product (u, v) = int u conj(v)."""
    return complex(np.vdot(v.coeffs, u.coeffs))


def q_inner(ops: "CellOperatorSet", u: Field, v: Field) -> complex:
    """q-weighted inner product int q u conj(v)."""
    return complex(np.vdot(v.coeffs, ops.Qm @ u.coeffs))


# ---------------------------------------------------------------------------
# Media
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MediumSpec:
    """Real, x1-periodic refractive index q(x1, x2) on the cell.

    All kinds are stored internally as a Fourier-cosine expansion
    ``q = sum_{j,m} C[j,m] exp(2 pi i j x1) cos(pi m x2)``.
    """

    kind: str
    terms: tuple  # ((j, m, complex), ...)
    c0: float = 1e-8
    payload: dict = field(default_factory=dict)

    @classmethod
    def constant(cls, value: float = 1.0, c0: float = 1e-8) -> "MediumSpec":
        return cls("constant", ((0, 0, complex(value)),), c0, {"value": float(value)})

    @classmethod
    def fourier_cosine(cls, coeffs: Iterable[Sequence[float]], c0: float = 1e-8) -> "MediumSpec":
        terms = []
        raw = []
        for row in coeffs:
            j, m, re = int(row[0]), int(row[1]), float(row[2])
            im = float(row[3]) if len(row) > 3 else 0.0
            if m < 0:
                raise ValueError("cosine index must be >= 0")
            terms.append((j, m, complex(re, im)))
            raw.append([j, m, re, im])
        spec = cls("fourier_cosine", tuple(terms), c0, {"coeffs": raw})
        spec._check_real()
        return spec

    @classmethod
    def grid(cls, nx: int, ny: int, values, c0: float = 1e-8) -> "MediumSpec":
        """Samples at x1 = i/nx (periodic), x2 = (k + 1/2)/ny, x1 index slowest.

        Interpolated trigonometrically in x1 and by a cosine series in x2.
        """
        vals = np.asarray(values, dtype=float).reshape(nx, ny)
        fx = np.fft.fft(vals, axis=0) / nx
        cx = scipy.fft.dct(fx.real, type=2, axis=1) + 1j * scipy.fft.dct(fx.imag, type=2, axis=1)
        cx /= ny
        cx[:, 0] /= 2.0
        freqs = np.fft.fftfreq(nx, d=1.0 / nx).astype(int)
        terms = []
        for a, j in enumerate(freqs):
            for m in range(ny):
                c = cx[a, m]
                if nx % 2 == 0 and abs(j) == nx // 2:
                    # split the Nyquist term symmetrically to keep q real
                    terms.append((nx // 2, m, c / 2))
                    terms.append((-nx // 2, m, c / 2))
                elif abs(c) > 0:
                    terms.append((int(j), m, c))
        return cls("grid", tuple(terms), c0, {"nx": nx, "ny": ny, "values": vals.ravel().tolist()})

    @classmethod
    def from_json(cls, obj) -> "MediumSpec":
        if isinstance(obj, str):
            obj = json.loads(obj)
        kind = obj.get("kind")
        c0 = float(obj.get("c0", 1e-8))
        if kind == "constant":
            return cls.constant(float(obj["value"]), c0)
        if kind in ("fourier_cosine", "fourier_cosine_coefficients"):
            return cls.fourier_cosine(obj["coeffs"], c0)
        if kind in ("grid", "grid_samples"):
            return cls.grid(int(obj["nx"]), int(obj["ny"]), obj["values"], c0)
        raise ValueError(f"unknown medium kind {kind!r}")

    def to_json(self) -> dict:
        out = {"kind": self.kind, "c0": self.c0}
        out.update(self.payload)
        return out

    @property
    def bandwidth(self) -> tuple[int, int]:
        jmax = max(abs(t[0]) for t in self.terms)
        mmax = max(t[1] for t in self.terms)
        return jmax, mmax

    def __call__(self, x1, x2) -> np.ndarray:
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        out = np.zeros(np.broadcast(x1, x2).shape, dtype=complex)
        for j, m, c in self.terms:
            out = out + c * np.exp(1j * TWO_PI * j * x1) * np.cos(np.pi * m * x2)
        return out.real

    def _check_real(self):
        jb, mb = self.bandwidth
        x1 = np.arange(4 * jb + 4) / (4 * jb + 4)
        x2 = (np.arange(2 * mb + 4) + 0.5) / (2 * mb + 4)
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        out = np.zeros(X1.shape, dtype=complex)
        for j, m, c in self.terms:
            out = out + c * np.exp(1j * TWO_PI * j * X1) * np.cos(np.pi * m * X2)
        if np.max(np.abs(out.imag)) > 1e-12 * max(1.0, np.max(np.abs(out.real))):
            raise ValueError("q must be real-valued: coefficients need C[-j,m] = conj(C[j,m])")


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CellOperatorSet:
    """Galerkin matrices of the cell operator pieces.

    ``L_diag`` and ``D_diag`` hold the diagonals of the Laplacian and d/dx1;
    ``Qm`` is the dense Hermitian matrix of multiplication by q.
    """

    basis: SpectralBasis
    L_diag: np.ndarray
    D_diag: np.ndarray
    Qm: np.ndarray
    medium: MediumSpec
    quad_grid: tuple[int, int]
    q_min: float
    q_max: float

    @property
    def L(self) -> np.ndarray:
        return np.diag(self.L_diag)

    @property
    def D(self) -> np.ndarray:
        return np.diag(self.D_diag)

    @property
    def N(self) -> int:
        return self.basis.N

    def pencil(self, lam: complex, k2: complex) -> np.ndarray:
        """T(lam) = L + 2 lam D + lam^2 I + k2 Qm."""
        T = k2 * self.Qm
        T[np.diag_indices_from(T)] += self.L_diag + 2.0 * lam * self.D_diag + lam * lam
        return T

    def pencil_derivative(self, lam: complex) -> np.ndarray:
        """Diagonal of dT/dlam = 2 D + 2 lam I."""
        return 2.0 * self.D_diag + 2.0 * lam

    def alpha_operator(self, alpha: float) -> np.ndarray:
        """A(alpha) = -(L + 2 i alpha D - alpha^2 I); diagonal for any q."""
        return np.real(-(self.L_diag + 2j * alpha * self.D_diag - alpha * alpha))

    def alpha_operator_derivative(self, alpha: float) -> np.ndarray:
        return np.real(-(2j * self.D_diag - 2.0 * alpha))


def assemble_operators(
    basis: SpectralBasis, q: MediumSpec, quad_grid: tuple[int, int] | None = None
) -> CellOperatorSet:
    """Assemble L, D and the q-multiplication matrix on ``basis``.

    The q matrix is computed by a periodic trapezoid rule in x1 and a midpoint
    rule in x2, both of which are exact for the band-limited integrands once
    the grid exceeds the combined bandwidth of the basis and of q.
    """
    J, M = basis.J, basis.M
    jb, mb = q.bandwidth
    if quad_grid is None:
        quad_grid = (4 * (2 * J + 1) + 2 * jb, 4 * (M + 1) + mb)
    K1, K2 = (int(quad_grid[0]), int(quad_grid[1]))
    if K1 <= 2 * J + jb or 2 * K2 <= 2 * M + mb:
        raise ValueError("quadrature grid too coarse for basis and medium bandwidth")

    x1 = np.arange(K1) / K1
    x2 = (np.arange(K2) + 0.5) / K2
    qv = q(x1[:, None], x2[None, :])
    q_min = float(qv.min())
    q_max = float(qv.max())
    if q_min < q.c0:
        raise ValueError(f"medium violates positivity floor: min q = {q_min:g} < c0 = {q.c0:g}")

    m = basis.m_values
    phi = cosine_norm(m)[None, :] * np.cos(np.pi * np.outer(x2, m))  # (K2, M+1)
    # G[i, m, m'] = (1/K2) sum_k q(x1_i, x2_k) phi_m(x2_k) phi_m'(x2_k)
    G = np.einsum("ik,km,kn->imn", qv, phi, phi) / K2
    # Fourier coefficients of G in x1 at offsets d = j - j' in [-2J, 2J]
    d = np.arange(-2 * J, 2 * J + 1)
    Ed = np.exp(-1j * TWO_PI * np.outer(d, x1)) / K1
    Ghat = np.einsum("di,imn->dmn", Ed, G)

    jj = basis.j_values
    diff = jj[:, None] - jj[None, :] + 2 * J  # index into d
    Q4 = Ghat[diff]  # (2J+1, 2J+1, M+1, M+1) -> [j, j', m, m']
    Qm = Q4.transpose(0, 2, 1, 3).reshape(basis.N, basis.N)
    Qm = 0.5 * (Qm + Qm.conj().T)

    js, ms = basis.js, basis.ms
    L_diag = -(4 * np.pi**2 * js**2 + np.pi**2 * ms**2).astype(complex)
    D_diag = (1j * TWO_PI * js).astype(complex)
    return CellOperatorSet(basis, L_diag, D_diag, Qm, q, (K1, K2), q_min, q_max)


# ---------------------------------------------------------------------------
# Evaluation and projections
# ---------------------------------------------------------------------------


def _points(points) -> tuple[np.ndarray, np.ndarray]:
    p = np.atleast_2d(np.asarray(points, dtype=float))
    return p[:, 0], p[:, 1]


def evaluate_field(u: Field, points) -> np.ndarray:
    """Evaluate sum_{jm} u_{jm} e_{jm}(x) at each point (x1, x2)."""
    b = u.basis
    x1, x2 = _points(points)
    E1 = np.exp(1j * TWO_PI * np.outer(x1, b.j_values))
    C2 = cosine_norm(b.m_values)[None, :] * np.cos(np.pi * np.outer(x2, b.m_values))
    return np.einsum("pj,jm,pm->p", E1, u.grid, C2)


def principal_log(z: complex) -> complex:
    if z == 0:
        raise ValueError("branch point: z = 0")
    return complex(np.log(complex(z)))


def evaluate_quasiperiodic(v: Field, z: complex, n: int, points) -> np.ndarray:
    """Evaluate z^(x1+n) v(x), the z-quasi-periodic extension of v to cell n."""
    lam = principal_log(z)
    x1, _ = _points(points)
    return np.exp((x1 + n) * lam) * evaluate_field(v, points)


def _phi(s: np.ndarray) -> np.ndarray:
    """int_0^1 exp(-s t) dt, entire in s."""
    s = np.asarray(s, dtype=complex)
    out = np.ones_like(s)
    nz = s != 0
    out[nz] = -np.expm1(-s[nz]) / s[nz]
    return out


def weighted_projection_matrix(basis: SpectralBasis, lam: complex) -> np.ndarray:
    """Matrix P with (P @ F)[p] = int_0^1 exp(-lam x1) F(x1) exp(-2 pi i p x1) dx1.

    ``F`` holds Fourier coefficients (index j) of a periodic function.  The
    integrand is not periodic, so the projection is done with exact integrals
    of exponentials instead of a periodic quadrature.
    """
    J = basis.J
    d = np.arange(-2 * J, 2 * J + 1)
    phi = _phi(lam + 1j * TWO_PI * d)
    jj = basis.j_values
    return phi[jj[:, None] - jj[None, :] + 2 * J]


def project_weighted(f: Field, lam: complex) -> np.ndarray:
    """Coefficient vector of exp(-lam x1) f(x) in the periodic basis."""
    P = weighted_projection_matrix(f.basis, lam)
    return (P @ f.grid).reshape(-1)


def pairing_with_mode(f: Field, mode: Field, lam: complex) -> complex:
    """int_cell f(x) conj(exp(lam x1) v(x)) dx for a quasi-periodic mode."""
    return complex(np.vdot(mode.coeffs, project_weighted(f, -np.conj(lam))))


# ---------------------------------------------------------------------------
# Physical fields on one cell
# ---------------------------------------------------------------------------


def _cheb_nodes(P: int) -> np.ndarray:
    return 0.5 * (1.0 - np.cos(np.pi * np.arange(P + 1) / P))


def _cheb_diff(P: int) -> np.ndarray:
    """Differentiation matrix on the x in [0, 1] Chebyshev-Lobatto nodes."""
    t = np.cos(np.pi * np.arange(P + 1) / P)
    c = np.ones(P + 1)
    c[0] = c[-1] = 2.0
    c = c * (-1.0) ** np.arange(P + 1)
    X = np.tile(t, (P + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(P + 1))
    D = D - np.diag(D.sum(axis=1))
    return -2.0 * D


def _clenshaw_curtis(P: int) -> np.ndarray:
    theta = np.pi * np.arange(P + 1) / P
    w = np.zeros(P + 1)
    ii = np.arange(1, P)
    v = np.ones(P - 1)
    if P % 2 == 0:
        w[0] = w[P] = 1.0 / (P**2 - 1)
        for k in range(1, P // 2):
            v -= 2.0 * np.cos(2 * k * theta[ii]) / (4 * k * k - 1)
        v -= np.cos(P * theta[ii]) / (P**2 - 1)
    else:
        w[0] = w[P] = 1.0 / P**2
        for k in range(1, (P - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[ii]) / (4 * k * k - 1)
    w[ii] = 2.0 * v / P
    return 0.5 * w


_CHEB_CACHE: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def cheb_data(P: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(nodes, differentiation matrix, quadrature weights) on [0, 1]."""
    if P not in _CHEB_CACHE:
        _CHEB_CACHE[P] = (_cheb_nodes(P), _cheb_diff(P), _clenshaw_curtis(P))
    return _CHEB_CACHE[P]


@dataclass(eq=False)
class CellField:
    """A field on one cell: values at x1 Chebyshev-Lobatto nodes x cosine modes.

    ``values[i, m]`` is the coefficient of c_m cos(pi m x2) at x1 = nodes[i],
    nodes ascending from 0 to 1.
    """

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim != 2 or self.values.shape[0] < 3:
            raise ValueError("CellField values must have shape (P+1, M+1)")

    @property
    def P(self) -> int:
        return self.values.shape[0] - 1

    @property
    def M(self) -> int:
        return self.values.shape[1] - 1

    @property
    def nodes(self) -> np.ndarray:
        return cheb_data(self.P)[0]

    @classmethod
    def zeros(cls, basis: SpectralBasis, P: int | None = None) -> "CellField":
        P = basis.n_cheb if P is None else P
        return cls(np.zeros((P + 1, basis.M + 1), dtype=complex))

    @classmethod
    def from_quasiperiodic(
        cls, v: Field, lam: complex, scale: complex = 1.0, P: int | None = None
    ) -> "CellField":
        """Sample scale * exp(lam x1) v(x) on the cell."""
        b = v.basis
        P = b.n_cheb if P is None else P
        x = cheb_data(P)[0]
        E = np.exp(np.outer(x, lam + 1j * TWO_PI * b.j_values))
        return cls(scale * (E @ v.grid))

    @classmethod
    def from_field(cls, u: Field, P: int | None = None) -> "CellField":
        return cls.from_quasiperiodic(u, 0.0, 1.0, P)

    def copy(self) -> "CellField":
        return CellField(self.values.copy())

    def __add__(self, other: "CellField") -> "CellField":
        return CellField(self.values + other.values)

    def __sub__(self, other: "CellField") -> "CellField":
        return CellField(self.values - other.values)

    def __neg__(self) -> "CellField":
        return CellField(-self.values)

    def __mul__(self, s) -> "CellField":
        return CellField(self.values * s)

    __rmul__ = __mul__

    def dx1(self) -> "CellField":
        return CellField(cheb_data(self.P)[1] @ self.values)

    def l2_norm(self) -> float:
        w = cheb_data(self.P)[2]
        return float(np.sqrt(np.sum(w[:, None] * np.abs(self.values) ** 2)))

    def h1_norm(self) -> float:
        """(||u||^2 + ||grad u||^2)^(1/2) over the cell."""
        _, D, w = cheb_data(self.P)
        du1 = D @ self.values
        pm2 = (np.pi * np.arange(self.M + 1)) ** 2
        total = np.abs(self.values) ** 2 * (1.0 + pm2)[None, :] + np.abs(du1) ** 2
        return float(np.sqrt(np.sum(w[:, None] * total)))

    def edge(self, side: str) -> tuple[np.ndarray, np.ndarray]:
        """(Dirichlet, Neumann-in-x1) cosine coefficients on the left/right edge."""
        i = {"left": 0, "right": -1}[side]
        D = cheb_data(self.P)[1]
        return self.values[i].copy(), (D[i] @ self.values).copy()

    def evaluate(self, points) -> np.ndarray:
        """Barycentric interpolation in x1, cosine synthesis in x2."""
        x1, x2 = _points(points)
        nodes = self.nodes
        P = self.P
        wb = (-1.0) ** np.arange(P + 1)
        wb[0] *= 0.5
        wb[-1] *= 0.5
        diff = x1[:, None] - nodes[None, :]
        exact = np.isclose(diff, 0.0, atol=1e-15)
        diff[exact] = 1.0
        K = wb[None, :] / diff
        K = K / K.sum(axis=1, keepdims=True)
        rows = np.where(exact.any(axis=1))[0]
        for r in rows:
            K[r] = exact[r].astype(float)
        cols = K @ self.values  # (npts, M+1)
        m = np.arange(self.M + 1)
        C2 = cosine_norm(m)[None, :] * np.cos(np.pi * np.outer(x2, m))
        return np.sum(cols * C2, axis=1)

    def to_dict(self) -> dict:
        return {
            "P": self.P,
            "M": self.M,
            "re": self.values.real.tolist(),
            "im": self.values.imag.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CellField":
        return cls(np.asarray(d["re"]) + 1j * np.asarray(d["im"]))


# ---------------------------------------------------------------------------
# Sources
# ---------------------------------------------------------------------------


def bump_coefficients(power: int) -> np.ndarray:
    """Fourier coefficients (index -power..power) of sin(pi x1)^(2*power)."""
    base = np.array([-0.25, 0.5, -0.25])
    out = np.array([1.0])
    for _ in range(power):
        out = np.convolve(out, base)
    return out


def bump_source(basis: SpectralBasis, profile: dict[int, complex] | Sequence, power: int = 4) -> Field:
    """f = sin(pi x1)^(2 power) * sum_m a_m c_m cos(pi m x2).

    The bump vanishes to order 2*power at the cell edges, so the source is
    smooth across cell boundaries and exactly representable once J >= power.
    """
    if power > basis.J:
        raise ValueError(f"bump power {power} needs J >= {power}")
    if not isinstance(profile, dict):
        profile = {m: a for m, a in enumerate(profile)}
    bc = bump_coefficients(power)
    grid = np.zeros(basis.shape, dtype=complex)
    for m, a in profile.items():
        if m > basis.M:
            raise ValueError(f"transverse index {m} exceeds M={basis.M}")
        grid[basis.J - power : basis.J + power + 1, m] += a * bc
    return Field(grid.reshape(-1), basis)


def random_source(basis: SpectralBasis, rng: np.random.Generator, power: int = 4, n_modes: int | None = None) -> Field:
    n_modes = basis.M + 1 if n_modes is None else min(n_modes, basis.M + 1)
    amps = (rng.standard_normal(n_modes) + 1j * rng.standard_normal(n_modes)) / (1.0 + np.arange(n_modes))
    return bump_source(basis, dict(enumerate(amps)), power)


def field_from_json(basis: SpectralBasis, obj: dict | None) -> Field:
    """Build a source Field from its JSON description.

    ``{"kind": "bump", "power": 4, "profile": [[m, re, im], ...]}`` or
    ``{"kind": "coeffs", "coeffs": [[j, m, re, im], ...]}`` or ``{"kind": "zero"}``.
    """
    if obj is None or obj.get("kind", "zero") == "zero":
        return basis.zeros()
    kind = obj["kind"]
    if kind == "bump":
        profile = {}
        for row in obj.get("profile", []):
            m = int(row[0])
            profile[m] = complex(float(row[1]), float(row[2]) if len(row) > 2 else 0.0)
        return bump_source(basis, profile, int(obj.get("power", 4)))
    if kind == "coeffs":
        c = np.zeros(basis.N, dtype=complex)
        for row in obj["coeffs"]:
            c[basis.index(int(row[0]), int(row[1]))] += complex(float(row[2]), float(row[3]) if len(row) > 3 else 0.0)
        return Field(c, basis)
    raise ValueError(f"unknown source kind {kind!r}")
