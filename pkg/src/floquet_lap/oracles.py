"""Independent closed-form references for the constant medium q = 1.

With q = 1 the problem Delta u + k^2 u = f separates into one ODE per
transverse cosine mode,

    u_m'' + beta_m^2 u_m = f_m(x1),   beta_m^2 = k^2 - pi^2 m^2,

whose outgoing (or absorbing, Im k^2 > 0) solution is the convolution of f_m
with G(x) = exp(i beta |x|) / (2 i beta), Im beta >= 0.  Nothing here uses the
Galerkin pencil, multipliers or contour integrals.
"""

from __future__ import annotations

import numpy as np

from .cell import CellField, Field, cheb_data


def transverse_wavenumber(k2: complex, m: int) -> complex:
    """beta_m = sqrt(k^2 - pi^2 m^2) on the branch with Im >= 0 (Re >= 0 when real)."""
    b = np.sqrt(complex(k2) - (np.pi * m) ** 2)
    if b.imag < 0 or (b.imag == 0 and b.real < 0):
        b = -b
    return complex(b)


def plane_wave_multipliers(k2: float, m_max: int) -> dict[str, list[complex]]:
    """Multipliers exp(+-i beta_m) grouped as in the multiplier classification."""
    out = {"unit_right": [], "unit_left": [], "evanescent": [], "growing": []}
    for m in range(m_max + 1):
        b2 = k2 - (np.pi * m) ** 2
        if b2 > 0:
            beta = np.sqrt(b2)
            out["unit_right"].append(complex(np.exp(1j * beta)))
            out["unit_left"].append(complex(np.exp(-1j * beta)))
        elif b2 < 0:
            kap = np.sqrt(-b2)
            out["evanescent"].append(float(np.exp(-kap)))
            out["growing"].append(float(np.exp(kap)))
    return out


def _x1_profiles(f: Field):
    """Callables b_m(x1) = sum_j f_{jm} exp(2 pi i j x1) for each m."""
    grid = f.grid
    jv = f.basis.j_values

    def prof(x, m):
        return np.exp(2j * np.pi * np.outer(np.atleast_1d(x), jv)) @ grid[:, m]

    return prof


def green_cell_field(f: Field, k2: complex, n: int, P: int | None = None, n_gauss: int = 64) -> CellField:
    """Exact solution of Delta u + k^2 u = f on cell n, f supported in cell 0.

    Args:
        f: Source coefficients on the reference cell (periodic representation
            restricted to the cell).
        k2: Wavenumber squared, real or with positive imaginary part.
        n: Cell index.
        P: Chebyshev order of the returned field.
        n_gauss: Gauss-Legendre points per integration segment.
    """
    b = f.basis
    P = b.n_cheb if P is None else P
    x_loc = cheb_data(P)[0]
    gx, gw = np.polynomial.legendre.leggauss(n_gauss)
    prof = _x1_profiles(f)
    out = np.zeros((P + 1, b.M + 1), dtype=complex)
    for m in range(b.M + 1):
        if not np.any(f.grid[:, m]):
            continue
        beta = transverse_wavenumber(k2, m)
        g = 1.0 / (2j * beta)
        if n != 0:
            y = 0.5 * (gx + 1.0)
            w = 0.5 * gw
            by = prof(y, m)
            if n >= 1:
                moment = np.sum(w * np.exp(-1j * beta * y) * by)
                out[:, m] = g * np.exp(1j * beta * (x_loc + n)) * moment
            else:
                moment = np.sum(w * np.exp(1j * beta * y) * by)
                out[:, m] = g * np.exp(-1j * beta * (x_loc + n)) * moment
            continue
        for i, x in enumerate(x_loc):
            val = 0.0
            if x > 0:
                y = 0.5 * x * (gx + 1.0)
                val += 0.5 * x * np.sum(gw * np.exp(1j * beta * (x - y)) * prof(y, m))
            if x < 1:
                y = x + 0.5 * (1.0 - x) * (gx + 1.0)
                val += 0.5 * (1.0 - x) * np.sum(gw * np.exp(1j * beta * (y - x)) * prof(y, m))
            out[i, m] = g * val
    return CellField(out)
