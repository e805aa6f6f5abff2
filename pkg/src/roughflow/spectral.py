"""Spectral differential operators, projection and norms on periodic grids.

Operators come in two flavours: the public ones take and return
:class:`~roughflow.grid.Field` objects; the ``*_hat`` helpers work on raw
``rfftn`` coefficient arrays of shape ``(m,) + grid.spectral_shape`` and
are what the time steppers use in their inner loops.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Field, Grid

# -- coefficient-level helpers --------------------------------------------


def deriv_hat(grid: Grid, fhat: np.ndarray, axis: int) -> np.ndarray:
    return 1j * grid.kd[axis] * fhat


def grad_hat(grid: Grid, fhat: np.ndarray) -> np.ndarray:
    """Gradient of a single scalar spectrum -> (d,) + spectral_shape."""
    return np.stack([1j * kk * fhat for kk in grid.kd])


def div_hat(grid: Grid, vhat: np.ndarray) -> np.ndarray:
    return sum(1j * grid.kd[j] * vhat[j] for j in range(grid.d))


def dealias_hat(grid: Grid, fhat: np.ndarray) -> np.ndarray:
    return fhat * grid.dealias_mask


def leray_hat(grid: Grid, vhat: np.ndarray) -> np.ndarray:
    kd = grid.kd
    k2 = grid.kd2
    inv = np.divide(1.0, k2, out=np.zeros_like(k2, dtype=float), where=k2 > 0)
    kdotv = sum(kd[j] * vhat[j] for j in range(grid.d))
    return np.stack([vhat[i] - kd[i] * kdotv * inv for i in range(grid.d)])


def product_hat(grid: Grid, fhat: np.ndarray, ghat: np.ndarray) -> np.ndarray:
    """Two-thirds dealiased product of two scalar spectra."""
    mask = grid.dealias_mask
    prod = grid.ifft(fhat * mask) * grid.ifft(ghat * mask)
    return grid.fft(prod) * mask


def tensor_div_hat(grid: Grid, xhat: np.ndarray, yhat: np.ndarray) -> np.ndarray:
    """(div (X (x) Y))_i = sum_j d_j (X_i Y_j), dealiased.

    ``xhat`` has shape (m, ...), ``yhat`` has shape (d, ...).
    """
    mask = grid.dealias_mask
    x = grid.ifft(xhat * mask)
    y = grid.ifft(yhat * mask)
    out = np.zeros(xhat.shape, dtype=complex)
    for i in range(x.shape[0]):
        for j in range(grid.d):
            out[i] += 1j * grid.kd[j] * grid.fft(x[i] * y[j])
    return out * mask


def curl_hat(grid: Grid, vhat: np.ndarray) -> np.ndarray:
    kd = grid.kd
    if grid.d == 2:
        return (1j * kd[0] * vhat[1] - 1j * kd[1] * vhat[0])[np.newaxis]
    if grid.d == 3:
        return np.stack(
            [
                1j * (kd[1] * vhat[2] - kd[2] * vhat[1]),
                1j * (kd[2] * vhat[0] - kd[0] * vhat[2]),
                1j * (kd[0] * vhat[1] - kd[1] * vhat[0]),
            ]
        )
    raise ValueError("curl needs d = 2 or d = 3")


def curl_inverse_hat(grid: Grid, what: np.ndarray) -> np.ndarray:
    """Zero-mean divergence-free u with curl u = w (w divergence-free in 3D)."""
    k2 = grid.kd2
    inv = np.divide(1.0, k2, out=np.zeros_like(k2, dtype=float), where=k2 > 0)
    psi = what * inv
    if grid.d == 2:
        # u = (d2 psi, -d1 psi) with -lap psi = w
        return np.stack([1j * grid.kd[1] * psi[0], -1j * grid.kd[0] * psi[0]])
    return curl_hat(grid, psi)


# -- field-level operators ------------------------------------------------


def _require_scalar(f: Field, what: str) -> None:
    if not f.is_scalar:
        raise ValueError(f"{what} expects a scalar field, got {f.m} components")


def _require_vector(f: Field, what: str) -> None:
    if f.m != f.grid.d:
        raise ValueError(f"{what} expects a vector field with {f.grid.d} components, got {f.m}")


def gradient(f: Field) -> Field:
    """Spectral gradient of a scalar field."""
    _require_scalar(f, "gradient")
    return Field.from_hat(f.grid, grad_hat(f.grid, f.hat[0]))


def divergence(f: Field) -> Field:
    _require_vector(f, "divergence")
    return Field.from_hat(f.grid, div_hat(f.grid, f.hat)[np.newaxis])


def tensor_divergence(X: Field, Y: Field) -> Field:
    """Compute div(X (x) Y) with (div(X (x) Y))_i = sum_j d_j(X_i Y_j).

    ``X`` may be scalar (giving div(X Y)) or vector; ``Y`` must be a vector
    field. Factors and result are truncated to the two-thirds band.
    """
    if X.grid != Y.grid:
        raise ValueError("fields live on different grids")
    _require_vector(Y, "tensor_divergence (second factor)")
    return Field.from_hat(X.grid, tensor_div_hat(X.grid, X.hat, Y.hat))


def advective_derivative(Y: Field, X: Field) -> Field:
    """(Y . grad) X, componentwise in X, dealiased like tensor_divergence."""
    _require_vector(Y, "advective_derivative")
    g = X.grid
    mask = g.dealias_mask
    y = g.ifft(Y.hat * mask)
    out = np.zeros(X.hat.shape, dtype=complex)
    for i in range(X.m):
        for j in range(g.d):
            dx = g.ifft(1j * g.kd[j] * X.hat[i] * mask)
            out[i] += g.fft(y[j] * dx)
    return Field.from_hat(g, out * mask)


def laplacian(f: Field) -> Field:
    return Field.from_hat(f.grid, -f.grid.k2 * f.hat)


def curl(f: Field) -> Field:
    _require_vector(f, "curl")
    return Field.from_hat(f.grid, curl_hat(f.grid, f.hat))


def leray_project(f: Field) -> Field:
    """Orthogonal projection onto divergence-free fields (mean kept)."""
    _require_vector(f, "leray_project")
    return Field.from_hat(f.grid, leray_hat(f.grid, f.hat))


def dealias(f: Field) -> Field:
    return Field.from_hat(f.grid, dealias_hat(f.grid, f.hat))


# -- norms ----------------------------------------------------------------


def magnitude(values: np.ndarray) -> np.ndarray:
    """Pointwise Euclidean magnitude over the component axis."""
    if values.shape[0] == 1:
        return np.abs(values[0])
    return np.sqrt(np.sum(values**2, axis=0))


def lp_norm_values(values: np.ndarray, p: float, cell_volume: float) -> float:
    mag = magnitude(values)
    if np.isinf(p):
        return float(mag.max())
    if p == 2:
        return float(np.sqrt(np.sum(mag**2) * cell_volume))
    if p == 1:
        return float(np.sum(mag) * cell_volume)
    return float((np.sum(mag**p) * cell_volume) ** (1.0 / p))


def lebesgue_norm(f: Field, p: float) -> float:
    """Grid L^p norm on the torus.

    Equal-weight quadrature of |f|^p; ``p = inf`` is the largest nodal
    magnitude. Vector fields use the pointwise Euclidean magnitude.
    """
    p = float(p)
    if not p >= 1:
        raise ValueError(f"Lebesgue exponent must be >= 1, got {p}")
    return lp_norm_values(f.values, p, f.grid.cell_volume)


def spectral_energy(grid: Grid, fhat: np.ndarray, weight: np.ndarray | None = None) -> float:
    """(2 pi)^d sum_k w(k) |f_k|^2 with f_k the Fourier coefficients."""
    coeff = np.abs(fhat) ** 2 * grid.rfft_weights
    if weight is not None:
        coeff = coeff * weight
    return float(grid.volume * coeff.sum() / grid.size**2)


def sobolev_weight(grid: Grid, s: float) -> np.ndarray:
    if s == 0:
        return np.ones(grid.spectral_shape)
    return np.where(grid.k2 > 0, grid.k2**s, 0.0)


def sobolev_seminorm(f: Field, s: float) -> float:
    """Homogeneous H^s seminorm (sum_k |k|^{2s} |f_k|^2)^(1/2), L^2-scaled.

    The zero mode only contributes when ``s == 0``, where the result is
    the L^2 norm.
    """
    s = float(s)
    if not 0.0 <= s <= 2.0:
        raise ValueError(f"Sobolev order must lie in [0, 2], got {s}")
    return float(np.sqrt(spectral_energy(f.grid, f.hat, sobolev_weight(f.grid, s))))


@dataclass
class NormReport:
    t: float
    lebesgue: dict[float, float] = field(default_factory=dict)
    sobolev: dict[float, float] = field(default_factory=dict)

    def __post_init__(self):
        for v in list(self.lebesgue.values()) + list(self.sobolev.values()):
            if v < 0:
                raise ValueError("norms must be non-negative")


def norm_report(
    f: Field,
    t: float = 0.0,
    exponents=(1.0, 2.0, np.inf),
    orders=(0.0, 1.0),
) -> NormReport:
    return NormReport(
        t=float(t),
        lebesgue={float(p): lebesgue_norm(f, p) for p in exponents},
        sobolev={float(s): sobolev_seminorm(f, s) for s in orders},
    )
