"""Mollifier kernels, periodic mollification and rough random fields."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .grid import Field, Grid
from .spectral import grad_hat, leray_hat, lp_norm_values

PROFILES = ("compact-bump", "truncated-gaussian")

# width of the truncated Gaussian: sigma = eps / GAUSS_WIDTHS
GAUSS_WIDTHS = 4.0

# slack on the resolvability window, in units of h
_EPS_SLACK = 1e-9


def _profile_values(profile: str, r: np.ndarray) -> np.ndarray:
    if profile == "compact-bump":
        out = np.zeros_like(r)
        inside = r < 1.0
        out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
        return out
    if profile == "truncated-gaussian":
        # truncated by the periodic cell; wrapped mass < 1e-14 for eps <= L/4
        return np.exp(-0.5 * (GAUSS_WIDTHS * r) ** 2)
    raise ValueError(f"unknown kernel profile {profile!r}; expected one of {PROFILES}")


def _central_difference(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Fourth-order centered difference on a periodic array."""
    p1 = np.roll(values, -1, axis)
    m1 = np.roll(values, 1, axis)
    p2 = np.roll(values, -2, axis)
    m2 = np.roll(values, 2, axis)
    return (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h)


@dataclass(frozen=True, eq=False)
class MollifierKernel:
    """Periodized radial kernel rho_eps = eps^-d rho(./eps) sampled on a grid.

    ``samples`` holds the kernel with its centre at node 0, normalized so
    that the discrete integral equals ``target_mass`` (1 unless a
    deliberately unnormalized kernel was requested).

    ``gradient`` is the fourth-order centered difference of the samples.
    Any consistent antisymmetric stencil satisfies the discrete moment
    identity -sum_z grad rho(z) (x) z h^d = mass * I exactly, which the
    commutator computations rely on.
    """

    profile: str
    epsilon: float
    grid: Grid
    samples: Field
    target_mass: float = 1.0

    @cached_property
    def gradient(self) -> Field:
        g = self.grid
        rho = self.samples.values[0]
        return Field(g, np.stack([_central_difference(rho, i, g.h) for i in range(g.d)]))

    @cached_property
    def hat(self) -> np.ndarray:
        """Fourier multiplier of convolution with the kernel."""
        return self.samples.hat[0] * self.grid.cell_volume

    @cached_property
    def gradient_hat(self) -> np.ndarray:
        return self.gradient.hat * self.grid.cell_volume

    @property
    def mass(self) -> float:
        return float(self.samples.values.sum() * self.grid.cell_volume)

    @property
    def first_moment(self) -> np.ndarray:
        g = self.grid
        rho = self.samples.values[0]
        return np.array([float((rho * z).sum() * g.cell_volume) for z in g.offsets])

    @property
    def moment_matrix(self) -> np.ndarray:
        """-sum_z grad rho(z) (x) z h^d; equals mass * I."""
        g = self.grid
        grad = self.gradient.values
        M = np.empty((g.d, g.d))
        for i in range(g.d):
            for j in range(g.d):
                M[i, j] = -float((grad[i] * g.offsets[j]).sum() * g.cell_volume)
        return M

    @property
    def abs_moment(self) -> float:
        """sum_z |z| rho_eps(z) h^d = eps * || |.| rho ||_{L^1}."""
        g = self.grid
        r = np.sqrt(sum(z**2 for z in g.offsets))
        return float((self.samples.values[0] * r).sum() * g.cell_volume)

    @property
    def support_radius(self) -> float:
        if self.profile == "compact-bump":
            return self.epsilon
        return float(np.pi)


def check_resolvable(epsilon: float, grid: Grid) -> None:
    lo, hi = 4.0 * grid.h, grid.L / 4.0
    if epsilon < lo * (1 - _EPS_SLACK):
        raise ValueError(
            f"kernel width under-resolved: need eps >= 4h = {lo:.6g}, got eps = {epsilon:.6g}"
        )
    if epsilon > hi * (1 + _EPS_SLACK):
        raise ValueError(f"kernel width too large: need eps <= L/4 = {hi:.6g}, got {epsilon:.6g}")


def make_kernel(profile: str, epsilon: float, grid: Grid, mass: float = 1.0) -> MollifierKernel:
    """Sample, periodize and normalize the mollifier of width ``epsilon``."""
    epsilon = float(epsilon)
    check_resolvable(epsilon, grid)
    r = np.sqrt(sum(z**2 for z in grid.offsets)) / epsilon
    rho = _profile_values(profile, np.broadcast_to(r, grid.shape).copy())
    rho *= mass / (rho.sum() * grid.cell_volume)
    return MollifierKernel(profile, epsilon, grid, Field(grid, rho), float(mass))


def mollify(f: Field, kernel: MollifierKernel) -> Field:
    """Periodic convolution rho_eps * f as a spectral product."""
    if f.grid != kernel.grid:
        raise ValueError("field and kernel live on different grids")
    return Field.from_hat(f.grid, f.hat * kernel.hat)


@dataclass(frozen=True)
class RoughFieldSpec:
    """Recipe for a random-phase field with spectral amplitudes |k|^-alpha.

    Larger ``alpha`` gives smoother fields; alpha > 1 + d/2 puts the field
    comfortably in H^1 independently of resolution. ``components`` defaults
    to the grid dimension (a vector field).
    """

    alpha: float
    seed: int = 0
    mean_zero: bool = True
    div_free: bool = True
    k_max: int = 8
    components: int | None = None

    def validate(self, grid: Grid) -> None:
        if not self.alpha > 0:
            raise ValueError(f"decay exponent alpha must be > 0, got {self.alpha}")
        if int(self.k_max) != self.k_max or self.k_max < 1:
            raise ValueError(f"k_max must be a positive integer, got {self.k_max}")
        if self.k_max > grid.N / 3:
            raise ValueError(f"k_max = {self.k_max} exceeds the dealiasing limit N/3 = {grid.N / 3:.4g}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        m = self.components
        if m is not None and m < 1:
            raise ValueError("components must be positive")
        if self.div_free and m not in (None, grid.d):
            raise ValueError("a divergence-free field needs d components")


def _generator(seed: int, stream: int) -> np.random.Generator:
    # Philox is counter based: streams are independent and reproducible
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), stream])))


def synth_rough_field(spec: RoughFieldSpec, grid: Grid) -> Field:
    """Random field with |f_k| = |k|^-alpha for 0 < |k| <= k_max.

    Phases are drawn per component on the fixed box |k_i| <= k_max and
    made Hermitian, so the field is real and the same spec gives the same
    continuum field on every grid that resolves it. Identical specs give
    bit-identical fields.
    """
    spec.validate(grid)
    m = spec.components or grid.d
    N, d, K = grid.N, grid.d, int(spec.k_max)
    kb = np.arange(-K, K + 1)
    Kb = np.meshgrid(*([kb] * d), indexing="ij")
    kk = np.sqrt(sum(k**2 for k in Kb))
    amp = np.zeros(kk.shape)
    band = (kk > 0) & (kk <= K)
    amp[band] = kk[band] ** (-float(spec.alpha))

    box = np.empty((m,) + kk.shape, dtype=complex)
    means = np.zeros(m)
    for c in range(m):
        rng = _generator(spec.seed, c)
        theta = rng.uniform(0.0, 2.0 * np.pi, size=kk.shape)
        # centred box: k -> -k is a flip of every axis
        box[c] = amp * np.exp(1j * (theta - np.flip(theta)))
        if not spec.mean_zero:
            means[c] = rng.standard_normal()

    if spec.div_free:
        kdot = sum(Kb[j] * box[j] for j in range(d))
        k2 = np.where(kk > 0, kk**2, 1.0)
        box = np.stack([box[i] - Kb[i] * kdot / k2 for i in range(d)])

    coeffs = np.zeros((m,) + grid.shape, dtype=complex)
    idx = np.ix_(*([kb % N] * d))
    for c in range(m):
        coeffs[c][idx] = box[c]
    axes = tuple(range(1, d + 1))
    values = np.fft.ifftn(coeffs, axes=axes).real * grid.size
    values += means.reshape((m,) + (1,) * d)
    if spec.div_free:
        # remove the roundoff-level compressive part left by the real cast
        values = grid.ifft(leray_hat(grid, grid.fft(values)))
    return Field(grid, values)


def gradient_tensor_norm(v: Field, p: float) -> float:
    """L^p norm of the pointwise Frobenius norm of grad v."""
    g = v.grid
    comps = np.concatenate([g.ifft(grad_hat(g, v.hat[i])) for i in range(v.m)])
    return lp_norm_values(comps, p, g.cell_volume)


def mollification_error(
    v: Field, delta: float, profile: str = "compact-bump", q: float = 2.0
) -> tuple[float, float]:
    """Measured ||rho_delta * v - v||_q and the bound delta ||grad v||_q || |z| rho ||_1."""
    kernel = make_kernel(profile, delta, v.grid)
    diff = mollify(v, kernel) - v
    measured = lp_norm_values(diff.values, q, v.grid.cell_volume)
    bound = gradient_tensor_norm(v, q) * kernel.abs_moment
    return measured, bound
