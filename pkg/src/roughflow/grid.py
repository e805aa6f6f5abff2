"""Periodic collocation grids on the torus and fields living on them."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Grid:
    """Uniform grid on T^d = [0, 2pi)^d with N points per axis.

    Spectral arrays follow numpy's ``rfftn`` layout over the spatial axes:
    every axis but the last uses ``fftfreq`` ordering, the last is halved.
    """

    d: int
    N: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.N < 8 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two (>= 8), got {self.N}")

    # -- physical space ---------------------------------------------------

    @property
    def L(self) -> float:
        return TWO_PI

    @property
    def h(self) -> float:
        return TWO_PI / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.d

    @property
    def size(self) -> int:
        return self.N**self.d

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    @property
    def volume(self) -> float:
        return TWO_PI**self.d

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Node coordinates 2*pi*j/N, one broadcastable array per axis."""
        x = np.arange(self.N) * self.h
        return tuple(np.meshgrid(*([x] * self.d), indexing="ij", sparse=True))

    @cached_property
    def offsets(self) -> tuple[np.ndarray, ...]:
        """Signed periodic node offsets in [-pi, pi), origin at index 0."""
        z = np.fft.fftfreq(self.N, 1.0 / self.N) * self.h
        return tuple(np.meshgrid(*([z] * self.d), indexing="ij", sparse=True))

    # -- spectral space ---------------------------------------------------

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return (self.N,) * (self.d - 1) + (self.N // 2 + 1,)

    @cached_property
    def k(self) -> tuple[np.ndarray, ...]:
        """Integer wavenumbers (Nyquist kept as -N/2 / +N/2)."""
        full = np.fft.fftfreq(self.N, 1.0 / self.N)
        half = np.fft.rfftfreq(self.N, 1.0 / self.N)
        axes = [full] * (self.d - 1) + [half]
        return tuple(np.meshgrid(*axes, indexing="ij", sparse=True))

    @cached_property
    def kd(self) -> tuple[np.ndarray, ...]:
        """Wavenumbers for first derivatives: Nyquist entries zeroed."""
        out = []
        for kk in self.k:
            kk = kk.copy()
            kk[np.abs(kk) == self.N // 2] = 0.0
            out.append(kk)
        return tuple(out)

    @cached_property
    def k2(self) -> np.ndarray:
        """|k|^2 for the Laplacian (true Nyquist wavenumber)."""
        return sum(kk.astype(float) ** 2 for kk in self.k)

    @cached_property
    def kd2(self) -> np.ndarray:
        return sum(kk**2 for kk in self.kd)

    @property
    def dealias_cutoff(self) -> int:
        """Largest retained |k_i| under the two-thirds rule."""
        return (self.N - 1) // 3

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        kc = self.dealias_cutoff
        mask = np.ones(self.spectral_shape, dtype=bool)
        for kk in self.k:
            mask &= np.abs(kk) <= kc
        return mask

    @cached_property
    def kmax_norm(self) -> np.ndarray:
        """max_i |k_i| per mode, used for shell diagnostics."""
        out = np.zeros(self.spectral_shape)
        for kk in self.k:
            out = np.maximum(out, np.abs(kk))
        return out

    @cached_property
    def rfft_weights(self) -> np.ndarray:
        """Multiplicity of each rfft mode in the full spectrum (1 or 2)."""
        w = np.full(self.spectral_shape, 2.0)
        w[..., 0] = 1.0
        if self.N % 2 == 0:
            w[..., -1] = 1.0
        return w

    # -- transforms -------------------------------------------------------

    def axes(self, values: np.ndarray) -> tuple[int, ...]:
        return tuple(range(values.ndim - self.d, values.ndim))

    def fft(self, values: np.ndarray) -> np.ndarray:
        return np.fft.rfftn(values, axes=self.axes(values))

    def ifft(self, coeffs: np.ndarray) -> np.ndarray:
        axes = tuple(range(coeffs.ndim - self.d, coeffs.ndim))
        return np.fft.irfftn(coeffs, s=self.shape, axes=axes)

    def describe(self) -> dict:
        return {"d": self.d, "N": self.N, "L": "2pi", "h": self.h}


def make_grid(d: int, N: int) -> Grid:
    """Build the periodic grid on T^d with ``N`` nodes per axis."""
    if isinstance(N, bool) or int(N) != N:
        raise ValueError(f"N must be a power of two (>= 8), got {N}")
    return Grid(int(d), int(N))


@dataclass(frozen=True, eq=False)
class Field:
    """Scalar or vector field sampled at the nodes of a grid.

    ``values`` has shape ``(m, N, ..., N)``: component axis first, then the
    spatial axes. The array is made read-only on construction, so the
    lazily computed spectral coefficients can never go stale.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape == self.grid.shape:
            vals = vals[np.newaxis]
        if vals.ndim != self.grid.d + 1 or vals.shape[1:] != self.grid.shape:
            raise ValueError(
                f"values of shape {np.shape(self.values)} do not fit grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def is_scalar(self) -> bool:
        return self.m == 1

    @cached_property
    def hat(self) -> np.ndarray:
        out = self.grid.fft(self.values)
        out.flags.writeable = False
        return out

    @classmethod
    def from_hat(cls, grid: Grid, coeffs: np.ndarray) -> "Field":
        return cls(grid, grid.ifft(coeffs))

    @classmethod
    def zeros(cls, grid: Grid, m: int = 1) -> "Field":
        return cls(grid, np.zeros((m,) + grid.shape))

    @classmethod
    def from_function(cls, grid: Grid, func) -> "Field":
        """Sample ``func(*coords)``; a sequence result makes a vector field."""
        out = func(*grid.coords)
        if isinstance(out, (list, tuple)):
            comps = [np.broadcast_to(np.asarray(c, dtype=float), grid.shape) for c in out]
            return cls(grid, np.stack(comps))
        return cls(grid, np.broadcast_to(np.asarray(out, dtype=float), grid.shape))

    def component(self, i: int) -> "Field":
        return Field(self.grid, self.values[i : i + 1])

    def mean(self) -> np.ndarray:
        return self.values.reshape(self.m, -1).mean(axis=1)

    def __add__(self, other: "Field") -> "Field":
        _check_compatible(self, other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _check_compatible(self, other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "Field":
        return Field(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)


def _check_compatible(a: Field, b: Field) -> None:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")
    if a.m != b.m:
        raise ValueError(f"component mismatch: {a.m} vs {b.m}")
