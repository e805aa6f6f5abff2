"""The DiPerna-Lions commutators C^eps and D^eps and their decay as eps -> 0.

``commutator_C`` evaluates the definition with spectral convolutions;
``commutator_C_taylor`` evaluates the integral remainder form node by
node over the kernel support with a Gauss-Legendre rule in r. The two
share only the sampled kernel gradient, so agreement between them is a
real check on both.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import Field, Grid
from .mollify import MollifierKernel, RoughFieldSpec, make_kernel, synth_rough_field
from .snapshots import write_csv
from .spectral import lp_norm_values, tensor_div_hat

# support nodes with |grad rho| below this fraction of the peak are skipped
SUPPORT_CUTOFF = 1e-18


def _check(v: Field, a: Field, kernel: MollifierKernel) -> Grid:
    g = kernel.grid
    if v.grid != g or a.grid != g:
        raise ValueError("fields and kernel live on different grids")
    if v.m != g.d:
        raise ValueError(f"v must have {g.d} components")
    return g


def commutator_C(v: Field, a: Field, kernel: MollifierKernel) -> Field:
    """C = v . (grad rho_eps * a) - grad rho_eps * (v a).

    Inputs are truncated to the two-thirds band; the products are formed
    pointwise and the result is not truncated, so it equals the nodal
    double sum of the Taylor form exactly.
    """
    g = _check(v, a, kernel)
    if not a.is_scalar:
        raise ValueError("a must be a scalar field")
    mask = g.dealias_mask
    ahat = a.hat[0] * mask
    vv = g.ifft(v.hat * mask)
    av = g.ifft(ahat)
    G = kernel.gradient_hat
    term1 = sum(vv[i] * g.ifft(G[i] * ahat) for i in range(g.d))
    term2 = sum(g.ifft(G[i] * g.fft(vv[i] * av)) for i in range(g.d))
    return Field(g, term1 - term2)


def commutator_C_taylor(v: Field, a: Field, kernel: MollifierKernel, quadrature_nodes_r: int = 24) -> Field:
    """Integral form sum_z a(x+z) grad rho(z) . int_0^1 (z . grad) v(x + r z) dr h^d.

    z runs over the kernel's grid support; grad v at the off-grid points
    x + r z is the band-limited interpolant, evaluated by phase shifts.
    """
    g = _check(v, a, kernel)
    if not a.is_scalar:
        raise ValueError("a must be a scalar field")
    if quadrature_nodes_r < 8:
        raise ValueError("need at least 8 Gauss-Legendre nodes in r")
    r, wr = np.polynomial.legendre.leggauss(int(quadrature_nodes_r))
    r, wr = 0.5 * (r + 1.0), 0.5 * wr

    mask = g.dealias_mask
    vhat = v.hat * mask
    a_vals = g.ifft(a.hat[0] * mask)
    G = kernel.gradient.values
    peak = np.abs(G).max()
    support = np.argwhere(np.sqrt(np.sum(G**2, axis=0)) > SUPPORT_CUTOFF * peak)

    out = np.zeros(g.shape)
    for node in support:
        node = tuple(int(n) for n in node)
        z = np.array([g.offsets[j].ravel()[node[j]] for j in range(g.d)])
        gz = np.array([G[i][node] for i in range(g.d)])
        kz = sum(g.k[j] * z[j] for j in range(g.d))
        # Gauss rule for int_0^1 exp(i r k.z) dr, applied in Fourier space
        shift = np.tensordot(wr, np.exp(1j * np.multiply.outer(r, kz)), axes=1)
        dir_hat = sum(gz[i] * vhat[i] for i in range(g.d)) * (1j * kz) * shift
        integrand = g.ifft(dir_hat)
        steps = [-int(round(z[j] / g.h)) for j in range(g.d)]
        out += np.roll(a_vals, steps, axis=tuple(range(g.d))) * integrand
    return Field(g, out * g.cell_volume)


def commutator_D(w: Field, a: Field, kernel: MollifierKernel) -> Field:
    """D = rho_eps * div(w (x) a) - div(w (x) a_eps), componentwise.

    With (div(X (x) Y))_i = sum_j d_j(X_i Y_j), a constant w gives
    w_i rho_eps * div a in both terms, so D vanishes.
    """
    g = _check(w, a, kernel)
    if a.m != g.d:
        raise ValueError(f"a must have {g.d} components")
    rho = kernel.hat
    first = rho * tensor_div_hat(g, w.hat, a.hat)
    second = tensor_div_hat(g, w.hat, rho * a.hat)
    return Field.from_hat(g, first - second)


def l1(f: Field) -> float:
    return lp_norm_values(f.values, 1, f.grid.cell_volume)


@dataclass
class CommutatorReport:
    eps: np.ndarray
    l1_C: np.ndarray
    l1_D: np.ndarray
    crossform: np.ndarray
    slope: float
    residual: float
    profile: str
    mass: float
    grid: dict
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.eps) >= 0):
            raise ValueError("eps must be strictly decreasing")

    @property
    def monotone(self) -> bool:
        """||C^eps||_1 strictly decreases along the (decreasing) eps list."""
        return bool(np.all(np.diff(self.l1_C) < 0))

    def table(self) -> dict[str, np.ndarray]:
        return {"eps": self.eps, "L1_C": self.l1_C, "L1_D": self.l1_D, "crossform_L1": self.crossform}

    def summary(self) -> dict:
        return {
            "slope": self.slope,
            "residual": self.residual,
            "monotone": self.monotone,
            "profile": self.profile,
            "mass": self.mass,
            "grid": self.grid,
            **self.meta,
        }

    def write(self, directory, config_hash: str = "") -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        csv_path = write_csv(directory / "commutator.csv", self.table())
        js = directory / "commutator.json"
        js.write_text(json.dumps({**self.summary(), "config_hash": config_hash}, indent=2, sort_keys=True) + "\n")
        return [csv_path, js]


def fit_loglog(x, y) -> tuple[float, float]:
    """Least-squares slope of log y against log x and the RMS residual."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    coef, res, *_ = np.polyfit(lx, ly, 1, full=True)
    rms = float(np.sqrt(res[0] / len(lx))) if len(res) else 0.0
    return float(coef[0]), rms


def _as_field(spec, grid, scalar: bool) -> Field:
    if isinstance(spec, Field):
        return spec
    if grid is None:
        raise ValueError("a grid is needed to synthesize fields from specs")
    if scalar and isinstance(spec, RoughFieldSpec) and spec.components is None:
        spec = RoughFieldSpec(spec.alpha, spec.seed, spec.mean_zero, False, spec.k_max, 1)
    return synth_rough_field(spec, grid)


def convergence_study(
    v_spec,
    a_spec,
    profile: str,
    eps_list,
    grid: Grid | None = None,
    *,
    mass: float = 1.0,
    crossform: bool = True,
    quadrature_nodes_r: int = 24,
    d_fields: tuple | None = None,
) -> CommutatorReport:
    """||C^eps||_1 (and optionally ||D^eps||_1) over an eps sweep, with slope fit.

    ``v_spec``/``a_spec`` are Fields or RoughFieldSpecs (a is made scalar).
    ``d_fields = (w, b)`` adds the D^eps column; otherwise it is NaN.
    ``mass`` != 1 builds deliberately unnormalized kernels.
    """
    v = _as_field(v_spec, grid, scalar=False)
    a = _as_field(a_spec, grid, scalar=True)
    grid = v.grid
    eps = np.array(sorted({float(e) for e in eps_list}, reverse=True))
    if len(eps) < 3:
        raise ValueError(f"need at least 3 distinct eps values, got {len(eps)}")
    rows = []
    for e in eps:
        k = make_kernel(profile, e, grid, mass=mass)
        C = commutator_C(v, a, k)
        lc = l1(C)
        cross = l1(C - commutator_C_taylor(v, a, k, quadrature_nodes_r)) if crossform else float("nan")
        ld = l1(commutator_D(d_fields[0], d_fields[1], k)) if d_fields is not None else float("nan")
        rows.append((lc, ld, cross))
    l1_C, l1_D, cross = (np.array(c) for c in zip(*rows))
    # a constant v leaves only roundoff; treat that as zero
    floor = 1e-12 * max(1.0, l1(a) * float(np.abs(v.values).max()) / eps[-1])
    usable = l1_C > floor
    if usable.sum() < 3:
        raise ValueError("fewer than 3 usable eps values (commutator vanishes identically)")
    slope, residual = fit_loglog(eps[usable], l1_C[usable])
    return CommutatorReport(
        eps=eps,
        l1_C=l1_C,
        l1_D=l1_D,
        crossform=cross,
        slope=slope,
        residual=residual,
        profile=profile,
        mass=float(mass),
        grid=grid.describe(),
    )
