"""Time integration of forward/adjoint transport problems and vorticity systems.

All solvers share one integrating-factor engine: the diffusion term is
advanced exactly by exp(-nu |k|^2 dt) per mode, everything else is
explicit and dealiased by the two-thirds rule. Two schemes are offered:

* ``imex-euler``: u+ = E (u + dt N(t, u))
* ``imex-rk2``:   u* = E^1/2 (u + dt/2 N(t, u)),
                  u+ = E u + dt E^1/2 N(t + dt/2, u*)

State is kept inside the two-thirds band at all times, so the discrete
transport operator is exactly skew-adjoint and forward/adjoint pairs
are exact transposes of each other at the semi-discrete level.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .errors import CFLViolation, SolverAbort
from .grid import Field, Grid
from .spectral import (
    curl_hat,
    curl_inverse_hat,
    div_hat,
    grad_hat,
    leray_hat,
    lp_norm_values,
    magnitude,
    tensor_div_hat,
)

log = logging.getLogger(__name__)

SCHEMES = ("imex-euler", "imex-rk2")
SCHEME_ORDER = {"imex-euler": 1, "imex-rk2": 2}

Coefficient = Union[Field, Callable[[float], Field], None]


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    scheme: str = "imex-rk2"
    dealias: str = "two-thirds"
    cfl_target: float = 0.4
    save_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.dealias != "two-thirds":
            raise ValueError("only the two-thirds dealiasing rule is supported")
        if not self.cfl_target > 0:
            raise ValueError("cfl_target must be positive")
        if self.save_every < 1:
            raise ValueError("save_every must be >= 1")

    @property
    def order(self) -> int:
        return SCHEME_ORDER[self.scheme]


@dataclass
class TransportProblem:
    """d_t a + div(a (x) v) - nu lap a = div(w (x) a) [+ forcing]."""

    v: Coefficient
    a0: Field
    horizon: float
    nu: float = 0.0
    w: Coefficient = None
    rhs_form: str = "none"
    forcing: Callable[[float], Field] | None = None

    def __post_init__(self):
        _check_common(self.nu, self.horizon)
        if self.rhs_form not in ("none", "tensor_divergence"):
            raise ValueError(f"unknown rhs_form {self.rhs_form!r}")
        if self.rhs_form == "tensor_divergence":
            if self.w is None:
                raise ValueError("rhs_form 'tensor_divergence' needs a coupling field w")
            if self.a0.m != self.a0.grid.d:
                raise ValueError("the coupling term needs a vector unknown")


@dataclass
class AdjointProblem:
    """d_t phi - div(phi (x) v) - nu lap phi = -(grad phi)^T w, phi(0) = phi0.

    Coefficients are given in forward (physical) time; the solver reads
    them reversed, so ``phi`` at time T pairs with the forward solution.
    """

    v: Coefficient
    phi0: Field
    horizon: float
    nu: float = 0.0
    w: Coefficient = None
    exponents: object = None
    coupling_form: str = "divergence"

    def __post_init__(self):
        _check_common(self.nu, self.horizon)
        if self.coupling_form not in ("divergence", "direct"):
            raise ValueError(f"unknown coupling_form {self.coupling_form!r}")
        if self.w is not None and self.phi0.m != self.phi0.grid.d:
            raise ValueError("the coupling term needs a vector unknown")


def _check_common(nu: float, horizon: float) -> None:
    if nu < 0:
        raise ValueError(f"viscosity must be >= 0, got {nu}")
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")


@dataclass
class Trajectory:
    """Stored snapshots at uniform times plus one monitor row per step."""

    grid: Grid
    dt: float
    times: np.ndarray
    fields: list[Field]
    monitors: dict[str, np.ndarray]
    aux: dict[str, list[Field]] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def initial(self) -> Field:
        return self.fields[0]

    @property
    def final(self) -> Field:
        return self.fields[-1]

    @property
    def sup_history(self) -> np.ndarray:
        return self.monitors["Linf"]

    def __len__(self) -> int:
        return len(self.fields)


# -- shared machinery ------------------------------------------------------


def _inner_hat(grid: Grid, fhat: np.ndarray, ghat: np.ndarray) -> float:
    s = np.real(fhat * np.conj(ghat)) * grid.rfft_weights
    return float(grid.volume * s.sum() / grid.size**2)


def _mode_energy(grid: Grid, fhat: np.ndarray) -> np.ndarray:
    """Per-mode share of 1/2 ||f||^2, summed over components."""
    e = np.sum(np.abs(fhat) ** 2, axis=0) * grid.rfft_weights
    return 0.5 * grid.volume * e / grid.size**2


def _log_mean(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Logarithmic mean; exact time average of a decaying exponential."""
    out = 0.5 * (A + B)
    ok = (A > 0) & (B > 0) & (np.abs(A - B) > 1e-12 * np.maximum(A, B))
    out[ok] = (A[ok] - B[ok]) / (np.log(A[ok]) - np.log(B[ok]))
    return out


class _Sampler:
    """Evaluates a (possibly time-dependent) coefficient as dealiased arrays."""

    def __init__(self, coef: Coefficient, grid: Grid, name: str, check_div: bool):
        self.coef = coef
        self.grid = grid
        self.name = name
        self.check_div = check_div
        self._static = None
        if isinstance(coef, Field):
            self._static = self._prepare(coef)

    def _prepare(self, f: Field):
        g = self.grid
        if f.grid != g:
            raise ValueError(f"coefficient {self.name} lives on a different grid")
        if f.m != g.d:
            raise ValueError(f"coefficient {self.name} must have {g.d} components")
        hat = f.hat * g.dealias_mask
        if self.check_div:
            div = np.abs(g.ifft(div_hat(g, f.hat))).max()
            if div > 1e-10:
                raise ValueError(f"coefficient {self.name} is not divergence free (|div| = {div:.3e})")
        return hat, g.ifft(hat), float(magnitude(f.values).max())

    def __call__(self, t: float):
        if self.coef is None:
            return None
        if self._static is not None:
            return self._static
        return self._prepare(self.coef(t))


class _Monitor:
    """Accumulates per-step diagnostics and the discrete energy balance."""

    def __init__(self, grid, energy_map, nu, extra):
        self.grid = grid
        self.energy_map = energy_map
        self.nu = nu
        self.extra = extra
        self.rows: dict[str, list] = {}
        self.dissipated = 0.0
        self._prev = None

    def record(self, step, t, uhat, work, values, cfl):
        g = self.grid
        ehat = self.energy_map(uhat)
        modes = _mode_energy(g, ehat)
        energy = float(modes.sum())
        residual = 0.0
        if self._prev is not None:
            prev_modes, prev_energy, prev_work, dt = self._prev
            diss = float((2.0 * self.nu * g.k2 * dt * _log_mean(prev_modes, modes)).sum())
            self.dissipated += diss
            scale = max(prev_energy, energy)
            gain = 0.5 * dt * (prev_work + work)
            residual = (energy - prev_energy + diss - gain) / scale if scale > 0 else 0.0
        row = {
            "step": step,
            "t": t,
            "Linf": float(magnitude(values).max()),
            "L2": lp_norm_values(values, 2, g.cell_volume),
            "mean": float(np.abs(values.reshape(values.shape[0], -1).mean(axis=1)).max()),
            "energy": energy,
            "energy_residual": residual,
            "dissipated": self.dissipated,
            "cfl": cfl,
        }
        row.update(self.extra(uhat, values))
        for key, val in row.items():
            self.rows.setdefault(key, []).append(val)
        return modes, energy

    def advance(self, modes, energy, work, dt):
        self._prev = (modes, energy, work, dt)

    def arrays(self) -> dict[str, np.ndarray]:
        out = {k: np.asarray(v, dtype=float) for k, v in self.rows.items()}
        out["step"] = out["step"].astype(int)
        return out


def _n_steps(horizon: float, dt: float, save_every: int) -> int:
    n = int(round(horizon / dt))
    if n < 1 or abs(n * dt - horizon) > 1e-9 * horizon:
        raise ValueError(f"horizon {horizon} is not a whole number of steps of dt = {dt}")
    if n % save_every:
        raise ValueError(f"save_every = {save_every} does not divide the {n} steps")
    return n


def _integrate(
    grid: Grid,
    u0hat: np.ndarray,
    rhs: Callable[[int, float, np.ndarray], np.ndarray],
    nu: float,
    cfg: StepperConfig,
    horizon: float,
    *,
    energy_map=lambda u: u,
    speed: Callable[[int, np.ndarray], float] = lambda n, u: 0.0,
    post_step: Callable[[int, np.ndarray], np.ndarray] | None = None,
    extra_monitors=lambda uhat, values: {},
    aux_fields: Callable[[np.ndarray], dict[str, np.ndarray]] | None = None,
) -> Trajectory:
    dt = cfg.dt
    n_steps = _n_steps(horizon, dt, cfg.save_every)
    mask = grid.dealias_mask
    E = np.exp(-nu * grid.k2 * dt)
    E_half = np.exp(-nu * grid.k2 * dt / 2)

    u = u0hat * mask
    monitor = _Monitor(grid, energy_map, nu, extra_monitors)
    fields, times = [], []
    aux: dict[str, list[Field]] = {}

    def save(t, values, uhat):
        times.append(t)
        fields.append(Field(grid, values))
        if aux_fields is not None:
            for key, val in aux_fields(uhat).items():
                aux.setdefault(key, []).append(Field(grid, val))

    def cfl_of(n, uhat):
        c = dt * speed(n, uhat) / grid.h
        if c > cfl_target * (1 + 1e-12):
            raise CFLViolation(
                f"CFL number {c:.4g} exceeds target {cfl_target}: need dt <= {cfl_target * dt / c:.4g}",
                step=n,
            )
        return c

    cfl_target = cfg.cfl_target
    values = grid.ifft(u)
    N0 = rhs(0, 0.0, u)
    work = _inner_hat(grid, energy_map(u), energy_map(N0))
    modes, energy = monitor.record(0, 0.0, u, work, values, cfl_of(0, u))
    save(0.0, values, u)

    # overflow is caught by the finiteness check below
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(n_steps):
            t = n * dt
            monitor.advance(modes, energy, work, dt)
            if cfg.scheme == "imex-euler":
                u = E * (u + dt * N0)
            else:
                ustar = E_half * (u + 0.5 * dt * N0)
                u = E * u + dt * E_half * rhs(n, t + 0.5 * dt, ustar)
            u *= mask
            if post_step is not None:
                u = post_step(n + 1, u)
            if not np.all(np.isfinite(u)):
                raise SolverAbort("non-finite values in the solution", step=n + 1)
            t_next = (n + 1) * dt
            values = grid.ifft(u)
            N0 = rhs(n + 1, t_next, u)
            work = _inner_hat(grid, energy_map(u), energy_map(N0))
            modes, energy = monitor.record(n + 1, t_next, u, work, values, cfl_of(n + 1, u))
            if (n + 1) % cfg.save_every == 0:
                save(t_next, values, u)

    return Trajectory(
        grid=grid,
        dt=dt,
        times=np.asarray(times),
        fields=fields,
        monitors=monitor.arrays(),
        aux=aux,
        meta={"scheme": cfg.scheme, "nu": nu, "n_steps": n_steps},
    )


# -- transport and adjoint ---------------------------------------------------


def coupling_adjoint_hat(grid: Grid, phihat, what, w_values, form: str = "divergence"):
    """(grad phi)^T w, i.e. component i = sum_j d_i(phi_j) w_j.

    ``divergence`` evaluates the equivalent grad(phi . w) - (grad w)^T phi.
    """
    mask = grid.dealias_mask
    phi = grid.ifft(phihat * mask)
    d = grid.d
    if form == "direct":
        out = np.zeros_like(phihat)
        for i in range(d):
            acc = sum(grid.ifft(1j * grid.kd[i] * phihat[j] * mask) * w_values[j] for j in range(d))
            out[i] = grid.fft(acc)
        return out * mask
    dot = grid.fft(sum(phi[j] * w_values[j] for j in range(d))) * mask
    out = grad_hat(grid, dot)
    for i in range(d):
        acc = sum(grid.ifft(1j * grid.kd[i] * what[j]) * phi[j] for j in range(d))
        out[i] -= grid.fft(acc)
    return out * mask


def solve_transport(prob: TransportProblem, grid: Grid, cfg: StepperConfig) -> Trajectory:
    """Integrate the forward problem from a0 over [0, T]."""
    if prob.a0.grid != grid:
        raise ValueError("initial datum lives on a different grid")
    v_of = _Sampler(prob.v, grid, "v", check_div=True)
    w_of = _Sampler(prob.w if prob.rhs_form == "tensor_divergence" else None, grid, "w", False)
    forcing = prob.forcing

    def rhs(n, t, uhat):
        v = v_of(n * cfg.dt)
        out = np.zeros_like(uhat)
        if v is not None:
            out -= tensor_div_hat(grid, uhat, v[0])
        w = w_of(n * cfg.dt)
        if w is not None:
            out += tensor_div_hat(grid, w[0], uhat)
        if forcing is not None:
            f = forcing(t)
            out += f.hat.reshape(uhat.shape) * grid.dealias_mask
        return out

    def speed(n, uhat):
        v = v_of(min(n, round(prob.horizon / cfg.dt) - 1) * cfg.dt)
        return 0.0 if v is None else v[2]

    traj = _integrate(grid, prob.a0.hat, rhs, prob.nu, cfg, prob.horizon, speed=speed)
    traj.meta.update(kind="transport", rhs_form=prob.rhs_form)
    return traj


def solve_adjoint(prob: AdjointProblem, grid: Grid, cfg: StepperConfig) -> Trajectory:
    """Integrate the adjoint problem with time-reversed coefficients.

    Step m of the adjoint covers the physical interval of forward step
    n_steps - 1 - m and samples the coefficients at that interval's start.
    """
    if prob.phi0.grid != grid:
        raise ValueError("terminal datum lives on a different grid")
    T = prob.horizon
    dt = cfg.dt
    v_of = _Sampler(prob.v, grid, "v", check_div=True)
    w_of = _Sampler(prob.w, grid, "w", False)

    def physical(n):
        return max(T - (n + 1) * dt, 0.0)

    def rhs(n, t, uhat):
        out = np.zeros_like(uhat)
        v = v_of(physical(n))
        if v is not None:
            out += tensor_div_hat(grid, uhat, v[0])
        w = w_of(physical(n))
        if w is not None:
            out -= coupling_adjoint_hat(grid, uhat, w[0], w[1], prob.coupling_form)
        return out

    def speed(n, uhat):
        v = v_of(physical(n))
        return 0.0 if v is None else v[2]

    traj = _integrate(grid, prob.phi0.hat, rhs, prob.nu, cfg, T, speed=speed)
    traj.meta.update(kind="adjoint", coupled=prob.w is not None)
    return traj


# -- vorticity ---------------------------------------------------------------


def _mean_zero_tol(values: np.ndarray) -> float:
    return 1e-12 * max(1.0, float(np.abs(values).max()))


def curl_inverse(omega: Field, grid: Grid | None = None) -> Field:
    """Velocity u, zero-mean and divergence free, with curl u = omega."""
    grid = grid or omega.grid
    if omega.grid != grid:
        raise ValueError("vorticity lives on a different grid")
    if grid.d == 2:
        if not omega.is_scalar:
            raise ValueError("2D vorticity must be a scalar field")
    elif grid.d == 3:
        if omega.m != 3:
            raise ValueError("3D vorticity must be a vector field")
        div = np.abs(grid.ifft(div_hat(grid, omega.hat))).max()
        if div > 1e-8 * max(1.0, float(np.abs(omega.values).max())):
            raise ValueError(f"vorticity must be divergence free (|div| = {div:.3e})")
    else:
        raise ValueError("curl_inverse needs d = 2 or d = 3")
    if np.abs(omega.mean()).max() > _mean_zero_tol(omega.values):
        raise ValueError("mean-zero required")
    return Field.from_hat(grid, curl_inverse_hat(grid, omega.hat))


def cutoff_fraction(grid: Grid, fhat: np.ndarray) -> float:
    """Share of the (dealiased) spectral energy in the outermost retained shell."""
    kc = grid.dealias_cutoff
    width = max(1, kc // 8)
    e = np.sum(np.abs(fhat) ** 2, axis=0) * grid.rfft_weights * grid.dealias_mask
    total = e.sum()
    if total == 0:
        return 0.0
    return float(e[grid.kmax_norm > kc - width].sum() / total)


def solve_ns_vorticity(
    initial: Field,
    nu: float,
    grid: Grid,
    cfg: StepperConfig,
    horizon: float,
    *,
    velocity: bool = False,
    u_exponents=(),
    exponents=(),
    cutoff_limit: float = 1e-8,
) -> Trajectory:
    """Navier-Stokes in vorticity form; u is recovered by curl_inverse.

    2D: d_t w + div(w u) - nu lap w = 0.
    3D: d_t W + div(W (x) u) - nu lap W = div(u (x) W), with W re-projected
    onto divergence-free fields after every step.

    ``velocity=True`` means ``initial`` is u0 and W0 = curl u0.
    ``u_exponents`` / ``exponents`` add per-step L^q norms of u and of the
    vorticity to the monitors (columns ``u_L<q>`` and ``L<p>``).
    With nu = 0 the run aborts once the outer-shell energy share exceeds
    ``cutoff_limit``.
    """
    if nu < 0:
        raise ValueError("viscosity must be >= 0")
    if grid.d not in (2, 3):
        raise ValueError("vorticity solver needs d = 2 or d = 3")
    omega0 = Field.from_hat(grid, curl_hat(grid, initial.hat)) if velocity else initial
    curl_inverse(omega0, grid)  # validates mean and divergence
    d = grid.d

    def velocity_hat(what):
        return curl_inverse_hat(grid, what)

    def rhs(n, t, what):
        uhat = velocity_hat(what)
        out = -tensor_div_hat(grid, what, uhat)
        if d == 3:
            out += tensor_div_hat(grid, uhat, what)
        return out

    def post_step(n, what):
        if d == 3:
            div = np.abs(grid.ifft(div_hat(grid, what))).max()
            scale = max(1.0, float(np.abs(grid.ifft(what)).max()))
            if div > 1e-8 * scale:
                raise SolverAbort(f"vorticity divergence drift {div:.3e}", step=n)
            what = leray_hat(grid, what)
        if nu == 0:
            frac = cutoff_fraction(grid, what)
            if frac > cutoff_limit:
                raise SolverAbort(
                    f"energy share {frac:.3e} at the dealiasing cutoff exceeds {cutoff_limit:g}; "
                    "horizon too long for this resolution",
                    step=n,
                )
        return what

    def speed(n, what):
        return float(magnitude(grid.ifft(velocity_hat(what))).max())

    def extra(what, values):
        u = grid.ifft(velocity_hat(what))
        row = {
            "L1": lp_norm_values(values, 1, grid.cell_volume),
            "enstrophy": 0.5 * lp_norm_values(values, 2, grid.cell_volume) ** 2,
            "cutoff_fraction": cutoff_fraction(grid, what),
        }
        for p in exponents:
            row[f"L{_fmt_exp(p)}"] = lp_norm_values(values, float(p), grid.cell_volume)
        for q in u_exponents:
            row[f"u_L{_fmt_exp(q)}"] = lp_norm_values(u, float(q), grid.cell_volume)
        return row

    traj = _integrate(
        grid,
        omega0.hat,
        rhs,
        nu,
        cfg,
        horizon,
        energy_map=velocity_hat,
        speed=speed,
        post_step=post_step,
        extra_monitors=extra,
        aux_fields=lambda what: {"u": grid.ifft(velocity_hat(what))},
    )
    traj.meta.update(kind="ns", nu=nu)
    return traj


def _fmt_exp(p) -> str:
    p = float(p)
    if np.isinf(p):
        return "inf"
    return f"{p:g}"
