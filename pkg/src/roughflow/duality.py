"""Checks tying solver output to the theory: weak residuals, duality
pairings, maximum principles, vorticity bounds and exponent bookkeeping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .commutators import commutator_C, l1
from .grid import Field, Grid
from .mollify import MollifierKernel, RoughFieldSpec, mollify, synth_rough_field
from .solvers import SCHEME_ORDER, StepperConfig, Trajectory, _fmt_exp, solve_ns_vorticity
from .spectral import advective_derivative, gradient, laplacian, lp_norm_values

# --- exponents ----------------------------------------------------------------


def conjugate(p: float) -> float:
    p = float(p)
    if p < 1:
        raise ValueError(f"exponent must be >= 1, got {p}")
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


@dataclass(frozen=True)
class ExponentPair:
    """Time exponent p and space exponent q for the coefficient w."""

    p: float
    q: float
    d: int
    limit_case: bool = False

    def __post_init__(self):
        for x in (self.p, self.q):
            if not x >= 1:
                raise ValueError(f"exponents must lie in [1, inf], got {x}")

    @property
    def p_conj(self) -> float:
        return conjugate(self.p)

    @property
    def q_conj(self) -> float:
        return conjugate(self.q)

    @property
    def serrin_sum(self) -> float:
        return 2.0 / self.p + self.d / self.q

    @property
    def serrin_ok(self) -> bool:
        return abs(self.serrin_sum - 1.0) <= 1e-12

    @property
    def sobolev_order(self) -> float:
        """s = 1 - 2/p of the embedding used in the growing bound."""
        return 1.0 - 2.0 / self.p

    def as_dict(self) -> dict:
        return {
            "p": self.p,
            "q": self.q,
            "d": self.d,
            "p_conj": self.p_conj,
            "q_conj": self.q_conj,
            "serrin_ok": self.serrin_ok,
            "limit_case": self.limit_case,
        }


def serrin_exponents(d: int, q: float) -> ExponentPair:
    """p with 2/p + d/q = 1.

    q = d is the limit case (p = inf) that needs the smallness condition
    ||w||_{L^inf L^d} < 2 nu / C; see :func:`limit_case_threshold`.
    """
    q = float(q)
    if q < d:
        raise ValueError(f"Serrin condition requires q > d (got q = {q:g}, d = {d})")
    if q == d:
        return ExponentPair(math.inf, q, d, limit_case=True)
    p = 2.0 / (1.0 - d / q)
    return ExponentPair(p, q, d)


def limit_case_threshold(nu: float, C: float) -> float:
    return 2.0 * nu / C


def growth_rate(C: float, p: float, nu: float) -> float:
    """C^p / (p nu^(p-2)), the exponent rate of the growing bound."""
    if nu <= 0:
        raise ValueError("the growing bound needs nu > 0")
    return C**p / (p * nu ** (p - 2.0))


# --- reports ------------------------------------------------------------------


@dataclass
class BoundReport:
    times: np.ndarray
    measured: np.ndarray
    bound: np.ndarray
    constant: float | None
    provenance: str
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, float)
        self.measured = np.asarray(self.measured, float)
        self.bound = np.asarray(self.bound, float)
        if not (len(self.times) == len(self.measured) == len(self.bound)):
            raise ValueError("time, measured and bound series differ in length")

    @property
    def ratios(self) -> np.ndarray:
        out = np.zeros_like(self.measured)
        pos = self.bound > 0
        out[pos] = self.measured[pos] / self.bound[pos]
        out[~pos & (self.measured > 0)] = np.inf
        return out

    @property
    def max_ratio(self) -> float:
        return float(self.ratios.max()) if len(self.ratios) else 0.0

    def passes(self, rtol: float = 1e-8) -> bool:
        return self.max_ratio <= 1.0 + rtol

    def table(self) -> dict[str, np.ndarray]:
        return {"t": self.times, "measured": self.measured, "bound": self.bound}

    def summary(self) -> dict:
        return {
            "label": self.label,
            "max_ratio": self.max_ratio,
            "constant": self.constant,
            "provenance": self.provenance,
            **self.meta,
        }


@dataclass
class DualityReport:
    pairing_initial: float
    pairing_final: float
    drift: float
    commutator_budget: float
    tolerance: float
    raw_drift: float
    mollified: bool
    meta: dict = field(default_factory=dict)

    @property
    def budget(self) -> float:
        return self.commutator_budget + self.tolerance

    @property
    def verdict(self) -> bool:
        return self.drift <= self.budget

    def summary(self) -> dict:
        return {
            "pairing_initial": self.pairing_initial,
            "pairing_final": self.pairing_final,
            "drift": self.drift,
            "raw_drift": self.raw_drift,
            "commutator_budget": self.commutator_budget,
            "tolerance": self.tolerance,
            "verdict": "pass" if self.verdict else "fail",
            "mollified": self.mollified,
            **self.meta,
        }


# --- time quadrature --------------------------------------------------------


def cumulative_trapezoid(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.zeros_like(np.asarray(y, float))
    if len(t) > 1:
        out[1:] = np.cumsum(0.5 * np.diff(t) * (y[1:] + y[:-1]))
    return out


# --- weak residual ------------------------------------------------------------


def bump(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


def bump_derivative(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    si = s[inside]
    out[inside] = np.exp(-1.0 / (1.0 - si**2)) * (-2.0 * si / (1.0 - si**2) ** 2)
    return out


@dataclass(frozen=True)
class TestFunction:
    """phi(t, x) = theta((t - center)/halfwidth) psi(x) with theta a C^inf bump."""

    space: Field
    center: float
    halfwidth: float

    def theta(self, t):
        return bump((np.asarray(t) - self.center) / self.halfwidth)

    def theta_dot(self, t):
        return bump_derivative((np.asarray(t) - self.center) / self.halfwidth) / self.halfwidth


# keeps pytest from collecting the dataclass above
TestFunction.__test__ = False


def make_test_bank(grid: Grid, components: int, horizon: float, n_space: int = 16, seed: int = 0):
    """16 band-limited space modes x 3 bump time profiles inside (0, T)."""
    modes = [
        synth_rough_field(
            RoughFieldSpec(alpha=1.0, seed=seed * 1000 + i, mean_zero=False, div_free=False, k_max=3, components=components),
            grid,
        )
        for i in range(n_space)
    ]
    windows = [(0.35, 0.25), (0.5, 0.4), (0.65, 0.25)]
    return [TestFunction(m, c * horizon, w * horizon) for m in modes for c, w in windows]


def _inner(f: np.ndarray, g: np.ndarray, cell_volume: float) -> float:
    return float(np.sum(f * g) * cell_volume)


def _static(coef, t):
    if coef is None or isinstance(coef, Field):
        return coef
    return coef(t)


def _adjoint_operator(psi: Field, v: Field | None, w: Field | None, nu: float) -> np.ndarray:
    """v . grad psi + nu lap psi - (grad psi)^T w, nodal values."""
    g = psi.grid
    out = nu * laplacian(psi).values
    if v is not None:
        out = out + advective_derivative(v, psi).values
    if w is not None:
        grads = [gradient(psi.component(j)).values for j in range(psi.m)]
        # component i: sum_j d_i psi_j w_j
        out = out - np.stack([sum(grads[j][i] * w.values[j] for j in range(psi.m)) for i in range(g.d)])
    return out


def weak_residual(
    a: Trajectory,
    v,
    w=None,
    nu: float = 0.0,
    test_bank=None,
    *,
    forcing: Callable[[float], Field] | None = None,
    relative: bool = False,
) -> float:
    """Largest weak-form defect over a bank of space-time test functions.

    For phi(t, x) = theta(t) psi(x) the defect is
    int int a (d_t phi + v.grad phi + nu lap phi) - a.((grad phi)^T w) + f phi
    + <a(0), phi(0)> - <a(T), phi(T)>, with trapezoidal time quadrature over
    the stored times. ``relative`` divides each defect by
    max_t ||a||_2 * int ||(d_t + L^*) phi||_2 dt.
    """
    grid = a.grid
    if test_bank is None:
        test_bank = make_test_bank(grid, a.fields[0].m, a.horizon)
    if not test_bank:
        raise ValueError("empty test bank")
    times = a.times
    hv = grid.cell_volume
    a_l2 = max(lp_norm_values(f.values, 2, hv) for f in a.fields)
    static_ops = isinstance(v, (Field, type(None))) and isinstance(w, (Field, type(None)))
    out = 0.0
    for tf in test_bank:
        psi = tf.space.values
        th, thd = tf.theta(times), tf.theta_dot(times)
        op = _adjoint_operator(tf.space, v, w, nu) if static_ops else None
        integrand = np.empty(len(times))
        scale_t = np.empty(len(times))
        for n, t in enumerate(times):
            an = a.fields[n].values
            L = op if static_ops else _adjoint_operator(tf.space, _static(v, t), _static(w, t), nu)
            val = thd[n] * _inner(an, psi, hv) + th[n] * _inner(an, L, hv)
            if forcing is not None:
                val += th[n] * _inner(forcing(t).values, psi, hv)
            integrand[n] = val
            scale_t[n] = np.sqrt(_inner(thd[n] * psi + th[n] * L, thd[n] * psi + th[n] * L, hv))
        total = cumulative_trapezoid(times, integrand)[-1]
        total += th[0] * _inner(a.fields[0].values, psi, hv) - th[-1] * _inner(a.fields[-1].values, psi, hv)
        res = abs(total)
        if relative:
            scale = a_l2 * cumulative_trapezoid(times, scale_t)[-1]
            res = res / scale if scale > 0 else 0.0
        out = max(out, res)
    return out


# --- duality pairing --------------------------------------------------------

# pairing slack K * dt^order * ||a0|| ||phi0||; K calibrated once on the
# manufactured smooth runs of the test suite and frozen
PAIRING_K = {"imex-rk2": 0.1, "imex-euler": 100.0}


def pairing(f: Field, g: Field) -> float:
    return _inner(f.values, g.values, f.grid.cell_volume)


def duality_pairing(
    a: Trajectory,
    phi: Trajectory,
    kernel: MollifierKernel | None = None,
    *,
    v=None,
    K: float | None = None,
) -> DualityReport:
    """Compare <a(T), phi0> with <a0, phi(T)> for a matched forward/adjoint pair.

    Without a kernel the drift is pure discretization error and the budget
    is the tolerance alone. With a kernel the pairings use rho_eps * a and
    the budget adds int_0^T ||C^eps(a(t))||_1 dt * max ||phi||_inf, which
    needs the transporting field ``v``.
    """
    if a.grid != phi.grid:
        raise ValueError("forward and adjoint trajectories live on different grids")
    if abs(a.horizon - phi.horizon) > 1e-12 * max(1.0, a.horizon):
        raise ValueError(f"horizon mismatch: {a.horizon} vs {phi.horizon}")
    a0, aT = a.fields[0], a.fields[-1]
    phi0, phiT = phi.fields[0], phi.fields[-1]
    raw_initial, raw_final = pairing(a0, phiT), pairing(aT, phi0)
    raw_drift = abs(raw_final - raw_initial)
    scheme = a.meta.get("scheme", "imex-rk2")
    order = SCHEME_ORDER[scheme]
    K = PAIRING_K[scheme] if K is None else K
    hv = a.grid.cell_volume
    tol = K * a.dt**order * lp_norm_values(a0.values, 2, hv) * lp_norm_values(phi0.values, 2, hv)
    meta = {"dt": a.dt, "order": order, "K": K}
    if kernel is None:
        return DualityReport(raw_initial, raw_final, raw_drift, 0.0, tol, raw_drift, False, meta)
    if v is None:
        raise ValueError("the commutator budget needs the transporting field v")
    pin, pfin = pairing(mollify(a0, kernel), phiT), pairing(mollify(aT, kernel), phi0)
    norms = np.array([l1(commutator_C(_static(v, t), f, kernel)) for t, f in zip(a.times, a.fields)])
    phi_sup = float(phi.monitors["Linf"].max())
    c_int = float(cumulative_trapezoid(a.times, norms)[-1])
    meta.update(eps=kernel.epsilon, commutator_time_l1=c_int, phi_sup=phi_sup)
    return DualityReport(pin, pfin, abs(pfin - pin), c_int * phi_sup, tol, raw_drift, True, meta)


# --- maximum principles -------------------------------------------------------


def _require_monitors(traj: Trajectory, *cols):
    missing = [c for c in cols if c not in traj.monitors]
    if missing:
        raise ValueError(f"trajectory lacks monitors {missing}")


def _norm_series(coef, times, q: float, grid: Grid) -> np.ndarray:
    if isinstance(coef, Field):
        return np.full(len(times), lp_norm_values(coef.values, q, grid.cell_volume))
    return np.array([lp_norm_values(coef(t).values, q, grid.cell_volume) for t in times])


def max_principle_check(
    phi: Trajectory,
    w=None,
    nu: float = 0.0,
    pair: ExponentPair | None = None,
    C_sobolev: float | None = None,
    provenance: str = "",
) -> BoundReport:
    """sup-norm history of an adjoint run against the flat or growing bound.

    With w the bound is ||phi0||_inf exp(C^p/(p nu^(p-2)) int_0^t ||w||_q^p).
    """
    _require_monitors(phi, "t", "Linf")
    t = phi.monitors["t"]
    sup = phi.monitors["Linf"]
    if w is None:
        return BoundReport(t, sup, np.full(len(t), sup[0]), None, "flat bound", "max-principle")
    if pair is None or C_sobolev is None:
        raise ValueError("the growing bound needs exponents and a Sobolev constant")
    if not pair.serrin_ok:
        raise ValueError(f"exponents (p, q) = ({pair.p:g}, {pair.q:g}) violate 2/p + d/q = 1")
    if not C_sobolev > 0:
        raise ValueError("Sobolev constant must be positive")
    # adjoint time tau pairs with physical time T - tau
    T = phi.monitors["t"][-1]
    wq = _norm_series(w, T - t, pair.q, phi.grid)
    rate = growth_rate(C_sobolev, pair.p, nu)
    with np.errstate(over="ignore"):  # an infinite bound is vacuous, not an error
        bound = sup[0] * np.exp(rate * cumulative_trapezoid(t, wq**pair.p))
    return BoundReport(
        t, sup, bound, C_sobolev, provenance, "growing-max-principle", {"rate": rate, "p": pair.p, "q": pair.q}
    )


def vorticity_l1_check(
    run: Trajectory, pair: ExponentPair | None = None, C_sobolev: float | None = None, provenance: str = ""
) -> BoundReport:
    """||Omega(t)||_1 against ||Omega(0)||_1 exp(C^p/(p nu^(p-2)) int ||u||_q^p).

    2D runs use the flat bound (no stretching).
    """
    nu = run.meta.get("nu", 0.0)
    if not nu > 0:
        raise ValueError("the L1 vorticity bound needs nu > 0")
    _require_monitors(run, "t", "L1")
    t, m = run.monitors["t"], run.monitors["L1"]
    if run.grid.d == 2:
        return BoundReport(t, m, np.full(len(t), m[0]), None, "flat bound (2D)", "vorticity-L1")
    if pair is None or C_sobolev is None:
        raise ValueError("3D runs need exponents and a Sobolev constant")
    if not pair.serrin_ok:
        raise ValueError(f"exponents (p, q) = ({pair.p:g}, {pair.q:g}) violate 2/p + d/q = 1")
    col = f"u_L{_fmt_exp(pair.q)}"
    _require_monitors(run, col)
    rate = growth_rate(C_sobolev, pair.p, nu)
    with np.errstate(over="ignore"):
        bound = m[0] * np.exp(rate * cumulative_trapezoid(t, run.monitors[col] ** pair.p))
    return BoundReport(t, m, bound, C_sobolev, provenance, "vorticity-L1", {"rate": rate, "p": pair.p, "q": pair.q})


# --- Euler zero data ----------------------------------------------------------


def euler_zero_experiment(
    grid: Grid,
    horizon: float,
    noise_amplitude: float,
    p: float = 2.0,
    *,
    dt: float = 1e-3,
    seed: int = 0,
    k_max: int | None = None,
) -> tuple[BoundReport, Trajectory]:
    """2D Euler from omega0 = amplitude * random field; ||omega(t)||_p vs ||omega0||_p."""
    if grid.d != 2:
        raise ValueError("the zero-data Euler experiment is two dimensional")
    if noise_amplitude < 0:
        raise ValueError("noise amplitude must be >= 0")
    spec = RoughFieldSpec(alpha=1.0, seed=seed, div_free=False, k_max=k_max or grid.N // 8, components=1)
    omega0 = synth_rough_field(spec, grid) * noise_amplitude
    run = solve_ns_vorticity(omega0, 0.0, grid, StepperConfig(dt=dt), horizon, exponents=(p,))
    col = f"L{_fmt_exp(p)}"
    m = run.monitors[col]
    report = BoundReport(
        run.monitors["t"], m, np.full(len(m), m[0]), None, "conservation under 2D transport", "euler-zero",
        {"amplitude": noise_amplitude, "p": float(p), "max_abs_u": float(max(np.abs(u.values).max() for u in run.aux["u"]))},
    )
    return report, run
