"""Pipelines behind each experiment kind: build inputs, solve, check.

Every pipeline returns a :class:`Result` whose tables and summary are
pure functions of the resolved config, so re-runs are byte-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .commutators import convergence_study
from .config import ExperimentConfig, eps_values, parse_exponent
from .duality import (
    duality_pairing,
    euler_zero_experiment,
    max_principle_check,
    serrin_exponents,
    vorticity_l1_check,
)
from .fieldspecs import build_field
from .grid import Grid, make_grid
from .mollify import gradient_tensor_norm, make_kernel
from .snapshots import save_trajectory
from .sobolev import estimate_sobolev_constant
from .solvers import (
    AdjointProblem,
    StepperConfig,
    TransportProblem,
    solve_adjoint,
    solve_ns_vorticity,
    solve_transport,
)
from .spectral import lp_norm_values

MAX_SNAPSHOTS = 11


@dataclass
class Verdict:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "value": _finite(self.value),
            "threshold": _finite(self.threshold),
            "detail": self.detail,
        }


@dataclass
class Plot:
    file: str
    kind: str  # timeseries | loglog | overlay
    table: str
    x: str
    ys: list[str]
    title: str
    annotate: str = ""

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class Result:
    tables: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    verdicts: list[Verdict] = field(default_factory=list)
    plots: list[Plot] = field(default_factory=list)
    trajectories: dict = field(default_factory=dict)


def _finite(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _grid(cfg: ExperimentConfig) -> Grid:
    return make_grid(cfg.get("grid.d"), cfg.get("grid.N"))


def _stepper(cfg: ExperimentConfig) -> StepperConfig:
    p = cfg.data["physics"]
    return StepperConfig(dt=p["dt"], scheme=p["scheme"], cfl_target=p["cfl_target"], save_every=p["save_every"])


def _coef(cfg, name, grid, vector):
    spec = cfg.data["coefficients"].get(name)
    if spec is None:
        return None
    return build_field(spec, grid, cfg.get("seeds.base", 0), vector=vector)


def _sobolev(cfg, grid, s):
    given = cfg.data.get("sobolev_constant")
    if given is not None:
        return float(given), "supplied in config"
    est = estimate_sobolev_constant(grid.d, s, grid)
    return est.value, est.provenance


def _monitor_table(traj) -> dict[str, np.ndarray]:
    return dict(traj.monitors)


def _bound_verdict(name, rep, rtol) -> Verdict:
    return Verdict(name, rep.passes(rtol), rep.max_ratio, 1.0 + rtol, rep.provenance)


def run_transport(cfg: ExperimentConfig) -> Result:
    g = _grid(cfg)
    nu, T = cfg.get("physics.nu"), cfg.get("physics.horizon")
    v = _coef(cfg, "v", g, True)
    a0 = _coef(cfg, "initial", g, False)
    w = _coef(cfg, "w", g, True)
    prob = TransportProblem(v, a0, T, nu=nu, w=w, rhs_form="tensor_divergence" if w is not None else "none")
    traj = solve_transport(prob, g, _stepper(cfg))
    res = Result(tables={"monitors": _monitor_table(traj)}, trajectories={"a": traj})
    means = np.array([f.mean() for f in traj.fields])
    drift = float(np.abs(means - means[0]).max())
    scale = max(1.0, float(np.abs(a0.values).max())) * max(1.0, T)
    res.verdicts.append(Verdict("mean conservation", drift <= 1e-12 * scale, drift, 1e-12 * scale))
    if w is None:
        thr = cfg.get("thresholds.energy")
        r = float(np.abs(traj.monitors["energy_residual"]).max())
        res.verdicts.append(Verdict("energy balance per step", r <= thr, r, thr))
    res.summary = {"final_Linf": float(traj.monitors["Linf"][-1]), "final_L2": float(traj.monitors["L2"][-1])}
    res.plots.append(Plot("norms.svg", "timeseries", "monitors", "t", ["Linf", "L2"], "solution norms"))
    return res


def run_adjoint(cfg: ExperimentConfig) -> Result:
    g = _grid(cfg)
    nu, T = cfg.get("physics.nu"), cfg.get("physics.horizon")
    v = _coef(cfg, "v", g, True)
    w = _coef(cfg, "w", g, True)
    phi0 = _coef(cfg, "terminal", g, w is not None)
    traj = solve_adjoint(AdjointProblem(v, phi0, T, nu=nu, w=w), g, _stepper(cfg))
    res = Result(tables={"monitors": _monitor_table(traj)}, trajectories={"phi": traj})
    rtol = cfg.get("thresholds.max_principle")
    if w is None:
        rep = max_principle_check(traj)
        thr = cfg.get("thresholds.energy")
        balance = float(np.abs(np.cumsum(traj.monitors["energy_residual"])).max())
        res.verdicts.append(Verdict("L2 energy balance", balance <= thr, balance, thr))
    else:
        pair = serrin_exponents(g.d, parse_exponent(cfg.get("exponents.q", 2 * g.d)))
        C, prov = _sobolev(cfg, g, pair.sobolev_order)
        rep = max_principle_check(traj, w, nu, pair, C, prov)
        res.summary.update(exponents=pair.as_dict(), sobolev_constant=C)
    res.tables["bound"] = rep.table()
    res.summary.update(rep.summary())
    res.verdicts.append(_bound_verdict(rep.label, rep, rtol))
    res.plots.append(Plot("bound.svg", "overlay", "bound", "t", ["measured", "bound"], "sup norm against bound"))
    return res


def run_commutator(cfg: ExperimentConfig) -> Result:
    g = _grid(cfg)
    v = _coef(cfg, "v", g, True)
    a = _coef(cfg, "initial", g, False)
    w = _coef(cfg, "w", g, True)
    k = cfg.data["kernel"]
    rep = convergence_study(
        v, a, k["profile"], eps_values(cfg, g), mass=k["mass"], d_fields=(w, v) if w is not None else None
    )
    scale = 1.0 + lp_norm_values(a.values, 2, g.cell_volume) * gradient_tensor_norm(v, 2)
    thr = cfg.get("thresholds")
    res = Result(tables={"commutator": rep.table()}, summary=rep.summary())
    res.verdicts.append(Verdict("fitted slope >= min_slope", rep.slope >= thr["min_slope"], rep.slope, thr["min_slope"]))
    if "max_slope" in thr:
        res.verdicts.append(Verdict("fitted slope <= max_slope", rep.slope <= thr["max_slope"], rep.slope, thr["max_slope"]))
    else:
        res.verdicts.append(Verdict("monotone decay", rep.monotone, float(rep.monotone), 1.0))
    cross = float(np.nanmax(rep.crossform)) / scale
    res.verdicts.append(Verdict("cross-form agreement", cross <= thr["crossform"], cross, thr["crossform"]))
    res.plots.append(
        Plot("commutator.svg", "loglog", "commutator", "eps", ["L1_C"], "commutator L1 norm", f"slope = {rep.slope:.3f}")
    )
    return res


def run_duality(cfg: ExperimentConfig) -> Result:
    g = _grid(cfg)
    nu, T = cfg.get("physics.nu"), cfg.get("physics.horizon")
    v = _coef(cfg, "v", g, True)
    w = _coef(cfg, "w", g, True)
    a0 = _coef(cfg, "initial", g, w is not None)
    phi0 = _coef(cfg, "terminal", g, w is not None)
    step = _stepper(cfg)
    fwd = solve_transport(
        TransportProblem(v, a0, T, nu=nu, w=w, rhs_form="tensor_divergence" if w is not None else "none"), g, step
    )
    adj = solve_adjoint(AdjointProblem(v, phi0, T, nu=nu, w=w), g, step)
    raw = duality_pairing(fwd, adj)
    res = Result(trajectories={"a": fwd, "phi": adj})
    res.summary = {"raw": raw.summary()}
    res.verdicts.append(Verdict("pairing drift within tolerance", raw.verdict, raw.drift, raw.budget))
    rows = {"eps": [], "drift": [], "commutator_budget": [], "budget": []}
    if w is None:
        for e in eps_values(cfg, g):
            rep = duality_pairing(fwd, adj, make_kernel(cfg.get("kernel.profile"), e, g), v=v)
            rows["eps"].append(e)
            rows["drift"].append(rep.drift)
            rows["commutator_budget"].append(rep.commutator_budget)
            rows["budget"].append(rep.budget)
            res.verdicts.append(Verdict(f"mollified drift eps={e:.6g}", rep.verdict, rep.drift, rep.budget))
    res.tables["duality"] = {k: np.asarray(x, float) for k, x in rows.items()}
    res.tables["pairing"] = {
        "pairing_initial": np.array([raw.pairing_initial]),
        "pairing_final": np.array([raw.pairing_final]),
        "drift": np.array([raw.drift]),
        "tolerance": np.array([raw.tolerance]),
    }
    if rows["eps"]:
        res.plots.append(
            Plot("duality.svg", "loglog", "duality", "eps", ["drift", "commutator_budget"], "mollified pairing drift")
        )
    return res


def run_ns(cfg: ExperimentConfig) -> Result:
    g = _grid(cfg)
    nu, T = cfg.get("physics.nu"), cfg.get("physics.horizon")
    as_velocity = bool(cfg.get("coefficients.initial_is_velocity", False))
    init = _coef(cfg, "initial", g, as_velocity or g.d == 3)
    q = cfg.get("exponents.q")
    u_exp = (parse_exponent(q),) if q is not None else ()
    traj = solve_ns_vorticity(init, nu, g, _stepper(cfg), T, velocity=as_velocity, u_exponents=u_exp)
    res = Result(tables={"monitors": _monitor_table(traj)}, trajectories={"omega": traj})
    m = traj.monitors
    e0 = m["energy"][0]
    if e0 > 0:
        balance = float(np.abs((m["energy"] + m["dissipated"]) / e0 - 1.0).max())
        thr = cfg.get("thresholds.energy")
        res.verdicts.append(Verdict("kinetic energy balance", balance <= thr, balance, thr))
    else:
        peak = float(max(m["Linf"].max(), max(np.abs(u.values).max() for u in traj.aux["u"])))
        res.verdicts.append(Verdict("zero data stays zero", peak == 0.0, peak, 0.0))
    if nu > 0:
        pair = C = None
        prov = ""
        if g.d == 3:
            pair = serrin_exponents(3, parse_exponent(q))
            C, prov = _sobolev(cfg, g, pair.sobolev_order)
            res.summary.update(exponents=pair.as_dict(), sobolev_constant=C)
        rep = vorticity_l1_check(traj, pair, C, prov)
        res.tables["bound"] = rep.table()
        res.summary.update(rep.summary())
        res.verdicts.append(_bound_verdict("vorticity L1 bound", rep, cfg.get("thresholds.max_principle")))
        res.plots.append(Plot("bound.svg", "overlay", "bound", "t", ["measured", "bound"], "vorticity L1 norm"))
    res.plots.append(Plot("norms.svg", "timeseries", "monitors", "t", ["Linf", "L2", "L1"], "vorticity norms"))
    return res


def run_euler_zero(cfg: ExperimentConfig) -> Result:
    g = _grid(cfg)
    amp = cfg.get("euler.amplitude")
    p = parse_exponent(cfg.get("euler.p"))
    rep, run = euler_zero_experiment(
        g, cfg.get("physics.horizon"), amp, p, dt=cfg.get("physics.dt"), seed=cfg.get("seeds.base", 0)
    )
    res = Result(tables={"euler": rep.table(), "monitors": _monitor_table(run)}, summary=rep.summary())
    res.trajectories = {"omega": run}
    if amp == 0:
        peak = float(max(rep.measured.max(), rep.meta["max_abs_u"]))
        res.verdicts.append(Verdict("zero data stays zero", peak == 0.0, peak, 0.0))
    else:
        thr = cfg.get("thresholds.euler")
        r = rep.measured / rep.measured[0]
        dev = float(np.abs(r - 1).max()) if p == 2 else float(r.max() - 1)
        res.verdicts.append(Verdict(f"L{p:g} norm conserved" if p == 2 else "sup norm non-increasing", dev <= thr, dev, thr))
    res.plots.append(Plot("euler.svg", "overlay", "euler", "t", ["measured", "bound"], "vorticity norm"))
    return res


def run_sobolev(cfg: ExperimentConfig) -> Result:
    g = _grid(cfg)
    est = estimate_sobolev_constant(g.d, float(cfg.get("exponents.s")), g)
    hist = est.history
    res = Result(
        tables={"history": {"iteration": np.arange(len(hist)), "ratio": hist}},
        summary=est.as_dict(),
    )
    res.verdicts.append(Verdict("ascent converged", est.converged, est.value, float("nan"), est.provenance))
    res.plots.append(Plot("history.svg", "timeseries", "history", "iteration", ["ratio"], "embedding ratio"))
    return res


PIPELINES = {
    "transport": run_transport,
    "adjoint": run_adjoint,
    "commutator": run_commutator,
    "duality": run_duality,
    "ns": run_ns,
    "euler-zero": run_euler_zero,
    "sobolev-constant": run_sobolev,
}


def save_snapshots(traj, directory: Path) -> list[Path]:
    """Persist a trajectory with at most MAX_SNAPSHOTS evenly spaced fields."""
    stride = max(1, math.ceil((len(traj.fields) - 1) / (MAX_SNAPSHOTS - 1)))
    keep = list(range(0, len(traj.fields), stride))
    if keep[-1] != len(traj.fields) - 1:
        keep.append(len(traj.fields) - 1)
    thin = type(traj)(traj.grid, traj.dt, traj.times[keep], [traj.fields[i] for i in keep], traj.monitors)
    return save_trajectory(thin, directory)
