"""Experiment configuration: JSON schema, defaulting and cross-field checks.

One experiment per JSON document. ``sweep`` maps dotted paths to value
lists; the cartesian product expands into child runs.
"""

from __future__ import annotations

import copy
import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from .errors import ConfigError

EXPERIMENTS = {
    "transport": "forward transport-diffusion solve with monitors",
    "adjoint": "adjoint solve with the flat or growing maximum principle",
    "commutator": "commutator decay over an eps sweep, two evaluation forms",
    "duality": "matched forward/adjoint runs and the duality pairing",
    "ns": "Navier-Stokes vorticity run with energy and L1 vorticity checks",
    "euler-zero": "2D Euler from zero or roundoff-scale vorticity",
    "sobolev-constant": "estimate of the discrete Sobolev embedding constant",
}

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

_ROUGH = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "alpha"],
    "properties": {
        "kind": {"const": "rough"},
        "alpha": _POS,
        "seed": {"type": "integer", "minimum": 0},
        "k_max": {"type": "integer", "minimum": 1},
        "div_free": {"type": "boolean"},
        "mean_zero": {"type": "boolean"},
        "components": {"type": "integer", "minimum": 1},
        "amplitude": _NUM,
        "normalize": {
            "type": "object",
            "additionalProperties": False,
            "required": ["q", "value"],
            "properties": {"q": {"type": ["number", "string"]}, "value": _POS},
        },
    },
}

NAMED_FIELDS = ("zero", "constant", "cos-x1", "taylor-green", "cellular")

_NAMED = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "name"],
    "properties": {
        "kind": {"const": "named"},
        "name": {"enum": list(NAMED_FIELDS)},
        "amplitude": _NUM,
        "components": {"type": "integer", "minimum": 1},
    },
}

_COEF = {"oneOf": [_ROUGH, _NAMED, {"type": "null"}]}

SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "additionalProperties": False,
    "required": ["experiment", "grid"],
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "name": {"type": "string"},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["d", "N"],
            "properties": {"d": {"type": "integer"}, "N": {"type": "integer"}},
        },
        "physics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "nu": {"type": "number", "minimum": 0},
                "horizon": _POS,
                "dt": _POS,
                "scheme": {"enum": ["imex-euler", "imex-rk2"]},
                "cfl_target": _POS,
                "save_every": {"type": "integer", "minimum": 1},
            },
        },
        "coefficients": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "v": _COEF,
                "w": _COEF,
                "initial": _COEF,
                "terminal": _COEF,
                "initial_is_velocity": {"type": "boolean"},
            },
        },
        "kernel": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "profile": {"enum": ["compact-bump", "truncated-gaussian"]},
                "eps": {"type": "array", "items": _POS},
                "eps_units": {"enum": ["h", "absolute"]},
                "mass": _POS,
            },
        },
        "exponents": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"q": {"type": ["number", "string"]}, "s": {"type": "number", "minimum": 0}},
        },
        "sobolev_constant": _POS,
        "thresholds": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "min_slope": _NUM,
                "max_slope": _NUM,
                "crossform": _POS,
                "max_principle": {"type": "number", "minimum": 0},
                "energy": _POS,
                "euler": _POS,
            },
        },
        "euler": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"amplitude": {"type": "number", "minimum": 0}, "p": {"type": ["number", "string"]}},
        },
        "seeds": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"base": {"type": "integer", "minimum": 0}},
        },
        "sweep": {
            "type": "object",
            "additionalProperties": {"type": "array", "minItems": 1},
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
    },
}

DEFAULTS = {
    "physics": {"nu": 0.0, "horizon": 1.0, "dt": 1e-3, "scheme": "imex-rk2", "cfl_target": 0.4, "save_every": 1},
    "kernel": {"profile": "compact-bump", "eps": [16, 8, 5.656854249492381, 4], "eps_units": "h", "mass": 1.0},
    "thresholds": {
        "min_slope": 0.9,
        "crossform": 1e-6,
        "max_principle": 1e-8,
        "energy": 1e-6,
        "euler": 1e-6,
    },
    "euler": {"amplitude": 1e-13, "p": 2},
    "seeds": {"base": 0},
    "output": {"dir": "runs"},
}

# coefficients each experiment needs
_REQUIRED_COEFS = {
    "transport": ("v", "initial"),
    "adjoint": ("v", "terminal"),
    "commutator": ("v", "initial"),
    "duality": ("v", "initial", "terminal"),
    "ns": ("initial",),
    "euler-zero": (),
    "sobolev-constant": (),
}


def parse_exponent(x) -> float:
    if isinstance(x, str):
        if x.strip().lower() in ("inf", "infinity", "∞"):
            return math.inf
        raise ConfigError(f"exponent {x!r}: expected a number or 'inf'")
    return float(x)


@dataclass
class ExperimentConfig:
    data: dict
    defaults_applied: list[str] = field(default_factory=list)

    @property
    def kind(self) -> str:
        return self.data["experiment"]

    @property
    def hash(self) -> str:
        return config_hash(self.data)

    def get(self, dotted: str, default=None):
        node = self.data
        for key in dotted.split("."):
            if not isinstance(node, dict) or key not in node:
                return default
            node = node[key]
        return node

    def children(self) -> list["ExperimentConfig"]:
        """Cartesian expansion of ``sweep``; a config without one is its own child."""
        sweep = self.data.get("sweep") or {}
        if not sweep:
            return [self]
        keys = sorted(sweep)
        out = []
        for values in itertools.product(*(sweep[k] for k in keys)):
            data = copy.deepcopy(self.data)
            data.pop("sweep")
            for key, val in zip(keys, values):
                _set_dotted(data, key, val)
            out.append(resolve(data))
        return out


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(data) -> str:
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def _set_dotted(data: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = data
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"sweep path {dotted!r} runs through a non-object")
    node[keys[-1]] = value


def _line_of(text: str, path) -> int | None:
    """Best-effort line number of the last key on a schema error path."""
    keys = [p for p in path if isinstance(p, str)]
    if not keys:
        return None
    needle = f'"{keys[-1]}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


def _apply_defaults(data: dict) -> list[str]:
    applied = []
    for section, values in DEFAULTS.items():
        node = data.setdefault(section, {})
        for key, val in values.items():
            if key not in node:
                node[key] = copy.deepcopy(val)
                applied.append(f"{section}.{key} = {json.dumps(val)}")
    data.setdefault("coefficients", {})
    data.setdefault("exponents", {})
    return applied


def validate_config(text: str, seed_override: int | None = None) -> ExperimentConfig:
    """Parse, schema-check, default and cross-check one config document."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}: invalid JSON: {exc.msg}") from None
    errors = sorted(jsonschema.Draft7Validator(SCHEMA).iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for err in errors:
            where = "/".join(str(p) for p in err.absolute_path) or "<root>"
            path = list(err.absolute_path)
            if err.validator == "additionalProperties" and isinstance(err.instance, dict):
                # point at the first unexpected key rather than its parent
                known = set(err.schema.get("properties", {}))
                extra = sorted(k for k in err.instance if k not in known)
                path += extra[:1]
            line = _line_of(text, path)
            prefix = f"line {line}: " if line else ""
            lines.append(f"{prefix}{where}: {err.message}")
        raise ConfigError("schema violation:\n  " + "\n  ".join(lines))
    if seed_override is not None:
        data.setdefault("seeds", {})["base"] = int(seed_override)
    return resolve(data)


def resolve(data: dict) -> ExperimentConfig:
    data = copy.deepcopy(data)
    applied = _apply_defaults(data)
    cfg = ExperimentConfig(data, applied)
    if not data.get("sweep"):
        check_constraints(cfg)
    else:
        cfg.children()  # resolving each child runs its checks
    return cfg


def check_constraints(cfg: ExperimentConfig) -> None:
    """Cross-field checks; raises ConfigError naming the violated inequality."""
    from .grid import make_grid
    from .mollify import check_resolvable
    from .duality import serrin_exponents

    kind = cfg.kind
    try:
        grid = make_grid(cfg.get("grid.d"), cfg.get("grid.N"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    phys = cfg.data["physics"]
    T, dt = phys["horizon"], phys["dt"]
    if kind not in ("commutator", "sobolev-constant"):
        n = round(T / dt)
        if n < 1 or abs(n * dt - T) > 1e-9 * T:
            raise ConfigError(f"horizon / dt must be a whole number of steps (T = {T}, dt = {dt})")
        if n % phys["save_every"]:
            raise ConfigError(f"save_every = {phys['save_every']} must divide the {n} steps")

    coefs = cfg.data["coefficients"]
    for name in _REQUIRED_COEFS[kind]:
        if coefs.get(name) is None:
            raise ConfigError(f"experiment {kind!r} needs coefficients.{name}")
    for name in ("v", "w", "initial", "terminal"):
        spec = coefs.get(name)
        if spec and spec["kind"] == "rough" and spec.get("k_max", 8) > grid.N / 3:
            raise ConfigError(f"coefficients.{name}: need k_max <= N/3 = {grid.N / 3:.4g}")

    if kind in ("commutator", "duality"):
        eps = eps_values(cfg, grid)
        for e in eps:
            try:
                check_resolvable(e, grid)
            except ValueError:
                raise ConfigError(
                    f"kernel eps = {e:.6g} violates 4h <= ε <= L/4 (need ε ≥ 4h = {4 * grid.h:.6g}, "
                    f"ε ≤ L/4 = {grid.L / 4:.6g})"
                ) from None
        if kind == "commutator" and len(set(eps)) < 3:
            raise ConfigError("a commutator sweep needs at least 3 distinct eps values")

    if kind in ("ns", "adjoint") and "q" in cfg.data["exponents"]:
        q = parse_exponent(cfg.data["exponents"]["q"])
        try:
            pair = serrin_exponents(grid.d, q)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if kind == "ns" and grid.d == 3 and not pair.serrin_ok:
            raise ConfigError("exponents violate 2/p + d/q = 1")
    if kind == "ns":
        if grid.d not in (2, 3):
            raise ConfigError("ns experiments need d = 2 or d = 3")
        if grid.d == 3 and phys["nu"] > 0 and "q" not in cfg.data["exponents"]:
            raise ConfigError("3D ns runs need exponents.q for the L1 vorticity bound")
    if kind == "euler-zero" and grid.d != 2:
        raise ConfigError("euler-zero runs are two dimensional")
    if kind == "sobolev-constant" and "s" not in cfg.data["exponents"]:
        raise ConfigError("sobolev-constant needs exponents.s")

    if kind in ("transport", "adjoint", "duality"):
        from .fieldspecs import build_field

        v = build_field(coefs["v"], grid, cfg.get("seeds.base", 0), vector=True)
        vmax = float(np.sqrt(np.sum(v.values**2, axis=0)).max())
        limit = phys["cfl_target"] * grid.h / vmax if vmax > 0 else math.inf
        if dt > limit * (1 + 1e-12):
            raise ConfigError(
                f"CFL pre-check failed: dt = {dt:g} > cfl_target * h / max|v| = {limit:.6g}"
            )


def eps_values(cfg: ExperimentConfig, grid) -> list[float]:
    k = cfg.data["kernel"]
    scale = grid.h if k["eps_units"] == "h" else 1.0
    return [float(e) * scale for e in k["eps"]]
