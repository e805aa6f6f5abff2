"""Build Fields from the coefficient entries of an experiment config."""

from __future__ import annotations

import numpy as np

from .config import parse_exponent
from .grid import Field, Grid
from .mollify import RoughFieldSpec, synth_rough_field
from .spectral import lp_norm_values


def _named(name: str, grid: Grid, components: int | None, vector: bool) -> Field:
    d = grid.d
    m = components or (d if vector else 1)
    if name == "zero":
        return Field.zeros(grid, m)
    if name == "constant":
        return Field(grid, np.ones((m,) + grid.shape))
    if name == "cos-x1":
        f = Field.from_function(grid, lambda *x: np.cos(x[0]))
        return f if m == 1 else Field(grid, np.concatenate([f.values] + [np.zeros((1,) + grid.shape)] * (m - 1)))
    if name == "taylor-green":
        if d == 2:
            if vector:
                return Field.from_function(grid, lambda x, y: (np.cos(x) * np.sin(y), -np.sin(x) * np.cos(y)))
            return Field.from_function(grid, lambda x, y: -2.0 * np.cos(x) * np.cos(y))
        if d == 3:
            return Field.from_function(
                grid,
                lambda x, y, z: (
                    np.sin(x) * np.cos(y) * np.cos(z),
                    -np.cos(x) * np.sin(y) * np.cos(z),
                    0.0 * z,
                ),
            )
        raise ValueError("taylor-green needs d = 2 or 3")
    if name == "cellular":
        if d != 2:
            raise ValueError("the cellular field is two dimensional")
        return Field.from_function(grid, lambda x, y: (np.sin(y) + 0 * x, np.sin(x) + 0 * y))
    raise ValueError(f"unknown named field {name!r}")


def build_field(spec: dict, grid: Grid, seed_base: int = 0, vector: bool = False) -> Field:
    """Instantiate a coefficient entry; ``vector`` sets the default component count."""
    amp = float(spec.get("amplitude", 1.0))
    if spec["kind"] == "named":
        f = _named(spec["name"], grid, spec.get("components"), vector)
    else:
        div_free = spec.get("div_free", vector)
        rs = RoughFieldSpec(
            alpha=spec["alpha"],
            seed=int(spec.get("seed", 0)) + int(seed_base),
            mean_zero=spec.get("mean_zero", True),
            div_free=div_free,
            k_max=spec.get("k_max", 8),
            components=spec.get("components", grid.d if (vector or div_free) else 1),
        )
        f = synth_rough_field(rs, grid)
        norm = spec.get("normalize")
        if norm:
            current = lp_norm_values(f.values, parse_exponent(norm["q"]), grid.cell_volume)
            f = f * (norm["value"] / current)
    return f if amp == 1.0 else f * amp
