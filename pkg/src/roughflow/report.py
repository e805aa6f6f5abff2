"""Plain-text summaries and SVG plots for finished runs."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .runner import RunManifest  # noqa: E402
from .snapshots import read_csv  # noqa: E402

# fixed salt and no date stamp keep SVG output byte-stable
plt.rcParams["svg.hashsalt"] = "roughflow"


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "yes" if x else "no"
    if isinstance(x, (int, float)):
        return f"{x:.6g}"
    return str(x)


def _summary_text(manifest: RunManifest) -> str:
    root = Path(manifest.root)
    lines = [
        f"experiment   {manifest.kind}",
        f"config hash  {manifest.config_hash}",
        f"version      {manifest.tool_version}",
        "",
        f"{'check':<48} {'result':<6} {'value':>14} {'threshold':>14}",
        "-" * 85,
    ]
    for v in manifest.verdicts:
        lines.append(
            f"{v['name'][:48]:<48} {'pass' if v['passed'] else 'FAIL':<6} {_fmt(v['value']):>14} {_fmt(v['threshold']):>14}"
        )
    lines.append("")
    lines.append(f"overall: {'PASS' if manifest.passed else 'FAIL'}")
    resolved = [root / "resolved_config.json"] + sorted(root.glob("child_*/resolved_config.json"))
    for path in resolved:
        if path.is_file():
            data = json.loads(path.read_text())
            lines += ["", f"resolved config ({path.relative_to(root)}):"]
            lines += ["  " + ln for ln in json.dumps(data["config"], indent=2, sort_keys=True).splitlines()]
            lines.append("  defaults applied:")
            lines += [f"    {d}" for d in data["defaults_applied"]] or ["    (none)"]
    return "\n".join(lines) + "\n"


def render_plot(spec: dict, root: Path) -> Path:
    table = read_csv(root / f"{spec['table']}.csv")
    x = table[spec["x"]]
    fig, ax = plt.subplots(figsize=(6, 4))
    for y in spec["ys"]:
        if y not in table:
            continue
        vals = table[y]
        if spec["kind"] == "loglog":
            ok = (x > 0) & (vals > 0)
            ax.loglog(x[ok], vals[ok], "o-", label=y)
        else:
            ax.plot(x, vals, "-" if spec["kind"] == "timeseries" else ("--" if y == "bound" else "-"), label=y)
    if spec["kind"] == "overlay" and "bound" in table and np.all(table["bound"] > 0):
        if table["bound"].max() / table["bound"].min() > 100:
            ax.set_yscale("log")
    ax.set_xlabel(spec["x"])
    ax.set_title(spec["title"])
    if spec.get("annotate"):
        ax.annotate(spec["annotate"], xy=(0.05, 0.92), xycoords="axes fraction")
    ax.legend()
    fig.tight_layout()
    out = root / spec["file"]
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out


def emit_report(manifest: RunManifest) -> list[Path]:
    """Write ``summary.txt`` and the SVG plots; refreshes the manifest digests."""
    if not manifest.complete:
        raise ValueError("manifest is incomplete; rerun the experiment first")
    if not manifest.verdicts:
        raise ValueError("nothing to report")
    root = Path(manifest.root)
    written = [root / "summary.txt"]
    written[0].write_text(_summary_text(manifest))
    for spec in manifest.plots:
        written.append(render_plot(spec, root))
    manifest.refresh_digests()
    manifest.write()
    return written
