"""Run experiments, persist their outputs and keep a digest manifest."""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .config import ExperimentConfig, canonical_json, resolve
from .errors import SolverAbort
from .experiments import PIPELINES, save_snapshots
from .snapshots import write_csv

MANIFEST = "manifest.json"


def tool_version() -> str:
    from . import __version__

    return __version__


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("ROUGHFLOW_WORKERS", "1")))
    except ValueError:
        return 1


@dataclass
class RunManifest:
    root: str
    config_hash: str
    kind: str
    tool_version: str
    started: float
    finished: float | None = None
    complete: bool = False
    files: dict[str, str] = field(default_factory=dict)
    verdicts: list[dict] = field(default_factory=list)
    plots: list[dict] = field(default_factory=list)
    children: list[str] = field(default_factory=list)
    error: str | None = None
    aborted_step: int | None = None

    @property
    def passed(self) -> bool:
        return self.complete and all(v["passed"] for v in self.verdicts)

    def as_dict(self) -> dict:
        return dict(self.__dict__)

    def write(self) -> Path:
        path = Path(self.root) / MANIFEST
        path.write_text(json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n")
        return path

    def refresh_digests(self) -> None:
        root = Path(self.root)
        self.files = {
            str(p.relative_to(root)): sha256_file(p)
            for p in sorted(root.rglob("*"))
            if p.is_file() and p.name != MANIFEST
        }

    @classmethod
    def load(cls, directory) -> "RunManifest":
        data = json.loads((Path(directory) / MANIFEST).read_text())
        data["root"] = str(Path(directory))
        return cls(**data)


def verify_manifest(directory) -> list[str]:
    """Paths whose digest no longer matches (or that went missing)."""
    m = RunManifest.load(directory)
    bad = []
    for rel, digest in m.files.items():
        p = Path(directory) / rel
        if not p.is_file() or sha256_file(p) != digest:
            bad.append(rel)
    return bad


def _write_result(cfg: ExperimentConfig, result, root: Path) -> None:
    (root / "resolved_config.json").write_text(
        json.dumps({"config": cfg.data, "defaults_applied": cfg.defaults_applied, "config_hash": cfg.hash},
                   indent=2, sort_keys=True) + "\n"
    )
    for name, table in result.tables.items():
        if table and len(next(iter(table.values()))):
            write_csv(root / f"{name}.csv", table)
    summary = {
        "config_hash": cfg.hash,
        "seed": cfg.get("seeds.base", 0),
        "grid": cfg.data["grid"],
        "summary": result.summary,
        "verdicts": [v.as_dict() for v in result.verdicts],
    }
    (root / "results.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=float) + "\n")
    for name, traj in result.trajectories.items():
        save_snapshots(traj, root / f"trajectory_{name}")


def _run_single(cfg: ExperimentConfig, root: Path) -> RunManifest:
    root.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(str(root), cfg.hash, cfg.kind, tool_version(), time.time())
    try:
        result = PIPELINES[cfg.kind](cfg)
        _write_result(cfg, result, root)
        manifest.verdicts = [v.as_dict() for v in result.verdicts]
        manifest.plots = [p.as_dict() for p in result.plots]
        manifest.complete = True
    except SolverAbort as exc:
        manifest.error = str(exc)
        manifest.aborted_step = exc.step
    finally:
        manifest.finished = time.time()
        manifest.refresh_digests()
        manifest.write()
    return manifest


def _child_entry(args):
    data, root = args
    return _run_single(resolve(data), Path(root)).as_dict()


def run_experiment(cfg: ExperimentConfig, out=None, workers: int | None = None) -> RunManifest:
    """Execute a config (and its sweep children) and write all artifacts.

    A solver abort leaves a manifest marked incomplete and is re-raised.
    """
    root = Path(out or cfg.get("output.dir"))
    children = cfg.children()
    if len(children) == 1 and not cfg.data.get("sweep"):
        manifest = _run_single(cfg, root)
        if not manifest.complete:
            raise SolverAbort(manifest.error or "run aborted", manifest.aborted_step)
        return manifest

    root.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(str(root), cfg.hash, cfg.kind, tool_version(), time.time())
    jobs = [(c.data, str(root / f"child_{i:03d}")) for i, c in enumerate(children)]
    workers = workers or default_workers()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_child_entry, jobs))
    else:
        results = [_child_entry(j) for j in jobs]
    (root / "sweep_config.json").write_text(canonical_json(cfg.data) + "\n")
    manifest.children = [Path(r["root"]).name for r in results]
    for r in results:
        name = Path(r["root"]).name
        manifest.verdicts += [{**v, "name": f"{name}: {v['name']}"} for v in r["verdicts"]]
        manifest.plots += [{**p, "file": f"{name}/{p['file']}", "table": f"{name}/{p['table']}"} for p in r["plots"]]
    errors = [r["error"] for r in results if r["error"]]
    manifest.complete = not errors
    manifest.error = "; ".join(errors) or None
    manifest.finished = time.time()
    manifest.refresh_digests()
    manifest.write()
    if errors:
        raise SolverAbort(manifest.error)
    return manifest
