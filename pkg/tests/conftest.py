"""Shared fixtures.

The two expensive fixtures (full desk-scale pipeline run, planted
downstream comparison) are cached on disk under .cache/, keyed by the
hash of the resolved config.  Delete .cache/ to force a re-run.
"""

from __future__ import annotations

import copy
import json
import shutil
import time
from pathlib import Path

import pytest

from driftlab import cli, metrics
from driftlab.util import config_hash

REPO_ROOT = Path(__file__).resolve().parent.parent
CACHE_ROOT = REPO_ROOT / ".cache"


def resolved_config(scale: str | None = None, overrides: dict | None = None) -> dict:
    cfg = copy.deepcopy(cli.DEFAULTS)
    if scale is not None:
        cfg = cli.merge_config(cfg, cli.SCALES[scale])
    if overrides:
        cfg = cli.merge_config(cfg, overrides)
    return cfg


def _cached_run(tag: str, cfg: dict, runner) -> tuple[Path, float]:
    """Run `runner(cfg, out_dir)` once per config hash; reuse on re-test.

    elapsed.json is written last and doubles as the completion marker, so
    an interrupted run is redone from scratch.
    """
    run_dir = CACHE_ROOT / f"{tag}-{config_hash(cfg)}"
    marker = run_dir / "elapsed.json"
    if not marker.exists():
        if run_dir.exists():
            shutil.rmtree(run_dir)
        t0 = time.monotonic()
        runner(cfg, str(run_dir))
        elapsed = time.monotonic() - t0
        marker.write_text(json.dumps({"seconds": elapsed}))
    elapsed = json.loads(marker.read_text())["seconds"]
    return run_dir, elapsed


@pytest.fixture(scope="session")
def desk_run():
    """Full synth->embed->train->eval pipeline at desk scale (cached)."""
    cfg = resolved_config("desk")
    run_dir, elapsed = _cached_run("desk", cfg, cli.run_repro_synthetic)
    report = metrics.MetricsReport.from_json(
        (run_dir / "report" / "report.json").read_text()
    )
    return {"dir": run_dir, "report": report, "elapsed": elapsed, "config": cfg}


@pytest.fixture(scope="session")
def planted_run():
    """Planted-drift downstream comparison at desk scale (cached)."""
    cfg = resolved_config("desk")
    run_dir, elapsed = _cached_run("planted", cfg, cli.run_downstream_planted)
    report = metrics.MetricsReport.from_json(
        (run_dir / "report" / "report.json").read_text()
    )
    return {"dir": run_dir, "results": report.downstream, "elapsed": elapsed}
