"""Python access to the planex agent core."""

import json
import os
from pathlib import Path

from . import _core

__all__ = ["run_task", "run_sample", "sample_ids", "metrics", "compare", "execute", "data_dir"]


def data_dir():
    return Path(os.environ.get("PLANEX_DATA_DIR", Path(__file__).resolve().parent / "data"))


def _as_json(obj):
    return obj if isinstance(obj, str) else json.dumps(obj)


def run_task(task, world_dir=None, run_id="adhoc"):
    """Runs one task dict against the simulated world and returns the outcome."""
    world = str(world_dir or data_dir() / "world")
    return json.loads(_core.run_world_task(world, _as_json(task), run_id))


def run_sample(sample="initial", seed=0, workers=1, run_id="run", data=None):
    return json.loads(_core.run_sample(str(data or data_dir()), sample, seed, workers, run_id))


def sample_ids(sample, seed=0, manifest=None):
    return _core.sample_ids(str(manifest or data_dir() / "manifest" / "tasks_812.json"), sample, seed)


def metrics(run):
    return json.loads(_core.metrics(_as_json(run)))


def compare(base, new):
    return json.loads(_core.compare(_as_json(base), _as_json(new)))


def execute(source, variables=None):
    return json.loads(_core.execute(source, json.dumps(variables or {})))
