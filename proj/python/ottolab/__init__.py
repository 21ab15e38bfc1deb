import json
import os

from ._core import *  # noqa: F401,F403
from ._core import Error, __version__, _compare_runs, _run_scenario


def run_scenario(config, out_dir):
    """Run a scenario and return its manifest.

    `config` is a dict, a JSON string or a path to a JSON file.
    """
    if isinstance(config, dict):
        text = json.dumps(config)
    elif isinstance(config, os.PathLike) or (isinstance(config, str) and not config.lstrip().startswith("{")):
        with open(config) as f:
            text = f.read()
    else:
        text = config
    return json.loads(_run_scenario(text, os.fspath(out_dir)))


def compare_runs(a, b, rel_tol=0.0):
    return json.loads(_compare_runs(os.fspath(a), os.fspath(b), rel_tol))
