"""Python front end for the dqbrm solvers.

Configs are plain dicts with the same layout as the JSON files under configs/.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import _core
from ._core import ConfigError, empirical_cvar, empirical_quantile, model_names

__all__ = [
    "ConfigError",
    "CommandError",
    "empirical_cvar",
    "empirical_quantile",
    "empirical_qbrm",
    "model_names",
    "load_config",
    "solve",
    "run_command",
    "read_csv",
]


class CommandError(RuntimeError):
    def __init__(self, command: str, code: int, message: str):
        super().__init__(f"{command} failed with exit code {code}: {message.strip()}")
        self.code = code


def _dump(config: Mapping[str, Any] | str | os.PathLike) -> str:
    if isinstance(config, Mapping):
        return json.dumps(config)
    return Path(config).read_text()


def load_config(path: str | os.PathLike) -> dict:
    return json.loads(Path(path).read_text())


def empirical_qbrm(values: Sequence[float], risk: Mapping[str, Any], weights: Sequence[float] | None = None) -> float:
    """risk uses the config's "risk" section, e.g. {"combiner": "cvar", "alphas": [0.9]}."""
    return _core.empirical_qbrm(list(values), json.dumps(risk), None if weights is None else list(weights))


def solve(config: Mapping[str, Any] | str | os.PathLike, seed: int = 1, iterations: int | None = None) -> dict:
    """Runs one replication in-process.

    Returns q (T x d), u (m x T x d), pairs [(state, action)], iterations, and
    theta (T x d x K) plus lr_cap_hits when rds.enabled is set.
    """
    return _core.solve(_dump(config), seed, iterations)


def run_command(command: str, config: Mapping[str, Any] | str | os.PathLike, out: str | os.PathLike | None = None) -> str:
    """Runs a CLI command (run, benchmark, compare-rds, export-density) and returns its log."""
    text = _dump(config)
    if out is not None:
        cfg = json.loads(text)
        cfg["output"] = str(out)
        text = json.dumps(cfg)
    code, log, err = _core.run_command(command, text)
    if code == 1:
        raise ConfigError(err.strip())
    if code != 0:
        raise CommandError(command, code, err)
    return log


def read_csv(path: str | os.PathLike) -> tuple[str, dict[str, np.ndarray]]:
    """Reads an output CSV into (schema, columns). Non-numeric columns stay as strings."""
    schema = ""
    with open(path, newline="") as fh:
        first = fh.readline()
        if first.startswith("#schema="):
            schema = first[len("#schema="):].strip()
        else:
            fh.seek(0)
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    columns: dict[str, np.ndarray] = {}
    for i, name in enumerate(header):
        raw = [r[i] for r in body]
        try:
            columns[name] = np.array([float(x) if x != "" else np.nan for x in raw])
        except ValueError:
            columns[name] = np.array(raw)
    return schema, columns
