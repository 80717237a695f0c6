"""Config parsing, run management, and all serialization.

Configs are strict JSON: unknown keys and duplicate keys are rejected (a
typo in a scientific run must fail loudly, not silently fall back to a
default), every default is echoed into the resolved config, and a sha256
digest of the canonical resolved form is attached for reproducibility.

All files are written atomically (temp file + rename); time series go out
as full-precision CSV so round-trips are exact.
"""

import hashlib
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from .core import DomainError, InsufficientDataError
from .experiments import TIMESERIES_FIELDS

CSV_HEADER = ",".join(TIMESERIES_FIELDS)


class ConfigError(ValueError):
    """Invalid configuration: unknown key, bad range, malformed JSON."""


EXPERIMENTS = ("baseline", "conservation", "intervention", "thermalization")
ENGINES = ("kesten", "exchange")
REDISTRIBUTIONS = ("UniformPerCapita", "ProportionalToWealth")
SELECTIONS = ("RandomFraction", "BreadthFirstBall")

_DEFAULTS = {
    "engine": "kesten",
    "n_agents": 1000,
    "steps": 1000,
    "burn_in": 1000,
    "stride": 100,
    "seed": 42,
    "replicas": 10,
    "output_dir": ".",
    "kesten": {"alpha_target": 1.5, "sigma": 0.1, "x_min": 1.0},
    "exchange": {"gamma": 0.5, "f": 0.1},
    "network": {"m": 2},
    "channel": {"tax_rate": 0.0, "gamma_gov": 0.0,
                "redistribution": "ProportionalToWealth",
                "selection": "BreadthFirstBall", "fraction": 0.4},
    "thermalization": {"gamma_a": 1.0, "gamma_b": 0.2, "coupling": 10000,
                       "checkpoints": 5, "window": 0.5},
}


@dataclass
class RunConfig:
    experiment: str
    engine: str
    n_agents: int
    steps: int
    burn_in: int
    stride: int
    seed: int
    replicas: int
    output_dir: str
    kesten: dict
    exchange: dict
    network: dict
    channel: dict
    thermalization: dict
    resolved: dict
    digest: str


def _no_duplicates(pairs):
    seen = set()
    for k, _ in pairs:
        if k in seen:
            raise ConfigError(f"duplicate key: {k!r}")
        seen.add(k)
    return dict(pairs)


def _want(raw, path, kind, lo=None, hi=None, lo_open=False, hi_open=False,
          choices=None):
    v = raw
    if kind is int:
        if not isinstance(v, int) or isinstance(v, bool):
            raise ConfigError(f"{path}: expected integer, got {v!r}")
    elif kind is float:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{path}: expected number, got {v!r}")
        v = float(v)
    elif kind is str:
        if not isinstance(v, str):
            raise ConfigError(f"{path}: expected string, got {v!r}")
    if choices is not None and v not in choices:
        raise ConfigError(f"{path}: must be one of {choices}, got {v!r}")
    if lo is not None and (v <= lo if lo_open else v < lo):
        b = "(" if lo_open else "["
        raise ConfigError(f"{path}: out of range {b}{lo}, ...], got {v!r}")
    if hi is not None and (v >= hi if hi_open else v > hi):
        b = ")" if hi_open else "]"
        raise ConfigError(f"{path}: out of range [..., {hi}{b}, got {v!r}")
    return v


def _merge_section(user, defaults, path, rules):
    if not isinstance(user, dict):
        raise ConfigError(f"{path}: expected an object, got {user!r}")
    for k in user:
        if k not in defaults:
            raise ConfigError(f"unknown key: {path}.{k}")
    out = {}
    for k, dflt in defaults.items():
        out[k] = _want(user.get(k, dflt), f"{path}.{k}", *rules[k][0],
                       **rules[k][1])
    return out

_SECTION_RULES = {
    "kesten": {"alpha_target": ((float,), dict(lo=1.0, lo_open=True, hi=2.0)),
               "sigma": ((float,), dict(lo=0.0, lo_open=True)),
               "x_min": ((float,), dict(lo=0.0, lo_open=True))},
    "exchange": {"gamma": ((float,), dict(lo=0.0, hi=1.0)),
                 "f": ((float,), dict(lo=0.0, lo_open=True, hi=1.0,
                                      hi_open=True))},
    "network": {"m": ((int,), dict(lo=1))},
    "channel": {"tax_rate": ((float,), dict(lo=0.0, hi=1.0, hi_open=True)),
                "gamma_gov": ((float,), dict(lo=0.0, hi=1.0, hi_open=True)),
                "redistribution": ((str,), dict(choices=REDISTRIBUTIONS)),
                "selection": ((str,), dict(choices=SELECTIONS)),
                "fraction": ((float,), dict(lo=0.0, lo_open=True, hi=1.0,
                                            hi_open=True))},
    "thermalization": {"gamma_a": ((float,), dict(lo=0.0, hi=1.0)),
                       "gamma_b": ((float,), dict(lo=0.0, hi=1.0)),
                       "coupling": ((int,), dict(lo=1)),
                       "checkpoints": ((int,), dict(lo=1)),
                       "window": ((float,), dict(lo=0.0, lo_open=True))},
}


def parse_config(text, seed_override=None):
    """Parse and validate a JSON config, filling every default, and attach
    the sha256 digest of the canonical resolved form."""
    try:
        raw = json.loads(text, object_pairs_hook=_no_duplicates)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("top-level config must be a JSON object")
    known = set(_DEFAULTS) | {"experiment"}
    for k in raw:
        if k not in known:
            raise ConfigError(f"unknown key: {k}")
    if "experiment" not in raw:
        raise ConfigError("missing required field: experiment")
    resolved = {
        "experiment": _want(raw["experiment"], "experiment", str,
                            choices=EXPERIMENTS),
        "engine": _want(raw.get("engine", _DEFAULTS["engine"]), "engine",
                        str, choices=ENGINES),
        "n_agents": _want(raw.get("n_agents", _DEFAULTS["n_agents"]),
                          "n_agents", int, lo=1),
        "steps": _want(raw.get("steps", _DEFAULTS["steps"]), "steps", int,
                       lo=0),
        "burn_in": _want(raw.get("burn_in", _DEFAULTS["burn_in"]), "burn_in",
                         int, lo=0),
        "stride": _want(raw.get("stride", _DEFAULTS["stride"]), "stride",
                        int, lo=1),
        "seed": _want(raw.get("seed", _DEFAULTS["seed"]), "seed", int, lo=0,
                      hi=2 ** 64 - 1),
        "replicas": _want(raw.get("replicas", _DEFAULTS["replicas"]),
                          "replicas", int, lo=1),
        "output_dir": _want(raw.get("output_dir", _DEFAULTS["output_dir"]),
                            "output_dir", str),
    }
    for section, rules in _SECTION_RULES.items():
        resolved[section] = _merge_section(raw.get(section, {}),
                                           _DEFAULTS[section], section, rules)
    if seed_override is not None:
        resolved["seed"] = _want(seed_override, "seed", int, lo=0,
                                 hi=2 ** 64 - 1)
    # output_dir routes files without affecting the science, so it is left
    # out of the digest: the same run written elsewhere is the same run
    canonical = json.dumps({k: v for k, v in resolved.items()
                            if k != "output_dir"},
                           sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(canonical.encode()).hexdigest()
    return RunConfig(resolved=resolved, digest=digest, **resolved)


# ---------------------------------------------------------------------------
# serialization


def _atomic_write(path, body):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d)
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(body)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_timeseries(report, path):
    """Pinned-header CSV, one row per sampled stride, full double precision,
    LF line endings.  An empty trajectory yields a header-only file."""
    lines = [CSV_HEADER]
    for row in report.trajectories:
        lines.append(",".join(repr(float(v)) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_timeseries(path):
    """Inverse of write_timeseries; returns rows of floats."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ConfigError(f"unexpected header: {header!r}")
        return [tuple(float(v) for v in line.split(","))
                for line in fh if line.strip()]


def write_summary(report, path):
    """Digest, seeds, verdicts with tolerances, and experiment details;
    wall-clock data lives under `meta`, excluded from any digest check."""
    doc = {
        "experiment": report.experiment,
        "config_digest": report.config_digest,
        "seeds": list(report.seeds),
        "verdicts": report.verdicts,
        "details": report.details,
        "n_trajectory_rows": len(report.trajectories),
        "meta": {"wall_clock_utc": time.strftime(
            "%Y-%m-%dT%H:%M:%SZ", time.gmtime())},
    }
    if not report.trajectories:
        doc["warning"] = "empty trajectory: header-only time series"
    _atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def emit_plot_data(wealths, bins, ccdf_path, hist_path):
    """Plot-ready tail data: a CCDF over sorted unique values and a
    log-binned normalized histogram, each a two-column CSV."""
    x = np.asarray(wealths, float)
    if np.any(x <= 0):
        raise DomainError("samples must be strictly positive")
    if x.size < 10:
        raise InsufficientDataError(f"need >= 10 samples, got {x.size}")
    if bins < 2:
        raise ConfigError(f"bins must be >= 2, got {bins}")
    xs = np.sort(x)
    vals, first = np.unique(xs, return_index=True)
    ccdf = 1.0 - first / x.size  # P(X >= x), one step per distinct value
    lines = ["x,ccdf"]
    lines += [f"{float(v)!r},{float(p)!r}" for v, p in zip(vals, ccdf)]
    _atomic_write(ccdf_path, "\n".join(lines) + "\n")

    lo, hi = float(xs[0]), float(xs[-1])
    if lo == hi:
        hi = lo * (1.0 + 1e-9)
    edges = np.geomspace(lo, hi, bins + 1)
    counts, edges = np.histogram(x, bins=edges)
    dens = counts / (x.size * np.diff(edges))
    centers = np.sqrt(edges[:-1] * edges[1:])
    lines = ["bin_center,density"]
    lines += [f"{float(c)!r},{float(d)!r}" for c, d in zip(centers, dens)]
    _atomic_write(hist_path, "\n".join(lines) + "\n")


def read_samples(path):
    """One value per line (or first CSV column); a non-numeric first line is
    treated as a header."""
    out = []
    with open(path) as fh:
        for i, line in enumerate(fh):
            cell = line.strip().split(",")[0]
            if not cell:
                continue
            try:
                out.append(float(cell))
            except ValueError:
                if i == 0:
                    continue
                raise ConfigError(f"{path}:{i + 1}: not a number: {cell!r}")
    if not out:
        raise InsufficientDataError(f"no samples in {path}")
    return np.array(out)
