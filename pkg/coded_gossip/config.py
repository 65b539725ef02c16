"""Run configuration: YAML file, --set overrides and the default tree.

A run's configuration is the default tree below with the config file merged
over it and then every ``--set key.path=value`` applied. Keys that do not
exist in the default tree are rejected, except inside the free-form
sub-trees listed in FREE_FORM, which their consumers validate.
"""

import copy
import hashlib
import json
import os
from typing import Any, Dict, Iterable, List, Optional, Tuple

import yaml

from .errors import ConfigError

THREADS_ENV = "CODED_GOSSIP_THREADS"

DEFAULTS: Dict[str, Any] = {
    "seed": 1,
    "threads": None,
    "output_dir": "results",
    "field": {"p": 2, "m": 1, "modulus": None},
    "model": {
        "type": "random_phone_call",
        "n": 8,
        "mode": "exchange",
        "graph": "complete",
        "directed": False,
        "p_birth": 0.5,
        "p_death": 0.5,
        "initial": "empty",
        "loss": 0.0,
        "inner": None,
    },
    "source": {
        "family": "independent_uniform",
        "k": 1,
        "alphabet": 2,
        "crossover": 0.11,
        "correlation": 0.1,
        "side_info": None,
        "file": None,
    },
    "placement": None,
    "coding": {
        "l": 20,
        "s": 10,
        "delta": 0.1,
        "epsilon": 0.1,
        "decode_rule": "entropy",
        "check_consistency": False,
    },
    "experiment": {
        "stop_rule": "all",
        "node": 0,
        "max_rounds": 1000,
        "trials": 100,
        "bound": "none",
        "trace_nodes": [],
        "T": None,
        "alpha": None,
    },
    "flood": {
        "trials": 1000,
        "max_rounds": 1000,
        "max_starts": 8,
        "alpha_cap": 16.0,
        "min_tail_count": 5,
        "check_trials": 0,
    },
    "capacity": {
        "sources": [0],
        "demands": [1],
        "sink": None,
        "trials": 100,
        "max_rounds": 1000,
        "max_denominator": 1024,
        "dump_paths": False,
        "delta_inner": 0.1,
        "delta_outer": None,
    },
    "lemma4": {"q_values": [2, 3, 4], "ambient": [2, 3, 4], "h": [0, 1, 2], "strict": False},
    "oracle": {"message": 0, "node": 0, "l": 8, "trials": 1000},
    "sweep": {"key": "source.k", "values": [1, 2, 4, 8], "command": "gossip-run"},
}

# Sub-trees whose contents are not checked against DEFAULTS
FREE_FORM = {
    "placement",
    "source.side_info",
    "model.inner",
    "model.graph",
    "model.initial",
    "capacity.sources",
    "capacity.demands",
}

# CSV columns of every file a subcommand writes, for the schema dump
CSV_COLUMNS: Dict[str, Dict[str, str]] = {
    "flood_tail.csv": {
        "k": "Rounds beyond T",
        "t": "T + k",
        "count": "Trials of the worst start with S_F >= t",
        "probability": "count / trials",
    },
    "decode_times.csv": {
        "trial": "Trial index",
        "stop_time": "Stopping time under experiment.stop_rule (empty = timeout)",
        "node_<v>": "First round node v could decode (0 = before communication, empty = timeout)",
    },
    "feasible_times.csv": {
        "trial": "Trial index",
        "first_feasible_time": "First T' with every demand feasible (empty = timeout)",
        "paths": "Number of witness paths",
    },
    "lemma4.csv": {
        "q": "Field order",
        "ambient": "Ambient dimension",
        "h": "Dimension bound",
        "witnesses": "Size of the witness set",
        "subspaces": "Subspaces enumerated",
        "verified": "true iff every subspace has a witness in its orthogonal complement",
    },
    "oracle_curve.csv": {
        "equations": "Independent equations on the bin index",
        "errors": "Trials decoded wrongly or ambiguously",
        "trials": "Trials",
        "rate": "errors / trials",
    },
}


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else str(key)


def merge(base: dict, override: dict, path: str = "") -> dict:
    """Deep-merge override into a copy of base, rejecting unknown keys.

    Raises:
        ConfigError: On a key that base does not define, or a mapping where
            base has a scalar (and vice versa)
    """
    out = copy.deepcopy(base)
    for key, value in override.items():
        dotted = _join(path, key)
        if key not in base:
            raise ConfigError(f"Unknown config key: {dotted}")
        if dotted in FREE_FORM:
            out[key] = copy.deepcopy(value)
        elif isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{dotted} must be a mapping")
            out[key] = merge(base[key], value, dotted)
        else:
            if isinstance(value, dict):
                raise ConfigError(f"{dotted} must be a single value, not a mapping")
            out[key] = value
    return out


def load_config_file(file_path: str) -> dict:
    """Read a YAML config mapping.

    Raises:
        ConfigError: If the file is missing, unreadable, not YAML or not a mapping;
            parse errors name the line and column
    """
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {file_path}")
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f":{mark.line + 1}:{mark.column + 1}" if mark is not None else ""
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"Invalid YAML in {file_path}{where}: {problem}")
    except IOError as exc:
        raise ConfigError(f"Could not read config file: {exc}")

    # Empty file → safe_load returns None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(
            "Config file must contain a YAML mapping (key: value), not a list or scalar"
        )
    return data


def parse_override(text: str) -> Tuple[List[str], Any]:
    """Split ``a.b.c=value``; the value is parsed as YAML."""
    if "=" not in text:
        raise ConfigError(f"--set expects key.path=value, got '{text}'")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"--set expects key.path=value, got '{text}'")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as exc:
        raise ConfigError(f"--set {key}: value is not valid YAML ({exc})")
    return key.split("."), value


def set_path(config: dict, parts: List[str], value: Any) -> None:
    """Set one leaf in place, checking the path against DEFAULTS."""
    node, defaults = config, DEFAULTS
    for depth, part in enumerate(parts):
        dotted = ".".join(parts[: depth + 1])
        last = depth == len(parts) - 1
        if defaults is not None and part not in defaults:
            raise ConfigError(f"Unknown config key: {dotted}")
        if last:
            node[part] = value
            return
        if dotted in FREE_FORM:
            defaults = None
        else:
            defaults = defaults[part] if defaults is not None else None
            if defaults is not None and not isinstance(defaults, dict):
                raise ConfigError(f"{dotted} is a single value, cannot set {'.'.join(parts)}")
        if not isinstance(node.get(part), dict):
            node[part] = {}
        node = node[part]


def resolve(file_data: Optional[dict] = None, overrides: Iterable[str] = ()) -> dict:
    """DEFAULTS, then the config file, then each --set override."""
    config = merge(DEFAULTS, file_data or {})
    for text in overrides:
        parts, value = parse_override(text)
        set_path(config, parts, value)
    return config


def get(config: dict, dotted: str) -> Any:
    node = config
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"Unknown config key: {dotted}")
        node = node[part]
    return node


def config_hash(config: dict) -> str:
    """sha256 of the canonical JSON form of the resolved config."""
    canonical = json.dumps(config, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def thread_count(config: dict) -> int:
    """Worker threads: config, then CODED_GOSSIP_THREADS, then 1."""
    value = config.get("threads")
    if value is None:
        value = os.environ.get(THREADS_ENV, "1")
    try:
        threads = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"threads must be an integer, got {value!r}")
    if threads < 1:
        raise ConfigError(f"threads must be at least 1, got {threads}")
    return threads


def schema_text() -> str:
    """The default tree as YAML plus the CSV column documentation."""
    lines = ["# Default configuration", yaml.safe_dump(DEFAULTS, sort_keys=False).rstrip(), ""]
    lines.append("# CSV columns")
    for name, columns in CSV_COLUMNS.items():
        lines.append(f"{name}:")
        for column, doc in columns.items():
            lines.append(f"  {column}: {doc}")
    return "\n".join(lines) + "\n"
