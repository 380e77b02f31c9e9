"""Run configuration: TOML file values overridden by command-line flags.

Example ``run.toml``::

    manifest = "data/manifest.json"
    split = "ntu120"
    protocol = 1
    episodes = 1000
    strategy = "MC"
    seed = 0
    out = "reports"

    [solver]
    solver = "auto"
    epsilon = 0.05
"""

import os
import sys
from dataclasses import asdict, dataclass, fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .matching import KINDS, MatchStrategy
from .ot import SolverOptions


@dataclass
class RunConfig:
    manifest: str = None
    split: str = None
    protocol: int = 1
    episodes: int = 1000
    n_way: int = 5
    n_query: int = 15
    strategy: str = "MC"
    inner_normalization: bool = False
    solver: str = "auto"
    epsilon: float = 0.05
    tol: float = 1e-6
    max_iter: int = 1000
    exact_limit: int = 4096
    frames: int = 32
    source: str = "tensor-dir"
    seed: int = 0
    shuffle_labels: bool = False
    workers: int = None
    out: str = "."

    def validate(self, check_paths=True):
        def bad(name, why):
            raise ConfigError(f"{name}: {why}", "config-invalid")

        if self.strategy not in KINDS:
            bad("strategy", f"expected one of {', '.join(KINDS)}, got {self.strategy!r}")
        if self.solver not in ("exact", "sinkhorn", "auto"):
            bad("solver", f"expected exact, sinkhorn or auto, got {self.solver!r}")
        if self.protocol not in (1, 2):
            bad("protocol", f"expected 1 or 2, got {self.protocol!r}")
        if self.source not in ("raw", "tensor-dir"):
            bad("source", f"expected raw or tensor-dir, got {self.source!r}")
        for name in ("epsilon", "tol"):
            if not getattr(self, name) > 0:
                bad(name, "must be > 0")
        for name in ("episodes", "n_way", "n_query", "max_iter", "exact_limit", "frames"):
            if not getattr(self, name) >= 1:
                bad(name, "must be >= 1")
        if self.frames % 4:
            bad("frames", f"must be a multiple of 4, got {self.frames}")
        if self.workers is not None and self.workers < 1:
            bad("workers", "must be >= 1")
        if check_paths:
            if not self.manifest:
                bad("manifest", "required")
            if not os.path.isfile(self.manifest):
                bad("manifest", f"no such file {self.manifest!r}")
            if not self.split:
                bad("split", "required")
        return self

    def solver_options(self):
        return SolverOptions(self.solver, self.epsilon, self.tol, self.max_iter, self.exact_limit)

    def match_strategy(self):
        return MatchStrategy(self.strategy, self.solver_options(), self.inner_normalization)

    def to_dict(self):
        return asdict(self)


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _coerce(name, value):
    kind = _FIELDS[name].type
    if value is None:
        return None
    try:
        if kind in (int, "int"):
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError
            return int(value)
        if kind in (float, "float"):
            return float(value)
        if kind in (bool, "bool"):
            if not isinstance(value, bool):
                raise ValueError
            return value
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: cannot use {value!r} as {getattr(kind, '__name__', kind)}", "config-invalid") from None


def load_config(path=None, overrides=None):
    """Build a RunConfig from an optional TOML file plus non-None overrides.

    Nested tables (e.g. ``[solver]``) are flattened; relative paths in the
    file resolve against the file's directory.
    """
    values = {}
    if path is not None:
        try:
            with open(path, "rb") as f:
                doc = tomllib.load(f)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}", "config-invalid") from None
        flat = {}
        for k, v in doc.items():
            if isinstance(v, dict):
                flat.update(v)
            else:
                flat[k] = v
        root = os.path.dirname(os.path.abspath(path))
        for k, v in flat.items():
            if k not in _FIELDS:
                raise ConfigError(f"{k}: unknown config field", "config-invalid")
            values[k] = _coerce(k, v)
        for k in ("manifest", "out"):
            if values.get(k) is not None and not os.path.isabs(values[k]):
                values[k] = os.path.join(root, values[k])
        split = values.get("split")
        if split and split.endswith(".json") and not os.path.isabs(split):
            values["split"] = os.path.join(root, split)
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = _coerce(k, v)
    return RunConfig(**values)
