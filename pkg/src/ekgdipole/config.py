"""JSON run configuration with strict key checking."""

import dataclasses
import json
from dataclasses import dataclass, field

from .data import EdLayout, PtbHoldout
from .inference import FitConfig
from .ppca import PpcaConfig
from .priors import PriorConfig, TorsoEllipse
from .synth import DipoleLoop, LowRank


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    fit: FitConfig = field(default_factory=FitConfig)
    ppca: PpcaConfig = field(default_factory=PpcaConfig)
    priors: PriorConfig = field(default_factory=PriorConfig)
    ptb: PtbHoldout = field(default_factory=PtbHoldout)
    ed: EdLayout = field(default_factory=EdLayout)


_NESTED = {
    (RunConfig, "fit"): FitConfig,
    (RunConfig, "ppca"): PpcaConfig,
    (RunConfig, "priors"): PriorConfig,
    (RunConfig, "ptb"): PtbHoldout,
    (RunConfig, "ed"): EdLayout,
    (PriorConfig, "ellipse"): TorsoEllipse,
    (DipoleLoop, "priors"): PriorConfig,
}


def build(cls, values, where=""):
    """Instantiate dataclass ``cls`` from a dict, rejecting unknown keys."""
    if not isinstance(values, dict):
        raise ConfigError(f"{where or cls.__name__}: expected an object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - set(names))
    if unknown:
        raise ConfigError(f"{where or cls.__name__}: unknown keys {unknown}")
    kwargs = {}
    for key, value in values.items():
        sub = _NESTED.get((cls, key))
        if sub is not None:
            value = build(sub, value, f"{where}{key}.")
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where or cls.__name__}: {exc}") from None


def to_dict(obj):
    out = {}
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        if dataclasses.is_dataclass(v):
            v = to_dict(v)
        elif isinstance(v, tuple):
            v = list(v)
        out[f.name] = v
    return out


def load_run_config(path=None):
    if path is None:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            values = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return build(RunConfig, values)


SYNTH_KINDS = {"DipoleLoop": DipoleLoop, "LowRank": LowRank}


def load_synth_spec(path):
    """Parse a synth spec file into (spec list, record ids).

    The file holds one object with ``kind`` plus generator fields, and
    optionally ``count`` (records with seeds ``seed .. seed + count - 1``)
    and ``record_prefix``.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            values = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read synth spec {path}: {exc}") from None
    if not isinstance(values, dict):
        raise ConfigError("synth spec must be a JSON object")
    values = dict(values)
    kind = values.pop("kind", None)
    if kind not in SYNTH_KINDS:
        raise ConfigError(f"synth spec kind must be one of {sorted(SYNTH_KINDS)}")
    count = values.pop("count", 1)
    prefix = values.pop("record_prefix", kind.lower())
    if not isinstance(count, int) or count < 1:
        raise ConfigError("count must be a positive integer")
    seed = values.pop("seed", 0)
    specs, ids = [], []
    for i in range(count):
        specs.append(build(SYNTH_KINDS[kind], dict(values, seed=seed + i), "spec."))
        ids.append(f"{prefix}_{i:03d}")
    return specs, ids
