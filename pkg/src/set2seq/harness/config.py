"""Run configuration: YAML files, dotted overrides, strict validation.

Defaults match the full-scale training profile (d_model 256, 4 heads, 3
interdependence layers, AdamW lr 1e-4 / weight decay 1e-2, dropout 0.1,
batch 32, 50 epochs, lambda 0.1).  `profile: desk` overlays the small CPU
profile (d_model 64, 2 heads, 2 layers, 20 epochs).  Precedence: defaults
< profile < config file < --override key=value.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml


class ConfigError(ValueError):
    pass


@dataclass
class ModelSection:
    d_model: int = 256
    n_heads: int = 4
    n_sit_layers: int = 3
    sigma: str = "softmax"
    use_residual: bool = True
    use_layer_norm: bool = True
    augment_set: bool = True
    d_att: int | None = None
    pair_hidden: int | None = None


@dataclass
class OptimSection:
    lr: float = 1e-4
    weight_decay: float = 1e-2
    batch_size: int = 32
    epochs: int = 50
    lambda_pair: float = 0.1
    dropout: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 5.0
    pair_cap: int = 32
    subtract_pair_term: bool = False
    stop_metric: str | None = None   # early stop on a validation metric...
    stop_value: float | None = None  # ...once it reaches this value


@dataclass
class DataSection:
    task: str = "anbncn"
    count: int = 1000
    n_min: int = 1
    n_max: int = 8
    k_min: int = 1
    k_max: int = 4
    n_rel: int = 3
    card_min: int = 10
    card_max: int = 15
    key_min: int = 1
    key_max: int = 50
    modulus: int = 97
    distractor_dims: int = 2
    convention: str = "closed"
    with_targets: bool = True
    eval_count: int = 500
    eval_n_min: int | None = None   # defaults to the training range
    eval_n_max: int | None = None
    val_fraction: float = 0.1
    train_path: str | None = None   # explicit datasets override generation
    eval_path: str | None = None


@dataclass
class RunConfig:
    seed: int = 0
    precision: str = "single"
    eval_every: int = 1
    profile: str | None = None
    model: ModelSection = field(default_factory=ModelSection)
    optim: OptimSection = field(default_factory=OptimSection)
    data: DataSection = field(default_factory=DataSection)

    def resolved(self) -> dict:
        d = asdict(self)
        d["optim"]["lambda"] = d["optim"].pop("lambda_pair")
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]

    def validate(self) -> "RunConfig":
        m, o, d = self.model, self.optim, self.data
        if self.precision not in ("single", "double"):
            raise ConfigError(f"precision must be 'single' or 'double', got {self.precision!r}")
        if self.eval_every < 1:
            raise ConfigError(f"eval_every must be >= 1, got {self.eval_every}")
        if m.d_model <= 0 or m.n_heads <= 0 or m.d_model % m.n_heads:
            raise ConfigError(f"n_heads must divide d_model, got {m.d_model}/{m.n_heads}")
        if m.n_sit_layers < 0:
            raise ConfigError(f"model.n_sit_layers must be >= 0, got {m.n_sit_layers}")
        if m.sigma not in ("softmax", "tanh", "relu"):
            raise ConfigError(f"model.sigma must be softmax|tanh|relu, got {m.sigma!r}")
        if o.lr <= 0 or o.weight_decay < 0 or o.eps <= 0:
            raise ConfigError("optim.lr must be > 0, weight_decay >= 0, eps > 0")
        if not (0 <= o.beta1 < 1 and 0 <= o.beta2 < 1):
            raise ConfigError(f"optim betas must lie in [0, 1), got ({o.beta1}, {o.beta2})")
        if o.batch_size < 1 or o.epochs < 0 or o.pair_cap < 1:
            raise ConfigError("optim.batch_size/pair_cap must be >= 1, epochs >= 0")
        if not 0.0 <= o.dropout < 1.0:
            raise ConfigError(f"optim.dropout must be in [0, 1), got {o.dropout}")
        if o.clip_norm <= 0:
            raise ConfigError(f"optim.clip_norm must be > 0, got {o.clip_norm}")
        if (o.stop_metric is None) != (o.stop_value is None):
            raise ConfigError("optim.stop_metric and optim.stop_value must be set together")
        if d.task not in TASKS:
            raise ConfigError(f"data.task must be one of {sorted(TASKS)}, got {d.task!r}")
        if not 0.0 <= d.val_fraction < 1.0:
            raise ConfigError(f"data.val_fraction must be in [0, 1), got {d.val_fraction}")
        if d.task == "embedded" and not d.train_path:
            raise ConfigError("data.task 'embedded' requires data.train_path")
        return self


TASKS = ("tsp", "anbncn", "anbkcnk", "dyck", "ruleset", "embedded")

_SECTIONS = {"model": ModelSection, "optim": OptimSection, "data": DataSection}
_TOP_FIELDS = {"seed": int, "precision": str, "eval_every": int, "profile": (str, type(None))}

# YAML spellings that differ from the dataclass field names.
_ALIASES = {("optim", "lambda"): "lambda_pair"}
_REVERSE_ALIASES = {v: k for (_, k), v in _ALIASES.items()}

PROFILES: dict[str, dict] = {
    "full": {},  # the defaults
    "desk": {
        "model": {"d_model": 64, "n_heads": 2, "n_sit_layers": 2},
        "optim": {"epochs": 20},
    },
}


def _valid_keys(section: str | None) -> list[str]:
    if section is None:
        return sorted(list(_TOP_FIELDS) + list(_SECTIONS))
    cls = _SECTIONS[section]
    keys = []
    for name in cls.__dataclass_fields__:
        keys.append(_REVERSE_ALIASES.get(name, name))
    return sorted(keys)


def _coerce(value, target_type, where: str):
    if value is None:
        return None
    if target_type is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false", "1", "0", "yes", "no"):
            return value.lower() in ("true", "1", "yes")
        raise ConfigError(f"{where}: expected a boolean, got {value!r}")
    if target_type is int:
        if isinstance(value, bool):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        try:
            iv = int(str(value), 0) if isinstance(value, str) else int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: expected an integer, got {value!r}") from None
        if isinstance(value, float) and value != iv:
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return iv
    if target_type is float:
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: expected a number, got {value!r}") from None
    if target_type is str:
        return str(value)
    raise ConfigError(f"{where}: unsupported config field type {target_type}")


def _apply_section(cfg_obj, section: str, mapping: dict) -> None:
    cls = _SECTIONS[section]
    fields = cls.__dataclass_fields__
    for raw_key, value in mapping.items():
        key = _ALIASES.get((section, raw_key), raw_key)
        if key not in fields:
            raise ConfigError(
                f"unknown config key '{section}.{raw_key}'; valid keys in '{section}': "
                f"{', '.join(_valid_keys(section))}")
        setattr(cfg_obj, key, _coerce(value, _ANNOTATION_TYPES[(section, key)],
                                      f"{section}.{raw_key}"))


_ANNOTATION_TYPES: dict[tuple[str, str], type] = {}
for _sec, _cls in _SECTIONS.items():
    for _name, _f in _cls.__dataclass_fields__.items():
        _t = _f.type
        base = {"int": int, "float": float, "str": str, "bool": bool}.get(str(_t).split(" | ")[0])
        if base is not None:
            _ANNOTATION_TYPES[(_sec, _name)] = base


def _merge_tree(cfg: RunConfig, tree: dict) -> None:
    for raw_key, value in tree.items():
        if raw_key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"config section '{raw_key}' must be a mapping")
            _apply_section(getattr(cfg, raw_key), raw_key, value)
        elif raw_key in _TOP_FIELDS:
            if raw_key == "profile":
                continue  # handled before merging
            target = {"seed": int, "precision": str, "eval_every": int}[raw_key]
            setattr(cfg, raw_key, _coerce(value, target, raw_key))
        else:
            raise ConfigError(
                f"unknown config key '{raw_key}'; valid top-level keys: "
                f"{', '.join(_valid_keys(None))}")


def parse_overrides(pairs: list[str]) -> dict:
    """['optim.lr=3e-4', 'seed=7'] -> nested dict."""
    tree: dict = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override must look like section.key=value, got {pair!r}")
        dotted, value = pair.split("=", 1)
        parts = dotted.strip().split(".")
        if not all(parts) or len(parts) > 2:
            raise ConfigError(f"override key must be 'key' or 'section.key', got {dotted!r}")
        node = tree
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {dotted!r} conflicts with an earlier override")
        node[parts[-1]] = yaml.safe_load(value) if value != "" else ""
    return tree


def load_config(path=None, overrides: list[str] | None = None,
                profile: str | None = None, base: RunConfig | None = None) -> RunConfig:
    """Build a validated RunConfig from an optional YAML file plus overrides.

    `profile` is a fallback used when neither the file nor the overrides name
    one.  `base` starts from a copy of an existing config instead of the
    defaults (mutually exclusive with path/profile).
    """
    import copy

    tree: dict = {}
    if path is not None:
        if base is not None:
            raise ConfigError("pass either a config file or a base config, not both")
        text = Path(path).read_text(encoding="utf-8")
        loaded = yaml.safe_load(text)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {path} must contain a top-level mapping")
        tree = loaded
    override_tree = parse_overrides(overrides or [])

    if base is not None:
        cfg = copy.deepcopy(base)
        override_tree.pop("profile", None)
        _merge_tree(cfg, override_tree)
        return cfg.validate()

    chosen = override_tree.get("profile", tree.get("profile", profile))
    cfg = RunConfig()
    if chosen is not None:
        if chosen not in PROFILES:
            raise ConfigError(f"unknown profile {chosen!r}; valid profiles: {sorted(PROFILES)}")
        cfg.profile = chosen
        _merge_tree(cfg, PROFILES[chosen])
    _merge_tree(cfg, tree)
    override_tree.pop("profile", None)
    _merge_tree(cfg, override_tree)
    return cfg.validate()
