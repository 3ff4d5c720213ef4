"""Experiment configuration: flat key = value files with dotted sections.

The format is plain text, one assignment per line, `#` starts a comment.
Values are parsed as int, float, bool (true/false) or string; commas make
a list. Scene families are declared by key prefix, e.g.

    scene.family_A.azimuth_center_rad = 0.0

The full key reference lives in the README. Unknown keys are rejected so
typos fail loudly.
"""

from dataclasses import dataclass, field

import numpy as np

from .channel import ArrayGeometry, SceneFamily, default_scene_families
from .net import NetConfig


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


SCENE_FIELDS = {
    "n_paths": int,
    "azimuth_center_rad": float,
    "azimuth_spread_rad": float,
    "gain_decay_db_per_path": float,
    "pathloss_db": float,
    "delay_spread_s": float,
    "carrier_hz": float,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs: scenes, network, schedule, evaluation grid."""

    scenes: dict[str, SceneFamily]
    geometry: ArrayGeometry
    net: NetConfig
    train_families: tuple[str, ...]
    train_proportions: tuple[float, ...]
    train_epochs: int = 2000
    train_batch_size: int = 32
    train_learning_rate: float = 1e-3
    n_total: int = 1000
    snr_grid_db: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0)
    pnr_db: float = 20.0
    n_eval: int = 200
    q_grid: tuple[float, ...] = tuple(round(0.1 * i, 10) for i in range(11))
    sweep_epochs: int = 800
    sweep_eval_snr_db: float = 10.0
    hessian_samples: int = 200
    fd_step: float = 0.05
    ridge_fraction: float = 0.15
    scaling_n_values: tuple[int, ...] = (250, 500, 1000)
    seeds: tuple[int, ...] = (1234,)

    def __post_init__(self):
        if not self.scenes:
            raise ConfigError("at least one scene family is required")
        if not self.snr_grid_db:
            raise ConfigError("snr_grid_db must be nonempty")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if not self.train_families:
            raise ConfigError("train.families must be nonempty")
        for fam in self.train_families:
            if fam not in self.scenes:
                raise ConfigError(f"train family {fam!r} is not a configured scene")
        if len(self.train_proportions) != len(self.train_families):
            raise ConfigError("train.proportions must match train.families in length")
        if any(p < 0 for p in self.train_proportions):
            raise ConfigError("train.proportions must be >= 0")
        if abs(sum(self.train_proportions) - 1.0) > 1e-12:
            raise ConfigError("train.proportions must sum to 1")
        if any(not 0.0 <= q <= 1.0 for q in self.q_grid):
            raise ConfigError("q grid values must lie in [0, 1]")
        if self.n_total < 1 or self.n_eval < 1:
            raise ConfigError("sample counts must be positive")
        if self.train_epochs < 1 or self.sweep_epochs < 1:
            raise ConfigError("epoch counts must be positive")
        if self.hessian_samples < 1:
            raise ConfigError("hessian_samples must be positive")
        if self.hessian_samples > self.n_total + self.n_eval:
            raise ConfigError(
                "hessian_samples cannot exceed the per-family pool size "
                "(n_total + n_eval)"
            )
        if self.fd_step <= 0:
            raise ConfigError("fd_step must be > 0")
        if self.ridge_fraction < 0:
            raise ConfigError("ridge_fraction must be >= 0")
        if len(self.scaling_n_values) and min(self.scaling_n_values) < 2:
            raise ConfigError("scaling n values must be >= 2")

    @property
    def master_seed(self) -> int:
        return self.seeds[0]


def default_config(**overrides) -> ExperimentConfig:
    """The desk-scale defaults: 64-antenna ULA, two stock families."""
    scenes = default_scene_families()
    geometry = ArrayGeometry(n_antennas=64)
    net = NetConfig(n_antennas=64)
    base = dict(
        scenes=scenes,
        geometry=geometry,
        net=net,
        train_families=tuple(scenes.keys()),
        train_proportions=(0.5, 0.5),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


# ---------------------------------------------------------------------------
# Parsing


def _parse_scalar(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _parse_value(text: str):
    if "," in text:
        return [_parse_scalar(part) for part in text.split(",")]
    return _parse_scalar(text)


def _as_list(value) -> list:
    return value if isinstance(value, list) else [value]


def parse_config(text: str) -> ExperimentConfig:
    """Parse config text; unset keys fall back to the defaults."""
    entries: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = _parse_value(value)
    return config_from_entries(entries)


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_from_entries(entries: dict) -> ExperimentConfig:
    entries = dict(entries)

    def pop(key, default=None):
        return entries.pop(key, default)

    # scene families, discovered by prefix
    scene_keys = [k for k in entries if k.startswith("scene.")]
    scene_fields: dict[str, dict] = {}
    for key in scene_keys:
        parts = key.split(".")
        if len(parts) != 3:
            raise ConfigError(f"scene keys look like scene.<id>.<field>: {key!r}")
        _, fam, fieldname = parts
        if fieldname not in SCENE_FIELDS:
            raise ConfigError(f"unknown scene field {fieldname!r} in {key!r}")
        value = entries.pop(key)
        scene_fields.setdefault(fam, {})[fieldname] = SCENE_FIELDS[fieldname](value)
    if scene_fields:
        scenes = {
            fam: SceneFamily(id=fam, **fields) for fam, fields in scene_fields.items()
        }
    else:
        scenes = default_scene_families()

    n_antennas = int(pop("array.n_antennas", 64))
    geometry = ArrayGeometry(
        n_antennas=n_antennas,
        spacing_wavelengths=float(pop("array.spacing_wavelengths", 0.5)),
    )

    n_users = int(pop("net.n_users", 1))
    n_rf = int(pop("net.n_rf_chains", 1))
    output_dim = 2 * n_antennas * n_users * n_rf
    widths = pop("net.hidden_widths", [320, 320, output_dim])
    net = NetConfig(
        n_antennas=n_antennas,
        n_users=n_users,
        n_rf_chains=n_rf,
        hidden_widths=tuple(int(w) for w in _as_list(widths)),
        dropout_rate=float(pop("net.dropout_rate", 0.3)),
        bn_epsilon=float(pop("net.bn_epsilon", 1e-5)),
        bn_momentum=float(pop("net.bn_momentum", 0.9)),
        power_p=float(pop("net.power_p", 1.0)),
        noise_var=float(pop("net.noise_var", 0.1)),
        unit_modulus=bool(pop("net.unit_modulus", False)),
    )

    families = pop("train.families", None)
    if families is None:
        families = tuple(scenes.keys())
    else:
        families = tuple(str(f).strip() for f in _as_list(families))
    proportions = pop("train.proportions", None)
    if proportions is None:
        proportions = tuple(1.0 / len(families) for _ in families)
    else:
        proportions = tuple(float(p) for p in _as_list(proportions))

    q_grid = pop("sweep.q_grid", None)
    grid_step = pop("sweep.grid_step", None)
    if q_grid is not None:
        q_values = tuple(float(t) for t in _as_list(q_grid))
    elif grid_step is not None:
        step = float(grid_step)
        if not 0 < step <= 1:
            raise ConfigError("sweep.grid_step must be in (0, 1]")
        n_points = round(1.0 / step) + 1
        q_values = tuple(round(float(t), 10) for t in np.linspace(0.0, 1.0, n_points))
    else:
        q_values = tuple(round(0.1 * i, 10) for i in range(11))

    config = dict(
        scenes=scenes,
        geometry=geometry,
        net=net,
        train_families=families,
        train_proportions=proportions,
        train_epochs=int(pop("train.epochs", 2000)),
        train_batch_size=int(pop("train.batch_size", 32)),
        train_learning_rate=float(pop("train.learning_rate", 1e-3)),
        n_total=int(pop("data.n_total", 1000)),
        snr_grid_db=tuple(float(s) for s in _as_list(pop("eval.snr_grid_db", [0, 5, 10, 15, 20]))),
        pnr_db=float(pop("eval.pnr_db", 20.0)),
        n_eval=int(pop("eval.n_eval", 200)),
        q_grid=q_values,
        sweep_epochs=int(pop("sweep.epochs", 800)),
        sweep_eval_snr_db=float(pop("sweep.eval_snr_db", 10.0)),
        hessian_samples=int(pop("sweep.hessian_samples", 200)),
        fd_step=float(pop("sweep.fd_step", 0.05)),
        ridge_fraction=float(pop("sweep.ridge_fraction", 0.15)),
        scaling_n_values=tuple(int(n) for n in _as_list(pop("scaling.n_values", [250, 500, 1000]))),
        seeds=tuple(int(s) for s in _as_list(pop("seeds", [1234]))),
    )
    if entries:
        unknown = ", ".join(sorted(entries))
        raise ConfigError(f"unknown config keys: {unknown}")
    try:
        return ExperimentConfig(**config)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def config_to_text(cfg: ExperimentConfig) -> str:
    """Canonical text form; parse_config(config_to_text(cfg)) == cfg."""
    lines = []
    for fam, scene in cfg.scenes.items():
        for fieldname in SCENE_FIELDS:
            lines.append(f"scene.{fam}.{fieldname} = {getattr(scene, fieldname)!r}")
    lines += [
        f"array.n_antennas = {cfg.geometry.n_antennas}",
        f"array.spacing_wavelengths = {cfg.geometry.spacing_wavelengths!r}",
        f"net.n_users = {cfg.net.n_users}",
        f"net.n_rf_chains = {cfg.net.n_rf_chains}",
        "net.hidden_widths = " + ",".join(str(w) for w in cfg.net.hidden_widths),
        f"net.dropout_rate = {cfg.net.dropout_rate!r}",
        f"net.bn_epsilon = {cfg.net.bn_epsilon!r}",
        f"net.bn_momentum = {cfg.net.bn_momentum!r}",
        f"net.power_p = {cfg.net.power_p!r}",
        f"net.noise_var = {cfg.net.noise_var!r}",
        f"net.unit_modulus = {'true' if cfg.net.unit_modulus else 'false'}",
        "train.families = " + ",".join(cfg.train_families),
        "train.proportions = " + ",".join(repr(p) for p in cfg.train_proportions),
        f"train.epochs = {cfg.train_epochs}",
        f"train.batch_size = {cfg.train_batch_size}",
        f"train.learning_rate = {cfg.train_learning_rate!r}",
        f"data.n_total = {cfg.n_total}",
        "eval.snr_grid_db = " + ",".join(repr(s) for s in cfg.snr_grid_db),
        f"eval.pnr_db = {cfg.pnr_db!r}",
        f"eval.n_eval = {cfg.n_eval}",
        "sweep.q_grid = " + ",".join(repr(t) for t in cfg.q_grid),
        f"sweep.epochs = {cfg.sweep_epochs}",
        f"sweep.eval_snr_db = {cfg.sweep_eval_snr_db!r}",
        f"sweep.hessian_samples = {cfg.hessian_samples}",
        f"sweep.fd_step = {cfg.fd_step!r}",
        f"sweep.ridge_fraction = {cfg.ridge_fraction!r}",
        "scaling.n_values = " + ",".join(str(n) for n in cfg.scaling_n_values),
        "seeds = " + ",".join(str(s) for s in cfg.seeds),
    ]
    return "\n".join(lines) + "\n"


def write_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(config_to_text(cfg))
