"""Run configuration: defaults, the flat key=value config file format, and
CLI overrides. Every file key mirrors a flag of the same name.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .agents import DESK_LADDER
from .composer import ComposerConfig, STRATEGIES
from .generators import ExternalGeneratorConfig, ValidationConfig


@dataclass
class RunConfig:
    seed: int = 0
    generations: int = 20
    batch_size: int = 10
    strategy: str = "eval-mcts"
    init: str = "catalog"  # or "sokoban"
    descriptor_scheme: str = "banded"
    out_dir: str = "runs"
    workers: int = 1
    crossover_pairing: str = "most-similar"
    episodes_per_agent: int = 20
    ladder: tuple[int, int, int] = DESK_LADDER
    composer: ComposerConfig = field(default_factory=ComposerConfig)
    validation: ValidationConfig = field(default_factory=ValidationConfig)
    external: ExternalGeneratorConfig | None = None

    def validate(self) -> None:
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.init not in ("catalog", "sokoban"):
            raise ValueError("init must be 'catalog' or 'sokoban'")
        if self.descriptor_scheme not in ("banded", "paper-literal"):
            raise ValueError("descriptor_scheme must be 'banded' or "
                             "'paper-literal'")
        if not (0.0 <= self.composer.novel_prob <= 1.0):
            raise ValueError("composer.novel_prob must be in [0,1]")
        if self.strategy == "external" and self.external is None:
            raise ValueError("external strategy needs external.base_url "
                             "and external.model configured")


_INT_KEYS = {
    "seed", "generations", "batch_size", "workers", "episodes_per_agent",
    "composer.iterations", "composer.max_children", "composer.depth_cap",
    "composer.max_steps", "composer.connect_attempts",
    "validation.probes", "validation.probe_iters", "validation.probe_steps",
    "external.max_retries",
}
_FLOAT_KEYS = {"composer.novel_prob", "composer.uct_c", "external.timeout",
               "external.temperature"}


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    cfg = base or RunConfig()
    external_kv: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key.startswith("external."):
            external_kv[key] = value
            continue
        apply_key(cfg, key, value)
    if external_kv:
        ext = cfg.external or ExternalGeneratorConfig(base_url="", model="")
        for key, value in external_kv.items():
            attr = key.split(".", 1)[1]
            if not hasattr(ext, attr):
                raise ValueError(f"unknown config key {key!r}")
            if key in _INT_KEYS:
                setattr(ext, attr, int(value))
            elif key in _FLOAT_KEYS:
                setattr(ext, attr, float(value))
            else:
                setattr(ext, attr, value)
        cfg.external = ext
    return cfg


def apply_key(cfg: RunConfig, key: str, value: str) -> None:
    if key == "ladder" or key == "agents.ladder":
        parts = [int(v) for v in value.replace(" ", "").split(",")]
        if len(parts) != 3:
            raise ValueError("ladder needs three integers")
        cfg.ladder = (parts[0], parts[1], parts[2])
        return
    if key == "agents.episodes":
        cfg.episodes_per_agent = int(value)
        return
    if key.startswith("composer."):
        attr = key.split(".", 1)[1]
        if not hasattr(cfg.composer, attr):
            raise ValueError(f"unknown config key {key!r}")
        if key in _INT_KEYS:
            setattr(cfg.composer, attr, int(value))
        elif key in _FLOAT_KEYS:
            setattr(cfg.composer, attr, float(value))
        else:
            setattr(cfg.composer, attr, value)
        return
    if key.startswith("validation."):
        attr = key.split(".", 1)[1]
        if attr == "probe_iters":
            attr = "probe_agent_iters"
        if not hasattr(cfg.validation, attr):
            raise ValueError(f"unknown config key {key!r}")
        setattr(cfg.validation, attr, int(value))
        return
    if not hasattr(cfg, key):
        raise ValueError(f"unknown config key {key!r}")
    if key in _INT_KEYS:
        setattr(cfg, key, int(value))
    else:
        setattr(cfg, key, value)


def load_config(path: str | Path, base: RunConfig | None = None) -> RunConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"), base)
