"""Run configuration: defaults, validation, and precedence resolution.

Values resolve as CLI flag > config file > built-in default, and the
environment variable ``GJEPA_SEED`` overrides the seed from any source
(it exists to force determinism in CI). Every resolution is logged.

Config files are flat ``key = value`` text; ``#`` starts a comment.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import GjepaError

log = logging.getLogger("gjepa.config")

SEED_ENV_VAR = "GJEPA_SEED"


@dataclass(frozen=True)
class RunConfig:
    """All training hyperparameters.

    ``k`` is the mixture/cluster component count; when left unset it is
    resolved to the dataset's class count at training time. ``min_lr``
    defaults to ``alpha / 100``. ``semantic=False`` drops the
    pseudo-label score term (used by the ablation study).
    """

    p1: float = 0.30
    p2: float = 0.15
    targets: int = 3
    momentum: float = 0.9
    alpha: float = 1e-3
    restart_period: int = 75
    max_epochs: int = 500
    patience: int = 50
    k: int | None = None
    beta: float = 1.0
    gmm_every: int = 5
    seed: int = 0
    dims: tuple[int, int, int] = (128, 256, 512)
    covariance: str = "diag"
    semantic: bool = True
    min_lr: float | None = None

    def __post_init__(self):
        if not 0.0 < self.p1 < 1.0 or not 0.0 < self.p2 < 1.0:
            raise GjepaError("p1 and p2 must lie in (0, 1)")
        if self.p2 >= self.p1:
            raise GjepaError("p2 must be smaller than p1")
        if not 0.0 <= self.momentum <= 1.0:
            raise GjepaError("momentum must lie in [0, 1]")
        if self.alpha <= 0.0:
            raise GjepaError("alpha must be positive")
        if self.targets < 1:
            raise GjepaError("need at least one target")
        if self.restart_period < 1 or self.max_epochs < 1:
            raise GjepaError("restart_period and max_epochs must be positive")
        if self.patience < 0 or self.gmm_every < 1:
            raise GjepaError("patience must be >= 0 and gmm_every >= 1")
        if self.k is not None and self.k < 1:
            raise GjepaError("k must be positive when given")
        if self.beta <= 0.0:
            raise GjepaError("beta must be positive")
        if self.seed < 0:
            raise GjepaError("seed must be nonnegative")
        if len(self.dims) != 3 or any(d < 1 for d in self.dims):
            raise GjepaError("dims must be three positive layer widths")
        if self.covariance not in ("diag", "full"):
            raise GjepaError("covariance must be 'diag' or 'full'")
        if self.min_lr is not None and not 0.0 <= self.min_lr <= self.alpha:
            raise GjepaError("min_lr must lie in [0, alpha]")

    @property
    def effective_min_lr(self) -> float:
        return self.alpha / 100.0 if self.min_lr is None else self.min_lr

    @property
    def d_latent(self) -> int:
        return self.dims[-1]

    def resolve_k(self, classes: int | None) -> "RunConfig":
        """Fill in ``k`` from the dataset's class count when unset."""
        if self.k is not None:
            return self
        if classes is None or classes < 1:
            raise GjepaError("k is unset and the dataset declares no classes")
        log.info("k = %d (dataset class count)", classes)
        return replace(self, k=classes)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out


def _parse_value(name: str, raw: str):
    raw = raw.strip()
    if name in ("p1", "p2", "momentum", "alpha", "beta"):
        return float(raw)
    if name in ("targets", "restart_period", "max_epochs", "patience",
                "gmm_every", "seed"):
        return int(raw)
    if name == "k":
        return None if raw.lower() in ("none", "auto") else int(raw)
    if name == "min_lr":
        return None if raw.lower() in ("none", "auto") else float(raw)
    if name == "dims":
        parts = tuple(int(p) for p in raw.replace(",", " ").split())
        return parts
    if name == "covariance":
        return raw
    if name == "semantic":
        if raw.lower() in ("true", "1", "yes", "on"):
            return True
        if raw.lower() in ("false", "0", "no", "off"):
            return False
        raise GjepaError(f"cannot parse boolean {raw!r} for 'semantic'")
    raise GjepaError(f"unknown config key {name!r}")


def parse_config_file(path: Path) -> dict:
    """Read a flat key = value file into typed config values."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise GjepaError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        try:
            values[key] = _parse_value(key, raw)
        except ValueError as exc:
            raise GjepaError(f"{path}:{lineno}: bad value for {key!r}: {raw!r}") from exc
    return values


def resolve_config(
    config_path: Path | None = None,
    overrides: dict | None = None,
    env: dict | None = None,
) -> RunConfig:
    """Merge defaults, config file, CLI overrides, and the seed env var."""
    env = os.environ if env is None else env
    file_values = parse_config_file(config_path) if config_path else {}
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    merged = {}
    for f in fields(RunConfig):
        if f.name in overrides:
            merged[f.name] = overrides[f.name]
            source = "command line"
        elif f.name in file_values:
            merged[f.name] = file_values[f.name]
            source = f"config file {config_path}"
        else:
            source = "default"
        if source != "default":
            log.info("%s = %r (%s)", f.name, merged[f.name], source)
    if SEED_ENV_VAR in env:
        merged["seed"] = int(env[SEED_ENV_VAR])
        log.info("seed = %d (%s)", merged["seed"], SEED_ENV_VAR)
    return RunConfig(**merged)
