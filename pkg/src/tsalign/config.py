"""INI-style run configuration with environment overrides.

Every key has a typed default. Unknown sections or keys are rejected with
an error naming them. ``TSALIGN_<SECTION>_<KEY>`` environment variables
override file values. Secrets never live in the file: the generator API key
is read from the environment variable named by ``generator.key_env``.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

from .datasets import CorpusSpec
from .synth import Tolerances
from .tsevol import EvolTolerances

ENV_PREFIX = "TSALIGN_"
SECRET_WORDS = ("key", "token", "secret", "password")


class ConfigError(ValueError):
    pass


@dataclass
class GeneratorSettings:
    url: str = ""
    model: str = ""
    key_env: str = "TSALIGN_API_KEY"
    temperature: float = 0.7
    timeout: float = 60.0
    retries: int = 3
    in_flight: int = 4


@dataclass
class EvolveSettings:
    rounds: int = 1
    k: int = 3
    elim_rel: float = 0.05
    elim_sigma_k: float = 3.0


@dataclass
class EvalSettings:
    in_flight_limit: int = 4
    tool_seed: int = 0
    tools: str = "trend,seasonality,fluctuation,correlation,point_value,range_stats"


@dataclass
class RunSettings:
    seed: int = 0
    out: str = "out"
    alignment_corpus: str = ""  # SFT stage: path of the alignment corpus to mix from
    name: str = ""  # output file stem; defaults to the stage name


_CORPUS_KEYS = {f.name for f in fields(CorpusSpec)} - {"master_seed"}


@dataclass
class Config:
    run: RunSettings = field(default_factory=RunSettings)
    corpus: dict = field(default_factory=dict)  # CorpusSpec fields except master_seed
    generator: GeneratorSettings = field(default_factory=GeneratorSettings)
    evolve: EvolveSettings = field(default_factory=EvolveSettings)
    eval: EvalSettings = field(default_factory=EvalSettings)
    tolerances: Tolerances = field(default_factory=Tolerances)

    def corpus_spec(self, seed: int | None = None) -> CorpusSpec:
        return CorpusSpec(**self.corpus, master_seed=self.run.seed if seed is None else seed)

    def evol_tolerances(self) -> EvolTolerances:
        return EvolTolerances(self.evolve.elim_rel, self.evolve.elim_sigma_k)

    def api_key(self) -> str:
        return os.environ.get(self.generator.key_env, "")


def _convert(raw: str, like: Any, where: str):
    try:
        if isinstance(like, bool):
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(like, int):
            return int(raw, 0)
        if isinstance(like, float):
            return float(raw)
        if isinstance(like, tuple):
            parts = [p for p in raw.replace(",", " ").split() if p]
            return tuple(type(like[0])(p) for p in parts)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {type(like).__name__}") from None
    return raw.strip()


def _sections(cfg: Config) -> dict[str, Any]:
    return {"run": cfg.run, "corpus": None, "generator": cfg.generator, "evolve": cfg.evolve,
            "eval": cfg.eval, "tolerances": cfg.tolerances}


def _set(cfg: Config, section: str, key: str, raw: str, origin: str) -> None:
    where = f"{origin}: [{section}] {key}"
    if any(w in key.lower() for w in SECRET_WORDS) and key != "key_env":
        raise ConfigError(f"{where}: secrets must come from the environment, not the config file")
    if section == "corpus":
        if key not in _CORPUS_KEYS:
            raise ConfigError(f"unknown config key {section}.{key} ({origin})")
        like = getattr(CorpusSpec(), key)
        cfg.corpus[key] = _convert(raw, like, where)
        return
    target = _sections(cfg)[section]
    if key not in {f.name for f in fields(target)}:
        raise ConfigError(f"unknown config key {section}.{key} ({origin})")
    value = _convert(raw, getattr(target, key), where)
    if section == "tolerances":  # frozen
        cfg.tolerances = replace(cfg.tolerances, **{key: value})
    else:
        setattr(target, key, value)


def load_config(path: str | Path | None = None, env: Mapping[str, str] | None = None) -> Config:
    """Defaults, then the file (if any), then environment overrides."""
    cfg = Config()
    env = os.environ if env is None else env
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (configparser.Error, OSError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for section in parser.sections():
            if section not in _sections(cfg):
                raise ConfigError(f"unknown config section [{section}] ({path})")
            for key, raw in parser.items(section):
                _set(cfg, section, key, raw, str(path))
    for name, raw in sorted(env.items()):
        if not name.startswith(ENV_PREFIX) or name == cfg.generator.key_env:
            continue
        rest = name[len(ENV_PREFIX):].lower()
        section = next((s for s in _sections(cfg) if rest.startswith(s + "_")), None)
        if section is None:
            continue  # other TSALIGN_* variables (e.g. the API key) are not config keys
        _set(cfg, section, rest[len(section) + 1:], raw, f"env {name}")
    problems = cfg.corpus_spec().problems()
    if problems:
        raise ConfigError("invalid corpus settings: " + "; ".join(problems))
    if cfg.eval.in_flight_limit < 1 or cfg.generator.in_flight < 1:
        raise ConfigError("in-flight limits must be >= 1")
    return cfg
