"""Run configuration: a single JSON document; env vars carry secrets only."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .gateway import ModelSpec
from .question_gen import PROMPT_VARIANTS

_KNOWN_KEYS = {
    "corpus_path",
    "cache_dir",
    "output_dir",
    "models",
    "judge",
    "answerer",
    "generators",
    "prompt_variants",
    "n_contexts",
    "questions_per_context",
    "seed",
    "min_words",
    "concurrency",
    "word_limits",
    "imports",
    "unanswered_threshold",
    "figures",
}

_MODEL_KEYS = {"name", "endpoint_url", "api_key_env", "temperature", "max_output_tokens"}


@dataclass
class ImportSpec:
    name: str
    path: str


@dataclass
class RunConfig:
    corpus_path: str
    cache_dir: str
    output_dir: str
    models: list[ModelSpec]
    judge: str
    answerer: str = ""  # defaults to the judge
    generators: list[str] = field(default_factory=list)  # defaults to all models
    prompt_variants: list[str] = field(default_factory=lambda: ["v1"])
    n_contexts: int = 256
    questions_per_context: int = 4
    seed: int = 0
    min_words: int = 50
    concurrency: int = 8
    word_limits: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 8])
    imports: list[ImportSpec] = field(default_factory=list)
    unanswered_threshold: int = 2
    figures: bool = True

    def model(self, name: str) -> ModelSpec:
        for spec in self.models:
            if spec.name == name:
                return spec
        raise ConfigError(f"model {name!r} is not configured")

    @property
    def judge_model(self) -> ModelSpec:
        return self.model(self.judge)

    @property
    def answerer_model(self) -> ModelSpec:
        return self.model(self.answerer or self.judge)

    @property
    def generator_models(self) -> list[ModelSpec]:
        names = self.generators or [m.name for m in self.models]
        return [self.model(n) for n in names]

    def validate(self) -> None:
        names = [m.name for m in self.models]
        if not names:
            raise ConfigError("config needs at least one model")
        if len(set(names)) != len(names):
            raise ConfigError("model names must be unique")
        if self.judge not in names:
            raise ConfigError(f"judge {self.judge!r} does not name a configured model")
        if self.answerer and self.answerer not in names:
            raise ConfigError(f"answerer {self.answerer!r} does not name a configured model")
        for gen in self.generators:
            if gen not in names:
                raise ConfigError(f"generator {gen!r} does not name a configured model")
        unknown = set(self.prompt_variants) - set(PROMPT_VARIANTS)
        if unknown:
            raise ConfigError(f"unknown prompt variants: {sorted(unknown)}")
        if not self.prompt_variants:
            raise ConfigError("prompt_variants must not be empty")
        if self.n_contexts < 1:
            raise ConfigError("n_contexts must be >= 1")
        if self.questions_per_context < 1:
            raise ConfigError("questions_per_context must be >= 1")
        if self.min_words < 1:
            raise ConfigError("min_words must be >= 1")
        if self.concurrency < 1:
            raise ConfigError("concurrency must be >= 1")
        if any(x < 1 for x in self.word_limits):
            raise ConfigError("word limits must be positive")
        if len(set(self.word_limits)) != len(self.word_limits):
            raise ConfigError("word limits must be unique")
        if not 0 <= self.unanswered_threshold <= 5:
            raise ConfigError("unanswered_threshold must be within 0..5")


def load_config(path: str | Path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("corpus_path", "cache_dir", "output_dir", "models", "judge"):
        if key not in raw:
            raise ConfigError(f"config is missing required key {key!r}")

    try:
        models = []
        for entry in raw["models"]:
            extra = set(entry) - _MODEL_KEYS
            if extra:
                raise ConfigError(f"unknown model keys: {sorted(extra)}")
            models.append(ModelSpec(**entry))
        imports = [ImportSpec(**entry) for entry in raw.get("imports", [])]
    except TypeError as exc:
        raise ConfigError(f"malformed model or import entry: {exc}") from exc

    config = RunConfig(
        corpus_path=raw["corpus_path"],
        cache_dir=raw["cache_dir"],
        output_dir=raw["output_dir"],
        models=models,
        judge=raw["judge"],
        answerer=raw.get("answerer", ""),
        generators=list(raw.get("generators", [])),
        prompt_variants=list(raw.get("prompt_variants", ["v1"])),
        n_contexts=raw.get("n_contexts", 256),
        questions_per_context=raw.get("questions_per_context", 4),
        seed=raw.get("seed", 0),
        min_words=raw.get("min_words", 50),
        concurrency=raw.get("concurrency", 8),
        word_limits=list(raw.get("word_limits", [1, 2, 3, 4, 8])),
        imports=imports,
        unanswered_threshold=raw.get("unanswered_threshold", 2),
        figures=raw.get("figures", True),
    )
    config.validate()
    return config
