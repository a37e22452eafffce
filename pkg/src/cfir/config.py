"""Run configuration: defaults, key=value config file (INI sections as nested
tables), command-line overrides (flags win), and whole-config validation that
reports every violated field at once."""

from __future__ import annotations

import configparser
import os
from dataclasses import asdict, dataclass, fields

SEED_ENV_VAR = "CFIR_SEED"

MODELS = ("bm25", "embed", "external")
CLASSIFIERS = ("lr", "rf")
STRATEGIES = ("tfidf", "embed_sim", "keybert")


@dataclass
class RunConfig:
    corpus: str | None = None
    queries: str | None = None
    model: str = "bm25"
    embeddings: str | None = None
    bridge: str | None = None
    topk: int = 10
    nwords: int = 10
    strategy: str = "tfidf"
    classifier: str = "lr"
    cf_k: int = 3
    lambda1: float = 1.0
    lambda2: float = 0.5
    max_iter: int = 500
    step: float = 0.05
    seed: int = 0
    jobs: int = 1
    out: str = "cfir_out"

    def validate(self, require_corpus: bool = True) -> list[str]:
        """Return every violation; empty list means the config is usable."""
        problems = []
        if require_corpus:
            if not self.corpus:
                problems.append("corpus: path is required")
            elif not os.path.exists(self.corpus):
                problems.append(f"corpus: no such file: {self.corpus}")
        if self.queries and not os.path.exists(self.queries):
            problems.append(f"queries: no such file: {self.queries}")
        if self.model not in MODELS:
            problems.append(f"model: must be one of {MODELS}, got {self.model!r}")
        if self.model == "embed" or self.strategy == "embed_sim":
            if not self.embeddings:
                problems.append("embeddings: required for the embed model / embed_sim strategy")
            elif not os.path.exists(self.embeddings):
                problems.append(f"embeddings: no such file: {self.embeddings}")
        elif self.embeddings and not os.path.exists(self.embeddings):
            problems.append(f"embeddings: no such file: {self.embeddings}")
        if self.model == "external" and not self.bridge:
            problems.append("bridge: endpoint required for the external model")
        if self.classifier not in CLASSIFIERS:
            problems.append(f"classifier: must be one of {CLASSIFIERS}, got {self.classifier!r}")
        if self.strategy not in STRATEGIES:
            problems.append(f"strategy: must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.topk < 1:
            problems.append(f"topk: must be >= 1, got {self.topk}")
        if self.nwords < 1:
            problems.append(f"nwords: must be >= 1, got {self.nwords}")
        if self.cf_k < 1:
            problems.append(f"cf-k: must be >= 1, got {self.cf_k}")
        if self.lambda1 < 0 or self.lambda2 < 0:
            problems.append("lambda1/lambda2: must be >= 0")
        if self.max_iter < 1:
            problems.append(f"max-iter: must be >= 1, got {self.max_iter}")
        if self.step <= 0:
            problems.append(f"step: must be > 0, got {self.step}")
        if self.jobs < 1:
            problems.append(f"jobs: must be >= 1, got {self.jobs}")
        return problems

    def snapshot(self) -> dict:
        return asdict(self)


_INT_FIELDS = {"topk", "nwords", "cf_k", "max_iter", "seed", "jobs"}
_FLOAT_FIELDS = {"lambda1", "lambda2", "step"}

# Config file sections map onto field prefixes: [run] holds top-level keys,
# [cf] holds the counterfactual search knobs.
_SECTION_PREFIX = {"run": "", "cf": "cf_"}
_CF_KEYS = {"k": "cf_k", "lambda1": "lambda1", "lambda2": "lambda2",
            "max_iter": "max_iter", "step": "step"}


def _coerce(field_name: str, raw: str):
    if field_name in _INT_FIELDS:
        return int(raw)
    if field_name in _FLOAT_FIELDS:
        return float(raw)
    return raw


def load_config_file(path: str) -> dict:
    """Parse the key=value config file into a RunConfig field dict."""
    parser = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    known = {f.name for f in fields(RunConfig)}
    values: dict = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            key = key.replace("-", "_")
            if section == "cf":
                field_name = _CF_KEYS.get(key)
            elif section == "run":
                field_name = key if key in known else None
            else:
                raise ValueError(f"{path}: unknown config section [{section}]")
            if field_name is None:
                raise ValueError(f"{path}: unknown config key {key!r} in [{section}]")
            try:
                values[field_name] = _coerce(field_name, raw)
            except ValueError as exc:
                raise ValueError(f"{path}: bad value for {key!r}: {raw!r}") from exc
    return values


def resolve_config(file_path: str | None, flag_values: dict) -> RunConfig:
    """defaults < config file < explicit flags; CFIR_SEED fills the seed when
    neither the file nor a flag sets it."""
    merged: dict = {}
    if file_path:
        merged.update(load_config_file(file_path))
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    if "seed" not in merged:
        env_seed = os.environ.get(SEED_ENV_VAR)
        if env_seed is not None:
            try:
                merged["seed"] = int(env_seed)
            except ValueError as exc:
                raise ValueError(f"{SEED_ENV_VAR} must be an integer, got {env_seed!r}") from exc
    return RunConfig(**merged)
