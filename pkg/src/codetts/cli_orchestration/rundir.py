"""Run directory layout, artifact gating, and the stage lock.

A run directory owns everything one experiment produces:

    run/
      config.yaml        resolved configuration, written once at init
      data/              prepared manifest and recording index
      checkpoints/       stage outputs (tokenizer.pt, lm.pt, decoder.pt, vocabs)
      logs/              one JSONL file per training stage
      reports/           synthesis output, metrics, rating summaries

Stages declare what they need through `require`, which turns a missing
file into an error naming the stage that should have produced it. The
lock file makes concurrent writers fail fast instead of interleaving
checkpoints.
"""

from __future__ import annotations

import contextlib
import json
import os
from pathlib import Path

from ..errors import ConfigurationError, DependencyError, LockError
from .config import ExperimentConfig

# artifact name -> (relative path, producing command)
ARTIFACTS = {
    "corpus": ("data/corpus.jsonl", "make-fixture (or point prep-data at a corpus)"),
    "manifest": ("data/manifest.jsonl", "prep-data"),
    "recordings": ("data/recordings.json", "prep-data"),
    "tokenizer": ("checkpoints/tokenizer.pt", "train-tokenizer"),
    "lm": ("checkpoints/lm.pt", "train-lm"),
    "speech_bpe": ("checkpoints/speech_bpe.txt", "train-lm"),
    "text_vocab": ("checkpoints/text_vocab.txt", "train-lm"),
    "decoder": ("checkpoints/decoder.pt", "train-decoder"),
}

_SUBDIRS = ("data", "checkpoints", "logs", "reports")


class RunDirectory:
    """Paths and gating for one experiment's artifacts."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    @property
    def config_path(self) -> Path:
        return self.root / "config.yaml"

    def initialize(self, config: ExperimentConfig) -> None:
        """Create the layout and persist the resolved config."""
        self.root.mkdir(parents=True, exist_ok=True)
        for sub in _SUBDIRS:
            (self.root / sub).mkdir(exist_ok=True)
        config.to_yaml(self.config_path)

    def load_config(self) -> ExperimentConfig:
        if not self.config_path.exists():
            raise ConfigurationError(
                f"{self.root} is not an initialized run directory (no config.yaml)"
            )
        return ExperimentConfig.from_yaml(self.config_path)

    def path(self, artifact: str) -> Path:
        if artifact not in ARTIFACTS:
            raise ConfigurationError(f"unknown artifact name: {artifact!r}")
        return self.root / ARTIFACTS[artifact][0]

    def require(self, artifact: str) -> Path:
        """Return the artifact path, or fail naming the stage that makes it."""
        target = self.path(artifact)
        if not target.exists():
            producer = ARTIFACTS[artifact][1]
            raise DependencyError(
                f"missing {target.relative_to(self.root)}: run `{producer}` first"
            )
        return target

    @contextlib.contextmanager
    def stage_lock(self, stage: str):
        """Exclusive per-run lock; a second concurrent writer gets LockError."""
        self.root.mkdir(parents=True, exist_ok=True)
        lock_path = self.root / ".lock"
        try:
            fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            holder = ""
            with contextlib.suppress(OSError):
                holder = lock_path.read_text(encoding="utf-8").strip()
            detail = f" (held by: {holder})" if holder else ""
            raise LockError(
                f"run directory {self.root} is locked{detail}; "
                "remove .lock if the previous run crashed"
            ) from None
        try:
            os.write(fd, f"{stage} pid={os.getpid()}".encode())
            os.close(fd)
            yield
        finally:
            with contextlib.suppress(OSError):
                lock_path.unlink()

    def log_jsonl(self, name: str, records: list[dict]) -> Path:
        """Append records to logs/<name>.jsonl and return the path."""
        path = self.root / "logs" / f"{name}.jsonl"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record, sort_keys=True) + "\n")
        return path
