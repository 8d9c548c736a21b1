"""Run directories, stage orchestration, and the `codetts` command."""

from .config import (
    DecoderStageConfig,
    ExperimentConfig,
    FixtureConfig,
    LmConfig,
    PrepConfig,
    SynthesisConfig,
    TokenizerConfig,
    stage_seed,
)
from .fixture import CorpusEntry, Voice, make_fixture, read_corpus
from .main import build_parser, main
from .rundir import ARTIFACTS, RunDirectory
from .stages import (
    FakeTranscriber,
    TokenizerBundle,
    Transcriber,
    load_decoder,
    load_lm,
    load_tokenizer,
    run_evaluate,
    run_prep,
    run_synthesize,
    run_train_decoder,
    run_train_lm,
    run_train_tokenizer,
)

__all__ = [
    "ARTIFACTS",
    "CorpusEntry",
    "DecoderStageConfig",
    "ExperimentConfig",
    "FakeTranscriber",
    "FixtureConfig",
    "LmConfig",
    "PrepConfig",
    "RunDirectory",
    "SynthesisConfig",
    "TokenizerBundle",
    "TokenizerConfig",
    "Transcriber",
    "Voice",
    "build_parser",
    "load_decoder",
    "load_lm",
    "load_tokenizer",
    "main",
    "make_fixture",
    "read_corpus",
    "run_evaluate",
    "run_prep",
    "run_synthesize",
    "run_train_decoder",
    "run_train_lm",
    "run_train_tokenizer",
    "stage_seed",
]
