"""Command-line entry point wiring the pipeline stages together.

Every subcommand operates on a run directory created by `init` (or
implicitly by `prep-data --config`). Errors from the pipeline surface as a
single line on stderr and a nonzero exit code; tracebacks are reserved for
actual bugs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..errors import CodettsError
from ..eval_harness import (
    CATEGORIES,
    emergent_report,
    mushra_aggregate,
    plot_emergent_report,
    read_ratings,
    significance,
)
from ..speechcode_bpe import BpeVocab, compression_report, train_bpe
from .config import ExperimentConfig
from .fixture import make_fixture
from .rundir import RunDirectory
from . import stages


def _emit(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _run_dir(args) -> RunDirectory:
    return RunDirectory(args.run)


def _cmd_init(args) -> int:
    config = (
        ExperimentConfig.from_yaml(args.config) if args.config else ExperimentConfig()
    )
    if args.seed is not None:
        config.seed = args.seed
    run = _run_dir(args)
    run.initialize(config)
    _emit({"run": str(run.root), "seed": config.seed})
    return 0


def _cmd_make_fixture(args) -> int:
    entries = make_fixture(
        args.out,
        seed=args.seed,
        num_speakers=args.speakers,
        utterances_per_speaker=args.utterances,
        min_seconds=args.min_seconds,
        max_seconds=args.max_seconds,
    )
    _emit(
        {
            "corpus": str(Path(args.out) / "corpus.jsonl"),
            "recordings": len(entries),
            "speakers": args.speakers,
            "total_seconds": round(sum(e.duration_s for e in entries), 3),
        }
    )
    return 0


def _ensure_initialized(args) -> RunDirectory:
    run = _run_dir(args)
    if not run.config_path.exists():
        config = (
            ExperimentConfig.from_yaml(args.config)
            if getattr(args, "config", None)
            else ExperimentConfig()
        )
        run.initialize(config)
    elif getattr(args, "config", None):
        raise CodettsError(
            f"{run.root} already has a config.yaml; refusing to overwrite it"
        )
    return run


def _cmd_prep(args) -> int:
    run = _ensure_initialized(args)
    _emit(stages.run_prep(run, corpus_path=args.corpus))
    return 0


def _cmd_train_tokenizer(args) -> int:
    _emit(stages.run_train_tokenizer(_run_dir(args)))
    return 0


def _cmd_train_lm(args) -> int:
    _emit(stages.run_train_lm(_run_dir(args)))
    return 0


def _cmd_train_decoder(args) -> int:
    _emit(stages.run_train_decoder(_run_dir(args)))
    return 0


def _cmd_synthesize(args) -> int:
    _emit(
        stages.run_synthesize(
            _run_dir(args),
            text=args.text,
            speaker=args.speaker,
            out=args.out,
            stream=args.stream,
            chunk_frames=args.chunk_frames,
            temperature=args.temperature,
            seed=args.seed,
        )
    )
    return 0


def _cmd_evaluate(args) -> int:
    _emit(stages.run_evaluate(_run_dir(args), max_utterances=args.utterances))
    return 0


def _cmd_benchmark(args) -> int:
    from ..speechcode_decoder import benchmark_synthesis

    decoder = stages.load_decoder(_run_dir(args))
    _emit(
        benchmark_synthesis(
            decoder,
            num_utterances=args.utterances,
            utterance_seconds=args.seconds,
            mode=args.mode,
            chunk_frames=args.chunk_frames,
        )
    )
    return 0


def _cmd_bpe(args) -> int:
    corpus = []
    for line in Path(args.corpus).read_text(encoding="utf-8").splitlines():
        if line.strip():
            corpus.append([int(tok) for tok in line.split()])
    vocab = train_bpe(corpus, base_size=args.base_size, target_vocab=args.target_vocab)
    if args.out:
        vocab.save(args.out)
    report = compression_report(corpus, vocab)
    report["merges"] = len(vocab.merges)
    if args.out:
        report["vocab"] = str(args.out)
    _emit(report)
    return 0


def _cmd_report(args) -> int:
    run = _run_dir(args)
    written: dict = {}

    if args.ratings:
        report = emergent_report(read_ratings(args.ratings))
        text_path = run.root / "reports" / "emergent.txt"
        text_path.parent.mkdir(parents=True, exist_ok=True)
        text_path.write_text(report.as_table() + "\n", encoding="utf-8")
        plot_path = run.root / "reports" / "emergent.png"
        plot_emergent_report(report, plot_path)
        written["emergent_table"] = str(text_path)
        written["emergent_plot"] = str(plot_path)
        written["emergent_means"] = {
            system: round(
                sum(report.means[(system, c)] for c in CATEGORIES) / len(CATEGORIES), 4
            )
            for system in report.systems
        }

    if args.mushra:
        scores = json.loads(Path(args.mushra).read_text(encoding="utf-8"))
        lines = []
        results = {name: mushra_aggregate(vals, system=name) for name, vals in scores.items()}
        for name in sorted(results):
            lines.append(str(results[name]))
        names = sorted(results)
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                sig = significance(scores[a], scores[b])
                verdict = "differs from" if sig.significant else "statistically tied with"
                lines.append(f"{a} {verdict} {b} (p={sig.p_value:.4f})")
        listening_path = run.root / "reports" / "listening.txt"
        listening_path.parent.mkdir(parents=True, exist_ok=True)
        listening_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written["listening"] = str(listening_path)

    metrics_path = run.root / "reports" / "metrics.json"
    if metrics_path.exists():
        metrics = json.loads(metrics_path.read_text(encoding="utf-8"))
        written["mean_wer"] = metrics.get("mean_wer")
        written["mean_similarity"] = metrics.get("mean_similarity")

    if not written:
        raise CodettsError("nothing to report: pass --ratings and/or --mushra, or run evaluate")
    _emit(written)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="codetts",
        description="Discrete-token text-to-speech: data prep, training, synthesis, eval.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="create a run directory with a resolved config")
    p.add_argument("--run", required=True)
    p.add_argument("--config", help="YAML config; defaults apply when omitted")
    p.add_argument("--seed", type=int, help="override the root seed")
    p.set_defaults(fn=_cmd_init)

    p = sub.add_parser("make-fixture", help="generate a deterministic synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--speakers", type=int, default=2)
    p.add_argument("--utterances", type=int, default=12)
    p.add_argument("--min-seconds", type=float, default=1.0)
    p.add_argument("--max-seconds", type=float, default=8.0)
    p.set_defaults(fn=_cmd_make_fixture)

    p = sub.add_parser("prep-data", help="segment, restore, and cap a corpus")
    p.add_argument("--run", required=True)
    p.add_argument("--corpus", help="corpus.jsonl to prepare (defaults to the run's copy)")
    p.add_argument("--config", help="YAML config if the run is not initialized yet")
    p.set_defaults(fn=_cmd_prep)

    p = sub.add_parser("train-tokenizer", help="fit the speechcode tokenizer")
    p.add_argument("--run", required=True)
    p.set_defaults(fn=_cmd_train_tokenizer)

    p = sub.add_parser("train-lm", help="train BPE vocabularies and the joint LM")
    p.add_argument("--run", required=True)
    p.set_defaults(fn=_cmd_train_lm)

    p = sub.add_parser("train-decoder", help="train the waveform decoder")
    p.add_argument("--run", required=True)
    p.set_defaults(fn=_cmd_train_decoder)

    p = sub.add_parser("synthesize", help="text to WAV in a target voice")
    p.add_argument("--run", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--speaker", required=True)
    p.add_argument("--out", help="output WAV path (default: run reports dir)")
    p.add_argument("--stream", action="store_true", help="decode in causal chunks")
    p.add_argument("--chunk-frames", type=int, help="frames per streamed chunk")
    p.add_argument("--temperature", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=_cmd_synthesize)

    p = sub.add_parser("evaluate", help="synthesize held-out texts and score them")
    p.add_argument("--run", required=True)
    p.add_argument("--utterances", type=int, default=4)
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("benchmark", help="time full vs streaming synthesis")
    p.add_argument("--run", required=True)
    p.add_argument("--mode", choices=["full", "stream"], default="full")
    p.add_argument("--utterances", type=int, default=5)
    p.add_argument("--seconds", type=float, default=2.0)
    p.add_argument("--chunk-frames", type=int, default=25)
    p.set_defaults(fn=_cmd_benchmark)

    p = sub.add_parser("bpe", help="train a BPE vocabulary over integer sequences")
    p.add_argument("--corpus", required=True, help="text file, one space-separated sequence per line")
    p.add_argument("--base-size", type=int, required=True)
    p.add_argument("--target-vocab", type=int, required=True)
    p.add_argument("--out", help="where to save the vocabulary")
    p.set_defaults(fn=_cmd_bpe)

    p = sub.add_parser("report", help="summarize listening tests and metrics")
    p.add_argument("--run", required=True)
    p.add_argument("--ratings", help="emergent-ability ratings JSONL")
    p.add_argument("--mushra", help="JSON mapping system name to score list")
    p.set_defaults(fn=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CodettsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
