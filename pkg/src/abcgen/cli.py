"""Command-line front end: stats, train, generate, render, plot.

JSON results go to stdout; progress and error text go to stderr.  Exit
code 0 means the command fully succeeded.
"""

import argparse
import json
import os
import sys

from .checkpoint import CheckpointError, load_checkpoint
from .corpus import BatchConfig, CorpusError, build_vocabulary, encode, load_corpus
from .midi import DEFAULT_TEMPO, AbcError, parse_tune, render_smf
from .model import ModelConfig, init_params
from .numerics import Rng
from .plotting import read_metrics_csv, write_metric_charts
from .sampler import SampleConfig, generate, grammar_score
from .training import (
    TrainingDiverged,
    make_run_config,
    parse_config_file,
    train,
)


def cmd_stats(args) -> int:
    corpus = load_corpus(args.paths)
    vocab = build_vocabulary(corpus)
    ids = encode(corpus.text, vocab)
    default = BatchConfig()
    stream_len = len(ids) // default.batch_size
    segments = max(0, (stream_len - 1) // default.seq_len)
    print(json.dumps({
        "tunes": len(corpus.tunes),
        "chars": len(corpus.text),
        "vocab_size": vocab.size,
        "segments_at_default_batching": segments,
    }))
    return 0


def cmd_train(args) -> int:
    file_values = parse_config_file(args.config) if args.config else {}
    overrides = {
        "corpus": tuple(args.corpus) if args.corpus else None,
        "out_dir": args.out,
        "seed": args.seed,
        "epochs": args.epochs,
        "hidden_size": args.hidden_size,
        "num_layers": args.num_layers,
        "dropout": args.dropout,
        "lr": args.lr,
        "grad_clip": args.grad_clip,
        "batch_size": args.batch_size,
        "seq_len": args.seq_len,
        "resume_from": args.resume,
    }
    cfg = make_run_config(file_values, overrides)

    def progress(metrics, total):
        print(f"epoch {metrics.epoch}/{total} loss={metrics.mean_loss:.4f} "
              f"acc={metrics.accuracy:.4f}", file=sys.stderr)

    train(cfg, progress=progress)
    return 0


def cmd_generate(args) -> int:
    corpus = load_corpus(args.corpus)
    vocab = build_vocabulary(corpus)
    if args.random_init:
        cfg = ModelConfig(vocab_size=vocab.size, hidden_size=args.hidden_size,
                          num_layers=args.num_layers, dropout=0.0)
        params = init_params(cfg, Rng(args.seed).substream("init"))
    else:
        if not args.checkpoint:
            raise ValueError("--checkpoint is required unless --random-init is given")
        params, _ = load_checkpoint(args.checkpoint)
    sample_cfg = SampleConfig(
        seed_text=args.seed_text,
        length=args.length,
        temperature=args.temperature,
        rng_seed=args.rng_seed,
        mode="greedy" if args.greedy else "stochastic",
    )
    text = generate(params, vocab, sample_cfg)
    parent = os.path.dirname(args.out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(grammar_score(text).to_json())
    return 0


def cmd_render(args) -> int:
    with open(args.abc, encoding="utf-8") as fh:
        text = fh.read().replace("\r\n", "\n").replace("\r", "\n")
    blocks = [b.strip() for b in text.split("\n\n") if b.strip()]
    if not blocks:
        print(f"error: no tunes found in {args.abc}", file=sys.stderr)
        return 1
    os.makedirs(args.out, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.abc))[0]
    failures = 0
    for index, block in enumerate(blocks, start=1):
        try:
            ast = parse_tune(block)
            data = render_smf(ast, args.tempo_us)
        except (AbcError, ValueError) as exc:
            failures += 1
            print(f"tune {index}: {exc}", file=sys.stderr)
            continue
        path = os.path.join(args.out, f"{stem}_{index:03d}.mid")
        with open(path, "wb") as fh:
            fh.write(data)
        for line_no, message in ast.diagnostics:
            print(f"tune {index} line {line_no}: {message}", file=sys.stderr)
    return 1 if failures else 0


def cmd_plot(args) -> int:
    metrics = read_metrics_csv(args.metrics)
    write_metric_charts(metrics, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abcgen",
        description="Train a character LSTM on ABC folk tunes, generate new ones, "
                    "and render them to MIDI.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="corpus statistics as JSON")
    p.add_argument("paths", nargs="+", help="ABC corpus files")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train a model and write checkpoints")
    p.add_argument("--config", help="key=value run config file")
    p.add_argument("--corpus", nargs="+", help="ABC corpus files (overrides config)")
    p.add_argument("--out", help="output directory for checkpoints and metrics.csv")
    p.add_argument("--seed", type=int, help="run seed (default 0)")
    p.add_argument("--epochs", type=int, help="training epochs (default 90)")
    p.add_argument("--hidden-size", type=int, help="LSTM hidden units per layer (default 256)")
    p.add_argument("--num-layers", type=int, help="stacked LSTM layers (default 3)")
    p.add_argument("--dropout", type=float, help="dropout rate between layers (default 0.2)")
    p.add_argument("--lr", type=float, help="Adam learning rate (default 1e-3)")
    p.add_argument("--grad-clip", type=float, help="max global grad norm, 0 disables (default 5)")
    p.add_argument("--batch-size", type=int, help="parallel streams (default 16)")
    p.add_argument("--seq-len", type=int, help="BPTT segment length (default 64)")
    p.add_argument("--resume", help="checkpoint to resume from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="sample ABC text from a checkpoint")
    p.add_argument("--checkpoint", help="trained model checkpoint")
    p.add_argument("--corpus", nargs="+", required=True,
                   help="corpus files that define the vocabulary")
    p.add_argument("--out", required=True, help="output .abc text file")
    p.add_argument("--seed-text", default="X:1\n", help="warmup text (default 'X:1\\n')")
    p.add_argument("--length", type=int, default=400, help="characters to generate")
    p.add_argument("--temperature", type=float, default=1.0, help="sampling temperature")
    p.add_argument("--rng-seed", type=int, default=0, help="sampling seed")
    p.add_argument("--greedy", action="store_true", help="argmax instead of sampling")
    p.add_argument("--random-init", action="store_true",
                   help="use untrained weights instead of a checkpoint (baseline)")
    p.add_argument("--seed", type=int, default=0, help="weight seed for --random-init")
    p.add_argument("--hidden-size", type=int, default=256, help="hidden size for --random-init")
    p.add_argument("--num-layers", type=int, default=3, help="layer count for --random-init")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("render", help="render ABC tunes to .mid files")
    p.add_argument("--abc", required=True, help="ABC file (tunes separated by blank lines)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--tempo-us", type=int, default=DEFAULT_TEMPO,
                   help="microseconds per quarter note (default 500000 = 120 BPM)")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("plot", help="draw SVG training curves from metrics.csv")
    p.add_argument("--metrics", required=True, help="metrics.csv from a training run")
    p.add_argument("--out", required=True, help="output directory for loss.svg/accuracy.svg")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CorpusError, AbcError, CheckpointError, TrainingDiverged,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
