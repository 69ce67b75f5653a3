"""
DRILL Language Modeling Toolkit
Command-line entry point
"""
import os
import sys
from pathlib import Path

THREAD_VARIABLES = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _pin_threads(argv: list[str]):
    """BLAS reads these once, so they must be set before numpy is imported"""
    for i, arg in enumerate(argv):
        value = None
        if arg == "--threads" and i + 1 < len(argv):
            value = argv[i + 1]
        elif arg.startswith("--threads="):
            value = arg.split("=", 1)[1]
        if value and value.isdigit():
            for name in THREAD_VARIABLES:
                os.environ[name] = value


_pin_threads(sys.argv[1:])

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

import argparse
import logging
from dataclasses import replace

import numpy as np
from rich import box
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn

import reporting
from data.corpus import Vocab, build_vocab, read_text
from data.frequency import assign_bands
from data.synthetic import write_sample_corpus
from errors import ConfigurationError, DataError, DrillError
from evaluation.bands import band_compare
from evaluation.benchmark import EpochBenchmark
from evaluation.evaluator import Evaluator
from evaluation.params import param_report
from layers.language_model import LanguageModel, build_language_model
from models.config import RunConfig, load_config, resolve_variants
from models.reports import AblationRow, RunSummary, TrainingLog
from training.checkpoint import load_checkpoint, read_checkpoint, restore_model
from training.trainer import Trainer

console = Console()
logger = logging.getLogger("drill")

SPLITS = ("train", "valid", "test")


def print_header(command: str):
    """Prints application header"""
    header = Panel(
        "[bold cyan]DRILL Language Modeling Toolkit[/bold cyan]\n"
        f"[dim]Deep residual output layers vs. classic output layers: {command}[/dim]",
        box=box.DOUBLE,
        border_style="cyan"
    )
    console.print(header)


def setup_logging(level: str):
    logging.basicConfig(
        level=level.upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, show_path=False, rich_tracebacks=True)],
        force=True,
    )


def apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        cfg = replace(cfg, seeds=(args.seed,), training=replace(cfg.training, seed=args.seed))
    if args.out:
        cfg = replace(cfg, out_dir=args.out)
    return cfg


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    return apply_overrides(cfg, args)


def load_corpus(cfg: RunConfig, *splits: str) -> tuple[Vocab, dict[str, np.ndarray]]:
    """Vocabulary from the training split, then ids for every requested split"""
    vocab = build_vocab(read_text(cfg.data.train), cfg.data.min_count)
    ids = {split: vocab.encode_file(getattr(cfg.data, split)) for split in splits}
    logger.info("vocabulary: %d types; %s", len(vocab),
                ", ".join(f"{s} {len(ids[s]):,} tokens" for s in splits))
    return vocab, ids


def evaluator_for(cfg: RunConfig) -> Evaluator:
    return Evaluator(cfg.training.bptt_len, cfg.training.eval_batch_size)


def out_dir(cfg: RunConfig) -> Path:
    path = Path(cfg.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def train_one(cfg: RunConfig, seed: int, vocab: Vocab, ids: dict[str, np.ndarray],
              checkpoint_path: Path) -> tuple[LanguageModel, TrainingLog]:
    """Trains one seed and returns the best-validation model reloaded from its checkpoint"""
    run_cfg = replace(cfg, seeds=(seed,), training=replace(cfg.training, seed=seed))
    model = build_language_model(len(vocab), cfg.encoder, cfg.output, np.random.default_rng(seed))
    log = Trainer(run_cfg.training).train(
        model, ids["train"], ids["valid"],
        checkpoint_path=checkpoint_path, run_config=run_cfg, vocab_hash=vocab.digest(),
    )
    return load_checkpoint(checkpoint_path), log


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    cfg.require_paths(*SPLITS)
    vocab, ids = load_corpus(cfg, *SPLITS)
    out = out_dir(cfg)
    vocab.export(out / "vocab.tsv", reporting.config_line(cfg))

    summaries = []
    for seed in cfg.seeds:
        console.print(f"\n[bold yellow]Training seed {seed}[/bold yellow] [dim]({cfg.output.kind})[/dim]")
        best, log = train_one(cfg, seed, vocab, ids, out / f"best_seed{seed}.ckpt")
        reporting.write_training_log(out / f"log_seed{seed}.csv", log, cfg)
        test_ppl = evaluator_for(cfg).perplexity(best, ids["test"])
        summaries.append(RunSummary(seed, log.best_val_ppl, test_ppl))
        console.print(reporting.training_table(log, f"Training Log (seed {seed})"))

    reporting.write_summary(out / "summary.csv", summaries, cfg)
    console.print(reporting.summary_table(summaries))
    console.print(f"[dim]Results saved to {out}[/dim]\n")
    return 0


def cmd_eval(args) -> int:
    if args.untrained:
        cfg = resolve_config(args)
        cfg.require_paths("train", args.split)
        vocab, ids = load_corpus(cfg, args.split)
        model = build_language_model(len(vocab), cfg.encoder, cfg.output,
                                     np.random.default_rng(cfg.training.seed))
        source = "untrained"
    else:
        if not args.checkpoint:
            raise ConfigurationError("eval needs a checkpoint path or --untrained")
        ckpt = read_checkpoint(args.checkpoint)
        cfg = apply_overrides(load_config(args.config) if args.config else ckpt.config, args)
        cfg.require_paths("train", args.split)
        vocab, ids = load_corpus(cfg, args.split)
        if vocab.digest() != ckpt.vocab_hash:
            raise DataError(f"{args.checkpoint} was trained on a different vocabulary "
                            f"(hash {ckpt.vocab_hash[:12]} vs {vocab.digest()[:12]})")
        model = restore_model(ckpt)
        source = str(args.checkpoint)

    losses = evaluator_for(cfg).per_token_losses(model, ids[args.split])
    out = out_dir(cfg)
    reporting.write_csv(out / "eval.csv", ("model", "split", "scored_tokens", "perplexity"),
                        [(source, args.split, len(losses), losses.perplexity)], cfg)
    if args.per_token:
        reporting.write_per_token(args.per_token, losses, cfg)
        console.print(f"[dim]Per-token losses saved to {args.per_token}[/dim]")
    console.print(Panel(
        f"[bold]{args.split}[/bold] perplexity: [green]{losses.perplexity:.3f}[/green] "
        f"over {len(losses):,} tokens",
        title=source, border_style="green",
    ))
    return 0


def cmd_ablate(args) -> int:
    cfg = resolve_config(args)
    if not cfg.ablate.kinds:
        raise ConfigurationError("ablate.kinds must list at least one variant")
    variants = resolve_variants(cfg.ablate.kinds, cfg)
    cfg.require_paths(*SPLITS)
    vocab, ids = load_corpus(cfg, *SPLITS)
    out = out_dir(cfg)
    vocab.export(out / "vocab.tsv", reporting.config_line(cfg))
    ckpt_dir = out / "ablate"
    ckpt_dir.mkdir(exist_ok=True)

    rows = []
    with Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}"),
                  console=console) as progress:
        for label, output_cfg in variants:
            task = progress.add_task(f"[cyan]Training {label}...", total=None)
            variant_cfg = replace(cfg, output=output_cfg)
            summaries, output_params = [], 0
            for seed in cfg.seeds:
                best, log = train_one(variant_cfg, seed, vocab, ids,
                                      ckpt_dir / f"{label}_seed{seed}.ckpt")
                test_ppl = evaluator_for(cfg).perplexity(best, ids["test"])
                summaries.append(RunSummary(seed, log.best_val_ppl, test_ppl))
                output_params = next(r.count for r in param_report(best) if r.component == "output")
            val, test = reporting.median_summary(summaries)
            rows.append(AblationRow(label, output_params, val, test))
            progress.update(task, completed=True)

    reporting.write_ablation(out / "ablation.csv", rows, cfg)
    table = reporting.ablation_table(rows)
    reporting.write_text(out / "ablation.txt", table, config=cfg)
    console.print(table)
    return 0


def cmd_bands(args) -> int:
    ours_ckpt = read_checkpoint(args.ours)
    baselines = [(Path(p).stem, read_checkpoint(p)) for p in args.baseline]
    for name, ckpt in baselines:
        if ckpt.vocab_hash != ours_ckpt.vocab_hash:
            raise DataError(f"baseline {name} and {Path(args.ours).stem} use different "
                            "vocabularies; band comparison needs one shared vocabulary")
    cfg = apply_overrides(load_config(args.config) if args.config else ours_ckpt.config, args)
    split = cfg.bands.split
    cfg.require_paths("train", split)
    bands_cfg = cfg.bands
    vocab, ids = load_corpus(cfg, split)
    if vocab.digest() != ours_ckpt.vocab_hash:
        raise DataError("the configured training split does not reproduce the checkpoints' vocabulary")
    bands = assign_bands(vocab, bands_cfg.boundaries)

    evaluator = evaluator_for(cfg)
    ours = evaluator.per_token_losses(restore_model(ours_ckpt), ids[split])
    reports = []
    for name, ckpt in baselines:
        baseline = evaluator.per_token_losses(restore_model(ckpt), ids[split])
        reports.append((name, band_compare(baseline, ours, bands, bands_cfg.weighting)))

    out = out_dir(cfg)
    reporting.write_band_reports(out / "bands.csv", reports, cfg)
    tables = [reporting.band_table(name, report) for name, report in reports]
    reporting.write_text(out / "bands.txt", *tables, config=cfg)
    for table in tables:
        console.print(table)
    return 0


def cmd_bench(args) -> int:
    cfg = resolve_config(args)
    kinds = tuple(args.kinds) if args.kinds else cfg.bench.kinds
    variants = resolve_variants(kinds, cfg)
    cfg.require_paths("train")
    vocab, ids = load_corpus(cfg, "train")

    benchmark = EpochBenchmark(cfg.encoder, cfg.training, cfg.bench.repetitions)
    rows = benchmark.run(variants, ids["train"], len(vocab))

    out = out_dir(cfg)
    reporting.write_bench(out / "bench.csv", rows, cfg)
    table = reporting.bench_table(rows)
    reporting.write_text(out / "bench.txt", table, config=cfg)
    console.print(table)
    return 0


def cmd_params(args) -> int:
    cfg = resolve_config(args)
    if cfg.data.train:
        cfg.require_paths("train")
        vocab_size = len(build_vocab(read_text(cfg.data.train), cfg.data.min_count))
    else:
        vocab_size = args.vocab_size
    model = build_language_model(vocab_size, cfg.encoder, cfg.output,
                                 np.random.default_rng(cfg.training.seed))
    rows = param_report(model)

    out = out_dir(cfg)
    reporting.write_params(out / "params.csv", rows, cfg)
    console.print(reporting.params_table(rows, f"{cfg.output.kind}, |V|={vocab_size:,}"))
    return 0


SAMPLE_CONFIG = """\
# desk-scale run over the generated corpus
seeds = [0, 1, 2]
out_dir = "runs"

[data]
train = "train.txt"
valid = "valid.txt"
test = "test.txt"

[encoder]
layers = 1
embed_size = 128
hidden_size = 128
dropout = 0.3

[output]
kind = "drill"
depth = 2
dropout_mode = "variational"
dropout_rate = 0.3

[training]
epochs = 20
batch_size = 20
bptt_len = 35

[ablate]
kinds = ["weight_tying", "drill:k=2", "drill:k=2,dropout=none"]

[bench]
kinds = ["weight_tying", "drill:k=4"]
repetitions = 3
"""


def cmd_synth(args) -> int:
    target = Path(args.out or "corpus")
    seed = args.seed if args.seed is not None else 0
    write_sample_corpus(target, args.train_tokens, args.valid_tokens, args.test_tokens,
                        args.vocab_size, seed)
    config_path = target / "config.toml"
    if not config_path.exists():
        config_path.write_text(SAMPLE_CONFIG, encoding="utf-8")
    console.print(f"[green]Sample corpus written to {target}[/green]")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--out", help="output directory (overrides out_dir)")
    common.add_argument("--seed", type=int, help="single seed (overrides seeds)")
    common.add_argument("--threads", type=int, help="BLAS/OpenMP thread count")
    common.add_argument("--log-level", default="info",
                        choices=["debug", "info", "warning", "error"])

    parser = argparse.ArgumentParser(prog="drill", description="DRILL language modeling toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train one model per seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="perplexity of a checkpoint on a split")
    p.add_argument("checkpoint", nargs="?")
    p.add_argument("--split", default="test", choices=SPLITS)
    p.add_argument("--untrained", action="store_true", help="evaluate a freshly initialized model")
    p.add_argument("--per-token", metavar="CSV", help="write position,target_id,nll rows")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", parents=[common], help="train every ablate.kinds variant")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("bands", parents=[common], help="per-frequency-band CE comparison")
    p.add_argument("--baseline", action="append", required=True, metavar="CKPT")
    p.add_argument("--ours", required=True, metavar="CKPT")
    p.set_defaults(func=cmd_bands)

    p = sub.add_parser("bench", parents=[common], help="seconds per epoch per output layer")
    p.add_argument("--kinds", nargs="+", metavar="VARIANT")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("params", parents=[common], help="parameter counts per component")
    p.add_argument("--vocab-size", type=int, default=10000)
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("synth", parents=[common], help="write a sample corpus and config")
    p.add_argument("--train-tokens", type=int, default=200_000)
    p.add_argument("--valid-tokens", type=int, default=20_000)
    p.add_argument("--test-tokens", type=int, default=20_000)
    p.add_argument("--vocab-size", type=int, default=3000)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    """Main execution function"""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    if args.threads:
        for name in THREAD_VARIABLES:
            os.environ.setdefault(name, str(args.threads))
    print_header(args.command)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        logger.error("configuration error: %s", exc)
        return 2
    except (DrillError, OSError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
