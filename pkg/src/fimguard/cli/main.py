"""
fimguard Command-Line Entry Point

Usage:
    fimguard train  --config c.json [--set train.mu=0.022] [--out DIR]
    fimguard attack --config c.json --ckpt m.ckpt --attack ossa --eps 1.0 [--threads N]
    fimguard eval   --config c.json --ckpt base.ckpt fim.ckpt [--threads N]
    fimguard verify --ckpt m.ckpt [--config c.json]

Common arguments:
    --config: JSON run config (defaults for every missing key)
    --set: dotted-path override, repeatable (values parsed as YAML)
    --threads: per-sample worker threads (default: FIMGUARD_THREADS or 1)
    --out: output directory (default: output.directory, then FIMGUARD_OUTPUT_DIR)
    --log-level: DEBUG, INFO, WARNING, ERROR

Exit codes:
    0 success, 1 usage/config, 2 data/checkpoint, 3 numeric failure
"""

import argparse
import sys
from pathlib import Path
from typing import NoReturn, Optional, Sequence

import numpy as np

from ..attacks.registry import ATTACKS, attack_names
from ..config.run_config import RunConfig, load_run_config
from ..data.idx import write_idx_images, write_idx_labels
from ..errors import ConfigError, DataError, EmptySampleSetError, FimGuardError, NumericError
from ..evaluation.report import RobustnessReport, write_sample_records
from ..evaluation.robustness import (
    DistanceResult,
    attack_dataset,
    common_eligible,
    cross_model_transfer,
    fooling_curve,
    label_distribution_snapshot,
    mean_adv_distance,
)
from ..evaluation.verify import run_verify_suite, suite_passed
from ..models.checkpoint import checkpoint_train_config, load_checkpoint, save_checkpoint
from ..training.trainer import train
from ..utils.console import (
    console,
    print_epoch,
    print_error,
    print_outputs,
    print_startup_banner,
    print_summary_table,
    print_verify_table,
)
from ..utils.logger import StructuredLogger, log_with_context, setup_logger
from .pipeline import (
    CHECKPOINT_NAME,
    TRAINLOG_NAME,
    build_network,
    load_compatible,
    load_datasets,
    model_ids,
    new_run_id,
)

logger = setup_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors raised as ConfigError (exit code 1)."""

    def error(self, message: str) -> NoReturn:
        raise ConfigError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="fimguard",
        description="Fisher-information defense, spectral and classical attacks, robustness reports",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=str, default=None, help="JSON run config")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="Dotted-path config override (repeatable)")
        p.add_argument("--threads", type=int, default=None, help="Per-sample worker threads")
        p.add_argument("--out", type=str, default=None, help="Output directory")
        p.add_argument("--log-level", type=str, default=None, help="Log level")

    p_train = sub.add_parser("train", help="Train a model and write its checkpoint")
    common(p_train)

    p_attack = sub.add_parser("attack", help="Attack test samples with one checkpoint")
    common(p_attack)
    p_attack.add_argument("--ckpt", required=True, help="Checkpoint file")
    p_attack.add_argument("--attack", required=True, help=f"One of: {', '.join(attack_names())}")
    p_attack.add_argument("--eps", type=float, default=None, help="Budget (overrides the config)")
    p_attack.add_argument("--samples", type=int, default=None, help="Eligible samples to attack")
    p_attack.add_argument("--dump", action="store_true",
                          help="Also write the adversarial images in IDX layout")

    p_eval = sub.add_parser("eval", help="Build the robustness report")
    common(p_eval)
    p_eval.add_argument("--ckpt", nargs="+", required=True, help="One or more checkpoints")

    p_verify = sub.add_parser("verify", help="Run the fast invariant suite on a checkpoint")
    common(p_verify)
    p_verify.add_argument("--ckpt", required=True, help="Checkpoint file")
    p_verify.add_argument("--samples", type=int, default=None, help="Samples to check")
    return parser


def _threads(args: argparse.Namespace, cfg: RunConfig) -> int:
    threads = args.threads if args.threads is not None else cfg.execution.resolved_threads
    if threads < 1:
        raise ConfigError(f"--threads must be >= 1, got {threads}")
    return threads


def _out_dir(args: argparse.Namespace, cfg: RunConfig) -> Path:
    return Path(args.out or cfg.output.resolved_directory)


def cmd_train(args: argparse.Namespace, cfg: RunConfig, run_id: str) -> int:
    """Train per cfg.train; writes model.ckpt, trainlog.csv, resolved-config.json."""
    out = _out_dir(args, cfg)
    train_set, test_set = load_datasets(cfg)
    net = build_network(cfg, train_set.input_shape, train_set.num_classes)
    print_startup_banner("train", run_id, str(out), {
        "Regime": cfg.train.regime, "mu": cfg.train.effective_mu,
        "Epochs": cfg.train.epochs, "Samples": len(train_set),
    })

    def on_epoch(record, epochs):
        print_epoch(record.epoch, epochs, record.loss, record.ce, record.reg,
                    record.test_acc, record.mean_maxp)

    net, log = train(net, train_set, cfg.train, eval_set=test_set, on_epoch=on_epoch)
    out.mkdir(parents=True, exist_ok=True)
    digest = save_checkpoint(net, out / CHECKPOINT_NAME, train_config=cfg.train.model_dump())
    paths = {
        "checkpoint": str(out / CHECKPOINT_NAME),
        "trainlog": str(log.to_csv(out / TRAINLOG_NAME)),
        "config": str(cfg.write_resolved(out)),
    }
    logger.info("Training run complete", extra={"checkpoint_hash": digest, **paths})
    print_outputs(paths)
    return EXIT_OK


def cmd_attack(args: argparse.Namespace, cfg: RunConfig, run_id: str) -> int:
    """Attack the first eligible test samples; writes per_sample.csv (+ optional IDX dump)."""
    name = args.attack.strip().lower()
    if name not in ATTACKS:
        raise ConfigError(f"unknown attack {args.attack!r}; valid names: {', '.join(attack_names())}")
    attack = cfg.attack(name)
    epsilon = args.eps if args.eps is not None else attack.epsilon
    if attack.spec.family == "budgeted" and epsilon is None:
        raise ConfigError(f"attack {name} needs a budget: pass --eps or set attacks[].epsilon")
    out = _out_dir(args, cfg)
    _, test_set = load_datasets(cfg)
    (net,) = load_compatible([args.ckpt], test_set)
    threads = _threads(args, cfg)
    samples = args.samples or cfg.eval.attack_samples
    indices = common_eligible([net], test_set, limit=samples)
    print_startup_banner("attack", run_id, str(out), {
        "Attack": name, "Epsilon": epsilon, "Samples": len(indices),
    })

    run = attack_dataset(net, attack, test_set, indices, epsilon, threads,
                         model_id=model_ids([args.ckpt])[0])
    out.mkdir(parents=True, exist_ok=True)
    paths = {"per_sample": str(write_sample_records(run.records, out / "per_sample.csv"))}
    if args.dump or cfg.output.dump_adversarial:
        images = np.stack([o.x_adv for o in run.outcomes])
        write_idx_images(out / "adversarial-images-idx3-ubyte", images)
        write_idx_labels(out / "adversarial-labels-idx1-ubyte", test_set.labels[run.indices])
        paths["adversarial_images"] = str(out / "adversarial-images-idx3-ubyte")
        paths["adversarial_labels"] = str(out / "adversarial-labels-idx1-ubyte")
    resolved = cfg.with_attack(attack.model_copy(update={"epsilon": epsilon}))
    paths["config"] = str(resolved.write_resolved(out, threads))
    norms = [o.achieved_norm for o, f in zip(run.outcomes, run.fooled) if f]
    print_summary_table(f"Attack {name}", ["samples", "fooled", "ratio", "mean norm (fooled)"],
                        [[len(indices), int(run.fooled.sum()), run.ratio,
                          float(np.mean(norms)) if norms else float("nan")]])
    logger.info("Attack run complete", extra={"attack": name, "ratio": run.ratio,
                                              "samples": int(len(indices))})
    print_outputs(paths)
    return EXIT_OK


def _distance_or_empty(net, attack, test_set, indices, threads, model_id) -> DistanceResult:
    try:
        return mean_adv_distance(net, attack, test_set, indices, threads, model_id)
    except EmptySampleSetError as exc:
        log_with_context(logger, "warning", "Distance cell empty", attack=attack.name,
                         model=model_id, reason=str(exc))
        return DistanceResult(attack.name, model_id, attack.resolved_norm, float("nan"),
                              0, len(indices))


def cmd_eval(args: argparse.Namespace, cfg: RunConfig, run_id: str) -> int:
    """Curves, distances, transfer and snapshots per cfg.eval.modes; writes the report set."""
    modes = cfg.eval.modes
    if not cfg.attacks and any(m in modes for m in ("curve", "distance", "transfer")):
        raise ConfigError("eval needs at least one entry under 'attacks'")
    if "transfer" in modes and len(args.ckpt) < 2:
        raise ConfigError("transfer mode needs at least two checkpoints")
    out = _out_dir(args, cfg)
    threads = _threads(args, cfg)
    _, test_set = load_datasets(cfg)
    nets = load_compatible(args.ckpt, test_set)
    ids = model_ids(args.ckpt)
    print_startup_banner("eval", run_id, str(out), {
        "Models": ", ".join(ids), "Modes": ", ".join(modes),
        "Attacks": ", ".join(a.name for a in cfg.attacks),
    })

    report = RobustnessReport(metadata={
        "run_id": run_id,
        "threads": threads,
        "checkpoints": {i: {"path": p, "hash": n.checkpoint_hash()}
                        for i, p, n in zip(ids, args.ckpt, nets)},
        "config": cfg.resolved(out, threads).model_dump(mode="json"),
    })
    if "curve" in modes:
        indices = common_eligible(nets, test_set, limit=cfg.eval.curve_samples)
        for attack in cfg.attacks:
            grid = attack.epsilon_grid or cfg.eval.epsilon_grid
            for net, model_id in zip(nets, ids):
                report.curves.append(fooling_curve(net, attack, grid, test_set, indices,
                                                   threads, model_id))
    if "distance" in modes:
        indices = common_eligible(nets, test_set, limit=cfg.eval.distance_samples)
        for attack in cfg.attacks:
            for net, model_id in zip(nets, ids):
                report.distances.append(
                    _distance_or_empty(net, attack, test_set, indices, threads, model_id)
                )
    if "transfer" in modes:
        indices = common_eligible(nets, test_set, limit=cfg.eval.transfer_samples)
        for attack in cfg.attacks:
            if attack.spec.family == "budgeted" and attack.epsilon is None:
                raise ConfigError(f"transfer with {attack.name} needs attacks[].epsilon")
            for i, (src, src_id) in enumerate(zip(nets, ids)):
                for j, (dst, dst_id) in enumerate(zip(nets, ids)):
                    if i != j:
                        report.transfers.append(cross_model_transfer(
                            src, dst, attack, test_set, indices, threads=threads,
                            source_id=src_id, target_id=dst_id,
                        ))
    if "snapshot" in modes:
        indices = common_eligible(nets, test_set, limit=cfg.eval.snapshot_samples)
        for net, model_id in zip(nets, ids):
            report.snapshots[model_id] = [
                label_distribution_snapshot(net, test_set.images[i], int(test_set.labels[i]))
                for i in indices
            ]

    paths = report.write(out)
    paths["config"] = str(cfg.write_resolved(out, threads))
    if report.curves:
        print_summary_table("Fooling curves", ["attack", "model", "epsilon", "ratio", "n"],
                            [list(r.values()) for c in report.curves for r in c.rows()])
    if report.distances:
        print_summary_table("Mean adversarial distance",
                            ["attack", "model", "norm", "mean", "successes", "attempted"],
                            [list(d.row().values()) for d in report.distances])
    if report.transfers:
        print_summary_table("Transfer accuracy",
                            ["attack", "source", "target", "accuracy", "n",
                             "acc. on fooled", "n fooled"],
                            [list(t.row().values()) for t in report.transfers])
    print_outputs(paths)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace, cfg: RunConfig, run_id: str) -> int:
    """Invariant suite on test samples (config given) or seeded uniform inputs."""
    samples = args.samples or cfg.eval.verify_samples
    if args.config is not None:
        _, test_set = load_datasets(cfg)
        (net,) = load_compatible([args.ckpt], test_set)
        images = test_set.images[:samples]
        source = "test set"
    else:
        net = load_checkpoint(args.ckpt)
        rng = np.random.default_rng(0)
        images = rng.uniform(0.0, 1.0, size=(samples,) + net.input_shape)
        source = "uniform random inputs"
    print_startup_banner("verify", run_id, str(Path(args.ckpt).parent), {
        "Checkpoint": args.ckpt, "Hash": net.checkpoint_hash()[:16],
        "Regime": checkpoint_train_config(args.ckpt).get("regime", "unknown"), "Inputs": source,
    })
    results = run_verify_suite(net, images, num_samples=samples)
    print_verify_table(results)
    if not suite_passed(results):
        failed = [r.name for r in results if r.status == "fail"]
        logger.error("Invariant checks failed", extra={"failed": failed})
        print_error(f"failed checks: {', '.join(failed)}", context=args.ckpt)
        return EXIT_NUMERIC
    return EXIT_OK


COMMANDS = {"train": cmd_train, "attack": cmd_attack, "eval": cmd_eval, "verify": cmd_verify}


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (DataError, EmptySampleSetError)):
        return EXIT_DATA
    if isinstance(exc, NumericError):
        return EXIT_NUMERIC
    return EXIT_CONFIG


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, run one command and return its exit code."""
    command = "fimguard"
    try:
        args = build_parser().parse_args(list(argv) if argv is not None else None)
        command = args.command
        if args.log_level:
            StructuredLogger.set_level(args.log_level)
        run_id = new_run_id(command)
        StructuredLogger.set_run_id(run_id)
        cfg = load_run_config(args.config, args.overrides)
        return COMMANDS[command](args, cfg, run_id)
    except (FimGuardError, ValueError) as exc:
        code = exit_code_for(exc)
        logger.error("Command failed", extra={"command": command, "error": str(exc),
                                              "error_type": type(exc).__name__,
                                              "exit_code": code})
        print_error(str(exc), context=f"{command} ({type(exc).__name__})")
        return code
    except KeyboardInterrupt:
        console.print("[yellow]Interrupted[/yellow]")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
