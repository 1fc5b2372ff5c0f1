"""
Mu Sweep - Experimental Analysis of the Fisher-Trace Penalty

Purpose:
    Train one model per regularization coefficient and compare them with a
    label-smoothing baseline trained on the same data:
    - fim regime at every mu of the grid (mu = 0 is the plain baseline)
    - lsr regime with the configured alpha

Metrics Collected:
    - test accuracy and mean max-probability after training
    - OSSA fooling curve over the configured epsilon grid, on the samples
      every trained model classifies correctly

Output:
    JSON file in results/experiments/ with a timestamped filename

Usage:
    python -m fimguard.experiments.mu_sweep --config config/run_synthetic.json
    python -m fimguard.experiments.mu_sweep --config config/run_mnist.json --mu 0 0.022
"""

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from ..attacks.registry import AttackConfig
from ..cli.main import exit_code_for
from ..cli.pipeline import build_network, load_datasets
from ..config.run_config import RunConfig, load_run_config
from ..config.settings import settings
from ..errors import FimGuardError
from ..evaluation.robustness import common_eligible, fooling_curve
from ..models.network import Network
from ..training.trainer import TrainConfig, evaluate_accuracy, mean_max_probability, train
from ..utils.console import print_error, print_outputs, print_summary_table
from ..utils.logger import setup_logger
from ..utils.timestamp import compact_stamp, utc_now

logger = setup_logger(__name__)

DEFAULT_MU_GRID = (0.0, 0.01, 0.02, 0.022, 0.024)


@dataclass
class SweepEntry:
    label: str
    regime: str
    mu: float
    test_acc: float
    mean_maxp: float
    curve: List[Dict[str, Any]] = field(default_factory=list)


class MuSweep:
    """
    Train and attack one model per sweep setting.

    Every model shares the data, architecture seed and training schedule of
    the base run config; only the regime and mu change.
    """

    def __init__(self, cfg: RunConfig, mu_grid: Sequence[float] = DEFAULT_MU_GRID,
                 include_lsr: bool = True, samples: Optional[int] = None, threads: int = 1):
        if any(mu < 0 for mu in mu_grid):
            raise ValueError("mu values must be non-negative")
        self.cfg = cfg
        self.mu_grid = [float(mu) for mu in mu_grid]
        self.include_lsr = include_lsr
        self.samples = samples or cfg.eval.curve_samples
        self.threads = threads
        self.entries: List[SweepEntry] = []

    def settings_to_run(self) -> List[TrainConfig]:
        base = self.cfg.train.model_dump()
        configs = [TrainConfig(**{**base, "regime": "fim", "mu": mu}) for mu in self.mu_grid]
        if self.include_lsr:
            configs.append(TrainConfig(**{**base, "regime": "lsr", "mu": 0.0}))
        return configs

    @staticmethod
    def label(config: TrainConfig) -> str:
        return f"lsr-{config.alpha:g}" if config.regime == "lsr" else f"mu-{config.mu:g}"

    def run(self) -> List[SweepEntry]:
        train_set, test_set = load_datasets(self.cfg)
        trained: List[Network] = []
        configs = self.settings_to_run()
        for config in configs:
            logger.info("Sweep training", extra={"setting": self.label(config)})
            net = build_network(self.cfg, train_set.input_shape, train_set.num_classes)
            net, _ = train(net, train_set, config)
            trained.append(net)

        indices = common_eligible(trained, test_set, limit=self.samples)
        attack = self.cfg.attack("ossa")
        grid = attack.epsilon_grid or self.cfg.eval.epsilon_grid
        self.entries = []
        for config, net in zip(configs, trained):
            label = self.label(config)
            curve = fooling_curve(net, attack, grid, test_set, indices, self.threads, label)
            self.entries.append(SweepEntry(
                label=label,
                regime=config.regime,
                mu=config.mu,
                test_acc=evaluate_accuracy(net, test_set),
                mean_maxp=mean_max_probability(net, test_set),
                curve=curve.rows(),
            ))
        logger.info("Sweep complete", extra={"settings": len(self.entries),
                                             "samples": int(indices.size)})
        return self.entries

    def results(self) -> Dict[str, Any]:
        return {
            "metadata": {
                "timestamp": utc_now(),
                "mu_grid": self.mu_grid,
                "include_lsr": self.include_lsr,
                "samples": self.samples,
                "config": self.cfg.model_dump(mode="json"),
            },
            "entries": [entry.__dict__ for entry in self.entries],
        }

    def save_results(self, output_dir: Path) -> Path:
        output_dir.mkdir(parents=True, exist_ok=True)
        output_file = output_dir / f"mu_sweep_{compact_stamp()}.json"
        with open(output_file, "w", encoding="utf-8") as f:
            json.dump(self.results(), f, indent=2, sort_keys=True)
        logger.info(f"Results saved to {output_file}")
        return output_file


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Sweep the Fisher-trace coefficient mu")
    parser.add_argument("--config", type=str, default=None, help="JSON run config")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="Dotted-path config override (repeatable)")
    parser.add_argument("--mu", type=float, nargs="+", default=list(DEFAULT_MU_GRID),
                        help="mu values to train (default: %(default)s)")
    parser.add_argument("--no-lsr", action="store_true", help="Skip the label-smoothing model")
    parser.add_argument("--samples", type=int, default=None, help="Samples per curve")
    parser.add_argument("--threads", type=int, default=None, help="Per-sample worker threads")
    parser.add_argument("--output-dir", type=str, default=None,
                        help="Output directory (default: paths.experiments_dir)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_run_config(args.config, args.overrides)
        sweep = MuSweep(cfg, args.mu, include_lsr=not args.no_lsr, samples=args.samples,
                        threads=args.threads or settings.threads)
        entries = sweep.run()
        output_file = sweep.save_results(Path(args.output_dir or settings.experiments_dir))
    except (FimGuardError, ValueError) as exc:
        logger.error("Sweep failed", extra={"error": str(exc)})
        print_error(str(exc), context=type(exc).__name__)
        return exit_code_for(exc)

    eps = [row["epsilon"] for row in entries[0].curve] if entries else []
    print_summary_table(
        "Mu sweep",
        ["setting", "test acc", "mean maxp"] + [f"eps={e:g}" for e in eps],
        [[e.label, e.test_acc, e.mean_maxp] + [row["ratio"] for row in e.curve] for e in entries],
    )
    print_outputs({"results": str(output_file)})
    return 0


if __name__ == "__main__":
    sys.exit(main())
