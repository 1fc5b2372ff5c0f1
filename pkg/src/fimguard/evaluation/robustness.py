"""
Robustness Measurement - Building Block: fooling_curve / mean_adv_distance / cross_model_transfer

Purpose:
    The measurement harness over frozen networks:
    - fooling ratio and fooling curves over epsilon grids
    - mean adversarial distance (norm-minimizing attacks run as-is,
      budgeted attacks via 12-step bisection on [0, eps_max])
    - cross-model transfer accuracy
    - label-distribution snapshots

Input Data:
    - frozen Network(s), LabeledDataset, AttackConfig
    - sample indices (normally the common eligible set)

Output Data:
    - FoolingCurve, DistanceResult, TransferResult, LabelSnapshot, each
      carrying the per-sample records it was computed from

Setup/Configuration:
    - threads: per-sample fan-out (ThreadPoolExecutor); results are
      collected in sample order so any thread count gives the same output
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, TypeVar

import numpy as np

from ..attacks.base import AttackOutcome, norm_of
from ..attacks.registry import AttackConfig, run_attack
from ..data.datasets import LabeledDataset
from ..errors import EmptySampleSetError
from ..models.network import Network, classify, predict_proba
from ..utils.logger import setup_logger

logger = setup_logger(__name__)

BISECTION_STEPS = 12
DEFAULT_EPS_MAX = {"l0": 200.0, "l1": 50.0, "l2": 10.0, "linf": 0.5}

T = TypeVar("T")


def perturbation_norm(x: np.ndarray, x_adv: np.ndarray, kind: str) -> float:
    """l0 (changed coordinates, tolerance 1e-12), l1, l2 or linf distance."""
    x = np.asarray(x, dtype=np.float64)
    x_adv = np.asarray(x_adv, dtype=np.float64)
    if x.shape != x_adv.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {x_adv.shape}")
    return norm_of(x_adv - x, kind)


def parallel_map(fn: Callable[[int], T], items: Sequence[int], threads: int = 1) -> List[T]:
    """Apply ``fn`` to every item, preserving order."""
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def eligible_indices(net: Network, dataset: LabeledDataset) -> np.ndarray:
    """Indices of samples ``net`` classifies correctly."""
    predicted = classify(net, dataset.images)
    return np.nonzero(predicted == dataset.labels)[0]


def common_eligible(nets: Sequence[Network], dataset: LabeledDataset,
                    limit: Optional[int] = None) -> np.ndarray:
    """
    Sorted intersection of the correctly-classified sets of ``nets``.

    ``limit`` keeps the first ``limit`` indices.

    Raises:
        EmptySampleSetError: the intersection is empty
    """
    if not nets:
        raise ValueError("need at least one network")
    common = eligible_indices(nets[0], dataset)
    for net in nets[1:]:
        common = np.intersect1d(common, eligible_indices(net, dataset))
    if limit is not None:
        common = common[:limit]
    if common.size == 0:
        raise EmptySampleSetError("no sample is classified correctly by every model")
    return common


def _record(outcome: AttackOutcome, model: str, attack: str, epsilon: Optional[float],
            index: int, y_true: int, fooled: bool) -> Dict[str, Any]:
    record = {
        "model": model,
        "attack": attack,
        "epsilon": float("nan") if epsilon is None else float(epsilon),
        "index": int(index),
        "y_true": int(y_true),
        "fooled": bool(fooled),
    }
    record.update(outcome.as_record())
    return record


@dataclass
class CurvePoint:
    epsilon: float
    ratio: float
    count: int


@dataclass
class FoolingCurve:
    attack: str
    model: str
    points: List[CurvePoint] = field(default_factory=list)
    records: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        ratios = [p.ratio for p in self.points]
        return all(b >= a for a, b in zip(ratios, ratios[1:]))

    def rows(self) -> List[Dict[str, Any]]:
        return [{"attack": self.attack, "model": self.model, "epsilon": p.epsilon,
                 "ratio": p.ratio, "n": p.count} for p in self.points]


def _attack_indices(net: Network, dataset: LabeledDataset, config: AttackConfig,
                    indices: Sequence[int], epsilon: Optional[float],
                    threads: int) -> List[AttackOutcome]:
    def one(i: int) -> AttackOutcome:
        return run_attack(net, dataset.images[i], int(dataset.labels[i]), config,
                          epsilon=epsilon, index=int(i))

    return parallel_map(one, list(indices), threads)


def _reverify(net: Network, outcomes: List[AttackOutcome]) -> np.ndarray:
    """Labels of the adversarial inputs, recomputed by the harness."""
    if not outcomes:
        return np.zeros(0, dtype=np.int64)
    return classify(net, np.stack([o.x_adv for o in outcomes]))


@dataclass
class AttackRun:
    """Outcomes of one attack over a sample set, with harness-verified fooling."""

    indices: np.ndarray
    outcomes: List[AttackOutcome]
    fooled: np.ndarray
    records: List[Dict[str, Any]]

    @property
    def ratio(self) -> float:
        return float(self.fooled.sum()) / self.indices.size


def attack_dataset(net: Network, config: AttackConfig, dataset: LabeledDataset,
                   indices: Optional[Sequence[int]] = None, epsilon: Optional[float] = None,
                   threads: int = 1, model_id: str = "model") -> AttackRun:
    """
    Attack every selected sample and re-classify the results.

    ``indices`` defaults to the samples ``net`` classifies correctly.

    Raises:
        EmptySampleSetError: no eligible sample
    """
    idx = eligible_indices(net, dataset) if indices is None else np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        raise EmptySampleSetError("the attack needs at least one eligible sample")
    eps = config.epsilon if epsilon is None else epsilon
    outcomes = _attack_indices(net, dataset, config, idx, eps, threads)
    fooled = _reverify(net, outcomes) != dataset.labels[idx]
    records = [
        _record(o, model_id, config.name, eps, i, int(dataset.labels[i]), bool(f))
        for o, i, f in zip(outcomes, idx, fooled)
    ]
    return AttackRun(indices=idx, outcomes=outcomes, fooled=fooled, records=records)


def fooling_ratio(net: Network, config: AttackConfig, dataset: LabeledDataset,
                  indices: Optional[Sequence[int]] = None, epsilon: Optional[float] = None,
                  threads: int = 1, model_id: str = "model") -> tuple:
    """
    Fraction of eligible samples misclassified after the attack.

    Returns:
        (ratio, count, per-sample records)

    Raises:
        EmptySampleSetError: no eligible sample
    """
    run = attack_dataset(net, config, dataset, indices, epsilon, threads, model_id)
    logger.debug("Fooling ratio", extra={"attack": config.name, "model": model_id,
                                         "epsilon": epsilon, "ratio": run.ratio,
                                         "n": int(run.indices.size)})
    return run.ratio, int(run.indices.size), run.records


def fooling_curve(net: Network, config: AttackConfig, epsilon_grid: Sequence[float],
                  dataset: LabeledDataset, indices: Optional[Sequence[int]] = None,
                  threads: int = 1, model_id: str = "model") -> FoolingCurve:
    """Fooling ratio at every grid point; a non-monotone curve is logged, not rejected."""
    grid = [float(e) for e in epsilon_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("epsilon grid must be strictly increasing")
    curve = FoolingCurve(attack=config.name, model=model_id)
    for eps in grid:
        ratio, count, records = fooling_ratio(net, config, dataset, indices, eps,
                                              threads, model_id)
        curve.points.append(CurvePoint(epsilon=eps, ratio=ratio, count=count))
        curve.records.extend(records)
    if not curve.monotone:
        logger.warning("Fooling curve is not monotone in epsilon",
                       extra={"attack": config.name, "model": model_id,
                              "ratios": [p.ratio for p in curve.points]})
    logger.info("Fooling curve done", extra={"attack": config.name, "model": model_id,
                                             "points": len(curve.points)})
    return curve


def minimal_adversarial(net: Network, config: AttackConfig, x: np.ndarray, y_true: int,
                        index: int = 0, eps_max: Optional[float] = None,
                        steps: int = BISECTION_STEPS) -> Optional[AttackOutcome]:
    """
    Smallest-budget successful outcome for one sample, or None.

    Minimizing attacks run once. Budgeted attacks are tried at ``eps_max``
    and then bisected ``steps`` times on [0, eps_max], keeping the outcome at
    the smallest successful budget.
    """
    if config.spec.family == "minimizing":
        outcome = run_attack(net, x, y_true, config, index=index)
        return outcome if outcome.success else None
    upper = eps_max or config.eps_max or DEFAULT_EPS_MAX[config.resolved_norm]
    best = run_attack(net, x, y_true, config, epsilon=upper, index=index)
    if not best.success:
        return None
    lo, hi = 0.0, upper
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        outcome = run_attack(net, x, y_true, config, epsilon=mid, index=index)
        if outcome.success:
            hi, best = mid, outcome
        else:
            lo = mid
    best.extra["epsilon"] = hi
    return best


@dataclass
class DistanceResult:
    attack: str
    model: str
    norm: str
    mean_distance: float
    successes: int
    attempted: int
    records: List[Dict[str, Any]] = field(default_factory=list)

    def row(self) -> Dict[str, Any]:
        return {"attack": self.attack, "model": self.model, "norm": self.norm,
                "mean_distance": self.mean_distance, "successes": self.successes,
                "attempted": self.attempted}


def mean_adv_distance(net: Network, config: AttackConfig, dataset: LabeledDataset,
                      indices: Optional[Sequence[int]] = None, threads: int = 1,
                      model_id: str = "model", eps_max: Optional[float] = None) -> DistanceResult:
    """
    Mean achieved norm over the successfully attacked samples.

    Raises:
        EmptySampleSetError: no eligible sample, or no attack succeeded
    """
    idx = eligible_indices(net, dataset) if indices is None else np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        raise EmptySampleSetError("mean distance needs at least one eligible sample")

    def one(i: int) -> Optional[AttackOutcome]:
        return minimal_adversarial(net, config, dataset.images[i], int(dataset.labels[i]),
                                   index=int(i), eps_max=eps_max)

    outcomes = parallel_map(one, list(idx), threads)
    records, distances = [], []
    for i, outcome in zip(idx, outcomes):
        if outcome is None:
            continue
        fooled = int(classify(net, outcome.x_adv[None])[0]) != int(dataset.labels[i])
        if not fooled:
            continue
        distances.append(outcome.achieved_norm)
        records.append(_record(outcome, model_id, config.name, outcome.extra.get("epsilon"),
                               i, int(dataset.labels[i]), True))
    if not distances:
        raise EmptySampleSetError(
            f"attack {config.name} fooled no sample on {model_id}; mean distance undefined"
        )
    result = DistanceResult(
        attack=config.name, model=model_id, norm=config.resolved_norm,
        mean_distance=float(np.mean(distances)), successes=len(distances),
        attempted=int(idx.size), records=records,
    )
    logger.info("Mean adversarial distance", extra=result.row())
    return result


@dataclass
class TransferResult:
    attack: str
    source: str
    target: str
    accuracy: float
    count: int
    accuracy_on_fooled: Optional[float]
    fooled_count: int

    def row(self) -> Dict[str, Any]:
        return {"attack": self.attack, "source": self.source, "target": self.target,
                "accuracy": self.accuracy, "n": self.count,
                "accuracy_on_fooled": (float("nan") if self.accuracy_on_fooled is None
                                       else self.accuracy_on_fooled),
                "n_fooled": self.fooled_count}


def cross_model_transfer(net_src: Network, net_dst: Network, config: AttackConfig,
                         dataset: LabeledDataset, indices: Optional[Sequence[int]] = None,
                         epsilon: Optional[float] = None, threads: int = 1,
                         source_id: str = "source", target_id: str = "target") -> TransferResult:
    """
    Accuracy of ``net_dst`` on adversarial examples crafted against ``net_src``.

    ``indices`` defaults to the samples both networks classify correctly.
    Accuracy is reported on the whole set and on the subset that fooled the
    source model.
    """
    idx = (common_eligible([net_src, net_dst], dataset) if indices is None
           else np.asarray(indices, dtype=np.int64))
    if idx.size == 0:
        raise EmptySampleSetError("transfer needs at least one eligible sample")
    eps = config.epsilon if epsilon is None else epsilon
    outcomes = _attack_indices(net_src, dataset, config, idx, eps, threads)
    labels = dataset.labels[idx]
    fooled_src = _reverify(net_src, outcomes) != labels
    correct_dst = _reverify(net_dst, outcomes) == labels
    n_fooled = int(fooled_src.sum())
    result = TransferResult(
        attack=config.name, source=source_id, target=target_id,
        accuracy=float(correct_dst.mean()), count=int(idx.size),
        accuracy_on_fooled=float(correct_dst[fooled_src].mean()) if n_fooled else None,
        fooled_count=n_fooled,
    )
    logger.info("Transfer accuracy", extra=result.row())
    return result


@dataclass
class LabelSnapshot:
    probabilities: List[float]
    predicted: int
    true_label: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return {"probabilities": self.probabilities, "predicted": self.predicted,
                "true_label": self.true_label}


def label_distribution_snapshot(net: Network, x: np.ndarray,
                                y_true: Optional[int] = None) -> LabelSnapshot:
    """Softmax vector of one sample with its predicted (and true) label."""
    x = np.asarray(x, dtype=np.float64).reshape((1,) + net.input_shape)
    p = predict_proba(net, x)[0]
    return LabelSnapshot(
        probabilities=[float(v) for v in p],
        predicted=int(np.argmax(p)),
        true_label=None if y_true is None else int(y_true),
    )
