"""
Fast invariant suite run against a checkpoint.

Checks, per sample:
    - simplex: softmax rows are nonnegative and sum to 1
    - trace_identity: eigenvalue sum of the dense G_s equals sum 1/p_i
    - trace_bound: sum 1/p_i >= K^2
    - jacobian_columns: columns of the input Jacobian sum to 0
    - ossa_consistency: eta^T G_x eta equals lambda_max for the OSSA direction

Saturated samples (clamped probabilities, zero Jacobian, degenerate OSSA)
produce warnings, never failures.
"""

from dataclasses import dataclass
from typing import Iterable, List

import numpy as np

from ..core.functional import PROB_CLAMP
from ..fim.eigen import jacobi_eigh
from ..fim.metric import dense_output_fim, fim_trace, input_fim_quadratic, input_jacobian, ossa_direction
from ..models.network import Network
from ..utils.logger import setup_logger

logger = setup_logger(__name__)

SIMPLEX_TOL = 1e-9
TRACE_TOL = 1e-9
COLUMN_TOL = 1e-7
OSSA_TOL = 1e-6
_RANK = {"pass": 0, "warn": 1, "fail": 2}


@dataclass
class CheckResult:
    name: str
    status: str
    value: float
    detail: str = ""


class _Check:
    def __init__(self, name: str, tolerance: float):
        self.name = name
        self.tolerance = tolerance
        self.status = "pass"
        self.worst = 0.0
        self.notes: List[str] = []

    def observe(self, value: float, sample: int) -> None:
        self.worst = max(self.worst, value)
        if value > self.tolerance:
            self._raise("fail", f"sample {sample}: {value:.3e} > {self.tolerance:.0e}")

    def warn(self, note: str) -> None:
        self._raise("warn", note)

    def _raise(self, status: str, note: str) -> None:
        if _RANK[status] > _RANK[self.status]:
            self.status = status
        if len(self.notes) < 3:
            self.notes.append(note)

    def result(self) -> CheckResult:
        detail = "; ".join(self.notes) or f"tolerance {self.tolerance:.0e}"
        return CheckResult(self.name, self.status, self.worst, detail)


def run_verify_suite(net: Network, images: np.ndarray, num_samples: int = 10) -> List[CheckResult]:
    """
    Run the invariant checks on the first ``num_samples`` inputs.

    Raises:
        ValueError: no input sample given
    """
    images = np.asarray(images, dtype=np.float64)[:num_samples]
    if images.shape[0] == 0:
        raise ValueError("verification needs at least one input sample")
    simplex = _Check("simplex", SIMPLEX_TOL)
    trace = _Check("trace_identity", TRACE_TOL)
    bound = _Check("trace_bound", TRACE_TOL)
    columns = _Check("jacobian_columns", COLUMN_TOL)
    ossa = _Check("ossa_consistency", OSSA_TOL)

    for i, x in enumerate(images):
        jac = input_jacobian(net, x)
        p = jac.probs
        k = p.size
        simplex.observe(max(abs(float(p.sum()) - 1.0), float(max(0.0, -p.min()))), i)

        tr = fim_trace(p)
        bound.observe(max(0.0, (k * k - tr) / (k * k)), i)
        if p.min() < PROB_CLAMP:
            trace.warn(f"sample {i}: probabilities below the clamp")
        else:
            eigenvalues, _ = jacobi_eigh(dense_output_fim(p))
            trace.observe(abs(float(eigenvalues.sum()) - tr) / tr, i)

        if jac.is_zero:
            columns.warn(f"sample {i}: zero Jacobian")
        else:
            scale = max(1.0, float(np.abs(jac.matrix).max()))
            columns.observe(float(np.abs(jac.column_sums()).max()) / scale, i)

        spectral = ossa_direction(net, x)
        if spectral.degenerate:
            ossa.warn(f"sample {i}: degenerate ({spectral.reason})")
            continue
        q = input_fim_quadratic(net, x, spectral.eta_unit, jacobian=jac)
        ossa.observe(abs(q - spectral.lambda_max) / max(spectral.lambda_max, 1e-300), i)

    results = [c.result() for c in (simplex, trace, bound, columns, ossa)]
    logger.info("Verification finished", extra={
        "samples": int(images.shape[0]),
        "status": {r.name: r.status for r in results},
    })
    return results


def suite_passed(results: Iterable[CheckResult]) -> bool:
    return all(r.status != "fail" for r in results)
