"""
Greedy recovery loops: CoSaMP and Subspace Pursuit (SP), with per-iteration instrumentation.

Both algorithms iterate

    for (n = 1; ||y - A x^{n-1}||_2 > epsilon; n = n + 1)

so the stopping rule is evaluated before the first step, and the estimate
returned is the last one computed.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple, Union
import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError
from django.utils.translation import gettext as _
from jgreedy.errors import CapacityError, RecoveryError, SingularSupportError
from jgreedy.helpers import format_csv
from jgreedy.sparse import SparseSignal, SupportSet, check_matrix, check_vector, complement, hard_threshold, residual, restrict, solve_on_support

COSAMP = "cosamp"
SP = "sp"

ALGORITHMS = (COSAMP, SP)

RELATIVE_EPSILON = "relative"

TRACE_CSV_HEADER = ("iter", "residual_norm", "support_size", "missed_energy", "missed_energy_merged", "support")

logger = logging.getLogger(__name__)


def max_subsets() -> int:
    return int(getattr(settings, "JGREEDY_MAX_SUBSETS", 10**6))


def default_max_iterations(k: int) -> int:
    return int(math.ceil(6 * k)) + 10


@dataclass(frozen=True, eq=False)
class RecoveryConfig:
    """Inputs of the recovery loop besides A and y.

    `epsilon` is an absolute residual norm threshold, or "relative" for
    JGREEDY_RELATIVE_EPSILON (default 1e-10) times ||y||_2.
    `max_iterations` defaults to 6K + 10.
    """

    sparsity: int
    epsilon: Union[float, str] = RELATIVE_EPSILON
    max_iterations: Optional[int] = None
    initial_estimate: Optional[SparseSignal] = None

    def __post_init__(self):
        if self.sparsity < 1:
            raise ValidationError(_("Sparsity must be at least 1, got {}").format(self.sparsity))
        if isinstance(self.epsilon, str):
            if self.epsilon != RELATIVE_EPSILON:
                raise ValidationError(_('Stopping error must be a number or "{relative}", got "{value}"').format(relative=RELATIVE_EPSILON, value=self.epsilon))
        elif not self.epsilon >= 0.0:
            raise ValidationError(_("Stopping error must be nonnegative, got {}").format(self.epsilon))
        if self.max_iterations is None:
            object.__setattr__(self, "max_iterations", default_max_iterations(self.sparsity))
        elif self.max_iterations < 1:
            raise ValidationError(_("Maximum iterations must be at least 1, got {}").format(self.max_iterations))
        if self.initial_estimate is not None and not self.initial_estimate.is_k_sparse(self.sparsity):
            raise ValidationError(
                _("Initial estimate has {nnz} nonzeros, more than sparsity {k}").format(nnz=self.initial_estimate.nnz, k=self.sparsity)
            )

    def resolve_epsilon(self, y_norm: float) -> float:
        if isinstance(self.epsilon, str):
            return float(getattr(settings, "JGREEDY_RELATIVE_EPSILON", 1e-10)) * y_norm
        return float(self.epsilon)


@dataclass(frozen=True, eq=False)
class StepRecord:
    identified: SupportSet  # h^n
    merged: SupportSet  # U^n
    estimate: np.ndarray  # u^n
    selected: SupportSet  # S^n
    rank_deficient: bool = False


@dataclass(frozen=True, eq=False)
class TraceRecord:
    iteration: int
    identified: SupportSet
    merged: SupportSet
    support: SupportSet
    residual_norm: float
    estimate_residual_norm: float
    missed_energy: Optional[float] = None
    missed_energy_merged: Optional[float] = None
    rank_deficient: bool = False
    estimate: Optional[np.ndarray] = None  # x^n
    merged_estimate: Optional[np.ndarray] = None  # u^n


@dataclass(frozen=True)
class RecoveryTrace:
    records: Tuple[TraceRecord, ...] = ()
    initial_residual_norm: float = 0.0
    initial_missed_energy: Optional[float] = None

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


@dataclass(frozen=True, eq=False)
class RecoveryResult:
    estimate: SparseSignal
    iterations_used: int
    converged: bool
    residual_norm: float
    trace: RecoveryTrace = field(default_factory=RecoveryTrace)


def check_problem(a: Any, y: Any) -> Tuple[np.ndarray, np.ndarray]:
    am = check_matrix(a)
    yv = check_vector(y, "y")
    if am.shape[0] != yv.shape[0]:
        raise ValidationError(_("Dimension mismatch: A has {m} rows, y has length {ny}").format(m=am.shape[0], ny=yv.shape[0]))
    return am, yv


def _check_previous(a: np.ndarray, previous: SparseSignal, k: int):
    n = a.shape[1]
    if k < 1 or k > n:
        raise ValidationError(_("Sparsity {k} out of range [1, {n}]").format(k=k, n=n))
    if previous.length != n:
        raise ValidationError(_("Dimension mismatch: A has {n} columns, previous estimate has length {nx}").format(n=n, nx=previous.length))
    if previous.nnz > k:
        raise ValidationError(_("Previous estimate has {nnz} nonzeros, more than sparsity {k}").format(nnz=previous.nnz, k=k))


def _merge(a: SupportSet, b: SupportSet) -> SupportSet:
    return tuple(sorted(set(a) | set(b)))


def cosamp_step(a: Any, y: Any, previous: SparseSignal, k: int) -> Tuple[SparseSignal, StepRecord]:
    """One CoSaMP iteration.

    Identification h = supp(H_2K(A^t (y - A x))), Augment U = S u h,
    Estimate u = least squares on U, Update x = H_K(u).
    H_2K of a proxy with fewer than 2K nonzeros contributes only its nonzeros.
    """
    am, yv = check_problem(a, y)
    _check_previous(am, previous, k)
    n = am.shape[1]
    proxy = am.T @ residual(am, previous.values, yv)
    identified = hard_threshold(proxy, min(2 * k, n)).support
    merged = _merge(previous.support, identified)
    u, rank_deficient = solve_on_support(am, yv, merged, min_norm_fallback=True)
    x = hard_threshold(u, k)
    return x, StepRecord(identified=identified, merged=merged, estimate=u, selected=x.support, rank_deficient=rank_deficient)


def sp_step(a: Any, y: Any, previous: SparseSignal, k: int) -> Tuple[SparseSignal, StepRecord]:
    """One Subspace Pursuit iteration.

    Identification h = supp(H_K(A^t (y - A x))), Augment U = S u h, Estimate u on U,
    Update S = supp(H_K(u)) followed by a second least squares solve on S.
    """
    am, yv = check_problem(a, y)
    _check_previous(am, previous, k)
    proxy = am.T @ residual(am, previous.values, yv)
    identified = hard_threshold(proxy, k).support
    merged = _merge(previous.support, identified)
    u, deficient_merged = solve_on_support(am, yv, merged, min_norm_fallback=True)
    selected = hard_threshold(u, k).support
    x, deficient_selected = solve_on_support(am, yv, selected, min_norm_fallback=True)
    record = StepRecord(identified=identified, merged=merged, estimate=u, selected=selected, rank_deficient=deficient_merged or deficient_selected)
    return SparseSignal(x), record


STEPS: Dict[str, Callable[[Any, Any, SparseSignal, int], Tuple[SparseSignal, StepRecord]]] = {
    COSAMP: cosamp_step,
    SP: sp_step,
}


def get_step(algorithm: str) -> Callable[[Any, Any, SparseSignal, int], Tuple[SparseSignal, StepRecord]]:
    if algorithm not in STEPS:
        raise ValidationError(_('Unknown algorithm "{algorithm}", expected one of {choices}').format(algorithm=algorithm, choices=", ".join(ALGORITHMS)))
    return STEPS[algorithm]


def missed_energy(x_true: Union[SparseSignal, np.ndarray], estimated_support: Any) -> float:
    """||(x_true) restricted to the complement of estimated_support||_2."""
    values = x_true.values if isinstance(x_true, SparseSignal) else check_vector(x_true, "x_true")
    n = values.shape[0]
    return float(np.linalg.norm(restrict(values, complement(estimated_support, n))))


def run(  # noqa
    algorithm: str,
    a: Any,
    y: Any,
    config: RecoveryConfig,
    ground_truth: Optional[SparseSignal] = None,
) -> RecoveryResult:
    """Runs CoSaMP or SP until ||y - A x||_2 <= epsilon or max_iterations steps have been taken.

    Args:
        algorithm: "cosamp" or "sp"
        a: Sensing matrix
        y: Measurements
        config: RecoveryConfig
        ground_truth: Optional true signal. Fills missed-energy fields of the trace.

    Returns:
        RecoveryResult
    """
    step = get_step(algorithm)
    am, yv = check_problem(a, y)
    n = am.shape[1]
    k = config.sparsity
    if k > n:
        raise ValidationError(_("Sparsity {k} exceeds signal length {n}").format(k=k, n=n))
    x = config.initial_estimate if config.initial_estimate is not None else SparseSignal.zeros(n)
    if x.length != n:
        raise ValidationError(_("Dimension mismatch: A has {n} columns, initial estimate has length {nx}").format(n=n, nx=x.length))
    if ground_truth is not None and ground_truth.length != n:
        raise ValidationError(_("Dimension mismatch: A has {n} columns, ground truth has length {nx}").format(n=n, nx=ground_truth.length))

    epsilon = config.resolve_epsilon(float(np.linalg.norm(yv)))
    max_iterations = int(config.max_iterations)  # type: ignore
    residual_norm = float(np.linalg.norm(residual(am, x.values, yv)))
    initial_residual = residual_norm
    initial_missed = missed_energy(ground_truth, x.support) if ground_truth is not None else None
    records: List[TraceRecord] = []
    iteration = 0
    while residual_norm > epsilon and iteration < max_iterations:
        iteration += 1
        try:
            x, step_record = step(am, yv, x, k)
        except ValidationError as exc:
            raise RecoveryError(
                _("{algorithm} iteration {iteration} failed: {error}").format(algorithm=algorithm, iteration=iteration, error="; ".join(exc.messages)),
                iteration=iteration,
                cause=exc,
            ) from exc
        residual_norm = float(np.linalg.norm(residual(am, x.values, yv)))
        record = TraceRecord(
            iteration=iteration,
            identified=step_record.identified,
            merged=step_record.merged,
            support=x.support,
            residual_norm=residual_norm,
            estimate_residual_norm=float(np.linalg.norm(residual(am, step_record.estimate, yv))),
            missed_energy=missed_energy(ground_truth, x.support) if ground_truth is not None else None,
            missed_energy_merged=missed_energy(ground_truth, step_record.merged) if ground_truth is not None else None,
            rank_deficient=step_record.rank_deficient,
            estimate=x.values,
            merged_estimate=step_record.estimate,
        )
        records.append(record)
        logger.debug("%s iteration %s: residual %s support %s", algorithm, iteration, residual_norm, list(record.support))

    converged = residual_norm <= epsilon
    logger.info("%s finished after %s iterations (converged=%s, residual=%s)", algorithm, iteration, converged, residual_norm)
    trace = RecoveryTrace(records=tuple(records), initial_residual_norm=initial_residual, initial_missed_energy=initial_missed)
    return RecoveryResult(estimate=x, iterations_used=iteration, converged=converged, residual_norm=residual_norm, trace=trace)


def exhaustive_oracle_recovery(a: Any, y: Any, k: int) -> SparseSignal:
    """Best k-sparse least squares fit over every size-k support.

    Supports are enumerated in lexicographic order and only a strictly smaller
    residual replaces the incumbent, so ties go to the lexicographically smallest
    support. Supports whose restricted system has a numerically zero column are skipped.
    """
    am, yv = check_problem(a, y)
    n = am.shape[1]
    if k < 0 or k > n:
        raise ValidationError(_("Sparsity {k} out of range [0, {n}]").format(k=k, n=n))
    count = math.comb(n, k)
    limit = max_subsets()
    if count > limit:
        raise CapacityError(_("Exhaustive search over C({n}, {k}) = {count} supports exceeds limit {limit}").format(n=n, k=k, count=count, limit=limit), count, limit)

    best = np.zeros(n)
    best_norm = math.inf
    for support in itertools.combinations(range(n), k):
        try:
            z = solve_on_support(am, yv, support, min_norm_fallback=True)[0]
        except SingularSupportError:
            continue
        r = float(np.linalg.norm(residual(am, z, yv)))
        if r < best_norm:
            best, best_norm = z, r
    return SparseSignal(best)


def exact_recovery(estimate: SparseSignal, truth: SparseSignal, tol: Optional[float] = None) -> Tuple[bool, float]:
    """Returns (support equal and relative l2 error <= tol, relative l2 error)."""
    if tol is None:
        tol = float(getattr(settings, "JGREEDY_EXACT_RECOVERY_TOL", 1e-8))
    truth_norm = float(np.linalg.norm(truth.values))
    err = float(np.linalg.norm(estimate.values - truth.values))
    relative_error = err / truth_norm if truth_norm > 0.0 else err
    return estimate.support == truth.support and relative_error <= tol, relative_error


def format_trace_csv(trace: RecoveryTrace) -> str:
    rows = []
    for rec in trace:
        rows.append(
            [
                rec.iteration,
                rec.residual_norm,
                len(rec.support),
                rec.missed_energy,
                rec.missed_energy_merged,
                ";".join(str(i) for i in rec.support),
            ]
        )
    return format_csv(TRACE_CSV_HEADER, rows)
