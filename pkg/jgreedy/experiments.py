"""
Seeded experiment harness: instance generation, recovery trials, decay and iteration bound validation.

Every trial t draws its instance from seed s = derive_seed(master_seed, t):
matrix from derive_seed(s, 0), signal from derive_seed(s, 1) and noise from derive_seed(s, 2).
"""
import logging
import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union
import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError
from django.db import transaction
from django.utils.translation import gettext as _
from jgreedy.bounds import DELTA_THEOREM, estimation_factor, excess_iterations, greedy_partition, iteration_constant_cosamp, iteration_constant_sp, noise_tau, rho_cosamp, rho_sp, tau1
from jgreedy.errors import CapacityError, DomainError
from jgreedy.helpers import derive_seed, format_csv, map_ordered
from jgreedy.pursuit import ALGORITHMS, COSAMP, RELATIVE_EPSILON, SP, RecoveryConfig, RecoveryResult, exact_recovery, max_subsets, run
from jgreedy.rip import exact_ric
from jgreedy.sparse import SparseSignal, check_matrix, check_vector

GAUSSIAN = "gaussian"
FLAT = "flat"
GEOMETRIC = "geometric"

DISTRIBUTIONS = (GAUSSIAN, FLAT, GEOMETRIC)

DEFAULT_GEOMETRIC_RATIO = 0.5

PERTURBED_IDENTITY = "perturbed_identity"

ENSEMBLES = (GAUSSIAN, PERTURBED_IDENTITY)

DEFAULT_PERTURBATION = 0.01

EXPERIMENT_CSV_HEADER = (
    "trial",
    "seed",
    "m",
    "n",
    "K",
    "algorithm",
    "noise_sigma",
    "iterations",
    "converged",
    "exact_recovery",
    "relative_error",
    "bound",
)

DECAY = "decay"
ESTIMATION = "estimation"
UPDATE = "update"
IDENTIFICATION = "identification"

logger = logging.getLogger(__name__)


def decay_slack() -> float:
    return float(getattr(settings, "JGREEDY_DECAY_SLACK", 1e-10))


def parse_distribution(value: str, ratio: Optional[float] = None) -> Tuple[str, float]:
    """Parses "gaussian", "flat", "geometric" or "geometric(r)" to (name, ratio)."""
    name = value.strip().lower()
    if name.startswith(GEOMETRIC + "(") and name.endswith(")"):
        try:
            ratio = float(name[len(GEOMETRIC) + 1 : -1])
        except ValueError as exc:
            raise ValidationError(_('Invalid geometric ratio in "{}"').format(value)) from exc
        name = GEOMETRIC
    if name not in DISTRIBUTIONS:
        raise ValidationError(_('Unknown signal distribution "{value}", expected one of {choices}').format(value=value, choices=", ".join(DISTRIBUTIONS)))
    if ratio is None:
        ratio = DEFAULT_GEOMETRIC_RATIO
    if name == GEOMETRIC and not 0.0 < ratio <= 1.0:
        raise ValidationError(_("Geometric ratio must be in (0, 1], got {}").format(ratio))
    return name, float(ratio)


def gaussian_sensing_matrix(m: int, n: int, seed: int) -> np.ndarray:
    """m x n matrix of independent N(0, 1/m) entries (unit expected column norm)."""
    if m < 1 or n < 1:
        raise ValidationError(_("Matrix dimensions must be positive, got {m}x{n}").format(m=m, n=n))
    rng = np.random.default_rng(seed)
    return rng.standard_normal((m, n)) / math.sqrt(m)


def perturbed_identity_matrix(n: int, scale: float, seed: int) -> np.ndarray:
    """n x n identity plus independent N(0, scale^2) entries. Small scales give small RICs of every order."""
    if n < 1:
        raise ValidationError(_("Matrix dimensions must be positive, got {n}x{n}").format(n=n))
    rng = np.random.default_rng(seed)
    return np.eye(n) + scale * rng.standard_normal((n, n))


def random_sparse_signal(n: int, k: int, distribution: str, seed: int, ratio: float = DEFAULT_GEOMETRIC_RATIO) -> SparseSignal:
    """K-sparse signal with uniformly random support.

    gaussian: standard normal values, flat: random signs, geometric: magnitudes ratio^(i-1) with random signs
    placed on the support in random order.
    """
    if k < 0 or k > n:
        raise ValidationError(_("Sparsity {k} out of range [0, {n}]").format(k=k, n=n))
    name, ratio = parse_distribution(distribution, ratio)
    rng = np.random.default_rng(seed)
    support = rng.choice(n, size=k, replace=False)
    if name == GAUSSIAN:
        values = rng.standard_normal(k)
    else:
        signs = rng.choice(np.array([-1.0, 1.0]), size=k)
        if name == FLAT:
            values = signs
        else:
            values = signs * ratio ** np.arange(k, dtype=float)
    x = np.zeros(n)
    x[support] = values
    return SparseSignal(x)


@dataclass(frozen=True)
class TrialConfig:
    m: int
    n: int
    k: int
    algorithm: str = COSAMP
    distribution: str = GAUSSIAN
    ratio: float = DEFAULT_GEOMETRIC_RATIO
    ensemble: str = GAUSSIAN
    perturbation: float = DEFAULT_PERTURBATION
    noise_sigma: float = 0.0
    master_seed: int = 0
    trials: int = 1
    epsilon: Union[float, str] = RELATIVE_EPSILON
    max_iterations: Optional[int] = None
    certify: bool = False

    def __post_init__(self):
        if not 1 <= self.k <= self.m <= self.n:
            raise ValidationError(_("Need 1 <= K <= m <= n, got K={k} m={m} n={n}").format(k=self.k, m=self.m, n=self.n))
        if self.trials < 1:
            raise ValidationError(_("Number of trials must be at least 1, got {}").format(self.trials))
        if self.algorithm not in ALGORITHMS:
            raise ValidationError(_('Unknown algorithm "{algorithm}", expected one of {choices}').format(algorithm=self.algorithm, choices=", ".join(ALGORITHMS)))
        name, ratio = parse_distribution(self.distribution, self.ratio)
        object.__setattr__(self, "distribution", name)
        object.__setattr__(self, "ratio", ratio)
        if self.ensemble not in ENSEMBLES:
            raise ValidationError(_('Unknown matrix ensemble "{ensemble}", expected one of {choices}').format(ensemble=self.ensemble, choices=", ".join(ENSEMBLES)))
        if self.ensemble == PERTURBED_IDENTITY and self.m != self.n:
            raise ValidationError(_("Ensemble {ensemble} needs m == n, got m={m} n={n}").format(ensemble=PERTURBED_IDENTITY, m=self.m, n=self.n))
        if not self.perturbation >= 0.0:
            raise ValidationError(_("Perturbation must be nonnegative, got {}").format(self.perturbation))
        if not self.noise_sigma >= 0.0:
            raise ValidationError(_("Noise sigma must be nonnegative, got {}").format(self.noise_sigma))

    def sensing_matrix(self, seed: int) -> np.ndarray:
        if self.ensemble == PERTURBED_IDENTITY:
            return perturbed_identity_matrix(self.n, self.perturbation, seed)
        return gaussian_sensing_matrix(self.m, self.n, seed)

    def recovery_config(self) -> RecoveryConfig:
        return RecoveryConfig(sparsity=self.k, epsilon=self.epsilon, max_iterations=self.max_iterations)

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class TrialInstance:
    seed: int
    a: np.ndarray
    x: SparseSignal
    e: np.ndarray

    @property
    def y(self) -> np.ndarray:
        return self.a @ self.x.values + self.e


def instance_for_trial(config: TrialConfig, trial: int) -> TrialInstance:
    seed = derive_seed(config.master_seed, trial)
    a = config.sensing_matrix(derive_seed(seed, 0))
    x = random_sparse_signal(config.n, config.k, config.distribution, derive_seed(seed, 1), config.ratio)
    if config.noise_sigma > 0.0:
        e = np.random.default_rng(derive_seed(seed, 2)).normal(0.0, config.noise_sigma, config.m)
    else:
        e = np.zeros(config.m)
    return TrialInstance(seed=seed, a=a, x=x, e=e)


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    seed: int
    iterations_used: int
    converged: bool
    exact_recovery: bool
    relative_error: float
    bound: Optional[int] = None
    delta: Optional[float] = None
    error: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error)

    @property
    def hypothesis_met(self) -> bool:
        return self.delta is not None and self.delta < DELTA_THEOREM


def ric_order(algorithm: str, k: int) -> int:
    return 4 * k if algorithm == COSAMP else 3 * k


def iteration_constant(algorithm: str, delta: float) -> float:
    return iteration_constant_cosamp(delta) if algorithm == COSAMP else iteration_constant_sp(delta)


def iteration_bound(algorithm: str, delta: float, k: int) -> Optional[int]:
    """ceil(c K) or None if c is undefined at delta."""
    try:
        return int(math.ceil(iteration_constant(algorithm, delta) * k))
    except DomainError:
        return None


def certified_delta(a: np.ndarray, order: int) -> Optional[float]:
    """Exact RIC of `order` if the subset guard allows it, else None."""
    n = a.shape[1]
    if order > n or math.comb(n, order) > max_subsets():
        return None
    return exact_ric(a, order).delta


def run_single_trial(config: TrialConfig, trial: int) -> TrialRecord:
    inst = instance_for_trial(config, trial)
    try:
        delta = certified_delta(inst.a, ric_order(config.algorithm, config.k)) if config.certify else None
        bound = iteration_bound(config.algorithm, delta, config.k) if delta is not None else None
        result = run(config.algorithm, inst.a, inst.y, config.recovery_config())
        exact, relative_error = exact_recovery(result.estimate, inst.x)
    except ValidationError as exc:
        logger.error("Trial %s (seed %s) failed: %s", trial, inst.seed, "; ".join(exc.messages))
        return TrialRecord(
            trial=trial,
            seed=inst.seed,
            iterations_used=0,
            converged=False,
            exact_recovery=False,
            relative_error=math.nan,
            error="; ".join(exc.messages),
        )
    return TrialRecord(
        trial=trial,
        seed=inst.seed,
        iterations_used=result.iterations_used,
        converged=result.converged,
        exact_recovery=exact,
        relative_error=relative_error,
        bound=bound,
        delta=delta,
    )


def run_trials(config: TrialConfig, jobs: int = 1) -> List[TrialRecord]:
    """Runs config.trials seeded trials. A trial failing with ValidationError is recorded, not raised."""
    logger.info("Running %s %s trials (m=%s n=%s K=%s)", config.trials, config.algorithm, config.m, config.n, config.k)
    return map_ordered(partial(run_single_trial, config), list(range(config.trials)), jobs)


def bound_violations(records: Sequence[TrialRecord]) -> int:
    """Certified hypothesis-met trials that did not converge within ceil(c K) iterations."""
    count = 0
    for rec in records:
        if rec.hypothesis_met and rec.bound is not None and (not rec.converged or rec.iterations_used > rec.bound):
            count += 1
    return count


def summarize_trials(config: TrialConfig, records: Sequence[TrialRecord]) -> Dict[str, Any]:
    successes = [r for r in records if r.exact_recovery]
    return OrderedDict(
        [
            ("config", config.as_dict()),
            ("trials", len(records)),
            ("failed_trials", sum(1 for r in records if r.failed)),
            ("success_fraction", len(successes) / len(records) if records else 0.0),
            ("max_iterations", max((r.iterations_used for r in successes), default=0)),
            ("hypothesis_met_count", sum(1 for r in records if r.hypothesis_met)),
            ("violations", bound_violations(records)),
        ]
    )


def format_experiment_csv(config: TrialConfig, records: Sequence[TrialRecord]) -> str:
    rows = []
    for rec in records:
        rows.append(
            [
                rec.trial,
                rec.seed,
                config.m,
                config.n,
                config.k,
                config.algorithm,
                float(config.noise_sigma),
                rec.iterations_used,
                int(rec.converged),
                int(rec.exact_recovery),
                rec.relative_error,
                "" if rec.bound is None else rec.bound,
            ]
        )
    return format_csv(EXPERIMENT_CSV_HEADER, rows)


@dataclass
class InstanceDecayResult:
    """Per-iteration inequality checks of one recovery instance."""

    algorithm: str
    delta: float
    rho: float
    hypothesis_met: bool
    iterations: int = 0
    checked_iterations: int = 0
    violations: Dict[str, int] = field(default_factory=dict)
    missed_energy: List[float] = field(default_factory=list)

    @property
    def violation_count(self) -> int:
        return sum(self.violations.values())


def _count(violations: Dict[str, int], name: str, lhs: float, rhs: float, slack: float, iteration: int):
    if lhs > rhs + slack:
        logger.warning("%s inequality violated at iteration %s: %s > %s", name, iteration, lhs, rhs)
        violations[name] = violations.get(name, 0) + 1


def check_decay(  # noqa
    a: Any,
    x_true: SparseSignal,
    algorithm: str,
    delta_4k: Optional[float] = None,
    delta_3k: Optional[float] = None,
    e: Optional[Any] = None,
    config: Optional[RecoveryConfig] = None,
) -> InstanceDecayResult:
    """Runs recovery on y = A x + e and checks the per-iteration inequalities along the trace.

    CoSaMP (needs delta_4k, and delta_3k when e != 0), with x_S the true signal and U^n the merged set:
        decay:          ||(x_S)_{~U^n}|| <= rho_4k ||(x_S)_{~U^(n-1)}|| + (1 - rho_4k) tau ||e||
        estimation:     ||(u^n - x_S)_{U^n}|| <= d/sqrt(1-d^2) ||(x_S)_{~U^n}|| + tau1 ||e||
        update:         ||(x_S)_{U^n \\ S^n}|| <= sqrt(2) ||(u^n - x_S)_{U^n}||
        identification: ||(x_S)_{~U^n}|| <= sqrt(2) d ||x_S - x^(n-1)|| + sqrt(2 (1 + d)) ||e||
    SP (needs delta_3k, noiseless only):
        decay:          ||(x_S)_{~S^n}|| <= rho_3k ||(x_S)_{~S^(n-1)}||

    Instances whose decay rate is not below 1 are returned with hypothesis_met False and no checks.
    """
    am = check_matrix(a)
    n = am.shape[1]
    k = max(1, x_true.nnz)
    ev = np.zeros(am.shape[0]) if e is None else check_vector(e, "e")
    e_norm = float(np.linalg.norm(ev))
    if algorithm == COSAMP:
        if delta_4k is None:
            raise ValidationError(_("CoSaMP decay check needs delta_4k"))
        delta = delta_4k
        if e_norm > 0.0 and delta_3k is None:
            raise ValidationError(_("Noisy CoSaMP decay check needs delta_3k"))
        rho = rho_cosamp(delta) if delta < 1.0 else math.inf
    elif algorithm == SP:
        if delta_3k is None:
            raise ValidationError(_("SP decay check needs delta_3k"))
        if e_norm > 0.0:
            raise ValidationError(_("SP decay check is defined for noiseless measurements only"))
        delta = delta_3k
        rho = rho_sp(delta) if delta < 1.0 else math.inf
    else:
        raise ValidationError(_('Unknown algorithm "{algorithm}", expected one of {choices}').format(algorithm=algorithm, choices=", ".join(ALGORITHMS)))

    out = InstanceDecayResult(algorithm=algorithm, delta=delta, rho=rho, hypothesis_met=rho < 1.0)
    if not out.hypothesis_met:
        logger.warning("%s instance with delta %s has decay rate %s >= 1, hypothesis not met", algorithm, delta, rho)
        return out

    if config is None:
        config = RecoveryConfig(sparsity=k)
    result: RecoveryResult = run(algorithm, am, am @ x_true.values + ev, config, ground_truth=x_true)
    slack = decay_slack() * max(1.0, float(np.linalg.norm(x_true.values)))
    x_s = x_true.values
    out.iterations = result.iterations_used

    if algorithm == COSAMP:
        noise_decay = (1.0 - rho) * noise_tau(delta_3k, delta) * e_norm if e_norm > 0.0 else 0.0  # type: ignore
        noise_estimation = tau1(delta_3k, delta) * e_norm if e_norm > 0.0 else 0.0  # type: ignore
        noise_identification = math.sqrt(2.0 * (1.0 + delta)) * e_norm
        factor = estimation_factor(delta)
        previous_missed = float(np.linalg.norm(x_s))
        previous_x = np.zeros(n)
        for rec in result.trace:
            missed = float(rec.missed_energy_merged)  # type: ignore
            out.missed_energy.append(missed)
            merged = list(rec.merged)
            u_err = float(np.linalg.norm((rec.merged_estimate - x_s)[merged]))  # type: ignore
            discarded = [i for i in rec.merged if i not in set(rec.support)]
            _count(out.violations, DECAY, missed, rho * previous_missed + noise_decay, slack, rec.iteration)
            _count(out.violations, ESTIMATION, u_err, factor * missed + noise_estimation, slack, rec.iteration)
            _count(out.violations, UPDATE, float(np.linalg.norm(x_s[discarded])), math.sqrt(2.0) * u_err, slack, rec.iteration)
            _count(
                out.violations,
                IDENTIFICATION,
                missed,
                math.sqrt(2.0) * delta * float(np.linalg.norm(x_s - previous_x)) + noise_identification,
                slack,
                rec.iteration,
            )
            previous_missed = missed
            previous_x = rec.estimate  # type: ignore
            out.checked_iterations += 1
    else:
        previous_missed = float(np.linalg.norm(x_s))
        for rec in result.trace:
            missed = float(rec.missed_energy)  # type: ignore
            out.missed_energy.append(missed)
            _count(out.violations, DECAY, missed, rho * previous_missed, slack, rec.iteration)
            previous_missed = missed
            out.checked_iterations += 1
    return out


@dataclass
class DecayReport:
    algorithm: str
    m: int
    n: int
    k: int
    trials: int
    noise_sigma: float = 0.0
    hypothesis_met: int = 0
    hypothesis_not_met: int = 0
    checked_iterations: int = 0
    violations: Dict[str, int] = field(default_factory=dict)
    instances: List[Tuple[int, int, InstanceDecayResult]] = field(default_factory=list)

    @property
    def violation_count(self) -> int:
        return sum(self.violations.values())

    def as_dict(self) -> Dict[str, Any]:
        return OrderedDict(
            [
                ("algorithm", self.algorithm),
                ("m", self.m),
                ("n", self.n),
                ("K", self.k),
                ("trials", self.trials),
                ("noise_sigma", self.noise_sigma),
                ("hypothesis_met", self.hypothesis_met),
                ("hypothesis_not_met", self.hypothesis_not_met),
                ("checked_iterations", self.checked_iterations),
                ("violations", self.violation_count),
                ("violations_by_check", dict(sorted(self.violations.items()))),
            ]
        )


def _check_certifiable(config: TrialConfig, orders: Sequence[int]):
    limit = max_subsets()
    for order in orders:
        if order > config.m:
            raise ValidationError(_("RIC order {order} exceeds number of measurements {m}").format(order=order, m=config.m))
        count = math.comb(config.n, order)
        if count > limit:
            raise CapacityError(
                _("Exact RIC needs C({n}, {order}) = {count} subsets, limit is {limit}").format(n=config.n, order=order, count=count, limit=limit),
                count,
                limit,
            )


def _decay_trial(config: TrialConfig, trial: int) -> Tuple[int, int, InstanceDecayResult]:
    inst = instance_for_trial(config, trial)
    delta_3k = exact_ric(inst.a, 3 * config.k).delta if (config.algorithm == SP or config.noise_sigma > 0.0) else None
    delta_4k = exact_ric(inst.a, 4 * config.k).delta if config.algorithm == COSAMP else None
    res = check_decay(inst.a, inst.x, config.algorithm, delta_4k=delta_4k, delta_3k=delta_3k, e=inst.e, config=config.recovery_config())
    return trial, inst.seed, res


def decay_validation(config: TrialConfig, jobs: int = 1) -> DecayReport:
    """Checks the per-iteration inequalities on every trial whose exactly computed RIC meets the decay hypothesis."""
    orders = [4 * config.k] if config.algorithm == COSAMP else [3 * config.k]
    if config.noise_sigma > 0.0:
        if config.algorithm == SP:
            raise ValidationError(_("SP decay check is defined for noiseless measurements only"))
        orders.append(3 * config.k)
    _check_certifiable(config, orders)
    report = DecayReport(algorithm=config.algorithm, m=config.m, n=config.n, k=config.k, trials=config.trials, noise_sigma=config.noise_sigma)
    for trial, seed, res in map_ordered(partial(_decay_trial, config), list(range(config.trials)), jobs):
        report.instances.append((trial, seed, res))
        if not res.hypothesis_met:
            report.hypothesis_not_met += 1
            continue
        report.hypothesis_met += 1
        report.checked_iterations += res.checked_iterations
        for name, count in res.violations.items():
            report.violations[name] = report.violations.get(name, 0) + count
    logger.info(
        "Decay validation: %s hypothesis-met, %s hypothesis-not-met, %s violations", report.hypothesis_met, report.hypothesis_not_met, report.violation_count
    )
    return report


@dataclass
class IterationBoundResult:
    delta: float
    hypothesis_met: bool
    iterations: int = 0
    converged: bool = False
    bound: Optional[int] = None
    partition_total: Optional[int] = None
    kmin_excess: Optional[int] = None

    @property
    def bound_violated(self) -> bool:
        return self.hypothesis_met and self.bound is not None and (not self.converged or self.iterations > self.bound)

    @property
    def partition_violated(self) -> bool:
        return self.hypothesis_met and self.partition_total is not None and (not self.converged or self.iterations > self.partition_total)


def check_iteration_bound(a: Any, x_true: SparseSignal, algorithm: str, delta: float, config: Optional[RecoveryConfig] = None) -> IterationBoundResult:
    """Noiseless recovery of x_true checked against ceil(c K).

    delta is delta_4k for CoSaMP and delta_3k for SP; the hypothesis is delta < 1/sqrt(5).
    For CoSaMP the partition schedule total of x_true is checked as well.
    """
    am = check_matrix(a)
    k = max(1, x_true.nnz)
    out = IterationBoundResult(delta=delta, hypothesis_met=delta < DELTA_THEOREM)
    if not out.hypothesis_met:
        return out
    if config is None:
        config = RecoveryConfig(sparsity=k)
    result = run(algorithm, am, am @ x_true.values, config)
    out.iterations = result.iterations_used
    out.converged = result.converged
    out.bound = iteration_bound(algorithm, delta, k)
    if algorithm == COSAMP and x_true.nnz > 0:
        out.partition_total = greedy_partition(x_true, delta).total
        out.kmin_excess = excess_iterations(0, x_true.nnz, x_true, delta, delta)
    if out.bound_violated:
        logger.warning("%s used %s iterations, bound is %s (delta %s)", algorithm, out.iterations, out.bound, delta)
    return out


@dataclass
class IterationBoundSummary:
    algorithm: str
    trials: int
    hypothesis_met_count: int = 0
    max_observed: int = 0
    max_bound: Optional[int] = None
    max_kmin_excess: Optional[int] = None
    violations: int = 0
    partition_violations: int = 0
    instances: List[Tuple[int, int, IterationBoundResult]] = field(default_factory=list)

    def as_dict(self) -> Dict[str, Any]:
        return OrderedDict(
            [
                ("algorithm", self.algorithm),
                ("trials", self.trials),
                ("hypothesis_met_count", self.hypothesis_met_count),
                ("max_observed", self.max_observed),
                ("bound", self.max_bound),
                ("kmin_excess", self.max_kmin_excess),
                ("violations", self.violations),
                ("partition_violations", self.partition_violations),
            ]
        )


def _bound_trial(config: TrialConfig, trial: int) -> Tuple[int, int, IterationBoundResult]:
    inst = instance_for_trial(config, trial)
    delta = exact_ric(inst.a, ric_order(config.algorithm, config.k)).delta
    return trial, inst.seed, check_iteration_bound(inst.a, inst.x, config.algorithm, delta, config.recovery_config())


def iteration_bound_experiment(config: TrialConfig, jobs: int = 1) -> IterationBoundSummary:
    """Runs noiseless trials and counts hypothesis-met instances exceeding ceil(c K) iterations."""
    if config.noise_sigma > 0.0:
        raise ValidationError(_("Iteration bound experiment is defined for noiseless measurements only"))
    _check_certifiable(config, [ric_order(config.algorithm, config.k)])
    summary = IterationBoundSummary(algorithm=config.algorithm, trials=config.trials)
    for trial, seed, res in map_ordered(partial(_bound_trial, config), list(range(config.trials)), jobs):
        summary.instances.append((trial, seed, res))
        if not res.hypothesis_met:
            continue
        summary.hypothesis_met_count += 1
        summary.max_observed = max(summary.max_observed, res.iterations)
        if res.bound is not None:
            summary.max_bound = res.bound if summary.max_bound is None else max(summary.max_bound, res.bound)
        if res.kmin_excess is not None:
            summary.max_kmin_excess = res.kmin_excess if summary.max_kmin_excess is None else max(summary.max_kmin_excess, res.kmin_excess)
        summary.violations += int(res.bound_violated)
        summary.partition_violations += int(res.partition_violated)
    return summary


def store_trial_records(config: TrialConfig, records: Sequence[TrialRecord]):
    """Saves an ExperimentRun with its TrialResult rows in a single transaction."""
    from jgreedy.models import ExperimentRun, TrialResult  # pylint: disable=import-outside-toplevel

    summary = summarize_trials(config, records)
    with transaction.atomic():
        exp = ExperimentRun.objects.create(
            algorithm=config.algorithm,
            m=config.m,
            n=config.n,
            k=config.k,
            distribution=config.distribution,
            noise_sigma=config.noise_sigma,
            master_seed=str(config.master_seed),
            trials=len(records),
            success_fraction=summary["success_fraction"],
            max_iterations=summary["max_iterations"],
            hypothesis_met_count=summary["hypothesis_met_count"],
            violations=summary["violations"],
        )
        TrialResult.objects.bulk_create(
            [
                TrialResult(
                    run=exp,
                    trial=rec.trial,
                    seed=str(rec.seed),
                    iterations=rec.iterations_used,
                    converged=rec.converged,
                    exact_recovery=rec.exact_recovery,
                    relative_error=rec.relative_error if math.isfinite(rec.relative_error) else None,
                    bound=rec.bound,
                    error=rec.error,
                )
                for rec in records
            ]
        )
    logger.info("Experiment run %s stored with %s trials", exp.id, len(records))
    return exp
