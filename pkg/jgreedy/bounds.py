"""
Closed-form constants of the CoSaMP / SP convergence theory.

Naming: delta_3k, delta_4k are restricted isometry constants of order 3K and 4K.
rho_4k (CoSaMP) and rho_3k (SP) are the per-iteration decay rates of the missed energy.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple
import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError
from django.utils.translation import gettext as _
from scipy import optimize
from jgreedy.errors import DomainError, RootNotFoundError
from jgreedy.helpers import format_csv
from jgreedy.sparse import SparseSignal, SupportSet, magnitude_order

SAME_RHO = "same_rho"
DAI_RHO = "dai_rho"

DAI_VARIANTS = (SAME_RHO, DAI_RHO)

UNIT_ROOT_TOL = 1e-9
CROSSOVER_TOL = 1e-6

# lower end of the crossover bracket, c_sp - dai is positive there for both variants
CROSSOVER_LOWER = 1e-6

DELTA_LEMMA2 = 1.0 / math.sqrt(3.0)
DELTA_THEOREM = 1.0 / math.sqrt(5.0)

REFERENCE_CROSSOVER_NOTE = "reference interval 0.0446<δ_{3K}<0.4859 is not reproduced by the same_rho variant"

BOUNDS_CSV_HEADER = ("delta", "rho_4k", "rho_3k", "c_cosamp", "c_sp", "dai_per_k")

logger = logging.getLogger(__name__)


def _check_delta(delta: float, name: str = "delta"):
    if not 0.0 <= delta < 1.0:
        raise DomainError(_("{name} must be in [0, 1), got {value}").format(name=name, value=delta))


def rho_cosamp(delta_4k: float) -> float:
    """rho_4k = sqrt(2 d^2 (1 + 2 d^2) / (1 - d^2))."""
    _check_delta(delta_4k, "delta_4k")
    d2 = delta_4k * delta_4k
    return math.sqrt(2.0 * d2 * (1.0 + 2.0 * d2) / (1.0 - d2))


def rho_sp(delta_3k: float) -> float:
    """rho_3k = sqrt(2 d^2 (1 + d^2)) / (1 - d^2)."""
    _check_delta(delta_3k, "delta_3k")
    d2 = delta_3k * delta_3k
    return math.sqrt(2.0 * d2 * (1.0 + d2)) / (1.0 - d2)


def dai_decay_rate(delta_3k: float) -> float:
    """Decay constant 2d(1+d)/(1-d)^3 of the earlier SP analysis."""
    _check_delta(delta_3k, "delta_3k")
    return 2.0 * delta_3k * (1.0 + delta_3k) / (1.0 - delta_3k) ** 3


def estimation_factor(delta_4k: float) -> float:
    _check_delta(delta_4k, "delta_4k")
    return delta_4k / math.sqrt(1.0 - delta_4k * delta_4k)


def tau1(delta_3k: float, delta_4k: float) -> float:
    """Noise factor of the estimation step, sqrt(1 + delta_3k) / (1 - delta_4k)."""
    if delta_3k < 0.0:
        raise DomainError(_("delta_3k must be nonnegative, got {}").format(delta_3k))
    _check_delta(delta_4k, "delta_4k")
    return math.sqrt(1.0 + delta_3k) / (1.0 - delta_4k)


def _rho_below_one(delta_4k: float) -> float:
    rho = rho_cosamp(delta_4k)
    if rho >= 1.0:
        raise DomainError(_("rho_4k = {rho} >= 1 at delta_4k = {delta}, constant undefined").format(rho=rho, delta=delta_4k))
    return rho


def noise_tau(delta_3k: float, delta_4k: float) -> float:
    """Noise amplification tau of the CoSaMP decay relation.

    (1 - rho_4k) tau = delta_4k sqrt(6 (1 + delta_3k)) / (1 - delta_4k) + sqrt(2 (1 + delta_4k))
    """
    if delta_3k < 0.0:
        raise DomainError(_("delta_3k must be nonnegative, got {}").format(delta_3k))
    rho = _rho_below_one(delta_4k)
    scaled = delta_4k * math.sqrt(6.0 * (1.0 + delta_3k)) / (1.0 - delta_4k) + math.sqrt(2.0 * (1.0 + delta_4k))
    return scaled / (1.0 - rho)


def gamma(delta_3k: float, delta_4k: float) -> float:
    return noise_tau(delta_3k, delta_4k) + math.sqrt(2.0) * tau1(delta_3k, delta_4k)


def _iteration_constant(rho: float, name: str) -> float:
    if rho >= 1.0:
        raise DomainError(_("{name} = {rho} >= 1, iteration constant undefined").format(name=name, rho=rho))
    r2 = rho * rho
    if r2 == 0.0:
        return 1.0
    return math.log(4.0 / r2) / math.log(1.0 / r2)


def iteration_constant_cosamp(delta_4k: float) -> float:
    """c = ln(4 / rho_4k^2) / ln(1 / rho_4k^2), CoSaMP converges in ceil(cK) iterations. c(0) = 1 (limit)."""
    return _iteration_constant(rho_cosamp(delta_4k), "rho_4k")


def iteration_constant_sp(delta_3k: float) -> float:
    """c = ln(4 / rho_3k^2) / ln(1 / rho_3k^2), SP analog of iteration_constant_cosamp()."""
    return _iteration_constant(rho_sp(delta_3k), "rho_3k")


def dai_rho_enabled() -> bool:
    return bool(getattr(settings, "JGREEDY_ENABLE_DAI_RHO", False))


def variant_decay(variant: str, decay: Optional[Callable[[float], float]] = None) -> Callable[[float], float]:
    """Returns the delta_3k -> rho function of a Dai bound variant.

    dai_rho needs either an explicit `decay` or JGREEDY_ENABLE_DAI_RHO (uses dai_decay_rate()).
    """
    if variant == SAME_RHO:
        return rho_sp
    if variant == DAI_RHO:
        if decay is not None:
            return decay
        if not dai_rho_enabled():
            raise ValidationError(_("Variant {variant} is disabled, enable it with JGREEDY_ENABLE_DAI_RHO or --enable-dai-rho").format(variant=DAI_RHO))
        return dai_decay_rate
    raise ValidationError(_('Unknown variant "{variant}", expected one of {choices}').format(variant=variant, choices=", ".join(DAI_VARIANTS)))


def dai_iteration_bound(delta_3k: float, k: int, variant: str = SAME_RHO, decay: Optional[Callable[[float], float]] = None) -> float:
    """1.5 K / ln(1 / rho) before ceiling. Zero at rho = 0 (limit)."""
    if k < 1:
        raise ValidationError(_("Sparsity must be at least 1, got {}").format(k))
    rho = variant_decay(variant, decay)(delta_3k)
    if rho >= 1.0:
        raise DomainError(_("Decay rate {rho} >= 1 at delta_3k = {delta}, bound undefined").format(rho=rho, delta=delta_3k))
    if rho == 0.0:
        return 0.0
    return 1.5 * k / math.log(1.0 / rho)


def _nonzero_magnitudes(x: SparseSignal) -> np.ndarray:
    mags = magnitude_order(x.values).sorted_magnitudes[: x.nnz]
    if mags.size == 0:
        raise DomainError(_("Signal has no nonzero entries"))
    return mags


def kmin_noiseless(x: SparseSignal, delta_4k: float) -> float:
    """ln(||x||_2 / x*_K) / ln(1 / rho_4k) with x*_K the smallest nonzero magnitude."""
    mags = _nonzero_magnitudes(x)
    rho = _rho_below_one(delta_4k)
    if rho == 0.0:
        return 0.0
    return math.log(float(np.linalg.norm(mags)) / float(mags[-1])) / math.log(1.0 / rho)


def excess_iterations(p: int, q: int, x: SparseSignal, delta_3k: float, delta_4k: float, e_norm: float = 0.0) -> Optional[int]:
    """Smallest k >= 0 with x*_{p+q} > rho_4k^k ||x*_{p+1..K}||_2 + gamma ||e||_2.

    The inequality is strict, so with p = 0, q = K and e = 0 the result is floor(kmin_noiseless) + 1.
    That is ceil(kmin_noiseless) unless kmin is a whole number (1-sparse signals and rho_4k = 0
    give kmin 0 and one excess iteration).

    Args:
        p: Number of leading magnitudes already captured
        q: Number of further magnitudes to capture
        x: Signal, K = number of nonzeros
        delta_3k: RIC of order 3K
        delta_4k: RIC of order 4K
        e_norm: Noise norm ||e||_2

    Returns:
        k, or None if the noise floor gamma ||e||_2 is at least x*_{p+q}
    """
    mags = _nonzero_magnitudes(x)
    k_nnz = mags.size
    if p < 0 or q < 1 or p + q > k_nnz:
        raise ValidationError(_("Need p >= 0, q >= 1 and p + q <= {k}, got p={p} q={q}").format(k=k_nnz, p=p, q=q))
    if e_norm < 0.0:
        raise ValidationError(_("Noise norm must be nonnegative, got {}").format(e_norm))
    noise = gamma(delta_3k, delta_4k) * e_norm
    rho = rho_cosamp(delta_4k)
    target = float(mags[p + q - 1])
    tail = float(np.linalg.norm(mags[p:]))
    if noise >= target:
        return None
    k = 0
    if rho > 0.0:
        k = max(0, int(math.floor(math.log(tail / (target - noise)) / math.log(1.0 / rho))))
        while k > 0 and target > rho ** (k - 1) * tail + noise:
            k -= 1
    while not target > rho**k * tail + noise:
        k += 1
    return k


@dataclass(frozen=True)
class PartitionSchedule:
    partitions: Tuple[SupportSet, ...]
    iterations: Tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.iterations)

    def __len__(self):
        return len(self.partitions)


def greedy_partition(x: SparseSignal, delta_4k: float) -> PartitionSchedule:
    """Groups the support into magnitude bands Q_1..Q_r and the iterations k_i needed per band.

    Q_i starts at the largest remaining magnitude and keeps every following magnitude
    exceeding (band leader)/sqrt(2). k_i is the smallest integer exceeding
    ln(2 sum_{j>=i} |Q_j| / 2^(j-i)) / ln(1 / rho_4k^2).
    Indices inside a band are listed in nonincreasing magnitude order.
    """
    _nonzero_magnitudes(x)
    rho = _rho_below_one(delta_4k)
    order = magnitude_order(x.values)
    k_nnz = x.nnz
    mags = order.sorted_magnitudes
    bands: List[SupportSet] = []
    start = 0
    while start < k_nnz:
        threshold = mags[start] / math.sqrt(2.0)
        end = start + 1
        while end < k_nnz and mags[end] > threshold:
            end += 1
        bands.append(tuple(order.permutation[start:end]))
        start = end

    sizes = [len(band) for band in bands]
    iterations: List[int] = []
    for i in range(len(bands)):
        weight = 2.0 * sum(sizes[j] / 2.0 ** (j - i) for j in range(i, len(bands)))
        if rho == 0.0:
            iterations.append(1)
            continue
        value = math.log(weight) / math.log(1.0 / (rho * rho))
        iterations.append(int(math.floor(value)) + 1)
    return PartitionSchedule(partitions=tuple(bands), iterations=tuple(iterations))


def unit_root(rho: Callable[[float], float], upper: float = 0.99) -> float:
    """delta where rho(delta) = 1 by bisection on [0, upper] to UNIT_ROOT_TOL."""
    return float(optimize.bisect(lambda d: rho(d) - 1.0, 0.0, upper, xtol=UNIT_ROOT_TOL))


@dataclass(frozen=True)
class ConvergenceThresholds:
    delta_cosamp_rho1: float
    delta_sp_rho1: float
    delta_lemma2: float


def convergence_thresholds() -> ConvergenceThresholds:
    """(root of rho_4k = 1, root of rho_3k = 1, 1/sqrt(3)).

    The CoSaMP root solves 4 d^4 + 3 d^2 - 1 = 0 in closed form, d^2 = 1/4.
    """
    return ConvergenceThresholds(
        delta_cosamp_rho1=math.sqrt((-3.0 + math.sqrt(25.0)) / 8.0),
        delta_sp_rho1=unit_root(rho_sp),
        delta_lemma2=DELTA_LEMMA2,
    )


def lemma2_rho_condition(delta_4k: float) -> bool:
    """rho_4k < 1, i.e. delta_4k < 0.5."""
    return 0.0 <= delta_4k < 1.0 and rho_cosamp(delta_4k) < 1.0


def lemma2_merge_condition(delta_4k: float) -> bool:
    """sqrt(2) delta_4k / sqrt(1 - delta_4k^2) <= 1, i.e. delta_4k <= 1/sqrt(3)."""
    return 0.0 <= delta_4k < 1.0 and math.sqrt(2.0) * estimation_factor(delta_4k) <= 1.0


@dataclass(frozen=True)
class CrossoverResult:
    delta: float
    variant: str
    bracket: Tuple[float, float]
    endpoint_values: Tuple[float, float]
    tolerance: float = CROSSOVER_TOL
    note: str = ""


def crossover_delta(variant: str = SAME_RHO, decay: Optional[Callable[[float], float]] = None) -> CrossoverResult:
    """delta_3k where the SP bound c_sp K equals the Dai bound 1.5 K / ln(1/rho) (K cancels).

    The bracket is (CROSSOVER_LOWER, validity limit) with the limit just below the first delta
    where either decay rate reaches 1.
    """
    rho_dai = variant_decay(variant, decay)

    def diff(d: float) -> float:
        return iteration_constant_sp(d) - dai_iteration_bound(d, 1, variant, rho_dai)

    limit = unit_root(rho_sp)
    if variant != SAME_RHO:
        limit = min(limit, unit_root(rho_dai))
    lo, hi = CROSSOVER_LOWER, limit - 1e-6
    f_lo, f_hi = diff(lo), diff(hi)
    logger.info("Crossover %s bracket [%s, %s] values [%s, %s]", variant, lo, hi, f_lo, f_hi)
    if f_lo * f_hi > 0.0:
        raise RootNotFoundError(
            _("No sign change of c_sp - dai bound on [{lo}, {hi}]: values {f_lo}, {f_hi}").format(lo=lo, hi=hi, f_lo=f_lo, f_hi=f_hi),
            ((lo, f_lo), (hi, f_hi)),
        )
    root = float(optimize.bisect(diff, lo, hi, xtol=CROSSOVER_TOL))
    return CrossoverResult(
        delta=root,
        variant=variant,
        bracket=(lo, hi),
        endpoint_values=(f_lo, f_hi),
        note=REFERENCE_CROSSOVER_NOTE if variant == SAME_RHO else "",
    )


@dataclass(frozen=True)
class BoundsRow:
    delta: float
    rho_4k: float
    rho_3k: float
    c_cosamp: float
    c_sp: float
    dai_per_k_same_rho: float
    dai_per_k: float


def _or_nan(func: Callable[..., float], *args) -> float:
    try:
        return func(*args)
    except DomainError:
        return math.nan


def bounds_row(delta: float, dai_decay: Optional[Callable[[float], float]] = None) -> BoundsRow:
    """All constants at delta (used for both delta_3k and delta_4k). Out-of-domain values are nan.

    `dai_per_k` is the dai_rho variant when `dai_decay` is given or the variant is enabled, else nan.
    """
    same_rho = _or_nan(dai_iteration_bound, delta, 1, SAME_RHO)
    dai = math.nan
    if dai_decay is not None or dai_rho_enabled():
        dai = _or_nan(dai_iteration_bound, delta, 1, DAI_RHO, dai_decay)
    return BoundsRow(
        delta=delta,
        rho_4k=_or_nan(rho_cosamp, delta),
        rho_3k=_or_nan(rho_sp, delta),
        c_cosamp=_or_nan(iteration_constant_cosamp, delta),
        c_sp=_or_nan(iteration_constant_sp, delta),
        dai_per_k_same_rho=same_rho,
        dai_per_k=dai,
    )


def bounds_sweep(delta_min: float, delta_max: float, steps: int, dai_decay: Optional[Callable[[float], float]] = None) -> List[BoundsRow]:
    if not 0.0 <= delta_min < delta_max < 1.0:
        raise ValidationError(_("Need 0 <= delta_min < delta_max < 1, got {lo} and {hi}").format(lo=delta_min, hi=delta_max))
    if steps < 2:
        raise ValidationError(_("Sweep needs at least 2 steps, got {}").format(steps))
    return [bounds_row(float(d), dai_decay) for d in np.linspace(delta_min, delta_max, steps)]


def format_bounds_csv(rows: Sequence[BoundsRow], with_dai_rho: bool = False) -> str:
    """`dai_per_k` column holds the same_rho variant. with_dai_rho appends a `dai_per_k_dai_rho` column."""
    header = BOUNDS_CSV_HEADER + (("dai_per_k_dai_rho",) if with_dai_rho else ())
    out = []
    for row in rows:
        values = [row.delta, row.rho_4k, row.rho_3k, row.c_cosamp, row.c_sp, row.dai_per_k_same_rho]
        if with_dai_rho:
            values.append(row.dai_per_k)
        out.append(values)
    return format_csv(header, out)
