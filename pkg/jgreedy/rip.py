"""
Restricted isometry constants.

delta_K is the smallest delta with (1 - delta)||x||^2 <= ||Ax||^2 <= (1 + delta)||x||^2
for every K-sparse x, i.e. the largest deviation from 1 of the extremal eigenvalues
of the K x K Gram blocks A_T^t A_T over all size-K column subsets T.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from functools import partial
from typing import Any, List, Tuple
import numpy as np
from django.core.exceptions import ValidationError
from django.utils.translation import gettext as _
from scipy import linalg
from jgreedy.errors import CapacityError
from jgreedy.helpers import map_ordered
from jgreedy.pursuit import max_subsets
from jgreedy.sparse import SupportSet, check_matrix

EXACT = "exact"
MONTE_CARLO = "monte_carlo_lower_bound"

RIC_METHODS = (EXACT, MONTE_CARLO)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RicEstimate:
    order: int
    delta: float
    method: str
    subsets_examined: int
    extremal_support: SupportSet = ()

    @property
    def is_valid(self) -> bool:
        """True if delta < 1, i.e. the value is a restricted isometry constant in the usual sense."""
        return self.delta < 1.0


def gram_extremes(a: np.ndarray, support: SupportSet) -> Tuple[float, float]:
    cols = a[:, list(support)]
    eigenvalues = linalg.eigvalsh(cols.T @ cols)
    return float(eigenvalues[0]), float(eigenvalues[-1])


def subset_deviation(a: np.ndarray, support: SupportSet) -> float:
    lo, hi = gram_extremes(a, support)
    return max(0.0, 1.0 - lo, hi - 1.0)


def _check_order(a: np.ndarray, k: int):
    if k < 1 or k > a.shape[1]:
        raise ValidationError(_("RIC order {k} out of range [1, {n}]").format(k=k, n=a.shape[1]))


def _max_deviation_range(a: np.ndarray, k: int, bounds: Tuple[int, int]) -> Tuple[float, SupportSet]:
    start, stop = bounds
    best, best_support = -1.0, ()  # type: Tuple[float, SupportSet]
    for support in itertools.islice(itertools.combinations(range(a.shape[1]), k), start, stop):
        d = subset_deviation(a, support)
        if d > best:
            best, best_support = d, support
    return best, best_support


def exact_ric(a: Any, k: int, jobs: int = 1) -> RicEstimate:
    """Exact delta_K by enumerating all C(n, K) column subsets.

    Args:
        a: Matrix
        k: Order K
        jobs: Worker processes. The subset range is split into contiguous chunks and combined by max;
            ties keep the earliest subset so the result does not depend on jobs.

    Returns:
        RicEstimate with method "exact"
    """
    am = check_matrix(a)
    _check_order(am, k)
    n = am.shape[1]
    count = math.comb(n, k)
    limit = max_subsets()
    if count > limit:
        raise CapacityError(_("Exact RIC needs C({n}, {k}) = {count} subsets, limit is {limit}").format(n=n, k=k, count=count, limit=limit), count, limit)
    logger.info("Computing exact RIC of order %s over %s subsets", k, count)

    chunks = max(1, jobs)
    step = int(math.ceil(count / chunks))
    ranges: List[Tuple[int, int]] = [(i, min(i + step, count)) for i in range(0, count, step)]
    results = map_ordered(partial(_max_deviation_range, am, k), ranges, jobs)
    best, best_support = -1.0, ()  # type: Tuple[float, SupportSet]
    for d, support in results:
        if d > best:
            best, best_support = d, support
    return RicEstimate(order=k, delta=best, method=EXACT, subsets_examined=count, extremal_support=tuple(best_support))


def monte_carlo_ric_lower_bound(a: Any, k: int, trials: int, seed: int = 0) -> RicEstimate:
    """Lower bound on delta_K from `trials` uniformly sampled size-K subsets (deterministic given seed)."""
    am = check_matrix(a)
    _check_order(am, k)
    if trials < 1:
        raise ValidationError(_("Number of trials must be at least 1, got {}").format(trials))
    rng = np.random.default_rng(seed)
    n = am.shape[1]
    best, best_support = -1.0, ()  # type: Tuple[float, SupportSet]
    for _trial in range(trials):
        support = tuple(sorted(int(i) for i in rng.choice(n, size=k, replace=False)))
        d = subset_deviation(am, support)
        if d > best:
            best, best_support = d, support
    return RicEstimate(order=k, delta=best, method=MONTE_CARLO, subsets_examined=trials, extremal_support=best_support)


def compute_ric(a: Any, k: int, method: str = EXACT, trials: int = 1000, seed: int = 0, jobs: int = 1) -> RicEstimate:
    if method == EXACT:
        return exact_ric(a, k, jobs=jobs)
    if method in (MONTE_CARLO, "monte_carlo", "monte-carlo"):
        return monte_carlo_ric_lower_bound(a, k, trials, seed)
    raise ValidationError(_('Unknown RIC method "{method}", expected one of {choices}').format(method=method, choices=", ".join(RIC_METHODS)))


def rip_sandwich_violations(a: Any, estimate: RicEstimate, samples: int = 1000, seed: int = 0, rel_tol: float = 1e-12) -> int:
    """Counts random x supported on the extremal subset violating (1-d)||x||^2 <= ||Ax||^2 <= (1+d)||x||^2."""
    am = check_matrix(a)
    rng = np.random.default_rng(seed)
    support = list(estimate.extremal_support)
    d = estimate.delta
    violations = 0
    for _sample in range(samples):
        x = np.zeros(am.shape[1])
        x[support] = rng.standard_normal(len(support))
        energy = float(x @ x)
        measured = float(np.linalg.norm(am @ x) ** 2)
        slack = rel_tol * max(1.0, energy)
        if measured < (1.0 - d) * energy - slack or measured > (1.0 + d) * energy + slack:
            violations += 1
    return violations
