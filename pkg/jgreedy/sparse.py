import logging
from dataclasses import dataclass
from typing import Any, Iterable, Tuple
import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError
from django.utils.translation import gettext as _
from scipy import linalg
from jgreedy.errors import SingularSupportError

logger = logging.getLogger(__name__)

SupportSet = Tuple[int, ...]


def rank_tolerance() -> float:
    return float(getattr(settings, "JGREEDY_RANK_TOL", 1e-10))


def check_vector(x: Any, name: str = "x") -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValidationError(_("{name} must be a vector, got array of shape {shape}").format(name=name, shape=v.shape))
    if not np.all(np.isfinite(v)):
        raise ValidationError(_("{name} contains non-finite values").format(name=name))
    return v


def check_matrix(a: Any, name: str = "A") -> np.ndarray:
    """Validates a dense sensing matrix: 2-D, at least one row and column, all entries finite.

    Square and tall matrices are accepted, only the shape is checked.
    """
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValidationError(_("{name} must be a non-empty matrix, got array of shape {shape}").format(name=name, shape=m.shape))
    if not np.all(np.isfinite(m)):
        raise ValidationError(_("{name} contains non-finite values").format(name=name))
    return m


def support_set(indices: Iterable[int], n: int) -> SupportSet:
    """Returns indices as an ascending duplicate-free tuple, validating range [0, n)."""
    out = tuple(sorted({int(i) for i in indices}))
    if out and (out[0] < 0 or out[-1] >= n):
        raise ValidationError(_("Support index out of range [0, {n}): {indices}").format(n=n, indices=list(out)))
    return out


def support_of(x: Any) -> SupportSet:
    return tuple(int(i) for i in np.flatnonzero(np.asarray(x)))


def complement(support: Iterable[int], n: int) -> SupportSet:
    inside = set(support_set(support, n))
    return tuple(i for i in range(n) if i not in inside)


@dataclass(frozen=True, eq=False)
class SparseSignal:
    """Dense vector with its support (positions of nonzero values).

    Values are copied on construction and made read-only.
    """

    values: np.ndarray

    def __post_init__(self):
        v = check_vector(self.values, "values").copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_values(cls, values: Any) -> "SparseSignal":
        return cls(np.asarray(values, dtype=float))

    @classmethod
    def zeros(cls, n: int) -> "SparseSignal":
        return cls(np.zeros(n))

    @property
    def length(self) -> int:
        return int(self.values.shape[0])

    @property
    def support(self) -> SupportSet:
        return support_of(self.values)

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.values))

    def is_k_sparse(self, k: int) -> bool:
        return self.nnz <= k

    def __repr__(self):
        return "SparseSignal(length={}, support={})".format(self.length, list(self.support))


@dataclass(frozen=True, eq=False)
class MagnitudeOrder:
    permutation: Tuple[int, ...]
    sorted_magnitudes: np.ndarray


def restrict(x: Any, support: Iterable[int]) -> np.ndarray:
    v = check_vector(x)
    idx = list(support_set(support, v.shape[0]))
    out = np.zeros_like(v)
    out[idx] = v[idx]
    return out


def magnitude_order(x: Any) -> MagnitudeOrder:
    """Sorts |x| nonincreasing. Ties keep ascending original index (stable sort)."""
    v = check_vector(x)
    mags = np.abs(v)
    perm = np.argsort(-mags, kind="stable")
    return MagnitudeOrder(permutation=tuple(int(i) for i in perm), sorted_magnitudes=mags[perm])


def hard_threshold(v: Any, k: int) -> SparseSignal:
    """Keeps the k largest-magnitude entries of v and zeros the rest (H_K).

    Args:
        v: Vector to threshold
        k: Number of entries to keep, 0 <= k <= len(v)

    Returns:
        SparseSignal; ties are broken by the lowest index
    """
    x = check_vector(v, "v")
    if k < 0 or k > x.shape[0]:
        raise ValidationError(_("Sparsity {k} out of range for vector of length {n}").format(k=k, n=x.shape[0]))
    keep = list(magnitude_order(x).permutation[:k])
    out = np.zeros_like(x)
    out[keep] = x[keep]
    return SparseSignal(out)


def residual(a: Any, x: Any, y: Any) -> np.ndarray:
    am = check_matrix(a)
    xv = check_vector(x, "x")
    yv = check_vector(y, "y")
    if am.shape[1] != xv.shape[0] or am.shape[0] != yv.shape[0]:
        raise ValidationError(
            _("Dimension mismatch: A is {m}x{n}, x has length {nx}, y has length {ny}").format(m=am.shape[0], n=am.shape[1], nx=xv.shape[0], ny=yv.shape[0])
        )
    return yv - am @ xv


def solve_on_support(a: np.ndarray, y: np.ndarray, support: SupportSet, min_norm_fallback: bool = False) -> Tuple[np.ndarray, bool]:
    """Least squares over columns `support` by pivoted QR.

    Args:
        a: Sensing matrix (validated)
        y: Measurements (validated)
        support: Ascending column indices
        min_norm_fallback: Solve minimum-norm least squares when the restricted matrix is
            rank deficient instead of raising. Numerically zero columns always raise.

    Returns:
        (length-n solution supported on `support`, True if the minimum-norm fallback was used)
    """
    n = a.shape[1]
    out = np.zeros(n)
    if not support:
        return out, False
    cols = a[:, list(support)]
    norms = np.linalg.norm(cols, axis=0)
    tol = rank_tolerance() * float(norms.max())
    zero_cols = [support[i] for i in range(len(support)) if norms[i] <= tol]
    if zero_cols:
        raise SingularSupportError(_("Numerically zero columns {cols} in support {support}").format(cols=zero_cols, support=list(support)), support)

    q, r, piv = linalg.qr(cols, mode="economic", pivoting=True)
    rank = int(np.count_nonzero(np.abs(np.diag(r)) > tol))
    if rank == len(support):
        z = np.empty(len(support))
        z[piv] = linalg.solve_triangular(r, q.T @ y)
        out[list(support)] = z
        return out, False

    if not min_norm_fallback:
        raise SingularSupportError(
            _("Rank deficient least squares system (rank {rank} < {size}) on support {support}").format(rank=rank, size=len(support), support=list(support)),
            support,
        )
    logger.warning("Rank deficient estimate (rank %s < %s) on support %s, using minimum-norm solution", rank, len(support), list(support))
    out[list(support)] = linalg.lstsq(cols, y, cond=rank_tolerance())[0]
    return out, True


def least_squares_on_support(a: Any, y: Any, support: Iterable[int]) -> np.ndarray:
    am = check_matrix(a)
    yv = check_vector(y, "y")
    if am.shape[0] != yv.shape[0]:
        raise ValidationError(_("Dimension mismatch: A has {m} rows, y has length {ny}").format(m=am.shape[0], ny=yv.shape[0]))
    return solve_on_support(am, yv, support_set(support, am.shape[1]))[0]
