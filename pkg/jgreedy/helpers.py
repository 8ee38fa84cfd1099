import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Iterable, List, Optional, Sequence, TypeVar
from django.core.serializers.json import DjangoJSONEncoder

FLOAT_FORMAT = "%.17g"

MASK64 = (1 << 64) - 1

SEED_MULTIPLIER = 0x9E3779B97F4A7C15

T = TypeVar("T")
R = TypeVar("R")

logger = logging.getLogger(__name__)


def format_float(v: Optional[float]) -> str:
    """17 significant digits (round-trips any double). NaN is written as `nan`, None as empty field."""
    if v is None:
        return ""
    return FLOAT_FORMAT % float(v)


def format_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Writes CSV with `\\n` line endings. Floats are formatted with format_float(), None as empty field."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, float) or v is None else v for v in row])
    return buf.getvalue()


class NumpyJSONEncoder(DjangoJSONEncoder):
    def default(self, o):
        if hasattr(o, "tolist"):
            return o.tolist()
        return super().default(o)


def json_dumps(data: Any) -> str:
    """Deterministic JSON (sorted keys). Non-finite floats become null."""
    return json.dumps(nan_to_none(data), cls=NumpyJSONEncoder, indent=4, sort_keys=True, ensure_ascii=False) + "\n"


def nan_to_none(data: Any) -> Any:
    if isinstance(data, float) and not math.isfinite(data):
        return None
    if isinstance(data, dict):
        return {k: nan_to_none(v) for k, v in data.items()}
    if isinstance(data, (list, tuple)):
        return [nan_to_none(v) for v in data]
    return data


def derive_seed(master_seed: int, index: int) -> int:
    """Mixes (master_seed, index) to a 64-bit seed.

    z = master_seed * 0x9E3779B97F4A7C15 + index (mod 2^64), followed by the
    splitmix64 finalizer (xor-shift 30/27/31 with multipliers 0xBF58476D1CE4E5B9
    and 0x94D049BB133111EB). Seeds depend only on (master_seed, index), so
    removing or reordering trials never changes another trial's seed.
    """
    z = (int(master_seed) * SEED_MULTIPLIER + int(index)) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def map_ordered(func: Callable[[T], R], items: Sequence[T], jobs: int = 1) -> List[R]:
    """Maps func over items, results ordered like items regardless of completion order.

    Args:
        func: Picklable (module level) callable when jobs > 1
        items: Work items
        jobs: Number of worker processes. 1 runs in-process.

    Returns:
        list of results
    """
    if jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    logger.info("Running %s work items in %s worker processes", len(items), jobs)
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))
