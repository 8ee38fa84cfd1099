import logging
import re
from typing import List, Sequence
import numpy as np
from django.core.exceptions import ValidationError
from django.utils.translation import gettext as _
from jgreedy.helpers import format_float
from jgreedy.sparse import check_matrix, check_vector

REGEX_DIMENSIONS = re.compile(r"^\s*(\d+)\s*,\s*(\d+)\s*$")

logger = logging.getLogger(__name__)


def parse_float_value(value: str, line_number: int, field: int = 1) -> float:
    try:
        v = float(value.strip())
    except ValueError as exc:
        raise ValidationError(_('Line {line}: Invalid decimal field {field} value "{value}"').format(line=line_number, field=field, value=value)) from exc
    if not np.isfinite(v):
        raise ValidationError(_('Line {line}: Non-finite field {field} value "{value}"').format(line=line_number, field=field, value=value))
    return v


def parse_matrix_csv(content: str) -> np.ndarray:
    """Parses dense matrix from CSV content.

    Format: first line `m,n`; next m lines each with n decimal fields.

    Returns:
        m x n float array
    """
    lines = [line for line in content.splitlines() if line.strip()]
    if not lines:
        raise ValidationError(_("No matrix content to parse"))
    res = REGEX_DIMENSIONS.match(lines[0])
    if not res:
        raise ValidationError(_('Line {line}: Invalid matrix dimensions "{value}"').format(line=1, value=lines[0]))
    m, n = int(res.group(1)), int(res.group(2))
    if m < 1 or n < 1:
        raise ValidationError(_("Line {line}: Matrix dimensions must be positive, got {m}x{n}").format(line=1, m=m, n=n))
    if len(lines) - 1 != m:
        raise ValidationError(_("Matrix header declares {m} rows but {count} rows found").format(m=m, count=len(lines) - 1))
    rows: List[List[float]] = []
    for ix, line in enumerate(lines[1:]):
        line_number = ix + 2
        fields = line.split(",")
        if len(fields) != n:
            raise ValidationError(_("Line {line}: Expected {n} fields, got {count}").format(line=line_number, n=n, count=len(fields)))
        rows.append([parse_float_value(f, line_number, j + 1) for j, f in enumerate(fields)])
    return np.array(rows, dtype=float)


def parse_vector(content: str) -> np.ndarray:
    """Parses vector with one decimal value per line. Blank lines are ignored."""
    values: List[float] = []
    for ix, line in enumerate(content.splitlines()):
        if line.strip():
            values.append(parse_float_value(line, ix + 1))
    return np.array(values, dtype=float)


def format_matrix_csv(a: np.ndarray) -> str:
    am = check_matrix(a)
    out = ["{},{}".format(am.shape[0], am.shape[1])]
    for row in am:
        out.append(",".join(format_float(v) for v in row))
    return "\n".join(out) + "\n"


def format_vector(x: Sequence[float]) -> str:
    v = check_vector(x)
    return "".join(format_float(e) + "\n" for e in v)


def read_matrix_file(filename: str) -> np.ndarray:
    with open(filename, "rt", encoding="utf-8") as fp:
        content = fp.read()
    try:
        return parse_matrix_csv(content)
    except ValidationError as exc:
        raise ValidationError(_("{filename}: {error}").format(filename=filename, error="; ".join(exc.messages))) from exc


def read_vector_file(filename: str) -> np.ndarray:
    with open(filename, "rt", encoding="utf-8") as fp:
        content = fp.read()
    try:
        return parse_vector(content)
    except ValidationError as exc:
        raise ValidationError(_("{filename}: {error}").format(filename=filename, error="; ".join(exc.messages))) from exc


def write_text_file(filename: str, content: str):
    with open(filename, "wt", encoding="utf-8") as fp:
        fp.write(content)
    logger.info("%s written", filename)
