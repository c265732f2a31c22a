"""Covariance-matrix files: JSON ``{"sigma": [[...], ...]}`` or 16 reals of flat CSV (row-major)."""

import csv
import json
from pathlib import Path

import numpy as np

from ._validation import check_covariance
from .exceptions import ValidationError


def _parse_float(text, where):
    try:
        value = float(text)
    except ValueError:
        raise ValidationError(f"{where}: cannot parse {text!r} as a real number") from None
    if not np.isfinite(value):
        raise ValidationError(f"{where}: non-finite value {text!r}")
    return value


def parse_covariance_json(text, source="<json>"):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from None
    if not isinstance(doc, dict) or "sigma" not in doc:
        raise ValidationError(f"{source}: expected an object with field 'sigma'")
    rows = doc["sigma"]
    if not isinstance(rows, list) or len(rows) != 4:
        n = len(rows) if isinstance(rows, list) else type(rows).__name__
        raise ValidationError(f"{source}: field 'sigma' must have 4 rows, got {n}")
    out = np.empty((4, 4))
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != 4:
            n = len(row) if isinstance(row, list) else type(row).__name__
            raise ValidationError(f"{source}: sigma[{i}] must have 4 entries, got {n}")
        for j, v in enumerate(row):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ValidationError(f"{source}: sigma[{i}][{j}] is not a number: {v!r}")
            out[i, j] = _parse_float(v, f"{source}: sigma[{i}][{j}]")
    return check_covariance(out)


def parse_covariance_csv(text, source="<csv>"):
    """16 reals, row-major; any mix of commas and line breaks. ``#`` lines are comments."""
    values = []
    for lineno, row in enumerate(csv.reader(text.splitlines()), start=1):
        if not row or row[0].lstrip().startswith("#"):
            continue
        for col, cell in enumerate(row, start=1):
            cell = cell.strip()
            if cell:
                values.append(_parse_float(cell, f"{source}:{lineno}: field {col}"))
    if len(values) != 16:
        raise ValidationError(f"{source}: expected 16 values for a 4x4 matrix, got {len(values)}")
    return check_covariance(np.array(values).reshape(4, 4))


def read_covariance(path):
    """Read a covariance matrix; the format follows the suffix (``.json`` else CSV)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    if path.suffix.lower() == ".json":
        return parse_covariance_json(text, str(path))
    return parse_covariance_csv(text, str(path))


def format_covariance(sigma, fmt="json"):
    sigma = check_covariance(sigma)
    if fmt == "json":
        return json.dumps({"sigma": [[float(v) for v in row] for row in sigma]}) + "\n"
    if fmt == "csv":
        return ",".join(repr(float(v)) for v in sigma.ravel()) + "\n"
    raise ValidationError(f"unknown covariance format {fmt!r}")


def write_covariance(path, sigma, fmt=None):
    path = Path(path)
    fmt = fmt or ("json" if path.suffix.lower() == ".json" else "csv")
    path.write_text(format_covariance(sigma, fmt))
