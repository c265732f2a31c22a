"""Input validation helpers shared by the public functions and estimators."""

import numpy as np

from .exceptions import ValidationError

SYMMETRY_TOL = 1e-10


def check_covariance(sigma, tol=SYMMETRY_TOL):
    """Return ``sigma`` as a float 4x4 array, raising on bad shape or asymmetry."""
    arr = np.asarray(sigma, dtype=float)
    if arr.shape == (16,):
        arr = arr.reshape(4, 4)
    if arr.shape != (4, 4):
        raise ValidationError(f"covariance matrix must be 4x4, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("covariance matrix contains non-finite entries")
    diff = np.abs(arr - arr.T)
    if diff.max() > tol * max(1.0, np.abs(arr).max()):
        j, k = np.unravel_index(np.argmax(diff), diff.shape)
        raise ValidationError(
            f"covariance matrix is not symmetric: entries ({j},{k})={arr[j, k]!r} "
            f"and ({k},{j})={arr[k, j]!r}"
        )
    return 0.5 * (arr + arr.T)


def check_covariances(X, tol=SYMMETRY_TOL):
    """Validate a batch of covariance matrices.

    Accepts an array of shape ``(n, 16)`` (row-major flattened) or
    ``(n, 4, 4)`` and returns a symmetric ``(n, 4, 4)`` float array.
    """
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 16:
        arr = arr.reshape(-1, 4, 4)
    elif arr.ndim == 2 and arr.shape == (4, 4):
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1:] != (4, 4):
        raise ValidationError(
            f"expected covariances of shape (n, 16) or (n, 4, 4), got {np.shape(X)}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValidationError("covariance batch contains non-finite entries")
    diff = np.abs(arr - np.swapaxes(arr, 1, 2))
    scale = np.maximum(1.0, np.abs(arr).max(axis=(1, 2)))
    bad = np.nonzero(diff.max(axis=(1, 2)) > tol * scale)[0]
    if bad.size:
        i = bad[0]
        j, k = np.unravel_index(np.argmax(diff[i]), (4, 4))
        raise ValidationError(
            f"covariance matrix {i} is not symmetric at entries ({j},{k})/({k},{j})"
        )
    return 0.5 * (arr + np.swapaxes(arr, 1, 2))


def check_time(t, name="t"):
    t = float(t)
    if not np.isfinite(t) or t < 0:
        raise ValidationError(f"{name} must be a finite non-negative time, got {t}")
    return t


def check_positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValidationError(f"{name} must be positive, got {value}")
    return value
