"""Gaussian interferometric power of two-mode states.

The closed form depends on the state only through its four local symplectic
invariants, so every function here also accepts stacked inputs and works
elementwise.
"""

import numpy as np

from ._validation import check_covariance
from .exceptions import NumericalError, ValidationError
from .gaussian import _invariants_array

PURE_TOL = 1e-5
PURE_DELTA = 1e-3
RADICAND_TOL = 1e-12
CLAMP_TOL = 1e-12


def _closed_form(I1, I2, I3, I4):
    Cx = (I2 + I3) * (1 + I1 + I3 - I4) - I4**2
    Cy = (I4 - 1) * (1 + I1 + I2 + 2 * I3 + I4)
    Cz = (I2 + I4) * (I1 * I2 - I4) + I3 * (1 + I1) * (2 * I2 + I3)
    rad = Cx * Cx + Cy * Cz
    scale = np.maximum(1.0, Cx * Cx + np.abs(Cy * Cz))
    if np.any(rad < -RADICAND_TOL * scale):
        raise NumericalError("negative radicand in the interferometric-power formula: unphysical input")
    root = np.sqrt(np.maximum(rad, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        # rationalised form avoids cancellation when Cx < 0
        direct = (Cx + root) / (2 * Cy)
        stable = Cz / (2 * (root - Cx))
        return np.where(Cx >= 0, direct, stable), Cy


def gip_from_invariants(I1, I2, I3, I4):
    """Interferometric power from the invariants (array-friendly).

    Near-pure states (|det sigma - 1| < PURE_TOL) make the formula 0/0 or
    badly conditioned. Those entries are recomputed for
    the slightly mixed state ``(1 + delta) * sigma`` at delta, delta/2 and
    delta/4 and Richardson-extrapolated to ``delta = 0`` (error O(delta^3)).
    """
    I1, I2, I3, I4 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (I1, I2, I3, I4)))
    q, Cy = _closed_form(I1, I2, I3, I4)
    degenerate = np.abs(I4 - 1) < PURE_TOL
    if np.any(degenerate):
        j1, j2, j3, j4 = (v[degenerate] for v in (I1, I2, I3, I4))

        def mixed(delta):
            s2 = (1 + delta) ** 2
            return _closed_form(s2 * j1, s2 * j2, s2 * j3, s2 * s2 * j4)[0]

        q = np.array(q, copy=True)
        h = PURE_DELTA
        q[degenerate] = (8 * mixed(h / 4) - 6 * mixed(h / 2) + mixed(h)) / 3
    if np.any(q < -CLAMP_TOL):
        raise NumericalError(f"negative interferometric power {np.min(q)!r}: unphysical input")
    q = np.where(q < 0, 0.0, q)
    return q if q.ndim else float(q)


def gip_general(sigma):
    """Interferometric power (w.r.t. mode B) of a 4x4 covariance matrix."""
    sigma = check_covariance(sigma)
    return gip_from_invariants(*_invariants_array(sigma))


def gip_batch(sigmas):
    """Vectorised :func:`gip_general` over a ``(n, 4, 4)`` stack (no validation)."""
    return np.atleast_1d(gip_from_invariants(*_invariants_array(sigmas)))


def gip_reduced(a, b, c, sign):
    """Interferometric power of a standard-form state with ``d = -sign * c``.

    ``sign=+1`` is the squeezed-thermal case ``d = -c``; ``sign=-1`` the
    mixed-thermal case ``d = +c``.
    """
    if sign not in (1, -1):
        raise ValidationError(f"sign must be +1 or -1, got {sign}")
    a, b, c = (np.asarray(v, dtype=float) for v in (a, b, c))
    denom = a * b - c * c + sign
    if np.any(denom <= CLAMP_TOL):
        raise NumericalError("degenerate denominator in the reduced formula")
    q = c * c / (2 * denom)
    return q if q.ndim else float(q)
