"""Two-mode Gaussian states described by their covariance matrices.

Conventions: quadratures ordered ``(q_A, p_A, q_B, p_B)``, natural units with
vacuum variance 1, zero first moments.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._validation import check_covariance
from .exceptions import NumericalError, ValidationError

TOL_PSD = 1e-10

_J = np.array([[0.0, 1.0], [-1.0, 0.0]])
OMEGA = np.kron(np.eye(2), _J)
OMEGA.setflags(write=False)


def symplectic_form(modes=2):
    """Direct sum of ``modes`` copies of ``[[0, 1], [-1, 0]]``."""
    return np.kron(np.eye(modes), _J)


class SymplecticInvariants(NamedTuple):
    I1: float
    I2: float
    I3: float
    I4: float


class ProbeEnergy(NamedTuple):
    nbarA: float
    nbarB: float
    nbar: float
    E: float


@dataclass(frozen=True)
class StandardFormParams:
    """Standard-form parameters ``(a, b, c, d)`` of a two-mode covariance matrix."""

    a: float
    b: float
    c: float
    d: float

    def to_matrix(self):
        return standard_form_matrix(self.a, self.b, self.c, self.d)

    @property
    def energy(self):
        return mean_excitations(self.to_matrix())

    def as_tuple(self):
        return (self.a, self.b, self.c, self.d)


def standard_form_matrix(a, b, c, d):
    """Build the covariance matrix with blocks diag(a,a), diag(b,b), diag(c,d)."""
    return np.array(
        [
            [a, 0.0, c, 0.0],
            [0.0, a, 0.0, d],
            [c, 0.0, b, 0.0],
            [0.0, d, 0.0, b],
        ],
        dtype=float,
    )


def blocks(sigma):
    """Split a 4x4 (or stacked ``(..., 4, 4)``) covariance into alpha, beta, gamma blocks."""
    sigma = np.asarray(sigma)
    return sigma[..., :2, :2], sigma[..., 2:, 2:], sigma[..., :2, 2:]


def _det2(m):
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


def bona_fide_eigenvalues(sigma):
    """Eigenvalues of the Hermitian matrix ``sigma + i*Omega`` (ascending)."""
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.shape[-1] // 2
    return np.linalg.eigvalsh(sigma + 1j * symplectic_form(n))


def bona_fide_check(sigma, tol=TOL_PSD):
    """True iff ``sigma`` satisfies the uncertainty relation ``sigma + i*Omega >= 0``.

    Raises ValidationError for non-symmetric input.
    """
    sigma = check_covariance(sigma)
    return bool(bona_fide_eigenvalues(sigma)[0] >= -tol)


def _invariants_array(sigma):
    sigma = np.asarray(sigma, dtype=float)
    alpha, beta, gamma = blocks(sigma)
    return _det2(alpha), _det2(beta), _det2(gamma), np.linalg.det(sigma)


def symplectic_invariants(sigma):
    """Local symplectic invariants ``(det alpha, det beta, det gamma, det sigma)``."""
    sigma = check_covariance(sigma)
    return SymplecticInvariants(*(float(v) for v in _invariants_array(sigma)))


def standard_form_from_invariants(I1, I2, I3, I4, tol=1e-9):
    """Solve the invariants for ``(a, b, c, d)`` with ``c >= |d| >= 0``."""
    if I1 < 1 - tol or I2 < 1 - tol:
        raise NumericalError("invariants inconsistent with a physical state: det alpha or det beta < 1")
    a = np.sqrt(max(I1, 0.0))
    b = np.sqrt(max(I2, 0.0))
    ab = a * b
    scale = max(1.0, ab * ab)
    if abs(I3) <= 1e-14 * scale and abs(I4 - I1 * I2) <= 1e-14 * scale:
        return StandardFormParams(float(a), float(b), 0.0, 0.0)
    # c^2 and d^2 are the roots of z^2 - S z + I3^2 = 0
    S = (ab * ab + I3 * I3 - I4) / ab
    disc = S * S - 4.0 * I3 * I3
    if disc < -tol * max(1.0, S * S) or S < -tol * scale:
        raise NumericalError("invariants inconsistent with a physical state")
    root = np.sqrt(max(disc, 0.0))
    p = 0.5 * (S + root)
    q = I3 * I3 / p if p > 0 else 0.0
    c = np.sqrt(max(p, 0.0))
    d = np.copysign(np.sqrt(max(q, 0.0)), I3)
    return StandardFormParams(float(a), float(b), float(c), float(d))


def standard_form(sigma, tol=TOL_PSD):
    """Standard-form parameters of a bona fide two-mode covariance matrix."""
    sigma = check_covariance(sigma)
    if bona_fide_eigenvalues(sigma)[0] < -tol:
        raise ValidationError("covariance matrix violates the uncertainty relation")
    return standard_form_from_invariants(*symplectic_invariants(sigma))


def mean_excitations(sigma):
    """Mean excitation numbers of each mode, their average and their sum."""
    sigma = check_covariance(sigma)
    alpha, beta, _ = blocks(sigma)
    nA = (np.trace(alpha) - 2.0) / 4.0
    nB = (np.trace(beta) - 2.0) / 4.0
    E = nA + nB
    return ProbeEnergy(float(nA), float(nB), float(E / 2.0), float(E))


def make_mts(k1, r1):
    """Mixed thermal state: two thermal modes mixed on a balanced beam splitter.

    Always separable; ``d = +c``.
    """
    if not k1 >= 1 or not r1 >= 0:
        raise ValidationError(f"MTS requires k1 >= 1 and r1 >= 0, got k1={k1}, r1={r1}")
    pref = k1 * np.exp(2 * r1)
    x, y = np.cosh(2 * r1), np.sinh(2 * r1)
    return standard_form_matrix(pref * x, pref * x, pref * y, pref * y)


def make_sts(k2, r2):
    """Squeezed thermal state (``d = -c``); ``k2 = 1`` is the two-mode squeezed vacuum."""
    if not k2 >= 1 or not r2 >= 0:
        raise ValidationError(f"STS requires k2 >= 1 and r2 >= 0, got k2={k2}, r2={r2}")
    x, y = np.cosh(2 * r2), np.sinh(2 * r2)
    return standard_form_matrix(k2 * x, k2 * x, k2 * y, -k2 * y)


def sts_is_separable(k2, r2):
    return bool(k2 * (np.cosh(2 * r2) - np.sinh(2 * r2)) >= 1)


def sts_at_energy(nbar, k2=1.0):
    """STS with mixedness ``k2`` and per-mode mean excitation ``nbar``."""
    a = 1.0 + 2.0 * nbar
    if k2 > a:
        raise ValidationError(f"k2={k2} exceeds the energy budget a={a}")
    return make_sts(k2, 0.5 * np.arccosh(a / k2))


def mts_at_energy(nbar, k1=1.0):
    """MTS with mixedness ``k1`` and per-mode mean excitation ``nbar``.

    Solves ``k1 * e^{2r} cosh(2r) = 1 + 2 nbar``, i.e.
    ``k1 (e^{4r} + 1) / 2 = a``.
    """
    a = 1.0 + 2.0 * nbar
    u = 2.0 * a / k1 - 1.0
    if u < 1.0:
        raise ValidationError(f"k1={k1} exceeds the energy budget a={a}")
    return make_mts(k1, 0.25 * np.log(u))


def random_state(nbar, rng_seed=None, max_tries=10_000):
    """Draw a random standard-form state with ``a + b = 2 + 4*nbar``.

    ``a`` is uniform on ``[1, 1 + 4 nbar]``, ``c`` uniform on ``[0, sqrt(ab)]``
    and ``d`` uniform on ``[-c, c]``; draws failing the uncertainty relation are
    rejected. ``rng_seed`` may be an int or a ``numpy.random.Generator``.
    """
    if not nbar > 0:
        raise ValidationError(f"nbar must be positive, got {nbar}")
    rng = np.random.default_rng(rng_seed)
    total = 2.0 + 4.0 * nbar
    for _ in range(max_tries):
        a = rng.uniform(1.0, 1.0 + 4.0 * nbar)
        b = total - a
        c = rng.uniform(0.0, np.sqrt(a * b))
        d = rng.uniform(-c, c)
        sigma = standard_form_matrix(a, b, c, d)
        if bona_fide_eigenvalues(sigma)[0] >= -TOL_PSD:
            return sigma
    raise NumericalError(f"no bona fide state found after {max_tries} draws (nbar={nbar})")


def random_states(nbar, n, rng_seed=None):
    """``n`` independent draws of :func:`random_state` from one generator.

    ``nbar`` may be a scalar or an array of length ``n``.
    """
    rng = np.random.default_rng(rng_seed)
    nbars = np.broadcast_to(np.asarray(nbar, dtype=float), (n,))
    return np.stack([random_state(nb, rng) for nb in nbars]) if n else np.zeros((0, 4, 4))


# -- local symplectic operations (used for invariance checks) ---------------

def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def squeezer(r):
    return np.diag([np.exp(-r), np.exp(r)])


def local_symplectic(SA, SB):
    S = np.zeros((4, 4))
    S[:2, :2] = SA
    S[2:, 2:] = SB
    return S


def random_local_symplectic(rng=None):
    """Random product of rotations and single-mode squeezers on each mode."""
    rng = np.random.default_rng(rng)

    def one():
        return rotation(rng.uniform(0, 2 * np.pi)) @ squeezer(rng.normal(0, 0.5)) @ rotation(
            rng.uniform(0, 2 * np.pi)
        )

    return local_symplectic(one(), one())
