"""Local one-mode Gaussian channels acting on mode A of a two-mode state.

Both models act as ``sigma -> X sigma X^T + Y`` with
``X = sqrt(L1) I_A (+) I_B`` and ``Y = L2 I_A (+) 0_B``, where ``L1 = exp(-x)``
and ``x(t) = 2 alpha int_0^t gamma(s) ds``.

Time and frequency are measured in units of the bath cutoff (``omegac = 1``
by default).
"""

import threading
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from ._validation import check_covariance, check_time
from .exceptions import ValidationError
from .gaussian import OMEGA, TOL_PSD, bona_fide_eigenvalues
from .quadrature import PiecewiseChebyshev, integrate_adaptive

CP_TOL = 1e-10
TOL_QUAD = 1e-9
PLATEAU_TIME = 2.5 * np.pi


class NonCPWarning(UserWarning):
    """The 0 -> t map of a channel model is not completely positive."""


@dataclass(frozen=True)
class ChannelSnapshot:
    """The pair ``(X, Y)`` of a Gaussian map at time ``t``."""

    X: np.ndarray
    Y: np.ndarray
    t: float = 0.0

    def cp_matrix(self):
        return self.Y + 1j * OMEGA - 1j * self.X @ OMEGA @ self.X.T

    def cp_eigenvalues(self):
        return np.linalg.eigvalsh(self.cp_matrix())

    def is_cp(self, tol=CP_TOL):
        return bool(self.cp_eigenvalues()[0] >= -tol)

    def compose(self, earlier):
        """The map ``self o earlier`` (apply ``earlier`` first)."""
        X = self.X @ earlier.X
        Y = self.X @ earlier.Y @ self.X.T + self.Y
        return ChannelSnapshot(X, Y, self.t)


def local_snapshot(lam1, lam2, t=0.0):
    X = np.diag([np.sqrt(lam1), np.sqrt(lam1), 1.0, 1.0])
    Y = np.diag([lam2, lam2, 0.0, 0.0])
    return ChannelSnapshot(X, Y, float(t))


def intermediate_map(later, earlier):
    """Map taking the state at ``earlier.t`` to the state at ``later.t``.

    ``X = X_l X_e^{-1}`` and ``Y = Y_l - X Y_e X^T``. Raises ValidationError
    when ``X_e`` is singular.
    """
    try:
        Xi = np.linalg.solve(earlier.X.T, later.X.T).T
    except np.linalg.LinAlgError as exc:
        raise ValidationError(f"X({earlier.t}) is singular") from exc
    return ChannelSnapshot(Xi, later.Y - Xi @ earlier.Y @ Xi.T, later.t)


def apply_channel(snapshot, sigma0, tol=CP_TOL):
    """``X sigma0 X^T + Y`` after checking CP of the map and physicality of ``sigma0``."""
    sigma0 = check_covariance(sigma0)
    if bona_fide_eigenvalues(sigma0)[0] < -TOL_PSD:
        raise ValidationError("input covariance matrix violates the uncertainty relation")
    eig = snapshot.cp_eigenvalues()[0]
    if eig < -tol:
        raise ValidationError(f"channel at t={snapshot.t} is not completely positive (eigenvalue {eig:.3e})")
    return snapshot.X @ sigma0 @ snapshot.X.T + snapshot.Y


def evolve_local(sigma0, lam1, lam2):
    """Apply the local map with parameters ``(lam1, lam2)``; broadcasts over arrays of lambdas.

    Returns shape ``lam1.shape + (4, 4)``.
    """
    lam1 = np.asarray(lam1, dtype=float)
    lam2 = np.asarray(lam2, dtype=float)
    out = np.broadcast_to(np.asarray(sigma0, dtype=float), lam1.shape + (4, 4)).copy()
    r = np.sqrt(lam1)[..., None]
    out[..., :2, :] *= r[..., None]
    out[..., :, :2] *= r[..., None, :]
    out[..., 0, 0] += lam2
    out[..., 1, 1] += lam2
    return out


# -- damping model ----------------------------------------------------------

def damping_gamma(t):
    """Piecewise damping coefficient: ``exp(-t/10) sin(t) / 2`` then a plateau at ``t >= 5 pi / 2``."""
    t = np.asarray(t, dtype=float)
    out = np.where(t < PLATEAU_TIME, 0.5 * np.exp(-t / 10) * np.sin(t), 0.5 * np.exp(-np.pi / 4))
    return out if out.ndim else float(out)


def damping_gamma_integral(t):
    """Closed-form ``int_0^t damping_gamma``."""
    t = np.asarray(t, dtype=float)
    tc = np.minimum(t, PLATEAU_TIME)
    head = 0.5 * (1 - np.exp(-tc / 10) * (np.cos(tc) + 0.1 * np.sin(tc))) / 1.01
    tail = 0.5 * np.exp(-np.pi / 4) * np.maximum(t - PLATEAU_TIME, 0.0)
    out = head + tail
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DampingModel:
    """Single-decay damping channel.

    ``gamma_integral`` (the antiderivative of ``gamma_fn`` from 0) is used
    when supplied; otherwise ``x(t)`` is integrated adaptively, splitting at
    ``breakpoints``.
    """

    alpha: float = 0.1
    gamma_fn: Callable = damping_gamma
    gamma_integral: Optional[Callable] = damping_gamma_integral
    breakpoints: Tuple[float, ...] = (PLATEAU_TIME,)
    kind: str = field(default="damping", init=False)

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValidationError(f"alpha must be non-negative, got {self.alpha}")

    @classmethod
    def constant(cls, alpha, gamma=1.0):
        """Markovian model with constant damping rate."""
        g = float(gamma)
        return cls(
            alpha=alpha,
            gamma_fn=lambda t: np.full(np.shape(t), g) if np.ndim(t) else g,
            gamma_integral=lambda t: g * np.asarray(t, dtype=float) if np.ndim(t) else g * float(t),
            breakpoints=(),
        )

    def gamma(self, t):
        return self.gamma_fn(t)

    def x(self, t):
        """``x(t) = 2 alpha int_0^t gamma``."""
        if self.gamma_integral is not None:
            return 2.0 * self.alpha * np.asarray(self.gamma_integral(t), dtype=float) if np.ndim(t) else (
                2.0 * self.alpha * float(self.gamma_integral(t))
            )
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        order = np.argsort(t_arr)
        out = np.empty_like(t_arr)
        acc, prev = 0.0, 0.0
        f = np.vectorize(self.gamma_fn, otypes=[float])
        for i in order:
            acc += integrate_adaptive(f, prev, t_arr[i], tol=TOL_QUAD, breakpoints=self.breakpoints).value
            prev = t_arr[i]
            out[i] = acc
        out *= 2.0 * self.alpha
        return out.reshape(np.shape(t)) if np.ndim(t) else float(out[0])

    def lambdas(self, t):
        x = self.x(t)
        lam1 = np.exp(-x)
        return lam1, 1.0 - lam1

    def snapshot(self, t):
        t = check_time(t)
        return local_snapshot(*self.lambdas(t), t)

    def evolve(self, sigma0, t):
        return evolve_local(sigma0, *self.lambdas(t))


def damping_x(model, t):
    check_time(t)
    return model.x(t)


def evolve_damping(model, sigma0, t):
    """State at time ``t`` under the damping model (standard channel application)."""
    return apply_channel(model.snapshot(t), sigma0)


# -- quantum Brownian motion --------------------------------------------------

def ohmic_cos_kernel(s, omegac=1.0):
    """``int_0^inf w e^{-w/wc} cos(w s) dw``."""
    s = np.asarray(s, dtype=float)
    u = (omegac * s) ** 2
    return omegac**2 * (1 - u) / (1 + u) ** 2


def ohmic_sin_kernel(s, omegac=1.0):
    """``int_0^inf w e^{-w/wc} sin(w s) dw``."""
    s = np.asarray(s, dtype=float)
    u = (omegac * s) ** 2
    return 2 * omegac**3 * s / (1 + u) ** 2


def _bose_weight(w, T):
    """``w * N(w)`` with its finite limit ``T`` at ``w -> 0``."""
    w = np.asarray(w, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = w / np.expm1(w / T)
    return np.where(w > 0, out, T)


def _omega_integral(weight, trig, s, upper, tol, chunk=256):
    """``int_0^upper weight(w) trig(w s) dw`` for every ``s`` (vectorised GK quadrature)."""
    s = np.asarray(s, dtype=float).ravel()
    out = np.empty_like(s)
    for i in range(0, s.size, chunk):
        ss = s[i:i + chunk]
        smax = max(float(np.abs(ss).max()), 1.0)
        panels = int(min(4000, np.ceil(upper * smax / np.pi) + 1))
        res = integrate_adaptive(
            lambda w: weight(w)[:, None] * trig(np.outer(w, ss)), 0.0, upper, tol=tol, initial_panels=panels
        )
        out[i:i + chunk] = res.value
    return out


def delta_kernel(s, T=0.0, omegac=1.0, method="auto", tol=1e-12, cutoff_multiplier=40.0):
    """Inner frequency integral of the diffusion coefficient, ``int J (N + 1/2) cos(w s) dw``.

    ``method='auto'`` uses the closed form for the vacuum part and integrates
    the Bose term numerically; ``'numeric'`` integrates everything numerically.
    """
    s = np.asarray(s, dtype=float)
    upper = cutoff_multiplier * max(omegac, T * omegac)
    if method == "numeric":
        if T > 0:
            def weight(w):
                return (_bose_weight(w, T) + 0.5 * w) * np.exp(-w / omegac)
        else:
            def weight(w):
                return 0.5 * w * np.exp(-w / omegac)
        return _omega_integral(weight, np.cos, s, upper, tol).reshape(s.shape)
    if method != "auto":
        raise ValidationError(f"unknown method {method!r}")
    out = 0.5 * ohmic_cos_kernel(s, omegac)
    if T > 0:
        out = out + _omega_integral(
            lambda w: _bose_weight(w, T) * np.exp(-w / omegac), np.cos, s, upper, tol
        ).reshape(s.shape)
    return out


def gamma_kernel(s, omegac=1.0, method="auto", tol=1e-12, cutoff_multiplier=40.0):
    """Inner frequency integral of the damping coefficient, ``int J sin(w s) dw``."""
    s = np.asarray(s, dtype=float)
    if method == "numeric":
        return _omega_integral(
            lambda w: w * np.exp(-w / omegac), np.sin, s, cutoff_multiplier * omegac, tol
        ).reshape(s.shape)
    if method != "auto":
        raise ValidationError(f"unknown method {method!r}")
    return ohmic_sin_kernel(s, omegac)


class _CoefficientTables:
    """Delta(t), gamma(t) and int_0^t gamma as piecewise Chebyshev tables on [0, horizon]."""

    def __init__(self, T, omega0, omegac, method, tol, cutoff_multiplier, horizon, degree=20):
        width = min(1.0 / omegac, 2 * np.pi / omega0) / 4
        kernel_tol = tol / (10 * horizon)
        for _ in range(6):
            s = PiecewiseChebyshev.nodes(0.0, horizon, width, degree)
            kd = delta_kernel(s.ravel(), T, omegac, method, kernel_tol, cutoff_multiplier).reshape(s.shape)
            kg = gamma_kernel(s.ravel(), omegac, method, kernel_tol, cutoff_multiplier).reshape(s.shape)
            d_rate = PiecewiseChebyshev.from_values(0.0, width, kd * np.cos(omega0 * s))
            g_rate = PiecewiseChebyshev.from_values(0.0, width, kg * np.sin(omega0 * s))
            if max(d_rate.tail, g_rate.tail) * width <= tol / horizon:
                break
            width /= 2
        self.horizon = horizon
        self.width = width
        self.delta = d_rate.antiderivative()
        self.gamma = g_rate.antiderivative()
        self.gamma_int = self.gamma.antiderivative()


def _anchored(table, t):
    """Evaluate a cumulative integral from 0, exactly zero at ``t = 0``."""
    out = np.where(np.asarray(t) == 0, 0.0, table(t))
    return out if out.ndim else float(out)


_TABLES = {}
_TABLES_LOCK = threading.Lock()


def _horizon_for(t_max):
    return float(2.0 ** max(6, int(np.ceil(np.log2(max(t_max, 1.0))))))


def _tables(key, t_max):
    horizon = _horizon_for(t_max)
    with _TABLES_LOCK:
        tab = _TABLES.get(key)
        if tab is not None and tab.horizon >= horizon:
            return tab
    tab = _CoefficientTables(*key, horizon=horizon)
    with _TABLES_LOCK:
        cur = _TABLES.get(key)
        if cur is None or cur.horizon < tab.horizon:
            _TABLES[key] = tab
        return _TABLES[key]


@dataclass(frozen=True)
class QbmModel:
    """Secular quantum Brownian motion of mode A in an Ohmic bath.

    ``T`` is the bath temperature in units of the cutoff frequency. The
    default noise term is ``L2 = 2 alpha e^{-x(t)} int_0^t e^{x(s)} Delta(s) ds``;
    ``lambda2_literal=True`` drops the factor 2.
    """

    alpha: float = 0.1
    T: float = 0.0
    omega0: float = 4.0
    omegac: float = 1.0
    tol_quad: float = TOL_QUAD
    cutoff_multiplier: float = 40.0
    method: str = "auto"
    lambda2_literal: bool = False
    kind: str = field(default="qbm", init=False)

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValidationError(f"alpha must be non-negative, got {self.alpha}")
        if not self.T >= 0:
            raise ValidationError(f"T must be non-negative, got {self.T}")
        if not self.omega0 > 0 or not self.omegac > 0:
            raise ValidationError("omega0 and omegac must be positive")
        if self.method not in ("auto", "numeric"):
            raise ValidationError(f"unknown method {self.method!r}")

    def _key(self):
        return (float(self.T), float(self.omega0), float(self.omegac), self.method,
                float(self.tol_quad), float(self.cutoff_multiplier))

    def tables(self, t_max):
        return _tables(self._key(), t_max)

    def delta(self, t):
        return _anchored(self.tables(np.max(t)).delta, t)

    def gamma(self, t):
        return _anchored(self.tables(np.max(t)).gamma, t)

    def x(self, t):
        return 2.0 * self.alpha * _anchored(self.tables(np.max(t)).gamma_int, t)

    def _noise_table(self, t_max):
        tab = self.tables(t_max)
        with _TABLES_LOCK:
            cache = _NOISE.get(self)
            if cache is not None and cache.stop >= tab.horizon:
                return cache
        f = PiecewiseChebyshev.fit(
            lambda s: np.exp(2.0 * self.alpha * tab.gamma_int(s)) * tab.delta(s),
            0.0, tab.horizon, tab.width,
        ).antiderivative()
        with _TABLES_LOCK:
            _NOISE[self] = f
        return f

    def lambdas(self, t):
        t = np.asarray(t, dtype=float)
        t_max = float(np.max(t)) if t.size else 0.0
        x = self.x(t)
        lam1 = np.exp(-x)
        factor = 1.0 if self.lambda2_literal else 2.0
        lam2 = factor * self.alpha * lam1 * _anchored(self._noise_table(t_max), t)
        if lam1.ndim == 0:
            return float(lam1), float(lam2)
        return lam1, lam2

    def snapshot(self, t):
        t = check_time(t)
        return local_snapshot(*self.lambdas(t), t)

    def evolve(self, sigma0, t):
        return evolve_local(sigma0, *self.lambdas(t))

    def cp_margin(self, t):
        """Smallest eigenvalue of the CP matrix of the 0 -> t map (``L2 - (1 - L1)``)."""
        lam1, lam2 = self.lambdas(t)
        return lam2 - (1.0 - lam1)


_NOISE = {}


def qbm_delta(model, t):
    """Diffusion coefficient Delta(t)."""
    return model.delta(t)


def qbm_gamma(model, t):
    """Damping coefficient gamma(t); independent of temperature."""
    return model.gamma(t)


def evolve_qbm(model, sigma0, t, cp_tol=CP_TOL):
    """State at time ``t`` under QBM. Warns with NonCPWarning if the 0 -> t map is not CP."""
    t = check_time(t)
    sigma0 = check_covariance(sigma0)
    if bona_fide_eigenvalues(sigma0)[0] < -TOL_PSD:
        raise ValidationError("input covariance matrix violates the uncertainty relation")
    snap = model.snapshot(t)
    if not snap.is_cp(cp_tol):
        warnings.warn(f"QBM map 0 -> {t} is not completely positive", NonCPWarning, stacklevel=2)
    return snap.X @ sigma0 @ snap.X.T + snap.Y


def snapshot(model, t):
    """``(X(t), Y(t))`` of the 0 -> t map of ``model``."""
    return model.snapshot(t)
