"""One-dimensional integration kernels.

* :func:`integrate_adaptive` -- globally adaptive Gauss-Kronrod (7/15) with
  vector-valued integrands, used for the bath-frequency integrals.
* :class:`PiecewiseChebyshev` -- piecewise Chebyshev interpolants on a uniform
  panel grid with exact antiderivatives; used for cumulative time integrals.
* :func:`positive_part_integral` -- maximal intervals where a sampled function
  is positive, with root refinement, and the integral over each.
"""

from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.fft import dct
from scipy.optimize import brentq

from .exceptions import QuadratureError, ValidationError

# Gauss-Kronrod 7/15 abscissae and weights on [-1, 1]
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS_W = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes 1, 3, 5, 7(centre), 9, 11, 13
_GAUSS_W[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], [_WG[-1]], _WG[-2::-1]])


class QuadResult(NamedTuple):
    value: float
    err_estimate: float
    evaluations: int


def _gk_panels(f, a, b):
    """Apply the 7/15 rule on each panel [a_i, b_i]. Returns (kronrod, err, nevals)."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    fx = np.asarray(f(x.ravel()), dtype=float)
    fx = fx.reshape(x.shape + fx.shape[1:])
    # contract over the node axis (axis 1), keeping any trailing value axes
    k = np.tensordot(fx, _KRONROD_W, axes=([1], [0]))
    g = np.tensordot(fx, _GAUSS_W, axes=([1], [0]))
    scale = half.reshape(half.shape + (1,) * (k.ndim - 1))
    k = k * scale
    err = np.abs(k - g * scale)
    if err.ndim > 1:
        err = err.reshape(err.shape[0], -1).max(axis=1)
    return k, err, fx.shape[0] * fx.shape[1]


def integrate_adaptive(f, lo, hi, tol=1e-10, breakpoints=(), initial_panels=1, max_panels=20_000):
    """Integrate ``f`` over ``[lo, hi]`` to absolute tolerance ``tol``.

    ``f`` must accept a 1-D array of abscissae and return an array of the
    same length (scalar integrand) or of shape ``(len(x), m)`` (vector
    integrand; the error is controlled in the max norm). Panels are bisected
    while their error exceeds their length share of ``tol``. Interior
    ``breakpoints`` are always panel boundaries.

    Raises QuadratureError (carrying the best estimate) if ``max_panels`` is
    exceeded.
    """
    lo, hi = float(lo), float(hi)
    if hi < lo:
        raise ValidationError(f"integration bounds out of order: [{lo}, {hi}]")
    if hi == lo:
        probe = np.asarray(f(np.array([lo])), dtype=float)
        return QuadResult(np.zeros(probe.shape[1:]) if probe.ndim > 1 else 0.0, 0.0, 1)
    edges = [lo, *sorted(p for p in breakpoints if lo < p < hi), hi]
    bounds = []
    for a, b in zip(edges[:-1], edges[1:]):
        sub = np.linspace(a, b, max(1, int(initial_panels)) + 1)
        bounds.extend(zip(sub[:-1], sub[1:]))
    a = np.array([p[0] for p in bounds])
    b = np.array([p[1] for p in bounds])
    length = hi - lo
    total = None
    total_err = 0.0
    nevals = 0
    while a.size:
        vals, errs, n = _gk_panels(f, a, b)
        nevals += n
        ok = errs <= tol * (b - a) / length
        # below ~1e-15 relative width the panel cannot be split any further
        ok |= (b - a) <= 1e-15 * max(1.0, abs(lo), abs(hi))
        accepted = vals[ok].sum(axis=0)
        total = accepted if total is None else total + accepted
        total_err += errs[ok].sum()
        a, b = a[~ok], b[~ok]
        if a.size:
            if nevals // 15 > max_panels:
                best = total + vals[~ok].sum(axis=0)
                raise QuadratureError(
                    f"adaptive quadrature did not converge on [{lo}, {hi}] "
                    f"(error estimate {total_err + errs[~ok].sum():.3e} > tol {tol:.1e})",
                    value=best,
                    err_estimate=float(total_err + errs[~ok].sum()),
                )
            m = 0.5 * (a + b)
            a, b = np.concatenate([a, m]), np.concatenate([m, b])
    if np.ndim(total) == 0:
        total = float(total)
    return QuadResult(total, float(total_err), nevals)


def integrate_semi_infinite(f, lo=0.0, tol=1e-10, length=8.0, max_doublings=40):
    """Integrate over ``[lo, inf)`` by truncating where the tail is negligible.

    The window grows by doubling until the integral over the newest segment
    is below ``tol`` twice in a row.
    """
    total = integrate_adaptive(f, lo, lo + length, tol=tol / 4)
    value, err, nevals = total
    start, width = lo + length, length
    quiet = 0
    for _ in range(max_doublings):
        seg = integrate_adaptive(f, start, start + width, tol=tol / 4)
        value = value + seg.value
        err += seg.err_estimate
        nevals += seg.evaluations
        quiet = quiet + 1 if np.max(np.abs(seg.value)) < tol / 4 else 0
        if quiet >= 2:
            return QuadResult(value, err, nevals)
        start += width
        width *= 2
    raise QuadratureError("tail of the semi-infinite integral did not decay", value=value, err_estimate=err)


def _clenshaw(coeffs, u):
    """Evaluate Chebyshev series with per-point coefficient rows."""
    b1 = np.zeros_like(u)
    b2 = np.zeros_like(u)
    for k in range(coeffs.shape[1] - 1, 0, -1):
        b1, b2 = 2.0 * u * b1 - b2 + coeffs[:, k], b1
    return u * b1 - b2 + coeffs[:, 0]


@dataclass
class PiecewiseChebyshev:
    """Piecewise polynomial on uniform panels ``[start + i*width, start + (i+1)*width]``.

    ``coeffs[i]`` are Chebyshev coefficients in the panel's local variable
    ``u in [-1, 1]``.
    """

    start: float
    width: float
    coeffs: np.ndarray

    @staticmethod
    def nodes(start, stop, width, degree=20):
        """Chebyshev points of every panel covering [start, stop], shape (panels, degree + 1)."""
        npan = max(1, int(np.ceil((stop - start) / width - 1e-12)))
        n = degree + 1
        u = np.cos(np.pi * (np.arange(n) + 0.5) / n)[::-1]
        left = start + width * np.arange(npan)
        return left[:, None] + 0.5 * width * (u[None, :] + 1.0)

    @classmethod
    def from_values(cls, start, width, values):
        """Build from samples taken at :meth:`nodes`."""
        values = np.asarray(values, dtype=float)
        n = values.shape[1]
        # DCT-II of values at first-kind nodes (ordered by decreasing cos) gives the coefficients
        coeffs = dct(values[:, ::-1], type=2, axis=1) / n
        coeffs[:, 0] *= 0.5
        return cls(float(start), float(width), coeffs)

    @classmethod
    def fit(cls, f, start, stop, width, degree=20):
        """Interpolate ``f`` (vectorised) at the Chebyshev points of each panel."""
        x = cls.nodes(start, stop, width, degree)
        fx = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
        return cls.from_values(start, width, fx)

    @property
    def stop(self):
        return self.start + self.width * self.coeffs.shape[0]

    @property
    def tail(self):
        """Largest magnitude among the last two coefficients of any panel (truncation proxy)."""
        return float(np.abs(self.coeffs[:, -2:]).max())

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        if flat.size and (flat.min() < self.start - 1e-12 or flat.max() > self.stop + 1e-9 * max(1.0, self.stop)):
            raise ValidationError(f"evaluation outside [{self.start}, {self.stop}]")
        s = (flat - self.start) / self.width
        idx = np.clip(np.floor(s).astype(int), 0, self.coeffs.shape[0] - 1)
        u = 2.0 * (s - idx) - 1.0
        out = _clenshaw(self.coeffs[idx], u).reshape(t.shape)
        return out if out.ndim else float(out)

    def antiderivative(self):
        """Cumulative integral from ``start``, as another PiecewiseChebyshev."""
        ic = C.chebint(self.coeffs, m=1, lbnd=-1, scl=0.5 * self.width, axis=1)
        right = ic.sum(axis=1)  # T_k(1) = 1
        offsets = np.concatenate([[0.0], np.cumsum(right)[:-1]])
        ic[:, 0] += offsets
        return PiecewiseChebyshev(self.start, self.width, ic)

    def map(self, g, degree=None):
        """Refit ``g(t, self(t))`` on the same panels."""
        degree = self.coeffs.shape[1] - 1 if degree is None else degree
        return PiecewiseChebyshev.fit(lambda t: g(t, self(t)), self.start, self.stop, self.width, degree)


class Interval(NamedTuple):
    t_start: float
    t_end: float
    integral: float


class SignedIntervals(list):
    """Ordered, disjoint intervals where a function is positive."""

    @property
    def total(self):
        return float(sum(iv.integral for iv in self))


def _refine_root(refine, a, b, ga, gb, xtol):
    if ga == 0.0:
        return a
    if gb == 0.0:
        return b
    fa, fb = refine(a), refine(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if np.sign(fa) == np.sign(fb):
        # refined function disagrees with the samples; fall back to linear interpolation
        return a + (b - a) * ga / (ga - gb)
    return brentq(refine, a, b, xtol=xtol)


def positive_part_integral(
    t,
    g,
    refine: Optional[Callable[[float], float]] = None,
    antiderivative: Optional[Callable[[float], float]] = None,
    xtol=1e-8,
    quad_tol=1e-10,
) -> SignedIntervals:
    """Find maximal intervals where ``g > 0`` and integrate ``g`` over each.

    ``t`` must be strictly increasing. Interval ends between samples are
    located with ``refine`` (a callable evaluating g anywhere) to ``xtol``,
    or by linear interpolation when ``refine`` is None. The integral over an
    interval is ``antiderivative(end) - antiderivative(start)`` if given,
    otherwise an adaptive quadrature of ``refine``, otherwise the trapezoid
    rule on the samples.
    """
    t = np.asarray(t, dtype=float)
    g = np.asarray(g, dtype=float)
    if t.ndim != 1 or t.shape != g.shape:
        raise ValidationError("t and g must be 1-D arrays of equal length")
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise ValidationError("sample grid must be strictly increasing")
    out = SignedIntervals()
    pos = g > 0
    if not pos.any():
        return out
    padded = np.concatenate([[False], pos, [False]]).astype(int)
    starts = np.nonzero(np.diff(padded) == 1)[0]
    ends = np.nonzero(np.diff(padded) == -1)[0] - 1
    for i0, i1 in zip(starts, ends):
        if i0 == 0:
            ts = t[0]
        elif refine is None:
            ts = t[i0 - 1] + (t[i0] - t[i0 - 1]) * g[i0 - 1] / (g[i0 - 1] - g[i0])
        else:
            ts = _refine_root(refine, t[i0 - 1], t[i0], g[i0 - 1], g[i0], xtol)
        if i1 == t.size - 1:
            te = t[-1]
        elif refine is None:
            te = t[i1] + (t[i1 + 1] - t[i1]) * g[i1] / (g[i1] - g[i1 + 1])
        else:
            te = _refine_root(refine, t[i1], t[i1 + 1], g[i1], g[i1 + 1], xtol)
        if antiderivative is not None:
            val = antiderivative(te) - antiderivative(ts)
        elif refine is not None:
            val = integrate_adaptive(
                lambda s: np.maximum(np.vectorize(refine)(s), 0.0), ts, te, tol=quad_tol
            ).value
        else:
            inner = slice(i0, i1 + 1)
            tt = np.concatenate([[ts], t[inner], [te]])
            gg = np.concatenate([[0.0 if i0 else g[0]], g[inner], [0.0 if i1 < t.size - 1 else g[-1]]])
            val = np.trapezoid(np.maximum(gg, 0.0), tt)
        if val > 0:
            out.append(Interval(float(ts), float(te), float(val)))
    return out
