"""scikit-learn style wrappers.

Samples are covariance matrices, given as rows of 16 reals (row-major) or
as a ``(n, 4, 4)`` stack.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_covariances
from .channels import DampingModel, QbmModel
from .exceptions import ValidationError
from .gaussian import TOL_PSD, bona_fide_eigenvalues
from .gip import gip_batch
from .nonmarkov import default_grid, divisibility_ND, time_grid, witness_batch


def _check_states(X):
    sig = check_covariances(X)
    lo = bona_fide_eigenvalues(sig)[:, 0]
    bad = np.nonzero(lo < -TOL_PSD)[0]
    if bad.size:
        raise ValidationError(f"sample {bad[0]} violates the uncertainty relation (min eigenvalue {lo[bad[0]]:.3e})")
    return sig


class GipTransformer(TransformerMixin, BaseEstimator):
    """Maps each covariance matrix to its interferometric power (one output column)."""

    def fit(self, X, y=None):
        _check_states(X)
        self.n_features_in_ = 16
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        return gip_batch(_check_states(X))[:, None]


class NonMarkovianityWitness(TransformerMixin, BaseEstimator):
    """Witness of a channel model evaluated on probe states.

    ``transform`` returns the witness of each probe; ``predict`` flags probes
    whose witness exceeds ``threshold``. Fitting builds the channel model and
    its divisibility measure ``nd_``; the samples are only validated.
    """

    def __init__(self, model="damping", alpha=0.1, T=0.0, omega0=4.0, omegac=1.0,
                 t_max=None, dt=None, eps=1e-5, lambda2_literal=False, threshold=0.0):
        self.model = model
        self.alpha = alpha
        self.T = T
        self.omega0 = omega0
        self.omegac = omegac
        self.t_max = t_max
        self.dt = dt
        self.eps = eps
        self.lambda2_literal = lambda2_literal
        self.threshold = threshold

    def _build_model(self):
        if self.model == "damping":
            return DampingModel(alpha=self.alpha)
        if self.model == "qbm":
            return QbmModel(alpha=self.alpha, T=self.T, omega0=self.omega0, omegac=self.omegac,
                            lambda2_literal=self.lambda2_literal)
        raise ValidationError(f"model must be 'damping' or 'qbm', got {self.model!r}")

    def fit(self, X=None, y=None):
        if X is not None:
            _check_states(X)
        self.model_ = self._build_model()
        t_max, dt = default_grid(self.model_)
        self.t_max_ = t_max if self.t_max is None else self.t_max
        self.dt_ = dt if self.dt is None else self.dt
        self.times_ = time_grid(self.t_max_, self.dt_)
        self._lambdas = self.model_.lambdas(self.times_)
        self.nd_ = divisibility_ND(self.model_, self.t_max_, self.dt_, self.eps).ND
        self.n_features_in_ = 16
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        sig = _check_states(X)
        return witness_batch(self.model_, sig, self.t_max_, self.dt_, lambdas=self._lambdas)[:, None]

    def predict(self, X):
        return self.transform(X)[:, 0] > self.threshold
