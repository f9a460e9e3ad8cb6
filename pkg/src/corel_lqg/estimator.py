"""scikit-learn style front end to cost-driven latent model learning."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import ArgumentError
from .pipeline import DEFAULT_RANK_THRESHOLD, discover_latent_dim, learn
from .simulate import Trajectory, stack_histories


def split_stream(X, n_controls):
    """Split rows ``[y_t, u_t]`` into observation and control blocks."""
    X = check_array(X, ensure_min_samples=2)
    if not 0 < n_controls < X.shape[1]:
        raise ArgumentError("n_controls must leave at least one observation column")
    return X[:, :-n_controls], X[:, -n_controls:]


class CostDrivenLQG(TransformerMixin, BaseEstimator):
    """Learn a latent linear-quadratic model and controller from costs alone.

    Parameters
    ----------
    n_controls : int
        Number of trailing columns of ``X`` that are controls.
    H : int
        History length; histories are ``[y_{t-H+1..t}; u_{t-H..t-1}]``.
    d_x : int or None
        Latent dimension; None discovers it from the cost-regression spectrum.
    method : {"explicit", "implicit"}
    rank_threshold_ratio : float
        Relative eigenvalue cutoff for rank discovery.
    R : array-like or None
        Known control cost matrix (identity if None).

    Attributes
    ----------
    M_ : ndarray (d_x, d_h)
        Representation map.
    K_ : ndarray (d_u, d_x)
        Latent feedback gain.
    latent_ : LatentModel
    d_x_ : int
    """

    def __init__(self, n_controls=1, H=4, d_x=None, method="explicit",
                 rank_threshold_ratio=DEFAULT_RANK_THRESHOLD, R=None):
        self.n_controls = n_controls
        self.H = H
        self.d_x = d_x
        self.method = method
        self.rank_threshold_ratio = rank_threshold_ratio
        self.R = R

    def _R(self):
        if self.R is None:
            return np.eye(self.n_controls)
        return np.atleast_2d(np.asarray(self.R, dtype=float))

    def fit(self, X, y):
        """Fit on one trajectory.

        Parameters
        ----------
        X : array-like (n, d_y + d_u)
            Rows ``[y_t, u_t]`` in time order.
        y : array-like (n,)
            Per-step costs ``c_t``.
        """
        ys, us = split_stream(X, self.n_controls)
        cs = np.asarray(y, dtype=float).ravel()
        if len(cs) != len(ys):
            raise ArgumentError(f"{len(ys)} rows but {len(cs)} costs")
        traj = Trajectory(ys=ys, us=us[:-1], cs=cs[:-1])
        R = self._R()
        d_x = self.d_x
        if d_x is None:
            d_x = discover_latent_dim(traj, self.H, R, self.rank_threshold_ratio)
        art = learn(traj, self.H, d_x, R, self.method)
        self.d_x_ = d_x
        self.M_ = art.representation.M_hat
        self.K_ = art.policy.K
        self.latent_ = art.latent
        self.policy_ = art.policy
        self.eigvals_ = art.representation.eigvals
        self.n_features_in_ = ys.shape[1] + us.shape[1]
        return self

    def histories(self, X):
        """Stacked histories for every row ``t >= H`` of a ``[y_t, u_t]`` stream."""
        ys, us = split_stream(X, self.n_controls)
        times = np.arange(self.H, len(ys))
        return stack_histories(ys, us, self.H, times)

    def transform(self, X):
        """Latent states ``M h`` of history rows ``X`` (n, d_h)."""
        check_is_fitted(self, "M_")
        X = check_array(X)
        if X.shape[1] != self.M_.shape[1]:
            raise ArgumentError(f"expected histories of width {self.M_.shape[1]}, got {X.shape[1]}")
        return X @ self.M_.T

    def predict(self, X):
        """Controls ``K M h`` for history rows ``X``."""
        return self.transform(X) @ self.K_.T
