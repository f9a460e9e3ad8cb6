"""Trajectory rollouts, history stacking and cumulative-cost targets."""

import csv
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from . import matstat
from .exceptions import ArgumentError, InsufficientDataError, RefusalError
from .lqg import check_assumptions


@dataclass(eq=False)
class Trajectory:
    """One rollout of length ``N = T + H``.

    ``ys`` has ``N + 1`` rows (t = 0..N), ``us`` and ``cs`` have ``N`` rows.
    ``xs`` (N + 1 rows) and ``zs`` are only kept for oracle checks.
    """

    ys: np.ndarray
    us: np.ndarray
    cs: np.ndarray
    xs: Optional[np.ndarray] = None
    zs: Optional[np.ndarray] = None

    @property
    def length(self):
        return len(self.us)

    def to_csv(self, path):
        """Write ``t,y_0..,u_0..,c`` rows (the final observation has no u or c)."""
        dy, du = self.ys.shape[1], self.us.shape[1]
        header = ["t"] + [f"y_{i}" for i in range(dy)] + [f"u_{i}" for i in range(du)] + ["c"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for t in range(len(self.ys)):
                if t < self.length:
                    tail = [repr(float(v)) for v in self.us[t]] + [repr(float(self.cs[t]))]
                else:
                    tail = [""] * (du + 1)
                writer.writerow([t] + [repr(float(v)) for v in self.ys[t]] + tail)


def quadratic_costs(xs, us, Q, R):
    return np.einsum("ti,ij,tj->t", xs, Q, xs) + np.einsum("ti,ij,tj->t", us, R, us)


def rollout_excite(model, T, H, sigma_u, rng, keep_oracle=False, check=True):
    """Roll out ``T + H`` steps under i.i.d. ``N(0, sigma_u^2 I)`` controls.

    With ``check=False`` the assumption check is skipped, which allows the
    degenerate noiseless configurations used in tests.
    """
    if T < 1 or H < 0:
        raise ArgumentError("need T >= 1 and H >= 0")
    if sigma_u < 0:
        raise ArgumentError("sigma_u must be nonnegative")
    if check:
        report = check_assumptions(model)
        if not report.passed:
            raise RefusalError(f"model violates assumptions: {', '.join(report.failures())}")
        if sigma_u <= 0:
            raise RefusalError("sigma_u must be positive to excite the system")
    N = T + H
    x = matstat.gaussian_sample(rng, np.zeros(model.d_x), model.Sigma_0)
    ws = matstat.gaussian_sample(rng, np.zeros(model.d_x), model.Sigma_w, size=N)
    vs = matstat.gaussian_sample(rng, np.zeros(model.d_y), model.Sigma_v, size=N + 1)
    us = sigma_u * rng.standard_normal((N, model.d_u))

    xs = np.empty((N + 1, model.d_x))
    xs[0] = x
    drive = us @ model.B.T + ws
    A = model.A
    for t in range(N):
        x = A @ x + drive[t]
        xs[t + 1] = x
    ys = xs @ model.C.T + vs
    cs = quadratic_costs(xs[:N], us, model.Q, model.R)
    traj = Trajectory(ys=ys, us=us, cs=cs)
    if keep_oracle:
        traj.xs = xs
        traj.zs = kalman_states(model, traj)
    return traj


def kalman_states(model, traj, L=None):
    """Stationary-gain Kalman filter states ``z*_t`` for t = 0..N.

    ``z*_0 = L y_0`` and ``z*_{t+1} = A_bar z*_t + B_bar u_t + L y_{t+1}``.
    ``L`` may be overridden (the filter matrices are recomputed from it).
    """
    if L is None:
        L = model.gains.L_star
    L = np.asarray(L, dtype=float)
    proj = np.eye(model.d_x) - L @ model.C
    A_bar, B_bar = proj @ model.A, proj @ model.B
    drive = traj.us @ B_bar.T + traj.ys[1:] @ L.T
    zs = np.empty((len(traj.ys), model.d_x))
    z = L @ traj.ys[0]
    zs[0] = z
    for t in range(traj.length):
        z = A_bar @ z + drive[t]
        zs[t + 1] = z
    return zs


def stack_histories(ys, us, H, times):
    """History rows ``[y_{t-H+1}; ..; y_t; u_{t-H}; ..; u_{t-1}]`` for each t."""
    times = np.asarray(times)
    if times.size and (times.min() < H or times.max() > len(us)):
        raise ArgumentError("history times out of range")
    offsets = np.arange(-H + 1, 1)
    idx = times[:, None] + offsets[None, :]
    y_part = ys[idx].reshape(len(times), -1)
    u_part = us[idx - 1].reshape(len(times), -1)
    return np.hstack([y_part, u_part])


@dataclass(eq=False)
class HistoryDataset:
    """Histories and regression targets extracted from one trajectory.

    Row ``i`` of every array corresponds to time ``t = H + i``. ``hs`` holds
    ``T + 1`` histories (t = H..T+H) so that next-step histories exist for
    all ``T`` control rows; ``cbar`` has the ``T - d_x + 1`` rows for which
    the ``d_x``-step lookahead fits inside the trajectory.
    """

    H: int
    d_x: int
    hs: np.ndarray
    us: np.ndarray
    cs: np.ndarray
    net_costs: np.ndarray
    cbar: np.ndarray

    @property
    def d_h(self):
        return self.hs.shape[1]

    @property
    def n_rows(self):
        """Effective sample count of the cumulative-cost regression."""
        return len(self.cbar)

    @property
    def rep_histories(self):
        return self.hs[: self.n_rows]

    @cached_property
    def lifted(self):
        """``[svec(h_t h_t^T), 1]`` rows aligned with ``cbar``."""
        return with_intercept(matstat.lift_quadratic(self.rep_histories))

    @property
    def hu(self):
        """``[h_t; u_t]`` rows aligned with ``cbar_next``."""
        n = self.n_rows - 1
        return np.hstack([self.hs[:n], self.us[:n]])

    @property
    def cbar_next(self):
        return self.cbar[1:]

    @property
    def h_next(self):
        return self.hs[1 : self.n_rows]

    @property
    def u_now(self):
        return self.us[: self.n_rows]

    @property
    def c_now(self):
        return self.cs[: self.n_rows]


def with_intercept(X):
    return np.hstack([X, np.ones((X.shape[0], 1))])


def build_histories(traj, H, d_x, R):
    """Stack ``H``-step histories and ``d_x``-step cumulative net costs."""
    if H < 1:
        raise ArgumentError("history length H must be >= 1")
    T = traj.length - H
    if T <= d_x:
        raise InsufficientDataError(f"need T > d_x, got T={T}, d_x={d_x}")
    R = np.atleast_2d(R)
    times = np.arange(H, traj.length + 1)
    hs = stack_histories(traj.ys, traj.us, H, times)
    us = traj.us[H:]
    cs = traj.cs[H:]
    net = cs - np.einsum("ti,ij,tj->t", us, R, us)
    window = np.concatenate([[0.0], np.cumsum(net)])
    cbar = window[d_x:] - window[:-d_x]
    return HistoryDataset(H=H, d_x=d_x, hs=hs, us=us, cs=cs, net_costs=net, cbar=cbar)


def cumulative_cost_offset(model, sigma_u):
    """Analytic constant ``b_bar`` in ``cbar_t = ||z*_t||^2 + b_bar + noise``.

    Valid in normalized coordinates; sums, over lookahead ``l < d_x``, the
    filtered-error, future-control and future-noise contributions.
    """
    g = model.gains
    total = 0.0
    power = np.eye(model.d_x)
    Q_l = []
    for _ in range(model.d_x):
        Q_l.append(power.T @ model.Q @ power)
        power = model.A @ power
    BBt = model.B @ model.B.T
    for ell in range(model.d_x):
        total += np.sum(Q_l[ell] * g.posterior_cov)
        for i in range(1, ell + 1):
            total += sigma_u**2 * np.sum(Q_l[i - 1] * BBt) + np.sum(Q_l[i - 1] * model.Sigma_w)
    return float(total)


def batch_means_stderr(x, n_batches=50):
    x = np.asarray(x, dtype=float)
    n = len(x) // n_batches * n_batches
    if n == 0:
        return float("nan")
    means = x[:n].reshape(n_batches, -1).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(n_batches))


def verify_cost_decomposition(model_normalized, dataset, zs, sigma_u):
    """Compare ``cbar_t`` against ``||z*_t||^2`` plus the analytic offset.

    ``zs`` are Kalman states in normalized coordinates for the whole
    trajectory (t = 0..N). Returns a dict with the empirical offset, the
    analytic offset, the mean residual and its batch-means standard error.
    """
    n = dataset.n_rows
    z = zs[dataset.H : dataset.H + n]
    gap = dataset.cbar - np.einsum("ti,ti->t", z, z)
    offset = cumulative_cost_offset(model_normalized, sigma_u)
    resid = gap - offset
    return {
        "empirical_offset": float(gap.mean()),
        "analytic_offset": offset,
        "mean_residual": float(resid.mean()),
        "stderr": batch_means_stderr(resid),
        "n": n,
    }


def truncation_errors(model, traj, zs, H, M_star):
    """``||z*_t - M* h_t||`` for every t >= H (truncated-history error)."""
    times = np.arange(H, traj.length + 1)
    hs = stack_histories(traj.ys, traj.us, H, times)
    return np.linalg.norm(zs[times] - hs @ M_star.T, axis=1)


def excited_state_covariance(model, sigma_u):
    """Stationary state covariance under i.i.d. excitation (Lyapunov oracle)."""
    return matstat.solve_lyapunov(model.A, sigma_u**2 * model.B @ model.B.T + model.Sigma_w)


__all__ = [
    "Trajectory", "HistoryDataset", "rollout_excite", "kalman_states", "build_histories",
    "stack_histories", "verify_cost_decomposition", "cumulative_cost_offset",
    "truncation_errors", "excited_state_covariance",
]
