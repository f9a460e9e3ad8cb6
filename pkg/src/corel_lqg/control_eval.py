"""Certainty-equivalent planning and evaluation of history-feedback policies."""

from dataclasses import dataclass

import numpy as np

from . import matstat
from .exceptions import ArgumentError, InstabilityError, NonConvergenceError, PlanningError
from .lqg import lqr_gain, optimal_average_cost, solve_dare

DIVERGENCE_LIMIT = 1e12


@dataclass(eq=False)
class Policy:
    """``u_t = K M h_t`` with ``h_t`` the ``H``-step history."""

    M: np.ndarray
    K: np.ndarray
    H: int

    def __post_init__(self):
        self.M = np.atleast_2d(np.asarray(self.M, dtype=float))
        self.K = np.atleast_2d(np.asarray(self.K, dtype=float))
        if self.K.shape[1] != self.M.shape[0]:
            raise ArgumentError("K and M latent dimensions disagree")
        if self.H < 1 or self.M.shape[1] % self.H:
            raise ArgumentError("M width must be a positive multiple of H")

    @property
    def history_gain(self):
        return self.K @ self.M

    def to_dict(self):
        return {"M": self.M.tolist(), "K": self.K.tolist(), "H": int(self.H)}

    @classmethod
    def from_dict(cls, data):
        return cls(M=np.asarray(data["M"], dtype=float), K=np.asarray(data["K"], dtype=float),
                   H=int(data["H"]))


def plan(latent):
    """Optimal feedback gain of the learned latent model (certainty equivalence)."""
    try:
        P = solve_dare(latent.A_hat, latent.B_hat, latent.Q_hat, latent.R)
    except NonConvergenceError as exc:
        raise PlanningError(f"latent Riccati equation failed: {exc}") from exc
    return lqr_gain(latent.A_hat, latent.B_hat, latent.Q_hat, latent.R, P)


def closed_loop(model, policy):
    """Augmented linear closed loop over ``s_t = [x_t; h_t]``.

    Returns ``(F, G, noise_cov, cost_weight)`` with
    ``s_{t+1} = F s_t + G [w_t; v_{t+1}]`` and ``c_t = s_t^T cost_weight s_t``.
    """
    H, dx, dy, du = policy.H, model.d_x, model.d_y, model.d_u
    d_h = H * (dy + du)
    if policy.M.shape[1] != d_h:
        raise ArgumentError(f"policy expects histories of width {policy.M.shape[1]}, model gives {d_h}")
    Kh = policy.history_gain
    if Kh.shape[0] != du:
        raise ArgumentError("policy control dimension disagrees with the model")
    ny = H * dy
    shift = np.zeros((d_h, d_h))
    shift[: ny - dy, dy:ny] = np.eye(ny - dy)
    shift[ny : d_h - du, ny + du :] = np.eye(H * du - du)
    E_y = np.zeros((d_h, dy))
    E_y[ny - dy : ny] = np.eye(dy)
    E_u = np.zeros((d_h, du))
    E_u[d_h - du :] = np.eye(du)

    A, B, C = model.A, model.B, model.C
    F = np.block([
        [A, B @ Kh],
        [E_y @ C @ A, shift + E_y @ C @ B @ Kh + E_u @ Kh],
    ])
    G = np.block([
        [np.eye(dx), np.zeros((dx, dy))],
        [E_y @ C, E_y],
    ])
    noise = np.block([
        [model.Sigma_w, np.zeros((dx, dy))],
        [np.zeros((dy, dx)), model.Sigma_v],
    ])
    weight = np.zeros((dx + d_h, dx + d_h))
    weight[:dx, :dx] = model.Q
    weight[dx:, dx:] = Kh.T @ model.R @ Kh
    return F, G, noise, weight


def evaluate_analytic(model, policy):
    """Exact infinite-horizon average cost of ``policy`` on ``model``."""
    F, G, noise, weight = closed_loop(model, policy)
    rho = matstat.spectral_radius(F)
    if rho >= 1.0:
        raise InstabilityError(f"policy closed loop is unstable (rho={rho:.6g})", rho)
    sigma = matstat.solve_lyapunov(F, G @ noise @ G.T)
    return float(np.sum(weight * sigma))


def default_burn_in(H):
    return max(10 * H, 500)


def _simulate_linear(F, drive_factor, weight, s0, n_steps, rng, skip, chunk):
    """Average of ``s_t^T weight s_t`` over ``t in [skip, n_steps)`` for
    ``s_{t+1} = F s_t + drive_factor e_t`` with ``e_t ~ N(0, I)``.

    Step ``t = 0`` is ``s0``. Costs are reduced per chunk in time order.
    """
    total, count = 0.0, 0
    s = s0
    buf = np.empty((chunk, len(s0)))
    for start in range(0, n_steps, chunk):
        stop = min(start + chunk, n_steps)
        drive = rng.standard_normal((stop - start, drive_factor.shape[1])) @ drive_factor.T
        # a diverging loop overflows before the check below; it raises there instead
        with np.errstate(over="ignore", invalid="ignore"):
            for i in range(stop - start):
                buf[i] = s
                s = F @ s + drive[i]
        lo = max(skip - start, 0)
        if lo < stop - start:
            block = buf[lo : stop - start]
            with np.errstate(over="ignore", invalid="ignore"):
                total += float(np.einsum("ti,ij,tj->", block, weight, block))
            count += len(block)
        if not np.isfinite(total) or count and total / count > DIVERGENCE_LIMIT or not np.all(np.isfinite(s)):
            raise InstabilityError("rollout cost diverged")
    return total / count


def _noise_factor(G, noise):
    return G @ matstat.gaussian_factor(noise)


def evaluate_rollout(model, policy, T_eval, rng, burn_in=None, sigma_u=1.0, chunk=10_000):
    """Monte-Carlo average cost over ``[burn_in, T_eval)``.

    The first ``H`` controls are ``N(0, sigma_u^2 I)`` warm-up excitation;
    afterwards ``u_t = K M h_t``, simulated through the augmented closed loop
    of :func:`closed_loop`.
    """
    H = policy.H
    burn_in = default_burn_in(H) if burn_in is None else burn_in
    if burn_in < H:
        raise ArgumentError("burn_in must cover the H warm-up steps")
    if T_eval < 10 * burn_in:
        raise ArgumentError("T_eval must be at least 10 * burn_in")
    F, G, noise, weight = closed_loop(model, policy)
    dy = model.d_y
    F_v = matstat.gaussian_factor(model.Sigma_v)
    x = matstat.gaussian_sample(rng, np.zeros(model.d_x), model.Sigma_0)
    ys = [model.C @ x + F_v @ rng.standard_normal(dy)]
    us = sigma_u * rng.standard_normal((H, model.d_u))
    for t in range(H):
        x = model.A @ x + model.B @ us[t] + matstat.gaussian_sample(rng, np.zeros(model.d_x), model.Sigma_w)
        ys.append(model.C @ x + F_v @ rng.standard_normal(dy))
    h = np.concatenate([np.ravel(ys[1:]), us.ravel()])
    s0 = np.concatenate([x, h])
    return _simulate_linear(F, _noise_factor(G, noise), weight, s0, T_eval - H, rng, burn_in - H, chunk)


def rollout_optimal_cost(model, T_eval, rng, burn_in=500, chunk=10_000):
    """Monte-Carlo average cost of the Kalman filter + LQR controller."""
    g = model.gains
    dx, dy = model.d_x, model.d_y
    A, B, C, L, K = model.A, model.B, model.C, g.L_star, g.K_star
    F = np.block([
        [A, B @ K],
        [L @ C @ A, g.A_bar + g.B_bar @ K + L @ C @ B @ K],
    ])
    G = np.block([[np.eye(dx), np.zeros((dx, dy))], [L @ C, L]])
    noise = np.block([
        [model.Sigma_w, np.zeros((dx, dy))],
        [np.zeros((dy, dx)), model.Sigma_v],
    ])
    weight = np.block([[model.Q, np.zeros((dx, dx))], [np.zeros((dx, dx)), K.T @ model.R @ K]])
    x = matstat.gaussian_sample(rng, np.zeros(dx), model.Sigma_0)
    z = L @ (C @ x + matstat.gaussian_sample(rng, np.zeros(dy), model.Sigma_v))
    return _simulate_linear(F, _noise_factor(G, noise), weight, np.concatenate([x, z]), T_eval, rng,
                            burn_in, chunk)


def suboptimality_gap(model, policy):
    return evaluate_analytic(model, policy) - optimal_average_cost(model)
