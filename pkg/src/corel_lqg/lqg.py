"""Ground-truth LQG problems: Riccati solvers, gains, assumption checks.

The system is

    x_{t+1} = A x_t + B u_t + w_t,     y_t = C x_t + v_t,
    c_t = x_t^T Q x_t + u_t^T R u_t,

with ``w ~ N(0, Sigma_w)``, ``v ~ N(0, Sigma_v)``, ``x_0 ~ N(0, Sigma_0)``.
"""

from dataclasses import dataclass, fields, replace
from functools import cached_property

import numpy as np

from . import matstat
from .exceptions import ArgumentError, InstabilityError, NonConvergenceError, ObservabilityError

_TOL_RANK = 1e-8

MATRIX_KEYS = ("A", "B", "C", "Q", "R", "Sigma_w", "Sigma_v", "Sigma_0")


@dataclass(frozen=True, eq=False)
class LqgModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    Sigma_w: np.ndarray
    Sigma_v: np.ndarray
    Sigma_0: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            value = np.atleast_2d(np.asarray(getattr(self, f.name), dtype=float))
            if not np.all(np.isfinite(value)):
                raise ArgumentError(f"{f.name} has non-finite entries")
            object.__setattr__(self, f.name, value)
        dx, du, dy = self.d_x, self.d_u, self.d_y
        expected = {
            "A": (dx, dx), "B": (dx, du), "C": (dy, dx), "Q": (dx, dx),
            "R": (du, du), "Sigma_w": (dx, dx), "Sigma_v": (dy, dy), "Sigma_0": (dx, dx),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ArgumentError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        for name in ("Q", "R", "Sigma_w", "Sigma_v", "Sigma_0"):
            m = getattr(self, name)
            if np.abs(m - m.T).max(initial=0.0) > 1e-9 * (1 + np.abs(m).max(initial=0.0)):
                raise ArgumentError(f"{name} must be symmetric")
            object.__setattr__(self, name, matstat.symmetrize(m))

    @property
    def d_x(self):
        return self.A.shape[0]

    @property
    def d_u(self):
        return self.B.shape[1]

    @property
    def d_y(self):
        return self.C.shape[0]

    @classmethod
    def from_dict(cls, data):
        missing = [k for k in MATRIX_KEYS if k not in data]
        if missing:
            raise ArgumentError(f"model is missing keys: {', '.join(missing)}")
        return cls(**{k: np.asarray(data[k], dtype=float) for k in MATRIX_KEYS})

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in MATRIX_KEYS}

    def replace(self, **changes):
        return replace(self, **changes)

    @cached_property
    def gains(self):
        return derive_gains(self)


@dataclass(frozen=True, eq=False)
class DerivedGains:
    S_star: np.ndarray
    P_star: np.ndarray
    L_star: np.ndarray
    K_star: np.ndarray
    A_bar: np.ndarray
    B_bar: np.ndarray
    Q_bar: np.ndarray
    # covariance of the filtered error x_t - z*_t
    posterior_cov: np.ndarray


def _dare_step(P, A, B, Q, R):
    BtP = B.T @ P
    gain = np.linalg.solve(BtP @ B + R, BtP @ A)
    return matstat.symmetrize(A.T @ P @ A - A.T @ P @ B @ gain + Q)


def dare_residual(P, A, B, Q, R):
    return float(np.linalg.norm(P - _dare_step(P, A, B, Q, R)))


def solve_dare(A, B, Q, R, tol=1e-13, max_iter=50_000):
    """Control-form DARE ``P = A^T (P - P B (B^T P B + R)^-1 B^T P) A + Q``.

    Solved by value iteration from ``P_0 = Q``. Raises
    :class:`NonConvergenceError` (carrying the last residual) if the iterates
    neither settle nor stagnate at round-off level within ``max_iter``.
    """
    A, B, Q, R = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (A, B, Q, R))
    n = A.shape[0]
    if A.shape != (n, n) or B.shape[0] != n or Q.shape != (n, n) or R.shape != (B.shape[1],) * 2:
        raise ArgumentError("solve_dare: inconsistent dimensions")
    P = matstat.symmetrize(Q)
    best_gap, stalled = np.inf, 0
    for _ in range(max_iter):
        P_next = _dare_step(P, A, B, Q, R)
        if not np.all(np.isfinite(P_next)) or np.abs(P_next).max(initial=0.0) > 1e100:
            raise NonConvergenceError("Riccati iteration diverged", np.inf)
        gap = np.linalg.norm(P_next - P)
        P = P_next
        scale = 1.0 + np.linalg.norm(P)
        if gap <= tol * scale:
            return P
        if gap < best_gap:
            best_gap, stalled = gap, 0
        else:
            stalled += 1
            # round-off floor reached: accept if the residual contract holds
            if stalled >= 50 and dare_residual(P, A, B, Q, R) <= 1e-10 * scale:
                return P
    raise NonConvergenceError(
        f"Riccati iteration did not converge in {max_iter} steps",
        dare_residual(P, A, B, Q, R),
    )


def filter_riccati(model):
    """Prediction-error Riccati solution ``S*`` (DARE dual)."""
    return solve_dare(model.A.T, model.C.T, model.Sigma_w, model.Sigma_v)


def kalman_gain(model, S_star):
    innov = model.C @ S_star @ model.C.T + model.Sigma_v
    try:
        return np.linalg.solve(innov, model.C @ S_star).T
    except np.linalg.LinAlgError as exc:
        raise ArgumentError("singular innovation covariance") from exc


def lqr_gain(A, B, Q, R, P_star):
    A, B, R, P = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (A, B, R, P_star))
    return -np.linalg.solve(B.T @ P @ B + R, B.T @ P @ A)


def cost_gram(A, Q, d_x=None):
    """Cost observability Gram matrix ``sum_{t < d_x} (A^t)^T Q A^t``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    d_x = A.shape[0] if d_x is None else d_x
    total = np.zeros_like(Q)
    power = np.eye(A.shape[0])
    for _ in range(d_x):
        total += power.T @ Q @ power
        power = A @ power
    return matstat.symmetrize(total)


def derive_gains(model):
    S = filter_riccati(model)
    L = kalman_gain(model, S)
    P = solve_dare(model.A, model.B, model.Q, model.R)
    K = lqr_gain(model.A, model.B, model.Q, model.R, P)
    proj = np.eye(model.d_x) - L @ model.C
    return DerivedGains(
        S_star=S, P_star=P, L_star=L, K_star=K,
        A_bar=proj @ model.A, B_bar=proj @ model.B,
        Q_bar=cost_gram(model.A, model.Q),
        posterior_cov=matstat.symmetrize(S - L @ model.C @ S),
    )


def posterior_covariance(model, S_star=None):
    """``S - S C^T (C S C^T + Sigma_v)^-1 C S``: covariance of ``x_t - z*_t``."""
    S = filter_riccati(model) if S_star is None else S_star
    L = kalman_gain(model, S)
    return matstat.symmetrize(S - L @ model.C @ S)


def normalize_model(model):
    """Change state coordinates so the cost observability Gram matrix is ``I``.

    Returns the transformed model and the transform ``Q_bar^{1/2}`` mapping
    original states to normalized ones.
    """
    Q_bar = cost_gram(model.A, model.Q)
    if matstat.sym_eig(Q_bar).values[-1] < 1e-10:
        raise ObservabilityError("cost observability Gram matrix is singular")
    root = matstat.psd_sqrt(Q_bar)
    root_inv = matstat.psd_sqrt(Q_bar, inverse=True)
    normalized = model.replace(
        A=root @ model.A @ root_inv,
        B=root @ model.B,
        C=model.C @ root_inv,
        Q=matstat.symmetrize(root_inv @ model.Q @ root_inv),
        Sigma_w=matstat.symmetrize(root @ model.Sigma_w @ root),
        Sigma_0=matstat.symmetrize(root @ model.Sigma_0 @ root),
    )
    return normalized, root


def controllability_matrix(A, B, steps=None):
    steps = A.shape[0] if steps is None else steps
    blocks, block = [], B
    for _ in range(steps):
        blocks.append(block)
        block = A @ block
    return np.hstack(blocks)


def observability_matrix(A, C, steps=None):
    return controllability_matrix(A.T, C.T, steps).T


def _sigma_rank(m, d):
    # d-th singular value: the rank-d witness of a d_x-row or d_x-column matrix
    sv = np.linalg.svd(m, compute_uv=False)
    return float(sv[d - 1]) if sv.size >= d else 0.0


def transient_bound(A, max_power=200):
    """``max_{k <= max_power} ||A^k||_2 rho(A)^-k`` (the constant alpha(A))."""
    rho = matstat.spectral_radius(A)
    best, power = 1.0, np.eye(A.shape[0])
    for k in range(1, max_power + 1):
        power = power @ A
        norm = np.linalg.norm(power, 2)
        if norm == 0.0:
            break
        best = max(best, norm / rho**k if rho > 0 else norm)
    return float(best)


@dataclass
class AssumptionReport:
    rho: float
    nu: float
    omega: float
    kappa: float
    mu: float
    sigma_v: float
    r: float
    rho_bar: float
    alpha: float
    tol: float = _TOL_RANK

    @property
    def checks(self):
        """Ordered ``(name, passed, witness)`` triples."""
        return [
            ("stable", self.rho < 1.0, self.rho),
            ("controllable", self.nu > self.tol, self.nu),
            ("observable", self.omega > self.tol, self.omega),
            ("noise_controllable", self.kappa > self.tol, self.kappa),
            ("cost_observable", self.mu > self.tol, self.mu),
            ("obs_noise_pd", self.sigma_v > self.tol, self.sigma_v),
            ("control_cost_pd", self.r > self.tol, self.r),
            ("filter_stable", self.rho_bar < 1.0, self.rho_bar),
            ("transient_bounded", np.isfinite(self.alpha), self.alpha),
        ]

    @property
    def passed(self):
        return all(ok for _, ok, _ in self.checks)

    def failures(self):
        return [name for name, ok, _ in self.checks if not ok]

    def to_dict(self):
        return {name: {"pass": bool(ok), "value": float(value)} for name, ok, value in self.checks}


def check_assumptions(model):
    """Evaluate every standing assumption; never raises on violations."""
    dx = model.d_x
    rho = matstat.spectral_radius(model.A)
    nu = _sigma_rank(controllability_matrix(model.A, model.B), dx)
    omega = _sigma_rank(observability_matrix(model.A, model.C), dx)
    kappa = _sigma_rank(controllability_matrix(model.A, matstat.psd_sqrt(model.Sigma_w)), dx)
    q_bar_min = matstat.sym_eig(cost_gram(model.A, model.Q)).values[-1]
    mu = float(np.sqrt(max(q_bar_min, 0.0)))
    sigma_v = float(np.sqrt(max(matstat.sym_eig(model.Sigma_v).values[-1], 0.0)))
    r = float(np.sqrt(max(matstat.sym_eig(model.R).values[-1], 0.0)))
    try:
        S = filter_riccati(model)
        L = kalman_gain(model, S)
        A_bar = (np.eye(dx) - L @ model.C) @ model.A
        rho_bar = matstat.spectral_radius(A_bar)
        alpha = max(transient_bound(model.A), transient_bound(A_bar))
    except (NonConvergenceError, ArgumentError):
        rho_bar, alpha = np.inf, np.inf
    return AssumptionReport(rho=rho, nu=nu, omega=omega, kappa=kappa, mu=mu,
                            sigma_v=sigma_v, r=r, rho_bar=rho_bar, alpha=alpha)


def representation_matrix(model, H, gains=None):
    """Truncated-history state estimator ``M*`` (d_x x H(d_y + d_u)).

    Column blocks follow the history layout
    ``[y_{t-H+1}, ..., y_t, u_{t-H}, ..., u_{t-1}]``.
    """
    g = model.gains if gains is None else gains
    y_blocks, u_blocks = [], []
    power = np.eye(model.d_x)
    for _ in range(H):
        y_blocks.append(power @ g.L_star)
        u_blocks.append(power @ g.B_bar)
        power = g.A_bar @ power
    # built newest-first, stored oldest-first
    return np.hstack(y_blocks[::-1] + u_blocks[::-1])


def optimal_average_cost(model):
    """Stationary average cost of the Kalman filter + LQR controller.

    Uses the joint closed loop over ``[x; z]`` with ``u = K* z`` and
    ``z_{t+1} = A_bar z + B_bar u + L* y_{t+1}``.
    """
    g = model.gains
    A, B, C, L, K = model.A, model.B, model.C, g.L_star, g.K_star
    dx = model.d_x
    F = np.block([
        [A, B @ K],
        [L @ C @ A, g.A_bar + g.B_bar @ K + L @ C @ B @ K],
    ])
    G = np.block([
        [np.eye(dx), np.zeros((dx, model.d_y))],
        [L @ C, L],
    ])
    noise = np.block([
        [model.Sigma_w, np.zeros((dx, model.d_y))],
        [np.zeros((model.d_y, dx)), model.Sigma_v],
    ])
    rho = matstat.spectral_radius(F)
    if rho >= 1.0:
        raise InstabilityError(f"optimal closed loop unstable (rho={rho:.6g})", rho)
    sigma = matstat.solve_lyapunov(F, G @ noise @ G.T)
    sxx, szz = sigma[:dx, :dx], sigma[dx:, dx:]
    return float(np.sum(model.Q * sxx) + np.sum(model.R * (K @ szz @ K.T)))
