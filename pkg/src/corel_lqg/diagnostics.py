"""Empirical checks of the analytical devices behind the sample-complexity result.

Persistency of excitation of the lifted history covariates, the Gaussian
quadratic-form lower bound, and Procrustes-aligned error metrics that are
invariant to the orthogonal ambiguity of learned latent coordinates.
"""

from dataclasses import dataclass
from typing import List

import numpy as np

from .exceptions import ArgumentError
from .repr_learn import lifted_gram
from .simulate import rollout_excite, stack_histories

MIN_PE_H = 1
MIN_MC_SAMPLES = 10_000


@dataclass(eq=False)
class PeCurve:
    Ts: List[int]
    min_eigs: List[float]
    slope: float
    H: int
    d_h: int

    def to_dict(self):
        return {
            "Ts": [int(t) for t in self.Ts],
            "min_eigs": [float(v) for v in self.min_eigs],
            "slope": float(self.slope),
            "H": int(self.H),
            "d_h": int(self.d_h),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(Ts=list(data["Ts"]), min_eigs=list(data["min_eigs"]), slope=float(data["slope"]),
                   H=int(data["H"]), d_h=int(data["d_h"]))


def loglog_slope(xs, ys):
    """Least-squares slope of ``log y`` against ``log x`` (nan if any ``y <= 0``)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 2 or np.any(ys <= 0) or np.any(xs <= 0):
        return float("nan")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def pe_curve(model, H, sigma_u, Ts, rng):
    """Minimum eigenvalue of the lifted-covariate Gram along one nested trajectory.

    A single rollout of length ``max(Ts) + H`` is drawn; the Gram for each
    ``T`` uses its first ``T`` histories, so the values are monotone in ``T``.
    """
    Ts = [int(t) for t in Ts]
    if not Ts or any(b <= a for a, b in zip(Ts, Ts[1:])) or Ts[0] < 1:
        raise ArgumentError("Ts must be a nonempty, strictly increasing list of positive counts")
    if H < MIN_PE_H:
        raise ArgumentError(f"H must be at least {MIN_PE_H}")
    traj = rollout_excite(model, Ts[-1], H, sigma_u, rng)
    hs = stack_histories(traj.ys, traj.us, H, np.arange(H, H + Ts[-1]))
    d_h = hs.shape[1]
    p = d_h * (d_h + 1) // 2 + 1
    G = np.zeros((p, p))
    min_eigs = []
    prev = 0
    for T in Ts:
        G += lifted_gram(hs[prev:T])[0]
        prev = T
        lam = 0.0 if T < p else max(float(np.linalg.eigvalsh(G)[0]), 0.0)
        min_eigs.append(lam)
    return PeCurve(Ts=Ts, min_eigs=min_eigs, slope=loglog_slope(Ts, min_eigs), H=H, d_h=d_h)


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def structured_candidates(d):
    """Unit vectors in ``R^{d+1}`` probing the hard cases of the bound.

    The constant direction ``e_{d+1}``; vectors on the boundary
    ``|v_{d+1}| = 2 sqrt(d / (4d + 1))`` with the remaining mass spread
    evenly (both signs); and the mean-cancelling vector
    ``v_i = a, v_{d+1} = -d a``.
    """
    out = {}
    e = np.zeros(d + 1)
    e[-1] = 1.0
    out["constant"] = e
    edge = 2.0 * np.sqrt(d / (4.0 * d + 1.0))
    rest = np.sqrt(max(1.0 - edge**2, 0.0) / d)
    for s_last in (1.0, -1.0):
        for s_rest in (1.0, -1.0):
            v = np.full(d + 1, s_rest * rest)
            v[-1] = s_last * edge
            out[f"edge{'+' if s_last > 0 else '-'}{'+' if s_rest > 0 else '-'}"] = v
    cancel = np.ones(d + 1)
    cancel[-1] = -float(d)
    out["cancel"] = _unit(cancel)
    return out


def quadform_lb_mc(d, trials, mc_samples, rng, chunk=50_000):
    """Monte-Carlo estimate of ``min_v E|v_{d+1} + sum_i v_i z_i^2|``.

    ``trials`` random unit vectors plus :func:`structured_candidates` are
    evaluated on a shared sample of ``z ~ N(0, I_d)``. Returns a dict with
    the worst estimate, its standard error, the bound ``0.8 d^{-3/2}`` and
    whether the worst estimate falls more than 3 SE below it.
    """
    if d < 1 or trials < 1:
        raise ArgumentError("need d >= 1 and trials >= 1")
    if mc_samples < MIN_MC_SAMPLES:
        raise ArgumentError(f"mc_samples must be at least {MIN_MC_SAMPLES}")
    random_vs = rng.standard_normal((trials, d + 1))
    random_vs /= np.linalg.norm(random_vs, axis=1, keepdims=True)
    named = structured_candidates(d)
    V = np.vstack([random_vs] + list(named.values()))
    labels = [f"random{i}" for i in range(trials)] + list(named)

    s1 = np.zeros(len(V))
    s2 = np.zeros(len(V))
    for start in range(0, mc_samples, chunk):
        n = min(chunk, mc_samples - start)
        z2 = rng.standard_normal((n, d)) ** 2
        vals = np.abs(z2 @ V[:, :d].T + V[:, d])
        s1 += vals.sum(axis=0)
        s2 += (vals**2).sum(axis=0)
    means = s1 / mc_samples
    var = np.maximum(s2 / mc_samples - means**2, 0.0) * mc_samples / (mc_samples - 1)
    ses = np.sqrt(var / mc_samples)
    worst = int(np.argmin(means))
    bound = 0.8 * d ** (-1.5)
    return {
        "d": int(d),
        "trials": int(trials),
        "mc_samples": int(mc_samples),
        "bound": bound,
        "min_estimate": float(means[worst]),
        "min_se": float(ses[worst]),
        "argmin": labels[worst],
        "violation": bool(means[worst] < bound - 3.0 * ses[worst]),
        "structured": {k: {"mean": float(means[trials + i]), "se": float(ses[trials + i])}
                       for i, k in enumerate(named)},
    }


def procrustes_align(M_hat, M_star):
    """Orthogonal ``S`` minimizing ``||M_hat - S M_star||_F`` and that minimum."""
    M_hat = np.atleast_2d(np.asarray(M_hat, dtype=float))
    M_star = np.atleast_2d(np.asarray(M_star, dtype=float))
    if M_hat.shape != M_star.shape:
        raise ArgumentError(f"shape mismatch {M_hat.shape} vs {M_star.shape}")
    U, _, Vt = np.linalg.svd(M_hat @ M_star.T)
    S = U @ Vt
    return S, float(np.linalg.norm(M_hat - S @ M_star))


def latent_errors(M_hat, A_hat, B_hat, Q_hat, K_hat, model_normalized, M_star):
    """Errors of learned latent artifacts after Procrustes alignment to the truth.

    ``model_normalized`` and ``M_star`` must be in the normalized coordinates.
    If ``M_hat`` has a different number of rows than ``M_star`` the
    comparison is undefined and every entry is nan.
    """
    names = ("M_err", "A_err", "B_err", "Q_err", "K_err")
    M_hat = np.atleast_2d(M_hat)
    if M_hat.shape != np.shape(M_star):
        return dict.fromkeys(names, float("nan"))
    S, m_err = procrustes_align(M_hat, M_star)
    truth = model_normalized
    K_star = truth.gains.K_star
    op_norm = lambda m: float(np.linalg.norm(m, 2))  # noqa: E731
    return {
        "M_err": m_err,
        "A_err": op_norm(A_hat - S @ truth.A @ S.T),
        "B_err": op_norm(B_hat - S @ truth.B),
        "Q_err": op_norm(Q_hat - S @ truth.Q @ S.T),
        "K_err": op_norm(K_hat - K_star @ S.T),
    }


def misalignment_errors(A_aligned, A_unaligned, M_hat, model_normalized, M_star):
    """``||A - S A* S^T||_2`` for the aligned and alignment-skipped estimates."""
    S, _ = procrustes_align(M_hat, M_star)
    target = S @ model_normalized.A @ S.T
    return (float(np.linalg.norm(A_aligned - target, 2)),
            float(np.linalg.norm(A_unaligned - target, 2)))


__all__ = [
    "PeCurve", "pe_curve", "quadform_lb_mc", "structured_candidates", "procrustes_align",
    "latent_errors", "misalignment_errors", "loglog_slope",
]
