"""Latent dynamics and cost identification.

Two routes recover ``(A_hat, B_hat)`` in the latent coordinates fixed by the
representation map: ordinary least squares on encoded states
(:func:`sysid_explicit`), or the cost-only route (:func:`cosysid`) that
regresses next-step cumulative costs on ``[h_t; u_t]`` and then aligns the
two factorizations' coordinate frames.
"""

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import matstat
from .exceptions import ArgumentError
from .repr_learn import factor_psd, quadratic_regress

ALIGN_TOL = 1e-10
REPR_PINV_TOL = 1e-8


@dataclass(eq=False)
class LatentModel:
    A_hat: np.ndarray
    B_hat: np.ndarray
    Q_hat: np.ndarray
    R: np.ndarray
    b_hat: float
    method: str

    @property
    def d_x(self):
        return self.A_hat.shape[0]

    def to_dict(self):
        return {
            "A_hat": self.A_hat.tolist(),
            "B_hat": self.B_hat.tolist(),
            "Q_hat": self.Q_hat.tolist(),
            "R": self.R.tolist(),
            "b_hat": float(self.b_hat),
            "method": self.method,
        }

    @classmethod
    def from_dict(cls, data):
        R = np.atleast_2d(np.asarray(data["R"], dtype=float))
        d_u = R.shape[0]
        A = np.asarray(data["A_hat"], dtype=float)
        d_x = int(round(np.sqrt(A.size)))
        return cls(
            A_hat=A.reshape(d_x, d_x),
            B_hat=np.asarray(data["B_hat"], dtype=float).reshape(d_x, d_u),
            Q_hat=np.asarray(data["Q_hat"], dtype=float).reshape(d_x, d_x),
            R=R,
            b_hat=float(data["b_hat"]),
            method=str(data["method"]),
        )


@dataclass(eq=False)
class CosysidTrace:
    N1_hat: np.ndarray
    b1_hat: float
    M1_hat: np.ndarray
    M_tilde: np.ndarray
    B_tilde: np.ndarray
    A_tilde: np.ndarray
    S0_hat: Optional[np.ndarray]

    @property
    def orthogonality_defect(self):
        """``||S0^T S0 - I||_F``; the alignment is not projected onto O(d_x)."""
        if self.S0_hat is None:
            return float("nan")
        d = self.S0_hat.shape[0]
        return float(np.linalg.norm(self.S0_hat.T @ self.S0_hat - np.eye(d)))

    def to_dict(self):
        return {
            "N1_hat": self.N1_hat.tolist(),
            "b1_hat": float(self.b1_hat),
            "M1_hat": self.M1_hat.tolist(),
            "M_tilde": self.M_tilde.tolist(),
            "B_tilde": self.B_tilde.tolist(),
            "A_tilde": self.A_tilde.tolist(),
            "S0_hat": None if self.S0_hat is None else self.S0_hat.tolist(),
            "orthogonality_defect": self.orthogonality_defect,
        }


def sysid_explicit(z_hats, us):
    """Least squares ``z_{t+1} ~ A z_t + B u_t``.

    ``z_hats`` has one more row than ``us``; row ``t`` of ``us`` pairs with
    rows ``t`` and ``t + 1`` of ``z_hats``.
    """
    Z = np.asarray(z_hats, dtype=float)
    U = np.asarray(us, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    if len(Z) != len(U) + 1:
        raise ArgumentError(f"expected {len(U) + 1} latent rows, got {len(Z)}")
    d_x = Z.shape[1]
    X = np.hstack([Z[:-1], U])
    W, deficient = matstat.least_squares(X, Z[1:])
    if deficient:
        warnings.warn("sysid_explicit: rank-deficient regressors, minimum-norm solution used",
                      RuntimeWarning, stacklevel=2)
    AB = W.T
    return AB[:, :d_x], AB[:, d_x:]


def next_cost_regression(hu, cbar_next):
    """Quadratic regression of ``cbar_{t+1}`` on ``[h_t; u_t]``.

    Shares nothing with the representation regression, so the two may run
    in either order or concurrently.
    """
    return quadratic_regress(hu, cbar_next)


def cosysid(hu, cbar_next, h_next, M_hat, d_x=None, align=True, fit1=None):
    """Cost-driven identification of latent dynamics.

    Parameters
    ----------
    hu : ndarray, shape (n, d_h + d_u)
        Rows ``[h_t; u_t]``.
    cbar_next : ndarray, shape (n,)
        Next-step cumulative net costs ``cbar_{t+1}``.
    h_next : ndarray, shape (n, d_h)
        Next-step histories ``h_{t+1}``.
    M_hat : ndarray, shape (d_x, d_h)
        Representation map learned from the current-step regression.
    align : bool
        If False the alignment regression is skipped and ``(A_tilde, B_tilde)``
        are returned unaligned (used to exhibit coordinate misalignment).
    fit1 : QuadFit, optional
        Precomputed :func:`next_cost_regression` result.

    Returns
    -------
    A_hat, B_hat, trace
    """
    M_hat = np.asarray(M_hat, dtype=float)
    hu = np.asarray(hu, dtype=float)
    h_next = np.asarray(h_next, dtype=float)
    d_h = M_hat.shape[1]
    if d_x is None:
        d_x = M_hat.shape[0]
    if M_hat.shape[0] != d_x:
        raise ArgumentError(f"representation has {M_hat.shape[0]} rows, requested d_x={d_x}")
    if hu.shape[1] <= d_h or h_next.shape[1] != d_h:
        raise ArgumentError("hu / h_next widths disagree with the representation")

    fit = next_cost_regression(hu, cbar_next) if fit1 is None else fit1
    M1 = factor_psd(fit.N_hat, d_x).M_hat
    M_tilde, B_tilde = M1[:, :d_h], M1[:, d_h:]
    A_tilde = M_tilde @ matstat.pinv(M_hat, REPR_PINV_TOL)
    S0 = None
    if align:
        pred = hu @ M1.T
        target = h_next @ M_hat.T
        S0_T, _ = matstat.least_squares(pred, target, ALIGN_TOL)
        S0 = S0_T.T
        A_hat, B_hat = S0 @ A_tilde, S0 @ B_tilde
    else:
        A_hat, B_hat = A_tilde, B_tilde
    trace = CosysidTrace(N1_hat=fit.N_hat, b1_hat=fit.b_hat, M1_hat=M1, M_tilde=M_tilde,
                         B_tilde=B_tilde, A_tilde=A_tilde, S0_hat=S0)
    return A_hat, B_hat, trace


def learn_cost(z_hats, us, cs, R):
    """Fit the latent state cost ``Q_hat`` (PSD) and offset from per-step costs."""
    Z = np.asarray(z_hats, dtype=float)
    U = np.asarray(us, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if not len(Z) == len(U) == len(cs):
        raise ArgumentError("z_hats, us and cs must have equal length")
    net = np.asarray(cs, dtype=float) - np.einsum("ti,ij,tj->t", U, R, U)
    fit = quadratic_regress(Z, net)
    return matstat.psd_project(fit.N_hat), fit.b_hat
