"""Cost-driven representation learning.

Cumulative costs are regressed on the quadratic lift of histories; the
resulting symmetric matrix is factored into a low-rank representation map.
"""

from dataclasses import dataclass

import numpy as np

from . import matstat
from .exceptions import ArgumentError

GRAM_CUTOFF = 1e-12


@dataclass(eq=False)
class QuadFit:
    N_hat: np.ndarray
    b_hat: float
    gram_min_eig: float
    rank_flag: bool
    n_samples: int

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        return np.einsum("ti,ij,tj->t", X, self.N_hat, X) + self.b_hat


@dataclass(eq=False)
class Representation:
    M_hat: np.ndarray
    eigvals: np.ndarray
    d_x_used: int

    def to_dict(self):
        return {
            "M_hat": self.M_hat.tolist(),
            "eigvals": self.eigvals.tolist(),
            "d_x_used": int(self.d_x_used),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            M_hat=np.asarray(data["M_hat"], dtype=float).reshape(int(data["d_x_used"]), -1),
            eigvals=np.asarray(data["eigvals"], dtype=float),
            d_x_used=int(data["d_x_used"]),
        )


def lifted_gram(X, targets=None, chunk=4096):
    """Gram matrix of ``[svec(x x^T), 1]`` rows, accumulated block by block.

    Returns ``(G, rhs)`` where ``rhs`` is ``F^T targets`` (None if no targets).
    Blocks are reduced in fixed order, so results do not depend on ``chunk``
    beyond floating-point summation order.
    """
    X = np.asarray(X, dtype=float)
    p = X.shape[1] * (X.shape[1] + 1) // 2 + 1
    G = np.zeros((p, p))
    rhs = None if targets is None else np.zeros(p)
    for start in range(0, len(X), chunk):
        block = X[start : start + chunk]
        F = np.hstack([matstat.lift_quadratic(block), np.ones((len(block), 1))])
        G += F.T @ F
        if targets is not None:
            rhs += F.T @ targets[start : start + chunk]
    return matstat.symmetrize(G), rhs


def gram_min_eigenvalue(G, n_samples):
    """``lambda_min`` of an accumulated Gram matrix (exactly 0 when underdetermined)."""
    if n_samples < G.shape[0]:
        return 0.0
    return max(float(np.linalg.eigvalsh(G)[0]), 0.0)


def quadratic_regress(covariates, targets):
    """Least-squares fit of ``target_t ~ x_t^T N x_t + b`` over symmetric ``N``.

    Solved through the pseudo-inverse of the lifted normal equations, so an
    underdetermined problem returns the minimum-norm coefficients and sets
    ``rank_flag``.
    """
    X = np.asarray(covariates, dtype=float)
    y = np.asarray(targets, dtype=float).ravel()
    if X.ndim != 2:
        raise ArgumentError("covariates must be a 2-D array")
    if len(X) == 0:
        raise ArgumentError("quadratic_regress needs at least one sample")
    if len(X) != len(y):
        raise ArgumentError(f"{len(X)} covariate rows but {len(y)} targets")
    G, rhs = lifted_gram(X, y)
    values, vectors = np.linalg.eigh(G)
    keep = values > GRAM_CUTOFF * max(values[-1], 0.0)
    coef = vectors[:, keep] @ ((vectors[:, keep].T @ rhs) / values[keep])
    lam_min = 0.0 if len(X) < G.shape[0] else max(float(values[0]), 0.0)
    return QuadFit(
        N_hat=matstat.smat(coef[:-1]),
        b_hat=float(coef[-1]),
        gram_min_eig=lam_min / len(X),
        rank_flag=bool(not keep.all()),
        n_samples=len(X),
    )


def discover_rank(eigvals, threshold_ratio=1e-2):
    """Number of eigenvalues above ``threshold_ratio`` times the largest one."""
    eigvals = np.asarray(eigvals, dtype=float).ravel()
    if eigvals.size == 0:
        raise ArgumentError("empty eigenvalue list")
    if not 0.0 < threshold_ratio < 1.0:
        raise ArgumentError("threshold_ratio must lie in (0, 1)")
    top = eigvals.max()
    if top <= 0.0:
        return 0
    return int(np.sum(eigvals > threshold_ratio * top))


def factor_psd(N_hat, d_x):
    """Best Frobenius factorization ``M^T M ~ N_hat`` with ``M`` of ``d_x`` rows.

    ``M = max(Lambda_dx, 0)^{1/2} U_dx^T`` from the descending eigenpairs.
    """
    N_hat = np.asarray(N_hat, dtype=float)
    if d_x > N_hat.shape[0]:
        raise ArgumentError(f"d_x={d_x} exceeds the matrix size {N_hat.shape[0]}")
    if d_x < 0:
        raise ArgumentError("d_x must be nonnegative")
    eig = matstat.sym_eig(N_hat)
    top = np.sqrt(np.clip(eig.values[:d_x], 0.0, None))
    M = top[:, None] * eig.vectors[:, :d_x].T
    return Representation(M_hat=M, eigvals=eig.values, d_x_used=int(d_x))


def encode(M_hat, h):
    """Latent state(s) ``M_hat h``; ``h`` may be a single vector or rows."""
    M_hat = np.asarray(M_hat, dtype=float)
    h = np.asarray(h, dtype=float)
    if h.shape[-1] != M_hat.shape[1]:
        raise ArgumentError(f"history length {h.shape[-1]} != representation width {M_hat.shape[1]}")
    return h @ M_hat.T
