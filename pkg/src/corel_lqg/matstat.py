"""Dense linear-algebra and sampling kernels.

Everything here works on plain ``numpy`` arrays. Symmetric matrices are
packed with the isometric ``svec`` convention (off-diagonal entries scaled by
``sqrt(2)``), so that ``svec(X) @ svec(Y) == trace(X @ Y)``.
"""

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .exceptions import ArgumentError, InstabilityError

SQRT2 = np.sqrt(2.0)


class SymEig(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray


def _as_matrix(m, name="matrix"):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ArgumentError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ArgumentError(f"{name} has non-finite entries")
    return m


def _as_square(m, name="matrix"):
    m = _as_matrix(m, name)
    if m.shape[0] != m.shape[1]:
        raise ArgumentError(f"{name} must be square, got shape {m.shape}")
    return m


def symmetrize(s):
    s = np.asarray(s, dtype=float)
    return 0.5 * (s + s.T)


def _check_symmetric(s, name="matrix", tol=1e-9):
    s = _as_square(s, name)
    scale = 1.0 + np.abs(s).max(initial=0.0)
    if np.abs(s - s.T).max(initial=0.0) > tol * scale:
        raise ArgumentError(f"{name} is not symmetric")
    return symmetrize(s)


def _triu(d):
    rows, cols = np.triu_indices(d)
    scale = np.where(rows == cols, 1.0, SQRT2)
    return rows, cols, scale


def triangular_root(n):
    """Return ``d`` with ``d * (d + 1) / 2 == n`` or raise."""
    d = int(round((np.sqrt(8 * n + 1) - 1) / 2))
    if d * (d + 1) // 2 != n:
        raise ArgumentError(f"length {n} is not a triangular number")
    return d


def svec(s):
    """Pack a symmetric matrix into its isometric upper-triangle vector."""
    s = _check_symmetric(s, "svec input")
    rows, cols, scale = _triu(s.shape[0])
    return s[rows, cols] * scale


def smat(v):
    """Inverse of :func:`svec`."""
    v = np.asarray(v, dtype=float).ravel()
    d = triangular_root(v.size)
    rows, cols, scale = _triu(d)
    out = np.zeros((d, d))
    out[rows, cols] = v / scale
    out[cols, rows] = v / scale
    return out


def lift_quadratic(X):
    """Row-wise ``svec(x x^T)`` for a batch of vectors ``X`` (n x d).

    Satisfies ``lift_quadratic(X) @ svec(N) == einsum('ti,ij,tj->t', X, N, X)``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ArgumentError(f"expected a 2-D batch, got shape {X.shape}")
    rows, cols, scale = _triu(X.shape[1])
    return X[:, rows] * X[:, cols] * scale


def sym_eig(s):
    """Symmetric eigendecomposition with eigenvalues sorted descending.

    Ties keep their original index order (stable sort).
    """
    s = _check_symmetric(s, "sym_eig input")
    values, vectors = np.linalg.eigh(s)
    order = np.argsort(-values, kind="stable")
    return SymEig(values[order], vectors[:, order])


def psd_sqrt(s, inverse=False):
    """Symmetric square root (or inverse square root) of a PSD matrix."""
    values, vectors = sym_eig(s)
    values = np.clip(values, 0.0, None)
    if inverse:
        if values.min(initial=np.inf) <= 0.0:
            raise ArgumentError("inverse square root of a singular matrix")
        values = 1.0 / values
    return (vectors * np.sqrt(values)) @ vectors.T


def psd_project(s):
    """Truncate negative eigenvalues of a symmetric matrix to zero."""
    values, vectors = sym_eig(s)
    return symmetrize((vectors * np.clip(values, 0.0, None)) @ vectors.T)


def pinv(m, tol=1e-10):
    """Moore-Penrose pseudo-inverse with relative singular-value cutoff."""
    if not 0.0 < tol < 1.0:
        raise ArgumentError("tol must lie in (0, 1)")
    m = _as_matrix(m)
    if m.size == 0:
        return np.zeros(m.shape[::-1])
    return np.linalg.pinv(m, rcond=tol)


def least_squares(X, Y, tol=1e-10):
    """Minimum-norm solution of ``min_W ||X W - Y||_F``.

    Returns
    -------
    W : ndarray, shape (p, q)
    rank_deficient : bool
        True when the smallest singular value of ``X`` fell below
        ``tol * sigma_max`` (including the case of fewer rows than columns).
    """
    X = _as_matrix(X, "X")
    Y = np.asarray(Y, dtype=float)
    vector_target = Y.ndim == 1
    if vector_target:
        Y = Y[:, None]
    Y = _as_matrix(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise ArgumentError(f"row mismatch: X has {X.shape[0]}, Y has {Y.shape[0]}")
    if X.shape[0] < 1:
        raise ArgumentError("least_squares needs at least one row")
    W, _, rank, _ = np.linalg.lstsq(X, Y, rcond=tol)
    rank_deficient = bool(rank < X.shape[1])
    return (W[:, 0] if vector_target else W), rank_deficient


def spectral_radius(m):
    m = _as_square(m)
    if m.size == 0:
        return 0.0
    return float(np.abs(np.linalg.eigvals(m)).max())


def solve_lyapunov(A, W, direct_max=40):
    """Stationary covariance ``S = A S A^T + W`` for stable ``A``.

    Delegates to :func:`scipy.linalg.solve_discrete_lyapunov`: a direct
    Kronecker solve for ``n <= direct_max``, the bilinear transformation to a
    continuous Lyapunov equation above.
    """
    A = _as_square(A, "A")
    W = _check_symmetric(W, "W")
    n = A.shape[0]
    if W.shape != (n, n):
        raise ArgumentError("A and W shapes disagree")
    rho = spectral_radius(A)
    if rho >= 1.0 - 1e-6:
        raise InstabilityError(f"solve_lyapunov needs rho(A) < 1, got {rho:.6g}", rho)
    method = "direct" if n <= direct_max else "bilinear"
    return symmetrize(scipy.linalg.solve_discrete_lyapunov(A, W, method=method))


def gaussian_factor(cov, cutoff=-1e-10):
    """Factor ``F`` with ``F F^T = cov`` (eigenvalues above ``cutoff`` clamped)."""
    cov = _check_symmetric(cov, "cov")
    if cov.size == 0:
        return cov
    values, vectors = sym_eig(cov)
    scale = max(1.0, float(np.abs(values).max()))
    if values.min() < cutoff * scale:
        raise ArgumentError(f"covariance is indefinite (min eigenvalue {values.min():.3g})")
    return vectors * np.sqrt(np.clip(values, 0.0, None))


def gaussian_sample(rng, mean, cov, size=None):
    """Draw from ``N(mean, cov)``; ``size`` adds a leading batch dimension."""
    mean = np.asarray(mean, dtype=float).ravel()
    F = gaussian_factor(cov)
    if F.shape[0] != mean.size:
        raise ArgumentError("mean and cov dimensions disagree")
    if size is None:
        return mean + F @ rng.standard_normal(mean.size)
    return mean + rng.standard_normal((size, mean.size)) @ F.T
