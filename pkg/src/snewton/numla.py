"""Dense complex linear algebra: SVD rank splits, solves, kernels.

Thin contracts over numpy.linalg.  Everything the refinement and dual-space
code relies on numerically is pinned here: how a tolerance splits a spectrum,
when a solve refuses a near-singular matrix, and how kernel bases are
extracted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SvdSplit",
    "SingularMatrixError",
    "split_svd",
    "solve",
    "least_squares",
    "kernel_basis",
    "singular_values",
    "smallest_singular_value",
    "cond",
]


class SingularMatrixError(np.linalg.LinAlgError):
    """Matrix is singular to working precision."""


@dataclass(frozen=True)
class SvdSplit:
    """Tolerance-tau partition of a square matrix's SVD.

    Columns of U1/V1 pair with singular values above tau (sigma1), columns of
    U2/V2 with those at or below tau (sigma2).  ``kappa`` is the detected
    corank, i.e. the number of singular values <= tau.
    """

    u1: np.ndarray
    u2: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray
    kappa: int
    tol: float

    @property
    def n(self) -> int:
        return self.u1.shape[0]

    @property
    def u(self) -> np.ndarray:
        return np.hstack([self.u1, self.u2])

    @property
    def v(self) -> np.ndarray:
        return np.hstack([self.v1, self.v2])

    @property
    def sigma(self) -> np.ndarray:
        return np.concatenate([self.sigma1, self.sigma2])

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.conj().T


def split_svd(matrix: np.ndarray, tol: float) -> SvdSplit:
    """SVD of a square matrix partitioned at ``tol``.

    The corank is the count of singular values <= tol (all of them when the
    whole spectrum sits at or below tol, none when it sits above).
    """
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"split_svd needs a square matrix, got shape {m.shape}")
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    n = m.shape[0]
    u, s, vh = np.linalg.svd(m)
    v = vh.conj().T
    rank = int(np.sum(s > tol))
    kappa = n - rank
    return SvdSplit(
        u1=u[:, :rank],
        u2=u[:, rank:],
        v1=v[:, :rank],
        v2=v[:, rank:],
        sigma1=s[:rank],
        sigma2=s[rank:],
        kappa=kappa,
        tol=float(tol),
    )


def solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve a square linear system via SVD.

    Raises SingularMatrixError when the smallest singular value is below
    1e-12 times the largest (or the matrix is exactly zero).
    """
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"solve needs a square matrix, got shape {m.shape}")
    rhs = np.asarray(rhs, dtype=complex).reshape(-1)
    if rhs.shape[0] != m.shape[0]:
        raise ValueError("right-hand side length does not match the matrix")
    u, s, vh = np.linalg.svd(m)
    if s[0] == 0 or s[-1] < 1e-12 * s[0]:
        raise SingularMatrixError(
            f"matrix is singular to working precision (sigma_min={s[-1]:.3e}, "
            f"sigma_max={s[0]:.3e})"
        )
    return vh.conj().T @ ((u.conj().T @ rhs) / s)


def least_squares(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares solution of ``matrix @ y ~ rhs``."""
    m = np.asarray(matrix, dtype=complex)
    rhs = np.asarray(rhs, dtype=complex).reshape(-1)
    if rhs.shape[0] != m.shape[0]:
        raise ValueError("right-hand side length does not match the matrix")
    y, *_ = np.linalg.lstsq(m, rhs, rcond=None)
    return y


def kernel_basis(matrix: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis of the right singular subspace for sigma <= tol.

    Returns an (n, d) matrix; d = 0 means full numerical rank.  Singular
    values missing from a wide/tall factorization count as zero.
    """
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2:
        raise ValueError("kernel_basis needs a matrix")
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    n = m.shape[1]
    if m.shape[0] == 0 or not m.any():
        return np.eye(n, dtype=complex)
    _, s, vh = np.linalg.svd(m)
    rank = int(np.sum(s > tol))
    return vh.conj().T[:, rank:]


def singular_values(matrix: np.ndarray) -> np.ndarray:
    m = np.asarray(matrix, dtype=complex)
    if m.size == 0:
        raise ValueError("empty matrix has no singular values")
    return np.linalg.svd(m, compute_uv=False)


def smallest_singular_value(matrix: np.ndarray) -> float:
    return float(singular_values(matrix)[-1])


def cond(matrix: np.ndarray) -> float:
    """Spectral condition number; inf when singular to machine precision."""
    s = singular_values(matrix)
    if s[-1] == 0:
        return float("inf")
    return float(s[0] / s[-1])
