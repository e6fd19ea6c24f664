"""Symmetric eigendecomposition (cyclic Jacobi) and matrix powers.

The matrices here are small risk-set covariances (p rarely above 10), so a
deterministic cyclic Jacobi sweep is accurate and cheap.  Square roots and
inverse square roots go through the eigendecomposition, with eigenvalues in
(-1e-12, 0) clamped to zero.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import SingularMatrix

PD_RTOL = 1e-10       # smallest eigenvalue must exceed PD_RTOL * (1 + largest)
CLAMP_TOL = 1e-12     # eigenvalues in (-CLAMP_TOL, 0) are treated as exact zeros


def is_positive_definite(eigvals) -> bool:
    eigvals = np.asarray(eigvals, dtype=float)
    return float(eigvals.min()) > PD_RTOL * (1.0 + float(eigvals.max()))


def jacobi_eigh(a: np.ndarray, max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix.

    Cyclic-by-row Jacobi rotations; sweeps stop once the off-diagonal norm
    falls below 1e-14 relative to the matrix scale.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("square matrix required")
    if n == 1:
        return a[0].copy(), np.ones((1, 1))
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    scale = max(1.0, float(np.abs(a).max()))
    stop = 1e-14 * scale
    for _ in range(max_sweeps):
        off = math.sqrt(float((a * a).sum() - (np.diag(a) ** 2).sum()))
        if off <= stop:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                phi = 0.5 * math.atan2(2.0 * apq, a[q, q] - a[p, p])
                c, s = math.cos(phi), math.sin(phi)
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                a[p, q] = a[q, p] = 0.0
                rot_p = c * v[:, p] - s * v[:, q]
                rot_q = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = rot_p, rot_q
    eigvals = np.diag(a).copy()
    idx = np.argsort(eigvals, kind="stable")
    return eigvals[idx], v[:, idx]


def _clamped(eigvals: np.ndarray) -> np.ndarray:
    scale = max(1.0, float(eigvals.max(initial=0.0)))
    lam = eigvals.copy()
    small_negative = (lam > -CLAMP_TOL * scale) & (lam < 0.0)
    lam[small_negative] = 0.0
    if lam.min(initial=0.0) < 0.0:
        raise ValueError("matrix is not positive semidefinite")
    return lam


def sym_matrix_power(m: np.ndarray, x: float) -> np.ndarray:
    """V^x for a symmetric PSD matrix, x in {-1/2, +1/2}.

    Raises SingularMatrix for x = -1/2 on a rank-deficient input.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim == 0 or m.size == 1:
        m = m.reshape(1, 1)
    eigvals, vec = jacobi_eigh(m)
    if x == 0.5:
        d = np.sqrt(_clamped(eigvals))
    elif x == -0.5:
        if not is_positive_definite(eigvals):
            raise SingularMatrix("inverse square root of a rank-deficient matrix")
        d = 1.0 / np.sqrt(eigvals)
    else:
        raise ValueError("power must be -1/2 or +1/2")
    out = (vec * d) @ vec.T
    return 0.5 * (out + out.T)
