"""Dense real linear algebra primitives: QR, triangular solves, complex embedding.

Matrices are plain numpy arrays (float64, row-major); complex inputs are
numpy complex128 arrays.  All functions are pure.
"""

import numpy as np

from .errors import RankDeficient, SingularDiagonal

QR_TOL = 1e-10  # relative rank threshold on the R diagonal


def qr_decompose(A):
    """Thin QR factorization with a strictly positive R diagonal.

    Requires rows >= cols and full numerical column rank.  The positive
    diagonal fixes the sign ambiguity, so the factorization is unique.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] < A.shape[1]:
        raise RankDeficient(f"need rows >= cols, got shape {A.shape}")
    Q, R = np.linalg.qr(A, mode="reduced")
    signs = np.sign(np.diag(R))
    signs[signs == 0.0] = 1.0
    Q = Q * signs[np.newaxis, :]
    R = R * signs[:, np.newaxis]
    col_norms = np.linalg.norm(A, axis=0)
    scale = col_norms.max() if col_norms.size else 0.0
    if scale == 0.0 or np.abs(np.diag(R)).min() < QR_TOL * scale:
        raise RankDeficient("R diagonal below rank tolerance")
    return Q, R


def back_substitute(R, y):
    """Solve R x = y for square upper-triangular R."""
    R = np.asarray(R, dtype=float)
    y = np.asarray(y, dtype=float)
    n = R.shape[0]
    if R.shape != (n, n) or y.shape != (n,):
        raise SingularDiagonal(f"incompatible shapes {R.shape}, {y.shape}")
    if np.any(np.diag(R) == 0.0):
        raise SingularDiagonal("zero entry on the diagonal")
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - R[i, i + 1:] @ x[i + 1:]) / R[i, i]
    return x


def complex_to_real_matrix(M):
    """Embed a complex matrix as the 2x2-block real matrix [[Re,-Im],[Im,Re]]."""
    M = np.asarray(M, dtype=complex)
    return np.block([[M.real, -M.imag], [M.imag, M.real]])


def complex_to_real_vector(u):
    """Stack real over imaginary parts: u -> [Re(u); Im(u)]."""
    u = np.asarray(u, dtype=complex)
    return np.concatenate([u.real, u.imag])
