"""Lattice codes and basis manipulation: Construction A, LLL, HNF, sparsity index.

Unimodular bookkeeping is done with exact arbitrary-precision integers
(numpy object arrays of Python ints), so T @ T_inv == I holds exactly and
the reduced basis generates the same integer lattice as the input.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, RankDeficient, SingularDiagonal


def _int_matrix(M):
    """Copy into an object-dtype array of Python ints; rejects non-integers."""
    M = np.asarray(M)
    out = np.empty(M.shape, dtype=object)
    flat_in, flat_out = M.reshape(-1), out.reshape(-1)
    for i, v in enumerate(flat_in):
        iv = int(v)
        if iv != v:
            raise DimensionMismatch(f"non-integer entry {v!r}")
        flat_out[i] = iv
    return out


def _int_eye(n):
    out = np.zeros((n, n), dtype=object)
    for i in range(n):
        out[i, i] = 1
    return out


def int_det(M):
    """Exact determinant of a square integer matrix (fraction-free Bareiss)."""
    A = [[int(v) for v in row] for row in np.asarray(M, dtype=object)]
    n = len(A)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if A[k][k] == 0:
            for r in range(k + 1, n):
                if A[r][k] != 0:
                    A[k], A[r] = A[r], A[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[n - 1][n - 1]


def is_unimodular(T):
    """True iff the integer matrix has determinant +-1."""
    T = np.asarray(T)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        return False
    return abs(int_det(T)) == 1


@dataclass
class UnimodularRecord:
    """Exact integer change-of-basis pair with T @ T_inv == I."""

    T: np.ndarray
    T_inv: np.ndarray

    @classmethod
    def identity(cls, n):
        return cls(_int_eye(n), _int_eye(n))

    def compose_left(self, other):
        """Record for applying `self` after `other`: total T = self.T @ other.T."""
        return UnimodularRecord(self.T @ other.T, other.T_inv @ self.T_inv)

    def verify(self):
        n = self.T.shape[0]
        return bool(np.array_equal(self.T @ self.T_inv, _int_eye(n)))


@dataclass
class InfoSet:
    """Constraint set for the integer labels of a lattice code.

    kind is one of "hypercube" (labels in {0..q-1}^m), "unconstrained"
    (all of Z^m, i.e. lattice decoding), or "explicit" (enumerated label
    list, for oracles and small coded systems).
    """

    kind: str
    q: int | None = None
    labels: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("hypercube", "unconstrained", "explicit"):
            raise ValueError(f"unknown info set kind {self.kind!r}")
        if self.kind == "hypercube" and (self.q is None or self.q < 2):
            raise ValueError("hypercube info set needs q >= 2")
        if self.kind == "explicit" and self.labels is None:
            raise ValueError("explicit info set needs a label array")

    def contains(self, x):
        x = np.asarray(x)
        if self.kind == "unconstrained":
            return True
        if self.kind == "hypercube":
            return bool(np.all(x >= 0) and np.all(x < self.q))
        return any(np.array_equal(x, row) for row in self.labels)

    def size(self, dim):
        if self.kind == "hypercube":
            return self.q**dim
        if self.kind == "explicit":
            return len(self.labels)
        return None


@dataclass
class LatticeCode:
    """A translated lattice restricted to an information set.

    Codewords are generator @ x for integer labels x; the channel input is
    codeword + translate.
    """

    generator: np.ndarray
    translate: np.ndarray
    info_set: InfoSet = field(default_factory=lambda: InfoSet("unconstrained"))

    def __post_init__(self):
        self.generator = np.asarray(self.generator, dtype=float)
        self.translate = np.asarray(self.translate, dtype=float)
        m = self.generator.shape[0]
        if self.generator.shape != (m, m) or self.translate.shape != (m,):
            raise DimensionMismatch("generator must be square, translate length m")

    @property
    def dim(self):
        return self.generator.shape[0]


def construction_a(P, q):
    """Lift a systematic mod-q code [I; P] to the integer lattice basis [[I,0],[P,qI]].

    P is the (m-k) x k parity block with entries in {0..q-1}; an empty P
    (k == m) yields the identity.
    """
    P = np.atleast_2d(np.asarray(P, dtype=int))
    if P.size == 0:
        k = P.shape[1] if P.ndim == 2 else 0
        return np.eye(k, dtype=int)
    if np.any(P < 0) or np.any(P >= q):
        raise DimensionMismatch("P entries must lie in {0..q-1}")
    r, k = P.shape
    m = r + k
    G = np.zeros((m, m), dtype=int)
    G[:k, :k] = np.eye(k, dtype=int)
    G[k:, :k] = P
    G[k:, k:] = q * np.eye(r, dtype=int)
    return G


def sparsity_index(R):
    """Max over rows of off-diagonal row energy divided by the squared diagonal."""
    R = np.asarray(R, dtype=float)
    n = R.shape[0]
    if R.shape != (n, n):
        raise DimensionMismatch("R must be square")
    d = np.diag(R)
    if np.any(d == 0.0):
        raise SingularDiagonal("zero diagonal entry")
    worst = 0.0
    for i in range(n):
        off = R[i, i + 1:]
        worst = max(worst, float(off @ off) / float(d[i] * d[i]))
    return worst


def _gso(B):
    """Gram-Schmidt data for the columns of B: coefficient matrix mu and
    squared norms of the orthogonalized vectors."""
    n = B.shape[1]
    mu = np.zeros((n, n))
    Bstar = np.zeros_like(B)
    norms = np.zeros(n)
    for i in range(n):
        v = B[:, i].copy()
        for j in range(i):
            if norms[j] == 0.0:
                raise RankDeficient("rank-deficient basis")
            mu[i, j] = (B[:, i] @ Bstar[:, j]) / norms[j]
            v -= mu[i, j] * Bstar[:, j]
        Bstar[:, i] = v
        norms[i] = v @ v
        if norms[i] <= 0.0:
            raise RankDeficient("rank-deficient basis")
    return mu, norms


def lll_reduce(B, delta=0.99, deep=False):
    """LLL-reduce the columns of B, optionally with deep insertions.

    Returns (B_reduced, record) where B_reduced == B @ record.T_inv spans
    the same lattice and record.T undoes the change of basis
    (B == B_reduced @ record.T up to float rounding).
    """
    if not 0.25 < delta <= 1.0:
        raise ValueError("delta must lie in (0.25, 1]")
    B = np.asarray(B, dtype=float).copy()
    n = B.shape[1]
    T = _int_eye(n)       # reduced -> original coordinates
    Tinv = _int_eye(n)    # original -> reduced coordinates
    mu, norms = _gso(B)

    def size_reduce(k, j):
        q = round(mu[k, j])
        if q != 0:
            B[:, k] -= q * B[:, j]
            Tinv[:, k] -= q * Tinv[:, j]
            T[j, :] += q * T[k, :]
            mu[k, :j] -= q * mu[j, :j]
            mu[k, j] -= q

    def swap_update(k):
        # O(n) Gram-Schmidt update for swapping columns k-1 and k
        mu_k = mu[k, k - 1]
        b_new = norms[k] + mu_k * mu_k * norms[k - 1]
        mu_prime = mu_k * norms[k - 1] / b_new
        norms[k] = norms[k - 1] * norms[k] / b_new
        norms[k - 1] = b_new
        mu[[k - 1, k], : k - 1] = mu[[k, k - 1], : k - 1]
        for i in range(k + 1, n):
            t = mu[i, k]
            mu[i, k] = mu[i, k - 1] - mu_k * t
            mu[i, k - 1] = t + mu_prime * mu[i, k]
        mu[k, k - 1] = mu_prime

    k = 1
    while k < n:
        for j in range(k - 1, -1, -1):
            size_reduce(k, j)
        if deep:
            # Deep insertion: move column k to the first position i where it
            # would shorten the orthogonalized vector by the delta margin.
            c = float(B[:, k] @ B[:, k])
            inserted = False
            for i in range(k):
                if delta * norms[i] <= c:
                    c -= mu[k, i] ** 2 * norms[i]
                else:
                    col = B[:, k].copy()
                    B[:, i + 1: k + 1] = B[:, i:k]
                    B[:, i] = col
                    ticol = Tinv[:, k].copy()
                    Tinv[:, i + 1: k + 1] = Tinv[:, i:k]
                    Tinv[:, i] = ticol
                    trow = T[k, :].copy()
                    T[i + 1: k + 1, :] = T[i:k, :]
                    T[i, :] = trow
                    mu, norms = _gso(B)
                    k = max(i, 1)
                    inserted = True
                    break
            if inserted:
                continue
            k += 1
        else:
            if norms[k] >= (delta - mu[k, k - 1] ** 2) * norms[k - 1]:
                k += 1
            else:
                B[:, [k - 1, k]] = B[:, [k, k - 1]]
                Tinv[:, [k - 1, k]] = Tinv[:, [k, k - 1]]
                T[[k - 1, k], :] = T[[k, k - 1], :]
                swap_update(k)
                k = max(k - 1, 1)
    return B, UnimodularRecord(T=T, T_inv=Tinv)


def hnf_transform(A):
    """Column-reduce an integer matrix to upper-triangular form with a
    dominant diagonal: A == R @ T with T unimodular and
    r[i,i] > r[i,j] >= 0 for j > i.  Exact integer arithmetic throughout.
    """
    A = _int_matrix(A)
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionMismatch("A must be square")
    R = A.copy()
    T = _int_eye(n)       # R @ T == A
    Tinv = _int_eye(n)    # A @ Tinv == R

    def col_op(dst, src, q):
        # column dst -= q * column src, mirrored on the records
        R[:, dst] -= q * R[:, src]
        Tinv[:, dst] -= q * Tinv[:, src]
        T[src, :] += q * T[dst, :]

    def col_swap(a, b):
        R[:, [a, b]] = R[:, [b, a]]
        Tinv[:, [a, b]] = Tinv[:, [b, a]]
        T[[a, b], :] = T[[b, a], :]

    for i in range(n - 1, -1, -1):
        # Euclidean elimination of entries left of the diagonal in row i.
        while True:
            nz = [j for j in range(i) if R[i, j] != 0]
            if not nz:
                break
            j = min(nz + [i], key=lambda c: abs(R[i, c]) if R[i, c] != 0 else 1 << 62)
            if j != i:
                col_swap(i, j)
            for c in range(i):
                if R[i, c] != 0:
                    col_op(c, i, R[i, c] // R[i, i])
        if R[i, i] == 0:
            raise RankDeficient("zero diagonal during HNF reduction")
        if R[i, i] < 0:
            R[:, i] = -R[:, i]
            Tinv[:, i] = -Tinv[:, i]
            T[i, :] = -T[i, :]
    # Normalize entries right of each diagonal into [0, r_ii).
    for i in range(n - 1, -1, -1):
        for j in range(i + 1, n):
            q = R[i, j] // R[i, i]
            if q != 0:
                col_op(j, i, q)
    return R.astype(object), UnimodularRecord(T=T, T_inv=Tinv)
