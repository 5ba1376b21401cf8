"""Principal symbol ``P(xi, c) = sum_k xi_k A^k`` with ``(A^k)_ij = c_i^{kj}``.

Entries are

    p_ii = xi_i + sum_{k != i} c_i^{ki} xi_k,
    p_ij = sum_{k != j} c_i^{kj} xi_k        (i != j).

Minor naming: ``minor_det(P, i, j)`` deletes row ``i`` and column ``j``
(1-based).  Every routine here uses (row, col) order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDimension, NumericalFailure

DEFAULT_RANK_TOL = 1e-8


def coefficient_matrices(c):
    """Return the stack ``A[k, i, j] = c_{i}^{k j}`` (0-based), shape ``(n, n, n)``."""
    return np.ascontiguousarray(np.transpose(c.tensor, (1, 0, 2)))


@dataclass(frozen=True, eq=False)
class SymbolMatrix:
    n: int
    entries: np.ndarray
    params: object = None
    xi: np.ndarray = None

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def to_json(self):
        return {"n": self.n, "entries": self.entries.tolist(),
                "xi": None if self.xi is None else self.xi.tolist()}


@dataclass(frozen=True)
class RankCertificate:
    rank: int
    singular_values: tuple
    tol: float

    def to_json(self):
        return {"rank": self.rank, "singular_values": list(self.singular_values),
                "tol": self.tol}


def _as_xi(c, xi):
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if xi.size != c.n:
        raise InvalidDimension(f"covector has {xi.size} entries, parameters have n={c.n}")
    return xi


def symbol_array(c, xi):
    """Raw ndarray version of :func:`assemble`.  ``xi`` may be batched ``(..., n)``."""
    A = coefficient_matrices(c)
    return np.einsum("...k,kij->...ij", np.asarray(xi), A)


def assemble(c, xi):
    xi = _as_xi(c, xi)
    P = symbol_array(c, xi)
    P.setflags(write=False)
    xi = xi.copy()
    xi.setflags(write=False)
    return SymbolMatrix(c.n, P, c, xi)


def _mat(P):
    return np.asarray(P.entries if isinstance(P, SymbolMatrix) else P, dtype=float)


def det(P):
    """Determinant via LU with partial pivoting."""
    return float(np.linalg.det(_mat(P)))


def submatrix(M, i, j):
    """Delete row ``i`` and column ``j`` (1-based)."""
    M = np.asarray(M)
    n = M.shape[-1]
    if not (1 <= i <= n and 1 <= j <= n):
        raise IndexError(f"minor index ({i}, {j}) out of range for n={n}")
    rows = [r for r in range(n) if r != i - 1]
    cols = [s for s in range(n) if s != j - 1]
    return M[np.ix_(rows, cols)]


def minor_det(P, i, j):
    """``det`` of ``P`` with row ``i`` and column ``j`` removed."""
    return float(np.linalg.det(submatrix(_mat(P), i, j)))


def all_minors(P):
    """Array ``M[i-1, j-1] = minor_det(P, i, j)`` for every (row, col)."""
    M = _mat(P)
    n = M.shape[0]
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = np.linalg.det(np.delete(np.delete(M, i, 0), j, 1))
    return out


def rank(P, tol=DEFAULT_RANK_TOL):
    """SVD rank certificate: count of ``sigma_k > tol * sigma_1``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = _mat(P)
    try:
        s = np.linalg.svd(M, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge for {M.tolist()}") from exc
    r = 0 if s[0] == 0 else int(np.sum(s > tol * s[0]))
    return RankCertificate(r, tuple(float(x) for x in s), float(tol))


def adjugate(M):
    """Adjugate through the SVD, valid for singular and batched matrices.

    With ``M = U diag(s) V^T`` one has
    ``adj(M) = det(U) det(V) V diag(prod_{j != i} s_j) U^T``.
    """
    M = np.asarray(M)
    U, s, Vt = np.linalg.svd(M)
    n = s.shape[-1]
    prods = np.empty_like(s)
    for i in range(n):
        prods[..., i] = np.prod(np.delete(s, i, axis=-1), axis=-1)
    sign = np.linalg.det(U) * np.linalg.det(Vt)
    adj = np.einsum("...ji,...j,...kj->...ik", Vt, prods, U)
    return adj * sign[..., None, None]


def grad_det(c, xi):
    """Gradient of ``xi -> det P(xi, c)``: ``d_k det = sum_ij adj(P)_ji A^k_ij``."""
    xi = _as_xi(c, xi)
    A = coefficient_matrices(c)
    adj = adjugate(symbol_array(c, xi))
    return np.einsum("ji,kij->k", adj, A)


def b_matrix(c, xi):
    """``b_ij = sum_{k != j} c_i^{kj} xi_k`` including the diagonal."""
    xi = _as_xi(c, xi)
    C = np.array(c.tensor)
    n = c.n
    for j in range(n):
        C[:, j, j] = 0.0
    return np.einsum("ikj,k->ij", C, xi)


def matrix_scale(c):
    """``max_k ||A^k||_2``, the natural size of ``P`` per unit covector."""
    A = coefficient_matrices(c)
    return float(max(np.linalg.norm(Ak, 2) for Ak in A))
