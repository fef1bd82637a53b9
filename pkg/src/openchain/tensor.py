"""Dense complex linear algebra used throughout the workbench.

All routines work in complex double precision on plain :class:`numpy.ndarray`
values.  Left eigenvectors are defined through the *bilinear* pairing
``left @ M == value * left`` (transpose, no conjugation) because every bra in
the algebraic construction is an algebraic dual rather than a Hermitian
conjugate.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.linalg

from .errors import (
    ConvergenceError,
    DegenerateError,
    DimensionError,
    RankDeficiencyError,
)

DEFAULT_MAX_DIM = 1024


def max_dim() -> int:
    """Hilbert-space dimension cap; ``WORKBENCH_MAX_DIM`` overrides the default."""
    env = os.environ.get("WORKBENCH_MAX_DIM")
    if env is None:
        return DEFAULT_MAX_DIM
    try:
        value = int(env)
    except ValueError as exc:
        raise DimensionError(f"WORKBENCH_MAX_DIM={env!r} is not an integer") from exc
    if value < 1:
        raise DimensionError(f"WORKBENCH_MAX_DIM must be positive, got {value}")
    return value


def kron(a: np.ndarray, b: np.ndarray, *, limit: int | None = None) -> np.ndarray:
    """Kronecker product ``a ⊗ b`` with a size guard.

    ``limit`` caps the row/column dimension of the result; it defaults to
    four times :func:`max_dim` so that auxiliary-times-quantum operators fit.
    """
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    b = np.atleast_2d(np.asarray(b, dtype=complex))
    limit = 4 * max_dim() if limit is None else limit
    rows, cols = a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]
    if max(rows, cols) > limit:
        raise DimensionError(f"kron result {rows}x{cols} exceeds dimension cap {limit}")
    return np.kron(a, b)


def kron_all(*factors: np.ndarray) -> np.ndarray:
    return reduce(kron, factors, np.ones((1, 1), dtype=complex))


def embed_site(op: np.ndarray, n: int, N: int, d: int) -> np.ndarray:
    """Place a ``d×d`` operator on site ``n`` (1-based) of an ``N``-site chain."""
    op = np.asarray(op, dtype=complex)
    if op.shape != (d, d):
        raise DimensionError(f"operator shape {op.shape} does not match local dim {d}")
    if not 1 <= n <= N:
        raise DimensionError(f"site index {n} outside 1..{N}")
    if d**N > max_dim():
        raise DimensionError(f"Hilbert dimension {d}**{N} exceeds cap {max_dim()}")
    left = np.eye(d ** (n - 1), dtype=complex)
    right = np.eye(d ** (N - n), dtype=complex)
    return np.kron(np.kron(left, op), right)


def embed_pair(op: np.ndarray, i: int, j: int, dims: list[int]) -> np.ndarray:
    """Embed an operator on factors ``i`` and ``j`` (0-based) of ``⊗ dims``.

    ``op`` acts on ``V_i ⊗ V_j`` in that order (``V_i`` is the slow index),
    regardless of whether ``i < j``.
    """
    n = len(dims)
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise DimensionError(f"invalid factor pair ({i}, {j}) for {n} factors")
    di, dj = dims[i], dims[j]
    op = np.asarray(op, dtype=complex)
    if op.shape != (di * dj, di * dj):
        raise DimensionError(f"operator shape {op.shape} does not match {di}x{dj}")
    total = int(np.prod(dims))
    tensor = op.reshape(di, dj, di, dj)
    ident = np.eye(total, dtype=complex).reshape(list(dims) + [total])
    # contract the input legs of `op` with factors i, j of the identity
    moved = np.moveaxis(ident, (i, j), (0, 1))
    out = np.tensordot(tensor, moved, axes=([2, 3], [0, 1]))
    out = np.moveaxis(out, (0, 1), (i, j))
    return out.reshape(total, total)


def permutation(d1: int, d2: int) -> np.ndarray:
    """Swap operator ``V_1 ⊗ V_2 → V_2 ⊗ V_1``; the usual ``P`` when ``d1 == d2``."""
    P = np.zeros((d1 * d2, d1 * d2))
    for i in range(d1):
        for j in range(d2):
            P[j * d1 + i, i * d2 + j] = 1.0
    return P


def rel_residual(lhs: np.ndarray, rhs: np.ndarray) -> float:
    """``‖lhs − rhs‖ / max(‖lhs‖, ‖rhs‖)`` in the Frobenius norm; 0 if both vanish."""
    scale = max(np.linalg.norm(lhs), np.linalg.norm(rhs))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(np.asarray(lhs) - np.asarray(rhs)) / scale)


@dataclass(frozen=True)
class EigenPair:
    value: complex
    right: np.ndarray
    left: np.ndarray
    residual: float
    cluster: int

    @property
    def degenerate(self) -> bool:
        return self.cluster >= 0


def eigenpairs(
    M: np.ndarray,
    *,
    tol: float = 1e-10,
    cluster_gap: float = 1e-8,
) -> list[EigenPair]:
    """Biorthogonal eigen-decomposition of a general complex matrix.

    Each returned pair satisfies ``M @ right ≈ value * right`` and
    ``left @ M ≈ value * left`` with ``left @ right == 1``.  Eigenvalues whose
    mutual gap is below ``cluster_gap * ‖M‖`` share a non-negative ``cluster``
    label; isolated eigenvalues carry ``cluster == -1``.

    Raises
    ------
    ConvergenceError
        If LAPACK fails or any residual exceeds ``tol * ‖M‖``.
    """
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"eigenpairs needs a square matrix, got {M.shape}")
    if M.shape[0] > max_dim():
        raise DimensionError(f"matrix dimension {M.shape[0]} exceeds cap {max_dim()}")
    try:
        values, vl, vr = scipy.linalg.eig(M, left=True, right=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceError(f"eigen-decomposition failed: {exc}") from exc
    lefts = vl.conj()
    norm = np.linalg.norm(M, 2) or 1.0

    labels = np.full(len(values), -1)
    next_label = 0
    for i in range(len(values)):
        for k in range(i):
            if abs(values[i] - values[k]) < cluster_gap * norm:
                if labels[k] < 0:
                    labels[k] = next_label
                    next_label += 1
                labels[i] = labels[k]
                break

    pairs = []
    worst = 0.0
    for i, value in enumerate(values):
        r = vr[:, i]
        l = lefts[:, i]
        pairing = l @ r
        if labels[i] < 0 and abs(pairing) > 1e-300:
            l = l / pairing
        res = float(np.linalg.norm(M @ r - value * r) / (norm * np.linalg.norm(r)))
        worst = max(worst, res)
        pairs.append(EigenPair(complex(value), r, l, res, int(labels[i])))
    if worst > tol:
        raise ConvergenceError(f"eigen residual {worst:.3e} exceeds {tol:.1e}", worst)
    return pairs


def require_simple(pairs: list[EigenPair]) -> None:
    clusters = sorted({p.cluster for p in pairs if p.degenerate})
    if clusters:
        raise DegenerateError(f"{len(clusters)} near-degenerate eigenvalue cluster(s)")


@dataclass(frozen=True)
class LstsqResult:
    x: np.ndarray
    residual: float
    rank: int


def lstsq(A: np.ndarray, b: np.ndarray, *, rcond: float = 1e-12) -> LstsqResult:
    """Least-squares solution of ``A x ≈ b`` for tall ``A`` (``m ≥ n``).

    Columns are equilibrated before solving.  Raises
    :class:`RankDeficiencyError` when the effective rank is below ``n``.
    """
    A = np.asarray(A, dtype=complex)
    b = np.asarray(b, dtype=complex)
    m, n = A.shape
    if m < n:
        raise DimensionError(f"lstsq needs m >= n, got {m}x{n}")
    if b.shape != (m,):
        raise DimensionError(f"right-hand side shape {b.shape} != ({m},)")
    scale = np.linalg.norm(A, axis=0)
    scale[scale == 0.0] = 1.0
    y, _, rank, _ = np.linalg.lstsq(A / scale, b, rcond=rcond)
    if rank < n:
        raise RankDeficiencyError(f"effective rank {rank} < {n}", int(rank))
    x = y / scale
    return LstsqResult(x, float(np.linalg.norm(A @ x - b)), int(rank))


def poly_eval(coeffs, x):
    """Evaluate a polynomial given by ascending coefficients."""
    return np.polynomial.polynomial.polyval(x, np.asarray(coeffs, dtype=complex))


def poly_roots(coeffs) -> np.ndarray:
    """All complex roots of a polynomial given by ascending coefficients.

    Uses companion-matrix eigenvalues followed by one Newton polish per root.
    """
    c = np.trim_zeros(np.asarray(coeffs, dtype=complex), "b")
    if len(c) < 2:
        raise DimensionError("poly_roots needs degree >= 1")
    roots = np.roots(c[::-1]).astype(complex)
    deriv = np.polynomial.polynomial.polyder(c)
    for k, z in enumerate(roots):
        dp = poly_eval(deriv, z)
        if dp != 0:
            step = poly_eval(c, z) / dp
            if abs(step) < 1e-6 * max(1.0, abs(z)):
                roots[k] = z - step
    return roots
