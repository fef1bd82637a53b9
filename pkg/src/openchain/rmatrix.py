"""Rational SU(2) R-matrices: fundamental, fused, and the projector form.

Basis conventions
-----------------
A spin-``s`` space has the ordered basis ``|s⟩, |s−1⟩, …, |−s⟩`` so that
``Sz = diag(s, …, −s)`` and index 0 is the highest-weight state.  Two-space
operators ``X_{12}`` are stored as matrices on ``V_1 ⊗ V_2`` with ``V_1`` the
slow index.  Fused operators are compressed from the symmetric subspace of
``(ℂ²)^{⊗m}`` to honest ``(m+1)``-dimensional matrices by
:func:`symmetric_isometry`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product

import numpy as np

from .errors import PoleError
from .tensor import embed_pair, permutation, rel_residual

POLE_TOL = 1e-12


@dataclass(frozen=True, order=True)
class SpinLabel:
    """A spin value stored as ``2s`` so that half-integers stay exact."""

    twice: int

    def __post_init__(self):
        if not isinstance(self.twice, (int, np.integer)) or self.twice < 1:
            raise ValueError(f"SpinLabel needs 2s >= 1, got {self.twice!r}")

    @classmethod
    def of(cls, value) -> "SpinLabel":
        """Coerce ``"3/2"``, ``1.5``, ``Fraction(3, 2)`` or a SpinLabel."""
        if isinstance(value, SpinLabel):
            return value
        twice = 2 * Fraction(str(value).strip()) if isinstance(value, str) else 2 * Fraction(value)
        if twice.denominator != 1:
            raise ValueError(f"{value!r} is not a multiple of 1/2")
        return cls(int(twice))

    @property
    def value(self) -> Fraction:
        return Fraction(self.twice, 2)

    def dim(self) -> int:
        return self.twice + 1

    def __str__(self) -> str:
        return str(self.value)


HALF = SpinLabel(1)


def _check_pole(value: complex, what: str) -> None:
    if abs(value) < POLE_TOL:
        raise PoleError(f"pole: factor {what} vanishes")


@lru_cache(maxsize=None)
def _spin_matrices(twice: int):
    s = twice / 2
    m = np.array([s - i for i in range(twice + 1)])
    Sz = np.diag(m).astype(complex)
    Sp = np.zeros((twice + 1, twice + 1), dtype=complex)
    for i in range(1, twice + 1):
        k = m[i]
        Sp[i - 1, i] = math.sqrt(s * (s + 1) - k * (k + 1))
    for a in (Sz, Sp):
        a.setflags(write=False)
    Sm = Sp.T.copy()
    Sm.setflags(write=False)
    return Sz, Sp, Sm


def spin_matrices(s) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(Sz, S+, S−)`` for spin ``s`` in the descending-``Sz`` basis."""
    return _spin_matrices(SpinLabel.of(s).twice)


def r_half_half(u: complex, eta: complex) -> np.ndarray:
    """Fundamental R-matrix ``u + η P`` on ``ℂ² ⊗ ℂ²``."""
    return u * np.eye(4, dtype=complex) + eta * permutation(2, 2)


def r_half_s_direct(u: complex, s, eta: complex) -> np.ndarray:
    """``u + η/2 + η σ·S`` as a 2×2 block matrix over the auxiliary space."""
    Sz, Sp, Sm = spin_matrices(s)
    ident = np.eye(Sz.shape[0])
    shift = (u + eta / 2) * ident
    return np.block([[shift + eta * Sz, eta * Sm], [eta * Sp, shift - eta * Sz]])


@lru_cache(maxsize=None)
def _sym_projector(m: int) -> np.ndarray:
    dims = [2] * m
    size = 2**m
    swap = permutation(2, 2)
    proj = np.eye(size)
    for k in range(m):
        factor = np.eye(size)
        for l in range(k):
            factor = factor + embed_pair(swap, l, k, dims).real
        proj = proj @ factor
    proj /= math.factorial(m)
    proj.setflags(write=False)
    return proj


def sym_projector(m: int) -> np.ndarray:
    """Symmetrizer on ``(ℂ²)^{⊗m}`` from the ordered product of transposition sums."""
    if m < 1:
        raise ValueError("sym_projector needs m >= 1")
    return _sym_projector(m)


@lru_cache(maxsize=None)
def _symmetric_isometry(m: int) -> np.ndarray:
    V = np.zeros((2**m, m + 1))
    for index in range(2**m):
        downs = bin(index).count("1")  # bit value 1 encodes spin down
        V[index, downs] = 1.0
    V /= np.linalg.norm(V, axis=0)
    V.setflags(write=False)
    return V


def symmetric_isometry(m: int) -> np.ndarray:
    """Orthonormal map from spin ``m/2`` into the symmetric subspace of ``(ℂ²)^{⊗m}``.

    Column ``k`` is the normalized symmetric state with ``k`` down spins, which
    is the basis vector ``|m/2 − k⟩`` of :func:`spin_matrices`.
    """
    if m < 1:
        raise ValueError("symmetric_isometry needs m >= 1")
    return _symmetric_isometry(m)


def r_half_s_fused(u: complex, s, eta: complex) -> np.ndarray:
    """Spin-(1/2, s) R-matrix fused on the quantum side from ``2s`` fundamental ones.

    Raises :class:`PoleError` at the zeros of the normalizing prefactor.
    """
    m = SpinLabel.of(s).twice
    half_s = m / 2
    prefactor = 1.0 + 0j
    for k in range(1, m):
        factor = u + (0.5 - half_s + k) * eta
        _check_pole(factor, f"u + ({0.5 - half_s + k})·eta at u={u}")
        prefactor *= factor
    dims = [2] * (m + 1)
    prod = np.eye(2 ** (m + 1), dtype=complex)
    for k in range(1, m + 1):
        prod = prod @ embed_pair(r_half_half(u + (k - 0.5 - half_s) * eta, eta), 0, k, dims)
    W = np.kron(np.eye(2), symmetric_isometry(m))
    return W.T @ prod @ W / prefactor


def r_j_s_fused(u: complex, j, s, eta: complex) -> np.ndarray:
    """Spin-(j, s) R-matrix fused on the auxiliary side, acting on ``V_j ⊗ V_s``."""
    j = SpinLabel.of(j)
    s = SpinLabel.of(s)
    if j.twice == 1:
        return r_half_s_direct(u, s, eta)
    m = j.twice
    ds = s.dim()
    dims = [2] * m + [ds]
    prod = np.eye(2**m * ds, dtype=complex)
    for k in range(1, m + 1):
        shifted = r_half_s_direct(u + (k - m / 2 - 0.5) * eta, s, eta)
        prod = prod @ embed_pair(shifted, k - 1, m, dims)
    W = np.kron(symmetric_isometry(m), np.eye(ds))
    return W.T @ prod @ W


def r_swapped(R: np.ndarray, d1: int, d2: int) -> np.ndarray:
    """The operator ``R`` on ``V_1 ⊗ V_2`` rewritten on ``V_2 ⊗ V_1``."""
    P = permutation(d1, d2)
    return P @ R @ P.T


@lru_cache(maxsize=None)
def _total_casimir(twice: int) -> np.ndarray:
    Sz, Sp, Sm = _spin_matrices(twice)
    ident = np.eye(twice + 1)
    # S² = Sz² + (S+S− + S−S+)/2 for the summed spin
    Z = np.kron(Sz, ident) + np.kron(ident, Sz)
    P = np.kron(Sp, ident) + np.kron(ident, Sp)
    M = np.kron(Sm, ident) + np.kron(ident, Sm)
    total = Z @ Z + (P @ M + M @ P) / 2
    total.setflags(write=False)
    return total


def projector_spin_l(l: int, s) -> np.ndarray:
    """Projector of ``V_s ⊗ V_s`` onto total spin ``l`` (``0 ≤ l ≤ 2s``)."""
    twice = SpinLabel.of(s).twice
    if not 0 <= l <= twice:
        raise ValueError(f"total spin {l} outside 0..{twice}")
    C = _total_casimir(twice)
    size = C.shape[0]
    P = np.eye(size, dtype=complex)
    for j in range(twice + 1):
        if j != l:
            P = P @ (C - j * (j + 1) * np.eye(size)) / (l * (l + 1) - j * (j + 1))
    return P


def r_s_s_direct(u: complex, s, eta: complex) -> np.ndarray:
    """Spin-(s, s) R-matrix as a weighted sum of total-spin projectors.

    The ratio ``Π_k (u+kη)/(u−kη)`` is multiplied through by ``Π_j (u−jη)``
    so the result stays polynomial at ``u = kη``.
    """
    twice = SpinLabel.of(s).twice
    out = np.zeros(((twice + 1) ** 2,) * 2, dtype=complex)
    for l in range(twice + 1):
        weight = 1.0 + 0j
        for k in range(1, l + 1):
            weight *= u + k * eta
        for k in range(l + 1, twice + 1):
            weight *= u - k * eta
        out += weight * projector_spin_l(l, s)
    return out


def ybe_residual(s1, s2, s3, u: complex, v: complex, eta: complex) -> float:
    """Relative defect of ``R12(u−v) R13(u) R23(v) = R23(v) R13(u) R12(u−v)``."""
    labels = [SpinLabel.of(x) for x in (s1, s2, s3)]
    dims = [x.dim() for x in labels]
    R12 = embed_pair(r_j_s_fused(u - v, labels[0], labels[1], eta), 0, 1, dims)
    R13 = embed_pair(r_j_s_fused(u, labels[0], labels[2], eta), 0, 2, dims)
    R23 = embed_pair(r_j_s_fused(v, labels[1], labels[2], eta), 1, 2, dims)
    return rel_residual(R12 @ R13 @ R23, R23 @ R13 @ R12)


def ybe_sweep(spins, pairs, eta: complex) -> float:
    """Worst YBE residual over every spin triple drawn from ``spins``."""
    worst = 0.0
    for triple in product(spins, repeat=3):
        for u, v in pairs:
            worst = max(worst, ybe_residual(*triple, u, v, eta))
    return worst
