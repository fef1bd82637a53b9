"""Reflection matrices: the spin-1/2 pair, fused spin-s versions, and the dual."""
from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .errors import PoleError
from .rmatrix import SpinLabel, r_half_half, r_j_s_fused, symmetric_isometry
from .tensor import embed_pair, rel_residual


@dataclass(frozen=True)
class BoundaryParams:
    """Boundary couplings: ``(p, varsigma)`` on the right end, ``(q, xi)`` on the left."""

    p: complex
    q: complex
    xi: complex
    varsigma: complex = 0.0

    def __post_init__(self):
        for name in ("p", "q", "xi", "varsigma"):
            value = complex(getattr(self, name))
            if not cmath.isfinite(value):
                raise ValueError(f"boundary parameter {name} is not finite")
            object.__setattr__(self, name, value)

    @property
    def root_xi(self) -> complex:
        """Principal branch of ``sqrt(1 + xi²)``."""
        return cmath.sqrt(1 + self.xi**2)

    @property
    def root_varsigma(self) -> complex:
        return cmath.sqrt(1 + self.varsigma**2)


def k_minus_half(u: complex, p: complex, varsigma: complex) -> np.ndarray:
    return np.array([[p + u, varsigma * u], [varsigma * u, p - u]], dtype=complex)


def k_plus_half(u: complex, q: complex, xi: complex, eta: complex) -> np.ndarray:
    w = u + eta
    return np.array([[q - w, xi * w], [xi * w, q + w]], dtype=complex)


def k_minus_s_fused(u: complex, s, p: complex, varsigma: complex, eta: complex) -> np.ndarray:
    """Fused spin-``s`` reflection matrix on the compressed ``(2s+1)``-dim space.

    Factor ``k`` (1-based, left to right) is the product of
    ``R_{l,k}(2u + (k+l−2s−1)η)`` for increasing ``l < k`` followed by
    ``K_k(u + (k−s−1/2)η)``; the whole product is symmetrized and compressed.
    """
    m = SpinLabel.of(s).twice
    if m == 1:
        return k_minus_half(u, p, varsigma)
    dims = [2] * m
    size = 2**m
    prod = np.eye(size, dtype=complex)
    for k in range(1, m + 1):
        for l in range(1, k):
            prod = prod @ embed_pair(r_half_half(2 * u + (k + l - m - 1) * eta, eta), l - 1, k - 1, dims)
        local = k_minus_half(u + (k - m / 2 - 0.5) * eta, p, varsigma)
        prod = prod @ np.kron(np.kron(np.eye(2 ** (k - 1)), local), np.eye(2 ** (m - k)))
    V = symmetric_isometry(m)
    return V.T @ prod @ V


def phi(u: complex, eta: complex) -> complex:
    return (u + eta) * (u - eta)


def f_s_norm(u: complex, s, eta: complex) -> complex:
    """Normalization ``Π_{l=1}^{2s−1} Π_{k=1}^{l} [−φ(2u + (l+k+1−2s)η)]``; 1 for s=1/2."""
    m = SpinLabel.of(s).twice
    out = 1.0 + 0j
    for l in range(1, m):
        for k in range(1, l + 1):
            out *= -phi(2 * u + (l + k + 1 - m) * eta, eta)
    return out


def k_plus_s(u: complex, s, q: complex, xi: complex, eta: complex) -> np.ndarray:
    """Dual reflection matrix ``K⁻(−u−η)|_{(p,ς)→(q,−ξ)} / f(u)``."""
    norm = f_s_norm(u, s, eta)
    if abs(norm) < 1e-14:
        raise PoleError(f"normalization f^({SpinLabel.of(s)}) vanishes at u={u}")
    return k_minus_s_fused(-u - eta, s, q, -xi, eta) / norm


def reflection_residual(j, s, u: complex, v: complex, bp: BoundaryParams, eta: complex) -> float:
    """Relative defect of the reflection equation on ``V_j ⊗ V_s``.

    ``R(u−v) K_a(u) R(u+v) K_b(v) = K_b(v) R(u+v) K_a(u) R(u−v)``.  The
    (s, j) R-matrix acting on ``V_b ⊗ V_a`` is the same operator as the
    (j, s) one on ``V_a ⊗ V_b``, so a single matrix serves both.
    """
    j = SpinLabel.of(j)
    s = SpinLabel.of(s)
    Rm = r_j_s_fused(u - v, j, s, eta)
    Rp = r_j_s_fused(u + v, j, s, eta)
    Ka = np.kron(k_minus_s_fused(u, j, bp.p, bp.varsigma, eta), np.eye(s.dim()))
    Kb = np.kron(np.eye(j.dim()), k_minus_s_fused(v, s, bp.p, bp.varsigma, eta))
    return rel_residual(Rm @ Ka @ Rp @ Kb, Kb @ Rp @ Ka @ Rm)


def dual_reflection_residual(j, s, u: complex, v: complex, bp: BoundaryParams, eta: complex) -> float:
    """Defect of the dual reflection equation obeyed by ``K⁺``.

    ``R(v−u) K⁺_a(u) R(−u−v−2η) K⁺_b(v) = K⁺_b(v) R(−u−v−2η) K⁺_a(u) R(v−u)``.
    """
    j = SpinLabel.of(j)
    s = SpinLabel.of(s)
    Rm = r_j_s_fused(v - u, j, s, eta)
    Rp = r_j_s_fused(-u - v - 2 * eta, j, s, eta)
    Ka = np.kron(k_plus_s(u, j, bp.q, bp.xi, eta), np.eye(s.dim()))
    Kb = np.kron(np.eye(j.dim()), k_plus_s(v, s, bp.q, bp.xi, eta))
    return rel_residual(Rm @ Ka @ Rp @ Kb, Kb @ Rp @ Ka @ Rm)
