"""Gauge transformation, reference states and the separated-variable basis.

Everything here assumes ``varsigma = 0``.  Bras are stored as plain row
vectors and paired bilinearly (``bra @ ket``, no conjugation).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import DegenerateError, DimensionError, PoleError, UnsupportedConfigError
from .rmatrix import HALF, r_half_s_direct, spin_matrices
from .tensor import kron_all, rel_residual
from .transfer import (
    ModelParams,
    aux_conj,
    double_row_U,
    monodromy_T,
    transfer,
)

SovIndex = tuple


@dataclass(frozen=True)
class GaugeData:
    U0: np.ndarray
    U0inv: np.ndarray
    xi: complex

    @classmethod
    def from_params(cls, params: ModelParams) -> "GaugeData":
        bp = params.boundary
        if bp.varsigma != 0:
            raise UnsupportedConfigError("the gauge construction needs varsigma = 0")
        if abs(bp.xi) < 1e-12:
            raise DegenerateError("gauge matrix is singular for xi = 0")
        r = bp.root_xi
        U0 = np.array([[r - 1, bp.xi], [-r - 1, bp.xi]], dtype=complex)
        return cls(U0, np.linalg.inv(U0), bp.xi)

    def conj(self, M: np.ndarray) -> np.ndarray:
        """``U0 M U0^{-1}`` for a 2×2 matrix or a block array."""
        if M.ndim == 2:
            return self.U0 @ M @ self.U0inv
        return aux_conj(self.U0, M, self.U0inv)


def check_index(params: ModelParams, idx: Sequence[int]) -> SovIndex:
    idx = tuple(int(a) for a in idx)
    if len(idx) != params.N:
        raise DimensionError(f"SoV index of length {len(idx)} for {params.N} sites")
    for a in idx:
        if not 0 <= a <= params.s.twice:
            raise DimensionError(f"SoV index component {a} outside 0..{params.s.twice}")
    return idx


def sov_indices(params: ModelParams) -> Iterator[SovIndex]:
    return product(range(params.s.twice + 1), repeat=params.N)


class SovFrame:
    """Gauged operators and the separated-variable basis for one model.

    Operator evaluations are memoized per spectral parameter, so building the
    whole basis touches each shifted point only once.
    """

    def __init__(self, params: ModelParams):
        self.params = params
        self.gauge = GaugeData.from_params(params)
        self.eta = params.eta
        s = params.spin
        self.beta = tuple(th - (0.5 - s) * self.eta for th in params.theta)
        self.beta_prime = tuple(th - (0.5 + s) * self.eta for th in params.theta)
        self.local_states = build_reference_states(params)
        self._double = lru_cache(maxsize=512)(self._double_uncached)
        self._right: dict[SovIndex, np.ndarray] = {}
        self._left: dict[SovIndex, np.ndarray] = {}
        self._generic_checked = False

    def _require_generic(self) -> None:
        # Bethe states survive θ → 0; only the separated basis needs generic sites.
        if not self._generic_checked:
            self.params.check_generic()
            self._generic_checked = True

    # scalar functions -------------------------------------------------
    def a(self, u: complex) -> complex:
        h = (0.5 + self.params.spin) * self.eta
        return complex(np.prod([u - th + h for th in self.params.theta]))

    def d(self, u: complex) -> complex:
        h = (0.5 - self.params.spin) * self.eta
        return complex(np.prod([u - th + h for th in self.params.theta]))

    def k_minus_tilde(self, u: complex) -> np.ndarray:
        bp = self.params.boundary
        K = np.array([[bp.p + u, 0], [0, bp.p - u]], dtype=complex)
        return self.gauge.conj(K)

    def k_plus_tilde(self, u: complex) -> np.ndarray:
        bp = self.params.boundary
        w = u + self.eta
        K = np.array([[bp.q - w, bp.xi * w], [bp.xi * w, bp.q + w]], dtype=complex)
        return self.gauge.conj(K)

    # operators ---------------------------------------------------------
    def gauged_blocks(self, u: complex):
        """``(Ã, B̃, C̃, D̃)`` of the gauged one-row monodromy."""
        M = self.gauge.conj(monodromy_T(self.params, HALF, u))
        return M[0, 0], M[0, 1], M[1, 0], M[1, 1]

    def _double_uncached(self, u: complex) -> np.ndarray:
        return self.gauge.conj(double_row_U(self.params, HALF, u))

    def gauged_doublerow(self, u: complex):
        """``(𝒜̃, ℬ̃, 𝒞̃, 𝒟̃)`` of the gauged double-row monodromy."""
        M = self._double(complex(u))
        return M[0, 0], M[0, 1], M[1, 0], M[1, 1]

    def transfer_from_blocks(self, u: complex) -> np.ndarray:
        A, _, _, D = self.gauged_doublerow(u)
        kp = self.k_plus_tilde(u)
        return kp[0, 0] * A + kp[1, 1] * D

    def dbar(self, u: complex) -> np.ndarray:
        """``𝒟̃(u) − η/(2u+η) 𝒜̃(u)``."""
        den = 2 * u + self.eta
        if abs(den) < 1e-14:
            raise PoleError(f"dbar has a pole at u={u}")
        A, _, _, D = self.gauged_doublerow(u)
        return D - self.eta / den * A

    # states ------------------------------------------------------------
    def omega_states(self):
        """``(|Ω⟩, ⟨Ω̄|, |0⟩, ⟨0|)`` as flat vectors."""
        st = self.local_states.states
        N = self.params.N
        highest = np.zeros(self.params.d, dtype=complex)
        highest[0] = 1.0
        omega = kron_all(*([st[0]] * N)).ravel()
        omega_bar = kron_all(*([st[-1]] * N)).ravel()
        zero = kron_all(*([highest] * N)).ravel()
        return omega, omega_bar, zero, zero.copy()

    def sov_basis(self, idx: Sequence[int]) -> np.ndarray:
        """Right basis vector: ``𝒜̃(β_j − k η)`` for ``k = α_j−1, …, 0`` applied to ``|Ω⟩``."""
        idx = check_index(self.params, idx)
        self._require_generic()
        if idx not in self._right:
            vec = self.omega_states()[0]
            for j, alpha in enumerate(idx):
                for k in range(alpha):
                    vec = self.gauged_doublerow(self.beta[j] - k * self.eta)[0] @ vec
            self._right[idx] = vec
        return self._right[idx]

    def sov_basis_left(self, idx: Sequence[int]) -> np.ndarray:
        """Left basis vector: ``⟨Ω̄|`` times ``𝒟̃(−β'_j − (k+1)η)`` for increasing ``k``."""
        idx = check_index(self.params, idx)
        self._require_generic()
        if idx not in self._left:
            vec = self.omega_states()[1]
            for j, alpha in enumerate(idx):
                for k in range(alpha):
                    vec = vec @ self.gauged_doublerow(-self.beta_prime[j] - (k + 1) * self.eta)[3]
            self._left[idx] = vec
        return self._left[idx]

    def basis_matrix(self) -> np.ndarray:
        return np.column_stack([self.sov_basis(idx) for idx in sov_indices(self.params)])

    def pairing_matrix(self) -> np.ndarray:
        """Bilinear pairing of left index ``α`` with right index ``2s − α``.

        The left family is dual to the right one only after this complement
        relabeling; the returned matrix is then diagonal.
        """
        top = self.params.s.twice
        idxs = list(sov_indices(self.params))
        L = np.array([self.sov_basis_left(idx) for idx in idxs])
        R = np.column_stack([self.sov_basis(tuple(top - a for a in idx)) for idx in idxs])
        return L @ R

    # eigenvalues -------------------------------------------------------
    def h(self, u: complex, idx: Sequence[int]) -> complex:
        idx = check_index(self.params, idx)
        eta = self.eta
        out = (-1) ** self.params.N * self.k_minus_tilde(u)[1, 0] * self.d(-u - eta) * self.d(u)
        for b, alpha in zip(self.beta, idx):
            out *= (u - b + alpha * eta) * (u + b + eta - alpha * eta) / ((u - b) * (u + b + eta))
        return complex(out)

    def hbar(self, u: complex, idx: Sequence[int]) -> complex:
        idx = check_index(self.params, idx)
        eta = self.eta
        out = (-1) ** self.params.N * self.k_minus_tilde(u)[1, 0] * self.a(-u - eta) * self.a(u)
        for b, alpha in zip(self.beta_prime, idx):
            out *= (u - b - alpha * eta) * (u + b + eta + alpha * eta) / ((u - b) * (u + b + eta))
        return complex(out)

    # closed forms ------------------------------------------------------
    def _site_factor(self, j: int, k: int) -> complex:
        b = self.beta[j] - k * self.eta
        p = self.params.boundary.p
        return (-1) ** self.params.N * (p + b) * self.a(b) * self.d(-self.beta[j] + (k - 1) * self.eta)

    def closed_form_F(self, idx: Sequence[int], Q: Callable[[complex], complex]) -> complex:
        """Predicted ``⟨Ψ|β^(α)⟩ / ⟨Ψ|Ω⟩`` for the eigenstate whose Q-function is ``Q``."""
        idx = check_index(self.params, idx)
        out = 1.0 + 0j
        for j, alpha in enumerate(idx):
            for k in range(alpha):
                b = self.beta[j] - k * self.eta
                qk = Q(b)
                if abs(qk) < 1e-300:
                    raise DegenerateError(f"Q vanishes at beta_{j + 1} - {k} eta")
                out *= self._site_factor(j, k) * Q(b - self.eta) / qk
        return out

    def scalar_product_F(self, psi_left: np.ndarray, idx: Sequence[int]) -> complex:
        return complex(psi_left @ self.sov_basis(idx))

    def inner_product_vac(self, idx: Sequence[int]) -> complex:
        """Closed-form ``⟨0|β^(α)⟩ / ⟨0|Ω⟩``."""
        idx = check_index(self.params, idx)
        out = 1.0 + 0j
        for j, alpha in enumerate(idx):
            for k in range(alpha):
                out *= self._site_factor(j, k)
        return out

    def inner_product_vac_direct(self, idx: Sequence[int]) -> complex:
        omega, _, _, zero_bra = self.omega_states()
        base = zero_bra @ omega
        if abs(base) < 1e-300:
            raise DegenerateError("⟨0|Ω⟩ vanishes")
        return complex(zero_bra @ self.sov_basis(idx) / base)

    def dbar_action_coefficient(self, n: int, m: int) -> complex:
        """Scalar ``c`` in ``D̄(β_n − mη)|…α_n=m…⟩ = c |…α_n=m−1…⟩`` (``n`` 0-based)."""
        eta = self.eta
        b = self.beta[n]
        p = self.params.boundary.p
        w = b - (m - 1) * eta
        return (
            (2 * b - 2 * m * eta) / (2 * b - (2 * m - 1) * eta)
            * (p**2 - w**2)
            * self.a(w) * self.d(-b + (m - 2) * eta)
            * self.a(-b + (m - 1) * eta) * self.d(b - m * eta)
        )

    def recursion_residual(
        self, psi_left: np.ndarray, lam: Callable[[complex], complex], idx: Sequence[int], n: int
    ) -> float:
        """Defect of the three-term recursion for ``F`` at site ``n`` (0-based).

        ``idx[n] = m`` must satisfy ``1 ≤ m ≤ 2s − 1``; ``lam`` is the eigenvalue
        function of ``psi_left``.
        """
        idx = list(check_index(self.params, idx))
        m = idx[n]
        if not 1 <= m <= self.params.s.twice - 1:
            raise DimensionError(f"recursion needs 1 <= m <= 2s-1, got {m}")
        eta = self.eta
        x = self.beta[n] - m * eta
        kp = self.k_plus_tilde(x)

        def F(alpha):
            return self.scalar_product_F(psi_left, idx[:n] + [alpha] + idx[n + 1:])

        lhs = lam(x) * F(m)
        rhs = (kp[0, 0] + eta * kp[1, 1] / (2 * self.beta[n] - 2 * m * eta + eta)) * F(m + 1)
        rhs += kp[1, 1] * self.dbar_action_coefficient(n, m) * F(m - 1)
        return float(abs(lhs - rhs) / max(abs(lhs), abs(rhs)))

    # identity checks -----------------------------------------------------
    def one_row_relations(self, u: complex, v: complex) -> dict[str, float]:
        """Residuals of the six exchange relations of the gauged one-row monodromy."""
        A, B, C, D = self.gauged_blocks(u)
        A2, B2, C2, D2 = self.gauged_blocks(v)
        eta = self.eta
        w = u - v
        return {
            "A(u)B(v)": rel_residual(A @ B2, (w - eta) / w * B2 @ A + eta / w * B @ A2),
            "D(u)B(v)": rel_residual(D @ B2, (w + eta) / w * B2 @ D - eta / w * B @ D2),
            "B(u)D(v)": rel_residual(B @ D2, (w + eta) / w * D2 @ B - eta / w * D @ B2),
            "C(u)A(v)": rel_residual(C @ A2, (w + eta) / w * A2 @ C - eta / w * A @ C2),
            "C(u)D(v)": rel_residual(C @ D2, (w - eta) / w * D2 @ C + eta / w * D @ C2),
            "[C(u),B(v)]": rel_residual(C @ B2 - B2 @ C, eta / w * (D @ A2 - D2 @ A)),
        }

    def double_row_relations(self, u: complex, v: complex) -> dict[str, float]:
        """Residuals of the seven exchange relations of the gauged double-row monodromy."""
        A, B, C, D = self.gauged_doublerow(u)
        A2, B2, C2, D2 = self.gauged_doublerow(v)
        eta = self.eta
        s_, w = u + v, u - v
        f = s_ * (w + eta) / (w * (s_ + eta))
        g = eta / (s_ + eta)
        h = s_ * eta / (w * (s_ + eta))
        k = eta * (s_ + 2 * eta) / (w * (s_ + eta))
        return {
            "C(u)A(v)": rel_residual(C @ A2, f * A2 @ C - g * D @ C2 - h * A @ C2),
            "D(v)C(u)": rel_residual(D2 @ C, f * C @ D2 - g * C2 @ A - h * C2 @ D),
            "A(u)A(v)": rel_residual(A @ A2, A2 @ A + g * B2 @ C - g * B @ C2),
            "D(u)D(v)": rel_residual(D @ D2, D2 @ D + g * C2 @ B - g * C @ B2),
            "D(u)A(v)": rel_residual(D @ A2, A2 @ D - k * B @ C2 + k * B2 @ C),
            "[C(u),C(v)]": rel_residual(C @ C2, C2 @ C),
            "[B(u),B(v)]": rel_residual(B @ B2, B2 @ B),
        }

    def quantum_determinant_residual(self, u: complex) -> float:
        """``D̄(u−η)𝒜̃(u) − 2u/(2u−η) ℬ̃(u−η)𝒞̃(u)`` against its scalar value."""
        eta = self.eta
        p = self.params.boundary.p
        A, _, C, _ = self.gauged_doublerow(u)
        B_shift = self.gauged_doublerow(u - eta)[1]
        lhs = self.dbar(u - eta) @ A - 2 * u / (2 * u - eta) * B_shift @ C
        scalar = (
            (2 * u - 2 * eta) / (2 * u - eta) * (p**2 - u**2)
            * self.a(u) * self.d(-u - eta) * self.a(-u) * self.d(u - eta)
        )
        return rel_residual(lhs, scalar * np.eye(self.params.dim))

    def transfer_residual(self, u: complex) -> float:
        return rel_residual(self.transfer_from_blocks(u), transfer(self.params, HALF, u))


@dataclass(frozen=True)
class ReferenceStateSet:
    """Local states ``|s̃_1⟩ … |s̃_{2s+1}⟩`` with unit bilinear norm."""

    states: tuple[np.ndarray, ...]
    r12: np.ndarray
    r21: np.ndarray

    def gram(self) -> np.ndarray:
        S = np.array(self.states)
        return S @ S.T


def _local_r_blocks(params: ModelParams):
    """Off-diagonal blocks of the gauged local R-matrix (both independent of u)."""
    gauge = GaugeData.from_params(params)
    d = params.d
    R = r_half_s_direct(0.0, params.s, params.eta).reshape(2, d, 2, d).transpose(0, 2, 1, 3)
    Rg = np.einsum("ab,bcik,cd->adik", gauge.U0, R, gauge.U0inv)
    return Rg[0, 1], Rg[1, 0]


def first_state_coefficients(params: ModelParams) -> np.ndarray:
    """Coefficients of ``|s̃_1⟩`` in the descending-``Sz`` basis (unnormalized)."""
    twice = params.s.twice
    xi = params.boundary.xi
    r = params.boundary.root_xi
    c = np.zeros(twice + 1, dtype=complex)
    for j in range(twice + 1):
        falling = math.prod(range(twice - j + 1, twice + 1))
        # basis index of |−s + j⟩ is 2s − j
        c[twice - j] = math.sqrt(falling / math.factorial(j)) / (r + 1) ** (j - 2) * xi**j
    return c


def last_state_coefficients(params: ModelParams) -> np.ndarray:
    """Closed-form coefficients of ``|s̃_{2s+1}⟩`` (unnormalized)."""
    twice = params.s.twice
    xi = params.boundary.xi
    r = params.boundary.root_xi
    c = np.zeros(twice + 1, dtype=complex)
    for j in range(twice + 1):
        falling = math.prod(range(twice - j + 1, twice + 1))
        c[twice - j] = (-1) ** j * math.sqrt(falling / math.factorial(j)) / (r - 1) ** (j - 2) * xi**j
    return c


def _bilinear_normalize(v: np.ndarray) -> np.ndarray:
    norm2 = v @ v
    if abs(norm2) < 1e-14 * np.vdot(v, v).real:
        raise DegenerateError("reference state has vanishing bilinear norm")
    return v / np.sqrt(norm2)


def build_reference_states(params: ModelParams) -> ReferenceStateSet:
    """Local reference states: the kernel of ``r̃₂₁`` and its ``r̃₁₂`` descendants."""
    r12, r21 = _local_r_blocks(params)
    states = [_bilinear_normalize(first_state_coefficients(params))]
    for _ in range(params.s.twice):
        states.append(_bilinear_normalize(r12 @ states[-1]))
    return ReferenceStateSet(tuple(states), r12, r21)


def r_local_closed_form(params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Explicit ``(r̃₁₂, r̃₂₁)`` in terms of the spin operators."""
    Sz, Sp, Sm = spin_matrices(params.s)
    xi = params.boundary.xi
    r = params.boundary.root_xi
    eta = params.eta
    pre = -1 / (2 * xi * r)
    r21 = pre * (2 * xi * (r + 1) * eta * Sz + (r + 1) ** 2 * eta * Sm - xi**2 * eta * Sp)
    r12 = pre * (2 * xi * (r - 1) * eta * Sz - (r - 1) ** 2 * eta * Sm + xi**2 * eta * Sp)
    return r12, r21
