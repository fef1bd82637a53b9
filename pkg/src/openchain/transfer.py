"""Monodromy matrices, transfer matrices, and the identities they obey.

Operators carrying an auxiliary space are held as *block arrays* of shape
``(da, da, D, D)``: entry ``[a, b]`` is the quantum-space operator sitting at
auxiliary matrix element ``(a, b)``.  Site-local factors are applied with a
reshape + einsum so no ``(da·D)²`` Kronecker product is ever formed.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .boundary import BoundaryParams, k_minus_s_fused, k_plus_s
from .errors import DegenerateError, DimensionError, PoleError
from .rmatrix import HALF, SpinLabel, r_half_half, r_j_s_fused
from .tensor import max_dim, rel_residual

GENERIC_GAP = 1e-6


@dataclass(frozen=True)
class ModelParams:
    s: SpinLabel
    N: int
    eta: complex
    boundary: BoundaryParams
    theta: tuple[complex, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "s", SpinLabel.of(self.s))
        object.__setattr__(self, "eta", complex(self.eta))
        theta = tuple(complex(x) for x in self.theta) if self.theta else (0j,) * self.N
        object.__setattr__(self, "theta", theta)
        if self.N < 1:
            raise ValueError(f"need at least one site, got N={self.N}")
        if len(theta) != self.N:
            raise ValueError(f"{len(theta)} inhomogeneities for {self.N} sites")
        if self.eta == 0:
            raise ValueError("crossing parameter eta must be nonzero")
        if self.dim > max_dim():
            raise DimensionError(f"Hilbert dimension {self.dim} exceeds cap {max_dim()}")

    @property
    def d(self) -> int:
        return self.s.dim()

    @property
    def dim(self) -> int:
        return self.d**self.N

    @property
    def spin(self) -> float:
        return self.s.twice / 2

    @property
    def is_homogeneous(self) -> bool:
        return all(x == 0 for x in self.theta)

    def homogeneous(self) -> "ModelParams":
        return replace(self, theta=(0j,) * self.N)

    def check_generic(self, gap: float = GENERIC_GAP) -> None:
        """Reject inhomogeneities whose shifted grids collide.

        The separated-variable constructions evaluate operators at
        ``±θ_l + kη/2`` for small integers ``k``; two sites whose values differ
        by (nearly) a multiple of ``η/2`` or sum to one make those grids overlap.
        """
        th = self.theta
        scale = abs(self.eta)
        for i in range(self.N):
            for k in range(i):
                for other in (th[k], -th[k] - self.eta):
                    diff = (th[i] - other) / (self.eta / 2)
                    nearest = round(diff.real)
                    if abs(diff - nearest) * scale / 2 < gap and abs(nearest) <= 4 * self.s.twice + 4:
                        raise DegenerateError(
                            f"theta_{i + 1}={th[i]} and theta_{k + 1}={th[k]} are not generic"
                        )


def r_tensor(u: complex, j: SpinLabel, s: SpinLabel, eta: complex) -> np.ndarray:
    """R^(j,s)(u) reshaped to ``[a, b, i, k]`` = ⟨a i|R|b k⟩."""
    da, d = j.dim(), s.dim()
    return r_j_s_fused(u, j, s, eta).reshape(da, d, da, d).transpose(0, 2, 1, 3)


def identity_blocks(da: int, D: int) -> np.ndarray:
    out = np.zeros((da, da, D, D), dtype=complex)
    for a in range(da):
        out[a, a] = np.eye(D)
    return out


def rmul_site(M: np.ndarray, R4: np.ndarray, n: int, N: int, d: int) -> np.ndarray:
    """Right-multiply block operator ``M`` by ``R4`` acting on aux ⊗ site ``n`` (0-based)."""
    da = M.shape[0]
    D = d**N
    X = M.reshape(da, da, D, d**n, d, d ** (N - n - 1))
    Y = np.einsum("abIxky,bcki->acIxiy", X, R4, optimize=True)
    return Y.reshape(da, da, D, D)


def block_mul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.einsum("abIJ,bcJK->acIK", A, B, optimize=True)


def aux_mul(A: np.ndarray, K: np.ndarray) -> np.ndarray:
    """Block operator times a pure auxiliary matrix on the right."""
    return np.einsum("abIJ,bc->acIJ", A, K)


def aux_conj(U: np.ndarray, M: np.ndarray, Uinv: np.ndarray) -> np.ndarray:
    return np.einsum("ab,bcIJ,cd->adIJ", U, M, Uinv)


def blocks_to_matrix(M: np.ndarray) -> np.ndarray:
    """Flatten ``(da, da, D, D)`` blocks to a matrix on aux ⊗ quantum (aux slow)."""
    da, _, D, _ = M.shape
    return M.transpose(0, 2, 1, 3).reshape(da * D, da * D)


def monodromy_T(params: ModelParams, j, u: complex) -> np.ndarray:
    """One-row monodromy ``R_{aN}(u−θ_N) ⋯ R_{a1}(u−θ_1)`` as block array."""
    j = SpinLabel.of(j)
    M = identity_blocks(j.dim(), params.dim)
    for n in range(params.N - 1, -1, -1):
        M = rmul_site(M, r_tensor(u - params.theta[n], j, params.s, params.eta), n, params.N, params.d)
    return M


def monodromy_That(params: ModelParams, j, u: complex, *, reverse: bool = False) -> np.ndarray:
    """Reflected monodromy ``R_{1a}(u+θ_1) ⋯ R_{Na}(u+θ_N)``.

    ``reverse=True`` builds the opposite site ordering; it exists only so the
    ordering choice can be tested against commutativity and crossing.
    """
    j = SpinLabel.of(j)
    M = identity_blocks(j.dim(), params.dim)
    order = range(params.N - 1, -1, -1) if reverse else range(params.N)
    for n in order:
        M = rmul_site(M, r_tensor(u + params.theta[n], j, params.s, params.eta), n, params.N, params.d)
    return M


def k_minus(params: ModelParams, j, u: complex) -> np.ndarray:
    bp = params.boundary
    return k_minus_s_fused(u, j, bp.p, bp.varsigma, params.eta)


def k_plus(params: ModelParams, j, u: complex) -> np.ndarray:
    bp = params.boundary
    return k_plus_s(u, j, bp.q, bp.xi, params.eta)


def double_row_U(params: ModelParams, j, u: complex, *, reverse: bool = False) -> np.ndarray:
    """``T(u) K⁻(u) T̂(u)`` as block array."""
    T = monodromy_T(params, j, u)
    return block_mul(aux_mul(T, k_minus(params, j, u)), monodromy_That(params, j, u, reverse=reverse))


def transfer(
    params: ModelParams, j, u: complex, *, reverse: bool = False, scaled: bool = False
) -> np.ndarray:
    """Transfer matrix ``tr_a K⁺_a(u) U_a(u)`` with auxiliary spin ``j``.

    ``j = 0`` gives the identity and negative ``j`` the zero operator, which
    is how the fusion hierarchy is closed at its lower end.  ``scaled=True``
    returns ``f^(j)(u) t^(j,s)(u)``, which stays finite where ``f`` vanishes.
    """
    twice = _twice(j)
    if twice == 0:
        return np.eye(params.dim, dtype=complex)
    if twice < 0:
        return np.zeros((params.dim, params.dim), dtype=complex)
    j = SpinLabel(twice)
    U = double_row_U(params, j, u, reverse=reverse)
    if scaled:
        bp = params.boundary
        kp = k_minus_s_fused(-u - params.eta, j, bp.q, -bp.xi, params.eta)
    else:
        kp = k_plus(params, j, u)
    return np.einsum("ba,abIJ->IJ", kp, U)


def _twice(j) -> int:
    """``2j`` for any spin-like value, allowing 0 and negative half-integers."""
    if isinstance(j, SpinLabel):
        return j.twice
    twice = 2 * (Fraction(j.strip()) if isinstance(j, str) else Fraction(j))
    if twice.denominator != 1:
        raise ValueError(f"{j!r} is not a multiple of 1/2")
    return int(twice)


class TransferFamily:
    """The commuting family ``u ↦ t^(j,s)(u)`` for a fixed model."""

    def __init__(self, params: ModelParams, j=HALF):
        self.params = params
        self.j = SpinLabel.of(j)

    def __call__(self, u: complex) -> np.ndarray:
        return transfer(self.params, self.j, u)

    def degree(self) -> int:
        """Polynomial degree in ``u`` of the spin-1/2 family."""
        if self.j != HALF:
            raise ValueError("degree is only tabulated for the spin-1/2 family")
        return 2 * self.params.N + 2


def delta_s(params: ModelParams, u: complex) -> complex:
    """Quantum-determinant scalar entering the fusion hierarchy."""
    eta = params.eta
    den = (2 * u - eta) * (2 * u + eta)
    if abs(den) < 1e-14:
        raise PoleError(f"delta has a pole at u={u}")
    bp = params.boundary
    out = (2 * u - 2 * eta) * (2 * u + 2 * eta) / den
    out *= ((1 + bp.varsigma**2) * u**2 - bp.p**2) * ((1 + bp.xi**2) * u**2 - bp.q**2)
    h = (0.5 + params.spin) * eta
    for th in params.theta:
        out *= (u - th + h) * (u + th + h) * (u - th - h) * (u + th - h)
    return out


def value_at_zero(params: ModelParams) -> complex:
    """Scalar that ``t^(1/2,s)(0)`` equals times the identity."""
    bp = params.boundary
    h = (0.5 + params.spin) * params.eta
    out = 2 * bp.p * bp.q
    for th in params.theta:
        out *= (th + h) * (-th + h)
    return out


def asymptotic_coefficient(params: ModelParams) -> complex:
    bp = params.boundary
    return 2 * (bp.xi * bp.varsigma - 1)


def leading_coefficient(params: ModelParams, radius: float = 1.0) -> np.ndarray:
    """Coefficient of ``u^(2N+2)`` in ``t^(1/2,s)(u)``, by a discrete Fourier
    transform over ``2N+3`` points on a circle (exact for that degree)."""
    n = 2 * params.N + 2
    r = radius * abs(params.eta)
    omega = np.exp(2j * np.pi * np.arange(n + 1) / (n + 1))
    acc = np.zeros((params.dim, params.dim), dtype=complex)
    for w in omega:
        acc += transfer(params, HALF, r * w) * w ** (-n)
    return acc / ((n + 1) * r**n)


def commutator_residual(params: ModelParams, u: complex, v: complex, j=HALF, k=HALF) -> float:
    tu = transfer(params, j, u)
    tv = transfer(params, k, v)
    scale = np.linalg.norm(tu) * np.linalg.norm(tv)
    return float(np.linalg.norm(tu @ tv - tv @ tu) / scale)


def crossing_residual(params: ModelParams, u: complex, j=HALF) -> float:
    return rel_residual(transfer(params, j, -u - params.eta), transfer(params, j, u))


def hierarchy_residual(params: ModelParams, j, u: complex, *, with_delta: bool = True) -> float:
    """Defect of ``t(u) t^(j−½)(u−jη) = t^(j)(u−(j−½)η) + δ(u) t^(j−1)(u−(j+½)η)``.

    ``with_delta=False`` drops the quantum-determinant term (negative control).
    """
    twice = SpinLabel.of(j).twice
    jj = twice / 2
    eta = params.eta
    lhs = transfer(params, HALF, u) @ transfer(params, (twice - 1) / 2, u - jj * eta)
    rhs = transfer(params, j, u - (jj - 0.5) * eta)
    if with_delta:
        rhs = rhs + delta_s(params, u) * transfer(params, (twice - 2) / 2, u - (jj + 0.5) * eta)
    return rel_residual(lhs, rhs)


def closure_residual(params: ModelParams, site: int, *, form: str = "derived") -> float:
    """Defect of the closure of the hierarchy at ``θ_l`` (``site`` is 1-based).

    ``t^(s,s)(θ_l) t^(1/2,s)(θ_l − (1/2+s)η) = δ(θ_l + (1/2−s)η) t^(s−1/2,s)(θ_l + x)``
    with ``x = η/2`` (``form="derived"``, the point where ``t^(s+1/2,s)``
    vanishes) or ``x = (1/2+s)η`` (``form="literal"``).  The two agree for
    ``s = 1/2``; for larger ``s`` only the derived point is an identity.
    """
    if not 1 <= site <= params.N:
        raise DimensionError(f"site {site} outside 1..{params.N}")
    if form not in ("derived", "literal"):
        raise ValueError(f"unknown closure form {form!r}")
    s = params.spin
    eta = params.eta
    th = params.theta[site - 1]
    lhs = transfer(params, params.s, th) @ transfer(params, HALF, th - (0.5 + s) * eta)
    shift = 0.5 * eta if form == "derived" else (0.5 + s) * eta
    rhs = delta_s(params, th + (0.5 - s) * eta) * transfer(params, s - 0.5, th + shift)
    return rel_residual(lhs, rhs)


def _aux_pair_operator(M: np.ndarray, first: bool) -> np.ndarray:
    """Embed block operator on aux ``0`` (``first``) or ``0'`` into V0 ⊗ V0' ⊗ H."""
    da, _, D, _ = M.shape
    eye = np.eye(da)
    if first:
        big = np.einsum("abIJ,cd->acIbdJ", M, eye)
    else:
        big = np.einsum("cdIJ,ab->acIbdJ", M, eye)
    return big.reshape(da * da * D, da * da * D)


def rtt_residual(params: ModelParams, u: complex, v: complex) -> float:
    """Defect of ``R_{00'}(u−v) T_0(u) T_0'(v) = T_0'(v) T_0(u) R_{00'}(u−v)``."""
    D = params.dim
    R = np.kron(r_half_half(u - v, params.eta), np.eye(D))
    Tu = _aux_pair_operator(monodromy_T(params, HALF, u), True)
    Tv = _aux_pair_operator(monodromy_T(params, HALF, v), False)
    return rel_residual(R @ Tu @ Tv, Tv @ Tu @ R)


def double_row_reflection_residual(params: ModelParams, u: complex, v: complex) -> float:
    """Defect of the reflection algebra obeyed by the spin-1/2 double-row monodromy."""
    D = params.dim
    Rm = np.kron(r_half_half(u - v, params.eta), np.eye(D))
    Rp = np.kron(r_half_half(u + v, params.eta), np.eye(D))
    Uu = _aux_pair_operator(double_row_U(params, HALF, u), True)
    Uv = _aux_pair_operator(double_row_U(params, HALF, v), False)
    return rel_residual(Rm @ Uu @ Rp @ Uv, Uv @ Rp @ Uu @ Rm)


def taylor_coefficients(func, count: int, *, radius: float = 0.5, points: int = 64) -> list:
    """First ``count`` Taylor coefficients at 0 of an analytic (matrix or scalar)
    function, by a discrete Fourier transform over ``points`` nodes on a circle.

    Exact up to rounding for polynomials of degree below ``points``.
    """
    nodes = radius * np.exp(2j * np.pi * np.arange(points) / points)
    values = [np.asarray(func(z)) for z in nodes]
    coeffs = []
    for n in range(count):
        acc = sum(v * w ** (-n) for v, w in zip(values, nodes / radius))
        coeffs.append(acc / (points * radius**n))
    return coeffs


def _leading_order(coeffs, rel_tol: float = 1e-9) -> int:
    scale = max(np.linalg.norm(c) for c in coeffs)
    for k, c in enumerate(coeffs):
        if np.linalg.norm(c) > rel_tol * scale:
            return k
    raise DegenerateError("function vanishes identically near u = 0")


def hamiltonian(params: ModelParams, *, radius: float = 0.5) -> np.ndarray:
    """Logarithmic derivative of ``f(u) t^(s,s)(u)`` at ``u = 0``, homogeneous chain.

    Writing ``f t = u^k (G_k + u G_{k+1} + …)`` with ``G_k`` invertible, the
    result is ``G_{k+1} G_k^{-1}``; the c-number pole ``k/u`` is dropped.  For
    ``s ≤ 1`` one has ``k = 0``; for ``s = 3/2`` both fused reflection
    matrices vanish at ``u = 0`` and ``k > 0``.
    """
    hp = params.homogeneous()
    r = radius * abs(hp.eta)
    coeffs = taylor_coefficients(lambda z: transfer(hp, hp.s, z, scaled=True), 8, radius=r)
    k = _leading_order(coeffs)
    if k + 1 >= len(coeffs):
        raise DegenerateError(f"f t vanishes to order {k} at u = 0")
    lead = coeffs[k]
    if np.linalg.cond(lead) > 1e10:
        raise DegenerateError("leading Taylor coefficient of f t is singular")
    return np.linalg.solve(lead.T, coeffs[k + 1].T).T


def log_derivative(func, *, radius: float = 0.5) -> complex:
    """Scalar analogue of :func:`hamiltonian`: regular part of ``(ln func)'`` at 0."""
    coeffs = taylor_coefficients(func, 8, radius=radius)
    k = _leading_order(coeffs)
    return complex(coeffs[k + 1] / coeffs[k])
