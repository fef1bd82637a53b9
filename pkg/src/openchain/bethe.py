"""Inhomogeneous T-Q relation, Bethe roots and Bethe states.

The pipeline is: diagonalize ``t(u*)`` once, track each eigenvalue as a
function of ``u`` through its biorthogonal pair, fit the monic Q-polynomial by
linear least squares, polish the roots with Newton on the Bethe equations, and
finally rebuild left and right eigenvectors from products of gauged
double-row operators.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ConvergenceError,
    DegenerateError,
    DimensionError,
    ExtractionError,
    PoleError,
)
from .rmatrix import HALF
from .sov import SovFrame
from .tensor import eigenpairs, lstsq, poly_roots
from .transfer import ModelParams, transfer

MAX_TRACK_ATTEMPTS = 5


@dataclass(frozen=True)
class TQFunctions:
    a_s: Callable[[complex], complex]
    d_s: Callable[[complex], complex]
    F_s: Callable[[complex], complex]
    c: complex
    eta: complex

    def inhomogeneous(self, u: complex) -> complex:
        return self.c * u * (u + self.eta) * self.F_s(u)


def tq_functions(params: ModelParams) -> TQFunctions:
    eta = params.eta
    s = params.spin
    twice = params.s.twice
    bp = params.boundary
    th = params.theta

    def a_s(u):
        out = (2 * u + 2 * eta) / (2 * u + eta) * (bp.root_xi * u + bp.q) * (bp.root_varsigma * u + bp.p)
        for x in th:
            out *= (u - x + (0.5 + s) * eta) * (u + x + (0.5 + s) * eta)
        return complex(out)

    def d_s(u):
        return a_s(-u - eta)

    def F_s(u):
        out = 1.0 + 0j
        for x in th:
            for k in range(twice + 1):
                out *= (u - x + (0.5 - s + k) * eta) * (u + x + (0.5 - s + k) * eta)
        return out

    c = 2 * (bp.varsigma * bp.xi - 1 - bp.root_varsigma * bp.root_xi)
    return TQFunctions(a_s, d_s, F_s, complex(c), eta)


@dataclass(frozen=True)
class QPolynomial:
    """Monic polynomial in ``x = u(u+η)``; ``coeffs`` ascending, leading 1 implied."""

    coeffs: tuple[complex, ...]
    eta: complex

    @property
    def degree(self) -> int:
        return len(self.coeffs)

    @classmethod
    def from_roots(cls, roots: Sequence[complex], eta: complex) -> "QPolynomial":
        xs = [r * (r + eta) for r in roots]
        full = np.poly(xs)[::-1] if xs else np.ones(1)  # ascending, last entry 1
        return cls(tuple(complex(c) for c in full[:-1]), eta)

    def __call__(self, u: complex) -> complex:
        x = u * (u + self.eta)
        out = 1.0 + 0j
        for c in reversed(self.coeffs):
            out = out * x + c
        return out

    def x_roots(self) -> np.ndarray:
        if not self.coeffs:
            return np.zeros(0, dtype=complex)
        return poly_roots(list(self.coeffs) + [1.0])

    def roots(self) -> list[complex]:
        """Bethe roots, one representative from each pair ``(λ, −λ−η)``."""
        return [canonical_root(complex((-self.eta + cmath.sqrt(self.eta**2 + 4 * x)) / 2), self.eta)
                for x in self.x_roots()]


def canonical_root(lam: complex, eta: complex, tie: float = 1e-9) -> complex:
    """Pick ``λ`` or ``−λ−η`` so that ``w = (λ+η/2)/η`` has ``Re w > 0``.

    On the line ``Re w = 0`` (within ``tie``) the branch with ``Im w ≥ 0`` wins,
    which keeps the choice stable under roundoff.  For real ``η`` this is
    ``Re λ ≥ −η/2``.
    """
    w = (lam + eta / 2) / eta
    if w.real < -tie or (abs(w.real) <= tie and w.imag < 0):
        lam = -lam - eta
    return lam


def lambda_tq(u: complex, Q: Callable[[complex], complex], tq: TQFunctions) -> complex:
    qu = Q(u)
    if abs(qu) < 1e-300:
        raise PoleError(f"Q vanishes at u={u}")
    eta = tq.eta
    return (tq.a_s(u) * Q(u - eta) + tq.d_s(u) * Q(u + eta) + tq.inhomogeneous(u)) / qu


# ---------------------------------------------------------------------------
# eigenvalue tracking

def sample_points(params: ModelParams, count: int, seed: int) -> np.ndarray:
    """Points in the annulus ``0.5|η| ≤ |u| ≤ 1.5|η|`` away from the singular grids."""
    rng = np.random.default_rng(seed)
    eta = params.eta
    bad = [eta / 2, -eta / 2, -eta]
    for th in params.theta:
        for k in range(-2 * params.s.twice - 2, 2 * params.s.twice + 3):
            bad += [th + k * eta / 2, -th + k * eta / 2]
    guard = 0.05 * abs(eta)
    out: list[complex] = []
    while len(out) < count:
        z = rng.uniform(0.5, 1.5) * cmath.exp(1j * rng.uniform(0, 2 * np.pi)) * eta
        if all(abs(z - b) > guard for b in bad):
            out.append(z)
    return np.array(out)


@dataclass
class EigenTrack:
    """One eigenvalue curve ``Λ(u)`` labeled through a fixed biorthogonal pair."""

    index: int
    params: ModelParams
    left: np.ndarray
    right: np.ndarray
    reference: complex

    def __call__(self, u: complex) -> complex:
        t = transfer(self.params, HALF, u)
        return complex(self.left @ t @ self.right / (self.left @ self.right))

    def residual(self, u: complex) -> float:
        t = transfer(self.params, HALF, u)
        lam = self.left @ t @ self.right / (self.left @ self.right)
        return float(np.linalg.norm(t @ self.right - lam * self.right) / np.linalg.norm(self.right))


def track_eigenvalues(params: ModelParams, seed: int = 0) -> tuple[list[EigenTrack], complex]:
    """Eigenvalue tracks of ``t(u)``, labeled by a nondegenerate reference point.

    The reference point is redrawn (up to five times) until the spectrum at it
    separates; a persistent cluster raises ``DegenerateError``.
    """
    rng = np.random.default_rng(seed)
    for _ in range(MAX_TRACK_ATTEMPTS):
        ustar = complex(rng.uniform(0.2, 0.6), rng.uniform(0.05, 0.4)) * params.eta
        pairs = eigenpairs(transfer(params, HALF, ustar))
        if all(not p.degenerate for p in pairs):
            # label by position in a platform-independent ordering of Λ(u*)
            scale = max(abs(p.value) for p in pairs) or 1.0
            pairs = sorted(pairs, key=lambda p: (round(p.value.real / scale, 8), round(p.value.imag / scale, 8)))
            tracks = [EigenTrack(i, params, p.left, p.right, p.value) for i, p in enumerate(pairs)]
            return tracks, ustar
    raise DegenerateError(f"spectrum stays clustered after {MAX_TRACK_ATTEMPTS} reference points")


# ---------------------------------------------------------------------------
# Q extraction and Bethe equations

@dataclass
class QFit:
    Q: QPolynomial
    residual: float
    rank: int


def extract_q(
    samples: Sequence[tuple[complex, complex]],
    M: int,
    tq: TQFunctions,
    *,
    tol: float = 1e-6,
) -> QFit:
    """Fit the monic degree-``M`` Q-polynomial from ``(u, Λ(u))`` samples.

    Each sample gives one linear equation in the ``M`` free coefficients of
    ``Q(x) = x^M + q_{M−1} x^{M−1} + … + q_0``.
    """
    if M < 0:
        raise DimensionError("Q degree must be non-negative")
    if len(samples) < M + 1:
        raise DimensionError(f"need at least {M + 1} samples for degree {M}, got {len(samples)}")
    eta = tq.eta
    A = np.zeros((len(samples), M), dtype=complex)
    b = np.zeros(len(samples), dtype=complex)
    for k, (u, lam) in enumerate(samples):
        x0, xm, xp = u * (u + eta), (u - eta) * u, (u + eta) * (u + 2 * eta)
        au, du = tq.a_s(u), tq.d_s(u)

        def row(m):
            return lam * x0**m - au * xm**m - du * xp**m

        for m in range(M):
            A[k, m] = row(m)
        b[k] = tq.inhomogeneous(u) - row(M)
    if M == 0:
        residual = float(np.linalg.norm(b) / max(np.linalg.norm([tq.inhomogeneous(u) for u, _ in samples]), 1e-300))
        if residual > tol:
            raise ExtractionError(f"T-Q fit residual {residual:.3e} exceeds {tol:.1e}", residual=residual)
        return QFit(QPolynomial((), eta), residual, 0)
    fit = lstsq(A, b)
    residual = float(np.linalg.norm(A @ fit.x - b) / np.linalg.norm(b))
    if residual > tol:
        raise ExtractionError(f"T-Q fit residual {residual:.3e} exceeds {tol:.1e}", residual=residual)
    return QFit(QPolynomial(tuple(complex(c) for c in fit.x), eta), residual, fit.rank)


def bae_terms(lam: complex, Q: Callable[[complex], complex], tq: TQFunctions) -> tuple[complex, complex, complex]:
    eta = tq.eta
    return tq.a_s(lam) * Q(lam - eta), tq.d_s(lam) * Q(lam + eta), tq.inhomogeneous(lam)


def bae_residual(lam: complex, Q: Callable[[complex], complex], tq: TQFunctions) -> float:
    """``|aQ(λ−η) + dQ(λ+η) + cλ(λ+η)F(λ)|`` relative to the largest term."""
    terms = bae_terms(lam, Q, tq)
    scale = max(abs(t) for t in terms)
    if scale == 0:
        return 0.0
    return float(abs(sum(terms)) / scale)


def bae_residuals(roots: Sequence[complex], tq: TQFunctions) -> list[float]:
    Q = QPolynomial.from_roots(roots, tq.eta)
    return [bae_residual(r, Q, tq) for r in roots]


@dataclass
class NewtonResult:
    roots: list[complex]
    residual: float
    iterations: int
    converged: bool


def newton_refine(
    roots: Sequence[complex],
    tq: TQFunctions,
    M: int | None = None,
    *,
    tol: float = 1e-12,
    accept: float = 1e-10,
    max_iter: int = 50,
) -> NewtonResult:
    """Damped Newton on the coupled Bethe equations.

    Each equation is divided by a scale frozen at the start of the step, so the
    system stays holomorphic and a real finite-difference step yields the
    complex Jacobian.  Iteration stops once the worst relative residual drops
    below ``tol``; the best iterate is flagged ``converged`` if it beats
    ``accept``, which leaves room for the roundoff floor.
    """
    lam = np.array(roots, dtype=complex)
    if M is not None and len(lam) != M:
        raise DimensionError(f"expected {M} Bethe roots, got {len(lam)}")
    if len(lam) == 0:
        return NewtonResult([], 0.0, 0, True)

    def system(z, scales):
        Q = QPolynomial.from_roots(z, tq.eta)
        return np.array([sum(bae_terms(z[j], Q, tq)) / scales[j] for j in range(len(z))])

    def worst(z):
        return max(bae_residuals(z, tq))

    best, best_res = lam.copy(), worst(lam)
    it = 0
    for it in range(1, max_iter + 1):
        if best_res < tol:
            return NewtonResult([complex(z) for z in best], best_res, it - 1, True)
        Q = QPolynomial.from_roots(lam, tq.eta)
        scales = np.array([max(abs(t) for t in bae_terms(z, Q, tq)) or 1.0 for z in lam])
        g = system(lam, scales)
        J = np.zeros((len(lam), len(lam)), dtype=complex)
        for k in range(len(lam)):
            h = 1e-7 * max(1.0, abs(lam[k]))
            z = lam.copy()
            z[k] += h
            zm = lam.copy()
            zm[k] -= h
            J[:, k] = (system(z, scales) - system(zm, scales)) / (2 * h)
        try:
            step = np.linalg.solve(J, -g)
        except np.linalg.LinAlgError:
            break
        damping = 1.0
        g_norm = np.linalg.norm(g)
        while damping > 1e-4:
            trial = lam + damping * step
            if np.linalg.norm(system(trial, scales)) < g_norm:
                break
            damping /= 2
        lam = lam + damping * step
        res = worst(lam)
        if res < best_res:
            best, best_res = lam.copy(), res
    return NewtonResult([complex(z) for z in best], best_res, it, best_res < accept)


# ---------------------------------------------------------------------------
# Bethe states

def _product_state(frame: SovFrame, roots: Sequence[complex], side: str, normalize: bool) -> np.ndarray:
    N = frame.params.N
    eta = frame.eta
    vec = frame.omega_states()[2].copy()
    ref_norm = 1.0
    for lam in roots:
        blocks = frame.gauged_doublerow(lam)
        km = frame.k_minus_tilde(lam)
        if side == "right":
            vec = blocks[1] @ vec
            den = (-1) ** N * km[0, 1] * frame.a(lam) * frame.a(-lam - eta)
        else:
            vec = vec @ blocks[2]
            den = (-1) ** N * km[1, 0] * frame.d(lam) * frame.d(-lam - eta)
        nv = np.linalg.norm(vec)
        if nv < 1e-13 * ref_norm * np.linalg.norm(blocks[1 if side == "right" else 2]):
            raise DegenerateError(f"Bethe state vanishes after applying root {lam}")
        scale = max(1.0, abs(lam)) ** (2 * N + 1)
        if normalize and abs(den) > 1e-8 * scale:
            vec = vec / den
        else:
            vec = vec / nv
        ref_norm = np.linalg.norm(vec)
    return vec


def bethe_state_right(frame: SovFrame, roots: Sequence[complex], *, normalize: bool = True) -> np.ndarray:
    """``Π ℬ̃(λ_j)|0⟩`` with the per-root normalization when it is well defined."""
    return _product_state(frame, roots, "right", normalize)


def bethe_state_left(frame: SovFrame, roots: Sequence[complex], *, normalize: bool = True) -> np.ndarray:
    """``⟨0| Π 𝒞̃(λ_j)`` as a row vector."""
    return _product_state(frame, roots, "left", normalize)


def fidelity(v: np.ndarray, w: np.ndarray) -> float:
    return min(1.0, float(abs(np.vdot(v, w)) / (np.linalg.norm(v) * np.linalg.norm(w))))


def verify_eigenstate(
    params: ModelParams,
    v: np.ndarray,
    lam: Callable[[complex], complex],
    *,
    side: str = "right",
    samples: int = 5,
    seed: int = 0,
) -> float:
    """Largest ``‖t(u)v − Λ(u)v‖ / (‖t(u)‖‖v‖)`` over random ``u``."""
    if not np.any(v):
        raise DimensionError("cannot verify the zero vector")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        u = complex(rng.normal(), rng.normal()) * 0.5 * params.eta
        t = transfer(params, HALF, u)
        tv = t @ v if side == "right" else v @ t
        res = np.linalg.norm(tv - lam(u) * v) / (np.linalg.norm(t, 2) * np.linalg.norm(v))
        worst = max(worst, float(res))
    return worst


# ---------------------------------------------------------------------------
# driver

@dataclass
class BetheSolution:
    index: int
    samples: list[tuple[complex, complex]]
    Q: QPolynomial
    roots: list[complex]
    tq_residual: float
    bae_residuals: list[float]
    refined: bool
    fidelity_left: float = float("nan")
    fidelity_right: float = float("nan")
    eigen_residual: float = float("nan")
    extra: dict = field(default_factory=dict)

    @property
    def bae_residual(self) -> float:
        return max(self.bae_residuals, default=0.0)

    @property
    def fidelity(self) -> float:
        return min(self.fidelity_left, self.fidelity_right)


def solve_track(
    track: EigenTrack,
    tq: TQFunctions,
    points: Sequence[complex],
    frame: SovFrame | None = None,
    *,
    seed: int = 0,
) -> BetheSolution:
    params = track.params
    M = int(round(2 * params.spin * params.N))
    samples = [(complex(u), track(u)) for u in points]
    fit = extract_q(samples, M, tq)
    refined = newton_refine(fit.Q.roots(), tq, M)
    roots = [canonical_root(r, tq.eta) for r in refined.roots]
    Q = QPolynomial.from_roots(roots, tq.eta) if roots else fit.Q
    sol = BetheSolution(
        index=track.index,
        samples=samples,
        Q=Q,
        roots=roots,
        tq_residual=fit.residual,
        bae_residuals=bae_residuals(roots, tq),
        refined=refined.converged,
    )
    if frame is not None:
        right = bethe_state_right(frame, roots)
        left = bethe_state_left(frame, roots)
        sol.fidelity_right = fidelity(right, track.right)
        sol.fidelity_left = fidelity(left.conj(), track.left.conj())
        lam = lambda u: lambda_tq(u, Q, tq)
        sol.eigen_residual = max(
            verify_eigenstate(params, right, lam, seed=seed),
            verify_eigenstate(params, left, lam, side="left", seed=seed),
        )
    return sol


def spectrum_points(params: ModelParams, seed: int) -> np.ndarray:
    """The ``2M+8`` sample points used for every Q fit of a model."""
    M = int(round(2 * params.spin * params.N))
    return sample_points(params, 2 * M + 8, seed + 1)


def solve_spectrum(params: ModelParams, *, seed: int = 0, states: bool = True) -> list[BetheSolution]:
    """Bethe data for every eigenstate of ``t(u)``.

    Raises ``ExtractionError`` (carrying the offending index) if any track
    fails to fit.
    """
    tq = tq_functions(params)
    tracks, _ = track_eigenvalues(params, seed)
    points = spectrum_points(params, seed)
    frame = SovFrame(params) if states else None
    out = []
    for track in tracks:
        try:
            out.append(solve_track(track, tq, points, frame, seed=seed))
        except ExtractionError as exc:
            exc.args = (f"eigenstate {track.index}: {exc.args[0]}",)
            raise
    return out
