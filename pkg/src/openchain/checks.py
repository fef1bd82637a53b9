"""Check suites: each identity becomes one named record with residual and tolerance."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bethe import (
    BetheSolution,
    EigenTrack,
    lambda_tq,
    sample_points,
    solve_track,
    spectrum_points,
    tq_functions,
    track_eigenvalues,
)
from .boundary import dual_reflection_residual, k_minus_s_fused, reflection_residual
from .rmatrix import (
    HALF,
    SpinLabel,
    r_half_s_direct,
    r_half_s_fused,
    r_j_s_fused,
    r_s_s_direct,
    sym_projector,
    symmetric_isometry,
    ybe_residual,
)
from .sov import SovFrame, last_state_coefficients, r_local_closed_form, sov_indices
from .tensor import rel_residual
from .transfer import (
    ModelParams,
    asymptotic_coefficient,
    closure_residual,
    commutator_residual,
    crossing_residual,
    double_row_reflection_residual,
    hamiltonian,
    hierarchy_residual,
    leading_coefficient,
    rtt_residual,
    transfer,
    value_at_zero,
)

SUITES = ("ybe", "reflection", "fusion", "transfer", "gauge", "sov", "scalar", "tq", "bethe")
GENERIC_SUITES = frozenset({"sov", "scalar"})


@dataclass
class CheckRecord:
    name: str
    anchor: str
    residual: float
    tol: float
    value: float | None = None
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual) and self.residual < self.tol)

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "anchor": self.anchor,
            "residual": float(self.residual),
            "tol": float(self.tol),
            "pass": self.passed,
        }
        if self.value is not None:
            out["value"] = float(self.value)
        return out


@dataclass
class SuiteContext:
    params: ModelParams
    samples: int = 10
    seed: int = 0
    tol: float | None = None
    records: list[CheckRecord] = field(default_factory=list)
    _rng: np.random.Generator | None = None
    _frame: SovFrame | None = None
    _tracks: list[EigenTrack] | None = None
    _bethe: list[BetheSolution] | None = None

    @property
    def rng(self) -> np.random.Generator:
        if self._rng is None:
            self._rng = np.random.default_rng(self.seed)
        return self._rng

    def point(self) -> complex:
        z = complex(self.rng.uniform(-0.6, 0.6), self.rng.uniform(-0.6, 0.6))
        return z * self.params.eta

    def pairs(self, count: int | None = None) -> list[tuple[complex, complex]]:
        return [(self.point(), self.point()) for _ in range(count or self.samples)]

    @property
    def frame(self) -> SovFrame:
        if self._frame is None:
            self._frame = SovFrame(self.params)
        return self._frame

    @property
    def tracks(self) -> list[EigenTrack]:
        if self._tracks is None:
            self._tracks = track_eigenvalues(self.params, self.seed)[0]
        return self._tracks

    @property
    def bethe(self) -> list[BetheSolution]:
        if self._bethe is None:
            tq = tq_functions(self.params)
            points = spectrum_points(self.params, self.seed)
            frame = self.frame
            self._bethe = [solve_track(t, tq, points, frame, seed=self.seed) for t in self.tracks]
        return self._bethe

    def add(self, name: str, anchor: str, residual: float, tol: float, value: float | None = None) -> None:
        self.records.append(CheckRecord(name, anchor, float(residual), self.tol if self.tol is not None else tol, value))

    def spins(self) -> list[SpinLabel]:
        return [HALF] if self.params.s == HALF else [HALF, self.params.s]

    def transfer_tol(self) -> float:
        return 1e-8 if self.params.s.twice <= 2 else 1e-7


def _worst(values) -> float:
    return max(values, default=0.0)


# ---------------------------------------------------------------------------

def suite_ybe(ctx: SuiteContext) -> None:
    eta = ctx.params.eta
    pairs = ctx.pairs(3)
    for s1 in ctx.spins():
        for s2 in ctx.spins():
            for s3 in ctx.spins():
                res = _worst(ybe_residual(s1, s2, s3, u, v, eta) for u, v in pairs)
                ctx.add(f"ybe[{s1},{s2},{s3}]", "Yang-Baxter equation", res, 1e-10)


def suite_reflection(ctx: SuiteContext) -> None:
    eta = ctx.params.eta
    bp = ctx.params.boundary
    pairs = ctx.pairs(3)
    for j in ctx.spins():
        for s in ctx.spins():
            res = _worst(reflection_residual(j, s, u, v, bp, eta) for u, v in pairs)
            ctx.add(f"reflection[{j},{s}]", "reflection equation", res, 1e-10)
            res = _worst(dual_reflection_residual(j, s, u, v, bp, eta) for u, v in pairs)
            ctx.add(f"dual_reflection[{j},{s}]", "dual reflection equation", res, 1e-10)


def suite_fusion(ctx: SuiteContext) -> None:
    s = ctx.params.s
    eta = ctx.params.eta
    pts = [ctx.point() for _ in range(3)]
    m = s.twice
    V = symmetric_isometry(m)
    ctx.add(f"fusion.isometry[{s}]", "symmetric projector", rel_residual(V @ V.T, sym_projector(m)), 1e-10)
    P = sym_projector(m)
    ctx.add(f"fusion.projector[{s}]", "symmetric projector", rel_residual(P @ P, P), 1e-10)
    res = _worst(rel_residual(r_half_s_fused(u, s, eta), r_half_s_direct(u, s, eta)) for u in pts)
    ctx.add(f"fusion.r_half_s[{s}]", "fused spin-1/2 x spin-s R-matrix", res, 1e-10)
    res = _worst(rel_residual(r_j_s_fused(u, s, s, eta), r_s_s_direct(u, s, eta)) for u in pts)
    ctx.add(f"fusion.r_s_s[{s}]", "spin-s x spin-s R-matrix", res, 1e-10)
    bp = ctx.params.boundary
    # fused K is supported on the symmetric subspace: compressing and re-expanding is lossless
    res = 0.0
    for u in pts:
        K = k_minus_s_fused(u, s, bp.p, bp.varsigma, eta)
        res = max(res, rel_residual(V.T @ (V @ K @ V.T) @ V, K))
    ctx.add(f"fusion.k_minus[{s}]", "fused reflection matrix", res, 1e-10)


def suite_transfer(ctx: SuiteContext) -> None:
    params = ctx.params
    tol = ctx.transfer_tol()
    pairs = ctx.pairs(3)
    s = params.s
    for j, k in ((HALF, HALF), (HALF, s), (s, s)):
        res = _worst(commutator_residual(params, u, v, j, k) for u, v in pairs)
        ctx.add(f"transfer.commute[{j},{k}]", "commuting transfer matrices", res, tol)
        if s == HALF:
            break
    for j in ctx.spins():
        res = _worst(crossing_residual(params, u, j) for u, _ in pairs)
        ctx.add(f"transfer.crossing[{j}]", "crossing symmetry", res, tol)
    t0 = transfer(params, HALF, 0.0)
    ctx.add("transfer.value_at_zero", "transfer matrix at u=0",
            rel_residual(t0, value_at_zero(params) * np.eye(params.dim)), tol)
    lead = leading_coefficient(params)
    ctx.add("transfer.asymptotic", "asymptotic behavior",
            rel_residual(lead, asymptotic_coefficient(params) * np.eye(params.dim)), tol)
    for twice in range(2, s.twice + 2):
        j = SpinLabel(twice)
        res = _worst(hierarchy_residual(params, j, u) for u, _ in pairs)
        ctx.add(f"transfer.hierarchy[{j}]", "fusion hierarchy", res, tol)
    if not params.is_homogeneous:
        for site in range(1, params.N + 1):
            ctx.add(f"transfer.closure[{site}]", "closure of the fusion hierarchy",
                    closure_residual(params, site), tol)
    res = _worst(rtt_residual(params, u, v) for u, v in pairs)
    ctx.add("transfer.rtt", "RTT relation", res, tol)
    res = _worst(double_row_reflection_residual(params, u, v) for u, v in pairs)
    ctx.add("transfer.double_row_reflection", "double-row reflection algebra", res, tol)
    hp = params.homogeneous()
    H = hamiltonian(hp)
    res = 0.0
    for u, _ in pairs:
        t = transfer(hp, HALF, u)
        res = max(res, np.linalg.norm(H @ t - t @ H) / (np.linalg.norm(H) * np.linalg.norm(t)))
    ctx.add("transfer.hamiltonian_commutes", "Hamiltonian from t^(s,s)", res, 1e-8)


def suite_gauge(ctx: SuiteContext) -> None:
    frame = ctx.frame
    params = ctx.params
    pairs = ctx.pairs()
    one: dict[str, float] = {}
    two: dict[str, float] = {}
    det = 0.0
    for u, v in pairs:
        for key, val in frame.one_row_relations(u, v).items():
            one[key] = max(one.get(key, 0.0), val)
        for key, val in frame.double_row_relations(u, v).items():
            two[key] = max(two.get(key, 0.0), val)
        det = max(det, frame.quantum_determinant_residual(u))
    for key, val in one.items():
        ctx.add(f"gauge.one_row.{key}", "gauged one-row exchange relations", val, 1e-9)
    for key, val in two.items():
        ctx.add(f"gauge.double_row.{key}", "gauged double-row exchange relations", val, 1e-9)
    ctx.add("gauge.quantum_determinant", "quantum determinant", det, 1e-9)
    res = _worst(frame.transfer_residual(u) for u, _ in pairs[:3])
    ctx.add("gauge.transfer_from_blocks", "gauged transfer matrix decomposition", res, 1e-9)
    states = frame.local_states
    ctx.add("gauge.local_gram", "local reference states", rel_residual(states.gram(), np.eye(params.d)), 1e-10)
    last = last_state_coefficients(params)
    st = states.states[-1]
    ctx.add("gauge.last_state", "local reference states",
            abs(1 - abs(last @ st) / np.sqrt(abs(last @ last) * abs(st @ st))), 1e-10)
    r12, r21 = r_local_closed_form(params)
    ctx.add("gauge.local_r", "gauged local R-matrix",
            max(rel_residual(r12, states.r12), rel_residual(r21, states.r21)), 1e-10)
    omega, omega_bar, _, _ = frame.omega_states()
    res = 0.0
    for u, _ in pairs[:3]:
        C = frame.gauged_doublerow(u)[2]
        res = max(res, rel_residual(C @ omega, frame.h(u, (0,) * params.N) * omega))
        res = max(res, rel_residual(omega_bar @ C, frame.hbar(u, (0,) * params.N) * omega_bar))
    ctx.add("gauge.reference_eigen", "reference states diagonalize C", res, 1e-9)


def suite_sov(ctx: SuiteContext) -> None:
    frame = ctx.frame
    params = ctx.params
    us = [ctx.point() for _ in range(2)]
    right = left = 0.0
    for idx in sov_indices(params):
        r = frame.sov_basis(idx)
        l = frame.sov_basis_left(idx)
        for u in us:
            C = frame.gauged_doublerow(u)[2]
            right = max(right, rel_residual(C @ r, frame.h(u, idx) * r))
            left = max(left, rel_residual(l @ C, frame.hbar(u, idx) * l))
    ctx.add("sov.right_eigen", "SoV basis diagonalizes C", right, 1e-8)
    ctx.add("sov.left_eigen", "SoV basis diagonalizes C", left, 1e-8)
    B = frame.basis_matrix()
    sv = np.linalg.svd(B, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    deficit = int(np.sum(sv <= sv[0] * 1e-13))
    ctx.add("sov.basis_rank_deficit", "completeness of the SoV basis", deficit, 0.5, value=cond)
    P = frame.pairing_matrix()
    off = P - np.diag(np.diag(P))
    ctx.add("sov.pairing_offdiagonal", "orthogonality of left and right SoV bases",
            np.linalg.norm(off) / np.linalg.norm(P), 1e-8)
    omega = frame.omega_states()[0]
    res = _worst(np.linalg.norm(frame.dbar(b) @ omega) / np.linalg.norm(omega) for b in frame.beta)
    scale = max(1.0, np.linalg.norm(frame.gauged_doublerow(frame.beta[0])[3], 2))
    ctx.add("sov.dbar_annihilates", "action of the shifted D operator", res / scale, 1e-10)
    res = 0.0
    for idx in sov_indices(params):
        for n, m in enumerate(idx):
            if m == 0:
                continue
            lower = idx[:n] + (m - 1,) + idx[n + 1:]
            vec = frame.dbar(frame.beta[n] - m * frame.eta) @ frame.sov_basis(idx)
            expected = frame.dbar_action_coefficient(n, m) * frame.sov_basis(lower)
            res = max(res, rel_residual(vec, expected))
    ctx.add("sov.dbar_action", "action of the shifted D operator", res, 1e-8)


def suite_scalar(ctx: SuiteContext) -> None:
    frame = ctx.frame
    params = ctx.params
    res = 0.0
    for idx in sov_indices(params):
        pred = frame.inner_product_vac(idx)
        res = max(res, abs(pred - frame.inner_product_vac_direct(idx)) / abs(pred))
    ctx.add("scalar.vacuum_overlap", "inner product with the reference state", res, 1e-7)
    tq = tq_functions(params)
    tracks_res = 0.0
    rec_res = 0.0
    omega = frame.omega_states()[0]
    for sol, track in zip(ctx.bethe, ctx.tracks):
        left = track.left
        F0 = left @ omega
        for idx in sov_indices(params):
            direct = frame.scalar_product_F(left, idx)
            pred = frame.closed_form_F(idx, sol.Q) * F0
            tracks_res = max(tracks_res, abs(direct - pred) / abs(direct))
        if params.s.twice >= 2:
            lam = lambda u, Q=sol.Q: lambda_tq(u, Q, tq)
            for idx in sov_indices(params):
                for n, m in enumerate(idx):
                    if 1 <= m <= params.s.twice - 1:
                        rec_res = max(rec_res, frame.recursion_residual(left, lam, idx, n))
    ctx.add("scalar.closed_form", "scalar product closed form", tracks_res, 1e-7)
    if params.s.twice >= 2:
        ctx.add("scalar.recursion", "scalar product recursion", rec_res, 1e-7)


def suite_tq(ctx: SuiteContext) -> None:
    params = ctx.params
    tq = tq_functions(params)
    sols = ctx.bethe
    M = int(round(2 * params.spin * params.N))
    held = sample_points(params, 10, ctx.seed + 2)
    tracks = ctx.tracks
    recon = zero = cross = 0.0
    ctx.add("tq.fit", "inhomogeneous T-Q relation", max(sol.tq_residual for sol in sols), 1e-7)
    ctx.add("tq.root_count", "degree of the Q-function", max(abs(len(sol.roots) - M) for sol in sols), 0.5)
    for sol, track in zip(sols, tracks):
        Q = sol.Q
        for u in held:
            ref = track(u)
            recon = max(recon, abs(lambda_tq(u, Q, tq) - ref) / abs(ref))
        zero = max(zero, abs(lambda_tq(0.0, Q, tq) - value_at_zero(params)) / abs(value_at_zero(params)))
        u = held[0]
        cross = max(cross, abs(lambda_tq(u, Q, tq) - lambda_tq(-u - params.eta, Q, tq)) / abs(lambda_tq(u, Q, tq)))
    ctx.add("tq.reconstruction", "inhomogeneous T-Q relation", recon, 1e-7)
    ctx.add("tq.value_at_zero", "transfer matrix at u=0", zero, 1e-8)
    ctx.add("tq.crossing", "crossing symmetry", cross, 1e-10)
    trace = 0.0
    for u in held[:3]:
        t = transfer(params, HALF, u)
        total = sum(track(u) for track in tracks)
        trace = max(trace, abs(total - np.trace(t)) / np.linalg.norm(t))
    ctx.add("tq.trace", "completeness of the spectrum", trace, 1e-8)
    ctx.add("tq.bae", "Bethe ansatz equations", max(sol.bae_residual for sol in sols), 1e-10)


def suite_bethe(ctx: SuiteContext) -> None:
    sols = ctx.bethe
    ctx.add("bethe.fidelity_right", "right Bethe states", max(1 - s.fidelity_right for s in sols), 1e-7)
    ctx.add("bethe.fidelity_left", "left Bethe states", max(1 - s.fidelity_left for s in sols), 1e-7)
    ctx.add("bethe.eigen_residual", "Bethe states are eigenstates", max(s.eigen_residual for s in sols), 1e-6)


SUITE_FUNCS: dict[str, Callable[[SuiteContext], None]] = {
    "ybe": suite_ybe,
    "reflection": suite_reflection,
    "fusion": suite_fusion,
    "transfer": suite_transfer,
    "gauge": suite_gauge,
    "sov": suite_sov,
    "scalar": suite_scalar,
    "tq": suite_tq,
    "bethe": suite_bethe,
}


def resolve_suites(names) -> list[str]:
    out: list[str] = []
    for name in names:
        name = name.strip()
        if not name:
            continue
        if name == "all":
            chosen = list(SUITES)
        elif name in SUITE_FUNCS:
            chosen = [name]
        else:
            raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES + ('all',))}")
        out.extend(c for c in chosen if c not in out)
    return [s for s in SUITES if s in out]


def run_check_suite(
    params: ModelParams,
    suites,
    *,
    samples: int = 10,
    seed: int = 0,
    tol: float | None = None,
) -> SuiteContext:
    ctx = SuiteContext(params, samples=samples, seed=seed, tol=tol)
    for name in resolve_suites(suites):
        start = len(ctx.records)
        t0 = time.perf_counter()
        SUITE_FUNCS[name](ctx)
        elapsed = time.perf_counter() - t0
        new = ctx.records[start:]
        for rec in new:
            rec.seconds = elapsed / max(len(new), 1)
    return ctx
