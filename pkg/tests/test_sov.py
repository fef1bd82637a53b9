import itertools

import numpy as np
import pytest

from openchain import BoundaryParams, ModelParams
from openchain.bethe import solve_spectrum, track_eigenvalues
from openchain.errors import DegenerateError, DimensionError, PoleError, UnsupportedConfigError
from openchain.rmatrix import HALF
from openchain.sov import (
    GaugeData,
    SovFrame,
    build_reference_states,
    check_index,
    first_state_coefficients,
    last_state_coefficients,
    r_local_closed_form,
    sov_indices,
)
from openchain.tensor import rel_residual
from openchain.transfer import monodromy_T

from conftest import BOUNDARY, make_params, spectral_pairs


@pytest.fixture(scope="module")
def frames():
    return {name: SovFrame(make_params(name)) for name in ("A", "B", "C")}


def separated_pairs(rng, count):
    out = []
    while len(out) < count:
        u, v = spectral_pairs(rng, 1)[0]
        if min(abs(u - v), abs(u + v), abs(u + v + 1), abs(u - v + 1)) > 0.1:
            out.append((u, v))
    return out


class TestGauge:
    def test_inverse_and_diagonalization(self, rng, frames):
        frame = frames["A"]
        g = frame.gauge
        assert np.abs(g.U0 @ g.U0inv - np.eye(2)).max() < 1e-13
        for u, _ in spectral_pairs(rng, 3):
            kp = frame.k_plus_tilde(u)
            assert abs(kp[0, 1]) < 1e-12 and abs(kp[1, 0]) < 1e-12
            r = BOUNDARY.root_xi
            assert kp[0, 0] == pytest.approx(BOUNDARY.q + r * (u + 1.0))
            assert kp[1, 1] == pytest.approx(BOUNDARY.q - r * (u + 1.0))

    def test_requires_varsigma_zero(self):
        p = ModelParams("1/2", 2, 1.0, BoundaryParams(0.8, 1.2, 0.6, 0.3), (0.31, -0.17))
        with pytest.raises(UnsupportedConfigError):
            SovFrame(p)

    def test_requires_xi_nonzero(self):
        p = ModelParams("1/2", 2, 1.0, BoundaryParams(0.8, 1.2, 0.0, 0.0), (0.31, -0.17))
        with pytest.raises(DegenerateError):
            GaugeData.from_params(p)

    def test_local_r_closed_form(self, frames):
        for frame in frames.values():
            r12, r21 = r_local_closed_form(frame.params)
            assert rel_residual(r12, frame.local_states.r12) < 1e-13
            assert rel_residual(r21, frame.local_states.r21) < 1e-13


class TestReferenceStates:
    def test_spin_half_orthogonal(self):
        st = build_reference_states(make_params("A")).states
        assert abs(st[0] @ st[1]) < 1e-15

    @pytest.mark.parametrize("name", ["A", "B", "C"])
    def test_gram_and_kernel(self, name):
        params = make_params(name)
        ref = build_reference_states(params)
        assert np.abs(ref.gram() - np.eye(params.d)).max() < 1e-11
        first = first_state_coefficients(params)
        assert np.linalg.norm(ref.r21 @ first) < 1e-12 * np.linalg.norm(first)
        last = last_state_coefficients(params)
        st = ref.states[-1]
        assert abs(abs(last @ st) ** 2 / abs((last @ last) * (st @ st)) - 1) < 1e-12

    def test_frame_states(self, rng, frames):
        for frame in frames.values():
            omega, omega_bar, zero, zero_bra = frame.omega_states()
            assert np.allclose(frame.sov_basis((0,) * frame.params.N), omega)
            assert zero[0] == 1 and np.count_nonzero(zero) == 1
            for u, _ in spectral_pairs(rng, 2):
                A, B, C, D = frame.gauged_blocks(u)
                assert rel_residual(A @ omega, frame.a(u) * omega) < 1e-11
                assert rel_residual(D @ omega, frame.d(u) * omega) < 1e-11
                assert np.linalg.norm(C @ omega) < 1e-11 * np.linalg.norm(C)
                assert rel_residual(omega_bar @ A, frame.d(u) * omega_bar) < 1e-11
                assert rel_residual(omega_bar @ D, frame.a(u) * omega_bar) < 1e-11
                Bu = monodromy_T(frame.params, HALF, u)[0, 1]
                assert np.linalg.norm(zero_bra @ Bu) < 1e-12 * np.linalg.norm(Bu)


class TestBetaGrid:
    def test_zeros(self, frames):
        for frame in frames.values():
            for b, bp in zip(frame.beta, frame.beta_prime):
                assert abs(frame.d(b)) < 1e-11
                assert abs(frame.a(bp)) < 1e-11


class TestExchangeRelations:
    @pytest.mark.parametrize("name", ["A", "B"])
    def test_one_row(self, rng, frames, name):
        for u, v in separated_pairs(rng, 5):
            for key, val in frames[name].one_row_relations(u, v).items():
                assert val < 1e-10, key

    @pytest.mark.parametrize("name", ["A", "B", "C"])
    def test_double_row(self, rng, frames, name):
        for u, v in separated_pairs(rng, 5):
            for key, val in frames[name].double_row_relations(u, v).items():
                assert val < 1e-10, key

    @pytest.mark.parametrize("name", ["A", "B", "C"])
    def test_transfer_from_blocks(self, rng, frames, name):
        for u, _ in spectral_pairs(rng, 3):
            assert frames[name].transfer_residual(u) < 1e-11

    def test_reference_eigenvalues(self, rng, frames):
        for frame in frames.values():
            omega, omega_bar, _, _ = frame.omega_states()
            N = frame.params.N
            for u, _ in spectral_pairs(rng, 2):
                C = frame.gauged_doublerow(u)[2]
                km = frame.k_minus_tilde(u)[1, 0]
                assert rel_residual(C @ omega, (-1) ** N * km * frame.d(u) * frame.d(-u - 1) * omega) < 1e-11
                assert rel_residual(omega_bar @ C, (-1) ** N * km * frame.a(u) * frame.a(-u - 1) * omega_bar) < 1e-11


class TestSovBasis:
    def test_index_validation(self, frames):
        p = frames["A"].params
        assert check_index(p, [0, 1, 1]) == (0, 1, 1)
        with pytest.raises(DimensionError):
            check_index(p, (0, 2, 0))
        with pytest.raises(DimensionError):
            check_index(p, (0, 1))
        assert len(list(sov_indices(frames["B"].params))) == 9

    def test_requires_generic_theta(self):
        frame = SovFrame(make_params("A", homogeneous=True))
        with pytest.raises(DegenerateError):
            frame.sov_basis((1, 0, 0))

    @pytest.mark.parametrize("name", ["A", "B", "C"])
    def test_c_eigenvalues(self, rng, frames, name):
        frame = frames[name]
        us = [u for u, _ in spectral_pairs(rng, 4)]
        for idx in sov_indices(frame.params):
            r, l = frame.sov_basis(idx), frame.sov_basis_left(idx)
            for u in us:
                C = frame.gauged_doublerow(u)[2]
                assert rel_residual(C @ r, frame.h(u, idx) * r) < 1e-9
                assert rel_residual(l @ C, frame.hbar(u, idx) * l) < 1e-8

    @pytest.mark.parametrize("name", ["A", "B", "C"])
    def test_complete(self, frames, name):
        B = frames[name].basis_matrix()
        assert np.linalg.matrix_rank(B) == B.shape[0]

    @pytest.mark.parametrize("name", ["A", "B", "C"])
    def test_pairing_is_diagonal(self, frames, name):
        P = frames[name].pairing_matrix()
        off = P - np.diag(np.diag(P))
        assert np.linalg.norm(off) < 1e-7 * np.linalg.norm(P)
        assert np.all(np.abs(np.diag(P)) > 0)

    def test_plain_pairing_is_not_diagonal(self, frames):
        # without the α ↔ 2s−α relabeling the left/right families are not dual
        frame = frames["A"]
        idxs = list(sov_indices(frame.params))
        L = np.array([frame.sov_basis_left(i) for i in idxs])
        R = np.column_stack([frame.sov_basis(i) for i in idxs])
        P = L @ R
        off = P - np.diag(np.diag(P))
        assert np.linalg.norm(off) > 1e-3 * np.linalg.norm(P)


class TestDbar:
    @pytest.mark.parametrize("name", ["A", "B", "C"])
    def test_annihilates_omega(self, frames, name):
        frame = frames[name]
        omega = frame.omega_states()[0]
        for b in frame.beta:
            D = frame.dbar(b)
            assert np.linalg.norm(D @ omega) < 1e-10 * np.linalg.norm(D, 2) * np.linalg.norm(omega)

    def test_pole(self, frames):
        with pytest.raises(PoleError):
            frames["A"].dbar(-0.5)

    @pytest.mark.parametrize("name", ["A", "B", "C"])
    def test_quantum_determinant(self, rng, frames, name):
        for u, _ in spectral_pairs(rng, 5):
            assert frames[name].quantum_determinant_residual(u) < 1e-9

    @pytest.mark.parametrize("name", ["A", "B", "C"])
    def test_action_on_basis(self, frames, name):
        frame = frames[name]
        for idx in sov_indices(frame.params):
            for n, m in enumerate(idx):
                if m == 0:
                    continue
                lower = idx[:n] + (m - 1,) + idx[n + 1:]
                got = frame.dbar(frame.beta[n] - m * frame.eta) @ frame.sov_basis(idx)
                want = frame.dbar_action_coefficient(n, m) * frame.sov_basis(lower)
                assert rel_residual(got, want) < 1e-8


@pytest.fixture(scope="module")
def spectra(frames):
    out = {}
    for name, frame in frames.items():
        tracks, _ = track_eigenvalues(frame.params, 42)
        out[name] = (tracks, solve_spectrum(frame.params, seed=42, states=False))
    return out


class TestScalarProducts:
    @pytest.mark.parametrize("name", ["A", "B", "C"])
    def test_closed_form(self, frames, spectra, name):
        frame = frames[name]
        omega = frame.omega_states()[0]
        tracks, sols = spectra[name]
        for track, sol in zip(tracks, sols):
            F0 = track.left @ omega
            for idx in sov_indices(frame.params):
                direct = frame.scalar_product_F(track.left, idx)
                assert abs(direct - F0 * frame.closed_form_F(idx, sol.Q)) < 1e-7 * abs(direct)

    def test_single_excitation(self, frames, spectra):
        frame = frames["A"]
        tracks, sols = spectra["A"]
        track, Q = tracks[0], sols[0].Q
        p, N, eta = BOUNDARY.p, frame.params.N, frame.eta
        F0 = track.left @ frame.omega_states()[0]
        for n, b in enumerate(frame.beta):
            idx = tuple(1 if k == n else 0 for k in range(N))
            expected = (-1) ** N * (p + b) * frame.a(b) * frame.d(-b - eta) * Q(b - eta) / Q(b)
            assert frame.scalar_product_F(track.left, idx) / F0 == pytest.approx(expected, rel=1e-8)
            assert frame.closed_form_F((0,) * N, Q) == 1

    def test_recursion_without_roots(self, frames, spectra):
        frame = frames["B"]
        tracks, _ = spectra["B"]
        for track in tracks:
            for idx in itertools.product(range(3), repeat=2):
                for n in range(2):
                    if idx[n] == 1:
                        assert frame.recursion_residual(track.left, track, idx, n) < 1e-8

    def test_recursion_bounds(self, frames, spectra):
        tracks, _ = spectra["B"]
        with pytest.raises(DimensionError):
            frames["B"].recursion_residual(tracks[0].left, tracks[0], (0, 0), 0)


class TestVacuumOverlap:
    @pytest.mark.parametrize("name", ["A", "B", "C"])
    def test_all_indices(self, frames, name):
        frame = frames[name]
        for idx in sov_indices(frame.params):
            pred = frame.inner_product_vac(idx)
            assert abs(pred - frame.inner_product_vac_direct(idx)) < 1e-8 * abs(pred)

    def test_trivial_and_double(self, frames):
        frame = frames["B"]
        assert frame.inner_product_vac((0, 0)) == 1
        b, eta, p = frame.beta[0], frame.eta, BOUNDARY.p
        factor = lambda k: (-1) ** 2 * (p + b - k * eta) * frame.a(b - k * eta) * frame.d(-b + (k - 1) * eta)
        assert frame.inner_product_vac((2, 0)) == pytest.approx(factor(0) * factor(1), rel=1e-14)
        assert frame.inner_product_vac_direct((2, 0)) == pytest.approx(factor(0) * factor(1), rel=1e-8)
