import numpy as np
import pytest
import scipy.linalg

from openchain import BoundaryParams, ModelParams
from openchain.errors import DegenerateError, DimensionError, PoleError
from openchain.rmatrix import HALF, SpinLabel, r_half_half, r_half_s_direct
from openchain.transfer import (
    TransferFamily,
    asymptotic_coefficient,
    blocks_to_matrix,
    closure_residual,
    commutator_residual,
    crossing_residual,
    delta_s,
    double_row_reflection_residual,
    double_row_U,
    hamiltonian,
    hierarchy_residual,
    leading_coefficient,
    log_derivative,
    monodromy_T,
    monodromy_That,
    rtt_residual,
    transfer,
    value_at_zero,
)

from conftest import BOUNDARY, make_params, spectral_pairs

GENERIC = BoundaryParams(0.8 + 0.1j, 1.2 - 0.2j, 0.6 + 0.3j, 0.45 - 0.1j)


def small(spin="1/2", theta=(0.31, -0.17), boundary=GENERIC, eta=0.9):
    return ModelParams(spin, len(theta), eta, boundary, theta)


class TestModelParams:
    def test_defaults_to_homogeneous(self):
        p = ModelParams("1", 2, 1.0, BOUNDARY)
        assert p.theta == (0j, 0j) and p.is_homogeneous
        assert p.dim == 9

    def test_validation(self):
        with pytest.raises(ValueError):
            ModelParams("1/2", 0, 1.0, BOUNDARY)
        with pytest.raises(ValueError):
            ModelParams("1/2", 2, 1.0, BOUNDARY, (0.1,))
        with pytest.raises(ValueError):
            ModelParams("1/2", 2, 0.0, BOUNDARY)

    def test_dimension_cap(self, monkeypatch):
        monkeypatch.setenv("WORKBENCH_MAX_DIM", "16")
        with pytest.raises(DimensionError):
            ModelParams("1", 3, 1.0, BOUNDARY)

    def test_genericity(self):
        small(theta=(0.31, -0.17)).check_generic()
        with pytest.raises(DegenerateError):
            small(theta=(0.3, 0.3 + 0.45)).check_generic()  # differ by η/2
        with pytest.raises(DegenerateError):
            small(theta=(0.0, 0.0)).check_generic()


class TestMonodromy:
    def test_single_site_is_one_factor(self):
        p = small(spin="1", theta=(0.23,))
        u = 0.4 + 0.1j
        M = blocks_to_matrix(monodromy_T(p, HALF, u))
        assert np.abs(M - r_half_s_direct(u - 0.23, 1, p.eta)).max() < 1e-14
        Mh = blocks_to_matrix(monodromy_That(p, HALF, u))
        assert np.abs(Mh - r_half_s_direct(u + 0.23, 1, p.eta)).max() < 1e-14

    def test_two_site_block_oracle(self):
        p = small()
        u = 0.4 + 0.1j
        eta = p.eta

        def blocks(v):
            R = r_half_half(v, eta).reshape(2, 2, 2, 2)  # [a, i, b, k]
            return [[R[a, :, b, :] for b in range(2)] for a in range(2)]

        R2, R1 = blocks(u - p.theta[1]), blocks(u - p.theta[0])
        M = monodromy_T(p, HALF, u)
        for a in range(2):
            for c in range(2):
                expected = sum(np.kron(R1[b][c], R2[a][b]) for b in range(2))
                assert np.abs(M[a, c] - expected).max() < 1e-14

    def test_rtt(self, rng):
        for spin in ("1/2", "1"):
            p = small(spin=spin)
            for u, v in spectral_pairs(rng, 3):
                assert rtt_residual(p, u, v) < 1e-10

    def test_hat_block_pattern(self, rng):
        for spin, theta in (("1/2", (0.31, -0.17, 0.23)), ("1", (0.31, -0.17))):
            p = small(spin=spin, theta=theta)
            u = 0.37 + 0.11j
            T = monodromy_T(p, HALF, -u - p.eta)
            Th = monodromy_That(p, HALF, u)
            sign = (-1) ** p.N
            expected = sign * np.array([[T[1, 1], -T[0, 1]], [-T[1, 0], T[0, 0]]])
            assert np.abs(Th - expected).max() / np.abs(Th).max() < 1e-12

    def test_double_row_reflection(self, rng):
        p = small(theta=(0.23,))
        for u, v in spectral_pairs(rng, 3):
            assert double_row_reflection_residual(p, u, v) < 1e-11
        p = small(spin="1", theta=(0.31, -0.17))
        for u, v in spectral_pairs(rng, 3):
            assert double_row_reflection_residual(p, u, v) < 1e-10


class TestTransfer:
    @pytest.mark.parametrize("spin, theta", [("1/2", (0.31, -0.17, 0.23)), ("1", (0.31, -0.17)), ("3/2", (0.31,))])
    def test_value_at_zero(self, spin, theta):
        p = small(spin=spin, theta=theta)
        t0 = transfer(p, HALF, 0)
        assert np.abs(t0 - value_at_zero(p) * np.eye(p.dim)).max() / abs(value_at_zero(p)) < 1e-12

    @pytest.mark.parametrize("spin, theta", [("1/2", (0.31, -0.17)), ("1", (0.31, -0.17))])
    def test_asymptotics(self, spin, theta):
        p = small(spin=spin, theta=theta)
        lead = leading_coefficient(p)
        assert np.abs(lead - asymptotic_coefficient(p) * np.eye(p.dim)).max() < 1e-10
        assert asymptotic_coefficient(p) == 2 * (GENERIC.xi * GENERIC.varsigma - 1)

    def test_commuting_family(self, rng):
        for spin, theta in (("1/2", (0.31, -0.17, 0.23)), ("1", (0.31, -0.17))):
            p = small(spin=spin, theta=theta)
            worst = max(commutator_residual(p, u, v) for u, v in spectral_pairs(rng, 10))
            assert worst < 1e-10
        p = small(spin="1", theta=(0.31, -0.17))
        for u, v in spectral_pairs(rng, 2):
            assert commutator_residual(p, u, v, HALF, SpinLabel(2)) < 1e-10
            assert commutator_residual(p, u, v, SpinLabel(2), SpinLabel(3)) < 1e-10

    def test_reversed_hat_ordering_fails(self, rng):
        p = small(theta=(0.31, -0.17, 0.23))
        u, v = spectral_pairs(rng, 1)[0]
        tu, tv = transfer(p, HALF, u, reverse=True), transfer(p, HALF, v, reverse=True)
        assert np.linalg.norm(tu @ tv - tv @ tu) / (np.linalg.norm(tu) * np.linalg.norm(tv)) > 1e-3

    def test_crossing(self, rng):
        for spin in ("1/2", "1"):
            p = small(spin=spin)
            for u, _ in spectral_pairs(rng, 5):
                assert crossing_residual(p, u) < 1e-10
                assert crossing_residual(p, u, SpinLabel(2)) < 1e-10

    def test_polynomial_degree(self, rng):
        p = small(theta=(0.31, -0.17))
        fam = TransferFamily(p)
        n = fam.degree()
        nodes = np.exp(2j * np.pi * np.arange(n + 1) / (n + 1))
        vals = [fam(z) for z in nodes]
        V = np.vander(nodes, n + 1, increasing=True)
        coeffs = np.linalg.solve(V, np.array([v.ravel() for v in vals]))
        z = 0.73 - 0.41j
        interp = (np.vander([z], n + 1, increasing=True) @ coeffs).reshape(p.dim, p.dim)
        assert np.linalg.norm(interp - fam(z)) / np.linalg.norm(fam(z)) < 1e-9

    def test_hierarchy_closes_with_identity_and_zero(self):
        p = small(spin="1", theta=(0.31, -0.17))
        assert np.array_equal(transfer(p, 0, 0.3), np.eye(9))
        assert not transfer(p, -0.5, 0.3).any()


class TestDelta:
    def test_zero_at_p(self):
        p = small(boundary=BoundaryParams(0.8, 1.2, 0.6, 0.0))
        assert delta_s(p, 0.8) == 0

    def test_single_site_oracle(self):
        bp = GENERIC
        p = small(spin="1", theta=(0.23,))
        u, eta, th, h = 0.41 - 0.2j, p.eta, 0.23, 1.5 * p.eta
        expected = (2 * u - 2 * eta) * (2 * u + 2 * eta) / ((2 * u - eta) * (2 * u + eta))
        expected *= ((1 + bp.varsigma**2) * u**2 - bp.p**2) * ((1 + bp.xi**2) * u**2 - bp.q**2)
        expected *= (u - th + h) * (u + th + h) * (u - th - h) * (u + th - h)
        assert delta_s(p, u) == pytest.approx(expected, rel=1e-14)

    def test_theta_sign_symmetry(self):
        u = 0.41 - 0.2j
        assert delta_s(small(theta=(0.31, -0.17)), u) == pytest.approx(delta_s(small(theta=(-0.31, 0.17)), u), rel=1e-14)

    def test_pole(self):
        p = small()
        with pytest.raises(PoleError):
            delta_s(p, p.eta / 2)


class TestHierarchy:
    def test_lowest_level(self, rng):
        p = small(theta=(0.31, -0.17))
        for u, _ in spectral_pairs(rng, 3):
            assert hierarchy_residual(p, HALF, u) < 1e-9

    @pytest.mark.parametrize("spin, j", [("1/2", 2), ("1", 2), ("1", 3), ("3/2", 2)])
    def test_fusion_hierarchy(self, rng, spin, j):
        theta = (0.31,) if spin == "3/2" else (0.31, -0.17)
        p = small(spin=spin, theta=theta)
        for u, _ in spectral_pairs(rng, 3):
            assert hierarchy_residual(p, SpinLabel(j), u) < 1e-9

    def test_delta_is_needed(self, rng):
        p = small(spin="1", theta=(0.31, -0.17))
        u = spectral_pairs(rng, 1)[0][0]
        assert hierarchy_residual(p, SpinLabel(2), u, with_delta=False) > 1e-2


class TestClosure:
    def test_spin_half(self):
        p = small(theta=(0.31, -0.17))
        for site in (1, 2):
            assert closure_residual(p, site) < 1e-9
            assert closure_residual(p, site, form="literal") < 1e-9

    @pytest.mark.parametrize("spin, theta, tol", [("1", (0.31, -0.17), 1e-8), ("3/2", (0.31,), 1e-7),
                                                  ("2", (0.31,), 1e-7)])
    def test_higher_spin(self, spin, theta, tol):
        p = small(spin=spin, theta=theta)
        for site in range(1, p.N + 1):
            assert closure_residual(p, site) < tol

    @pytest.mark.parametrize("spin, theta", [("1", (0.31, -0.17)), ("3/2", (0.31,))])
    def test_literal_argument_is_not_an_identity(self, spin, theta):
        # evaluating t^(s−1/2,s) at θ+(1/2+s)η instead of θ+η/2 breaks the identity for s ≥ 1
        p = small(spin=spin, theta=theta)
        assert closure_residual(p, 1, form="literal") > 1e-2

    def test_off_inhomogeneity_fails(self):
        # the same product evaluated away from any θ_l is not closed
        p = small(spin="1", theta=(0.31, -0.17))
        x, eta = 1.3 + 0.4j, p.eta
        lhs = transfer(p, p.s, x) @ transfer(p, HALF, x - 1.5 * eta)
        rhs = delta_s(p, x - 0.5 * eta) * transfer(p, HALF, x + 0.5 * eta)
        assert np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs) > 1e-2

    def test_bad_arguments(self):
        p = small()
        with pytest.raises(DimensionError):
            closure_residual(p, 3)
        with pytest.raises(ValueError):
            closure_residual(p, 1, form="other")


class TestHamiltonian:
    @pytest.mark.parametrize("name", ["A", "B", "C"])
    def test_commutes_with_transfer(self, rng, name):
        hp = make_params(name, homogeneous=True)
        H = hamiltonian(hp)
        for u, _ in spectral_pairs(rng, 3):
            t = transfer(hp, HALF, u)
            assert np.linalg.norm(H @ t - t @ H) / (np.linalg.norm(H) * np.linalg.norm(t)) < 1e-8
        assert np.linalg.norm(H - np.trace(H) / hp.dim * np.eye(hp.dim)) > 1e-3

    def test_diagonal_boundaries_hermitian(self):
        hp = ModelParams("1/2", 3, 1.0, BoundaryParams(0.8, 1.2, 0.0, 0.0))
        H = hamiltonian(hp)
        A = H - H.conj().T
        assert np.abs(A - np.trace(A) / hp.dim * np.eye(hp.dim)).max() < 1e-10

    def test_eigenvalues_are_log_derivatives(self):
        hp = make_params("A", homogeneous=True)
        H = hamiltonian(hp)
        _, vl, vr = scipy.linalg.eig(transfer(hp, HALF, 0.41 + 0.13j), left=True)
        for i in range(hp.dim):
            l, r = vl[:, i].conj(), vr[:, i]
            h_i = l @ H @ r / (l @ r)
            lam = lambda z: l @ transfer(hp, hp.s, z, scaled=True) @ r / (l @ r)
            assert abs(h_i - log_derivative(lam, radius=0.5)) < 1e-8 * max(1.0, abs(h_i))
