import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from conftest import random_herm, seeds
from occur.errors import DegeneracyError, RangeError, ShapeError, ValidationError
from occur.linalg import PAULI_I, PAULI_X, PAULI_Z, tensor
from occur.model import (
    BathSpectrum,
    DriveSchedule,
    EnvSpec,
    ObservableSpec,
    SystemSpec,
    big_gamma,
    build_eigenoperators,
    check_density_matrix,
    commutes_with_interaction,
    gamma,
    instantaneous_modes,
    interaction_hamiltonian,
    lamb_shift_s,
    principal_value,
    total_hamiltonian,
)

KET_E = np.array([1.0, 0.0])
KET_G = np.array([0.0, 1.0])


def check_eigenoperators(h, a, eig):
    total = sum(op for _, op in eig) if len(eig) else np.zeros_like(a)
    assert np.max(np.abs(total - a)) < 1e-10
    for w, op in eig:
        assert np.max(np.abs(eig.get(-w) - op.conj().T)) < 1e-10
        assert np.max(np.abs(h @ op - op @ h + w * op)) < 1e-9
    assert np.all(np.diff(eig.frequencies) > 0)


class TestEigenoperators:
    def test_two_level_sigma_x(self):
        eig = build_eigenoperators(0.5 * PAULI_Z, PAULI_X)
        assert list(eig.frequencies) == [-1.0, 1.0]
        # hand projector arithmetic: Pi(-1/2) sx Pi(+1/2) = |g><e|
        assert np.array_equal(eig.get(1.0), np.outer(KET_G, KET_E))
        assert np.array_equal(eig.get(-1.0), np.outer(KET_E, KET_G))

    def test_diagonal_coupling(self):
        a = np.diag([0.3, -2.0, 1.0])
        eig = build_eigenoperators(np.diag([1.0, 2.0, 4.0]), a)
        assert list(eig.frequencies) == [0.0]
        assert np.array_equal(eig.get(0.0), a)

    def test_random_dim4_completeness(self):
        h, a = random_herm(4, 31), random_herm(4, 32)
        eig = build_eigenoperators(h, a)
        assert np.max(np.abs(sum(op for _, op in eig) - a)) < 1e-10

    @given(seeds, st.integers(2, 6))
    def test_invariants(self, seed, d):
        h, a = random_herm(d, seed), random_herm(d, seed + 1)
        check_eigenoperators(h, a, build_eigenoperators(h, a))

    def test_degenerate_bohr_frequencies_binned(self):
        # equally spaced ladder: three transitions share omega = 1
        h = np.diag([0.0, 1.0, 2.0, 3.0])
        a = random_herm(4, 5)
        eig = build_eigenoperators(h, a)
        assert list(eig.frequencies) == [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]
        check_eigenoperators(h, a, eig)

    def test_zero_components_dropped(self):
        eig = build_eigenoperators(0.5 * PAULI_Z, PAULI_X)
        assert np.array_equal(eig.get(0.0), np.zeros((2, 2)))
        assert 0.0 not in eig.operators

    def test_shape_and_hermiticity(self):
        with pytest.raises(ShapeError):
            build_eigenoperators(np.eye(2), np.eye(3))
        with pytest.raises(ValidationError):
            build_eigenoperators(np.eye(2), np.array([[0, 1], [0, 0]]))


class TestGamma:
    def test_zero_temperature_absorption(self):
        assert gamma(BathSpectrum(0.0, 0.1, 10.0), -1.0) == 0.0

    def test_zero_temperature_emission(self):
        val = gamma(BathSpectrum(0.0, 0.1, 10.0), 1.0)
        assert abs(val - 2 * math.pi * 0.1 * math.exp(-0.1)) < 1e-15

    def test_detailed_balance_example(self):
        b = BathSpectrum(0.5, 0.1, 10.0)
        assert abs(gamma(b, -1.0) / gamma(b, 1.0) - math.exp(-2.0)) < 1e-14

    def test_thermal_closed_form(self):
        b = BathSpectrum(2.0, 0.05, 3.0)
        w = 0.7
        n = 1 / (math.exp(w / 2.0) - 1)
        base = 2 * math.pi * 0.05 * w * math.exp(-w / 3.0)
        assert abs(gamma(b, w) - base * (n + 1)) < 1e-13
        assert abs(gamma(b, -w) - base * n) < 1e-13

    def test_zero_frequency_limit(self):
        b = BathSpectrum(1.3, 0.2, 10.0)
        assert gamma(b, 0.0) == pytest.approx(2 * math.pi * 0.2 * 1.3, rel=1e-15)
        assert gamma(BathSpectrum(0.0, 0.2, 10.0), 0.0) == 0.0

    @pytest.mark.parametrize("temp", [0.1, 1.0, 10.0])
    def test_continuity_at_zero(self, temp):
        b = BathSpectrum(temp, 0.1, 10.0)
        for w in (1e-6, -1e-6):
            assert abs(gamma(b, w) - gamma(b, 0.0)) < 1e-4

    @given(st.floats(0.01, 20), st.floats(1e-3, 50))
    def test_kms(self, temp, w):
        b = BathSpectrum(temp, 0.1, 10.0)
        g_plus, g_minus = gamma(b, w), gamma(b, -w)
        if g_plus > 0:
            assert abs(g_minus / g_plus - math.exp(-w / temp)) <= 1e-10 * math.exp(-w / temp)

    def test_nonnegative_and_vectorised(self):
        w = np.linspace(-200, 200, 4001)
        for temp in (0.0, 0.3, 30.0):
            vals = gamma(BathSpectrum(temp, 0.1, 10.0), w)
            assert vals.shape == w.shape
            assert np.all(vals >= 0)
            assert np.all(np.isfinite(vals))

    def test_validation(self):
        with pytest.raises(ValidationError):
            BathSpectrum(-1.0)
        with pytest.raises(ValidationError):
            BathSpectrum(0.0, eta=0.0)
        with pytest.raises(ValidationError):
            BathSpectrum(0.0, omega_c=-2.0)
        with pytest.raises(ValidationError):
            BathSpectrum(lamb_shift_mode="exact")


class TestLambShift:
    def test_zero_mode(self):
        assert lamb_shift_s(BathSpectrum(), 3.7) == 0.0

    def test_table_midpoint(self):
        b = BathSpectrum(lamb_shift_mode="table", s_table=[(-1, -0.2), (1, 0.2)])
        assert lamb_shift_s(b, 0.0) == 0.0
        assert lamb_shift_s(b, 0.5) == pytest.approx(0.1, abs=1e-15)

    def test_table_range(self):
        b = BathSpectrum(lamb_shift_mode="table", s_table=[(-1, -0.2), (1, 0.2)])
        with pytest.raises(RangeError):
            lamb_shift_s(b, 1.5)

    def test_table_validation(self):
        with pytest.raises(ValidationError):
            BathSpectrum(lamb_shift_mode="table", s_table=[(0, 1)])
        with pytest.raises(ValidationError):
            BathSpectrum(lamb_shift_mode="table", s_table=[(0, 1), (0, 2)])

    def test_pv_of_constant_vanishes(self):
        val = principal_value(lambda w: np.ones_like(w), 0.0, 200.0, 1e-3, 1e-2)
        assert val == 0.0

    # at T = 0 gamma has a kink at the origin that the fixed grid straddles
    @pytest.mark.parametrize("temp,omega,tol", [(0.0, 1.0, 5e-4), (0.5, -0.7, 1e-4), (2.0, 3.0, 1e-4)])
    def test_pv_against_cauchy_quadrature(self, temp, omega, tol):
        b = BathSpectrum(temp, 0.1, 10.0, lamb_shift_mode="pv_quadrature")
        half = 20 * b.omega_c
        # QUADPACK Cauchy weight: PV int f(x) / (x - omega) dx
        ref, _ = integrate.quad(
            lambda x: gamma(b, x), omega - half, omega + half, weight="cauchy", wvar=omega, limit=400
        )
        ref = -ref / (2 * math.pi)
        assert abs(lamb_shift_s(b, omega) - ref) < tol * max(1.0, abs(ref))

    def test_big_gamma(self):
        b = BathSpectrum(0.0, 0.1, 10.0)
        assert big_gamma(b, 1.0) == complex(0.5 * gamma(b, 1.0), 0.0)
        assert big_gamma(b, -2.0) == 0
        bt = BathSpectrum(1.0, 0.1, 10.0, lamb_shift_mode="table", s_table=[(-5, 1), (5, -1)])
        for w in np.linspace(-5, 5, 21):
            z = big_gamma(bt, w)
            assert abs(z + z.conjugate() - gamma(bt, w)) < 1e-15
            assert z.real >= 0


class TestSpecs:
    def test_density_checks(self):
        check_density_matrix(np.eye(2) / 2)
        with pytest.raises(ValidationError):
            check_density_matrix(np.eye(2))
        with pytest.raises(ValidationError):
            check_density_matrix(np.diag([1.5, -0.5]))
        with pytest.raises(ValidationError):
            check_density_matrix(np.array([[0.5, 0.5], [0.0, 0.5]]))

    def test_non_hermitian_coupling_rejected(self):
        with pytest.raises(ValidationError) as info:
            SystemSpec(2, PAULI_Z, (np.array([[0, 1], [0, 0]]),))
        assert "system.couplings" in str(info.value)

    def test_environment_checks(self):
        with pytest.raises(ValidationError):
            EnvSpec(2, PAULI_Z, (PAULI_X,), np.diag([1.2, -0.2]))

    def test_interaction_and_total(self):
        s = SystemSpec(2, 0.5 * PAULI_Z, (0.1 * PAULI_X,))
        e = EnvSpec(2, 1.5 * PAULI_Z, (PAULI_X,), np.diag([0.0, 1.0]))
        hi = interaction_hamiltonian(s, e)
        assert np.array_equal(hi, 0.1 * tensor(PAULI_X, PAULI_X))
        h = total_hamiltonian(s, e)
        assert np.max(np.abs(h - tensor(0.5 * PAULI_Z, PAULI_I) - tensor(PAULI_I, 1.5 * PAULI_Z) - hi)) == 0

    def test_commuting_flag(self):
        s = SystemSpec(2, 0.5 * PAULI_Z, (PAULI_X,))
        e = EnvSpec(2, PAULI_Z, (PAULI_X,), np.eye(2) / 2)
        assert commutes_with_interaction(s, e, PAULI_X)
        assert not commutes_with_interaction(s, e, PAULI_Z)
        assert commutes_with_interaction(s, None, 2 * PAULI_X)

    def test_observable_time_dependence(self):
        o = ObservableSpec("g", PAULI_Z, dgdt=PAULI_X)
        assert np.array_equal(o.at(2.0), PAULI_Z + 2.0 * PAULI_X)
        with pytest.raises(ValidationError):
            ObservableSpec("bad", np.array([[0, 1], [0, 0]]))

    def test_scaled_system(self):
        s = SystemSpec(2, PAULI_Z, (PAULI_X, PAULI_Z))
        t = s.scaled(0.25)
        assert np.array_equal(t.couplings[1], 0.25 * PAULI_Z)
        assert np.array_equal(t.h_s, s.h_s)


class TestDrive:
    def test_linear_sweep(self):
        d = DriveSchedule("linear_sweep", h_start=PAULI_Z, h_end=PAULI_X, t_final=4.0)
        assert np.array_equal(d.hamiltonian(1.0), 0.75 * PAULI_Z + 0.25 * PAULI_X)
        with pytest.raises(RangeError):
            d.hamiltonian(4.5)

    def test_samples(self):
        d = DriveSchedule("user_samples", sample_times=[0, 1, 3], samples=(PAULI_Z, PAULI_X, -PAULI_Z))
        assert d.t_final == 3.0
        assert np.array_equal(d.hamiltonian(2.0), 0.5 * PAULI_X - 0.5 * PAULI_Z)
        with pytest.raises(ValidationError):
            DriveSchedule("user_samples", sample_times=[0, 0], samples=(PAULI_Z, PAULI_X))

    def test_sweep_samples_hermitian(self):
        d = DriveSchedule("linear_sweep", h_start=random_herm(3, 1), h_end=random_herm(3, 2), t_final=2.0)
        for t in np.linspace(0, 2, 17):
            h = d.hamiltonian(t)
            assert np.max(np.abs(h - h.conj().T)) < 1e-10

    def test_unknown_protocol(self):
        with pytest.raises(ValidationError):
            DriveSchedule("floquet")

    def test_degenerate_modes(self):
        with pytest.raises(DegeneracyError):
            instantaneous_modes(np.eye(2), 1e-9)
