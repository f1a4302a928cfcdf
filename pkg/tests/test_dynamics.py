import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from vibtele.dynamics import (
    PulseKind,
    PulseSpec,
    RamanGateSpec,
    RamanPhysicalParams,
    antijc_unitary,
    bell_time,
    carrier_unitary,
    effective_rabi,
    jc_unitary,
    raman_unitary,
    wrap_phase,
)
from vibtele.statevec import (
    Layout,
    StateVector,
    SubsystemDescriptor,
    apply_unitary,
    fidelity_up_to_phase,
    reduced_density_matrix,
)

SP = np.array([[0, 0], [1, 0]], dtype=complex)  # |e><g| with basis (g, e)
SM = SP.conj().T
angles = st.floats(0, 4 * math.pi, allow_nan=False)
phases = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)


def ladder(n_max):
    return np.diag(np.sqrt(np.arange(1, n_max + 1)), -1).astype(complex)  # a†


def unitarity_error(u):
    return np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))


# generator oracles, written directly from the operator expressions
def carrier_oracle(area, phase):
    return expm(-0.5j * area * (np.exp(1j * phase) * SP + np.exp(-1j * phase) * SM))


def antijc_oracle(area, phase, n_max):
    ad = ladder(n_max)
    gen = np.exp(-1j * phase) * np.kron(SP, ad)
    return expm(-0.5j * area * (gen + gen.conj().T))


def jc_oracle(area, phase, n_max):
    ad = ladder(n_max)
    gen = np.exp(-1j * phase) * np.kron(SP, ad.conj().T)
    return expm(-0.5j * area * (gen + gen.conj().T))


def raman_oracle(phi, phi0, varphi, angle):
    h = (np.kron(SP, SP) * np.exp(2j * phi) - np.kron(SP, SM) * np.exp(1j * phi0) - 0.5 * np.eye(4)) * np.exp(1j * varphi)
    return expm(-1j * angle * (h + h.conj().T))


class TestCarrier:
    def test_zero_area_identity(self):
        assert np.array_equal(carrier_unitary(0.0, 1.3), np.eye(2))

    def test_full_turn_is_minus_identity(self):
        assert np.allclose(carrier_unitary(2 * math.pi, 0.7), -np.eye(2), atol=1e-15)

    def test_pi_on_excited(self):
        # frozen from carrier_oracle(pi, 0) @ |e>
        out = carrier_unitary(math.pi, 0.0) @ np.array([0, 1])
        assert np.allclose(out, [-1j, 0], atol=1e-15)
        assert np.allclose(carrier_oracle(math.pi, 0.0) @ np.array([0, 1]), [-1j, 0], atol=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(angles, phases)
    def test_matches_exponential(self, area, phase):
        assert np.max(np.abs(carrier_unitary(area, phase) - carrier_oracle(area, phase))) < 1e-12


class TestSidebands:
    @pytest.mark.parametrize("n_max", [1, 2, 3, 5])
    def test_antijc_matches_exponential_below_edge(self, n_max):
        # the oracle couples |g, n_max> out of the ladder only through a† which is
        # truncated to zero there; both agree on the whole truncated space
        for area, phase in [(math.pi, 0.4), (1.7, -2.0), (0.3, 3.0)]:
            assert np.max(np.abs(antijc_unitary(area, phase, n_max) - antijc_oracle(area, phase, n_max))) < 1e-12

    @pytest.mark.parametrize("n_max", [1, 2, 3, 5])
    def test_jc_matches_exponential(self, n_max):
        for area, phase in [(math.pi, 0.4), (1.7, -2.0), (0.3, 3.0)]:
            assert np.max(np.abs(jc_unitary(area, phase, n_max) - jc_oracle(area, phase, n_max))) < 1e-12

    def test_antijc_mapping_example(self):
        alpha, beta, theta = 0.6, 0.8j, 0.9
        psi = np.kron([0, 1], [alpha, beta, 0, 0])
        out = antijc_unitary(math.pi, theta, 3) @ psi
        expected = np.kron([-1j * cmath.exp(1j * theta) * beta, alpha], [1, 0, 0, 0])
        assert np.max(np.abs(out - expected)) < 1e-15

    @pytest.mark.parametrize("area", [0.0, 0.5, math.pi, 5.0])
    def test_antijc_dark_state(self, area):
        e0 = np.kron([0, 1], [1, 0, 0, 0])
        assert np.array_equal(antijc_unitary(area, 1.1, 3) @ e0, e0)

    def test_antijc_double_pi_on_ground(self):
        g0 = np.kron([1, 0], [1, 0, 0, 0]).astype(complex)
        u = antijc_unitary(math.pi, 0.8, 3)
        assert np.allclose(u @ u @ g0, -g0, atol=1e-15)

    def test_jc_correction_example(self):
        alpha, beta, theta, chi, dphi = 0.6, 0.8, 0.4, 1.3, 0.25
        x = cmath.exp(2j * (dphi + theta / 2))
        psi = np.kron([1, 0], [alpha, 0, 0, 0]) + np.kron([0, 1], [-1j * x * beta, 0, 0, 0])
        out = jc_unitary(math.pi, chi, 3) @ psi
        expected = np.kron([1, 0], [alpha, -cmath.exp(2j * (dphi + (theta + chi) / 2)) * beta, 0, 0])
        assert np.max(np.abs(out - expected)) < 1e-15

    @pytest.mark.parametrize("area", [0.0, 0.5, math.pi, 5.0])
    def test_jc_dark_state(self, area):
        g0 = np.kron([1, 0], [1, 0, 0, 0])
        assert np.array_equal(jc_unitary(area, 0.3, 3) @ g0, g0)

    def test_jc_pi_on_e1_uses_sqrt2_rung(self):
        chi = 0.7
        e1 = np.kron([0, 1], [0, 1, 0, 0])
        out = jc_unitary(math.pi, chi, 3) @ e1
        # frozen from jc_oracle: rung n=1 rotates at pi*sqrt(2)
        ref = jc_oracle(math.pi, chi, 3) @ e1
        assert np.max(np.abs(out - ref)) < 1e-13
        c = math.cos(math.pi * math.sqrt(2) / 2)
        s = math.sin(math.pi * math.sqrt(2) / 2)
        assert out[4 + 1] == pytest.approx(c, abs=1e-15)
        assert out[2] == pytest.approx(-1j * cmath.exp(1j * chi) * s, abs=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(angles, angles, phases)
    def test_antijc_composition_on_lowest_block(self, a, b, phase):
        u = antijc_unitary(a, phase, 3) @ antijc_unitary(b, phase, 3)
        w = antijc_unitary(a + b, phase, 3)
        blk = [0, 4 + 1]  # |g,0>, |e,1>
        assert np.max(np.abs(u[np.ix_(blk, blk)] - w[np.ix_(blk, blk)])) < 1e-12


class TestRaman:
    def test_zero_angle_identity(self):
        assert np.allclose(raman_unitary(RamanGateSpec("a", "b", 0.3, 0.4, 0.5, 0.0)), np.eye(4))

    @settings(max_examples=50, deadline=None)
    @given(phases, phases, phases, angles)
    def test_matches_exponential(self, phi, phi0, varphi, angle):
        u = raman_unitary(RamanGateSpec("a", "b", phi, phi0, varphi, angle))
        assert np.max(np.abs(u - raman_oracle(phi, phi0, varphi, angle))) < 1e-11

    @pytest.mark.parametrize("phiB", [0.0, 0.4, math.pi / 2, 2.5])
    def test_bell_state_from_ground(self, phiB):
        out = raman_unitary(RamanGateSpec("a", "b", phiB, 1.1, 0.0, math.pi / 4)) @ np.array([1, 0, 0, 0])
        expected = np.array([1, 0, 0, -1j * cmath.exp(2j * phiB)]) / math.sqrt(2)
        assert fidelity_up_to_phase(out, expected) == pytest.approx(1.0, abs=1e-14)

    def test_vibration_independence(self):
        rng = np.random.default_rng(4)
        layout = Layout([SubsystemDescriptor.spin("a"), SubsystemDescriptor.spin("b"),
                         SubsystemDescriptor.mode("m", 3)], {"a": "B", "b": "B"})
        spins = rng.normal(size=4) + 1j * rng.normal(size=4)
        mode = rng.normal(size=4) + 1j * rng.normal(size=4)
        v = np.kron(spins / np.linalg.norm(spins), mode / np.linalg.norm(mode))
        s = StateVector(layout, v)
        out = apply_unitary(s, raman_unitary(RamanGateSpec("a", "b", 0.3, 0.9, 0.0)), ["a", "b"])
        assert np.max(np.abs(reduced_density_matrix(out, "m") - reduced_density_matrix(s, "m"))) < 1e-12

    def test_diagonal_shift_is_global_phase(self):
        rng = np.random.default_rng(12)
        phi, phi0, angle = 0.7, 1.9, math.pi / 4
        h = np.kron(SP, SP) * np.exp(2j * phi) - np.kron(SP, SM) * np.exp(1j * phi0)
        no_shift = expm(-1j * angle * (h + h.conj().T))
        u = raman_unitary(RamanGateSpec("a", "b", phi, phi0, 0.0, angle))
        for _ in range(20):
            v = rng.normal(size=4) + 1j * rng.normal(size=4)
            v /= np.linalg.norm(v)
            assert fidelity_up_to_phase(u @ v, no_shift @ v) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(angles, phases, st.integers(1, 7))
def test_all_pulses_unitary(area, phase, n_max):
    for u in (carrier_unitary(area, phase), jc_unitary(area, phase, n_max), antijc_unitary(area, phase, n_max),
              raman_unitary(RamanGateSpec("a", "b", phase, -phase, 0.5 * phase, area))):
        assert unitarity_error(u) < 1e-12


class TestEffectiveRabi:
    def test_formula(self):
        assert effective_rabi(RamanPhysicalParams(1.0, 0.1, 0.02)) == pytest.approx(1.0, rel=1e-15)

    def test_eta_squared_scaling(self):
        base = effective_rabi(RamanPhysicalParams(1.3, 0.07, 0.5))
        assert effective_rabi(RamanPhysicalParams(1.3, 0.14, 0.5)) == pytest.approx(4 * base, rel=1e-14)

    def test_zero_coupling_has_no_bell_time(self):
        p = RamanPhysicalParams(0.0, 0.1, 0.02)
        assert effective_rabi(p) == 0
        with pytest.raises(ZeroDivisionError):
            bell_time(p)

    def test_zero_detuning(self):
        with pytest.raises(ZeroDivisionError):
            effective_rabi(RamanPhysicalParams(1.0, 0.1, 0.0))

    def test_bell_time(self):
        assert bell_time(RamanPhysicalParams(1.0, 0.1, 0.02)) == pytest.approx(math.pi / 4)


class TestSpecs:
    def test_carrier_has_no_mode(self):
        with pytest.raises(ValueError):
            PulseSpec(PulseKind.CARRIER, "ion1.spin", "trapA.mode")

    def test_sideband_needs_mode(self):
        with pytest.raises(ValueError):
            PulseSpec(PulseKind.JC, "ion1.spin")

    def test_negative_area(self):
        with pytest.raises(ValueError):
            PulseSpec(PulseKind.CARRIER, "ion1.spin", area=-1.0)

    def test_phase_reduced_mod_two_pi(self):
        assert PulseSpec(PulseKind.CARRIER, "i", phase=-0.5).phase == pytest.approx(2 * math.pi - 0.5)

    def test_raman_distinct_ions(self):
        with pytest.raises(ValueError):
            RamanGateSpec("a", "a")

    @pytest.mark.parametrize("x, expected", [(math.pi, math.pi), (-math.pi, math.pi), (3 * math.pi / 2, -math.pi / 2),
                                             (0.0, 0.0)])
    def test_wrap_phase(self, x, expected):
        assert wrap_phase(x) == pytest.approx(expected)
