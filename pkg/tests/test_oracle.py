import numpy as np
import pytest

from cher.oracle import ModeConfig, TruncationError, discretize_bath, reduced_coherences, reduced_single_qubit
from cher.spin_boson import SpectralDensity, ohmic_closed_form

MODES3 = [(0.7, 0.3, 0.2), (1.3, 0.25 + 0.1j, -0.15), (2.1, 0.1, 0.3j)]


@pytest.mark.parametrize("T", [0.0, 0.5])
def test_fock_and_displacement_agree(T):
    t = np.linspace(0, 10, 41)
    a = reduced_coherences(ModeConfig(MODES3, temperature=T), t)
    b = reduced_coherences(ModeConfig(MODES3, fock_cutoff=40, temperature=T, method="truncated-fock"), t)
    for m in a.factors:
        assert np.max(np.abs(a.factors[m] - b.factors[m])) < 1e-8
    assert b.metadata["fock_leakage"] < 1e-6


def test_common_bath_protects_singlet_triplet_subspace():
    bath = discretize_bath(SpectralDensity(), 32)
    f = reduced_coherences(bath.mode_config(), np.linspace(0, 20, 50))
    assert np.allclose(f.factors[6], 1, atol=1e-14)


def test_single_mode_revival():
    w = 1.5
    t = np.array([0.0, np.pi / w, 2 * np.pi / w])
    phi = reduced_coherences(ModeConfig([(w, 0.4, 0.0)], n_qubits=1), t).factors[1]
    assert abs(phi[1]) < 1
    assert abs(phi[2]) == pytest.approx(1, abs=1e-12)


def test_discrete_phi_converges():
    t = np.linspace(0, 10, 101)
    exact = ohmic_closed_form(t).Phi
    errs = [np.max(np.abs(discretize_bath(SpectralDensity(), n).Phi(t) - exact)) for n in (16, 32, 64, 128)]
    assert all(b <= a / 2 for a, b in zip(errs, errs[1:]))
    assert errs[2] / exact.max() < 0.01


def test_truncation_reported():
    cfg = ModeConfig([(0.5, 1.5, 1.5)], fock_cutoff=6, method="truncated-fock")
    with pytest.raises(TruncationError, match="fock_cutoff"):
        reduced_coherences(cfg, np.linspace(0, 5, 5))


def test_relative_phase_changes_magnitude():
    # flipping phi_rel from 0 to pi is a partner spin flip, which leaves a +x
    # partner invariant; the magnitudes coincide in this model
    bath = discretize_bath(SpectralDensity(), 64)
    t = np.linspace(0, 10, 21)
    a = reduced_single_qubit(bath.mode_config(0.0), t).factors[1]
    b = reduced_single_qubit(bath.mode_config(np.pi), t).factors[1]
    assert np.max(np.abs(np.abs(a) - np.abs(b))) > 1e-3


def test_relative_phase_changes_factor_for_polarized_partner():
    bath = discretize_bath(SpectralDensity(), 64)
    t = np.linspace(0, 10, 21)
    a = reduced_single_qubit(bath.mode_config(0.0), t, partner_state="up").factors[1]
    b = reduced_single_qubit(bath.mode_config(np.pi), t, partner_state="up").factors[1]
    assert np.max(np.abs(a - b)) > 1e-2
    assert np.allclose(a, np.conj(b), atol=1e-12)
    with pytest.raises(ValueError, match="partner"):
        reduced_single_qubit(bath.mode_config(), t, partner_state="sideways")


def test_mode_config_validation():
    with pytest.raises(ValueError):
        ModeConfig([])
    with pytest.raises(ValueError):
        ModeConfig([(-1.0, 0.1, 0.1)])
    with pytest.raises(ValueError):
        ModeConfig(MODES3, method="exact")
