import numpy as np
import pytest

from cher.st0 import (
    NoiseConfig,
    ST0Params,
    Trajectory,
    default_tau_grid,
    distribution_moments,
    identify_axis,
    noise_study,
    recover_distribution,
    simulate_return_probs,
)


def recover(params):
    tau = default_tau_grid(params)
    traj = Trajectory.from_probabilities(simulate_return_probs(params, tau))
    fit = identify_axis(traj)
    return traj, fit, recover_distribution(traj, fit)


@pytest.mark.parametrize("J", [0.37, 1.5])
def test_axis_and_frequency(J):
    p = ST0Params(J=J)
    _, fit, _ = recover(p)
    assert fit.omega == pytest.approx(p.omega, rel=1e-3)
    assert fit.Omega == pytest.approx(p.Omega, abs=1e-6)


def test_initial_projections():
    P = simulate_return_probs(ST0Params(), np.array([0.0, 1.0])).P
    assert np.allclose(P[0], [0.5, 0.0, 0.5], atol=1e-12)


def test_unitary_limit_stays_on_sphere():
    p = ST0Params(T2star=1e12)
    tau = np.linspace(0, 20, 101)
    r = Trajectory.from_probabilities(simulate_return_probs(p, tau)).r
    assert np.allclose(np.linalg.norm(r, axis=1), 1, atol=1e-9)


def test_radius_nonincreasing():
    p = ST0Params()
    r = Trajectory.from_probabilities(simulate_return_probs(p, default_tau_grid(p))).r
    rad = np.linalg.norm(r, axis=1)
    assert np.all(np.diff(rad) <= 1e-12)


def test_distribution_centered_at_positive_omega():
    p = ST0Params()
    _, _, q = recover(p)
    mean, std = distribution_moments(q)
    assert mean == pytest.approx(p.omega, rel=1e-3)
    assert std == pytest.approx(np.sqrt(2) / p.T2star, rel=0.05)


def test_broadens_when_t2star_halves():
    s_long = distribution_moments(recover(ST0Params(T2star=30))[2])[1]
    s_short = distribution_moments(recover(ST0Params(T2star=15))[2])[1]
    assert s_short > 1.5 * s_long


def test_zero_noise_has_zero_spread():
    p = ST0Params()
    s = noise_study(p, default_tau_grid(p), NoiseConfig(sigma=0.0, repeats=3))
    assert s.std == 0 and s.failures == 0


def test_noise_study_deterministic():
    p = ST0Params()
    tau = default_tau_grid(p)
    a = noise_study(p, tau, NoiseConfig(repeats=5, seed=7))
    b = noise_study(p, tau, NoiseConfig(repeats=5, seed=7))
    assert np.array_equal(a.values, b.values)


def test_mean_nonclassicality_nonincreasing_in_noise():
    # expected physics: more noise should not create nonclassicality on average
    p = ST0Params()
    tau = default_tau_grid(p)
    means = [noise_study(p, tau, NoiseConfig(sigma=s, repeats=40)).mean for s in (0.0, 0.025, 0.05)]
    assert all(b <= a + 1e-9 for a, b in zip(means, means[1:]))


def test_parameter_validation():
    with pytest.raises(ValueError):
        ST0Params(T2star=0)
    with pytest.raises(ValueError):
        ST0Params(envelope="lorentzian")
    with pytest.raises(ValueError):
        NoiseConfig(sigma=-1)
