import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cher.dephasing import DephasingFactors
from cher.lie import root_system
from cher.measure import (
    NonclassicalityResult,
    nonclassicality_lp,
    nonclassicality_negativity,
    nonclassicality_of_dynamics,
    product_negativity,
    refinement_delta_of_grid,
    variational_distance,
)
from cher.retrieval import Axis, Delta, NoInversionStrategy, QuasiDistribution, invert_1d
from cher.spin_boson import BathParams, SpectralDensity, ohmic_closed_form, qubit_pair_factors
from scipy.special import erf


def qd(values, step=1.0, start=0.0):
    v = np.asarray(values, dtype=float)
    return QuasiDistribution("omega", (Axis("w", start, step, v.size),), v)


def signed(rng, n, step=1.0):
    v = rng.normal(size=n) + 0.3
    v = v / (v.sum() * step)
    return v


def test_three_cell_example():
    q = qd([-0.1, 0.6, 0.5])
    assert nonclassicality_negativity(q).value == pytest.approx(0.1, abs=1e-14)
    lp = nonclassicality_lp(q)
    assert lp.value == pytest.approx(0.1, abs=1e-9)
    assert lp.argmin[0] == pytest.approx(0, abs=1e-9)
    assert lp.argmin.sum() == pytest.approx(1, abs=1e-9)


def test_nonnegative_gives_zero():
    q = qd([0.2, 0.5, 0.3])
    assert nonclassicality_negativity(q).value == 0
    lp = nonclassicality_lp(q)
    assert lp.value == pytest.approx(0, abs=1e-12)
    assert np.allclose(lp.argmin, q.density, atol=1e-9)


def test_faithfulness_threshold():
    q = qd([-5e-10, 0.5, 0.5 + 5e-10])
    assert nonclassicality_negativity(q).value == 0
    q = qd([-2e-9, 0.5, 0.5 + 2e-9])
    assert nonclassicality_negativity(q).value > 0


def test_lp_matches_negativity(rng):
    for _ in range(50):
        n = int(rng.integers(1, 65))
        step = float(rng.uniform(0.05, 2))
        q = qd(signed(rng, n, step), step)
        assert abs(nonclassicality_lp(q).value - nonclassicality_negativity(q).value) < 1e-8


def test_lp_cap():
    with pytest.raises(ValueError, match="cap"):
        nonclassicality_lp(qd(np.full(10, 0.1)), cap=5)


def test_unnormalized_rejected():
    q = QuasiDistribution("omega", (Axis("w", 0, 1, 2),), np.array([1.0, 1.0]), check_mass=False)
    with pytest.raises(ValueError, match="normalized"):
        nonclassicality_negativity(q)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=2, max_size=40), st.lists(st.floats(-1, 1), min_size=2, max_size=40),
       st.sampled_from([0.25, 0.5, 0.75]))
def test_convexity(a, b, w):
    n = min(len(a), len(b))
    a, b = np.array(a[:n]) + 0.2, np.array(b[:n]) + 0.2
    if abs(a.sum()) < 1e-3 or abs(b.sum()) < 1e-3:
        return
    p1, p2 = qd(a / a.sum()), qd(b / b.sum())
    mix = qd(w * p1.density + (1 - w) * p2.density)
    N = lambda q: nonclassicality_negativity(q).value
    assert N(mix) <= w * N(p1) + (1 - w) * N(p2) + 1e-10


def test_distance_metric(rng):
    qs = [qd(signed(rng, 20)) for _ in range(3)]
    d = variational_distance
    assert d(qs[0], qs[0]) == 0
    assert d(qs[0], qs[1]) == d(qs[1], qs[0])
    assert d(qs[0], qs[2]) <= d(qs[0], qs[1]) + d(qs[1], qs[2]) + 1e-12


def test_disjoint_point_masses():
    p = QuasiDistribution("simple-root", (), np.array(1.0), (Delta("x6", 0.0),))
    q = QuasiDistribution("simple-root", (), np.array(1.0), (Delta("x6", 1.0),))
    assert variational_distance(p, q) == 1.0
    with pytest.raises(ValueError):
        variational_distance(p, qd([1.0]))


def test_gaussian_distance_closed_form():
    x0, h = -12.0, 0.001
    x = x0 + h * np.arange(24001)
    g = lambda mu: np.exp(-0.5 * (x - mu) ** 2) / np.sqrt(2 * np.pi)
    mu = 1.3
    D = variational_distance(qd(g(0), h, x0), qd(g(mu), h, x0))
    assert D == pytest.approx(erf(mu / (2 * np.sqrt(2))), abs=1e-6)
    p_success = (1 + D) / 2
    assert 0.5 < p_success < 1


def test_product_negativity_matches_dense(rng):
    a, b = signed(rng, 12), signed(rng, 9)
    dense = qd(np.outer(a, b).ravel())
    assert product_negativity([qd(a), qd(b)]) == pytest.approx(nonclassicality_negativity(dense).value, abs=1e-12)


def test_result_must_be_nonnegative():
    with pytest.raises(ValueError):
        NonclassicalityResult(-0.1, "negativity", {})


def test_qubit_gaussian_dynamics_is_classical():
    t = np.linspace(0, 40, 2048)
    f = DephasingFactors(2, t, {1: np.exp(-0.5 * 0.3 * t**2 - 1j * t)})
    r = nonclassicality_of_dynamics(f)
    assert r.value == 0.0
    assert r.refinement_delta is not None and r.span_delta is not None


def test_qutrit_independent_product():
    t = np.linspace(0, 40, 2048)
    a = np.exp(-0.5 * 0.3 * t**2)
    b = np.exp(4j * t) / (1 + 1j * t) ** 4
    f = DephasingFactors(3, t, {1: a, 6: b, 4: a * b})
    r = nonclassicality_of_dynamics(f, root_system(3))
    assert r.value >= 0
    assert set(r.reports) == {"x1", "x6"}


def test_qutrit_correlated_has_no_strategy():
    t = np.linspace(0, 40, 512)
    a = np.exp(-0.2 * t**2)
    f = DephasingFactors(3, t, {1: a, 6: a, 4: a})
    with pytest.raises(NoInversionStrategy):
        nonclassicality_of_dynamics(f)


def test_pair_dynamics_positive():
    g = np.linspace(0, 40, 96)
    f = qubit_pair_factors(SpectralDensity(), BathParams(), g, model=ohmic_closed_form(g))
    r = nonclassicality_of_dynamics(f)
    assert r.value > 0 and "x6" in r.delta_note


def test_grid_refinement_indicator():
    t = np.linspace(0, 40, 1024)
    q = invert_1d(t, np.exp(-t**2 / 8))
    assert refinement_delta_of_grid(q) == pytest.approx(0, abs=1e-9)
