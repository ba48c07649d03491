import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maxent_ms.collisions import (CHUNK, MIN_SAMPLES, OracleEstimate, energy_exchange_rate,
                                  entropy_production_species, entropy_production_total,
                                  exchange_force, mc_weak_form, momentum_exchange_rate,
                                  roundoff_floor, weak_form_closed)
from maxent_ms.errors import ValidationError
from maxent_ms.model import CellState, MixtureSpec

from conftest import alphas, mixtures


def test_worked_instance(worked):
    spec, s = worked
    np.testing.assert_allclose(momentum_exchange_rate(spec, s, 0, 1), [1, 0, 0], rtol=1e-15)
    assert energy_exchange_rate(spec, s, 1.0, 0, 1) == pytest.approx(1.0, rel=1e-15)
    np.testing.assert_allclose(exchange_force(spec, s, 1.0, 0, 1), [1, 0, 0], rtol=1e-15)
    assert entropy_production_species(spec, s, 1.0, 0) == pytest.approx(5 / 6, rel=1e-15)
    assert entropy_production_species(spec, s, 1.0, 1) == pytest.approx(5 / 6, rel=1e-15)
    assert entropy_production_total(spec, s, 1.0) == pytest.approx(5 / 3, rel=1e-15)


def test_trivial_cases(worked):
    spec, s = worked
    same = CellState(s.rho, [[0.4, 0.1, 0], [0.4, 0.1, 0]], 1.0)
    np.testing.assert_array_equal(momentum_exchange_rate(spec, same, 0, 1), 0.0)
    assert energy_exchange_rate(spec, same, 1.0, 0, 1) == 0.0
    assert entropy_production_total(spec, same, 1.0) == 0.0
    assert entropy_production_species(spec, same, 1.0, 0) == 0.0
    assert energy_exchange_rate(spec, s, 0.0, 0, 1) == 0.0
    np.testing.assert_array_equal(momentum_exchange_rate(spec, s, 1, 0),
                                  -momentum_exchange_rate(spec, s, 0, 1))
    with pytest.raises(ValidationError):
        momentum_exchange_rate(spec, s, 0, 0)
    with pytest.raises(ValidationError):
        energy_exchange_rate(spec, s, 1.0, 1, 1)


@given(mixtures(), alphas)
def test_mass_weighted_antisymmetry(case, alpha):
    spec, s = case
    m = spec.m
    tot = np.zeros(3)
    etot = 0.0
    for i in range(spec.S):
        for j in range(spec.S):
            if i == j:
                continue
            R = momentum_exchange_rate(spec, s, i, j)
            tot += m[i] * R
            etot += m[i] * energy_exchange_rate(spec, s, alpha, i, j)
            scale = m[i] * np.max(np.abs(R)) + 1e-300
            assert np.max(np.abs(m[i] * R + m[j] * momentum_exchange_rate(spec, s, j, i))) <= 1e-14 * scale
    scale_R = max(m[i] * np.max(np.abs(momentum_exchange_rate(spec, s, i, j)))
                  for i in range(spec.S) for j in range(spec.S) if i != j)
    assert np.max(np.abs(tot)) <= 1e-13 * (scale_R + 1e-300)
    scale_E = max(abs(m[i] * energy_exchange_rate(spec, s, alpha, i, j))
                  for i in range(spec.S) for j in range(spec.S) if i != j)
    assert abs(etot) <= 1e-13 * (scale_E + 1e-300)


@given(mixtures(), alphas)
def test_production_nonnegative_and_additive(case, alpha):
    spec, s = case
    D = entropy_production_total(spec, s, alpha)
    Di = sum(entropy_production_species(spec, s, alpha, i) for i in range(spec.S))
    assert D >= 0
    assert abs(D - Di) <= 1e-12 * max(D, 1e-300)


@given(mixtures(), st.floats(0.1, 5.0), st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_quadratic_and_galilean(case, c, shift):
    spec, s = case
    D = entropy_production_total(spec, s, 1.0)
    scaled = CellState(s.rho, c * s.u, s.T)
    assert entropy_production_total(spec, scaled, 1.0) == pytest.approx(c * c * D, rel=1e-12,
                                                                         abs=1e-300)
    moved = CellState(s.rho, s.u + np.array(shift), s.T)
    assert entropy_production_total(spec, moved, 1.0) == pytest.approx(D, rel=1e-9, abs=1e-12)
    np.testing.assert_allclose(momentum_exchange_rate(spec, moved, 0, 1),
                               momentum_exchange_rate(spec, s, 0, 1), rtol=1e-9, atol=1e-12)
    E01 = energy_exchange_rate(spec, moved, 1.0, 0, 1)
    E10 = energy_exchange_rate(spec, moved, 1.0, 1, 0)
    assert abs(spec.m[0] * E01 + spec.m[1] * E10) <= 1e-12 * (abs(spec.m[0] * E01) + 1e-300)


def test_production_zero_only_when_velocities_coincide():
    rng = np.random.default_rng(3)
    spec = MixtureSpec([1, 2, 3], np.full((3, 3), 0.4))
    for _ in range(200):
        u = rng.standard_normal((3, 3))
        s = CellState(rng.uniform(0.1, 10, 3), u, 1.0)
        assert entropy_production_total(spec, s, 1.0) > 0
    common = CellState([1, 2, 3], np.tile(rng.standard_normal(3), (3, 1)), 2.0)
    assert entropy_production_total(spec, common, 1.0) == 0.0


def test_oracle_estimate_invariants():
    with pytest.raises(ValidationError):
        OracleEstimate(0.0, -1.0, 10, 0)
    with pytest.raises(ValidationError):
        OracleEstimate(0.0, 1.0, 0, 0)
    e = OracleEstimate(np.array([1.0, 2.0]), np.array([0.1, 0.1]), 100, 0)
    np.testing.assert_array_equal(e.within([1.2, 2.5]), [True, False])


def test_mc_guards(worked):
    spec, s = worked
    with pytest.raises(ValidationError):
        mc_weak_form(spec, s, 1.0, 0, 1, "velocity", MIN_SAMPLES - 1, 0)
    with pytest.raises(ValidationError):
        mc_weak_form(spec, s, 1.0, 0, 1, "entropy", 5000, 0)
    with pytest.raises(ValidationError):
        mc_weak_form(spec, s, 1.0, 0, 2, "unit", 5000, 0)


def test_mc_reproducible_and_thread_independent(worked):
    spec, s = worked
    n = 2 * CHUNK + 123
    a = mc_weak_form(spec, s, 1.0, 0, 1, "velocity", n, 42)
    b = mc_weak_form(spec, s, 1.0, 0, 1, "velocity", n, 42, threads=3)
    c = mc_weak_form(spec, s, 1.0, 0, 1, "velocity", n, 43)
    np.testing.assert_array_equal(a.mean, b.mean)
    np.testing.assert_array_equal(a.stderr, b.stderr)
    assert not np.array_equal(a.mean, c.mean)
    assert a.n_samples == n and a.seed == 42


def test_mc_unit_vanishes(worked):
    spec, s = worked
    for i, j in ((0, 1), (1, 1)):
        e = mc_weak_form(spec, s, 1.0, i, j, "unit", 20000, 1)
        assert abs(e.mean) <= 3 * e.stderr + 1e-12


@pytest.mark.slow
def test_mc_worked_energy_exchange(worked):
    spec, s = worked
    e = mc_weak_form(spec, s, 1.0, 0, 1, "speed-squared", 1_000_000, 2024)
    assert e.within(1.0, 3.0)
    assert e.stderr < 0.01


def test_mc_mono_species_velocity_vanishes(worked):
    spec, s = worked
    e = mc_weak_form(spec, s, 1.0, 0, 0, "velocity", 50000, 9)
    assert np.all(e.within(np.zeros(3), 3.0, roundoff_floor(spec, s, 1.0, 0, 0)))


@given(mixtures(S=2), st.sampled_from([0.1, 0.5, 1.0]), st.integers(0, 2**32))
def test_mc_matches_closed_forms_small_n(case, alpha, seed):
    spec, s = case
    for psi in ("velocity", "speed-squared"):
        for i, j in ((0, 1), (1, 0), (0, 0)):
            e = mc_weak_form(spec, s, alpha, i, j, psi, 20000, seed)
            target = weak_form_closed(spec, s, alpha, i, j, psi)
            # 5 sigma here: many draws per test run
            assert np.all(e.within(target, 5.0, roundoff_floor(spec, s, alpha, i, j)))
