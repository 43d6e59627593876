import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fermispec.lattice import (DispersionRelation, build_grid, free_dispersion,
                               free_gas_constants, kinetic_energy, model_dispersion)


def test_grid_d1_unit_spacing():
    g = build_grid(1, 2 * np.pi, 3)
    assert g.spacing == 1.0
    np.testing.assert_array_equal(g.points.ravel(), [-3, -2, -1, 0, 1, 2, 3])


def test_grid_d2_nine_points():
    g = build_grid(2, 2 * np.pi, 1)
    assert g.size == 9
    expected = {(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)}
    assert {tuple(p) for p in g.points.tolist()} == expected


def test_grid_half_spacing():
    g = build_grid(1, 4 * np.pi, 1)
    assert g.spacing == 0.5
    np.testing.assert_array_equal(g.points.ravel(), [-1, -0.5, 0, 0.5, 1])


@pytest.mark.parametrize("args", [(0, 1.0, 1.0), (4, 1.0, 10.0), (1, 0.0, 1.0),
                                  (1, -2.0, 1.0), (1, 2 * np.pi, 0.5)])
def test_grid_rejects_bad_input(args):
    with pytest.raises(ValueError):
        build_grid(*args)


@settings(max_examples=40, deadline=None)
@given(d=st.integers(1, 3), n=st.integers(1, 4), L=st.floats(1.0, 30.0))
def test_grid_structure(d, n, L):
    spacing = 2 * np.pi / L
    g = build_grid(d, L, n * spacing)
    # negation is an involution and zero is present
    assert np.array_equal(g.neg[g.neg], np.arange(g.size))
    np.testing.assert_array_equal(g.coords[g.neg], -g.coords)
    assert np.all(g.coords[g.zero_index] == 0)
    # strictly increasing lexicographic order
    keys = [tuple(c) for c in g.coords.tolist()]
    assert keys == sorted(set(keys))
    assert np.all(np.abs(g.points) <= g.cutoff + 1e-9)
    # index_of is the inverse of coords
    np.testing.assert_array_equal(g.index_of(g.coords), np.arange(g.size))


def test_free_dispersion_values():
    g = build_grid(1, 2 * np.pi, 3)
    w = free_dispersion(g, 1.0)
    assert w.values[g.zero_index] == 1.0
    assert w.values[g.zero_index + 1] == 0.0
    assert w.values[g.zero_index + 2] == 3.0
    assert w.is_even()


def test_model_dispersion_values():
    g = build_grid(1, 2 * np.pi, 3)
    w = model_dispersion(g, 1.0, 0.5)
    assert w.values[g.zero_index + 1] == 0.5
    assert w.values[g.zero_index] == pytest.approx(1.1180339887, abs=1e-10)
    np.testing.assert_array_equal(model_dispersion(g, 1.0, 0.0).values,
                                  free_dispersion(g, 1.0).values)
    with pytest.raises(ValueError):
        model_dispersion(g, 1.0, -0.1)


@settings(max_examples=30, deadline=None)
@given(mu=st.floats(-2, 5), gamma=st.floats(0, 3))
def test_model_minus_free_is_gamma_squared(mu, gamma):
    g = build_grid(2, 8 * np.pi, 2)
    diff = model_dispersion(g, mu, gamma).values ** 2 - free_dispersion(g, mu).values ** 2
    np.testing.assert_allclose(diff, gamma ** 2, rtol=1e-12, atol=1e-12 * max(1, mu * mu))


def test_free_dispersion_zero_only_on_fermi_surface():
    g = build_grid(2, 8 * np.pi, 2)
    w = free_dispersion(g, 1.0)
    assert np.all(w.values >= 0)
    np.testing.assert_array_equal(w.values == 0, g.k2 == 1.0)


def test_free_gas_constants_examples():
    g = build_grid(1, 2 * np.pi, 3)
    c = free_gas_constants(g, 1.0)
    assert (c.ground_energy, c.occupied_count) == (-1.0, 3)
    c = free_gas_constants(g, 0.5)
    assert (c.ground_energy, c.occupied_count) == (-0.5, 1)
    assert free_gas_constants(build_grid(2, 2 * np.pi, 2), 1.5).occupied_count == 5
    with pytest.raises(ValueError):
        free_gas_constants(g, 10.0)


@settings(max_examples=30, deadline=None)
@given(mus=st.lists(st.floats(0, 9), min_size=2, max_size=2))
def test_free_gas_constants_monotone(mus):
    g = build_grid(2, 2 * np.pi, 3)
    lo, hi = sorted(mus)
    a, b = free_gas_constants(g, lo), free_gas_constants(g, hi)
    assert b.ground_energy <= a.ground_energy
    assert b.occupied_count >= a.occupied_count
    assert a.ground_energy <= 0 and a.occupied_count >= 1


def test_dispersion_validation():
    g = build_grid(1, 2 * np.pi, 1)
    with pytest.raises(ValueError):
        DispersionRelation(g, [0.0, np.inf, 1.0])
    with pytest.raises(ValueError):
        DispersionRelation(g, [0.0, 1.0])
    d = DispersionRelation(g, [1.0, 2.0, 3.0], support=[True, False, True])
    np.testing.assert_array_equal(d.masked_values(), [1.0, np.inf, 3.0])


def test_kinetic_energy_is_signed():
    g = build_grid(1, 2 * np.pi, 2)
    np.testing.assert_array_equal(kinetic_energy(g, 1.0).values, [3, 0, -1, 0, 3])


def test_sub_window_and_restrict():
    g = build_grid(2, 2 * np.pi, 3)
    sub = g.sub_window(1)
    assert sub.size == 9 and sub.same_lattice(build_grid(2, 2 * np.pi, 1))
    np.testing.assert_array_equal(g.restrict(g.k2, sub), sub.k2)
