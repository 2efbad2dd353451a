import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ide2net.constellation import (constellation_by_name, demodulate, modulate, one_bit_alphabet, project,
                                   qam)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
complex_vals = st.builds(complex, finite, finite)


@pytest.mark.parametrize("order", [4, 16, 64])
def test_qam_unit_power_and_symmetry(order):
    c = qam(order)
    assert c.order == order
    assert abs(np.mean(np.abs(c.points) ** 2) - 1.0) < 1e-12
    # closed under negation
    for p in c.points:
        assert np.min(np.abs(c.points + p)) < 1e-12
    labels = {tuple(l) for l in c.bit_labels}
    assert len(labels) == order


@pytest.mark.parametrize("order", [4, 16, 64])
def test_gray_neighbours_differ_in_one_bit(order):
    c = qam(order)
    d = np.abs(c.points[:, None] - c.points[None, :])
    dmin = np.min(d[d > 0])
    for i, j in zip(*np.nonzero(np.isclose(d, dmin))):
        assert np.sum(c.bit_labels[i] != c.bit_labels[j]) == 1


def test_16qam_axis_labels_match_reflected_gray():
    # per axis, from the top level down: 00, 01, 11, 10
    c = qam(16)
    scale = np.sqrt(10)
    expect_level = {(0, 0): 3, (0, 1): 1, (1, 1): -1, (1, 0): -3}
    for pt, lab in zip(c.points, c.bit_labels):
        assert round(pt.real * scale) == expect_level[tuple(lab[:2])]
        assert round(pt.imag * scale) == expect_level[tuple(lab[2:])]


def test_bad_orders_and_names():
    for order in (2, 8, 9, 32):
        with pytest.raises(ValueError):
            qam(order)
    with pytest.raises(ValueError):
        constellation_by_name("8psk")
    assert constellation_by_name("16-QAM").order == 16


def test_qpsk_first_label():
    c = constellation_by_name("qpsk")
    assert modulate("00", c)[0] == pytest.approx((1 + 1j) / np.sqrt(2), abs=1e-15)


@pytest.mark.parametrize("name", ["qpsk", "16qam"])
def test_round_trip_every_label(name):
    c = constellation_by_name(name)
    bits = c.bit_labels.ravel()
    y = modulate(bits, c)
    assert np.array_equal(demodulate(y, c).ravel(), bits)


def test_modulate_rejects_ragged_bits():
    with pytest.raises(ValueError):
        modulate("101", qam(16))


def test_empirical_power():
    c = qam(16)
    bits = np.random.default_rng(3).integers(0, 2, 10_000)
    assert abs(np.mean(np.abs(modulate(bits, c)) ** 2) - 1.0) < 0.05


def test_demodulate_ties_and_perturbation():
    q = qam(4)
    assert np.array_equal(demodulate(0, q), q.bit_labels[0])
    c = qam(16)
    half = np.min(np.abs(np.diff(np.unique(c.points.real)))) / 2
    rng = np.random.default_rng(0)
    for m in range(16):
        delta = 0.99 * half * rng.uniform() * np.exp(2j * np.pi * rng.uniform())
        assert np.array_equal(demodulate(c.points[m] + delta, c), c.bit_labels[m])


def test_one_bit_alphabet_power():
    for p_t in (0.5, 1.0, 4.0):
        a = one_bit_alphabet(p_t)
        assert np.allclose(np.abs(a.points) ** 2, p_t, rtol=1e-15, atol=0)
        assert set(np.round(a.points, 12)) == set(np.round(np.conj(a.points), 12))
        assert set(np.round(a.points, 12)) == set(np.round(-a.points, 12))


def test_project_examples():
    a = one_bit_alphabet(1.0)
    assert project(np.array([0.3 - 0.7j]), a)[0] == pytest.approx((1 - 1j) / np.sqrt(2))
    assert project(np.array([0j]), a)[0] == pytest.approx((1 + 1j) / np.sqrt(2))
    assert np.array_equal(project(a.points, a), a.points)


@given(st.lists(complex_vals, min_size=1, max_size=20), st.sampled_from([0.5, 1.0, 2.0]))
def test_project_properties(vals, p_t):
    a = one_bit_alphabet(p_t)
    v = np.array(vals)
    x = project(v, a)
    assert a.contains(x, atol=1e-15)
    assert np.array_equal(project(x, a), x)
    perm = np.random.default_rng(len(vals)).permutation(len(vals))
    assert np.array_equal(project(v[perm], a), x[perm])
    # nearest point, checked exhaustively over the alphabet
    d_sel = np.abs(x - v)
    d_all = np.abs(v[:, None] - a.points[None, :])
    assert np.all(d_sel <= d_all.min(axis=1) + 1e-12)


@given(st.lists(complex_vals, min_size=1, max_size=10))
def test_project_general_alphabet_matches_bruteforce(vals):
    # a non one-bit alphabet goes through the argmin path
    c = qam(16)
    from ide2net.constellation import FiniteAlphabet

    a = FiniteAlphabet(c.points)
    v = np.array(vals)
    x = project(v, a)
    for vi, xi in zip(v, x):
        best = min(c.points, key=lambda p: abs(p - vi))
        assert abs(xi - vi) <= abs(best - vi) + 1e-12


@settings(max_examples=50)
@given(st.integers(1, 40), st.sampled_from(["qpsk", "16qam"]), st.integers(0, 2 ** 32 - 1))
def test_round_trip_random_bits(n_sym, name, seed):
    c = constellation_by_name(name)
    bits = np.random.default_rng(seed).integers(0, 2, n_sym * c.bits_per_symbol)
    assert np.array_equal(demodulate(modulate(bits, c), c).ravel(), bits)


def test_labels_cover_all_bit_patterns():
    c = qam(16)
    assert {tuple(l) for l in c.bit_labels} == set(itertools.product((0, 1), repeat=4))
