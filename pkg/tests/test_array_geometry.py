import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynmanifold.array_geometry import (SPEED_OF_LIGHT, ArrayGeometry, delay_stats, delays,
                                        direction_vector, grating_lobe_angles, half_wavelength,
                                        steering_vector)

FC = 2e9
W = 2 * np.pi * FC


def test_half_wavelength():
    assert half_wavelength(FC) == pytest.approx(0.0749481145, rel=1e-9)


@pytest.mark.parametrize("theta, expected", [
    (0.0, (0, 1, 0)),
    (np.pi / 2, (1, 0, 0)),
    (np.deg2rad(30), (0.5, np.sqrt(3) / 2, 0)),
])
def test_direction_vector(theta, expected):
    np.testing.assert_allclose(direction_vector(theta), expected, atol=1e-15)


def test_broadside_delays_vanish(ula5d):
    np.testing.assert_array_equal(delays(ula5d, 0.0), 0.0)


def test_delays_hand_example(ula5d):
    d = half_wavelength(FC)
    step = 5 * d * 0.5 / SPEED_OF_LIGHT
    np.testing.assert_allclose(delays(ula5d, np.deg2rad(30)), [0, step, 2 * step], rtol=1e-13)
    assert step == pytest.approx(0.625e-9, rel=1e-3)
    centred = delays(ula5d.with_reference("centroid"), np.deg2rad(30))
    np.testing.assert_allclose(centred, [-step, 0, step], rtol=1e-12)


def test_vectorised_delays_match_scalar(ula5d):
    thetas = np.deg2rad([-40.0, 0.0, 10.0, 75.0])
    stacked = delays(ula5d, thetas)
    assert stacked.shape == (4, 3)
    for th, row in zip(thetas, stacked):
        np.testing.assert_array_equal(row, delays(ula5d, th))


@settings(max_examples=40, deadline=None)
@given(st.floats(-np.pi / 2, np.pi / 2),
       st.lists(st.integers(-100, 100), min_size=2, max_size=6, unique=True))
def test_centroid_delays_sum_to_zero(theta, half_steps):
    geom = ArrayGeometry.from_positions_d(np.array(half_steps) / 2, FC, reference="centroid")
    tau = delays(geom, theta)
    # rounding scales with the raw (uncentred) delays
    raw = np.max(np.abs(geom.positions)) / SPEED_OF_LIGHT
    assert abs(tau.sum()) <= 4e-16 * raw * len(half_steps) ** 2


def test_delay_stats_examples():
    centred = ArrayGeometry.from_positions_d([-5, 0, 5], FC)
    s = delay_stats(centred, np.deg2rad(30))
    expected = 5 * half_wavelength(FC) * 0.5 / SPEED_OF_LIGHT * np.sqrt(2 / 3)
    assert s.std_tau == pytest.approx(expected, rel=1e-12)
    assert s.std_tau == pytest.approx(0.5103e-9, rel=1e-3)
    assert s.mu3 == pytest.approx(0.0, abs=1e-40)
    shifted = ArrayGeometry.from_positions_d([0, 5, 10], FC)
    assert delay_stats(shifted, np.deg2rad(30)).std_tau == pytest.approx(s.std_tau, rel=1e-12)
    assert delay_stats(shifted, 0.0).std_tau == 0.0


def test_steering_vector_basics(ula5d):
    np.testing.assert_array_equal(steering_vector(ula5d, 0.0, W), np.ones(3))
    single = ArrayGeometry.linear([0.3])
    a = steering_vector(single, 0.4, W)
    assert a.shape == (1,) and abs(a[0]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        steering_vector(ula5d, 0.0, 0.0)


def test_grating_lobes_nyquist_array():
    geom = ArrayGeometry.from_spacings([1, 1, 1], FC)
    lobes = grating_lobe_angles(geom, np.deg2rad(20), W)
    np.testing.assert_allclose(lobes, [np.deg2rad(20)])


def test_grating_lobes_5d(ula5d):
    th = np.deg2rad(20)
    lobes = grating_lobe_angles(ula5d, th, W)
    ks = np.arange(-10, 11)
    s = np.sin(th) + ks / 2.5
    brute = np.sort(np.arcsin(s[np.abs(s) < 1]))
    np.testing.assert_allclose(lobes, brute, rtol=1e-12)
    assert len(lobes) == 5
    a0 = steering_vector(ula5d, th, W)
    for lobe in lobes:
        np.testing.assert_allclose(steering_vector(ula5d, lobe, W), a0, atol=1e-12)


def test_grating_lobes_50d_alias():
    geom = ArrayGeometry.from_positions_d([0, 50, 100], FC)
    th = np.deg2rad(20)
    lobes = grating_lobe_angles(geom, th, W)
    assert len(lobes) == 50
    a0 = steering_vector(geom, th, W)
    for lobe in lobes:
        rel = np.linalg.norm(steering_vector(geom, lobe, W) - a0) / np.linalg.norm(a0)
        assert rel < 1e-10


def test_grating_lobes_require_uniform_array():
    with pytest.raises(ValueError):
        grating_lobe_angles(ArrayGeometry.from_positions_d([0, 0.5, 10.5], FC), 0.3, W)


@pytest.mark.parametrize("bad", [
    dict(positions=np.zeros((2, 3))),
    dict(positions=np.zeros((2, 2))),
    dict(positions=np.eye(3), reference="middle"),
])
def test_invalid_geometry(bad):
    with pytest.raises(ValueError):
        ArrayGeometry(**bad)


def test_max_delay_bounds_all_directions(ula5d):
    thetas = np.linspace(-np.pi / 2, np.pi / 2, 721)
    assert np.max(np.abs(delays(ula5d, thetas))) <= ula5d.max_delay() * (1 + 1e-12)
