import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from modgrok.spectral import (
    DegenerateInputError,
    FourierNeuronTransformer,
    NoDominantComponentError,
    circular_correlation,
    dft,
    dominant_component,
    periodicity_score,
    periodicity_scores,
    phases_at,
    wrap_angle,
)

P = 97


def direct_dft(w):
    """Oracle: textbook double loop in pure Python complex arithmetic."""
    p = len(w)
    return [sum(w[j] * cmath.exp(-2j * math.pi * j * k / p) for j in range(p)) for k in range(p)]


def cosine(k, phase=0.0, amp=1.0, offset=0.0, p=P):
    j = np.arange(p)
    return offset + amp * np.cos(2 * np.pi * k * j / p - phase)


finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_dft_of_constant():
    spec = dft(np.full(P, 2.5))
    assert spec[0] == pytest.approx(P * 2.5)
    assert np.abs(spec[1:]).max() < 1e-9


def test_dft_of_cosine_has_two_peaks():
    mags = np.abs(dft(cosine(5)))
    assert mags[5] == pytest.approx(48.5, abs=1e-9)
    assert mags[92] == pytest.approx(48.5, abs=1e-9)
    others = np.delete(mags, [0, 5, 92])
    assert others.max() < 1e-9


def test_dft_matches_direct_summation(rng):
    for p in (2, 7, 31, 97):
        w = rng.normal(size=p)
        np.testing.assert_allclose(dft(w), direct_dft(list(w)), atol=1e-9, rtol=0)
        np.testing.assert_allclose(dft(w), np.fft.fft(w), atol=1e-9, rtol=0)


def test_dft_rows(rng):
    W = rng.normal(size=(4, P))
    np.testing.assert_allclose(dft(W), np.stack([dft(w) for w in W]), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, P, elements=finite))
def test_conjugate_symmetry_and_parseval(w):
    spec = dft(w)
    k = np.arange(1, P)
    np.testing.assert_allclose(spec[P - k], np.conj(spec[k]), atol=1e-9)
    assert np.sum(w**2) == pytest.approx(np.sum(np.abs(spec) ** 2) / P, rel=1e-9, abs=1e-9)


def test_dominant_component_convention():
    c = dominant_component(cosine(5, 0.7))
    assert c.frequency == 5
    assert c.phase == pytest.approx(0.7, abs=1e-9)
    assert c.amplitude == pytest.approx(1.0, abs=1e-9)
    assert c.dc_offset == pytest.approx(0.0, abs=1e-9)
    assert c.magnitude == pytest.approx(48.5, abs=1e-9)


def test_dominant_component_of_square_wave():
    w = 0.45 * np.sign(np.cos(2 * np.pi * 3 * np.arange(P) / P)) + 0.01
    c = dominant_component(w)
    assert c.frequency == 3
    # sampled square wave: phase is the centre of the positive run, within half a grid step
    assert abs(c.phase) < np.pi / P
    # offset: 49 positive and 48 negative samples pull the mean by 0.45/97
    assert c.dc_offset == pytest.approx(0.01 + 0.45 / P, abs=1e-12)


def test_dominant_component_of_constant_raises():
    with pytest.raises(NoDominantComponentError):
        dominant_component(np.full(P, 3.0))


@pytest.mark.parametrize("k", range(1, 49))
def test_round_trip_all_frequencies(k):
    rng = np.random.default_rng(k)
    for phase in rng.uniform(-np.pi, np.pi, size=100):
        amp, off = rng.uniform(0.1, 2.0), rng.uniform(-1, 1)
        c = dominant_component(cosine(k, phase, amp, off))
        assert c.frequency == k
        assert abs(wrap_angle(c.phase - phase)) < 1e-9
        assert c.amplitude == pytest.approx(amp, abs=1e-9)
        assert c.dc_offset == pytest.approx(off, abs=1e-9)


@pytest.mark.parametrize("k", [1, 7, 30, 48])
def test_periodicity_of_pure_cosine_is_48(k):
    # two peaks of p/2, mean = p / (p - 1) -> score (p - 1) / 2
    assert periodicity_score(cosine(k, 0.3)) == pytest.approx(48.0, abs=1e-9)


def test_periodicity_of_constant_is_one():
    assert periodicity_score(np.full(P, -1.7)) == 1.0
    assert periodicity_score(np.zeros(P)) == 1.0


def test_periodicity_matches_formula(rng):
    w = rng.normal(size=P)
    mags = np.abs(np.fft.fft(w))[1:]
    assert periodicity_score(w) == pytest.approx(mags.max() / mags.mean(), rel=1e-12)


def test_periodicity_of_noise_is_low():
    rng = np.random.default_rng(0)
    scores = periodicity_scores(rng.normal(size=(1000, P)))
    assert scores.max() < 12
    assert np.mean(scores) < 4


@settings(max_examples=50, deadline=None)
@given(
    arrays(np.float64, P, elements=finite),
    st.floats(-50, 50),
    st.floats(0.01, 100),
)
def test_periodicity_invariant_to_offset_and_scale(w, c, s):
    if np.ptp(w) < 1e-3:
        return
    base = periodicity_score(w)
    assert periodicity_score(w + c) == pytest.approx(base, rel=1e-6)
    assert periodicity_score(s * w) == pytest.approx(base, rel=1e-9)


def test_phases_at():
    W = np.stack([cosine(3, 0.4), cosine(11, -2.0)])
    np.testing.assert_allclose(phases_at(W, [3, 11]), [0.4, -2.0], atol=1e-12)


def test_wrap_angle():
    assert wrap_angle(0.0) == 0.0
    assert wrap_angle(3 * np.pi) == pytest.approx(-np.pi)
    assert wrap_angle(np.pi) == -np.pi
    assert wrap_angle(2.5 + 2.5) == pytest.approx(5 - 2 * np.pi, abs=1e-12)
    assert wrap_angle(2.5 + 2.5) == pytest.approx(-1.2832, abs=1e-4)


@given(st.floats(-1e4, 1e4))
def test_wrap_angle_range(theta):
    out = wrap_angle(theta)
    assert -np.pi <= out < np.pi
    assert abs(math.remainder(out - theta, 2 * np.pi)) < 1e-9


def test_circular_correlation_identity_and_rotation(rng):
    x = rng.uniform(-np.pi, np.pi, 50)
    assert circular_correlation(x, x) == pytest.approx(1.0, abs=1e-12)
    assert circular_correlation(x, wrap_angle(x + 2.1)) == pytest.approx(1.0, abs=1e-12)
    assert circular_correlation(x, -x) == pytest.approx(-1.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(-10, 10), st.floats(-10, 10))
def test_circular_correlation_rotation_invariant(seed, cx, cy):
    r = np.random.default_rng(seed)
    x, y = r.uniform(-np.pi, np.pi, 20), r.uniform(-np.pi, np.pi, 20)
    assert circular_correlation(x + cx, y + cy) == pytest.approx(circular_correlation(x, y), abs=1e-9)


def test_circular_correlation_of_independent_angles_is_small():
    rng = np.random.default_rng(1)
    rs = [circular_correlation(rng.uniform(-np.pi, np.pi, 212), rng.uniform(-np.pi, np.pi, 212)) for _ in range(1000)]
    assert np.mean(np.abs(rs) < 0.2) > 0.99


def test_circular_correlation_degenerate():
    with pytest.raises(DegenerateInputError):
        circular_correlation(np.full(5, 1.0), np.arange(5.0))
    with pytest.raises(ValueError):
        circular_correlation([1.0], [1.0])


def test_transformer():
    W = np.stack([cosine(4, 1.0, 0.5, 0.1), np.zeros(P)])
    tf = FourierNeuronTransformer().fit(W)
    out = tf.transform(W)
    np.testing.assert_allclose(out[0], [4, 1.0, 0.5, 0.1, 48.0], atol=1e-9)
    np.testing.assert_allclose(out[1], [0, 0, 0, 0, 1.0])
    assert list(tf.get_feature_names_out()) == list(FourierNeuronTransformer.feature_names)
    with pytest.raises(ValueError):
        tf.transform(np.zeros((1, 5)))
