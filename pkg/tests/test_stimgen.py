import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csdvs.errors import ConfigError
from csdvs.stimgen import (StimulusSpec, bump_centers, checker_card, generate, generate_flashing_spot,
                           generate_flicker, generate_gradient_pair, raised_cosine, spot_distance)


def small_spot(**kw):
    params = dict(width=32, height=32, spot_radius=8, fps=100, duration=0.5)
    params.update(kw)
    return StimulusSpec.for_kind("flashing_spot", **params)


def test_spot_phase_levels():
    seq = generate_flashing_spot(small_spot())
    inside = spot_distance(small_spot()) < 8
    levels = seq.frames[:, inside].mean(axis=1)
    # 50 frames in 5 phases of 10
    expected = [0.4] * 10 + [0.6] * 10 + [0.4] * 10 + [0.4 / 1.5] * 10 + [0.4] * 10
    np.testing.assert_allclose(levels, expected, rtol=1e-12)
    assert levels[35] == pytest.approx(0.26667, abs=1e-5)


def test_spot_background_constant():
    seq = generate_flashing_spot(small_spot())
    outside = spot_distance(small_spot()) >= 8
    assert np.all(seq.frames[:, outside] == 0.4)


def test_spot_hard_edge_default_and_antialias():
    hard = generate_flashing_spot(small_spot()).frames[15]
    assert len(np.unique(hard)) == 2
    soft = generate_flashing_spot(small_spot(antialias=True)).frames[15]
    assert len(np.unique(soft)) > 2
    assert soft.min() >= 0.4 and soft.max() <= 0.6 + 1e-12


@pytest.mark.parametrize("bad", [dict(contrast=1.0), dict(spot_radius=16), dict(spot_radius=0),
                                 dict(fps=0), dict(duration=-1)])
def test_spot_rejects_bad_geometry(bad):
    with pytest.raises(ConfigError):
        generate_flashing_spot(small_spot(**bad))


def test_gradient_equal_log_peaks():
    spec = StimulusSpec.for_kind("gradient_pair", duration=0.01)
    f0 = generate_gradient_pair(spec).frames[0, 0]
    ca, cb = bump_centers(spec, 0.0)
    W = spec.width
    half = np.arange(W) < (ca + cb) / 2
    peak_a = np.log(f0[half]).max() - math.log(spec.gray)
    peak_b = np.log(f0[~half]).max() - math.log(spec.gray)
    assert abs(peak_a - peak_b) < 1e-9
    assert peak_a == pytest.approx(math.log(spec.contrast), abs=1e-12)


def test_gradient_kinematics():
    spec = StimulusSpec.for_kind("gradient_pair", speed=32, fps=64, duration=0.25)
    c0 = np.array(bump_centers(spec, 0 / 64))
    c1 = np.array(bump_centers(spec, 1 / 64))
    np.testing.assert_allclose(c1 - c0, 0.5)


def fwhm(profile):
    """Full width at half maximum by linear interpolation around the peak."""
    k = int(np.argmax(profile))
    half = profile[k] / 2

    def walk(step):
        i = k
        while profile[i + step] > half:
            i += step
        a, b = profile[i], profile[i + step]
        return i + step * (a - half) / (a - b)

    return walk(1) - walk(-1)


def test_gradient_fwhm_ratio():
    spec = StimulusSpec.for_kind("gradient_pair", bump_widths=(40, 4), duration=0.01)
    f0 = generate_gradient_pair(spec).frames[0, 0]
    prof = f0 / spec.gray - 1
    ca, cb = bump_centers(spec, 0.0)
    mid = int((ca + cb) // 2)
    wa, wb = fwhm(prof[:mid]), fwhm(prof[mid:])
    assert wa == pytest.approx(20, abs=1e-9)
    assert wb == pytest.approx(2, abs=1e-9)
    assert wa / wb == pytest.approx(10, rel=1e-9)


def test_gradient_rejects():
    with pytest.raises(ConfigError):
        generate_gradient_pair(StimulusSpec.for_kind("gradient_pair", bump_widths=(20, 8)))
    with pytest.raises(ConfigError):
        generate_gradient_pair(StimulusSpec.for_kind("gradient_pair", width=64, bump_widths=(80, 4)))


def test_gradient_wraps_around():
    spec = StimulusSpec.for_kind("gradient_pair", speed=320, fps=10, duration=1.0)
    seq = generate_gradient_pair(spec)
    # one full traversal after W / speed = 1 s; frame 0 and the (virtual) frame 10 coincide
    assert np.allclose(bump_centers(spec, 1.0), bump_centers(spec, 0.0))
    assert seq.frames.max() <= 1 and seq.frames.min() > 0


def test_flicker_sine_ratio():
    spec = StimulusSpec.for_kind("flicker", waveform="sine", flicker_hz=10, fps=400, duration=0.1)
    means = generate_flicker(spec).frames.mean(axis=(1, 2))
    assert means.max() / means.min() == pytest.approx(2.25, rel=1e-9)


def test_flicker_uniform_region_stays_uniform():
    spec = StimulusSpec.for_kind("flicker", duration=0.2)
    seq = generate_flicker(spec)
    right = seq.frames[:, :, spec.width // 2:]
    assert np.all(right.max(axis=(1, 2)) == right.min(axis=(1, 2)))


def test_flicker_gain_range_and_textured_half():
    spec = StimulusSpec.for_kind("flicker", duration=0.2)
    seq = generate_flicker(spec)
    base = checker_card(spec)
    ratio = seq.frames / base
    assert ratio.min() == pytest.approx(1 / 1.5) and ratio.max() == pytest.approx(1.5)
    assert len(np.unique(base[:, : spec.width // 2])) == 2


def test_flicker_rejects_aliasing_and_bad_base():
    with pytest.raises(ConfigError):
        generate_flicker(StimulusSpec.for_kind("flicker", flicker_hz=300, fps=500))
    with pytest.raises(ConfigError):
        generate_flicker(StimulusSpec.for_kind("flicker", contrast=1.0))
    with pytest.raises(ConfigError):
        generate_flicker(StimulusSpec.for_kind("flicker", width=16, height=16, base=np.ones((16, 16))))


def test_timestamps_exact():
    seq = generate(StimulusSpec.for_kind("flicker", fps=300, duration=0.1))
    np.testing.assert_array_equal(seq.timestamps_us, np.round(np.arange(30) * 1e6 / 300).astype(np.int64))


def test_spec_json_round_trip():
    spec = StimulusSpec.for_kind("gradient-pair", speed=100.0)
    assert StimulusSpec.from_dict(spec.to_dict()) == spec


def test_raised_cosine_support():
    x = np.array([-3.0, -2.0, 0.0, 1.0, 2.0])
    np.testing.assert_allclose(raised_cosine(x, 4.0), [0, 0, 1, 0.5, 0], atol=1e-15)


kinds = st.sampled_from(["flashing_spot", "gradient_pair", "flicker"])


@settings(max_examples=15, deadline=None)
@given(kind=kinds, contrast=st.floats(1.05, 1.6), fps=st.floats(30, 400))
def test_generators_in_range_and_deterministic(kind, contrast, fps):
    spec = StimulusSpec.for_kind(kind, contrast=contrast, fps=fps, duration=0.05)
    a, b = generate(spec), generate(spec)
    assert np.all(np.isfinite(a.frames))
    assert a.frames.min() > 0 and a.frames.max() <= 1
    assert np.array_equal(a.frames, b.frames)
