import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqrst.detect import (
    Candidate,
    DetectionConfig,
    MaxMinPair,
    _lockout,
    delineate,
    detect_r_peaks,
    find_max_min_pairs,
    locate_pt,
    locate_qs,
    stage_signals,
)
from pqrst.errors import FormatError, ParameterError
from pqrst.evaluation import evaluate
from pqrst.signal_io import SampledSignal
from pqrst.synth import SynthConfig, WaveSpec, corpus_configs, make_corpus, synth_ecg
from pqrst.wavelet import CwtCoefficients, cwt

FS = 360


def pulses(locs, amps, n=10 * FS, sd_ms=10.0, fs=FS):
    """Stage-like train of Gaussian bumps."""
    t = np.arange(n)
    x = np.zeros(n)
    for loc, amp in zip(locs, amps):
        x += amp * np.exp(-0.5 * ((t - loc) / (sd_ms * fs / 1000.0)) ** 2)
    return SampledSignal(x, fs)


LOCS = [int(FS * (0.5 + i)) for i in range(10)]


def ms(samples, fs=FS):
    return np.abs(np.asarray(samples, float)) * 1000.0 / fs


# config


def test_config_defaults_and_round_trip(tmp_path):
    cfg = DetectionConfig()
    assert cfg.threshold_fraction == 0.30 and cfg.refractory_ms == 120
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"threshold_fraction": 0.35}))
    loaded = DetectionConfig.from_json(path)
    assert loaded.threshold_fraction == 0.35 and loaded.pt_window_fraction == 0.40
    assert DetectionConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize(
    "bad",
    [
        {"threshold_fraction": 0.0},
        {"threshold_fraction": 1.0},
        {"refractory_ms": -5},
        {"qs_window_fraction": 1.5},
        {"base_scale_ms": float("nan")},
        {"cross_scale_tol_ms": "40"},
        {"refractory_ms": True},
        {"no_such_key": 1},
    ],
)
def test_config_rejects(bad):
    with pytest.raises(ParameterError):
        DetectionConfig.from_dict(bad)


def test_config_bad_json(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{\n  oops")
    with pytest.raises(FormatError, match="line 2"):
        DetectionConfig.from_json(path)
    path.write_text("[1, 2]")
    with pytest.raises(ParameterError):
        DetectionConfig.from_json(path)


# max/min pairs


def test_pairs_from_biphasic_coefficients():
    coeffs = np.zeros(100)
    coeffs[20], coeffs[25] = 1.0, -0.8
    coeffs[60], coeffs[64] = -0.9, 0.7
    coeffs[80] = 0.1
    c = CwtCoefficients(10.0, coeffs, (5, 94))
    pairs = find_max_min_pairs(c, 0.5, 10)
    assert [(p.max_idx, p.min_idx) for p in pairs] == [(20, 25), (64, 60)]
    for p in pairs:
        assert p.max_val > 0 > p.min_val


def test_pairs_respect_span_and_valid_range():
    coeffs = np.zeros(100)
    coeffs[10], coeffs[40] = 1.0, -1.0
    coeffs[2], coeffs[4] = 1.0, -1.0
    c = CwtCoefficients(10.0, coeffs, (5, 94))
    assert find_max_min_pairs(c, 0.5, 10) == []


def test_zero_crossing_candidates_on_real_signal(kernel, clean_record):
    sig, _ = clean_record
    _, stage = stage_signals(sig)
    c = cwt(stage, kernel, 0.1 * FS)
    pairs = find_max_min_pairs(c, 0.3 * np.max(np.abs(c.valid)), c.scale)
    for p in pairs:
        seg = c.coeffs[p.lo : p.hi + 1]
        assert np.any(np.signbit(seg[:-1]) != np.signbit(seg[1:]))


# R detection


def test_regular_pulse_train(kernel):
    assert detect_r_peaks(pulses(LOCS, [1.0] * 10), kernel) == LOCS


def test_clean_60bpm_record(kernel, clean_record):
    sig, truth = clean_record
    _, stage = stage_signals(sig)
    found = np.array(detect_r_peaks(stage, kernel))
    assert 29 <= found.size <= 31
    ref = truth.r_indices
    nearest = np.min(np.abs(found[:, None] - ref[None, :]), axis=1)
    assert np.all(ms(nearest) <= 10.0)


def test_negated_input_same_detections(kernel, clean_record):
    sig, _ = clean_record
    _, a = stage_signals(sig)
    _, b = stage_signals(sig.with_samples(-sig.samples))
    assert detect_r_peaks(a, kernel) == detect_r_peaks(b, kernel)


def test_events_80ms_apart_leave_one(kernel):
    locs = LOCS + [LOCS[4] + int(0.080 * FS)]
    found = detect_r_peaks(pulses(locs, [1.0] * 10 + [0.8]), kernel)
    assert found == LOCS


def test_lockout_keeps_strongest():
    def cand(i, v):
        return Candidate(i, i, MaxMinPair(i, i + 3, v, -v))

    kept = _lockout([cand(100, 1.0), cand(129, 2.0), cand(200, 0.5)], refractory=43.2)
    assert sorted(c.index for c in kept) == [129, 200]


@pytest.mark.parametrize("amp", [0.3, 0.35, 0.4])
def test_search_back_recovers_weak_beat(kernel, amp):
    amps = [1.0] * 10
    amps[5] = amp
    sig = pulses(LOCS, amps)
    without = detect_r_peaks(sig, kernel, DetectionConfig(searchback_rr_multiple=100.0))
    assert LOCS[5] not in without
    assert detect_r_peaks(sig, kernel) == LOCS


def test_zero_stage_gives_no_beats(kernel):
    assert detect_r_peaks(SampledSignal(np.zeros(3000), FS), kernel) == []


def test_stage_too_short(kernel):
    with pytest.raises(ParameterError):
        detect_r_peaks(SampledSignal(np.ones(70), FS), kernel)


# Q/S


def _single_beat_record(**waves):
    cfg = SynthConfig(duration_s=10, hr_bpm=60, **waves)
    sig, truth = synth_ecg(cfg)
    denoised, _ = stage_signals(sig)
    return denoised, truth, cfg


def test_qs_at_known_offsets():
    wide = dict(q=WaveSpec(-0.15, 15.0, -40.0), s=WaveSpec(-0.25, 15.0, 40.0))
    x, truth, _ = _single_beat_record(**wide)
    rr = FS
    for beat in truth.beats:
        q, s = locate_qs(x, beat.r, rr)
        assert ms(q - beat.q) <= 8 and ms(s - beat.s) <= 8


def test_qs_window_and_band():
    x, truth, _ = _single_beat_record()
    cfg = DetectionConfig()
    for beat in truth.beats:
        q, s = locate_qs(x, beat.r, FS, cfg)
        band = cfg.isoelectric_band_fraction * abs(x.samples[beat.r])
        assert beat.r - q <= 0.15 * FS and s - beat.r <= 0.15 * FS
        assert x.samples[q] <= band and x.samples[s] <= band


def test_qs_on_inverted_beat():
    x, truth, _ = _single_beat_record()
    neg = x.with_samples(-x.samples)
    for beat in truth.beats:
        q, s = locate_qs(neg, beat.r, FS)
        assert neg.samples[q] >= neg.samples[q - 1] and neg.samples[q] >= neg.samples[q + 1]
        assert neg.samples[s] >= neg.samples[s - 1] and neg.samples[s] >= neg.samples[s + 1]
        assert locate_qs(x, beat.r, FS) == (q, s)


def test_qs_absent_on_isolated_lobe():
    t = np.arange(2 * FS)
    x = SampledSignal(np.exp(-0.5 * ((t - FS) / 4.0) ** 2), FS)
    assert locate_qs(x, FS, FS) == (None, None)


def test_qs_absent_on_flat_line():
    assert locate_qs(SampledSignal(np.zeros(1000), FS), 500, FS) == (None, None)


def test_qs_argument_errors():
    x = SampledSignal(np.ones(100), FS)
    with pytest.raises(ParameterError):
        locate_qs(x, 100, 50)
    with pytest.raises(ParameterError):
        locate_qs(x, 50, 0)


# P/T


def test_pt_at_known_offsets():
    waves = dict(p=WaveSpec(0.15, 40.0, -125.0), t=WaveSpec(0.3, 70.0, 225.0))
    x, truth, _ = _single_beat_record(**waves)
    for beat in truth.beats:
        q, s = locate_qs(x, beat.r, FS)
        p, t, pol = locate_pt(x, q, s, FS, r=beat.r)
        assert ms(p - beat.p) <= 12 and ms(t - beat.t) <= 12
        assert pol == "positive"


def test_inverted_t():
    x, truth, _ = _single_beat_record(t=WaveSpec(-0.4, 70.0, 250.0), t_polarity="negative")
    for beat in truth.beats:
        q, s = locate_qs(x, beat.r, FS)
        _, t, pol = locate_pt(x, q, s, FS, r=beat.r)
        assert pol == "negative" and ms(t - beat.t) <= 12


def test_pt_truncated_at_record_edge():
    x, truth, _ = _single_beat_record()
    beat = truth.beats[0]
    q, s = locate_qs(x, beat.r, FS)
    cut = x.with_samples(x.samples[q - 5 :])
    shift = q - 5
    p, t, _ = locate_pt(cut, q - shift, s - shift, FS, r=beat.r - shift)
    assert p is None and t is not None


def test_pt_on_flat_line():
    assert locate_pt(SampledSignal(np.zeros(1000), FS), 400, 600, FS) == (None, None, "positive")


def test_pt_argument_errors():
    x = SampledSignal(np.ones(100), FS)
    with pytest.raises(ParameterError):
        locate_pt(x, 60, 40, 50)
    with pytest.raises(ParameterError):
        locate_pt(x, 40, 60, -1)


# full pipeline


@pytest.fixture(scope="module")
def corpus_record():
    cfg = corpus_configs(1, duration_s=60)[0]
    return synth_ecg(cfg)


def test_delineate_scores_perfectly(kernel, corpus_record):
    sig, truth = corpus_record
    ann = delineate(sig, kernel, record_id=truth.record_id)
    report = evaluate(ann, truth)
    assert report.se == 1.0 and report.ppv == 1.0
    assert ann.record_id == truth.record_id and ann.fs == sig.fs


def test_delineate_zero_signal(kernel):
    ann = delineate(SampledSignal(np.zeros(5 * FS), FS), kernel)
    assert len(ann) == 0


def test_delineate_too_short(kernel):
    with pytest.raises(ParameterError):
        delineate(SampledSignal(np.ones(2 * FS), FS), kernel)


def test_delineate_sign_flip(kernel, corpus_record):
    sig, _ = corpus_record
    a = delineate(sig, kernel)
    b = delineate(sig.with_samples(-sig.samples), kernel)
    assert a.r_indices.tolist() == b.r_indices.tolist()


def _check_invariants(ann, cfg=DetectionConfig()):
    r = ann.r_indices
    assert np.all(np.diff(r) * 1000.0 / ann.fs >= cfg.refractory_ms)
    for beat in ann.beats:
        present = [v for v in (beat.p, beat.q, beat.r, beat.s, beat.t) if v is not None]
        assert present == sorted(present) and len(set(present)) == len(present)


@pytest.fixture(scope="module")
def mixed_records():
    cfgs = corpus_configs(4, duration_s=20, seed=77)
    clean = make_corpus(cfgs)
    noisy = make_corpus(cfgs, snr_db=5.0, baseline_ratio=2.0)
    return [s for s, _ in clean + noisy]


def test_invariants_on_every_output(kernel, mixed_records):
    for sig in mixed_records:
        ann = delineate(sig, kernel)
        _check_invariants(ann)
        denoised, _ = stage_signals(sig)
        band = 0.05 * np.abs(denoised.samples)
        for beat in ann.beats:
            sign = np.sign(denoised.samples[beat.r])
            for idx in (beat.q, beat.s):
                if idx is not None:
                    assert sign * denoised.samples[idx] <= band[beat.r]


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(45, 150), st.sampled_from([360, 500, 1000]))
def test_invariants_random_records(kernel, seed, hr, fs):
    cfg = SynthConfig(fs=fs, duration_s=8, hr_bpm=hr, rr_jitter_fraction=0.1, noise_sigma_mv=0.05, seed=seed, rate_adapt_t=True)
    sig, _ = synth_ecg(cfg)
    ann = delineate(sig, kernel)
    _check_invariants(ann)


def test_threshold_monotonicity(kernel, mixed_records):
    sweep = [0.20, 0.25, 0.30, 0.35, 0.40]
    for sig in mixed_records:
        _, stage = stage_signals(sig)
        counts = [len(detect_r_peaks(stage, kernel, DetectionConfig(threshold_fraction=f))) for f in sweep]
        assert counts == sorted(counts, reverse=True)
