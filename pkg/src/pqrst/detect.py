"""R-peak detection with the adaptive wavelet and P/Q/S/T localisation.

Detection works on the conditioned stage signal (baseline removed,
denoised, T suppressed, squared). Its CWT at two dilations is scanned for
adjacent maximum/minimum pairs above threshold; the zero crossing inside a
pair marks an R candidate. Candidates are confirmed across scales, thinned
by a refractory lockout, and long gaps are searched again at a reduced
threshold. Q, S, P and T are then found in the time domain on the
denoised signal relative to each R.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from scipy.signal import find_peaks

from .errors import FormatError, ParameterError
from .preprocess import remove_baseline, square, suppress_t, swt_denoise
from .signal_io import AnnotationSet, BeatAnnotation, SampledSignal
from .wavelet import CwtCoefficients, WaveletKernel, base_scale_samples, cwt

__all__ = [
    "DetectionConfig",
    "MaxMinPair",
    "Candidate",
    "find_max_min_pairs",
    "detect_r_peaks",
    "locate_qs",
    "locate_pt",
    "delineate",
    "stage_signals",
]

#: Half-width of the search that moves a zero crossing onto the stage peak.
REFINE_MS = 20.0
#: Number of preceding RR intervals averaged for the search-back trigger.
RR_HISTORY = 8


@dataclass(frozen=True)
class DetectionConfig:
    threshold_fraction: float = 0.30
    refractory_ms: float = 120.0
    base_scale_ms: float = 100.0
    cross_scale_tol_ms: float = 40.0
    searchback_rr_multiple: float = 1.66
    searchback_threshold_factor: float = 0.5
    qs_window_fraction: float = 0.15
    pt_window_fraction: float = 0.40
    isoelectric_band_fraction: float = 0.05

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ParameterError(f"{f.name} must be a number, got {value!r}")
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{f.name} must be positive, got {value!r}")
        for name in (
            "threshold_fraction",
            "searchback_threshold_factor",
            "qs_window_fraction",
            "pt_window_fraction",
            "isoelectric_band_fraction",
        ):
            if not getattr(self, name) < 1:
                raise ParameterError(f"{name} must lie in (0, 1), got {getattr(self, name)!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "DetectionConfig":
        if not isinstance(obj, dict):
            raise ParameterError("detection config must be a JSON object")
        unknown = set(obj) - {f.name for f in fields(cls)}
        if unknown:
            raise ParameterError(f"unknown detection config keys: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def from_json(cls, path) -> "DetectionConfig":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
        return cls.from_dict(obj)


@dataclass(frozen=True)
class MaxMinPair:
    """Adjacent positive maximum and negative minimum of CWT coefficients."""

    max_idx: int
    min_idx: int
    max_val: float
    min_val: float

    @property
    def lo(self) -> int:
        return min(self.max_idx, self.min_idx)

    @property
    def hi(self) -> int:
        return max(self.max_idx, self.min_idx)

    @property
    def strength(self) -> float:
        return min(self.max_val, -self.min_val)


@dataclass(frozen=True)
class Candidate:
    index: int
    crossing: int
    pair: MaxMinPair


def _extrema(coeffs: np.ndarray, first: int, last: int, threshold: float):
    seg = coeffs[first : last + 1]
    maxima, _ = find_peaks(seg, height=threshold)
    minima, _ = find_peaks(-seg, height=threshold)
    idx = np.concatenate([maxima, minima]) + first
    sign = np.concatenate([np.ones(maxima.size, int), -np.ones(minima.size, int)])
    order = np.argsort(idx, kind="stable")
    return idx[order], sign[order]


def find_max_min_pairs(c: CwtCoefficients, threshold: float, max_span: float) -> List[MaxMinPair]:
    """Adjacent opposite-sign extrema with ``|value| >= threshold``.

    Same-sign extrema closer than ``max_span`` are merged (largest kept)
    before pairing, and a pair may span at most ``max_span`` samples.
    Either order (max first or min first) is accepted.
    """
    first, last = c.valid_range
    coeffs = c.coeffs
    idx, sign = _extrema(coeffs, first, last, threshold)
    merged_idx: list = []
    merged_sign: list = []
    for i, s in zip(idx, sign):
        if merged_idx and merged_sign[-1] == s and i - merged_idx[-1] <= max_span:
            if abs(coeffs[i]) > abs(coeffs[merged_idx[-1]]):
                merged_idx[-1] = int(i)
            continue
        merged_idx.append(int(i))
        merged_sign.append(int(s))

    pairs = []
    for (i, si), (j, sj) in zip(zip(merged_idx, merged_sign), zip(merged_idx[1:], merged_sign[1:])):
        if si == sj or j - i > max_span:
            continue
        mx, mn = (i, j) if si > 0 else (j, i)
        pairs.append(MaxMinPair(mx, mn, float(coeffs[mx]), float(coeffs[mn])))
    return pairs


def _zero_crossing(coeffs: np.ndarray, pair: MaxMinPair) -> int:
    seg = coeffs[pair.lo : pair.hi + 1]
    flips = np.nonzero(np.signbit(seg[:-1]) != np.signbit(seg[1:]))[0]
    k = int(flips[0]) if flips.size else 0
    if abs(seg[k + 1]) < abs(seg[k]):
        k += 1
    return pair.lo + k


def _candidates(stage: np.ndarray, c: CwtCoefficients, threshold: float, refine: int) -> List[Candidate]:
    pairs = find_max_min_pairs(c, threshold, max_span=c.scale)
    out = []
    for pair in pairs:
        zc = _zero_crossing(c.coeffs, pair)
        lo = max(0, zc - refine)
        hi = min(stage.size, zc + refine + 1)
        peak = lo + int(np.argmax(stage[lo:hi]))
        out.append(Candidate(peak, zc, pair))
    return out


def _confirm(level1: Sequence[Candidate], level2: Sequence[Candidate], tol: float) -> List[Candidate]:
    if not level2:
        return []
    pos2 = np.sort(np.array([c.index for c in level2]))
    keep = []
    for cand in level1:
        k = np.searchsorted(pos2, cand.index)
        near = [pos2[j] for j in (k - 1, k) if 0 <= j < pos2.size]
        if any(abs(p - cand.index) <= tol for p in near):
            keep.append(cand)
    return keep


def _priority(cand: Candidate):
    return (-cand.pair.max_val, -cand.pair.strength, cand.index)


def _lockout(cands: Sequence[Candidate], refractory: float, accepted: Sequence[int] = ()) -> List[Candidate]:
    """Greedy strongest-first selection with a minimum spacing of ``refractory``."""
    taken = sorted(accepted)
    kept = []
    for cand in sorted(cands, key=_priority):
        k = np.searchsorted(taken, cand.index)
        if k < len(taken) and taken[k] - cand.index < refractory:
            continue
        if k > 0 and cand.index - taken[k - 1] < refractory:
            continue
        taken.insert(k, cand.index)
        kept.append(cand)
    return kept


def _search_back(accepted: List[int], weak: Sequence[Candidate], n: int, cfg: DetectionConfig, refractory: float):
    if len(accepted) < 2 or not weak:
        return accepted
    beats = list(accepted)
    bounds = beats + [n - 1]
    i = 0
    while i < len(bounds) - 1:
        start, stop = bounds[i], bounds[i + 1]
        history = np.diff(bounds[: i + 1])[-RR_HISTORY:]
        if history.size == 0:
            history = np.diff(beats)
        mean_rr = float(np.mean(history))
        if stop - start > cfg.searchback_rr_multiple * mean_rr:
            inside = [c for c in weak if start < c.index < stop]
            found = _lockout(inside, refractory, accepted=[start] + ([stop] if stop != n - 1 else []))
            if found:
                new = sorted(c.index for c in found)
                bounds[i + 1 : i + 1] = new
                beats = sorted(beats + new)
        i += 1
    return beats


def detect_r_peaks(x_stage: SampledSignal, kernel: WaveletKernel, cfg: DetectionConfig = DetectionConfig()) -> List[int]:
    """R-peak sample indices on the squared, conditioned stage signal.

    Returns strictly increasing indices at least ``cfg.refractory_ms``
    apart. An all-zero input yields an empty list.
    """
    fs = x_stage.fs
    a1 = base_scale_samples(fs, cfg.base_scale_ms)
    if 2 * a1 > len(x_stage):
        raise ParameterError(
            f"signal of {len(x_stage)} samples is shorter than the level-2 kernel support ({2 * a1:g})"
        )
    c1 = cwt(x_stage, kernel, a1)
    c2 = cwt(x_stage, kernel, 2 * a1)
    peak1 = float(np.max(np.abs(c1.valid))) if c1.valid.size else 0.0
    peak2 = float(np.max(np.abs(c2.valid))) if c2.valid.size else 0.0
    if peak1 == 0.0 or peak2 == 0.0:
        return []

    stage = x_stage.samples
    refine = int(round(REFINE_MS * fs / 1000.0))
    tol = cfg.cross_scale_tol_ms * fs / 1000.0
    refractory = cfg.refractory_ms * fs / 1000.0

    def confirmed(factor):
        l1 = _candidates(stage, c1, factor * cfg.threshold_fraction * peak1, refine)
        l2 = _candidates(stage, c2, factor * cfg.threshold_fraction * peak2, refine)
        return _confirm(l1, l2, tol)

    strong = _lockout(confirmed(1.0), refractory)
    accepted = sorted(c.index for c in strong)
    weak = confirmed(cfg.searchback_threshold_factor)
    return [int(i) for i in _search_back(accepted, weak, len(x_stage), cfg, refractory)]


def _runs(seq: np.ndarray):
    """Start offsets and values of runs of equal consecutive values."""
    change = np.concatenate([[True], seq[1:] != seq[:-1]])
    starts = np.nonzero(change)[0]
    return starts, seq[starts]


def _first_trough(seq: np.ndarray) -> Optional[int]:
    starts, vals = _runs(seq)
    for j in range(1, vals.size - 1):
        if vals[j] < vals[j - 1] and vals[j] < vals[j + 1]:
            return int(starts[j])
    return None


def locate_qs(x_clean: SampledSignal, r: int, rr: float, cfg: DetectionConfig = DetectionConfig()):
    """Q and S around ``r``: first opposite-polarity extremum past the iso-electric band.

    Returns ``(q, s)``; either may be ``None`` when no such extremum lies
    within ``qs_window_fraction * rr`` of ``r``.
    """
    x = x_clean.samples
    n = x.size
    if not 0 <= r < n:
        raise ParameterError(f"r index {r} outside signal of {n} samples")
    if not rr > 0:
        raise ParameterError(f"rr must be positive, got {rr!r}")
    if x[r] == 0:
        return None, None
    y = x * np.sign(x[r])
    band = cfg.isoelectric_band_fraction * y[r]
    w = int(round(cfg.qs_window_fraction * rr))

    q = None
    lo = max(0, r - w)
    entered = np.nonzero(y[lo:r][::-1] <= band)[0]
    if entered.size:
        cross = r - 1 - int(entered[0])
        seq = y[lo : cross + 2][::-1]
        k = _first_trough(seq)
        if k is not None:
            q = cross + 1 - k

    s = None
    hi = min(n - 1, r + w)
    entered = np.nonzero(y[r + 1 : hi + 1] <= band)[0]
    if entered.size:
        cross = r + 1 + int(entered[0])
        seq = y[cross - 1 : hi + 1]
        k = _first_trough(seq)
        if k is not None:
            s = cross - 1 + k
    return q, s


def _prominent(seg: np.ndarray, floor: float):
    peaks, props = find_peaks(seg, prominence=floor)
    return peaks, props["prominences"] if peaks.size else np.array([])


def locate_pt(
    x_clean: SampledSignal,
    q: int,
    s: int,
    rr: float,
    cfg: DetectionConfig = DetectionConfig(),
    r: Optional[int] = None,
):
    """P left of ``q`` and T right of ``s``, each within ``pt_window_fraction * rr``.

    P is the maximum nearest to ``q`` (same polarity as R). T is whichever of
    the most prominent peak and the most prominent trough has the larger
    absolute amplitude, which also gives the T polarity. Extrema must rise
    out of the iso-electric band (``isoelectric_band_fraction * |x[r]|``)
    to count. Returns ``(p, t, t_polarity)``.
    """
    x = x_clean.samples
    n = x.size
    if not (0 <= q < n and 0 <= s < n and q <= s):
        raise ParameterError(f"q={q}, s={s} not valid anchors in a signal of {n} samples")
    if not rr > 0:
        raise ParameterError(f"rr must be positive, got {rr!r}")
    if r is None:
        r = q + int(np.argmax(np.abs(x[q : s + 1])))
    ref = abs(x[r])
    if ref == 0:
        return None, None, "positive"
    floor = cfg.isoelectric_band_fraction * ref
    y = x * np.sign(x[r])
    w = int(round(cfg.pt_window_fraction * rr))

    p = None
    lo = max(0, q - w)
    peaks, _ = _prominent(y[lo:q], floor)
    if peaks.size:
        p = lo + int(peaks[-1])

    t, polarity = None, "positive"
    hi = min(n, s + w + 1)
    seg = x[s + 1 : hi]
    if seg.size >= 3:
        best = []
        for sign, label in ((1.0, "positive"), (-1.0, "negative")):
            peaks, prom = _prominent(sign * seg, floor)
            if peaks.size:
                k = int(peaks[np.argmax(prom)])
                best.append((abs(seg[k]), label, k))
        if best:
            _, polarity, k = max(best, key=lambda b: b[0])
            t = s + 1 + k
    return p, t, polarity


def stage_signals(x: SampledSignal):
    """``(denoised, stage)``: the signal used for P/Q/S/T and the detector input."""
    denoised = swt_denoise(remove_baseline(x))
    return denoised, square(suppress_t(denoised))


def _beat_rr(r_idx: Sequence[int], k: int, default: float) -> float:
    if len(r_idx) < 2:
        return default
    if k == 0:
        return float(r_idx[1] - r_idx[0])
    return float(r_idx[k] - r_idx[k - 1])


def delineate(
    x: SampledSignal,
    kernel: WaveletKernel,
    cfg: DetectionConfig = DetectionConfig(),
    record_id: str = "",
) -> AnnotationSet:
    """Full pipeline: conditioning, R detection, then P/Q/S/T per beat."""
    if x.duration_s <= 2.0:
        raise ParameterError(f"record of {x.duration_s:.3f} s is too short; need more than 2 s")
    denoised, stage = stage_signals(x)
    r_idx = detect_r_peaks(stage, kernel, cfg)
    beats = []
    for k, r in enumerate(r_idx):
        rr = _beat_rr(r_idx, k, default=x.fs)
        q, s = locate_qs(denoised, r, rr, cfg)
        p, t, polarity = locate_pt(denoised, q if q is not None else r, s if s is not None else r, rr, cfg, r=r)
        beats.append(BeatAnnotation(r=r, p=p, q=q, s=s, t=t, t_polarity=polarity))
    return AnnotationSet(record_id=record_id, fs=x.fs, beats=tuple(beats), min_spacing_ms=cfg.refractory_ms)
