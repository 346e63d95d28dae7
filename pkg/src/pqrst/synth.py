"""Synthetic ECG records with exact fiducial ground truth.

Each beat is the sum of five Gaussian lobes (P, Q, R, S, T) placed at fixed
offsets from the R time. Optional sinusoidal baseline wander and white
Gaussian noise are added on top. Lobe widths are full widths at half
maximum.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .errors import ParameterError
from .signal_io import AnnotationSet, BeatAnnotation, SampledSignal

__all__ = [
    "WaveSpec",
    "SynthConfig",
    "SynthParts",
    "synth_components",
    "synth_ecg",
    "noise_sigma_for_snr",
    "corpus_configs",
    "make_corpus",
]

_FWHM_TO_SD = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
_WAVES = ("p", "q", "r", "s", "t")


@dataclass(frozen=True)
class WaveSpec:
    amplitude_mv: float
    width_ms: float
    offset_ms: float


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of one synthetic record.

    With ``rate_adapt_t`` the T offset is scaled by ``sqrt(RR / 1 s)`` of the
    nominal heart rate, so T stays inside the beat at high rates.
    """

    fs: float = 360.0
    duration_s: float = 10.0
    hr_bpm: float = 60.0
    rr_jitter_fraction: float = 0.0
    p: WaveSpec = WaveSpec(0.15, 40.0, -160.0)
    q: WaveSpec = WaveSpec(-0.1, 15.0, -25.0)
    r: WaveSpec = WaveSpec(1.0, 20.0, 0.0)
    s: WaveSpec = WaveSpec(-0.2, 15.0, 25.0)
    t: WaveSpec = WaveSpec(0.3, 70.0, 250.0)
    noise_sigma_mv: float = 0.0
    baseline_amp_mv: float = 0.0
    baseline_freq_hz: float = 0.3
    t_polarity: str = "positive"
    rate_adapt_t: bool = False
    seed: int = 0

    def __post_init__(self):
        for name in ("fs", "duration_s", "hr_bpm"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not 0 <= self.rr_jitter_fraction < 1:
            raise ParameterError("rr_jitter_fraction must lie in [0, 1)")
        for name in ("noise_sigma_mv", "baseline_amp_mv", "baseline_freq_hz"):
            if not getattr(self, name) >= 0:
                raise ParameterError(f"{name} must be non-negative, got {getattr(self, name)!r}")
        if self.t_polarity not in ("positive", "negative"):
            raise ParameterError(f"t_polarity must be 'positive' or 'negative', got {self.t_polarity!r}")
        waves = [getattr(self, w) for w in _WAVES]
        if any(not w.width_ms > 0 for w in waves):
            raise ParameterError("wave widths must be positive")
        if self.r.offset_ms != 0:
            raise ParameterError("the R wave defines the beat time; its offset must be 0")
        offsets = [w.offset_ms for w in waves]
        if not all(a < b for a, b in zip(offsets, offsets[1:])):
            raise ParameterError("wave offsets must satisfy P < Q < 0 < S < T")
        if 60.0 / self.hr_bpm * (1 - self.rr_jitter_fraction) < 0.120:
            raise ParameterError("heart rate and jitter allow beats closer than 120 ms")

    @property
    def rr_s(self) -> float:
        return 60.0 / self.hr_bpm

    def wave_offsets_ms(self) -> dict:
        out = {w: getattr(self, w).offset_ms for w in _WAVES}
        if self.rate_adapt_t:
            out["t"] *= math.sqrt(self.rr_s)
        return out

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ParameterError(f"unknown synth config keys: {sorted(unknown)}")
        kwargs = dict(obj)
        for w in _WAVES:
            if w in kwargs:
                wave = kwargs[w]
                if not isinstance(wave, dict):
                    raise ParameterError(f"wave {w!r} must be an object")
                base = asdict(getattr(cls, w))
                base.update(wave)
                try:
                    kwargs[w] = WaveSpec(**base)
                except TypeError as exc:
                    raise ParameterError(f"wave {w!r}: {exc}") from None
        return cls(**kwargs)


@dataclass(frozen=True)
class SynthParts:
    clean: np.ndarray
    baseline: np.ndarray
    noise: np.ndarray
    truth: AnnotationSet
    fs: float

    @property
    def total(self) -> np.ndarray:
        return self.clean + self.baseline + self.noise


def _beat_indices(cfg: SynthConfig, rng: np.random.Generator, n: int) -> np.ndarray:
    rr = cfg.rr_s
    last = cfg.duration_s - 0.5 * rr
    times = []
    t = 0.5 * rr
    while t <= last:
        times.append(t)
        t += rr * (1.0 + rng.uniform(-cfg.rr_jitter_fraction, cfg.rr_jitter_fraction))
    idx = np.rint(np.array(times) * cfg.fs).astype(int)
    return idx[idx < n]


def synth_components(cfg: SynthConfig) -> SynthParts:
    """Render clean beats, wander and noise separately (they sum to the record)."""
    n = int(round(cfg.duration_s * cfg.fs))
    beat_rng, noise_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(2))
    r_idx = _beat_indices(cfg, beat_rng, n)
    offsets = cfg.wave_offsets_ms()
    t_sign = -1.0 if cfg.t_polarity == "negative" else 1.0

    clean = np.zeros(n)
    beats = []
    for r in r_idx:
        centers = {}
        for w in _WAVES:
            wave = getattr(cfg, w)
            # the T sign follows t_polarity so the truth label always matches
            amp = t_sign * abs(wave.amplitude_mv) if w == "t" else wave.amplitude_mv
            center = r + offsets[w] * cfg.fs / 1000.0
            sd = wave.width_ms * _FWHM_TO_SD * cfg.fs / 1000.0
            lo = max(0, int(math.floor(center - 8 * sd)))
            hi = min(n, int(math.ceil(center + 8 * sd)) + 1)
            if hi > lo:
                k = np.arange(lo, hi)
                clean[lo:hi] += amp * np.exp(-0.5 * ((k - center) / sd) ** 2)
            c = int(round(center))
            centers[w] = c if 0 <= c < n else None
        beats.append(BeatAnnotation(t_polarity=cfg.t_polarity, **centers))

    time = np.arange(n) / cfg.fs
    baseline = cfg.baseline_amp_mv * np.sin(2.0 * math.pi * cfg.baseline_freq_hz * time)
    noise = noise_rng.normal(0.0, cfg.noise_sigma_mv, n) if cfg.noise_sigma_mv > 0 else np.zeros(n)
    truth = AnnotationSet(record_id=f"synth-{cfg.seed}", fs=cfg.fs, beats=tuple(beats))
    return SynthParts(clean, baseline, noise, truth, cfg.fs)


def synth_ecg(cfg: SynthConfig):
    """Return ``(SampledSignal, AnnotationSet)``; bit-identical for a fixed seed."""
    parts = synth_components(cfg)
    return SampledSignal(parts.total, cfg.fs, "synth"), parts.truth


def noise_sigma_for_snr(clean: np.ndarray, snr_db: float) -> float:
    """White-noise sd giving ``snr_db`` relative to the mean power of ``clean``."""
    power = float(np.mean(np.square(clean)))
    return math.sqrt(power / 10.0 ** (snr_db / 10.0))


def corpus_configs(
    n_records: int = 20,
    *,
    fs: float = 360.0,
    duration_s: float = 60.0,
    hr_range=(50.0, 120.0),
    rr_jitter_fraction: float = 0.05,
    t_polarity: str = "positive",
    seed: int = 2024,
    **overrides,
) -> list:
    """Configs for a corpus with heart rates drawn uniformly from ``hr_range``."""
    rng = np.random.default_rng(seed)
    hrs = rng.uniform(hr_range[0], hr_range[1], n_records)
    out = []
    for i, hr in enumerate(hrs):
        cfg = SynthConfig(
            fs=fs,
            duration_s=duration_s,
            hr_bpm=float(hr),
            rr_jitter_fraction=rr_jitter_fraction,
            t_polarity=t_polarity,
            rate_adapt_t=True,
            seed=seed * 1000 + i,
        )
        out.append(replace(cfg, **overrides) if overrides else cfg)
    return out


def make_corpus(configs, snr_db: float | None = None, baseline_ratio: float = 0.0) -> list:
    """Render ``configs`` into ``[(signal, truth), ...]``.

    ``snr_db`` sets white noise relative to each record's clean power and
    ``baseline_ratio`` sets wander amplitude as a multiple of the R height.
    """
    records = []
    for cfg in configs:
        if snr_db is not None or baseline_ratio:
            clean = synth_components(replace(cfg, noise_sigma_mv=0.0, baseline_amp_mv=0.0)).clean
            changes = {}
            if snr_db is not None:
                changes["noise_sigma_mv"] = noise_sigma_for_snr(clean, snr_db)
            if baseline_ratio:
                changes["baseline_amp_mv"] = baseline_ratio * abs(cfg.r.amplitude_mv)
            cfg = replace(cfg, **changes)
        records.append(synth_ecg(cfg))
    return records
