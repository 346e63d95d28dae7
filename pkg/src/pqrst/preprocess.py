"""Signal conditioning ahead of R-peak detection.

The chain applied by :func:`pqrst.detect.delineate` is::

    remove_baseline -> swt_denoise -> suppress_t -> square

All functions take and return :class:`~pqrst.signal_io.SampledSignal` and
preserve length and sampling rate.
"""

from __future__ import annotations

import math

import numpy as np
import pywt
from scipy import ndimage

from .errors import ParameterError
from .signal_io import SampledSignal

__all__ = [
    "window_samples",
    "median_filter",
    "remove_baseline",
    "default_swt_levels",
    "swt_denoise",
    "suppress_t",
    "square",
]

QRS_MEDIAN_MS = 200.0
T_MEDIAN_MS = 600.0


def window_samples(width_ms: float, fs: float) -> int:
    """Odd window length closest to ``width_ms`` at rate ``fs``."""
    if not width_ms > 0:
        raise ParameterError(f"width_ms must be positive, got {width_ms!r}")
    n = int(math.floor(width_ms * fs / 1000.0 + 0.5))
    if n % 2 == 0:
        n += 1
    return n


def _sliding_median(values: np.ndarray, window: int) -> np.ndarray:
    # mode="nearest" replicates the edge samples by half a window
    return ndimage.median_filter(values, size=window, mode="nearest")


def median_filter(x: SampledSignal, width_ms: float) -> SampledSignal:
    """Centered running median over ``width_ms``.

    The window is ``round(width_ms * fs / 1000)`` samples, bumped to the next
    odd number, with replicate-edge padding at the record borders.
    """
    window = window_samples(width_ms, x.fs)
    if window > len(x):
        raise ParameterError(
            f"median window of {window} samples ({width_ms:g} ms) exceeds signal length {len(x)}"
        )
    return x.with_samples(_sliding_median(x.samples, window))


def remove_baseline(x: SampledSignal) -> SampledSignal:
    """Subtract the 200 ms -> 600 ms median cascade estimate of the baseline.

    The 200 ms pass strips QRS complexes and P waves, the 600 ms pass strips
    T waves; what is left is the wander, which is subtracted from ``x``.
    """
    if window_samples(T_MEDIAN_MS, x.fs) > len(x):
        raise ParameterError(f"signal of {len(x)} samples is shorter than {T_MEDIAN_MS:g} ms")
    baseline = median_filter(median_filter(x, QRS_MEDIAN_MS), T_MEDIAN_MS)
    return x.with_samples(x.samples - baseline.samples)


def default_swt_levels(fs: float) -> int:
    return 3 if fs <= 500 else 4


def swt_denoise(x: SampledSignal, levels: int | None = None) -> SampledSignal:
    """Undecimated Haar (db1) shrinkage.

    Noise scale comes from the finest detail band,
    ``sigma = median(|d1|) / 0.6745``, and every detail band is soft
    thresholded at ``sigma * sqrt(2 ln N)``. The record is mirrored at both
    ends before the (periodic) transform and cropped afterwards.
    """
    if levels is None:
        levels = default_swt_levels(x.fs)
    if int(levels) != levels or levels < 1:
        raise ParameterError(f"levels must be a positive integer, got {levels!r}")
    levels = int(levels)
    n = len(x)
    block = 2 ** levels
    if n < block:
        raise ParameterError(f"signal of {n} samples is shorter than 2**levels = {block}")

    left = block
    right = block + (-(n + 2 * block)) % block
    padded = np.pad(x.samples, (left, right), mode="symmetric")
    coeffs = pywt.swt(padded, "db1", level=levels)

    sigma = np.median(np.abs(coeffs[-1][1])) / 0.6745
    tau = sigma * math.sqrt(2.0 * math.log(n)) if n > 1 else 0.0
    shrunk = [(ca, np.sign(cd) * np.maximum(np.abs(cd) - tau, 0.0)) for ca, cd in coeffs]
    out = pywt.iswt(shrunk, "db1")
    return x.with_samples(out[left : left + n])


def suppress_t(x: SampledSignal) -> SampledSignal:
    """Attenuate T waves before QRS detection.

    The T-wave component is taken as what the 200 ms median keeps above its
    own 600 ms median (i.e. the slow waves minus baseline); subtracting it
    leaves the narrow QRS lobes essentially untouched.
    """
    if window_samples(T_MEDIAN_MS, x.fs) > len(x):
        raise ParameterError(f"signal of {len(x)} samples is shorter than {T_MEDIAN_MS:g} ms")
    slow = median_filter(x, QRS_MEDIAN_MS)
    baseline = median_filter(slow, T_MEDIAN_MS)
    return x.with_samples(x.samples - (slow.samples - baseline.samples))


def square(x: SampledSignal) -> SampledSignal:
    return x.with_samples(np.square(x.samples))
