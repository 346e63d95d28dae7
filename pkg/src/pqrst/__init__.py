"""Adaptive-wavelet ECG delineation.

Typical use::

    from pqrst import default_kernel, delineate, load_record

    signal = load_record("100.csv")
    ann = delineate(signal, default_kernel())
"""

from .detect import DetectionConfig, delineate, detect_r_peaks, locate_pt, locate_qs
from .errors import FitError, FormatError, ParameterError, PqrstError, ValidationError
from .evaluation import EvalReport, evaluate, match_annotations, score
from .preprocess import median_filter, remove_baseline, square, suppress_t, swt_denoise
from .signal_io import (
    AnnotationSet,
    BeatAnnotation,
    SampledSignal,
    load_annotations,
    load_record,
    write_annotations,
    write_record,
)
from .synth import SynthConfig, synth_ecg
from .wavelet import WaveletKernel, cwt, cwt_two_levels, default_kernel, default_qrs_pattern, fit_adaptive_wavelet

__version__ = "0.1.0"
