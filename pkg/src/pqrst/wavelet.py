"""QRS-matched wavelet design and the direct continuous wavelet transform.

A pattern sampled on [0, 1] is approximated by a C1 piecewise polynomial
(four equal pieces, degree ``order``) in the least-squares sense, subject to
zero mean and vanishing end values. The result, scaled to unit energy, is an
admissible real wavelet whose CWT responds most strongly where the signal
resembles the pattern.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FitError, FormatError, ParameterError
from .signal_io import SampledSignal

__all__ = [
    "Pattern",
    "WaveletKernel",
    "CwtCoefficients",
    "PiecewiseFit",
    "default_qrs_pattern",
    "constrained_lstsq",
    "piecewise_fit",
    "fit_adaptive_wavelet",
    "default_kernel",
    "base_scale_samples",
    "cwt",
    "cwt_two_levels",
    "load_pattern",
    "write_kernel_csv",
]

N_PIECES = 4
DEFAULT_GRID_N = 256
DEFAULT_ORDER = 4


@dataclass(frozen=True)
class Pattern:
    """Template amplitudes sampled uniformly over [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 8:
            raise ParameterError(f"pattern needs at least 8 samples, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ParameterError("pattern contains non-finite values")
        if not np.any(values):
            raise ParameterError("pattern is identically zero")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def resampled(self, grid_n: int) -> np.ndarray:
        src = np.linspace(0.0, 1.0, self.values.size)
        return np.interp(np.linspace(0.0, 1.0, grid_n), src, self.values)


@dataclass(frozen=True)
class WaveletKernel:
    """Real wavelet sampled on ``grid_n`` uniform points spanning [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ParameterError("kernel needs at least two grid points")
        if not np.all(np.isfinite(values)):
            raise ParameterError("kernel contains non-finite values")
        l1 = np.sum(np.abs(values))
        if l1 == 0 or abs(values.sum()) / l1 > 1e-8:
            raise ParameterError("kernel is not zero-mean")
        energy = np.sum(values**2) / (values.size - 1)
        if abs(energy - 1.0) > 1e-9:
            raise ParameterError(f"kernel energy {energy!r} is not 1")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def grid_n(self) -> int:
        return self.values.size

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.grid_n)

    @property
    def dt(self) -> float:
        return 1.0 / (self.grid_n - 1)

    def __call__(self, t):
        """Evaluate by linear interpolation; zero outside [0, 1]."""
        return np.interp(t, self.grid, self.values, left=0.0, right=0.0)


@dataclass(frozen=True)
class CwtCoefficients:
    """W(a, b) for one dilation ``scale`` (in samples) and every translation b.

    ``valid_range`` is the inclusive (first, last) span of b where the
    dilated kernel lies fully inside the record.
    """

    scale: float
    coeffs: np.ndarray
    valid_range: tuple

    @property
    def valid(self) -> np.ndarray:
        first, last = self.valid_range
        return self.coeffs[first : last + 1]


def default_qrs_pattern(grid_n: int = DEFAULT_GRID_N) -> Pattern:
    """Biphasic QRS-like template.

    A unit Gaussian lobe at 0.45 (sd 0.08) followed by a negative lobe at
    0.60 (sd 0.10) with 0.55 of its height.
    """
    if grid_n < 32:
        raise ParameterError(f"grid_n must be at least 32, got {grid_n}")
    t = np.linspace(0.0, 1.0, grid_n)
    pos = np.exp(-0.5 * ((t - 0.45) / 0.08) ** 2)
    neg = 0.55 * np.exp(-0.5 * ((t - 0.60) / 0.10) ** 2)
    return Pattern(pos - neg)


def constrained_lstsq(a, b, c, d):
    """Minimise ``|a x - b|^2`` subject to ``c x = d``.

    Solves the KKT system::

        [ a^T a   c^T ] [x]   [a^T b]
        [   c      0  ] [v] = [  d  ]
    """
    a = np.asarray(a, dtype=float)
    c = np.asarray(c, dtype=float)
    n = a.shape[1]
    m = c.shape[0]
    kkt = np.block([[a.T @ a, c.T], [c, np.zeros((m, m))]])
    rhs = np.concatenate([a.T @ np.asarray(b, dtype=float), np.asarray(d, dtype=float)])
    if np.linalg.matrix_rank(kkt) < n + m:
        raise FitError("singular normal equations in constrained least squares")
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError as exc:
        raise FitError(f"constrained least squares failed: {exc}") from None
    return sol[:n]


@dataclass(frozen=True)
class PiecewiseFit:
    """Unnormalised solution of the constrained fit plus the problem data."""

    design: np.ndarray
    constraints: np.ndarray
    target: np.ndarray
    coefficients: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return self.design @ self.coefficients

    def objective(self, coefficients=None) -> float:
        if coefficients is None:
            coefficients = self.coefficients
        r = self.design @ coefficients - self.target
        return float(r @ r)


def _piecewise_design(grid_n: int, order: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, grid_n)
    piece = np.minimum((t * N_PIECES).astype(int), N_PIECES - 1)
    u = t * N_PIECES - piece
    ncoef = order + 1
    design = np.zeros((grid_n, N_PIECES * ncoef))
    powers = u[:, None] ** np.arange(ncoef)[None, :]
    for j in range(N_PIECES):
        rows = piece == j
        design[rows, j * ncoef : (j + 1) * ncoef] = powers[rows]
    return design


def _piecewise_constraints(design: np.ndarray, order: int) -> np.ndarray:
    ncoef = order + 1
    k = np.arange(ncoef)
    rows = []
    for j in range(N_PIECES - 1):
        left = slice(j * ncoef, (j + 1) * ncoef)
        right = (j + 1) * ncoef
        value = np.zeros(design.shape[1])
        value[left] = 1.0
        value[right] = -1.0
        slope = np.zeros(design.shape[1])
        slope[left] = k
        slope[right + 1] = -1.0
        rows += [value, slope]
    start = np.zeros(design.shape[1])
    start[0] = 1.0
    end = np.zeros(design.shape[1])
    end[(N_PIECES - 1) * ncoef :] = 1.0
    rows += [start, end, design.sum(axis=0)]
    return np.array(rows)


def piecewise_fit(pattern: Pattern, order: int = DEFAULT_ORDER, grid_n: int = DEFAULT_GRID_N) -> PiecewiseFit:
    """Constrained least-squares fit of ``pattern`` before energy scaling."""
    if int(order) != order or order < 2:
        raise ParameterError(f"order must be an integer >= 2, got {order!r}")
    if grid_n < N_PIECES * (order + 1):
        raise ParameterError(f"grid_n must be at least {N_PIECES * (order + 1)} for order {order}")
    order = int(order)
    target = pattern.resampled(grid_n)
    design = _piecewise_design(grid_n, order)
    constraints = _piecewise_constraints(design, order)
    coef = constrained_lstsq(design, target, constraints, np.zeros(constraints.shape[0]))
    return PiecewiseFit(design, constraints, target, coef)


def fit_adaptive_wavelet(
    pattern: Pattern, order: int = DEFAULT_ORDER, grid_n: int = DEFAULT_GRID_N
) -> WaveletKernel:
    """Admissible wavelet closest to ``pattern``, normalised to unit energy.

    Raises
    ------
    FitError
        When the projection onto zero-mean, zero-endpoint functions vanishes
        (e.g. a constant pattern) or the normal equations are singular.
    """
    fit = piecewise_fit(pattern, order, grid_n)
    psi = fit.values
    if np.linalg.norm(psi) <= 1e-10 * np.linalg.norm(fit.target):
        raise FitError("pattern has no component orthogonal to constants; fitted wavelet vanishes")
    energy = np.sum(psi**2) / (grid_n - 1)
    return WaveletKernel(psi / math.sqrt(energy))


def default_kernel(grid_n: int = DEFAULT_GRID_N) -> WaveletKernel:
    return fit_adaptive_wavelet(default_qrs_pattern(grid_n), DEFAULT_ORDER, grid_n)


def base_scale_samples(fs: float, base_scale_ms: float = 100.0) -> float:
    """Dilation at which the unit-support kernel spans ``base_scale_ms``."""
    return base_scale_ms * fs / 1000.0


def _dilated_taps(kernel: WaveletKernel, scale: float):
    half = int(math.floor(scale / 2.0))
    m = np.arange(-half, half + 1)
    # translation b sits at the centre of the kernel support
    return m, kernel(m / scale + 0.5)


def cwt(x: SampledSignal, kernel: WaveletKernel, scale: float) -> CwtCoefficients:
    """Direct-sum CWT at one dilation.

    ``coeffs[b] = scale**-0.5 * sum_n x[n] * psi((n - b) / scale + 1/2)``
    with the kernel centred on ``b`` and zero padding beyond the record.
    """
    scale = float(scale)
    n = len(x)
    if not scale >= 1.0:
        raise ParameterError(f"scale must be >= 1 sample, got {scale!r}")
    if scale > n:
        raise ParameterError(f"dilated kernel ({scale:g} samples) longer than signal ({n})")
    m, taps = _dilated_taps(kernel, scale)
    half = int(m[-1])
    full = np.correlate(x.samples, taps, mode="full")
    # full[b + half] = sum_m x[b + m] * taps[m + half]
    coeffs = full[half : half + n] / math.sqrt(scale)
    edge = int(math.ceil(scale / 2.0))
    first, last = edge, n - 1 - edge
    if first > last:
        raise ParameterError(f"scale {scale:g} leaves no valid coefficients on {n} samples")
    return CwtCoefficients(scale, coeffs, (first, last))


def cwt_two_levels(x: SampledSignal, kernel: WaveletKernel, base_scale: float):
    return cwt(x, kernel, base_scale), cwt(x, kernel, 2.0 * base_scale)


def load_pattern(path) -> Pattern:
    """Read a pattern CSV: one amplitude per row (last column is used).

    A first line that does not parse as numbers is treated as a header, so a
    kernel written by :func:`write_kernel_csv` can be read back.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    values = []
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        cell = raw.split(",")[-1].strip()
        try:
            values.append(float(cell))
        except ValueError:
            if lineno == 1:
                continue
            raise FormatError(f"non-numeric pattern value {cell!r}", line=lineno) from None
    try:
        return Pattern(np.array(values))
    except ParameterError as exc:
        raise FormatError(str(exc)) from None


def write_kernel_csv(kernel: WaveletKernel, path) -> None:
    lines = ["t,psi"]
    lines.extend(f"{float(t)!r},{float(v)!r}" for t, v in zip(kernel.grid, kernel.values))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
