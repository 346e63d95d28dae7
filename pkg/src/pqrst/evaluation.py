"""Beat matching and sensitivity / positive-predictivity scoring."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .errors import ParameterError
from .signal_io import AnnotationSet

__all__ = [
    "DEFAULT_TOL_MS",
    "Matching",
    "FiducialScore",
    "EvalReport",
    "match_annotations",
    "score",
    "evaluate",
    "aggregate",
    "format_table",
]

DEFAULT_TOL_MS = 75.0
FIDUCIALS = ("r", "p", "q", "s", "t")


@dataclass(frozen=True)
class Matching:
    """One-to-one pairing of detected and reference beats (by list position)."""

    detected: AnnotationSet
    reference: AnnotationSet
    pairs: Tuple[Tuple[int, int], ...]
    tol_ms: float
    fiducial_tol_ms: float

    @property
    def unmatched_detected(self) -> List[int]:
        used = {d for d, _ in self.pairs}
        return [i for i in range(len(self.detected)) if i not in used]

    @property
    def unmatched_reference(self) -> List[int]:
        used = {r for _, r in self.pairs}
        return [j for j in range(len(self.reference)) if j not in used]


def _ratio(num: int, den: int) -> float:
    return num / den if den else 1.0


@dataclass(frozen=True)
class FiducialScore:
    tp: int
    fp: int
    fn: int
    mean_abs_err_ms: float

    @property
    def se(self) -> float:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def ppv(self) -> float:
        return _ratio(self.tp, self.tp + self.fp)

    def to_dict(self) -> dict:
        err = None if math.isnan(self.mean_abs_err_ms) else self.mean_abs_err_ms
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "se": self.se, "ppv": self.ppv, "mean_abs_err_ms": err}


@dataclass(frozen=True)
class EvalReport:
    """R-peak scores plus a per-fiducial breakdown (keys ``r p q s t``)."""

    record_id: str
    per_fiducial: Dict[str, FiducialScore] = field(default_factory=dict)

    @property
    def r(self) -> FiducialScore:
        return self.per_fiducial["r"]

    @property
    def tp(self) -> int:
        return self.r.tp

    @property
    def fp(self) -> int:
        return self.r.fp

    @property
    def fn(self) -> int:
        return self.r.fn

    @property
    def se(self) -> float:
        return self.r.se

    @property
    def ppv(self) -> float:
        return self.r.ppv

    @property
    def mean_abs_err_ms(self) -> float:
        return self.r.mean_abs_err_ms

    def to_dict(self) -> dict:
        out = {"record_id": self.record_id}
        out.update(self.r.to_dict())
        out["per_fiducial"] = {k.upper(): self.per_fiducial[k].to_dict() for k in FIDUCIALS}
        return out


def match_annotations(
    detected: AnnotationSet,
    reference: AnnotationSet,
    tol_ms: float = DEFAULT_TOL_MS,
    fiducial_tol_ms: Optional[float] = None,
) -> Matching:
    """Greedy nearest-first one-to-one matching of R indices within ``tol_ms``.

    Ties in distance go to the earlier reference beat, then the earlier
    detection. ``fiducial_tol_ms`` (default ``tol_ms``) is the tolerance used
    later when scoring P/Q/S/T of matched beats.
    """
    if detected.fs != reference.fs:
        raise ParameterError(f"sampling rates differ: {detected.fs:g} vs {reference.fs:g}")
    if not tol_ms > 0:
        raise ParameterError(f"tol_ms must be positive, got {tol_ms!r}")
    if fiducial_tol_ms is None:
        fiducial_tol_ms = tol_ms
    tol = tol_ms * reference.fs / 1000.0
    det = detected.r_indices
    ref = reference.r_indices
    cands = []
    for j, r in enumerate(ref):
        lo = np.searchsorted(det, r - tol, side="left")
        hi = np.searchsorted(det, r + tol, side="right")
        for i in range(lo, hi):
            cands.append((abs(int(det[i]) - int(r)), j, i))
    cands.sort()
    used_d, used_r, pairs = set(), set(), []
    for _, j, i in cands:
        if i in used_d or j in used_r:
            continue
        used_d.add(i)
        used_r.add(j)
        pairs.append((i, j))
    pairs.sort(key=lambda p: p[1])
    return Matching(detected, reference, tuple(pairs), float(tol_ms), float(fiducial_tol_ms))


def score(matching: Matching) -> EvalReport:
    fs = matching.reference.fs
    ms = 1000.0 / fs
    n_det = len(matching.detected)
    n_ref = len(matching.reference)
    tp = len(matching.pairs)
    r_err = [abs(matching.detected.beats[i].r - matching.reference.beats[j].r) * ms for i, j in matching.pairs]
    per = {"r": FiducialScore(tp, n_det - tp, n_ref - tp, float(np.mean(r_err)) if r_err else math.nan)}

    ftol = matching.fiducial_tol_ms
    for name in FIDUCIALS[1:]:
        ftp = ffp = ffn = 0
        errs = []
        for i, j in matching.pairs:
            d = getattr(matching.detected.beats[i], name)
            r = getattr(matching.reference.beats[j], name)
            if d is None and r is None:
                continue
            if d is None:
                ffn += 1
            elif r is None:
                ffp += 1
            elif abs(d - r) * ms <= ftol:
                ftp += 1
                errs.append(abs(d - r) * ms)
            else:
                ffp += 1
                ffn += 1
        per[name] = FiducialScore(ftp, ffp, ffn, float(np.mean(errs)) if errs else math.nan)
    return EvalReport(matching.reference.record_id or matching.detected.record_id, per)


def evaluate(detected: AnnotationSet, reference: AnnotationSet, tol_ms: float = DEFAULT_TOL_MS, fiducial_tol_ms=None) -> EvalReport:
    return score(match_annotations(detected, reference, tol_ms, fiducial_tol_ms))


def aggregate(reports: Iterable[EvalReport], record_id: str = "TOTAL") -> EvalReport:
    """Pool counts over records; timing errors are TP-weighted means."""
    reports = list(reports)
    per = {}
    for name in FIDUCIALS:
        scores = [rep.per_fiducial[name] for rep in reports]
        tp = sum(s.tp for s in scores)
        weighted = [s.mean_abs_err_ms * s.tp for s in scores if s.tp]
        err = sum(weighted) / tp if tp else math.nan
        per[name] = FiducialScore(tp, sum(s.fp for s in scores), sum(s.fn for s in scores), err)
    return EvalReport(record_id, per)


def _fmt_err(value: float) -> str:
    return "     -" if math.isnan(value) else f"{value:6.2f}"


def format_table(reports: Iterable[EvalReport], fiducial_breakdown: bool = True) -> str:
    """Fixed-order whitespace-delimited table, one block per record."""
    header = f"{'record':<16} {'wave':<4} {'TP':>6} {'FP':>6} {'FN':>6} {'Se':>8} {'PPV':>8} {'err_ms':>6}"
    lines = [header]
    for rep in reports:
        names = FIDUCIALS if fiducial_breakdown else ("r",)
        for name in names:
            s = rep.per_fiducial[name]
            lines.append(
                f"{rep.record_id:<16} {name.upper():<4} {s.tp:>6d} {s.fp:>6d} {s.fn:>6d} "
                f"{s.se:>8.4f} {s.ppv:>8.4f} {_fmt_err(s.mean_abs_err_ms)}"
            )
    return "\n".join(lines)
