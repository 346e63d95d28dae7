"""Signals, beat annotations and their on-disk formats.

Record files are CSV with a one-line header::

    fs=360,lead=V1
    0.0125
    0.0131
    ...

Multi-channel records put one channel per comma-separated column; the
``lead`` value may then list one name per column separated by ``;``.

Annotation files are JSON::

    {"record_id": "100", "fs": 360,
     "beats": [{"p": 50, "q": 95, "r": 104, "s": 113, "t": 190,
                "t_polarity": "positive"}]}

Absent fiducials are written as explicit ``null``. All indices are 0-based
sample offsets.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import FormatError, ParameterError, ValidationError

__all__ = [
    "REFRACTORY_MS",
    "SampledSignal",
    "BeatAnnotation",
    "AnnotationSet",
    "load_record",
    "write_record",
    "load_annotations",
    "write_annotations",
    "annotations_from_dict",
]

#: Minimum spacing between consecutive R indices in any annotation set.
REFRACTORY_MS = 120.0

_POLARITIES = ("positive", "negative")
_FIDUCIALS = ("p", "q", "r", "s", "t")


@dataclass(frozen=True)
class SampledSignal:
    """Uniformly sampled single-lead voltage trace (millivolts)."""

    samples: np.ndarray
    fs: float
    lead: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1:
            raise ParameterError(f"samples must be one-dimensional, got shape {samples.shape}")
        if samples.size < 1:
            raise ParameterError("signal must contain at least one sample")
        if not np.all(np.isfinite(samples)):
            raise ParameterError("signal contains non-finite samples")
        fs = float(self.fs)
        if not (math.isfinite(fs) and fs > 0):
            raise ParameterError(f"sampling rate must be positive, got {self.fs!r}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "fs", fs)

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.fs

    def ms_to_samples(self, ms: float) -> float:
        return ms * self.fs / 1000.0

    def with_samples(self, samples) -> "SampledSignal":
        """Same rate and lead, new sample values."""
        return SampledSignal(samples, self.fs, self.lead)


@dataclass(frozen=True)
class BeatAnnotation:
    """Fiducial indices of one beat. Only ``r`` is mandatory."""

    r: int
    p: Optional[int] = None
    q: Optional[int] = None
    s: Optional[int] = None
    t: Optional[int] = None
    t_polarity: str = "positive"

    def __post_init__(self):
        for name in _FIDUCIALS:
            value = getattr(self, name)
            if value is None:
                if name == "r":
                    raise ValidationError("beat is missing its r index")
                continue
            if isinstance(value, bool) or int(value) != value:
                raise ValidationError(f"{name} index must be an integer, got {value!r}")
            if value < 0:
                raise ValidationError(f"{name} index must be non-negative, got {value}")
            object.__setattr__(self, name, int(value))
        if self.t_polarity not in _POLARITIES:
            raise ValidationError(f"t_polarity must be one of {_POLARITIES}, got {self.t_polarity!r}")
        present = [getattr(self, n) for n in _FIDUCIALS if getattr(self, n) is not None]
        if any(a >= b for a, b in zip(present, present[1:])):
            raise ValidationError(f"fiducials out of order (need p<q<r<s<t): {self.as_dict()}")

    def as_dict(self) -> dict:
        return {
            "p": self.p,
            "q": self.q,
            "r": self.r,
            "s": self.s,
            "t": self.t,
            "t_polarity": self.t_polarity,
        }


@dataclass(frozen=True)
class AnnotationSet:
    """Ordered beats of one record.

    ``min_spacing_ms`` is the refractory spacing enforced between
    consecutive R indices; it is not serialised.
    """

    record_id: str
    fs: float
    beats: tuple = field(default_factory=tuple)
    min_spacing_ms: float = field(default=REFRACTORY_MS, compare=False, repr=False)

    def __post_init__(self):
        fs = float(self.fs)
        if not (math.isfinite(fs) and fs > 0):
            raise ValidationError(f"fs must be positive, got {self.fs!r}")
        object.__setattr__(self, "fs", fs)
        beats = tuple(self.beats)
        min_gap = self.min_spacing_ms * fs / 1000.0
        for prev, cur in zip(beats, beats[1:]):
            if cur.r <= prev.r:
                raise ValidationError(f"r indices not strictly increasing: {prev.r} then {cur.r}")
            if cur.r - prev.r < min_gap - 1e-9:
                raise ValidationError(
                    f"r indices {prev.r} and {cur.r} closer than {self.min_spacing_ms:g} ms"
                )
        object.__setattr__(self, "beats", beats)

    def __len__(self):
        return len(self.beats)

    @property
    def r_indices(self) -> np.ndarray:
        return np.array([b.r for b in self.beats], dtype=int)

    def as_dict(self) -> dict:
        fs = int(self.fs) if float(self.fs).is_integer() else self.fs
        return {
            "record_id": self.record_id,
            "fs": fs,
            "beats": [b.as_dict() for b in self.beats],
        }


def _parse_header(line: str) -> dict:
    fields = {}
    for item in line.strip().split(","):
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise FormatError(f"header item {item!r} is not key=value", line=1)
        fields[key.strip()] = value.strip()
    if "fs" not in fields:
        raise FormatError("header lacks fs=<Hz>", line=1)
    try:
        fs = float(fields["fs"])
    except ValueError:
        raise FormatError(f"fs value {fields['fs']!r} is not a number", line=1) from None
    if not (math.isfinite(fs) and fs > 0):
        raise FormatError(f"fs must be positive, got {fields['fs']}", line=1)
    fields["fs"] = fs
    return fields


def load_record(path, column: int = 0) -> SampledSignal:
    """Read one channel of a record CSV.

    Raises
    ------
    FileNotFoundError
        If ``path`` does not exist.
    FormatError
        Malformed header or a non-numeric sample; the message carries the
        1-based line number.
    ParameterError
        ``column`` is not present in the file.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError("empty file", line=1)
    header = _parse_header(lines[0])
    if column < 0:
        raise ParameterError(f"column index must be non-negative, got {column}")

    values = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        cells = raw.split(",")
        if column >= len(cells):
            raise ParameterError(f"column {column} not present on line {lineno} ({len(cells)} columns)")
        cell = cells[column].strip()
        try:
            value = float(cell)
        except ValueError:
            raise FormatError(f"non-numeric sample {cell!r}", line=lineno) from None
        if not math.isfinite(value):
            raise FormatError(f"non-finite sample {cell!r}", line=lineno)
        values.append(value)
    if not values:
        raise FormatError("record has no samples", line=2)

    leads = header.get("lead", "").split(";")
    lead = leads[column] if column < len(leads) else leads[0]
    return SampledSignal(np.array(values), header["fs"], lead)


def write_record(signal: SampledSignal, path) -> None:
    """Write a single-channel record CSV; values round-trip exactly."""
    fs = signal.fs
    fs_text = str(int(fs)) if fs.is_integer() else repr(fs)
    lines = [f"fs={fs_text},lead={signal.lead}"]
    lines.extend(repr(float(v)) for v in signal.samples)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _beat_from_dict(obj: dict, index: int) -> BeatAnnotation:
    if not isinstance(obj, dict):
        raise FormatError(f"beat {index} is not an object")
    unknown = set(obj) - set(_FIDUCIALS) - {"t_polarity"}
    if unknown:
        raise FormatError(f"beat {index} has unknown keys {sorted(unknown)}")
    if obj.get("r") is None:
        raise FormatError(f"beat {index} lacks an r index")
    return BeatAnnotation(
        r=obj["r"],
        p=obj.get("p"),
        q=obj.get("q"),
        s=obj.get("s"),
        t=obj.get("t"),
        t_polarity=obj.get("t_polarity", "positive"),
    )


def annotations_from_dict(obj: dict) -> AnnotationSet:
    """Build and validate an :class:`AnnotationSet` from its JSON object."""
    if not isinstance(obj, dict) or "beats" not in obj or "fs" not in obj:
        raise FormatError("annotation JSON needs 'record_id', 'fs' and 'beats'")
    beats = obj["beats"]
    if not isinstance(beats, list):
        raise FormatError("'beats' must be an array")
    return AnnotationSet(
        record_id=str(obj.get("record_id", "")),
        fs=obj["fs"],
        beats=tuple(_beat_from_dict(b, i) for i, b in enumerate(beats)),
    )


def write_annotations(ann: AnnotationSet, path) -> None:
    text = json.dumps(ann.as_dict(), indent=2)
    Path(path).write_text(text + "\n", encoding="utf-8", newline="\n")


def load_annotations(path) -> AnnotationSet:
    """Read an annotation JSON file; ordering violations raise ValidationError."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    return annotations_from_dict(obj)

