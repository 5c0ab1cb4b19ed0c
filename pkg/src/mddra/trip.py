"""Trip records and the trip CSV format.

The header is fixed::

    frame,hand_state,road_type,face_orientation,illumination,eye_gaze,weather,manoeuvre,surroundings,pedestrians,speed_mph[,label]

Optional metadata precedes the header as ``# key=value`` lines. Speeds are
written with the shortest repr that round-trips exactly.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

from mddra.catalog import (
    CLASS_LABELS,
    PARAMETER_NAMES,
    ParameterCatalog,
    ValidationError,
    canonical_label,
    default_catalog,
)
from mddra.severity import FrameObservation

HEADER: tuple[str, ...] = ("frame",) + PARAMETER_NAMES + ("speed_mph",)
LABEL_COLUMN = "label"
_META_KEYS = ("trip_id", "driver_id", "frame_rate", "seed")


@dataclass
class TripRecord:
    frames: list[FrameObservation]
    trip_id: str = "trip"
    driver_id: str = "driver"
    frame_rate: float = 1.0
    seed: int | None = None
    labels: list[str] | None = None

    def __post_init__(self):
        if not self.frames:
            raise ValidationError("a trip needs at least one frame")
        prev = -1
        for f in self.frames:
            if f.index <= prev:
                raise ValidationError(f"frame indices must be strictly increasing (at {f.index})")
            prev = f.index
        if self.labels is not None and len(self.labels) != len(self.frames):
            raise ValidationError("labels must be parallel to frames")

    def __len__(self) -> int:
        return len(self.frames)


def _format_speed(speed: float) -> str:
    text = repr(float(speed))
    return text[:-2] if text.endswith(".0") else text


def serialize_trip(trip: TripRecord) -> str:
    buf = io.StringIO()
    meta = {"trip_id": trip.trip_id, "driver_id": trip.driver_id, "frame_rate": trip.frame_rate, "seed": trip.seed}
    for key in _META_KEYS:
        if meta[key] is not None:
            value = meta[key]
            if key == "frame_rate":
                value = _format_speed(value)
            buf.write(f"# {key}={value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    header = list(HEADER) + ([LABEL_COLUMN] if trip.labels is not None else [])
    writer.writerow(header)
    for i, f in enumerate(trip.frames):
        row = [str(f.index), *f.actions(), _format_speed(f.speed)]
        if trip.labels is not None:
            row.append(trip.labels[i])
        writer.writerow(row)
    return buf.getvalue()


def parse_trip(text: str, catalog: ParameterCatalog | None = None) -> TripRecord:
    """Parse and validate a trip CSV; errors name the line and column."""
    catalog = catalog or default_catalog()
    lines = text.splitlines()
    meta: dict[str, str] = {}
    start = 0
    while start < len(lines) and lines[start].startswith("#"):
        body = lines[start][1:].strip()
        if "=" in body:
            key, value = body.split("=", 1)
            meta[key.strip()] = value.strip()
        start += 1
    reader = csv.reader(lines[start:])
    try:
        header = next(reader)
    except StopIteration:
        raise ValidationError("empty trip document") from None
    expected = list(HEADER)
    has_label = header == expected + [LABEL_COLUMN]
    if header != expected and not has_label:
        missing = [c for c in expected if c not in header]
        detail = f"missing column(s) {missing}" if missing else f"unexpected header {header}"
        raise ValidationError(f"line {start + 1}: {detail}")
    specs = catalog.parameters
    frames: list[FrameObservation] = []
    labels: list[str] | None = [] if has_label else None
    prev = -1
    for offset, row in enumerate(reader):
        line = start + 2 + offset
        if not row:
            continue
        if len(row) != len(header):
            raise ValidationError(f"line {line}: expected {len(header)} fields, got {len(row)}")
        try:
            index = int(row[0])
        except ValueError:
            raise ValidationError(f"line {line}, column 'frame': not an integer: {row[0]!r}") from None
        if index < 0 or index <= prev:
            raise ValidationError(f"line {line}, column 'frame': index {index} is not strictly increasing")
        prev = index
        actions = []
        for spec, value in zip(specs, row[1:10]):
            label = canonical_label(value)
            if label not in spec.labels:
                raise ValidationError(f"line {line}, column {spec.name!r}: unknown action {value!r}")
            actions.append(label)
        try:
            speed = float(row[10])
        except ValueError:
            raise ValidationError(f"line {line}, column 'speed_mph': not numeric: {row[10]!r}") from None
        if not math.isfinite(speed) or speed < 0:
            raise ValidationError(f"line {line}, column 'speed_mph': must be finite and >= 0")
        frames.append(FrameObservation(index, *actions, speed))
        if labels is not None:
            lab = canonical_label(row[11])
            if lab not in CLASS_LABELS:
                raise ValidationError(f"line {line}, column 'label': unknown class {row[11]!r}")
            labels.append(lab)
    seed = meta.get("seed")
    return TripRecord(
        frames,
        trip_id=meta.get("trip_id", "trip"),
        driver_id=meta.get("driver_id", "driver"),
        frame_rate=float(meta.get("frame_rate", 1.0)),
        seed=int(seed) if seed not in (None, "None") else None,
        labels=labels,
    )


def concat_labels(trips: Sequence[TripRecord]) -> list[str]:
    out: list[str] = []
    for t in trips:
        if t.labels is None:
            raise ValidationError(f"trip {t.trip_id!r} has no label column")
        out.extend(t.labels)
    return out
