"""Content analysis exports: viewpoint spheres and attribute histograms.

Emits plot-ready comma-separated tables plus a small JSON metadata header
per export; no plotting is done here.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attributes import (
    AttributeKind,
    AttributeVector,
    RANGES,
)
from .camera import PlacementMapping, viewpoint_direction

DEFAULT_ROLL_THRESHOLD = 30.0  # degrees of in-plane rotation


@dataclass(frozen=True)
class ViewpointSample:
    """One camera direction on the unit sphere with its roll annotation."""

    direction: tuple[float, float, float]  # unit vector, object -> camera
    in_plane: float  # degrees
    high_roll: bool  # in_plane strictly above the threshold
    group_id: str = ""

    def __post_init__(self):
        norm = float(np.linalg.norm(self.direction))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"direction norm {norm} != 1")


def viewpoint_cloud(
    dist,
    n: int,
    mapping: PlacementMapping = PlacementMapping(),
    seed: int = 0,
    roll_threshold: float = DEFAULT_ROLL_THRESHOLD,
    group_id: str = "",
) -> list[ViewpointSample]:
    """Sample n attribute vectors and convert each to a unit camera
    direction, flagging samples whose in-plane rotation exceeds the
    threshold."""
    if n < 1:
        raise ValueError("n must be >= 1")
    samples = []
    for attrs in dist.sample(n, seed):
        vec = viewpoint_direction(
            attrs.azimuth, attrs.camera_height, attrs.camera_distance, mapping
        )
        samples.append(
            ViewpointSample(
                direction=(float(vec[0]), float(vec[1]), float(vec[2])),
                in_plane=attrs.in_plane_rotation,
                high_roll=attrs.in_plane_rotation > roll_threshold,
                group_id=group_id,
            )
        )
    return samples


@dataclass(frozen=True)
class HistogramTable:
    kind: AttributeKind
    edges: tuple[float, ...]  # bins + 1 edges spanning the kind's range
    counts: tuple[int, ...]

    @property
    def n(self) -> int:
        return sum(self.counts)


def attribute_histogram(
    source,
    kind: AttributeKind,
    bins: int = 10,
) -> HistogramTable:
    """Histogram of one attribute over the kind's full range.

    ``source`` may be an iterable of AttributeVector, an iterable of
    numbers, or a DatasetManifest.
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    records = getattr(source, "records", None)
    if records is not None:
        values = [r.attributes[kind] for r in records]
    else:
        items = list(source)
        if items and isinstance(items[0], AttributeVector):
            values = [a[kind] for a in items]
        else:
            values = [float(v) for v in items]
    lo, hi = RANGES[kind]
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return HistogramTable(
        kind=kind, edges=tuple(map(float, edges)), counts=tuple(map(int, counts))
    )


def _write_meta(path: Path, meta: dict) -> None:
    path.write_text(json.dumps(meta, indent=2, sort_keys=True))


def export_viewpoints(samples: list[ViewpointSample], out_path) -> None:
    """CSV of viewpoint samples plus a `.meta.json` header file."""
    out_path = Path(out_path)
    lines = ["x,y,z,in_plane,high_roll,group_id"]
    for s in samples:
        x, y, z = s.direction
        lines.append(
            f"{x:.12g},{y:.12g},{z:.12g},{s.in_plane:.12g},"
            f"{int(s.high_roll)},{s.group_id}"
        )
    out_path.write_text("\n".join(lines) + "\n")
    _write_meta(
        out_path.with_suffix(out_path.suffix + ".meta.json"),
        {
            "schema": "viewpoint-cloud/1",
            "n": len(samples),
            "roll_threshold_deg": DEFAULT_ROLL_THRESHOLD,
            "columns": ["x", "y", "z", "in_plane", "high_roll", "group_id"],
        },
    )


def export_histogram(table: HistogramTable, out_path) -> None:
    """CSV of one attribute histogram plus a `.meta.json` header file."""
    out_path = Path(out_path)
    lines = ["bin_start,bin_end,count"]
    for i, count in enumerate(table.counts):
        lines.append(f"{table.edges[i]:.12g},{table.edges[i + 1]:.12g},{count}")
    out_path.write_text("\n".join(lines) + "\n")
    _write_meta(
        out_path.with_suffix(out_path.suffix + ".meta.json"),
        {
            "schema": "attribute-histogram/1",
            "attribute": table.kind.value,
            "bins": len(table.counts),
            "n": table.n,
            "columns": ["bin_start", "bin_end", "count"],
        },
    )
