"""File formats: covariance rasters, segmentations, label and map CSVs,
palette renders and JSON manifests."""

from __future__ import annotations

import csv
import json
import struct

import numpy as np

from . import classify as cl
from .errors import FormatError

RASTER_MAGIC = b"PCOV"
RASTER_VERSION = 1
RASTER_HEADER = struct.Struct("<4sBIId")  # 21 bytes
SEG_MAGIC = b"PSEG"
SEG_HEADER = struct.Struct("<4sII")
LABEL_FIELDS = ("region_id", "class_id", "role")
MAP_FIELDS = ("region_id", "class_id", "status")

# index 0 is "no class"; classes k >= 0 use entry k + 1
PALETTE = [
    (0, 0, 0),
    (230, 25, 75),
    (60, 180, 75),
    (255, 225, 25),
    (0, 130, 200),
    (245, 130, 48),
    (145, 30, 180),
    (70, 240, 240),
    (240, 50, 230),
    (210, 245, 60),
    (250, 190, 190),
    (0, 128, 128),
    (170, 110, 40),
]


def write_raster(path, raster):
    h, w = raster.height, raster.width
    with open(path, "wb") as fh:
        fh.write(RASTER_HEADER.pack(RASTER_MAGIC, RASTER_VERSION, w, h, float(raster.looks)))
        fh.write(np.ascontiguousarray(raster.data, dtype="<f8").tobytes())


def read_raster(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < RASTER_HEADER.size:
        raise FormatError("raster file too short")
    magic, version, w, h, looks = RASTER_HEADER.unpack_from(blob)
    if magic != RASTER_MAGIC:
        raise FormatError("not a covariance raster (bad magic)")
    if version != RASTER_VERSION:
        raise FormatError(f"unsupported raster version {version}")
    if len(blob) != RASTER_HEADER.size + 72 * w * h:
        raise FormatError(f"raster length {len(blob)} does not match {w}x{h}")
    data = np.frombuffer(blob, dtype="<f8", offset=RASTER_HEADER.size).reshape(h, w, 9).astype(np.float64)
    if np.any(data[..., :3] < 0):
        raise FormatError("negative diagonal intensity in raster")
    return cl.CovarianceRaster(data, looks)


def write_segmentation(path, seg):
    h, w = seg.labels.shape
    with open(path, "wb") as fh:
        fh.write(SEG_HEADER.pack(SEG_MAGIC, w, h))
        fh.write(np.ascontiguousarray(seg.labels, dtype="<u4").tobytes())


def read_segmentation(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < SEG_HEADER.size:
        raise FormatError("segmentation file too short")
    magic, w, h = SEG_HEADER.unpack_from(blob)
    if magic != SEG_MAGIC:
        raise FormatError("not a segmentation file (bad magic)")
    if len(blob) != SEG_HEADER.size + 4 * w * h:
        raise FormatError(f"segmentation length {len(blob)} does not match {w}x{h}")
    labels = np.frombuffer(blob, dtype="<u4", offset=SEG_HEADER.size).reshape(h, w)
    try:
        return cl.SegmentationMap(labels.astype(np.int64))
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def _check_header(reader, expected, path):
    if tuple(reader.fieldnames or ()) != expected:
        raise FormatError(f"{path}: expected header {','.join(expected)}")


def write_labels(path, data):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(LABEL_FIELDS)
        for e in data.entries:
            out.writerow((e.region_id, e.class_id, e.role))


def read_labels(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader, LABEL_FIELDS, path)
        try:
            entries = [cl.LabelEntry(int(r["region_id"]), int(r["class_id"]), r["role"]) for r in reader]
            return cl.LabeledDataset(entries)
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from exc


def write_map(path, cmap):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(MAP_FIELDS)
        for region, (c, status) in enumerate(zip(cmap.classes.tolist(), cmap.status)):
            out.writerow((region, c, status))


def read_map(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader, MAP_FIELDS, path)
        rows = list(reader)
    ids = [int(r["region_id"]) for r in rows]
    if ids != list(range(len(ids))):
        raise FormatError(f"{path}: region ids must be 0..r-1 in order")
    status = [r["status"] for r in rows]
    if not set(status) <= {cl.STATUS_OK, cl.STATUS_DEGENERATE, cl.STATUS_UNCLASSIFIABLE}:
        raise FormatError(f"{path}: unknown status value")
    return cl.ClassificationMap(np.array([int(r["class_id"]) for r in rows], dtype=np.int64), status)


def render_map(path, cmap, seg):
    """8-bit indexed PNG of the per-pixel classes (needs Pillow)."""
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover - optional dependency
        raise RuntimeError("rendering needs Pillow: pip install polkern[render]") from exc
    idx = cmap.render(seg) + 1
    if idx.max() >= len(PALETTE):
        raise ValueError(f"palette covers {len(PALETTE) - 1} classes")
    img = Image.fromarray(idx.astype(np.uint8), mode="P")
    img.putpalette([v for rgb in PALETTE for v in rgb])
    img.save(path)


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)
