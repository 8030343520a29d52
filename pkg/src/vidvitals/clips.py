"""Frame-sequence data model, FVID clip storage, dataset catalog, channel extraction."""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

FVID_MAGIC = b"FVID"
FVID_VERSION = 1
# little-endian: magic, version u8, n_frames u32, height u32, width u32, channels u32, fps f32
_HEADER = struct.Struct("<4sBIIIIf")

CATALOG_COLUMNS = [
    "clip_id", "subject_id", "path", "fps", "n_frames",
    "duration_s", "hr_bpm", "rr_brpm", "quality_pass", "split",
]

SPLITS = ("train", "test", "unassigned")

# GRAY = 0.21 R + 0.72 G + 0.07 B
GRAY_WEIGHTS = np.array([0.21, 0.72, 0.07])


class ClipFormatError(Exception):
    """Raised when an FVID file is malformed or a sequence cannot be stored."""


class CatalogError(Exception):
    """Raised when a catalog file is malformed or references missing clips."""


@dataclass(frozen=True)
class FrameSequence:
    """Ordered stack of same-sized frames with a frame rate.

    frames is a 4-D array [n_frames, height, width, channels]; uint8 0-255 at
    rest, real-valued 0.0-1.0 once normalized. Treated as immutable.
    """

    frames: np.ndarray
    fps: float

    def __post_init__(self):
        f = self.frames
        if f.ndim != 4:
            raise ValueError(f"frames must be 4-D [n,h,w,c], got ndim={f.ndim}")
        if min(f.shape) < 1:
            raise ValueError(f"all dimensions must be >= 1, got shape {f.shape}")
        if not self.fps > 0:
            raise ValueError(f"fps must be positive, got {self.fps}")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    @property
    def channels(self) -> int:
        return self.frames.shape[3]

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.fps


def write_clip(seq: FrameSequence, path) -> None:
    """Store a sequence in FVID format; read_clip returns it bit-identically."""
    if seq.frames.dtype != np.uint8:
        raise ClipFormatError(f"FVID stores 8-bit pixels, got dtype {seq.frames.dtype}")
    if max(seq.frames.shape) > 0xFFFFFFFF:
        raise ClipFormatError("dimension exceeds 32-bit unsigned range")
    header = _HEADER.pack(FVID_MAGIC, FVID_VERSION, seq.n_frames, seq.height,
                          seq.width, seq.channels, seq.fps)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(seq.frames).tobytes())


def read_clip(path) -> FrameSequence:
    """Load an FVID file written by write_clip."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ClipFormatError(f"{path}: file shorter than FVID header")
    magic, version, n, h, w, c, fps = _HEADER.unpack_from(raw)
    if magic != FVID_MAGIC:
        raise ClipFormatError(f"{path}: bad magic {magic!r}")
    if version != FVID_VERSION:
        raise ClipFormatError(f"{path}: unsupported version {version}")
    expected = n * h * w * c
    payload = raw[_HEADER.size:]
    if len(payload) != expected:
        raise ClipFormatError(
            f"{path}: payload holds {len(payload)} bytes, header declares {expected}")
    frames = np.frombuffer(payload, dtype=np.uint8).reshape(n, h, w, c)
    return FrameSequence(frames=frames, fps=fps)


@dataclass
class ClipRecord:
    """Catalog entry binding a stored clip to its subject, labels, and verdict.

    hr_bpm / rr_brpm are the adjusted per-minute rates; NaN when unlabeled.
    """

    clip_id: str
    subject_id: str
    path: str
    fps: float
    n_frames: int
    duration_s: float
    hr_bpm: float = float("nan")
    rr_brpm: float = float("nan")
    quality_pass: bool = False
    split: str = "unassigned"

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")
        if not np.isnan(self.hr_bpm) and self.hr_bpm <= 0:
            raise ValueError(f"hr_bpm must be positive when labeled, got {self.hr_bpm}")
        if not np.isnan(self.rr_brpm) and self.rr_brpm <= 0:
            raise ValueError(f"rr_brpm must be positive when labeled, got {self.rr_brpm}")
        if abs(self.duration_s - self.n_frames / self.fps) > 1e-6:
            raise ValueError(
                f"duration_s={self.duration_s} inconsistent with "
                f"{self.n_frames} frames at {self.fps} fps")


@dataclass
class Catalog:
    """Ordered collection of clip records with unique clip ids."""

    records: list[ClipRecord] = field(default_factory=list)

    def __post_init__(self):
        ids = [r.clip_id for r in self.records]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise CatalogError(f"duplicate clip ids: {dupes}")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def by_id(self, clip_id: str) -> ClipRecord:
        for r in self.records:
            if r.clip_id == clip_id:
                return r
        raise KeyError(clip_id)

    def subject_ids(self) -> list[str]:
        seen = []
        for r in self.records:
            if r.subject_id not in seen:
                seen.append(r.subject_id)
        return seen

    def passing(self) -> "Catalog":
        return Catalog([replace(r) for r in self.records if r.quality_pass])

    def save(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CATALOG_COLUMNS)
            for r in self.records:
                writer.writerow([
                    r.clip_id, r.subject_id, r.path, repr(r.fps), r.n_frames,
                    repr(r.duration_s), repr(r.hr_bpm), repr(r.rr_brpm),
                    int(r.quality_pass), r.split,
                ])

    @classmethod
    def load(cls, path, check_paths: bool = True) -> "Catalog":
        path = Path(path)
        records = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != CATALOG_COLUMNS:
                raise CatalogError(f"{path}: unexpected header {header}")
            for row in reader:
                if not row:
                    continue
                if len(row) != len(CATALOG_COLUMNS):
                    raise CatalogError(f"{path}: malformed row {row}")
                records.append(ClipRecord(
                    clip_id=row[0], subject_id=row[1], path=row[2],
                    fps=float(row[3]), n_frames=int(row[4]),
                    duration_s=float(row[5]), hr_bpm=float(row[6]),
                    rr_brpm=float(row[7]), quality_pass=bool(int(row[8])),
                    split=row[9],
                ))
        catalog = cls(records)
        if check_paths:
            for r in catalog.records:
                if not resolve_clip_path(r, path.parent).is_file():
                    raise CatalogError(f"{path}: clip file missing for {r.clip_id}: {r.path}")
        return catalog


def resolve_clip_path(record: ClipRecord, base_dir) -> Path:
    """Resolve a record's clip path, treating relative paths as catalog-relative."""
    p = Path(record.path)
    return p if p.is_absolute() else Path(base_dir) / p


def extract_red(seq: FrameSequence) -> FrameSequence:
    """Keep only the red channel of an R,G,B sequence."""
    if seq.channels != 3:
        raise ValueError(f"expected 3 channels (R,G,B), got {seq.channels}")
    return FrameSequence(frames=seq.frames[:, :, :, 0:1].copy(), fps=seq.fps)


def extract_gray(seq: FrameSequence) -> FrameSequence:
    """Convert an R,G,B sequence to grayscale: 0.21 R + 0.72 G + 0.07 B.

    8-bit input rounds half-up to the nearest integer; float input stays exact.
    """
    if seq.channels != 3:
        raise ValueError(f"expected 3 channels (R,G,B), got {seq.channels}")
    gray = seq.frames.astype(np.float64) @ GRAY_WEIGHTS
    if seq.frames.dtype == np.uint8:
        gray = np.floor(gray + 0.5).astype(np.uint8)
    else:
        gray = gray.astype(seq.frames.dtype)
    return FrameSequence(frames=gray[:, :, :, np.newaxis], fps=seq.fps)


def mean_pixel_trace(seq: FrameSequence) -> np.ndarray:
    """Per-frame mean pixel value of a single-channel sequence."""
    if seq.channels != 1:
        raise ValueError(f"expected 1 channel, got {seq.channels}")
    return seq.frames.reshape(seq.n_frames, -1).mean(axis=1)
