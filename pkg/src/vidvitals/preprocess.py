"""Video standardization chain: quality gate, fps normalization, trimming,
spatial downsampling, and label adjustment."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.ndimage import uniform_filter1d

from .clips import (Catalog, ClipRecord, FrameSequence, extract_red,
                    mean_pixel_trace, read_clip, resolve_clip_path, write_clip)

log = logging.getLogger(__name__)

HR_BAND_HZ = (0.7, 3.5)
DEFAULT_SNR_THRESHOLD_DB = 6.0
DETREND_WINDOW_S = 2.0
MIN_GATE_DURATION_S = 10.0


@dataclass(frozen=True)
class QualityVerdict:
    """Outcome of the pulsing-motion check on one clip."""

    passed: bool
    snr_db: float
    peak_hz: float


def detrend(trace: np.ndarray, fps: float, window_s: float = DETREND_WINDOW_S) -> np.ndarray:
    """Subtract a centered moving average (odd window of about window_s seconds)."""
    size = max(3, int(round(window_s * fps)) | 1)
    return trace - uniform_filter1d(trace.astype(np.float64), size=size, mode="nearest")


def quality_gate(seq: FrameSequence,
                 snr_threshold_db: float = DEFAULT_SNR_THRESHOLD_DB) -> QualityVerdict:
    """Check a single-channel clip for a pulsing motion in the heart-rate band.

    The mean pixel trace is detrended, its power spectrum taken, and the peak
    inside 0.7-3.5 Hz compared to the median in-band power. Detrending removes
    the DC component, so the verdict is invariant to constant brightness offsets.
    """
    if seq.channels != 1:
        raise ValueError(f"quality gate expects 1 channel, got {seq.channels}")
    if seq.duration_s < MIN_GATE_DURATION_S:
        raise ValueError(
            f"clip of {seq.duration_s:.1f}s too short for quality gate "
            f"(need >= {MIN_GATE_DURATION_S}s)")
    trace = detrend(mean_pixel_trace(seq), seq.fps)
    power = np.abs(np.fft.rfft(trace)) ** 2
    freqs = np.fft.rfftfreq(trace.shape[0], 1.0 / seq.fps)
    band = (freqs >= HR_BAND_HZ[0]) & (freqs <= HR_BAND_HZ[1])
    band_power = power[band]
    band_freqs = freqs[band]
    peak_idx = int(np.argmax(band_power))
    peak = band_power[peak_idx]
    floor = float(np.median(band_power))
    if peak <= 0 or floor <= 0:
        return QualityVerdict(passed=False, snr_db=float("-inf"), peak_hz=float(band_freqs[peak_idx]))
    snr_db = 10.0 * math.log10(peak / floor)
    return QualityVerdict(passed=snr_db >= snr_threshold_db, snr_db=snr_db,
                          peak_hz=float(band_freqs[peak_idx]))


def normalize_fps(seq: FrameSequence, target_fps: float = 30.0) -> FrameSequence:
    """Bring a 30 or 60 fps sequence to 30 fps; 60 fps keeps even-indexed frames."""
    if target_fps != 30.0:
        raise ValueError(f"only a 30 fps target is supported, got {target_fps}")
    if abs(seq.fps - 30.0) < 1e-6:
        return seq
    if abs(seq.fps - 60.0) < 1e-6:
        return FrameSequence(frames=seq.frames[::2].copy(), fps=30.0)
    raise ValueError(f"unsupported fps {seq.fps}; expected 30 or 60")


def trim_ends(seq: FrameSequence, trim_s: float = 2.0) -> FrameSequence:
    """Drop the first and last floor(trim_s * fps) frames."""
    if seq.duration_s <= 2.0 * trim_s:
        raise ValueError(
            f"clip of {seq.duration_s:.2f}s too short to trim {trim_s}s per end")
    k = int(math.floor(trim_s * seq.fps))
    if k == 0:
        return seq
    return FrameSequence(frames=seq.frames[k:-k].copy(), fps=seq.fps)


def _area_weights(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) matrix of fractional interval overlaps; rows sum to 1."""
    scale = n_in / n_out
    w = np.zeros((n_out, n_in))
    for o in range(n_out):
        lo, hi = o * scale, (o + 1) * scale
        j0, j1 = int(math.floor(lo)), int(math.ceil(hi))
        for j in range(j0, min(j1, n_in)):
            w[o, j] = min(hi, j + 1) - max(lo, j)
    return w / scale


def downsample_spatial(seq: FrameSequence, hw: tuple[int, int] = (32, 32)) -> FrameSequence:
    """Area-averaging resize of every frame to hw, preserving mean brightness."""
    th, tw = hw
    if seq.height < th or seq.width < tw:
        raise ValueError(
            f"input {seq.height}x{seq.width} smaller than target {th}x{tw}")
    wh = _area_weights(seq.height, th)
    ww = _area_weights(seq.width, tw)
    out = np.einsum("oh,nhwc,pw->nopc", wh, seq.frames.astype(np.float64), ww,
                    optimize=True)
    if seq.frames.dtype == np.uint8:
        out = np.floor(out + 0.5).astype(np.uint8)
    else:
        out = out.astype(seq.frames.dtype)
    return FrameSequence(frames=out, fps=seq.fps)


def adjust_label(count: float, t: float) -> float:
    """Per-minute rate from an event count over t seconds: count * 60 / t."""
    if t <= 0:
        raise ValueError(f"duration must be positive, got {t}")
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    return count * 60.0 / t


def preprocess_pipeline(catalog: Catalog, base_dir, out_dir,
                        snr_threshold_db: float = DEFAULT_SNR_THRESHOLD_DB,
                        trim_s: float = 2.0,
                        target_hw: tuple[int, int] = (32, 32),
                        labels: str = "rates") -> tuple[Catalog, list[tuple[str, str]]]:
    """Standardize every cataloged clip and gate it on pulsing quality.

    Per clip: normalize fps, trim both ends, downsample spatially, then run the
    quality gate on the red channel. Failing or erroring clips are kept in the
    output catalog with quality_pass=False; per-clip failures never abort the
    batch and are returned as (clip_id, reason) pairs.

    labels: "rates"  - hr_bpm/rr_brpm already per-minute rates, kept as-is;
            "counts" - fields hold raw event counts over the retained portion,
                       converted to rates against the post-trim duration.
    """
    if labels not in ("rates", "counts"):
        raise ValueError(f"labels must be 'rates' or 'counts', got {labels!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records: list[ClipRecord] = []
    failures: list[tuple[str, str]] = []
    for rec in catalog:
        try:
            seq = read_clip(resolve_clip_path(rec, base_dir))
            seq = normalize_fps(seq)
            seq = trim_ends(seq, trim_s=trim_s)
            seq = downsample_spatial(seq, hw=target_hw)
            verdict = quality_gate(extract_red(seq), snr_threshold_db=snr_threshold_db)
        except Exception as exc:
            log.warning("preprocess failed for %s: %s", rec.clip_id, exc)
            failures.append((rec.clip_id, str(exc)))
            records.append(replace(rec, quality_pass=False, split="unassigned"))
            continue
        rel = f"{rec.clip_id}.fvid"
        write_clip(seq, out_dir / rel)
        duration = seq.n_frames / seq.fps
        if labels == "counts":
            hr = adjust_label(rec.hr_bpm, duration)
            rr = adjust_label(rec.rr_brpm, duration)
        else:
            hr, rr = rec.hr_bpm, rec.rr_brpm
        records.append(ClipRecord(
            clip_id=rec.clip_id, subject_id=rec.subject_id, path=rel,
            fps=seq.fps, n_frames=seq.n_frames, duration_s=duration,
            hr_bpm=hr, rr_brpm=rr, quality_pass=verdict.passed,
            split="unassigned",
        ))
        if not verdict.passed:
            failures.append((rec.clip_id, f"quality gate: snr {verdict.snr_db:.2f} dB"))
    out_catalog = Catalog(records)
    out_catalog.save(out_dir / "catalog.csv")
    return out_catalog, failures
