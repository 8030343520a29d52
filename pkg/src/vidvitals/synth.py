"""Synthetic fingertip-video generator with exactly known heart and breathing rates.

Respiration is coupled into the pulse signal through three mechanisms: baseline
modulation, amplitude modulation, and respiratory frequency modulation of the
heart rate. Generated labels are exact by construction, which makes these clips
the ground-truth oracle for the whole pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .clips import Catalog, ClipRecord, FrameSequence, write_clip

# Pixel-unit signal model constants (8-bit scale).
BASELINE_LEVEL = 150.0     # DC level of the pulse trace
PULSE_AMPLITUDE = 40.0     # peak amplitude of the pulse waveform
VIGNETTE_DEPTH = 12.0      # corner darkening of the fixed radial vignette
GREEN_FACTOR = 0.4         # green carries 0.4x the red signal
BLUE_FACTOR = 0.2          # blue carries 0.2x the red signal

HR_RANGE = (40.0, 180.0)   # truncation bounds for sampled heart rates
RR_RANGE = (6.0, 45.0)     # truncation bounds for sampled breathing rates


@dataclass
class SynthConfig:
    hr_bpm: float = 81.0
    rr_brpm: float = 22.0
    duration_s: float = 30.0
    fps: float = 30.0
    height: int = 64
    width: int = 64
    baseline_mod_depth: float = 0.2
    amplitude_mod_depth: float = 0.2
    rsa_depth: float = 0.05
    noise_sigma: float = 0.0
    brightness_drift: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if not self.hr_bpm / 60.0 < self.fps / 2.0:
            raise ValueError(
                f"hr {self.hr_bpm} bpm at/above Nyquist for fps {self.fps}")
        if not 0 < self.rr_brpm < self.hr_bpm:
            raise ValueError(
                f"need 0 < rr < hr, got rr={self.rr_brpm} hr={self.hr_bpm}")
        if self.duration_s <= 0 or self.fps <= 0:
            raise ValueError("duration_s and fps must be positive")
        if self.height < 1 or self.width < 1:
            raise ValueError("frame dimensions must be >= 1")
        for name in ("baseline_mod_depth", "amplitude_mod_depth", "rsa_depth"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0,1], got {v}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")


def pulse_waveform(phase: np.ndarray) -> np.ndarray:
    """Asymmetric pulse shape: fundamental plus half-amplitude second harmonic."""
    return np.sin(phase) + 0.5 * np.sin(2.0 * phase)


def synth_trace(cfg: SynthConfig) -> np.ndarray:
    """Pulse trace in pixel units, sampled at cfg.fps; deterministic in cfg.seed."""
    cfg.validate()
    n = int(round(cfg.duration_s * cfg.fps))
    t = np.arange(n) / cfg.fps
    f_hr = cfg.hr_bpm / 60.0
    f_rr = cfg.rr_brpm / 60.0
    # phase rate 2*pi*f_hr*(1 + rsa*sin(2*pi*f_rr*t)), integrated in closed form
    phase = 2.0 * np.pi * f_hr * (
        t + cfg.rsa_depth * (1.0 - np.cos(2.0 * np.pi * f_rr * t)) / (2.0 * np.pi * f_rr))
    resp = np.sin(2.0 * np.pi * f_rr * t)
    s = (BASELINE_LEVEL * (1.0 + cfg.baseline_mod_depth * resp)
         + PULSE_AMPLITUDE * (1.0 + cfg.amplitude_mod_depth * resp) * pulse_waveform(phase))
    if cfg.noise_sigma > 0:
        rng = np.random.default_rng(cfg.seed)
        s = s + rng.normal(0.0, cfg.noise_sigma, n)
    return s


def vignette(height: int, width: int) -> np.ndarray:
    """Fixed radial darkening, 0 at the center down to -VIGNETTE_DEPTH at the corners."""
    yy, xx = np.mgrid[0:height, 0:width]
    cy, cx = (height - 1) / 2.0, (width - 1) / 2.0
    denom = cy * cy + cx * cx
    if denom == 0:
        return np.zeros((height, width))
    return -VIGNETTE_DEPTH * ((yy - cy) ** 2 + (xx - cx) ** 2) / denom


def synth_clip(cfg: SynthConfig) -> FrameSequence:
    """Render the trace into an R,G,B clip; red carries the full signal amplitude."""
    s = synth_trace(cfg)
    n = s.shape[0]
    t = np.arange(n) / cfg.fps
    vig = vignette(cfg.height, cfg.width)
    frames = np.empty((n, cfg.height, cfg.width, 3), dtype=np.uint8)
    for ci, factor in enumerate((1.0, GREEN_FACTOR, BLUE_FACTOR)):
        level = factor * s + cfg.brightness_drift * t          # (n,)
        plane = level[:, None, None] + vig[None, :, :]         # (n,h,w)
        frames[:, :, :, ci] = np.floor(np.clip(plane, 0.0, 255.0) + 0.5).astype(np.uint8)
    return FrameSequence(frames=frames, fps=cfg.fps)


def noise_clip(n_frames: int, fps: float, height: int, width: int, seed: int) -> FrameSequence:
    """Pure white-noise R,G,B clip (no pulse); used to exercise the quality gate."""
    rng = np.random.default_rng(seed)
    frames = rng.integers(0, 256, size=(n_frames, height, width, 3), dtype=np.uint8)
    return FrameSequence(frames=frames, fps=fps)


def truncated_normal(rng: np.random.Generator, mean: float, sd: float,
                     lo: float, hi: float) -> float:
    """One truncated-normal draw by rejection; degenerate sd=0 returns the clipped mean."""
    if sd < 0:
        raise ValueError(f"sd must be >= 0, got {sd}")
    if sd == 0:
        return float(min(max(mean, lo), hi))
    for _ in range(10000):
        x = rng.normal(mean, sd)
        if lo <= x <= hi:
            return float(x)
    raise ValueError(f"truncated normal({mean},{sd}) on [{lo},{hi}] failed to sample")


def sample_subject_rates(rng: np.random.Generator, hr_mean: float, hr_sd: float,
                         rr_mean: float, rr_brpm_sd: float) -> tuple[float, float]:
    """Draw one subject's (hr, rr) pair with rr strictly below hr."""
    hr = truncated_normal(rng, hr_mean, hr_sd, *HR_RANGE)
    for _ in range(10000):
        rr = truncated_normal(rng, rr_mean, rr_brpm_sd, *RR_RANGE)
        if rr < hr:
            return hr, rr
    raise ValueError("could not sample rr below hr")


def synth_dataset(out_dir, n_subjects: int, clips_per_subject: float = 1.5,
                  hr_mean: float = 81.0, hr_sd: float = 17.7,
                  rr_mean: float = 22.0, rr_sd: float = 8.3,
                  duration_s: float = 30.0, fps: float = 30.0,
                  height: int = 64, width: int = 64,
                  baseline_mod_depth: float = 0.2, amplitude_mod_depth: float = 0.2,
                  rsa_depth: float = 0.05, noise_sigma: float = 1.0,
                  seed: int = 0) -> Catalog:
    """Write a catalog of synthetic clips with per-subject sampled rates.

    Each subject gets floor(clips_per_subject) clips plus one more with
    probability frac(clips_per_subject); all clips of a subject share its
    exact hr/rr labels.
    """
    if n_subjects < 1:
        raise ValueError(f"n_subjects must be >= 1, got {n_subjects}")
    if clips_per_subject < 1:
        raise ValueError(f"clips_per_subject must be >= 1, got {clips_per_subject}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    base, frac = int(math.floor(clips_per_subject)), clips_per_subject % 1.0
    records = []
    for si in range(n_subjects):
        subject_id = f"s{si:04d}"
        hr, rr = sample_subject_rates(rng, hr_mean, hr_sd, rr_mean, rr_sd)
        n_clips = base + (1 if rng.uniform() < frac else 0)
        for ci in range(n_clips):
            clip_id = f"{subject_id}c{ci}"
            cfg = SynthConfig(
                hr_bpm=hr, rr_brpm=rr, duration_s=duration_s, fps=fps,
                height=height, width=width,
                baseline_mod_depth=baseline_mod_depth,
                amplitude_mod_depth=amplitude_mod_depth,
                rsa_depth=rsa_depth, noise_sigma=noise_sigma,
                brightness_drift=0.0,
                seed=int(rng.integers(0, 2**63 - 1)),
            )
            seq = synth_clip(cfg)
            rel = f"{clip_id}.fvid"
            write_clip(seq, out_dir / rel)
            records.append(ClipRecord(
                clip_id=clip_id, subject_id=subject_id, path=rel,
                fps=fps, n_frames=seq.n_frames, duration_s=seq.n_frames / fps,
                hr_bpm=hr, rr_brpm=rr, quality_pass=False, split="unassigned",
            ))
    catalog = Catalog(records)
    catalog.save(out_dir / "catalog.csv")
    return catalog
