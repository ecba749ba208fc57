"""Deterministic synthetic motor-imagery EEG for the five cockpit classes.

There is no recorded data in this system; every window is generated from a
seed. A window is pink (1/f) background noise on all channels plus a
band-limited oscillation on the channels that the class signature boosts,
scaled so the boosted band carries boost_gain times its background power.
Peak amplitudes stay comfortably below the 100 uV artifact gate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import FEATURE_LAYOUT_ID
from .fileio import read_manifest, write_ndjson
from .signal_core import (
    BAND_BY_NAME,
    CHANNEL_INDEX,
    CHANNELS,
    FS_HZ,
    N_CHANNELS,
    WINDOW_SAMPLES,
    BandDef,
    EegWindow,
)

CLASS_NAMES = (
    "Pull Forward with Both Hands",
    "Left Leg on the Pedal",
    "Push with 2 Hands",
    "Right Leg on the Pedal",
    "Push Upward with Both Hands",
)
N_CLASSES = len(CLASS_NAMES)

SIGNATURE_TABLE_VERSION = 1

# Background noise scale: 1/f-shaped, RMS ~12 uV, typical peaks 36-60 uV.
BACKGROUND_RMS_UV = 12.0

# Stream tags baked into the per-window RNG derivation so class windows and
# pure-noise windows never share a stream even under equal seeds.
_NOISE_STREAM = 255


@dataclass(frozen=True)
class ClassSignature:
    """How one imagery class shows up in the synthetic signal.

    boost_gain multiplies the boosted band's power on the boosted channels;
    snr sets the background RMS relative to an additive white sensor-noise
    floor applied to every channel.
    """

    class_id: int
    band: BandDef
    channels: tuple[str, ...]
    boost_gain: float = 8.0
    snr: float = 5.0

    def __post_init__(self) -> None:
        if not 0 <= self.class_id < N_CLASSES:
            raise ValueError(f"class_id must be 0..{N_CLASSES - 1}, got {self.class_id}")
        if self.boost_gain <= 1.0:
            raise ValueError("boost_gain must exceed 1")
        if self.snr <= 0:
            raise ValueError("snr must be positive")
        unknown = [c for c in self.channels if c not in CHANNEL_INDEX]
        if unknown:
            raise ValueError(f"unknown channels in signature: {unknown}")


# Distinct (band, channel-set) per class: occipital alpha for the both-hand
# pull, sensorimotor beta for pedal/push imagery (contralateral flavor for
# the pedals), frontal theta for the upward push.
DEFAULT_SIGNATURES = (
    ClassSignature(0, BAND_BY_NAME["alpha"], ("O1", "O2")),
    ClassSignature(1, BAND_BY_NAME["beta"], ("FC6", "F4")),
    ClassSignature(2, BAND_BY_NAME["beta"], ("FC5", "FC6")),
    ClassSignature(3, BAND_BY_NAME["beta"], ("FC5", "F3")),
    ClassSignature(4, BAND_BY_NAME["theta"], ("AF3", "AF4")),
)


def _window_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([SIGNATURE_TABLE_VERSION, int(seed), int(stream)])


def _pink_background(rng: np.random.Generator, n_samples: int) -> np.ndarray:
    """1/f-power background, per channel, normalized to BACKGROUND_RMS_UV."""
    white = rng.standard_normal((N_CHANNELS, n_samples))
    spectrum = np.fft.rfft(white, axis=-1)
    freqs = np.fft.rfftfreq(n_samples, d=1.0 / FS_HZ)
    scale = np.empty_like(freqs)
    scale[0] = 0.0  # no DC drift
    nonzero = freqs > 0
    scale[nonzero] = 1.0 / np.sqrt(np.maximum(freqs[nonzero], 1.0))
    shaped = np.fft.irfft(spectrum * scale, n=n_samples, axis=-1)
    rms = shaped.std(axis=-1, keepdims=True)
    return shaped * (BACKGROUND_RMS_UV / rms)


# Ceiling on oscillation power relative to background power; keeps peak
# amplitudes safely under the artifact gate even for wide boosted bands.
_MAX_BOOST_POWER_RATIO = 4.0

# Hard amplitude headroom: a finished window is rescaled (globally, which the
# per-channel z-score later washes out) if its peak would approach the gate.
_PEAK_HEADROOM_UV = 95.0


def _band_component_power(x: np.ndarray, band: BandDef) -> np.ndarray:
    """Mean-square power of the [lo, hi) Fourier component per channel."""
    n = x.shape[-1]
    coef = np.fft.rfft(x, axis=-1)
    freqs = np.fft.rfftfreq(n, d=1.0 / FS_HZ)
    mask = (freqs >= band.lo) & (freqs < band.hi)
    return 2.0 * np.sum(np.abs(coef[..., mask]) ** 2, axis=-1) / (n * n)


def _boost_power_ratio(gain: float, share_own: float, share_med: float) -> float:
    """Oscillation power, as a multiple of channel background power.

    Solves for the boosted channel showing gain times the median channel's
    band power after per-channel variance normalization:
    (share_own + c) / (1 + c) == gain * share_med. Clamped to a ceiling so
    wide bands (whose share makes the exact target unreachable) still get a
    strong, gate-safe boost.
    """
    target = gain * share_med
    if target < 1.0:
        c = (target - share_own) / (1.0 - target)
    else:
        c = _MAX_BOOST_POWER_RATIO
    return float(np.clip(c, 0.0, _MAX_BOOST_POWER_RATIO))


def _band_noise(
    rng: np.random.Generator, n_samples: int, band: BandDef, power: float
) -> np.ndarray:
    """Random-phase oscillation confined to the lower-central band interior.

    The occupied range [lo + w/4, lo + 5w/8) keeps every component away from
    the band edges, so taper leakage and the half-weighted end bins of the
    band's trapezoidal integration cannot bleed a meaningful share of the
    power outside the measured band.
    """
    freqs = np.fft.rfftfreq(n_samples, d=1.0 / FS_HZ)
    width = band.hi - band.lo
    mask = (freqs >= band.lo + width / 4.0) & (freqs < band.lo + 5.0 * width / 8.0)
    spec = np.zeros(freqs.shape, dtype=complex)
    spec[mask] = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, int(mask.sum())))
    x = np.fft.irfft(spec, n=n_samples)
    return x * (np.sqrt(power) / x.std())


def _make_window(
    rng: np.random.Generator,
    signature: ClassSignature | None,
    n_samples: int,
    start_tick: int,
) -> EegWindow:
    data = _pink_background(rng, n_samples)
    snr = signature.snr if signature is not None else DEFAULT_SIGNATURES[0].snr
    sensor_noise = rng.standard_normal((N_CHANNELS, n_samples)) * (BACKGROUND_RMS_UV / snr)
    if signature is not None:
        band = signature.band
        bg_power = BACKGROUND_RMS_UV**2
        shares = _band_component_power(data, band) / bg_power
        share_med = float(np.median(shares))
        for ch in signature.channels:
            row = CHANNEL_INDEX[ch]
            c = _boost_power_ratio(signature.boost_gain, float(shares[row]), share_med)
            data[row] = data[row] + _band_noise(rng, n_samples, band, c * bg_power)
    data = data + sensor_noise
    peak = float(np.abs(data).max())
    if peak > _PEAK_HEADROOM_UV:
        data = data * (_PEAK_HEADROOM_UV / peak)
    return EegWindow(data=data, start_tick=start_tick)


def synth_window(
    class_id: int,
    seed: int,
    signatures: tuple[ClassSignature, ...] = DEFAULT_SIGNATURES,
    start_tick: int = 0,
    n_samples: int = WINDOW_SAMPLES,
) -> EegWindow:
    """Generate one labeled window; bit-identical for a given (class, seed)."""
    if not 0 <= class_id < N_CLASSES:
        raise ValueError(f"class_id must be 0..{N_CLASSES - 1}, got {class_id}")
    rng = _window_rng(seed, class_id)
    return _make_window(rng, signatures[class_id], n_samples, start_tick)


def noise_window(seed: int, start_tick: int = 0, n_samples: int = WINDOW_SAMPLES) -> EegWindow:
    """Background-only window: what the decoder sees with no imagery at all."""
    rng = _window_rng(seed, _NOISE_STREAM)
    return _make_window(rng, None, n_samples, start_tick)


@dataclass(frozen=True)
class Dataset:
    """Windows with labels, balanced within one window per class."""

    windows: tuple[EegWindow, ...]
    labels: tuple[int, ...]
    seed: int
    layout_id: str = FEATURE_LAYOUT_ID

    def __post_init__(self) -> None:
        if len(self.windows) != len(self.labels):
            raise ValueError("windows and labels must have equal length")
        if any(not 0 <= c < N_CLASSES for c in self.labels):
            raise ValueError("labels must be class ids 0..4")
        counts = self.class_counts()
        if counts and max(counts) - min(counts) > 1:
            raise ValueError(f"class counts unbalanced beyond +/-1: {counts}")
        object.__setattr__(self, "windows", tuple(self.windows))
        object.__setattr__(self, "labels", tuple(int(c) for c in self.labels))

    def __len__(self) -> int:
        return len(self.windows)

    def class_counts(self) -> list[int]:
        counts = [0] * N_CLASSES
        for c in self.labels:
            counts[c] += 1
        return counts


def build_dataset(
    n_per_class: int,
    seed: int,
    signatures: tuple[ClassSignature, ...] = DEFAULT_SIGNATURES,
) -> Dataset:
    """5 * n_per_class windows, ordered by (class, index), fully seeded."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    windows: list[EegWindow] = []
    labels: list[int] = []
    for class_id in range(N_CLASSES):
        for i in range(n_per_class):
            windows.append(synth_window(class_id, seed=seed + i, signatures=signatures, start_tick=0))
            labels.append(class_id)
    return Dataset(windows=tuple(windows), labels=tuple(labels), seed=seed)


def split_dataset(d: Dataset, train_fraction: float = 0.8, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Stratified shuffle split; floor(train_fraction * count) per class to train."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    counts = d.class_counts()
    for class_id, count in enumerate(counts):
        if count < 2:
            raise ValueError(f"class {class_id} has {count} sample(s); need >= 2 to stratify")
    rng = np.random.default_rng([seed, len(d)])
    train_idx: list[int] = []
    val_idx: list[int] = []
    labels = np.asarray(d.labels)
    for class_id in range(N_CLASSES):
        idx = np.flatnonzero(labels == class_id)
        perm = rng.permutation(idx)
        k = int(np.floor(train_fraction * len(idx)))
        train_idx.extend(perm[:k].tolist())
        val_idx.extend(perm[k:].tolist())
    def take(ids: list[int]) -> Dataset:
        return Dataset(
            windows=tuple(d.windows[i] for i in ids),
            labels=tuple(d.labels[i] for i in ids),
            seed=d.seed,
            layout_id=d.layout_id,
        )

    return take(train_idx), take(val_idx)


DATASET_FORMAT = "psyframe-dataset"


def save_dataset(path, d: Dataset) -> None:
    """Write manifest + one record per window. Round-trips bit-exactly."""

    def lines():
        yield {
            "type": "manifest",
            "format": DATASET_FORMAT,
            "v": 1,
            "layout_id": d.layout_id,
            "fs": FS_HZ,
            "channels": list(CHANNELS),
            "n_windows": len(d),
            "class_counts": d.class_counts(),
            "seed": d.seed,
        }
        for w, label in zip(d.windows, d.labels):
            yield {
                "type": "window",
                "label": label,
                "start_tick": w.start_tick,
                "samples": w.data.reshape(-1).tolist(),
            }

    write_ndjson(path, lines())


def load_dataset(path) -> Dataset:
    manifest, records = read_manifest(path, DATASET_FORMAT)
    windows: list[EegWindow] = []
    labels: list[int] = []
    for rec in records:
        if rec.get("type") != "window":
            raise ValueError(f"unexpected record type {rec.get('type')!r} in dataset file")
        samples = np.asarray(rec["samples"], dtype=np.float64)
        if samples.size % N_CHANNELS != 0:
            raise ValueError("window sample count is not a multiple of the channel count")
        data = samples.reshape(N_CHANNELS, -1)
        windows.append(EegWindow(data=data, start_tick=int(rec["start_tick"])))
        labels.append(int(rec["label"]))
    if len(windows) != manifest["n_windows"]:
        raise ValueError(
            f"manifest declares {manifest['n_windows']} windows, file holds {len(windows)}"
        )
    return Dataset(
        windows=tuple(windows),
        labels=tuple(labels),
        seed=int(manifest["seed"]),
        layout_id=manifest["layout_id"],
    )
