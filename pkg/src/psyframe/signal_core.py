"""EEG window primitives: canonical montage, band table, filtering, normalization.

Everything here is a pure function over immutable values. Windows are
14-channel, 128 Hz blocks of microvolt samples; the channel order below is
canonical for the whole system and must never be permuted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

FS_HZ = 128
DEFAULT_WINDOW_SECONDS = 2
WINDOW_SAMPLES = FS_HZ * DEFAULT_WINDOW_SECONDS

# Canonical 10-20 scalp sites, consumer 14-electrode layout. Row order of
# every window's data matrix follows this tuple exactly.
CHANNELS = (
    "AF3", "F7", "F3", "FC5", "T7", "P7", "O1",
    "O2", "P8", "T8", "FC6", "F4", "F8", "AF4",
)
N_CHANNELS = len(CHANNELS)
CHANNEL_INDEX = {name: i for i, name in enumerate(CHANNELS)}

DEFAULT_AMP_LIMIT_UV = 100.0


@dataclass(frozen=True)
class BandDef:
    """A named frequency band [lo, hi) in Hz."""

    name: str
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ValueError(f"band {self.name!r}: lo must be < hi, got [{self.lo}, {self.hi})")


# Contiguous, non-overlapping tiling of [1, 50] Hz. Gamma stops at 50 Hz
# because the standard band-pass removes everything above it.
BANDS = (
    BandDef("delta", 1.0, 4.0),
    BandDef("theta", 4.0, 8.0),
    BandDef("alpha", 8.0, 12.0),
    BandDef("beta", 12.0, 30.0),
    BandDef("gamma", 30.0, 50.0),
)
BAND_INDEX = {b.name: i for i, b in enumerate(BANDS)}
BAND_BY_NAME = {b.name: b for b in BANDS}


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EegWindow:
    """One block of multi-channel EEG.

    data is a read-only (n_channels, n_samples) float64 matrix in microvolts,
    rows in canonical channel order. n_samples must be a whole number of
    seconds at the 128 Hz rate (2 s / 256 samples in the standard pipeline).
    """

    data: np.ndarray
    start_tick: int = 0
    fs: int = FS_HZ
    channels: tuple[str, ...] = CHANNELS

    def __post_init__(self) -> None:
        if self.fs != FS_HZ:
            raise ValueError(f"sampling rate must be {FS_HZ} Hz, got {self.fs}")
        if self.channels != CHANNELS:
            raise ValueError("channels must be the canonical 14-site tuple in canonical order")
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] != N_CHANNELS:
            raise ValueError(f"data must have shape ({N_CHANNELS}, n_samples), got {data.shape}")
        n = data.shape[1]
        if n <= 0 or n % self.fs != 0:
            raise ValueError(f"n_samples must be a positive multiple of fs={self.fs}, got {n}")
        if not np.all(np.isfinite(data)):
            raise ValueError("window contains non-finite samples")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def seconds(self) -> float:
        return self.data.shape[1] / self.fs


@dataclass(frozen=True)
class FilterSpec:
    """Recursive (IIR) band-pass design as numerator/denominator arrays."""

    lo: float
    hi: float
    fs: float
    order: int
    b: np.ndarray
    a: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "b", _freeze(self.b))
        object.__setattr__(self, "a", _freeze(self.a))

    def poles(self) -> np.ndarray:
        return np.roots(self.a)

    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles()) < 1.0))

    def gain_at(self, freqs) -> np.ndarray:
        """Single-pass magnitude response at the given frequencies in Hz."""
        _, h = sps.freqz(self.b, self.a, worN=np.atleast_1d(np.asarray(freqs, dtype=float)), fs=self.fs)
        return np.abs(h)


def design_bandpass(lo: float, hi: float, fs: float = FS_HZ, order: int = 4) -> FilterSpec:
    """Design a stable Butterworth band-pass between lo and hi Hz.

    order is the Butterworth design order (the resulting recursion has 2*order
    poles). Rejects inverted or out-of-Nyquist edges.
    """
    nyq = fs / 2.0
    if not (0.0 < lo < hi):
        raise ValueError(f"band edges must satisfy 0 < lo < hi, got lo={lo}, hi={hi}")
    if hi >= nyq:
        raise ValueError(f"hi={hi} Hz must be below the Nyquist frequency {nyq} Hz")
    if not (2 <= order <= 8):
        raise ValueError(f"order must be in [2, 8], got {order}")
    b, a = sps.butter(order, [lo, hi], btype="band", fs=fs)
    spec = FilterSpec(lo=lo, hi=hi, fs=fs, order=order, b=b, a=a)
    if not spec.is_stable():
        raise ValueError(f"designed filter ({lo}, {hi}, {fs}, {order}) is unstable")
    return spec


def apply_filter(w: EegWindow, f: FilterSpec) -> EegWindow:
    """Zero-phase filter every channel (forward pass, then reversed pass).

    Edge transients are handled with Gustafsson's initial-condition fit;
    simple reflective padding is far too short for a 1 Hz edge on a 2 s
    window and would swamp low channels with low-frequency artifacts.
    """
    if not f.is_stable():
        raise ValueError("refusing to apply an unstable filter")
    out = sps.filtfilt(f.b, f.a, w.data, axis=-1, method="gust")
    return EegWindow(data=out, start_tick=w.start_tick)


def zscore_normalize(w: EegWindow) -> EegWindow:
    """Per-channel z-score with population standard deviation.

    Channels whose standard deviation falls below 1e-12 (constant rows) map
    to all zeros instead of raising, so degenerate input cannot kill a
    running stream.
    """
    mean = w.data.mean(axis=1, keepdims=True)
    std = w.data.std(axis=1, keepdims=True)
    degenerate = std < 1e-12
    safe = np.where(degenerate, 1.0, std)
    out = (w.data - mean) / safe
    out[degenerate[:, 0], :] = 0.0
    return EegWindow(data=out, start_tick=w.start_tick)


def preprocess(w: EegWindow, f: FilterSpec) -> EegWindow:
    """Standard conditioning step: band-pass then per-channel z-score."""
    return zscore_normalize(apply_filter(w, f))


@dataclass(frozen=True)
class GateResult:
    """Outcome of the amplitude artifact gate."""

    accepted: bool
    reason: str | None = None
    peak_uv: float = 0.0

    def __bool__(self) -> bool:
        return self.accepted


def gate_artifacts(w: EegWindow, amp_limit: float = DEFAULT_AMP_LIMIT_UV) -> GateResult:
    """Reject a window if any sample exceeds amp_limit microvolts in magnitude.

    Deterministic stand-in for component-based artifact removal: windows with
    large excursions (blinks, cable tugs) are dropped rather than repaired.
    """
    if amp_limit <= 0:
        raise ValueError(f"amp_limit must be positive, got {amp_limit}")
    peak = float(np.max(np.abs(w.data)))
    if peak > amp_limit:
        return GateResult(
            accepted=False,
            reason=f"peak amplitude {peak:.1f} uV exceeds limit {amp_limit:.1f} uV",
            peak_uv=peak,
        )
    return GateResult(accepted=True, peak_uv=peak)
