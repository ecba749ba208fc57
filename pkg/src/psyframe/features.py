"""Fixed-layout feature extraction from a preprocessed EEG window.

A feature vector packs, per channel and in canonical channel order:

    band_powers[5]      delta, theta, alpha, beta, gamma (Welch PSD integral)
    stats[3]            mean, variance, skewness (averaged over sub-windows)
    wavelet_energies[5] detail levels D1..D4 then approximation A4

13 slots per channel, 14 channels, 182 entries total. The layout is frozen
under the id "psyframe-feat-v1"; dataset and weights files embed that id and
consumers must refuse mismatches rather than guess.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .signal_core import BANDS, CHANNELS, N_CHANNELS, BandDef, EegWindow

FEATURE_LAYOUT_ID = "psyframe-feat-v1"
N_BAND_SLOTS = len(BANDS)
N_STAT_SLOTS = 3
N_WAVELET_SLOTS = 5
FEATURES_PER_CHANNEL = N_BAND_SLOTS + N_STAT_SLOTS + N_WAVELET_SLOTS
FEATURE_DIM = N_CHANNELS * FEATURES_PER_CHANNEL

DEFAULT_SEG_LEN = 128
DEFAULT_OVERLAP = 0.5
DEFAULT_SUB_WIN_S = 1.0
DEFAULT_DWT_LEVELS = 4

# Daubechies-4 (four vanishing moments, eight taps) orthonormal decomposition
# low-pass; the high-pass is its quadrature mirror. sum(h^2) == 1.
_DB4_LO = np.array(
    [
        0.23037781330885523,
        0.7148465705525415,
        0.6308807679295904,
        -0.02798376941698385,
        -0.18703481171888114,
        0.030841381835986965,
        0.032883011666982945,
        -0.010597401784997278,
    ]
)
_DB4_HI = np.array([(-1.0) ** k * _DB4_LO[len(_DB4_LO) - 1 - k] for k in range(len(_DB4_LO))])


def feature_names() -> list[str]:
    """Slot names in layout order, e.g. 'O1/power_alpha', 'O1/energy_d3'."""
    names = []
    for ch in CHANNELS:
        for band in BANDS:
            names.append(f"{ch}/power_{band.name}")
        names.extend([f"{ch}/mean", f"{ch}/variance", f"{ch}/skewness"])
        for lev in range(1, 5):
            names.append(f"{ch}/energy_d{lev}")
        names.append(f"{ch}/energy_a4")
    return names


@dataclass(frozen=True)
class Spectrum:
    """One-sided Welch PSD per channel, density-scaled (uV^2/Hz)."""

    freqs: np.ndarray
    psd: np.ndarray

    def __post_init__(self) -> None:
        freqs = np.asarray(self.freqs, dtype=np.float64)
        psd = np.asarray(self.psd, dtype=np.float64)
        if freqs.ndim != 1 or psd.ndim != 2 or psd.shape[1] != freqs.shape[0]:
            raise ValueError(f"inconsistent spectrum shapes {freqs.shape} vs {psd.shape}")
        if not np.all(np.diff(freqs) > 0):
            raise ValueError("frequency bins must be strictly increasing")
        if not np.all(np.isfinite(psd)) or np.any(psd < 0):
            raise ValueError("psd values must be finite and non-negative")
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "psd", psd)


def welch_psd(
    w: EegWindow,
    seg_len: int = DEFAULT_SEG_LEN,
    overlap: float = DEFAULT_OVERLAP,
) -> Spectrum:
    """Averaged modified periodogram per channel (Hann taper).

    Density scaling: the integral of the PSD over frequency approximates the
    per-channel signal variance.
    """
    if seg_len > w.n_samples:
        raise ValueError(f"seg_len={seg_len} exceeds window length {w.n_samples}")
    if seg_len < 2:
        raise ValueError(f"seg_len must be at least 2, got {seg_len}")
    if not 0.0 <= overlap < 1.0:
        raise ValueError(f"overlap must be in [0, 1), got {overlap}")
    freqs, psd = sps.welch(
        w.data,
        fs=w.fs,
        window="hann",
        nperseg=seg_len,
        noverlap=int(seg_len * overlap),
        detrend="constant",
        scaling="density",
        axis=-1,
    )
    # Tiny negative values can appear from float cancellation; clamp them.
    return Spectrum(freqs=freqs, psd=np.maximum(psd, 0.0))


def band_power(s: Spectrum, band: BandDef) -> np.ndarray:
    """Trapezoidal integral of the PSD over [band.lo, band.hi) per channel."""
    if band.lo < 0 or band.hi > s.freqs[-1] + 1e-9:
        raise ValueError(f"band [{band.lo}, {band.hi}) outside the spectrum range")
    mask = (s.freqs >= band.lo) & (s.freqs < band.hi)
    if np.count_nonzero(mask) < 2:
        raise ValueError(f"band [{band.lo}, {band.hi}) covers fewer than two frequency bins")
    return np.trapezoid(s.psd[:, mask], s.freqs[mask], axis=-1)


def sample_moments(x: np.ndarray, axis: int = -1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(mean, population variance, skewness) along an axis.

    Skewness is the standardized third central moment and is defined as 0
    where the variance falls below 1e-12.
    """
    x = np.asarray(x, dtype=np.float64)
    mean = x.mean(axis=axis)
    centered = x - np.expand_dims(mean, axis)
    var = (centered**2).mean(axis=axis)
    m3 = (centered**3).mean(axis=axis)
    degenerate = var < 1e-12
    skew = np.where(degenerate, 0.0, m3 / np.where(degenerate, 1.0, var) ** 1.5)
    return mean, var, skew


def sliding_stats(
    w: EegWindow,
    sub_win: float = DEFAULT_SUB_WIN_S,
    overlap: float = DEFAULT_OVERLAP,
) -> np.ndarray:
    """Per-channel (mean, variance, skewness), averaged across sub-windows.

    Returns an (n_channels, 3) array. Sub-windows of sub_win seconds slide
    with the given fractional overlap; each statistic is computed per
    sub-window and then averaged so the output size does not depend on the
    window length.
    """
    sub_len = int(round(sub_win * w.fs))
    if sub_len < 2 or sub_len > w.n_samples:
        raise ValueError(f"sub-window of {sub_win}s invalid for a {w.seconds}s window")
    if not 0.0 <= overlap < 1.0:
        raise ValueError(f"overlap must be in [0, 1), got {overlap}")
    hop = max(1, sub_len - int(round(sub_len * overlap)))
    starts = range(0, w.n_samples - sub_len + 1, hop)
    acc = np.zeros((N_CHANNELS, 3))
    count = 0
    for s0 in starts:
        seg = w.data[:, s0 : s0 + sub_len]
        mean, var, skew = sample_moments(seg, axis=-1)
        acc += np.stack([mean, var, skew], axis=1)
        count += 1
    return acc / count


def _dwt_level(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # One periodized analysis level along the last axis: circular convolution
    # with the orthonormal pair, downsampled by 2. Exactly energy-preserving.
    n = x.shape[-1]
    taps = len(_DB4_LO)
    idx = (2 * np.arange(n // 2)[:, None] + np.arange(taps)[None, :]) % n
    seg = x[..., idx]
    return seg @ _DB4_LO, seg @ _DB4_HI


def dwt_energies(w: EegWindow, levels: int = DEFAULT_DWT_LEVELS) -> np.ndarray:
    """Energy of Daubechies-4 detail levels D1..Dn and approximation An.

    Returns (n_channels, levels + 1) with columns [D1, ..., Dn, An]. Uses
    periodic extension, so the transform is orthogonal and the energies sum
    to the signal energy. At 128 Hz and 4 levels the detail bands are roughly
    D1 32-64 Hz, D2 16-32 Hz, D3 8-16 Hz, D4 4-8 Hz, A4 0-4 Hz.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    n = w.n_samples
    if n % (1 << levels) != 0:
        raise ValueError(f"window length {n} is not divisible by 2^{levels}")
    if n >> (levels - 1) < len(_DB4_LO):
        raise ValueError(f"window length {n} too short for {levels} levels of an 8-tap filter")
    out = np.empty((N_CHANNELS, levels + 1))
    approx = w.data
    for lev in range(levels):
        approx, detail = _dwt_level(approx)
        out[:, lev] = np.sum(detail**2, axis=-1)
    out[:, levels] = np.sum(approx**2, axis=-1)
    return out


def assemble_features(w: EegWindow) -> np.ndarray:
    """Pack the full 182-dim feature vector for one preprocessed window.

    Deterministic: the same window always yields a bit-identical vector.
    """
    spectrum = welch_psd(w)
    bands = np.stack([band_power(spectrum, b) for b in BANDS], axis=1)
    stats = sliding_stats(w)
    wavelets = dwt_energies(w)
    per_channel = np.concatenate([bands, stats, wavelets], axis=1)
    assert per_channel.shape == (N_CHANNELS, FEATURES_PER_CHANNEL)
    return per_channel.reshape(-1)


def band_power_matrix(f: np.ndarray) -> np.ndarray:
    """Slice the (n_channels, 5) band-power block back out of a feature vector."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (FEATURE_DIM,):
        raise ValueError(f"expected a ({FEATURE_DIM},) feature vector, got {f.shape}")
    return f.reshape(N_CHANNELS, FEATURES_PER_CHANNEL)[:, :N_BAND_SLOTS]
