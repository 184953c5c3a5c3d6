"""Waveform front-end: normalization, framing, spectra, MFCC, SpecAugment.

The chain is normalize -> pre-emphasis -> overlapping frames -> Hann
weighting -> zero-padded FFT amplitude spectrum -> triangular mel
filterbank -> log10 -> DCT.  `mfcc` runs the chain from pre-emphasis
onwards; per-utterance normalization is a separate op so callers can
compose or skip it.
"""

import struct
import wave
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, UsageError
from .fft import fft

EPS_AMP = 1e-10   # floor on filterbank energies before log10
EPS_VAR = 1e-12   # floor on per-utterance variance before division

FEATURE_MAGIC = b"FTRX"


@dataclass
class Waveform:
    """Mono audio samples with their sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise UsageError("waveform samples must be 1-D")
        if not np.all(np.isfinite(self.samples)):
            raise DataError("waveform contains non-finite samples")
        if self.sample_rate <= 0:
            raise UsageError(f"sample_rate must be positive, got {self.sample_rate}")


@dataclass(frozen=True)
class FrameSpec:
    """Framing and transform geometry for the short-time analysis."""

    step_samples: int = 160
    window_samples: int = 400
    fft_size: int = 512

    def __post_init__(self):
        if not 0 < self.step_samples <= self.window_samples <= self.fft_size:
            raise UsageError(
                "need 0 < step_samples <= window_samples <= fft_size, got "
                f"{self.step_samples}/{self.window_samples}/{self.fft_size}"
            )
        if self.fft_size & (self.fft_size - 1):
            raise UsageError(f"fft_size must be a power of two, got {self.fft_size}")

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1


@dataclass(frozen=True)
class MaskSpec:
    """SpecAugment mask widths, counts and the draw seed."""

    max_time_mask: int = 0
    max_freq_mask: int = 0
    num_time_masks: int = 1
    num_freq_masks: int = 1
    seed: int = 0

    def __post_init__(self):
        if min(self.max_time_mask, self.max_freq_mask,
               self.num_time_masks, self.num_freq_masks, self.seed) < 0:
            raise UsageError("mask fields must be non-negative")


@dataclass
class FeatureMatrix:
    """T x D feature rows, one row per analysis frame."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise UsageError("feature matrix must be 2-D")
        if self.data.shape[1] < 1:
            raise UsageError("feature matrix needs at least one column")
        if not np.all(np.isfinite(self.data)):
            raise DataError("feature matrix contains non-finite values")

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@dataclass
class MelFilterbank:
    """Triangular filters with equidistant centers on the mel axis.

    The first filter's left edge sits at 0 mel and the last filter's
    right edge at mel(sample_rate/2); adjacent filters overlap 50%.
    """

    weights: np.ndarray
    sample_rate: int
    fft_size: int
    centers_mel: np.ndarray = field(repr=False)

    @property
    def num_filters(self) -> int:
        return self.weights.shape[0]


def normalize_wave(w: Waveform) -> Waveform:
    """Scale an utterance to zero mean and unit variance.

    The variance is floored at EPS_VAR before division, so constant
    input comes back as all zeros rather than NaN.
    """
    x = w.samples
    if x.size == 0:
        return Waveform(x.copy(), w.sample_rate)
    mu = float(np.mean(x))
    var = float(np.mean((x - mu) ** 2))
    return Waveform((x - mu) / np.sqrt(max(var, EPS_VAR)), w.sample_rate)


def pre_emphasize(w: Waveform) -> Waveform:
    """First difference x'[t] = x[t+1] - x[t]; output is one sample shorter."""
    if w.samples.size < 2:
        raise DataError(
            f"pre-emphasis needs at least 2 samples, got {w.samples.size}")
    return Waveform(np.diff(w.samples), w.sample_rate)


def hann_window(n: int, length: int) -> float:
    """Hann weight at 1-indexed position n of an N-point window."""
    if length < 2:
        raise UsageError(f"window length must be >= 2, got {length}")
    if not 1 <= n <= length:
        raise UsageError(f"position {n} outside window of length {length}")
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * (n - 1) / (length - 1))


def _hann_vector(length: int) -> np.ndarray:
    idx = np.arange(length, dtype=np.float64)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * idx / (length - 1))


def amplitude_spectrum(frame: np.ndarray, spec: FrameSpec) -> np.ndarray:
    """One-sided FFT magnitudes of a Hann-weighted, zero-padded frame.

    The Hann window spans the padded fft_size-length vector, so only
    its first window_samples values touch real samples.

    Args:
        frame: raw samples, shape (window_samples,).
        spec: framing geometry; fft_size fixes the transform length.

    Returns:
        Magnitudes for bins 0..fft_size/2, shape (fft_size//2 + 1,).
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape != (spec.window_samples,):
        raise DataError(
            f"frame length {frame.shape} does not match window_samples "
            f"{spec.window_samples}"
        )
    padded = np.zeros(spec.fft_size, dtype=np.float64)
    padded[: spec.window_samples] = frame * _hann_vector(spec.fft_size)[: spec.window_samples]
    return np.abs(fft(padded)[: spec.num_bins])


def hz_to_mel(freq_hz: float) -> float:
    """Map a frequency in Hz onto the mel axis."""
    if freq_hz < 0:
        raise UsageError(f"frequency must be non-negative, got {freq_hz}")
    return 2595.0 * np.log10(1.0 + freq_hz / 700.0)


def mel_filterbank(spec: FrameSpec, sample_rate: int, num_filters: int = 26) -> MelFilterbank:
    """Build triangular mel filters sampled at the FFT bin frequencies."""
    if num_filters < 1:
        raise UsageError(f"num_filters must be >= 1, got {num_filters}")
    if sample_rate <= 0:
        raise UsageError(f"sample_rate must be positive, got {sample_rate}")
    mel_max = hz_to_mel(sample_rate / 2.0)
    spacing = mel_max / (num_filters + 1)
    centers = spacing * np.arange(1, num_filters + 1)
    bin_freqs = np.arange(spec.num_bins) * (sample_rate / spec.fft_size)
    bin_mels = 2595.0 * np.log10(1.0 + bin_freqs / 700.0)
    weights = np.maximum(0.0, 1.0 - np.abs(bin_mels[None, :] - centers[:, None]) / spacing)
    empty = np.where(~(weights > 0).any(axis=1))[0]
    if empty.size:
        raise UsageError(
            f"filter {empty[0]} catches no FFT bin; reduce num_filters "
            f"or raise fft_size"
        )
    return MelFilterbank(weights, sample_rate, spec.fft_size, centers)


def _dct_basis(num_cepstra: int, num_filters: int) -> np.ndarray:
    m = np.arange(num_cepstra)[:, None]
    i = np.arange(num_filters)[None, :]
    return np.cos(np.pi * m * (i + 0.5) / num_filters)


def frame_count(num_samples_after_preemph: int, spec: FrameSpec) -> int:
    """Number of full analysis windows that fit the signal."""
    if num_samples_after_preemph < spec.window_samples:
        return 0
    return (num_samples_after_preemph - spec.window_samples) // spec.step_samples + 1


def mfcc(w: Waveform, spec: FrameSpec, fb: MelFilterbank, num_cepstra: int = 13) -> FeatureMatrix:
    """Mel-frequency cepstra of an utterance, one row per frame.

    Runs pre-emphasis, framing, Hann-weighted amplitude spectra, the
    mel filterbank, log10 with an EPS_AMP floor, and the DCT.  The
    caller decides whether to normalize the waveform first.

    Args:
        w: input waveform; the sample rate must be 16 kHz and match fb.
        spec: framing geometry.
        fb: filterbank built for the same spec and sample rate.
        num_cepstra: DCT outputs kept per frame; at most fb.num_filters.

    Returns:
        FeatureMatrix of shape (T, num_cepstra); T may be 0.
    """
    if w.sample_rate != 16000:
        raise DataError(f"front-end expects 16000 Hz input, got {w.sample_rate}")
    if fb.sample_rate != w.sample_rate or fb.fft_size != spec.fft_size:
        raise UsageError("filterbank geometry does not match the frame spec")
    if num_cepstra < 1 or num_cepstra > fb.num_filters:
        raise UsageError(
            f"num_cepstra must be in 1..{fb.num_filters}, got {num_cepstra}"
        )
    x = pre_emphasize(w).samples
    t_total = frame_count(x.size, spec)
    basis = _dct_basis(num_cepstra, fb.num_filters)
    out = np.empty((t_total, num_cepstra))
    for t in range(t_total):
        start = t * spec.step_samples
        spectrum = amplitude_spectrum(x[start: start + spec.window_samples], spec)
        energies = np.maximum(fb.weights @ spectrum, EPS_AMP)
        out[t] = basis @ np.log10(energies)
    return FeatureMatrix(out)


def spec_augment(features: FeatureMatrix, masks: MaskSpec) -> FeatureMatrix:
    """Zero out random time and frequency bands, seeded by masks.seed.

    Draw order is fixed so runs replay byte-identically: each time mask
    draws width then start, then each frequency mask does the same.
    Widths are uniform on {0..max}, starts uniform over the axis, and
    bands are clipped at the matrix edge.  Empty input is returned as-is.
    """
    data = features.data.copy()
    t_total, dim = data.shape
    if t_total == 0:
        return FeatureMatrix(data)
    rng = np.random.default_rng(masks.seed)
    for _ in range(masks.num_time_masks):
        width = int(rng.integers(0, masks.max_time_mask + 1))
        start = int(rng.integers(0, t_total))
        data[start: min(start + width, t_total), :] = 0.0
    for _ in range(masks.num_freq_masks):
        width = int(rng.integers(0, masks.max_freq_mask + 1))
        start = int(rng.integers(0, dim))
        data[:, start: min(start + width, dim)] = 0.0
    return FeatureMatrix(data)


def read_wav(path: str) -> Waveform:
    """Read a mono 16-bit PCM RIFF/WAVE file into [-1, 1) samples."""
    try:
        with wave.open(path, "rb") as fh:
            channels = fh.getnchannels()
            if channels != 1:
                raise DataError(f"channels: expected mono (1), got {channels}")
            width = fh.getsampwidth()
            if width != 2:
                raise DataError(
                    f"bits per sample: expected 16 (width 2), got width {width}"
                )
            comp = fh.getcomptype()
            if comp != "NONE":
                raise DataError(f"compression: expected PCM (NONE), got {comp}")
            rate = fh.getframerate()
            raw = fh.readframes(fh.getnframes())
    except wave.Error as exc:
        raise DataError(f"not a readable RIFF/WAVE file: {exc}") from exc
    except EOFError as exc:
        raise DataError("truncated RIFF/WAVE file") from exc
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return Waveform(samples, rate)


def write_wav(path: str, w: Waveform) -> None:
    """Write a waveform as mono 16-bit PCM, clipping to the sample range."""
    pcm = np.clip(np.round(w.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(path, "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(w.sample_rate)
        fh.writeframes(pcm.tobytes())


def write_feature_text(path: str, features: FeatureMatrix) -> None:
    """Text form: header line "T D", then T rows of 17-significant-digit reals."""
    data = features.data
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{data.shape[0]} {data.shape[1]}\n")
        for row in data:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def read_feature_text(path: str) -> FeatureMatrix:
    """Parse the text feature format; shape header must match the rows."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise DataError("feature header must be two integers 'T D'")
        try:
            t_total, dim = int(header[0]), int(header[1])
        except ValueError as exc:
            raise DataError(f"bad feature header: {exc}") from exc
        if t_total < 0 or dim < 1:
            raise DataError(f"bad feature shape {t_total} x {dim}")
        rows = []
        for i in range(t_total):
            line = fh.readline()
            if not line:
                raise DataError(f"feature file ends after {i} of {t_total} rows")
            try:
                row = np.array([float(v) for v in line.split()])
            except ValueError as exc:
                raise DataError(f"row {i}: {exc}") from exc
            if row.size != dim:
                raise DataError(f"row {i} has {row.size} values, expected {dim}")
            rows.append(row)
    data = np.vstack(rows) if rows else np.zeros((0, dim))
    return FeatureMatrix(data)


def write_feature_binary(path: str, features: FeatureMatrix) -> None:
    """Binary form: magic FTRX, u32 T, u32 D, then T*D little-endian f64."""
    data = features.data
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<II", data.shape[0], data.shape[1]))
        fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())


def read_feature_binary(path: str) -> FeatureMatrix:
    """Parse the binary feature format, checking magic and payload size."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != FEATURE_MAGIC:
        raise DataError(f"bad magic {blob[:4]!r}, expected {FEATURE_MAGIC!r}")
    if len(blob) < 12:
        raise DataError("binary feature file truncated before shape")
    t_total, dim = struct.unpack("<II", blob[4:12])
    if dim < 1:
        raise DataError(f"bad feature shape {t_total} x {dim}")
    expected = 12 + 8 * t_total * dim
    if len(blob) != expected:
        raise DataError(
            f"payload is {len(blob) - 12} bytes, expected {expected - 12}"
        )
    data = np.frombuffer(blob[12:], dtype="<f8").reshape(t_total, dim)
    return FeatureMatrix(data.copy())


def load_features(path: str) -> FeatureMatrix:
    """Load either feature format, sniffing the binary magic."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == FEATURE_MAGIC:
        return read_feature_binary(path)
    return read_feature_text(path)
