"""Scanning-device and calibration-device simulator.

Generates voltage frames from the induction signal chain: the equilibrium
tracer magnetization is sampled over one drive period, differentiated
spectrally (exact for periodic signals), weighted by coil sensitivity and
voxel volume, multiplied per-bin by the receive-chain transfer function and
offset by the device background.  System matrices are acquired column by
column from unit delta samples, published background-free and with the
acquiring device's transfer function divided out, so they are directly
comparable across devices.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .fields import MU0, FieldModel
from .model import (
    AcquisitionParams,
    CalibrationBundle,
    CoilSensitivity,
    FovGrid,
    SENSITIVITY_DEVICE_SPECIFIC,
    SENSITIVITY_HOMOGENEOUS_OFFSITE,
    Spectrum,
    SystemMatrix,
    TracerInfo,
    TransferFunction,
)

__all__ = [
    "Phantom",
    "DevicePreset",
    "make_phantom",
    "simulate_frame",
    "simulate_empty",
    "acquire_system_matrix",
    "preset_1d",
    "preset_2d",
    "spectral_derivative_factors",
]

_VOXEL_BATCH = 128


@dataclass(frozen=True, eq=False)
class Phantom:
    """Tracer concentration map, one row per tracer."""

    concentrations: np.ndarray
    grid: FovGrid

    def __post_init__(self) -> None:
        a = np.asarray(self.concentrations, dtype=np.float64)
        if a.ndim == 1:
            a = a[None, :]
        if a.ndim != 2 or a.shape[1] != self.grid.n_voxels:
            raise ValueError("concentrations must have shape (tracers, n_voxels)")
        if not np.isfinite(a).all() or (a < 0).any():
            raise ValueError("concentrations must be finite and >= 0")
        a = a.copy()
        a.flags.writeable = False
        object.__setattr__(self, "concentrations", a)

    @property
    def n_tracers(self) -> int:
        return self.concentrations.shape[0]


@dataclass(frozen=True, eq=False)
class DevicePreset:
    """One simulated device: protocol, tracers and calibration ground truth.

    ``band`` is the acquisition bandwidth as an inclusive (k_lo, k_hi) bin
    range applied to every channel; rows outside it are never recorded.
    ``background`` holds the as-measured per-bin offsets (transfer function
    embedded); an optional linear drift scales it over time for maintenance
    scenarios.
    """

    device_id: str
    params: AcquisitionParams
    tracers: tuple[TracerInfo, ...]
    transfer_function: TransferFunction
    coil_sensitivity: CoilSensitivity
    background: np.ndarray
    noise_std: float = 0.0
    band: tuple[int, int] | None = None
    background_drift_per_day: float = 0.0
    periods_per_chunk: int = 256

    def __post_init__(self) -> None:
        bg = np.asarray(self.background, dtype=np.complex128).copy()
        if bg.shape != self.params.spectrum_shape():
            raise ValueError("background must have shape (channels, k_full)")
        bg.flags.writeable = False
        object.__setattr__(self, "background", bg)
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.tf_shape != self.params.spectrum_shape():
            raise ValueError("transfer function must have shape (channels, k_full)")
        if self.coil_sensitivity.p.shape != (self.params.num_channels, self.params.grid.n_voxels):
            raise ValueError("coil sensitivity must have shape (channels, n_voxels)")
        if self.band is not None:
            lo, hi = self.band
            if not (0 <= lo <= hi < self.params.k_full):
                raise ValueError("band must lie inside 0..k_full-1")

    @property
    def tf_shape(self) -> tuple[int, int]:
        return self.transfer_function.a.shape

    @property
    def grid(self) -> FovGrid:
        return self.params.grid

    def row_pairs(self) -> tuple[tuple[int, int], ...]:
        """Recorded (channel, bin) rows: the acquisition band, channel-major."""
        lo, hi = self.band if self.band is not None else (1, self.params.k_full - 1)
        return tuple(
            (j, k) for j in range(self.params.num_channels) for k in range(lo, hi + 1)
        )

    def background_at(self, days: float = 0.0) -> np.ndarray:
        return self.background * (1.0 + self.background_drift_per_day * days)

    def field_model(self, tracer_index: int = 0) -> FieldModel:
        return FieldModel(self.params, self.tracers[tracer_index])

    def calibration_bundle(self, n_empty_frames: int = 10, rng: np.random.Generator | None = None,
                           acquired_at: str = "") -> CalibrationBundle:
        """Bundle as a calibration run would record it: the true transfer
        function and coil profile plus an averaged empty measurement."""
        empty = simulate_empty(self, n_empty_frames, rng=rng)
        return CalibrationBundle(
            transfer_function=self.transfer_function,
            coil_sensitivity=self.coil_sensitivity,
            empty_measurement=empty,
            device_id=self.device_id,
            acquired_at=acquired_at,
        )


def spectral_derivative_factors(params: AcquisitionParams) -> np.ndarray:
    """Per-bin d/dt factors 2*pi*i*k/T; the Nyquist bin is zeroed."""
    k = np.arange(params.k_full)
    factors = 2.0j * np.pi * k / params.period
    if params.samples_per_frame % 2 == 0:
        factors[-1] = 0.0
    return factors


def _frame_times(params: AcquisitionParams) -> np.ndarray:
    n = params.samples_per_frame
    return np.arange(n) / params.sample_rate


def _complex_noise(rng: np.random.Generator, shape: tuple[int, ...], std: float,
                   n_even: bool) -> np.ndarray:
    """Per-bin complex Gaussian noise with ``std`` per real component; DC and
    Nyquist imaginary parts are zeroed so the spectrum stays that of a real
    signal."""
    noise = rng.normal(0.0, std, shape) + 1j * rng.normal(0.0, std, shape)
    noise[..., 0] = noise[..., 0].real
    if n_even:
        noise[..., -1] = noise[..., -1].real
    return noise


def _magnetization_signal(device: DevicePreset, phantom: Phantom) -> np.ndarray:
    """Pre-derivative induction signal sum in the time domain, shape
    (channels, samples): -mu0 * V * sum_n p_j(n) * M_j(c_n, r_n, t)."""
    params = device.params
    times = _frame_times(params)
    out = np.zeros((params.num_channels, params.samples_per_frame))
    centers = params.grid.centers()
    volume = params.grid.voxel_volume
    p = device.coil_sensitivity.p
    for ti, tracer in enumerate(device.tracers):
        c = phantom.concentrations[ti]
        nz = np.nonzero(c)[0]
        if nz.size == 0:
            continue
        model = FieldModel(params, tracer)
        for start in range(0, nz.size, _VOXEL_BATCH):
            idx = nz[start : start + _VOXEL_BATCH]
            # (batch, samples, axes)
            m = model.magnetization(c[idx, None], centers[idx, None, :], times[None, :])
            for j in range(params.num_channels):
                out[j] += -MU0 * volume * (p[j, idx, None] * m[..., j]).sum(axis=0)
    return out


def simulate_frame(
    device: DevicePreset,
    phantom: Phantom,
    rng: np.random.Generator | None = None,
    frame_seq: int = 0,
    at_days: float = 0.0,
) -> tuple[np.ndarray, Spectrum]:
    """Measure one frame: returns (raw time samples, spectrum).

    The spectrum is the one-period DFT of the induced voltage with the
    transfer function multiplied in, the background added and, when ``rng``
    is given and the device is noisy, complex Gaussian noise on top.  The raw
    samples are the equivalent real time signal of that spectrum, so both
    representations describe the same measurement.
    """
    params = device.params
    if phantom.grid != params.grid:
        raise ValueError("phantom grid does not match the device grid")
    if phantom.n_tracers != len(device.tracers):
        raise ValueError("phantom must have one tracer row per device tracer")
    signal = _magnetization_signal(device, phantom)
    base = np.fft.rfft(signal, axis=1) * spectral_derivative_factors(params)
    components = base * device.transfer_function.a + device.background_at(at_days)
    if rng is not None and device.noise_std > 0:
        components = components + _complex_noise(
            rng, components.shape, device.noise_std, params.samples_per_frame % 2 == 0
        )
    raw = np.fft.irfft(components, n=params.samples_per_frame, axis=1)
    return raw, Spectrum(components, frame_seq=frame_seq)


def simulate_empty(
    device: DevicePreset,
    n_frames: int = 1,
    rng: np.random.Generator | None = None,
    at_days: float = 0.0,
) -> Spectrum:
    """Average of ``n_frames`` zero-phantom frames (background plus noise)."""
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    params = device.params
    bg = device.background_at(at_days)
    if rng is None or device.noise_std == 0:
        return Spectrum(bg.copy())
    noise = _complex_noise(
        rng,
        (n_frames,) + params.spectrum_shape(),
        device.noise_std,
        params.samples_per_frame % 2 == 0,
    )
    return Spectrum(bg + noise.mean(axis=0))


def acquire_system_matrix(
    device: DevicePreset,
    mode: str,
    tracer_index: int = 0,
    row_pairs: Sequence[tuple[int, int]] | None = None,
    noise_std: float = 0.0,
    rng: np.random.Generator | None = None,
) -> SystemMatrix:
    """Acquire the calibration matrix by scanning a unit delta sample across
    every voxel.

    ``mode`` selects the sensitivity profile: ``"onsite"`` uses the device's
    own profile, ``"offsite-homogeneous"`` the unit profile of a dedicated
    calibration device.  Columns are noise-free by default (``noise_std``
    injects measurement noise for robustness experiments), per unit
    concentration and unit voxel volume, background-free and with the
    device's transfer function already divided out.
    """
    if mode not in ("onsite", "offsite-homogeneous"):
        raise ValueError(f"unknown acquisition mode {mode!r}")
    params = device.params
    pairs = tuple(row_pairs) if row_pairs is not None else device.row_pairs()
    tracer = device.tracers[tracer_index]
    model = FieldModel(params, tracer)
    times = _frame_times(params)
    deriv = spectral_derivative_factors(params)
    centers = params.grid.centers()
    n_vox = params.grid.n_voxels
    if mode == "onsite":
        p = device.coil_sensitivity.p
    else:
        p = np.ones_like(device.coil_sensitivity.p)

    ch_rows: dict[int, np.ndarray] = {}
    for j in range(params.num_channels):
        ch_rows[j] = np.array([i for i, (c, _) in enumerate(pairs) if c == j], dtype=int)
    k_by_ch = {j: np.array([pairs[i][1] for i in ch_rows[j]], dtype=int) for j in ch_rows}

    entries = np.empty((len(pairs), n_vox), dtype=np.complex128)
    for start in range(0, n_vox, _VOXEL_BATCH):
        idx = np.arange(start, min(start + _VOXEL_BATCH, n_vox))
        m = model.magnetization(1.0, centers[idx, None, :], times[None, :])
        for j in range(params.num_channels):
            if ch_rows[j].size == 0:
                continue
            sig = -MU0 * p[j, idx, None] * m[..., j]
            spec = np.fft.rfft(sig, axis=1) * deriv
            entries[np.ix_(ch_rows[j], idx)] = spec[:, k_by_ch[j]].T
    if noise_std > 0:
        if rng is None:
            rng = np.random.default_rng(0)
        entries = entries + rng.normal(0.0, noise_std, entries.shape) + 1j * rng.normal(
            0.0, noise_std, entries.shape
        )
    return SystemMatrix(
        entries=entries,
        row_index=pairs,
        grid=params.grid,
        tracer=tracer,
        params_hash=params.params_hash(),
        sensitivity_kind=SENSITIVITY_HOMOGENEOUS_OFFSITE if mode != "onsite" else SENSITIVITY_DEVICE_SPECIFIC,
        device_id=device.device_id if mode == "onsite" else None,
    )


# -------------------------------------------------------------------- phantoms


def make_phantom(
    grid: FovGrid,
    kind: str,
    voxel: int | tuple[int, ...] | None = None,
    region: Sequence[tuple[int, int]] | None = None,
    n_tracers: int = 1,
    amplitude: float = 1.0,
) -> Phantom:
    """Deterministic test phantoms.

    ``delta`` puts ``amplitude`` in one voxel (flat or per-axis index);
    ``rect`` fills an axis-aligned box given as (start, stop) index pairs per
    axis (default: the central half of each axis); ``two-tracer`` builds the
    interventional scene of a central bolus (tracer row 0) surrounded by a
    disjoint instrument ring (tracer row 1).
    """
    n_vox = grid.n_voxels
    if kind == "delta":
        if voxel is None:
            voxel = 0
        if isinstance(voxel, tuple):
            for axis, (i, n) in enumerate(zip(voxel, grid.shape)):
                if not 0 <= i < n:
                    raise IndexError(f"voxel index {voxel} out of range on axis {axis}")
            flat = int(np.ravel_multi_index(voxel, grid.shape))
        else:
            flat = int(voxel)
            if not 0 <= flat < n_vox:
                raise IndexError(f"voxel index {flat} out of range (grid has {n_vox})")
        c = np.zeros((n_tracers, n_vox))
        c[0, flat] = amplitude
        return Phantom(c, grid)

    if kind == "rect":
        if region is None:
            region = [(n // 4, max(n // 4 + 1, 3 * n // 4)) for n in grid.shape]
        if len(region) != grid.ndim:
            raise ValueError("one (start, stop) pair per axis required")
        vol = np.zeros(grid.shape)
        slices = []
        for axis, ((a, b), n) in enumerate(zip(region, grid.shape)):
            if not (0 <= a < b <= n):
                raise IndexError(f"region {region} out of range on axis {axis}")
            slices.append(slice(a, b))
        vol[tuple(slices)] = amplitude
        c = np.zeros((n_tracers, n_vox))
        c[0] = vol.reshape(-1)
        return Phantom(c, grid)

    if kind == "two-tracer":
        # normalized radial distance from the FOV center in units of the
        # half-extent of the shortest axis
        centers = grid.centers()
        half = min(n * v for n, v in zip(grid.shape, grid.voxel_size)) / 2.0
        dist = np.linalg.norm(centers, axis=1) / half
        bolus = (dist <= 0.30).astype(float) * amplitude
        ring = ((dist >= 0.55) & (dist <= 0.80)).astype(float) * amplitude
        if not bolus.any() or not ring.any():
            raise ValueError("grid too coarse for the two-tracer scene")
        return Phantom(np.stack([bolus, ring]), grid)

    raise ValueError(f"unknown phantom kind {kind!r}")


# --------------------------------------------------------------------- presets


def _synth_transfer_function(channels: int, k_full: int) -> TransferFunction:
    """Smooth band-shaped complex gain, magnitude within [0.5, 1.5]."""
    k = np.arange(k_full)
    a = np.empty((channels, k_full), dtype=np.complex128)
    for j in range(channels):
        mag = 1.0 + 0.5 * np.cos(3.0 * np.pi * k / k_full + 0.7 * j)
        mag = np.clip(mag, 0.5, None)
        phase = -2.0 * np.pi * k * (0.05 + 0.01 * j) / k_full
        a[j] = mag * np.exp(1j * phase)
    return TransferFunction(a)


def _synth_sensitivity(grid: FovGrid, channels: int, inhomogeneity: float = 0.25) -> CoilSensitivity:
    """Smooth strictly positive coil profile, one off-center bump per channel."""
    centers = grid.centers()
    extent = np.array([n * v for n, v in zip(grid.shape, grid.voxel_size)])
    p = np.empty((channels, grid.n_voxels))
    for j in range(channels):
        shift = np.zeros(grid.ndim)
        shift[j % grid.ndim] = 0.2 * extent[j % grid.ndim]
        d2 = ((centers - shift) ** 2).sum(axis=1)
        width2 = (0.6 * extent.max() / 2.0) ** 2
        p[j] = 0.9 + inhomogeneity * np.exp(-d2 / (2.0 * width2))
    return CoilSensitivity(p)


def _synth_background(channels: int, k_full: int, scale: float, n_bins: int, seed: int) -> np.ndarray:
    """Fixed complex offsets concentrated on the lowest bins, 1/sqrt(k) decay."""
    rng = np.random.default_rng(seed)
    bg = np.zeros((channels, k_full), dtype=np.complex128)
    n_bins = min(n_bins, k_full - 2)
    k = np.arange(1, n_bins + 1)
    mags = scale / np.sqrt(k)
    for j in range(channels):
        phases = rng.uniform(0.0, 2.0 * np.pi, n_bins)
        bg[j, 1 : n_bins + 1] = mags * np.exp(1j * phases)
    return bg


#: Tracers used by the built-in presets (bolus agent and instrument coating).
TRACER_BOLUS = TracerInfo("bolus-30nm", core_diameter=30e-9, saturation_magnetization=474e3)
TRACER_COATING = TracerInfo("coating-20nm", core_diameter=20e-9, saturation_magnetization=474e3)


def preset_1d(
    device_id: str = "scanner-1d",
    noise_std: float = 0.0,
    background_scale: float = 2e-3,
    background_drift_per_day: float = 0.0,
    inhomogeneity: float = 0.25,
) -> DevicePreset:
    """Single-axis desk device: 25 kHz drive, 5 MHz sampling, 64 voxels.

    One frame is 200 samples; the acquisition band keeps bins 1..99.
    """
    grid = FovGrid((64,), (12e-3 / 64,))
    params = AcquisitionParams(
        sample_rate=5.0e6,
        period=1.0 / 25_000.0,
        num_channels=1,
        bits_per_sample=32,
        drive_amplitudes=(12e-3,),
        drive_frequencies=(25_000.0,),
        selection_gradient=(2.0,),
        grid=grid,
    )
    return DevicePreset(
        device_id=device_id,
        params=params,
        tracers=(TRACER_BOLUS,),
        transfer_function=_synth_transfer_function(1, params.k_full),
        coil_sensitivity=_synth_sensitivity(grid, 1, inhomogeneity),
        background=_synth_background(1, params.k_full, background_scale, 48, seed=11),
        noise_std=noise_std,
        band=(1, params.k_full - 2),
        background_drift_per_day=background_drift_per_day,
        periods_per_chunk=500,
    )


def preset_2d(
    device_id: str = "scanner-2d",
    noise_std: float = 0.0,
    background_scale: float = 2e-3,
    background_drift_per_day: float = 0.0,
    inhomogeneity: float = 0.25,
    band_top: int = 2500,
) -> DevicePreset:
    """Two-axis Lissajous desk device, frequency ratio 16/17.

    25 MHz sampling over a 652.8 us cycle gives 16320 samples per frame; the
    drive tones sit on bins 16 and 17.  The acquisition band keeps bins
    1..band_top on both channels.
    """
    grid = FovGrid((32, 32), (12e-3 / 32, 12e-3 / 32))
    sample_rate = 25.0e6
    samples = 16320
    params = AcquisitionParams(
        sample_rate=sample_rate,
        period=samples / sample_rate,
        num_channels=2,
        bits_per_sample=32,
        drive_amplitudes=(12e-3, 12e-3),
        drive_frequencies=(sample_rate / 1020.0, sample_rate / 960.0),
        selection_gradient=(2.0, 2.0),
        grid=grid,
    )
    return DevicePreset(
        device_id=device_id,
        params=params,
        tracers=(TRACER_BOLUS, TRACER_COATING),
        transfer_function=_synth_transfer_function(2, params.k_full),
        coil_sensitivity=_synth_sensitivity(grid, 2, inhomogeneity),
        background=_synth_background(2, params.k_full, background_scale, 64, seed=23),
        noise_std=noise_std,
        band=(1, band_top),
        background_drift_per_day=background_drift_per_day,
        periods_per_chunk=1,
    )
