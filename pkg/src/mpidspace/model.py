"""Shared domain types for the reconstruction data space.

Everything here is immutable after construction: instances validate their
invariants in ``__post_init__`` and freeze their numpy arrays, so they can be
shared freely between threads and sessions.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "FovGrid",
    "AcquisitionParams",
    "TracerInfo",
    "Spectrum",
    "TransferFunction",
    "CoilSensitivity",
    "CalibrationRefs",
    "CalibrationBundle",
    "SystemMatrix",
    "ReconImage",
    "MeasurementContainer",
    "ValidationItem",
    "ValidationReport",
    "validate_container",
    "compute_stream_rate",
    "stream_fits_uplink",
    "system_matrix_bytes",
    "acquisition_hash",
    "SENSITIVITY_HOMOGENEOUS_OFFSITE",
    "SENSITIVITY_DEVICE_SPECIFIC",
    "UPLINK_BYTES_PER_SECOND",
]

SENSITIVITY_HOMOGENEOUS_OFFSITE = "homogeneous-offsite"
SENSITIVITY_DEVICE_SPECIFIC = "device-specific"

#: Consumer-grade fibre uplink used as the feasibility bar for live streaming.
UPLINK_BYTES_PER_SECOND = 25_000_000

_INT_TOL = 1e-6


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _is_integer(x: float) -> bool:
    return abs(x - round(x)) <= _INT_TOL * max(1.0, abs(x))


def _all_finite(a: np.ndarray) -> bool:
    return bool(np.isfinite(a).all())


@dataclass(frozen=True)
class FovGrid:
    """Regular voxel grid covering the field of view.

    ``shape`` holds voxel counts per axis, ``voxel_size`` the edge length of
    one voxel per axis in metres.  Voxels are indexed in C order (last axis
    fastest); columns of a system matrix and entries of a phantom follow the
    same raveling.
    """

    shape: tuple[int, ...]
    voxel_size: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        object.__setattr__(self, "voxel_size", tuple(float(v) for v in self.voxel_size))
        if len(self.shape) != len(self.voxel_size):
            raise ValueError("shape and voxel_size must have the same number of axes")
        if not self.shape or any(n < 1 for n in self.shape):
            raise ValueError("all voxel counts must be >= 1")
        if any(not math.isfinite(v) or v <= 0 for v in self.voxel_size):
            raise ValueError("voxel edge lengths must be finite and > 0")

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def n_voxels(self) -> int:
        return int(np.prod(self.shape))

    @property
    def voxel_volume(self) -> float:
        """Product of the voxel edge lengths (m^ndim)."""
        return float(np.prod(self.voxel_size))

    def axis_centers(self, axis: int) -> np.ndarray:
        n = self.shape[axis]
        return (np.arange(n) - (n - 1) / 2.0) * self.voxel_size[axis]

    def centers(self) -> np.ndarray:
        """Voxel center positions, shape (n_voxels, ndim), C-order raveling."""
        axes = [self.axis_centers(i) for i in range(self.ndim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def to_meta(self) -> dict:
        return {"gridSize": list(self.shape), "voxelSize": list(self.voxel_size)}

    @classmethod
    def from_meta(cls, meta: dict) -> "FovGrid":
        return cls(tuple(meta["gridSize"]), tuple(meta["voxelSize"]))


@dataclass(frozen=True)
class AcquisitionParams:
    """Scan protocol: sampling, drive fields, selection gradient and grid.

    The drive trajectory must be periodic with ``period``: every drive
    frequency times the period is an integer, and the period holds a whole
    number of samples, so DFT bins of one frame align with the drive tones.
    """

    sample_rate: float
    period: float
    num_channels: int
    bits_per_sample: int
    drive_amplitudes: tuple[float, ...]
    drive_frequencies: tuple[float, ...]
    selection_gradient: tuple[float, ...]
    grid: FovGrid

    def __post_init__(self) -> None:
        object.__setattr__(self, "drive_amplitudes", tuple(float(x) for x in self.drive_amplitudes))
        object.__setattr__(self, "drive_frequencies", tuple(float(x) for x in self.drive_frequencies))
        object.__setattr__(self, "selection_gradient", tuple(float(x) for x in self.selection_gradient))
        if not (math.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise ValueError("sample_rate must be finite and > 0")
        if not (math.isfinite(self.period) and self.period > 0):
            raise ValueError("period must be finite and > 0")
        if self.num_channels < 1:
            raise ValueError("num_channels must be >= 1")
        if self.bits_per_sample not in (16, 32):
            raise ValueError("bits_per_sample must be 16 or 32")
        if len(self.drive_amplitudes) != self.num_channels:
            raise ValueError("one drive amplitude per channel required")
        if len(self.drive_frequencies) != self.num_channels:
            raise ValueError("one drive frequency per channel required")
        for seq in (self.drive_amplitudes, self.drive_frequencies, self.selection_gradient):
            if any(not math.isfinite(x) for x in seq):
                raise ValueError("all physical quantities must be finite")
        for f in self.drive_frequencies:
            if not _is_integer(f * self.period):
                raise ValueError(f"drive frequency {f} Hz is not periodic over period {self.period} s")
        n = self.sample_rate * self.period
        if not _is_integer(n) or round(n) < 2:
            raise ValueError("sample_rate * period must be an integer >= 2")

    @property
    def samples_per_frame(self) -> int:
        return int(round(self.sample_rate * self.period))

    @property
    def k_full(self) -> int:
        """Number of non-negative DFT bins of one frame."""
        return self.samples_per_frame // 2 + 1

    def spectrum_shape(self) -> tuple[int, int]:
        return (self.num_channels, self.k_full)

    def to_meta(self) -> dict:
        meta = {
            "rxSamplingRate": self.sample_rate,
            "dfCycle": self.period,
            "rxNumChannels": self.num_channels,
            "adcResolution": self.bits_per_sample,
            "dfStrength": list(self.drive_amplitudes),
            "dfFrequency": list(self.drive_frequencies),
            "gradientStrength": list(self.selection_gradient),
        }
        meta.update(self.grid.to_meta())
        return meta

    @classmethod
    def from_meta(cls, meta: dict) -> "AcquisitionParams":
        return cls(
            sample_rate=float(meta["rxSamplingRate"]),
            period=float(meta["dfCycle"]),
            num_channels=int(meta["rxNumChannels"]),
            bits_per_sample=int(meta["adcResolution"]),
            drive_amplitudes=tuple(meta["dfStrength"]),
            drive_frequencies=tuple(meta["dfFrequency"]),
            selection_gradient=tuple(meta["gradientStrength"]),
            grid=FovGrid.from_meta(meta),
        )

    def params_hash(self) -> str:
        return acquisition_hash(self)


def acquisition_hash(params: AcquisitionParams) -> str:
    """SHA-256 digest of the acquisition protocol.

    A system matrix is only valid for measurements taken with the identical
    protocol, so matching is an exact comparison of this digest.
    """
    canonical = json.dumps(params.to_meta(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class TracerInfo:
    """Magnetic nanoparticle tracer description."""

    tracer_id: str
    core_diameter: float
    saturation_magnetization: float
    concentration_unit: str = "mol(Fe)/L"

    def __post_init__(self) -> None:
        if not self.tracer_id:
            raise ValueError("tracer_id must be non-empty")
        if not (math.isfinite(self.core_diameter) and self.core_diameter > 0):
            raise ValueError("core_diameter must be finite and > 0")
        if not (math.isfinite(self.saturation_magnetization) and self.saturation_magnetization > 0):
            raise ValueError("saturation_magnetization must be finite and > 0")

    def to_meta(self) -> dict:
        return {
            "tracerName": self.tracer_id,
            "tracerCoreDiameter": self.core_diameter,
            "tracerSaturationMagnetization": self.saturation_magnetization,
            "tracerConcentrationUnit": self.concentration_unit,
        }

    @classmethod
    def from_meta(cls, meta: dict) -> "TracerInfo":
        return cls(
            tracer_id=meta["tracerName"],
            core_diameter=float(meta["tracerCoreDiameter"]),
            saturation_magnetization=float(meta["tracerSaturationMagnetization"]),
            concentration_unit=meta.get("tracerConcentrationUnit", "mol(Fe)/L"),
        )


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Complex frequency components of one measured frame.

    Shape is (channels, k_full) with k_full = samples_per_frame // 2 + 1
    (only non-negative bins are kept; the time signal is real so the spectrum
    is Hermitian).  The two correction flags record which steps of the
    pipeline have already been applied to these values.
    """

    components: np.ndarray
    frame_seq: int = 0
    tf_applied: bool = False
    background_subtracted: bool = False

    def __post_init__(self) -> None:
        a = np.asarray(self.components, dtype=np.complex128)
        if a.ndim != 2:
            raise ValueError("spectrum components must be 2-D (channels, bins)")
        if not _all_finite(a.view(np.float64)):
            raise ValueError("spectrum entries must be finite")
        if self.frame_seq < 0:
            raise ValueError("frame_seq must be non-negative")
        object.__setattr__(self, "components", _freeze(a))

    @property
    def num_channels(self) -> int:
        return self.components.shape[0]

    @property
    def k_full(self) -> int:
        return self.components.shape[1]

    def with_components(self, components: np.ndarray, **flags) -> "Spectrum":
        kwargs = dict(
            frame_seq=self.frame_seq,
            tf_applied=self.tf_applied,
            background_subtracted=self.background_subtracted,
        )
        kwargs.update(flags)
        return Spectrum(components, **kwargs)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Spectrum):
            return NotImplemented
        return (
            self.frame_seq == other.frame_seq
            and self.tf_applied == other.tf_applied
            and self.background_subtracted == other.background_subtracted
            and self.components.shape == other.components.shape
            and bool(np.array_equal(self.components, other.components))
        )


@dataclass(frozen=True, eq=False)
class TransferFunction:
    """Per-bin complex gain of the receive chain, shape (channels, k_full)."""

    a: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.a, dtype=np.complex128)
        if arr.ndim != 2:
            raise ValueError("transfer function must be 2-D (channels, bins)")
        if not _all_finite(arr.view(np.float64)):
            raise ValueError("transfer function entries must be finite")
        object.__setattr__(self, "a", _freeze(arr))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TransferFunction):
            return NotImplemented
        return bool(np.array_equal(self.a, other.a))


@dataclass(frozen=True, eq=False)
class CoilSensitivity:
    """Effective scalar receive-coil gain per (channel, voxel)."""

    p: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.p, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("coil sensitivity must be 2-D (channels, voxels)")
        if not _all_finite(arr):
            raise ValueError("coil sensitivity entries must be finite")
        object.__setattr__(self, "p", _freeze(arr))

    @property
    def is_homogeneous(self) -> bool:
        return bool(np.all(self.p == self.p[:, :1]))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CoilSensitivity):
            return NotImplemented
        return bool(np.array_equal(self.p, other.p))


@dataclass(frozen=True)
class CalibrationBundle:
    """Device-specific correction inputs: transfer function, coil profile,
    averaged empty measurement."""

    transfer_function: TransferFunction
    coil_sensitivity: CoilSensitivity
    empty_measurement: Spectrum
    device_id: str
    acquired_at: str = ""

    def __post_init__(self) -> None:
        if not self.device_id:
            raise ValueError("device_id must be non-empty")
        tf_shape = self.transfer_function.a.shape
        if tf_shape != self.empty_measurement.components.shape:
            raise ValueError("transfer function and empty measurement shapes differ")
        if self.coil_sensitivity.p.shape[0] != tf_shape[0]:
            raise ValueError("coil sensitivity channel count differs from transfer function")


@dataclass(frozen=True, eq=False)
class SystemMatrix:
    """Calibration matrix: rows are selected (channel, bin) pairs, columns
    voxels.

    Entries are the noise-free spectral response to a unit concentration in
    one voxel, per unit voxel volume, with background subtracted and the
    acquiring device's transfer function divided out, so matrices from
    different devices are directly comparable.  Multiply columns by the voxel
    volume to apply the matrix to a concentration vector.
    """

    entries: np.ndarray
    row_index: tuple[tuple[int, int], ...]
    grid: FovGrid
    tracer: TracerInfo
    params_hash: str
    sensitivity_kind: str
    device_id: str | None = None

    def __post_init__(self) -> None:
        a = np.asarray(self.entries, dtype=np.complex128)
        rows = tuple((int(c), int(k)) for c, k in self.row_index)
        object.__setattr__(self, "row_index", rows)
        if a.ndim != 2:
            raise ValueError("system matrix entries must be 2-D")
        if len(rows) != a.shape[0]:
            raise ValueError("row_index length must equal the row count")
        if len(set(rows)) != len(rows):
            raise ValueError("row_index must not contain duplicate (channel, bin) pairs")
        if a.shape[1] != self.grid.n_voxels:
            raise ValueError("column count must equal the number of grid voxels")
        if self.sensitivity_kind not in (SENSITIVITY_HOMOGENEOUS_OFFSITE, SENSITIVITY_DEVICE_SPECIFIC):
            raise ValueError(f"unknown sensitivity_kind {self.sensitivity_kind!r}")
        object.__setattr__(self, "entries", _freeze(a))

    @property
    def n_rows(self) -> int:
        return self.entries.shape[0]

    @property
    def n_voxels(self) -> int:
        return self.entries.shape[1]

    def restrict(self, row_mask: np.ndarray) -> "SystemMatrix":
        """New matrix keeping only rows where ``row_mask`` is true."""
        mask = np.asarray(row_mask, dtype=bool)
        if mask.shape != (self.n_rows,):
            raise ValueError("row mask length must equal the row count")
        rows = tuple(p for p, keep in zip(self.row_index, mask) if keep)
        return SystemMatrix(
            entries=self.entries[mask],
            row_index=rows,
            grid=self.grid,
            tracer=self.tracer,
            params_hash=self.params_hash,
            sensitivity_kind=self.sensitivity_kind,
            device_id=self.device_id,
        )

    def values_at_rows(self, spectrum: Spectrum) -> np.ndarray:
        """Pick this matrix's (channel, bin) entries out of a spectrum."""
        ch = np.fromiter((c for c, _ in self.row_index), dtype=int, count=self.n_rows)
        ks = np.fromiter((k for _, k in self.row_index), dtype=int, count=self.n_rows)
        return spectrum.components[ch, ks]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SystemMatrix):
            return NotImplemented
        return (
            self.row_index == other.row_index
            and self.grid == other.grid
            and self.tracer == other.tracer
            and self.params_hash == other.params_hash
            and self.sensitivity_kind == other.sensitivity_kind
            and self.device_id == other.device_id
            and bool(np.array_equal(self.entries, other.entries))
        )


@dataclass(frozen=True, eq=False)
class ReconImage:
    """Reconstructed tracer concentrations, one row per tracer channel."""

    concentrations: np.ndarray
    frame_seq: int
    grid: FovGrid | None
    residual_norm: float
    sweeps_used: int = 0

    def __post_init__(self) -> None:
        a = np.asarray(self.concentrations, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("concentrations must be 2-D (tracers, voxels)")
        if not _all_finite(a):
            raise ValueError("concentrations must be finite")
        if self.grid is not None and a.shape[1] != self.grid.n_voxels:
            raise ValueError("concentration length must match the grid")
        if self.residual_norm < 0:
            raise ValueError("residual_norm must be >= 0")
        object.__setattr__(self, "concentrations", _freeze(a))

    @property
    def n_tracers(self) -> int:
        return self.concentrations.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ReconImage):
            return NotImplemented
        return (
            self.frame_seq == other.frame_seq
            and self.grid == other.grid
            and self.residual_norm == other.residual_norm
            and bool(np.array_equal(self.concentrations, other.concentrations))
        )


@dataclass(frozen=True, eq=False)
class CalibrationRefs:
    """Calibration data carried with a measurement: inline arrays and/or a
    reference to a bundle stored with the provider."""

    transfer_function: TransferFunction | None = None
    coil_sensitivity: CoilSensitivity | None = None
    empty_measurement: Spectrum | None = None
    bundle_ref: str | None = None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CalibrationRefs):
            return NotImplemented
        return (
            self.transfer_function == other.transfer_function
            and self.coil_sensitivity == other.coil_sensitivity
            and self.empty_measurement == other.empty_measurement
            and self.bundle_ref == other.bundle_ref
        )


_WIRE_REAL = np.float32
_WIRE_COMPLEX = np.complex64


@dataclass(frozen=True, eq=False)
class MeasurementContainer:
    """The file-exchange object for one measurement.

    Exactly one signal representation is present: raw time samples
    (channels, n*samples_per_frame; n consecutive frames) or a spectrum with
    a per-bin selection mask.  Arrays are coerced to the wire precision
    (float32 / complex64) at construction so that serialization round-trips
    are bit-exact.
    """

    acquisition: AcquisitionParams
    tracers: tuple[TracerInfo, ...]
    subject_alias: str
    time_signal: np.ndarray | None = None
    spectrum: np.ndarray | None = None
    selection_mask: np.ndarray | None = None
    frame_seq: int = 0
    tf_applied: bool = False
    background_subtracted: bool = False
    reuse_consent: bool = False
    calibration: CalibrationRefs = field(default_factory=CalibrationRefs)
    acquired_at: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "tracers", tuple(self.tracers))
        if (self.time_signal is None) == (self.spectrum is None):
            raise ValueError("exactly one of time_signal or spectrum must be present")
        if not self.subject_alias:
            raise ValueError("subject_alias must be non-empty")
        params = self.acquisition
        if self.time_signal is not None:
            raw = np.ascontiguousarray(np.asarray(self.time_signal, dtype=_WIRE_REAL))
            if raw.ndim != 2 or raw.shape[0] != params.num_channels:
                raise ValueError("time signal must have shape (channels, samples)")
            if raw.shape[1] == 0 or raw.shape[1] % params.samples_per_frame != 0:
                raise ValueError("time signal length must be a positive multiple of samples_per_frame")
            object.__setattr__(self, "time_signal", _freeze(raw))
        if self.spectrum is not None:
            spec = np.ascontiguousarray(np.asarray(self.spectrum, dtype=_WIRE_COMPLEX))
            if spec.shape != params.spectrum_shape():
                raise ValueError("spectrum must have shape (channels, k_full)")
            object.__setattr__(self, "spectrum", _freeze(spec))
            mask = self.selection_mask
            if mask is None:
                mask = np.ones(params.spectrum_shape(), dtype=np.uint8)
            mask = np.ascontiguousarray(np.asarray(mask).astype(np.uint8))
            if mask.shape != params.spectrum_shape():
                raise ValueError("selection mask must have shape (channels, k_full)")
            object.__setattr__(self, "selection_mask", _freeze(mask))

    @property
    def n_frames(self) -> int:
        if self.spectrum is not None:
            return 1
        return self.time_signal.shape[1] // self.acquisition.samples_per_frame

    def spectra(self) -> list[Spectrum]:
        """Signal as per-frame spectra (DFT of each raw frame if needed)."""
        if self.spectrum is not None:
            return [
                Spectrum(
                    np.asarray(self.spectrum, dtype=np.complex128),
                    frame_seq=self.frame_seq,
                    tf_applied=self.tf_applied,
                    background_subtracted=self.background_subtracted,
                )
            ]
        spf = self.acquisition.samples_per_frame
        raw = np.asarray(self.time_signal, dtype=np.float64)
        frames = raw.reshape(raw.shape[0], -1, spf)
        out = []
        for i in range(frames.shape[1]):
            out.append(
                Spectrum(
                    np.fft.rfft(frames[:, i, :], axis=-1),
                    frame_seq=self.frame_seq + i,
                    tf_applied=self.tf_applied,
                    background_subtracted=self.background_subtracted,
                )
            )
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MeasurementContainer):
            return NotImplemented
        def arr_eq(a, b):
            if a is None or b is None:
                return a is b
            return a.shape == b.shape and bool(np.array_equal(a, b))
        return (
            self.acquisition == other.acquisition
            and self.tracers == other.tracers
            and self.subject_alias == other.subject_alias
            and self.frame_seq == other.frame_seq
            and self.tf_applied == other.tf_applied
            and self.background_subtracted == other.background_subtracted
            and self.reuse_consent == other.reuse_consent
            and self.acquired_at == other.acquired_at
            and self.calibration == other.calibration
            and arr_eq(self.time_signal, other.time_signal)
            and arr_eq(self.spectrum, other.spectrum)
            and arr_eq(self.selection_mask, other.selection_mask)
        )


@dataclass(frozen=True)
class ValidationItem:
    name: str
    ok: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    items: tuple[ValidationItem, ...]

    @property
    def ok(self) -> bool:
        return all(item.ok for item in self.items)

    def failures(self) -> list[ValidationItem]:
        return [item for item in self.items if not item.ok]

    def summary(self) -> str:
        return "; ".join(
            f"{item.name}: {'ok' if item.ok else 'FAIL'}"
            + (f" ({item.detail})" if item.detail and not item.ok else "")
            for item in self.items
        )


def validate_container(c: MeasurementContainer) -> ValidationReport:
    """Check a container against the minimum information needed for off-site
    reconstruction.

    Six items are checked; calibration items pass when the data is inline,
    referenced via a provider-held bundle, or already applied.  Never raises;
    the caller inspects the report.
    """
    items: list[ValidationItem] = []
    cal = c.calibration
    referenced = cal.bundle_ref is not None and cal.bundle_ref != ""

    has_signal = (c.time_signal is not None) or (c.spectrum is not None)
    items.append(
        ValidationItem("signal", has_signal, "" if has_signal else "voltage signal missing")
    )
    items.append(
        ValidationItem(
            "tracer", len(c.tracers) > 0, "" if c.tracers else "tracer information missing"
        )
    )
    items.append(ValidationItem("field-metadata", True))

    sens_ok = cal.coil_sensitivity is not None or referenced
    items.append(
        ValidationItem(
            "coil-sensitivity",
            sens_ok,
            "" if sens_ok else "coil sensitivity profile missing (inline or referenced)",
        )
    )

    tf_ok = c.tf_applied or cal.transfer_function is not None or referenced
    items.append(
        ValidationItem("transfer-function", tf_ok, "" if tf_ok else "transfer function missing")
    )

    bg_ok = c.background_subtracted or cal.empty_measurement is not None or referenced
    items.append(
        ValidationItem("empty-measurement", bg_ok, "" if bg_ok else "empty measurement missing")
    )

    return ValidationReport(tuple(items))


def compute_stream_rate(sample_rate: float, channels: int, bits: int) -> float:
    """Uncompressed data rate of a live measurement in bytes per second."""
    if sample_rate <= 0 or channels <= 0 or bits <= 0:
        raise ValueError("all stream-rate inputs must be > 0")
    return sample_rate * channels * bits / 8.0


def stream_fits_uplink(rate_bytes_per_s: float, uplink_bytes_per_s: float = UPLINK_BYTES_PER_SECOND) -> bool:
    """True when a measurement stream fits through the given uplink."""
    return rate_bytes_per_s <= uplink_bytes_per_s


def system_matrix_bytes(n_voxels: int, n_rows: int, bytes_per_entry: int = 8) -> int:
    """Memory demand of a dense system matrix (complex64 entries by default)."""
    if n_voxels <= 0 or n_rows <= 0 or bytes_per_entry <= 0:
        raise ValueError("all size inputs must be > 0")
    return n_voxels * n_rows * bytes_per_entry
