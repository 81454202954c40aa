"""Correction steps that make a measurement reconstructable with an off-site
system matrix.

The fixed order is: background subtraction (the empty measurement is stored
as measured, with the transfer function still embedded), then per-bin
division by the transfer function, then coil-sensitivity correction of the
matrix, then SNR-based row selection.  Each step stamps a flag on its result
and refuses to run twice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .model import (
    CalibrationBundle,
    CoilSensitivity,
    MeasurementContainer,
    SENSITIVITY_DEVICE_SPECIFIC,
    SENSITIVITY_HOMOGENEOUS_OFFSITE,
    Spectrum,
    SystemMatrix,
    TransferFunction,
    validate_container,
)

__all__ = [
    "PipelineError",
    "DoubleCorrectionError",
    "SingularTransferFunctionError",
    "InsufficientDataError",
    "NoRowsSelectedError",
    "IncompatibleCalibrationError",
    "InvalidContainerError",
    "subtract_background",
    "apply_transfer_function",
    "correct_coil_sensitivity",
    "estimate_snr",
    "select_frequencies",
    "spectrum_from_time",
    "PreparedJob",
    "prepare_job",
]


class PipelineError(Exception):
    """Base class for correction pipeline errors."""


class DoubleCorrectionError(PipelineError):
    pass


class SingularTransferFunctionError(PipelineError):
    pass


class InsufficientDataError(PipelineError):
    pass


class NoRowsSelectedError(PipelineError):
    pass


class IncompatibleCalibrationError(PipelineError):
    pass


class InvalidContainerError(PipelineError):
    def __init__(self, report):
        self.report = report
        super().__init__(f"container failed validation: {report.summary()}")


def subtract_background(u: Spectrum, b: Spectrum) -> Spectrum:
    """Element-wise ``u - b``; marks the result background-subtracted."""
    if u.background_subtracted:
        raise DoubleCorrectionError("background already subtracted from this spectrum")
    if u.components.shape != b.components.shape:
        raise PipelineError(
            f"shape mismatch: measurement {u.components.shape} vs empty {b.components.shape}"
        )
    return u.with_components(u.components - b.components, background_subtracted=True)


def apply_transfer_function(
    u: Spectrum, a: TransferFunction, mask: np.ndarray | None = None
) -> Spectrum:
    """Divide the spectrum by the receive-chain gain on the masked bins.

    Bins outside the mask are zeroed.  A zero-magnitude gain inside the mask
    makes the correction singular and raises, naming the offending bin.
    """
    if u.tf_applied:
        raise DoubleCorrectionError("transfer function already applied to this spectrum")
    if u.components.shape != a.a.shape:
        raise PipelineError(
            f"shape mismatch: measurement {u.components.shape} vs transfer function {a.a.shape}"
        )
    if mask is None:
        mask = np.ones(u.components.shape, dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != u.components.shape:
            raise PipelineError("mask shape must match the spectrum")
    bad = mask & (np.abs(a.a) == 0)
    if bad.any():
        ch, k = np.argwhere(bad)[0]
        raise SingularTransferFunctionError(
            f"transfer function has zero magnitude at channel {ch}, bin {k}"
        )
    corrected = np.zeros_like(u.components)
    corrected[mask] = u.components[mask] / a.a[mask]
    return u.with_components(corrected, tf_applied=True)


def correct_coil_sensitivity(
    s: SystemMatrix, p_onsite: CoilSensitivity, device_id: str | None = None
) -> SystemMatrix:
    """Apply an imaging device's coil profile to an off-site matrix.

    Scales entry (row=(j, k), column=n) by ``p_onsite[j, n]`` and marks the
    result device-specific.  Correcting an already device-specific matrix
    would double-apply the profile and raises instead.
    """
    if s.sensitivity_kind != SENSITIVITY_HOMOGENEOUS_OFFSITE:
        raise DoubleCorrectionError(
            "system matrix is already device-specific; refusing to correct twice"
        )
    if p_onsite.p.shape[1] != s.n_voxels:
        raise PipelineError("coil profile voxel count does not match the matrix")
    channels = np.fromiter((c for c, _ in s.row_index), dtype=int, count=s.n_rows)
    if channels.size and channels.max() >= p_onsite.p.shape[0]:
        raise PipelineError("coil profile has fewer channels than the matrix rows use")
    entries = s.entries * p_onsite.p[channels, :]
    return SystemMatrix(
        entries=entries,
        row_index=s.row_index,
        grid=s.grid,
        tracer=s.tracer,
        params_hash=s.params_hash,
        sensitivity_kind=SENSITIVITY_DEVICE_SPECIFIC,
        device_id=device_id,
    )


def estimate_snr(s: SystemMatrix, empties: Sequence[Spectrum]) -> np.ndarray:
    """Per-row SNR: mean matrix magnitude over the noise level of that bin.

    The noise level is the unbiased standard deviation of the empty
    measurements at the row's (channel, bin) across frames.  Rows whose noise
    estimate is zero get SNR inf (nonzero signal) or 0 (dead row), so
    selection still works on noise-free simulations.
    """
    if len(empties) < 2:
        raise InsufficientDataError("need at least 2 empty spectra to estimate noise")
    stack = np.stack([e.components for e in empties])
    ch = np.fromiter((c for c, _ in s.row_index), dtype=int, count=s.n_rows)
    ks = np.fromiter((k for _, k in s.row_index), dtype=int, count=s.n_rows)
    noise = np.std(stack[:, ch, ks], axis=0, ddof=1)
    signal = np.abs(s.entries).mean(axis=1)
    snr = np.empty(s.n_rows)
    zero_noise = noise == 0
    with np.errstate(divide="ignore"):
        snr[~zero_noise] = signal[~zero_noise] / noise[~zero_noise]
    snr[zero_noise] = np.where(signal[zero_noise] > 0, np.inf, 0.0)
    return snr


def select_frequencies(snr: np.ndarray, threshold: float) -> np.ndarray:
    """Boolean row mask of all rows with SNR >= threshold.

    Monotone: a larger threshold always yields a subset.  An empty selection
    makes reconstruction impossible and raises.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    snr = np.asarray(snr, dtype=np.float64)
    if threshold == 0:
        mask = snr > 0
    else:
        mask = snr >= threshold
    if not mask.any():
        raise NoRowsSelectedError(f"no rows reach SNR threshold {threshold}")
    return mask


def spectrum_from_time(raw: np.ndarray, samples_per_frame: int, frame_seq: int = 0,
                       tf_applied: bool = False, background_subtracted: bool = False) -> Spectrum:
    """One-period spectrum of a raw chunk; multiple periods are averaged."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2 or raw.shape[1] % samples_per_frame != 0:
        raise PipelineError("raw chunk length must be a multiple of samples_per_frame")
    periods = raw.reshape(raw.shape[0], -1, samples_per_frame).mean(axis=1)
    return Spectrum(
        np.fft.rfft(periods, axis=1),
        frame_seq=frame_seq,
        tf_applied=tf_applied,
        background_subtracted=background_subtracted,
    )


@dataclass(frozen=True)
class PreparedJob:
    """Shape-consistent reconstruction inputs produced by ``prepare_job``.

    ``system_matrix`` is device-specific and restricted to the selected
    rows; ``correct_frame`` applies the same corrections to any further
    frame of the stream.
    """

    system_matrix: SystemMatrix
    row_mask: np.ndarray
    bundle: CalibrationBundle
    bin_mask: np.ndarray
    frames: tuple[Spectrum, ...]

    def correct_frame(self, u: Spectrum) -> Spectrum:
        if not u.background_subtracted:
            u = subtract_background(u, self.bundle.empty_measurement)
        if not u.tf_applied:
            u = apply_transfer_function(u, self.bundle.transfer_function, self.bin_mask)
        return u

    def masked_values(self, u: Spectrum) -> np.ndarray:
        return self.system_matrix.values_at_rows(u)


def prepare_job(
    c: MeasurementContainer,
    bundle: CalibrationBundle,
    s: SystemMatrix,
    snr_threshold: float = 5.0,
    empties: Sequence[Spectrum] | None = None,
) -> PreparedJob:
    """Run the full correction chain for one job.

    Applies, in order: background subtraction (unless already done), transfer
    function correction (unless already done), coil-sensitivity correction of
    the matrix (unless it is device-specific already), then SNR row
    selection.  ``empties`` supplies the per-frame empty measurements for the
    noise estimate; without at least two, all nonzero rows are kept.
    """
    report = validate_container(c)
    if not report.ok:
        raise InvalidContainerError(report)
    if c.acquisition.params_hash() != s.params_hash:
        raise IncompatibleCalibrationError(
            "measurement acquisition parameters do not match the system matrix"
        )
    if s.sensitivity_kind == SENSITIVITY_HOMOGENEOUS_OFFSITE:
        s = correct_coil_sensitivity(s, bundle.coil_sensitivity, device_id=bundle.device_id)

    if empties is not None and len(empties) >= 2:
        # bring the noise estimate into the matrix's units: the published
        # matrix has the transfer function divided out, so divide the empty
        # frames too (a constant background offset does not change the std)
        corrected_empties = [
            apply_transfer_function(e, bundle.transfer_function)
            if not e.tf_applied
            else e
            for e in empties
        ]
        snr = estimate_snr(s, corrected_empties)
    else:
        snr = np.where(np.abs(s.entries).mean(axis=1) > 0, np.inf, 0.0)
        snr_threshold = 0.0
    row_mask = select_frequencies(snr, snr_threshold)
    s_selected = s.restrict(row_mask)

    bin_mask = np.zeros(c.acquisition.spectrum_shape(), dtype=bool)
    for ch, k in s_selected.row_index:
        bin_mask[ch, k] = True

    job = PreparedJob(
        system_matrix=s_selected,
        row_mask=row_mask,
        bundle=bundle,
        bin_mask=bin_mask,
        frames=(),
    )
    frames = tuple(job.correct_frame(u) for u in c.spectra())
    object.__setattr__(job, "frames", frames)
    return job
