"""Magnetic fields and equilibrium particle magnetization.

All fields are expressed as flux density in tesla.  The selection gradient is
a diagonal matrix (T/m per axis), the drive field a per-axis sinusoid, and
the particle response follows the equilibrium Langevin model at a fixed body
temperature.  Everything is a pure function of immutable inputs and
broadcasts over arbitrary position/time batches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import AcquisitionParams, TracerInfo

__all__ = [
    "MU0",
    "BOLTZMANN",
    "BODY_TEMPERATURE_K",
    "langevin",
    "particle_moment",
    "langevin_scale",
    "FieldModel",
]

MU0 = 4e-7 * np.pi
BOLTZMANN = 1.380649e-23
#: Simulations run at a fixed body temperature so results are reproducible.
BODY_TEMPERATURE_K = 310.0

# below this argument coth(x) - 1/x loses all precision to cancellation
_SERIES_CUTOFF = 1e-4


def langevin(x):
    """Langevin function ``coth(x) - 1/x``.

    Odd, monotone increasing and bounded in (-1, 1).  For ``|x| < 1e-4`` the
    series ``x/3 - x^3/45`` is used to avoid catastrophic cancellation; the
    truncation error there is below 1e-21.
    """
    arr = np.asarray(x, dtype=np.float64)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    small = np.abs(arr) < _SERIES_CUTOFF
    # avoid division warnings on the branch that is not used
    safe = np.where(small, 1.0, arr)
    result = 1.0 / np.tanh(safe) - 1.0 / safe
    if small.any():
        xs = arr[small]
        result[small] = xs / 3.0 - xs * xs * xs / 45.0
    if scalar:
        return float(result[0])
    return result


def particle_moment(tracer: TracerInfo) -> float:
    """Magnetic moment of one particle core in A*m^2."""
    return tracer.saturation_magnetization * np.pi / 6.0 * tracer.core_diameter**3


def langevin_scale(tracer: TracerInfo, temperature: float = BODY_TEMPERATURE_K) -> float:
    """Saturation scale of the tracer in 1/T.

    The Langevin argument for a field of magnitude ``B`` tesla is
    ``langevin_scale(tracer) * B``; equivalently mu0*m/(kB*T) applied to the
    field in A/m.
    """
    return particle_moment(tracer) / (BOLTZMANN * temperature)


@dataclass(frozen=True)
class FieldModel:
    """Field geometry and particle model for one acquisition protocol.

    The number of drive axes equals the channel count; position vectors have
    one component per axis.
    """

    params: AcquisitionParams
    tracer: TracerInfo
    temperature: float = BODY_TEMPERATURE_K

    def __post_init__(self) -> None:
        g = self.params.selection_gradient
        if len(g) != self.params.num_channels:
            raise ValueError("one gradient entry per drive axis/channel required")
        if len(g) != self.params.grid.ndim:
            raise ValueError("gradient axes must match the grid dimensionality")
        if any(x == 0 for x in g):
            raise ValueError("selection gradient must be invertible (no zero diagonal entries)")

    @property
    def n_axes(self) -> int:
        return self.params.num_channels

    @property
    def scale(self) -> float:
        return langevin_scale(self.tracer, self.temperature)

    def drive_field(self, t) -> np.ndarray:
        """Drive flux density in tesla; output shape ``t.shape + (axes,)``.

        Each axis oscillates as ``amplitude * sin(2*pi*f*t)``, so the field
        vanishes at t=0 and after every whole period.
        """
        t = np.asarray(t, dtype=np.float64)
        amp = np.asarray(self.params.drive_amplitudes)
        freq = np.asarray(self.params.drive_frequencies)
        return amp * np.sin(2.0 * np.pi * freq * t[..., None])

    def total_field(self, r, t) -> np.ndarray:
        """Superposition of selection gradient and drive field at position
        ``r`` (metres, last axis = components) and time ``t`` (broadcastable
        against ``r`` without its last axis)."""
        r = np.asarray(r, dtype=np.float64)
        g = np.asarray(self.params.selection_gradient)
        return g * r + self.drive_field(t)

    def ffp(self, t) -> np.ndarray:
        """Field-free point trajectory: the unique zero of the total field."""
        g = np.asarray(self.params.selection_gradient)
        return -self.drive_field(t) / g

    def magnetization(self, c, r, t) -> np.ndarray:
        """Tracer magnetization in A/m, parallel to the local field.

        ``c`` is a concentration factor (broadcast against positions): the
        magnitude is ``c * saturation_magnetization * L(scale * |B|)`` and
        zero where the field vanishes.  Linear in ``c`` by construction.
        """
        b = self.total_field(r, t)
        mag = np.sqrt(np.einsum("...i,...i->...", b, b))
        amplitude = np.asarray(c) * self.tracer.saturation_magnetization * langevin(self.scale * mag)
        amplitude, mag = np.broadcast_arrays(amplitude, mag)
        # amplitude/|B| is finite everywhere: L(x)/x -> 1/3 as x -> 0
        gain = np.zeros(amplitude.shape)
        np.divide(amplitude, mag, out=gain, where=mag > 0)
        return gain[..., None] * b
