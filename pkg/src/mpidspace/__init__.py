"""Desk-scale data space for off-site magnetic particle imaging
reconstruction.

The package covers the whole loop: a scanner/calibration simulator
(``scanner``, ``fields``), the cross-device correction pipeline
(``pipeline``), regularized Kaczmarz reconstruction (``recon``), the
container file format (``container``, ``model``), broker and clearing-house
services (``dataspace``), the streaming connector protocol (``protocol``,
``connector``), maintenance/training analytics (``analytics``) and a CLI
(``cli``) that replays the full scenarios end to end.
"""

from .model import (
    AcquisitionParams,
    CalibrationBundle,
    CalibrationRefs,
    CoilSensitivity,
    FovGrid,
    MeasurementContainer,
    ReconImage,
    Spectrum,
    SystemMatrix,
    TracerInfo,
    TransferFunction,
    ValidationReport,
    compute_stream_rate,
    stream_fits_uplink,
    system_matrix_bytes,
    validate_container,
)
from .container import (
    deserialize_container,
    serialize_container,
)
from .fields import FieldModel, langevin
from .scanner import (
    DevicePreset,
    Phantom,
    acquire_system_matrix,
    make_phantom,
    preset_1d,
    preset_2d,
    simulate_empty,
    simulate_frame,
)
from .pipeline import (
    apply_transfer_function,
    correct_coil_sensitivity,
    estimate_snr,
    prepare_job,
    select_frequencies,
    subtract_background,
)
from .recon import (
    ReconConfig,
    choose_lambda,
    direct_solve_oracle,
    kaczmarz_solve,
    reconstruct_multicolor,
    reconstruct_stream,
)

__version__ = "0.1.0"
