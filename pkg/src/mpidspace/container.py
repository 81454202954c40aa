"""Archive container format for every file-mode exchange.

A container is an archive (single-file zip or a plain directory, both
readable) holding ``meta.json`` plus one little-endian binary file per array.
Real arrays are stored as float32, complex arrays as interleaved (re, im)
float32 pairs, boolean masks as uint8, all row-major in the declared shape.
Zip output is deterministic: fixed entry order, fixed timestamps, no
compression, so identical objects serialize to identical bytes.

Four payload kinds share the layout and are told apart by the ``kind`` meta
key: ``measurement``, ``systemMatrix``, ``image`` and ``calibrationBundle``.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

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
)

__all__ = [
    "ContainerError",
    "MalformedContainerError",
    "ShapeMismatchError",
    "UnsupportedSchemaError",
    "serialize_container",
    "deserialize_container",
    "serialize_system_matrix",
    "deserialize_system_matrix",
    "serialize_bundle",
    "deserialize_bundle",
    "ImageSet",
    "serialize_images",
    "deserialize_images",
    "save_archive_bytes",
    "load_archive_bytes",
    "read_kind",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1

_DTYPES = {
    "float32": np.dtype("<f4"),
    "complex64": np.dtype("<c8"),
    "uint8": np.dtype("u1"),
}

# fixed zip timestamp: serialization must be byte-identical across runs
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


class ContainerError(Exception):
    """Base class for container format errors."""


class MalformedContainerError(ContainerError):
    pass


class ShapeMismatchError(ContainerError):
    pass


class UnsupportedSchemaError(ContainerError):
    pass


def _dtype_name(a: np.ndarray) -> str:
    if np.issubdtype(a.dtype, np.complexfloating):
        return "complex64"
    if a.dtype == np.uint8:
        return "uint8"
    return "float32"


def _write_archive(meta: dict, arrays: dict[str, np.ndarray]) -> bytes:
    descriptors = {}
    blobs = []
    for name in sorted(arrays):
        a = arrays[name]
        dname = _dtype_name(a)
        data = np.ascontiguousarray(a.astype(_DTYPES[dname], copy=False))
        fname = f"{name}.bin"
        descriptors[name] = {"file": fname, "dtype": dname, "shape": list(a.shape)}
        blobs.append((fname, data.tobytes()))
    meta = dict(meta)
    meta["arrays"] = descriptors
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_STORED) as zf:
        info = zipfile.ZipInfo("meta.json", date_time=_ZIP_DATE)
        zf.writestr(info, json.dumps(meta, indent=2, sort_keys=True))
        for fname, payload in blobs:
            info = zipfile.ZipInfo(fname, date_time=_ZIP_DATE)
            zf.writestr(info, payload)
    return buf.getvalue()


def _read_zip(data: bytes) -> tuple[dict, dict[str, bytes]]:
    try:
        with zipfile.ZipFile(io.BytesIO(data)) as zf:
            names = zf.namelist()
            if "meta.json" not in names:
                raise MalformedContainerError("archive is missing meta.json")
            meta = json.loads(zf.read("meta.json").decode("utf-8"))
            files = {n: zf.read(n) for n in names if n != "meta.json"}
    except zipfile.BadZipFile as exc:
        raise MalformedContainerError(f"not a container archive: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedContainerError(f"malformed meta.json: {exc}") from exc
    return meta, files


def _read_dir(path: Path) -> tuple[dict, dict[str, bytes]]:
    meta_path = path / "meta.json"
    if not meta_path.is_file():
        raise MalformedContainerError(f"{path} has no meta.json")
    try:
        meta = json.loads(meta_path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedContainerError(f"malformed meta.json: {exc}") from exc
    files = {p.name: p.read_bytes() for p in path.iterdir() if p.name != "meta.json"}
    return meta, files


def _parse_arrays(meta: dict, files: dict[str, bytes]) -> dict[str, np.ndarray]:
    out = {}
    for name, desc in meta.get("arrays", {}).items():
        try:
            fname, dname, shape = desc["file"], desc["dtype"], tuple(desc["shape"])
        except (KeyError, TypeError) as exc:
            raise MalformedContainerError(f"bad array descriptor for {name!r}") from exc
        if dname not in _DTYPES:
            raise MalformedContainerError(f"unknown dtype {dname!r} for array {name!r}")
        if fname not in files:
            raise MalformedContainerError(f"array file {fname!r} missing from archive")
        dt = _DTYPES[dname]
        raw = files[fname]
        expected = int(np.prod(shape)) * dt.itemsize
        if len(raw) != expected:
            raise ShapeMismatchError(
                f"array {name!r}: declared shape {shape} needs {expected} bytes, file has {len(raw)}"
            )
        out[name] = np.frombuffer(raw, dtype=dt).reshape(shape)
    return out


def _check_schema(meta: dict) -> None:
    version = meta.get("schemaVersion")
    if version != SCHEMA_VERSION:
        raise UnsupportedSchemaError(f"unsupported schema version {version!r}")


def save_archive_bytes(data: bytes, path: str | Path) -> Path:
    """Write serialized archive bytes to a zip file, or unpack into a
    directory when ``path`` has no ``.zip`` suffix."""
    path = Path(path)
    if path.suffix == ".zip":
        path.write_bytes(data)
        return path
    path.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(io.BytesIO(data)) as zf:
        for name in zf.namelist():
            (path / name).write_bytes(zf.read(name))
    return path


def load_archive_bytes(path: str | Path) -> bytes:
    """Read archive bytes from a zip file or re-pack a directory container."""
    path = Path(path)
    if path.is_dir():
        meta, files = _read_dir(path)
        arrays = _parse_arrays(meta, files)
        meta = {k: v for k, v in meta.items() if k != "arrays"}
        return _write_archive(meta, arrays)
    return path.read_bytes()


def read_kind(data: bytes) -> str:
    meta, _ = _read_zip(data)
    return meta.get("kind", "measurement")


# ---------------------------------------------------------------- measurement


def serialize_container(c: MeasurementContainer) -> bytes:
    meta = {
        "schemaVersion": SCHEMA_VERSION,
        "kind": "measurement",
        "acquisition": c.acquisition.to_meta(),
        "tracers": [t.to_meta() for t in c.tracers],
        "subjectAlias": c.subject_alias,
        "tfApplied": c.tf_applied,
        "backgroundSubtracted": c.background_subtracted,
        "reuseConsent": c.reuse_consent,
        "frameSeq": c.frame_seq,
        "acquiredAt": c.acquired_at,
        "calibration": {"bundleRef": c.calibration.bundle_ref},
    }
    arrays: dict[str, np.ndarray] = {}
    if c.time_signal is not None:
        arrays["signalTime"] = c.time_signal
    if c.spectrum is not None:
        arrays["signalSpectrum"] = c.spectrum
        arrays["selectionMask"] = c.selection_mask
    cal = c.calibration
    if cal.transfer_function is not None:
        arrays["transferFunction"] = cal.transfer_function.a.astype(np.complex64)
    if cal.coil_sensitivity is not None:
        arrays["coilSensitivity"] = cal.coil_sensitivity.p.astype(np.float32)
    if cal.empty_measurement is not None:
        arrays["emptyMeasurement"] = cal.empty_measurement.components.astype(np.complex64)
    return _write_archive(meta, arrays)


def deserialize_container(data: bytes) -> MeasurementContainer:
    meta, files = _read_zip(data)
    _check_schema(meta)
    if meta.get("kind", "measurement") != "measurement":
        raise MalformedContainerError(f"expected a measurement container, got kind {meta.get('kind')!r}")
    try:
        params = AcquisitionParams.from_meta(meta["acquisition"])
        tracers = tuple(TracerInfo.from_meta(t) for t in meta["tracers"])
        alias = meta["subjectAlias"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedContainerError(f"bad measurement metadata: {exc}") from exc
    arrays = _parse_arrays(meta, files)

    tf = None
    if "transferFunction" in arrays:
        tf = TransferFunction(arrays["transferFunction"])
    sens = None
    if "coilSensitivity" in arrays:
        sens = CoilSensitivity(arrays["coilSensitivity"])
    empty = None
    if "emptyMeasurement" in arrays:
        empty = Spectrum(arrays["emptyMeasurement"])
    cal = CalibrationRefs(
        transfer_function=tf,
        coil_sensitivity=sens,
        empty_measurement=empty,
        bundle_ref=meta.get("calibration", {}).get("bundleRef"),
    )
    try:
        return MeasurementContainer(
            acquisition=params,
            tracers=tracers,
            subject_alias=alias,
            time_signal=arrays.get("signalTime"),
            spectrum=arrays.get("signalSpectrum"),
            selection_mask=arrays.get("selectionMask"),
            frame_seq=int(meta.get("frameSeq", 0)),
            tf_applied=bool(meta["tfApplied"]),
            background_subtracted=bool(meta["backgroundSubtracted"]),
            reuse_consent=bool(meta.get("reuseConsent", False)),
            calibration=cal,
            acquired_at=meta.get("acquiredAt", ""),
        )
    except (KeyError, ValueError) as exc:
        raise MalformedContainerError(f"inconsistent measurement container: {exc}") from exc


# -------------------------------------------------------------- system matrix


def serialize_system_matrix(sm: SystemMatrix, acquisition: AcquisitionParams | None = None) -> bytes:
    meta = {
        "schemaVersion": SCHEMA_VERSION,
        "kind": "systemMatrix",
        "tracers": [sm.tracer.to_meta()],
        "paramsHash": sm.params_hash,
        "sensitivityKind": sm.sensitivity_kind,
        "deviceId": sm.device_id,
    }
    meta.update(sm.grid.to_meta())
    if acquisition is not None:
        meta["acquisition"] = acquisition.to_meta()
    rows = np.asarray(sm.row_index, dtype=np.float64)
    arrays = {
        "smEntries": sm.entries.astype(np.complex64),
        "smRowIndex": rows,
    }
    return _write_archive(meta, arrays)


def deserialize_system_matrix(data: bytes) -> tuple[SystemMatrix, AcquisitionParams | None]:
    meta, files = _read_zip(data)
    _check_schema(meta)
    if meta.get("kind") != "systemMatrix":
        raise MalformedContainerError(f"expected a system matrix container, got kind {meta.get('kind')!r}")
    arrays = _parse_arrays(meta, files)
    try:
        grid = FovGrid.from_meta(meta)
        tracer = TracerInfo.from_meta(meta["tracers"][0])
        rows = tuple((int(c), int(k)) for c, k in np.asarray(arrays["smRowIndex"], dtype=np.float64))
        sm = SystemMatrix(
            entries=arrays["smEntries"],
            row_index=rows,
            grid=grid,
            tracer=tracer,
            params_hash=meta["paramsHash"],
            sensitivity_kind=meta["sensitivityKind"],
            device_id=meta.get("deviceId"),
        )
    except (KeyError, IndexError, ValueError) as exc:
        raise MalformedContainerError(f"bad system matrix container: {exc}") from exc
    params = None
    if "acquisition" in meta:
        params = AcquisitionParams.from_meta(meta["acquisition"])
    return sm, params


# ---------------------------------------------------------- calibration bundle


def serialize_bundle(bundle: CalibrationBundle) -> bytes:
    meta = {
        "schemaVersion": SCHEMA_VERSION,
        "kind": "calibrationBundle",
        "deviceId": bundle.device_id,
        "acquiredAt": bundle.acquired_at,
    }
    arrays = {
        "transferFunction": bundle.transfer_function.a.astype(np.complex64),
        "coilSensitivity": bundle.coil_sensitivity.p.astype(np.float32),
        "emptyMeasurement": bundle.empty_measurement.components.astype(np.complex64),
    }
    return _write_archive(meta, arrays)


def deserialize_bundle(data: bytes) -> CalibrationBundle:
    meta, files = _read_zip(data)
    _check_schema(meta)
    if meta.get("kind") != "calibrationBundle":
        raise MalformedContainerError(f"expected a calibration bundle, got kind {meta.get('kind')!r}")
    arrays = _parse_arrays(meta, files)
    try:
        return CalibrationBundle(
            transfer_function=TransferFunction(arrays["transferFunction"]),
            coil_sensitivity=CoilSensitivity(arrays["coilSensitivity"]),
            empty_measurement=Spectrum(arrays["emptyMeasurement"]),
            device_id=meta["deviceId"],
            acquired_at=meta.get("acquiredAt", ""),
        )
    except (KeyError, ValueError) as exc:
        raise MalformedContainerError(f"bad calibration bundle: {exc}") from exc


# --------------------------------------------------------------------- images


@dataclass(frozen=True, eq=False)
class ImageSet:
    """Reconstructed images of one job, one entry per frame."""

    images: tuple[ReconImage, ...]
    tracer_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "images", tuple(self.images))
        object.__setattr__(self, "tracer_ids", tuple(self.tracer_ids))
        if not self.images:
            raise ValueError("an image set needs at least one image")
        first = self.images[0]
        for img in self.images:
            if img.concentrations.shape != first.concentrations.shape:
                raise ValueError("all images in a set must share one shape")
        if len(self.tracer_ids) != first.n_tracers:
            raise ValueError("one tracer id per tracer channel required")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ImageSet):
            return NotImplemented
        return self.tracer_ids == other.tracer_ids and self.images == other.images


def serialize_images(s: ImageSet, grid: FovGrid) -> bytes:
    stack = np.stack([img.concentrations for img in s.images]).astype(np.float32)
    meta = {
        "schemaVersion": SCHEMA_VERSION,
        "kind": "image",
        "tracerIds": list(s.tracer_ids),
        "frameSeqs": [img.frame_seq for img in s.images],
        "residualNorms": [img.residual_norm for img in s.images],
    }
    meta.update(grid.to_meta())
    return _write_archive(meta, {"images": stack})


def deserialize_images(data: bytes) -> tuple[ImageSet, FovGrid]:
    meta, files = _read_zip(data)
    _check_schema(meta)
    if meta.get("kind") != "image":
        raise MalformedContainerError(f"expected an image container, got kind {meta.get('kind')!r}")
    arrays = _parse_arrays(meta, files)
    try:
        grid = FovGrid.from_meta(meta)
        stack = arrays["images"]
        seqs = meta["frameSeqs"]
        residuals = meta["residualNorms"]
        images = tuple(
            ReconImage(
                concentrations=stack[i],
                frame_seq=int(seqs[i]),
                grid=grid,
                residual_norm=float(residuals[i]),
            )
            for i in range(stack.shape[0])
        )
        return ImageSet(images, tuple(meta["tracerIds"])), grid
    except (KeyError, IndexError, ValueError) as exc:
        raise MalformedContainerError(f"bad image container: {exc}") from exc
