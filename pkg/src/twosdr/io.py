"""Bit-exact file formats and model persistence.

Stack container layout (little-endian throughout):

    offset 0   magic  b"2SDR"
    offset 4   version   u16
    offset 6   dtype     u8   (0 = float32, 1 = float64)
    offset 7   n, p, q   u64 each
    offset 31  payload, row-major per sample
    trailer    CRC32 (u32) over every preceding byte

The MRC reader/writer covers the mode-2 (32-bit float) subset of the
cryo-EM interchange format: 1024-byte header with nx/ny/nz at byte
offsets 0/4/8, mode at 12 and the extended-header byte count at 92;
other modes are rejected.
"""

import io as _io
import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidInputError
from .gic import GicCurve, PcaModel
from .linalg import as_stack
from .mpca import MpcaModel
from .pipeline import Hybrid2SdrModel
from .sure import SureGrid

MAGIC = b"2SDR"
CONTAINER_VERSION = 1
_HEADER = struct.Struct("<4sHBQQQ")  # magic, version, dtype, n, p, q
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_CODES = {"f32": 0, "f64": 1, "float32": 0, "float64": 1}

MRC_HEADER_SIZE = 1024
MRC_MODE_FLOAT32 = 2


# ---------------------------------------------------------------------------
# Stack container
# ---------------------------------------------------------------------------

def write_stack_container(stack, path, dtype="f64"):
    """Serialize a stack; byte output is a pure function of the input."""
    stack = as_stack(stack)
    if dtype not in _DTYPE_CODES:
        raise InvalidInputError(f"dtype must be one of {sorted(_DTYPE_CODES)}")
    code = _DTYPE_CODES[dtype]
    n, p, q = stack.shape
    header = _HEADER.pack(MAGIC, CONTAINER_VERSION, code, n, p, q)
    payload = np.ascontiguousarray(stack, dtype=_DTYPES[code]).tobytes()
    body = header + payload
    crc = zlib.crc32(body) & 0xFFFFFFFF
    Path(path).write_bytes(body + struct.pack("<I", crc))


def read_stack_container(path):
    """Parse a container file back into an (n, p, q) float64 stack."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size + 4:
        raise FormatError("file too short for a stack container", offset=0)
    magic, version, code, n, p, q = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", offset=0)
    if version != CONTAINER_VERSION:
        raise FormatError(f"unsupported container version {version}", offset=4)
    if code not in _DTYPES:
        raise FormatError(f"unknown dtype code {code}", offset=6)
    dt = _DTYPES[code]
    expected = _HEADER.size + n * p * q * dt.itemsize + 4
    if len(raw) != expected:
        raise FormatError(
            f"payload length mismatch: expected {expected} bytes, got {len(raw)}",
            offset=min(len(raw), _HEADER.size),
        )
    (stored_crc,) = struct.unpack_from("<I", raw, len(raw) - 4)
    actual_crc = zlib.crc32(raw[:-4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise FormatError(
            f"CRC mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}",
            offset=len(raw) - 4,
        )
    data = np.frombuffer(raw, dtype=dt, count=n * p * q, offset=_HEADER.size)
    return data.reshape(n, p, q).astype(np.float64)


# ---------------------------------------------------------------------------
# MRC mode-2 subset
# ---------------------------------------------------------------------------

def write_stack_mrc(stack, path):
    """Write a stack as an MRC mode-2 (float32) volume, one section per
    sample; rows map to the y axis and columns to the x axis."""
    stack = as_stack(stack)
    n, p, q = stack.shape
    header = bytearray(MRC_HEADER_SIZE)
    struct.pack_into("<iii", header, 0, q, p, n)      # nx, ny, nz
    struct.pack_into("<i", header, 12, MRC_MODE_FLOAT32)
    struct.pack_into("<iii", header, 28, q, p, n)     # mx, my, mz
    struct.pack_into("<fff", header, 40, float(q), float(p), float(n))
    struct.pack_into("<iii", header, 64, 1, 2, 3)     # axis order
    struct.pack_into("<fff", header, 76,
                     float(stack.min()), float(stack.max()), float(stack.mean()))
    struct.pack_into("<i", header, 92, 0)             # no extended header
    header[208:212] = b"MAP "
    header[212:216] = bytes((0x44, 0x44, 0x00, 0x00))  # little-endian stamp
    payload = np.ascontiguousarray(stack, dtype="<f4").tobytes()
    Path(path).write_bytes(bytes(header) + payload)


def read_stack_mrc(path):
    """Read an MRC mode-2 file into a float64 stack of nz sections.

    Extended headers are skipped by their declared size; any mode other
    than 2 is rejected.
    """
    raw = Path(path).read_bytes()
    if len(raw) < MRC_HEADER_SIZE:
        raise FormatError("file too short for an MRC header", offset=0)
    nx, ny, nz = struct.unpack_from("<iii", raw, 0)
    (mode,) = struct.unpack_from("<i", raw, 12)
    (nsymbt,) = struct.unpack_from("<i", raw, 92)
    if mode != MRC_MODE_FLOAT32:
        raise FormatError(f"unsupported mode {mode} (only mode 2 accepted)",
                          offset=12)
    if min(nx, ny, nz) < 1:
        raise FormatError(f"non-positive dimensions ({nx}, {ny}, {nz})", offset=0)
    if nsymbt < 0:
        raise FormatError(f"negative extended-header size {nsymbt}", offset=92)
    start = MRC_HEADER_SIZE + nsymbt
    expected = start + 4 * nx * ny * nz
    if len(raw) < expected:
        raise FormatError(
            f"truncated data: expected {expected} bytes, got {len(raw)}",
            offset=len(raw),
        )
    data = np.frombuffer(raw, dtype="<f4", count=nx * ny * nz, offset=start)
    return data.reshape(nz, ny, nx).astype(np.float64)


# ---------------------------------------------------------------------------
# CSV helpers
# ---------------------------------------------------------------------------

_CSV_STACK_HEADER = "stack"


def write_stack_csv(stack, path):
    """One row per sample (row-major flattening); the header comment
    records the image shape so the file round-trips."""
    stack = as_stack(stack)
    n, p, q = stack.shape
    np.savetxt(path, stack.reshape(n, p * q), delimiter=",",
               header=f"{_CSV_STACK_HEADER} p={p} q={q}", fmt="%.17g")


def read_stack_csv(path):
    with open(path) as fh:
        first = fh.readline()
        rest = fh.read()
    if not first.startswith("#") or _CSV_STACK_HEADER not in first:
        raise FormatError("missing stack header comment line", offset=0)
    try:
        fields = dict(tok.split("=") for tok in first.split() if "=" in tok)
        p, q = int(fields["p"]), int(fields["q"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"malformed stack header: {first.strip()!r}",
                          offset=0) from exc
    flat = np.loadtxt(_io.StringIO(rest), delimiter=",", ndmin=2)
    if flat.shape[1] != p * q:
        raise FormatError(
            f"row length {flat.shape[1]} does not match p*q = {p * q}"
        )
    return flat.reshape(flat.shape[0], p, q)


def write_matrix_csv(matrix, path, header=""):
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    np.savetxt(path, arr, delimiter=",", header=header, fmt="%.17g")


def read_matrix_csv(path):
    return np.loadtxt(path, delimiter=",", ndmin=2)


def write_labels_csv(labels, path):
    np.savetxt(path, np.asarray(labels, dtype=np.int64)[:, None],
               delimiter=",", fmt="%d", header="label")


def read_labels_csv(path):
    return np.loadtxt(path, delimiter=",", ndmin=1).astype(np.int64)


# ---------------------------------------------------------------------------
# Format dispatch
# ---------------------------------------------------------------------------

_EXT_FORMATS = {
    ".stk": "container", ".2sdr": "container",
    ".mrc": "mrc", ".mrcs": "mrc",
    ".csv": "csv",
}


def _infer_format(path):
    ext = Path(path).suffix.lower()
    if ext in _EXT_FORMATS:
        return _EXT_FORMATS[ext]
    try:
        with open(path, "rb") as fh:
            head = fh.read(4)
        if head == MAGIC:
            return "container"
    except OSError:
        pass
    raise InvalidInputError(
        f"cannot infer stack format for {path!r}; pass format explicitly"
    )


def read_stack(path, format=None):
    """Read a stack in any supported format (inferred from the extension
    or magic bytes when ``format`` is omitted)."""
    fmt = format or _infer_format(path)
    if fmt == "container":
        return read_stack_container(path)
    if fmt == "mrc":
        return read_stack_mrc(path)
    if fmt == "csv":
        return read_stack_csv(path)
    raise InvalidInputError(f"unknown stack format {fmt!r}")


def write_stack(stack, path, format=None, dtype="f64"):
    fmt = format or _EXT_FORMATS.get(Path(path).suffix.lower(), "container")
    if fmt == "container":
        return write_stack_container(stack, path, dtype=dtype)
    if fmt == "mrc":
        return write_stack_mrc(stack, path)
    if fmt == "csv":
        return write_stack_csv(stack, path)
    raise InvalidInputError(f"unknown stack format {fmt!r}")


# ---------------------------------------------------------------------------
# Model persistence
# ---------------------------------------------------------------------------

def save_model(model: Hybrid2SdrModel, path):
    """Persist a fitted two-stage model as a compressed npz archive with
    an embedded JSON metadata record."""
    meta = {
        "kind": "twosdr-hybrid-model",
        "version": 1,
        "ranks": list(model.ranks),
        "sigma2": model.mpca.sigma2,
        "mpca_converged": bool(model.mpca.converged),
        "mpca_n_iter": int(model.mpca.n_iter),
        "mpca_notes": list(model.mpca.notes),
        "sure": model.sure_grid.to_dict(),
        "gic": model.gic_curve.to_dict(),
        "pca_r": int(model.pca.r),
        "pca_c_tail": model.pca.c_tail,
    }
    np.savez_compressed(
        path,
        meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
        mean=model.mpca.mean,
        A=model.mpca.A,
        B=model.mpca.B,
        lam=model.mpca.lam,
        xi=model.mpca.xi,
        basis=model.pca.basis,
        kappa=model.pca.kappa,
        sure_scores=model.sure_grid.scores,
        gic_r=model.gic_curve.r_values,
        gic_log_det=model.gic_curve.log_det,
        gic_bias=model.gic_curve.bias,
        gic_criterion=model.gic_curve.criterion,
    )


def load_model(path) -> Hybrid2SdrModel:
    try:
        with np.load(path) as npz:
            arrays = {k: npz[k] for k in npz.files}
    except (OSError, ValueError) as exc:
        raise FormatError(f"cannot read model archive: {exc}") from exc
    try:
        meta = json.loads(bytes(arrays["meta"]).decode())
        if meta.get("kind") != "twosdr-hybrid-model":
            raise FormatError(f"not a model archive (kind={meta.get('kind')!r})")
        mpca = MpcaModel(
            mean=arrays["mean"], A=arrays["A"], B=arrays["B"],
            lam=arrays["lam"], xi=arrays["xi"],
            sigma2=meta["sigma2"],
            converged=meta["mpca_converged"],
            n_iter=meta["mpca_n_iter"],
            notes=tuple(meta["mpca_notes"]),
        )
        pca = PcaModel(basis=arrays["basis"], kappa=arrays["kappa"],
                       r=meta["pca_r"], c_tail=meta["pca_c_tail"])
        sure = meta["sure"]
        grid = SureGrid(
            p_u=sure["p_u"], q_u=sure["q_u"], sigma2=sure["sigma2"],
            scores=arrays["sure_scores"], argmin=tuple(sure["argmin"]),
        )
        gic = meta["gic"]
        curve = GicCurve(
            method=gic["method"],
            r_values=arrays["gic_r"],
            log_det=arrays["gic_log_det"],
            bias=arrays["gic_bias"],
            criterion=arrays["gic_criterion"],
            r_hat=gic["r_hat"],
            clamped=gic["clamped"],
        )
    except KeyError as exc:
        raise FormatError(f"model archive missing field {exc}") from exc
    return Hybrid2SdrModel(mpca=mpca, pca=pca, sure_grid=grid, gic_curve=curve)
