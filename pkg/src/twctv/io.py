"""Tensor and image persistence.

The ``.tlt`` format is a flat little-endian binary file::

    offset  size      field
    0       4         magic b"TLT1"
    4       1         element type: b"d" (float64) or b"f" (float32)
    5       3         reserved, zero
    8       8         order d (uint64)
    16      8*d       extents n_1..n_d (uint64)
    16+8d   ...       row-major payload, element size * prod(extents) bytes

Any HDF5/NumPy array converts with ``write_tensor(path, np.asarray(a))``.
"""

import hashlib
import math
import struct
from pathlib import Path

import numpy as np
from PIL import Image

__all__ = [
    "TensorFileError",
    "MAGIC",
    "read_tensor",
    "write_tensor",
    "read_image",
    "write_image",
    "read_frames",
    "write_frames",
    "read_mask",
    "file_digest",
]

MAGIC = b"TLT1"
_DTYPES = {b"d": np.dtype("<f8"), b"f": np.dtype("<f4")}
_MAX_ELEMENTS = 1 << 40


class TensorFileError(IOError):
    """Malformed, truncated or unsupported tensor/image file."""


def write_tensor(path, X, dtype="f64"):
    """Write ``X`` as ``.tlt``; ``dtype="f32"`` rounds values to single precision."""
    X = np.asarray(X)
    if np.iscomplexobj(X):
        raise TypeError("only real tensors can be stored")
    code = {"f64": b"d", "f32": b"f"}[dtype]
    payload = np.ascontiguousarray(X, dtype=_DTYPES[code])
    header = MAGIC + code + b"\0\0\0" + struct.pack(f"<Q{X.ndim}Q", X.ndim, *X.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes(order="C"))


def read_tensor(path):
    """Read a ``.tlt`` file into a float64 array (float32 payloads are widened)."""
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != MAGIC:
        raise TensorFileError(f"{path}: not a TLT1 tensor file")
    code = data[4:5]
    if code not in _DTYPES:
        raise TensorFileError(f"{path}: unknown element type {code!r}")
    (order,) = struct.unpack_from("<Q", data, 8)
    if order > 32:
        raise TensorFileError(f"{path}: implausible order {order}")
    end = 16 + 8 * order
    if len(data) < end:
        raise TensorFileError(f"{path}: truncated header")
    shape = struct.unpack_from(f"<{order}Q", data, 16)
    count = 1
    for n in shape:
        count *= n
        if count > _MAX_ELEMENTS:
            raise TensorFileError(f"{path}: shape {shape} overflows the element limit")
    dt = _DTYPES[code]
    expected = count * dt.itemsize
    if len(data) - end != expected:
        raise TensorFileError(f"{path}: payload has {len(data) - end} bytes, expected {expected} (file corrupt or truncated)")
    return np.frombuffer(data, dtype=dt, offset=end, count=count).astype(np.float64).reshape(shape)


def read_image(path):
    """8-bit PNG (grayscale or RGB) as an ``h x w x c`` array scaled to ``[0, 1]``."""
    try:
        img = Image.open(path)
        img.load()
    except (OSError, ValueError) as exc:
        raise TensorFileError(f"{path}: {exc}") from None
    if img.mode == "P":
        img = img.convert("RGB")
    if img.mode not in ("L", "RGB"):
        raise TensorFileError(f"{path}: unsupported image mode {img.mode!r}; need 8-bit grayscale or RGB")
    arr = np.asarray(img, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def _to_uint8(X):
    X = np.asarray(X, dtype=float)
    return np.round(np.clip(X, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_image(path, X):
    """Write an ``h x w x {1,3}`` array (values clamped to ``[0, 1]``) as 8-bit PNG."""
    X = np.asarray(X)
    if X.ndim == 2:
        X = X[:, :, None]
    if X.ndim != 3 or X.shape[2] not in (1, 3):
        raise ValueError(f"cannot write shape {X.shape} as an image")
    data = _to_uint8(X)
    img = Image.fromarray(data[:, :, 0], mode="L") if X.shape[2] == 1 else Image.fromarray(data, mode="RGB")
    img.save(path, format="PNG")


def read_frames(paths):
    """Stack numbered PNG frames along a trailing axis: ``(h, w, frames)`` or ``(h, w, c, frames)``."""
    frames = [read_image(p) for p in sorted(paths)]
    if not frames:
        raise TensorFileError("no frames given")
    if any(f.shape != frames[0].shape for f in frames):
        raise TensorFileError("frames differ in size")
    video = np.stack(frames, axis=-1)
    return video[:, :, 0, :] if video.shape[2] == 1 else video


def write_frames(directory, X, prefix="frame"):
    """Write each trailing-axis slice of ``X`` as ``prefix_0000.png``; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for f in range(X.shape[-1]):
        p = directory / f"{prefix}_{f:04d}.png"
        write_image(p, X[..., f])
        paths.append(p)
    return paths


def read_mask(path, shape=None):
    """Load an observation mask from ``.tlt`` (nonzero = observed) or a PNG (bright = observed).

    A 2-D image mask is broadcast over the channels of ``shape``.
    """
    path = Path(path)
    if path.suffix.lower() == ".png":
        m = read_image(path)[:, :, 0] > 0.5
        if shape is not None and len(shape) == 3:
            m = np.broadcast_to(m[:, :, None], shape)
    else:
        m = read_tensor(path) != 0
    m = np.array(m, dtype=bool)
    if shape is not None and m.shape != tuple(shape):
        raise TensorFileError(f"{path}: mask shape {m.shape} does not match data shape {tuple(shape)}")
    return m


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()
