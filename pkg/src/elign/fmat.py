"""Binary feature-matrix interchange ("FMT1" files).

One fixed little-endian layout so features computed by any tool (internal
log-mel, external encoder dumps, speaker embeddings) flow through a single
contract:

    magic  b"FMT1"          4 bytes
    rows   u32              4 bytes
    cols   u32              4 bytes
    hop_seconds          f64  8 bytes
    start_offset_seconds f64  8 bytes
    values rows*cols float32, row-major

Header is 28 bytes; nothing follows the payload. Embeddings are stored as a
single row with hop_seconds 1.0 (there is no real hop for a pooled vector).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"FMT1"
_HEADER = struct.Struct("<4sIIdd")
HEADER_BYTES = _HEADER.size  # 28


class FmatFormatError(ValueError):
    """Raised when a file does not conform to the FMT1 layout."""


@dataclass
class FeatureMatrix:
    """Time-major frame features with hop metadata.

    values has shape (rows, cols); row i covers time
    start_offset_seconds + i * hop_seconds.
    """

    values: np.ndarray
    hop_seconds: float
    start_offset_seconds: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim == 1:
            v = v.reshape(1, -1)
        if v.ndim != 2:
            raise ValueError(f"feature matrix must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature matrix contains NaN or Inf")
        if not self.hop_seconds > 0:
            raise ValueError(f"hop_seconds must be > 0, got {self.hop_seconds}")
        if self.start_offset_seconds < 0:
            raise ValueError("start_offset_seconds must be >= 0")
        self.values = v

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def duration_seconds(self) -> float:
        return self.rows * self.hop_seconds


def write_fmat(m: FeatureMatrix, path) -> None:
    if not np.all(np.isfinite(m.values)):
        raise ValueError("refusing to write non-finite values")
    header = _HEADER.pack(MAGIC, m.rows, m.cols, float(m.hop_seconds), float(m.start_offset_seconds))
    payload = np.ascontiguousarray(m.values, dtype="<f4").tobytes()
    with open(path, "wb") as f:
        f.write(header)
        f.write(payload)


def read_fmat(path) -> FeatureMatrix:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < HEADER_BYTES:
        raise FmatFormatError(f"truncated header: {len(raw)} bytes")
    magic, rows, cols, hop, offset = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FmatFormatError(f"bad magic {magic!r}")
    expected = HEADER_BYTES + 4 * rows * cols
    if len(raw) < expected:
        raise FmatFormatError(f"truncated payload: {len(raw)} bytes, expected {expected}")
    if len(raw) > expected:
        raise FmatFormatError(f"trailing bytes: {len(raw)} bytes, expected {expected}")
    values = np.frombuffer(raw, dtype="<f4", count=rows * cols, offset=HEADER_BYTES)
    values = values.reshape(rows, cols).copy()
    if not np.all(np.isfinite(values)):
        raise FmatFormatError("payload contains NaN or Inf")
    return FeatureMatrix(values=values, hop_seconds=hop, start_offset_seconds=offset)
