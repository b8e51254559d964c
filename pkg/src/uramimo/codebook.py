"""The common coding matrix shared by every user.

Entries are i.i.d. circularly-symmetric complex Gaussian with unit variance;
column i is the codeword of index i.  With ``normalized=True`` every column
is rescaled to squared norm exactly ``d`` (the ensemble average otherwise).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ResourceLimitError, SpecError

# complex128 payload budget; generate_codebook refuses anything larger.
DEFAULT_MAX_BYTES = 2**31

_HEADER = struct.Struct("<qqQB")


@dataclass(frozen=True, eq=False)
class Codebook:
    """Immutable coding matrix; safe for concurrent read."""

    a: np.ndarray  # complex (d, n_cw)
    d: int
    n_cw: int
    seed: int
    normalized: bool

    def __post_init__(self):
        arr = np.array(self.a, dtype=np.complex128, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "a", arr)


def generate_codebook(
    seed: int,
    d: int,
    n_cw: int,
    normalized: bool = False,
    max_bytes: int = DEFAULT_MAX_BYTES,
) -> Codebook:
    """Deterministically generate the d x n_cw Gaussian coding matrix."""
    if d < 1 or n_cw < 1:
        raise SpecError(f"codebook dimensions must be >= 1, got d={d}, n_cw={n_cw}")
    needed = 16 * d * n_cw
    if needed > max_bytes:
        raise ResourceLimitError(
            f"codebook of {d} x {n_cw} needs {needed} bytes, budget is {max_bytes}"
        )
    rng = np.random.default_rng(np.random.SeedSequence(seed & ((1 << 64) - 1)))
    raw = rng.standard_normal((2, d, n_cw))
    a = (raw[0] + 1j * raw[1]) / np.sqrt(2.0)
    if normalized:
        a *= np.sqrt(d) / np.linalg.norm(a, axis=0)
    return Codebook(a=a, d=d, n_cw=n_cw, seed=int(seed), normalized=bool(normalized))


def export_codebook(path, cb: Codebook) -> None:
    """Binary dump: header (d, n_cw, seed, normalized) then column-major
    interleaved re/im float64 payload."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(cb.d, cb.n_cw, cb.seed & ((1 << 64) - 1), int(cb.normalized)))
        cb.a.ravel(order="F").view(np.float64).tofile(fh)


def load_codebook(path) -> Codebook:
    """Read back a codebook written by :func:`export_codebook`."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise SpecError("codebook file too short for its header")
        d, n_cw, seed, normalized = _HEADER.unpack(header)
        raw = np.fromfile(fh, dtype=np.float64)
    if raw.size != 2 * d * n_cw:
        raise SpecError(f"codebook payload holds {raw.size} floats, expected {2 * d * n_cw}")
    a = raw.view(np.complex128).reshape((d, n_cw), order="F")
    return Codebook(a=a, d=int(d), n_cw=int(n_cw), seed=int(seed), normalized=bool(normalized))
