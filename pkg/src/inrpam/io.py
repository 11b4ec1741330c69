"""File formats: PFG float grids, PNG import/export, checkpoints, manifests, CSV.

PFG layout: the ASCII line ``PFG1 <width> <height>\\n`` followed by
``width * height`` little-endian float32 values in row-major order.

Checkpoint layout: ``INRPAM-CKPT1\\n``, one line of compact JSON (config,
dims, epoch, section table), then the binary sections in table order. Each
section is a little-endian uint64 byte length followed by little-endian
float64 data.
"""

from __future__ import annotations

import csv
import json
import os
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .core import DataError, ImageGrid, InrPamError, PsfKernel

PFG_MAGIC = b"PFG1"
CKPT_MAGIC = b"INRPAM-CKPT1\n"


class FormatError(InrPamError, ValueError):
    """A file does not follow the expected layout."""


def encode_pfg(image: ImageGrid) -> bytes:
    header = f"PFG1 {image.width} {image.height}\n".encode("ascii")
    return header + image.data.astype("<f4").tobytes()


def decode_pfg(payload: bytes) -> ImageGrid:
    newline = payload.find(b"\n")
    if newline < 0:
        raise FormatError("PFG header is not newline-terminated")
    parts = payload[:newline].split()
    if len(parts) != 3 or parts[0] != PFG_MAGIC:
        raise FormatError("not a PFG1 file")
    width, height = int(parts[1]), int(parts[2])
    body = payload[newline + 1 :]
    if len(body) != 4 * width * height:
        raise FormatError(f"PFG body has {len(body)} bytes, expected {4 * width * height}")
    values = np.frombuffer(body, dtype="<f4").astype(np.float64)
    return ImageGrid(values.reshape(height, width))


def save_pfg(path, image: ImageGrid):
    Path(path).write_bytes(encode_pfg(image))


def load_pfg(path) -> ImageGrid:
    return decode_pfg(Path(path).read_bytes())


def save_png(path, image: ImageGrid, bits: int = 16):
    """Write as 8- or 16-bit grayscale, clipping to [0, 1]."""
    clipped = np.clip(image.data, 0.0, 1.0)
    if bits == 8:
        Image.fromarray(np.round(clipped * 255).astype(np.uint8), mode="L").save(path)
    elif bits == 16:
        arr = np.round(clipped * 65535).astype(np.uint16)
        Image.fromarray(arr).save(path)
    else:
        raise ValueError("bits must be 8 or 16")


def load_png(path) -> ImageGrid:
    """Read a grayscale (or RGB, converted) PNG and map it linearly to [0, 1]."""
    with Image.open(path) as img:
        if img.mode in ("I;16", "I;16B", "I;16L", "I"):
            arr = np.asarray(img, dtype=np.float64)
            scale = 65535.0
        else:
            arr = np.asarray(img.convert("L"), dtype=np.float64)
            scale = 255.0
    return ImageGrid(arr / scale)


def load_image(path) -> ImageGrid:
    path = Path(path)
    if path.suffix.lower() == ".png":
        return load_png(path)
    return load_pfg(path)


def save_image(path, image: ImageGrid):
    path = Path(path)
    if path.suffix.lower() == ".png":
        save_png(path, image)
    else:
        save_pfg(path, image)


def save_kernel(path, kernel: PsfKernel):
    save_pfg(path, ImageGrid(kernel.weights))


def load_kernel(path) -> PsfKernel:
    # float32 storage loses the exact unit sum, so renormalize
    return PsfKernel.normalized(load_pfg(path).data)


# --------------------------------------------------------------------------
# checkpoints
# --------------------------------------------------------------------------


def encode_checkpoint(header: dict, sections: dict[str, np.ndarray]) -> bytes:
    table = [[name, list(arr.shape)] for name, arr in sections.items()]
    meta = dict(header, sections=table)
    parts = [CKPT_MAGIC, json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8"), b"\n"]
    for arr in sections.values():
        data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        parts.append(struct.pack("<Q", len(data)))
        parts.append(data)
    return b"".join(parts)


def decode_checkpoint(payload: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    if not payload.startswith(CKPT_MAGIC):
        raise FormatError("not an inrpam checkpoint")
    pos = len(CKPT_MAGIC)
    newline = payload.index(b"\n", pos)
    meta = json.loads(payload[pos:newline].decode("utf-8"))
    pos = newline + 1
    sections = {}
    for name, shape in meta.pop("sections"):
        (length,) = struct.unpack_from("<Q", payload, pos)
        pos += 8
        expected = 8 * int(np.prod(shape, dtype=np.int64))
        if length != expected:
            raise FormatError(f"section {name!r} has {length} bytes, expected {expected}")
        sections[name] = np.frombuffer(payload[pos : pos + length], dtype="<f8").reshape(shape).copy()
        pos += length
    if pos != len(payload):
        raise FormatError("trailing bytes after last checkpoint section")
    return meta, sections


def save_checkpoint(path, state, cfg, dims):
    """Serialize a training state, including Adam moments, for bit-exact resume."""
    sections = dict(state.parameters())
    for name, (m, v) in sorted(state.moments.items()):
        sections[f"adam_m/{name}"] = m
        sections[f"adam_v/{name}"] = v
    sections["history"] = np.asarray(state.history, dtype=np.float64)
    header = {
        "config": cfg.to_dict(),
        "dims": list(dims),
        "epoch": state.epoch,
        "encoder": state.encoder.config(),
        "psf_kernel_size": state.psf.kernel_size,
    }
    Path(path).write_bytes(encode_checkpoint(header, sections))


def load_checkpoint(path):
    """Returns ``(state, cfg, dims)``."""
    from .hashenc import HashEncoderParams
    from .mlp import MlpParams
    from .reconstruct import LearnablePsf, TrainConfig, TrainState

    meta, sections = decode_checkpoint(Path(path).read_bytes())
    cfg = TrainConfig(**meta["config"])
    encoder = HashEncoderParams(**meta["encoder"], tables=sections["tables"])
    mlp = MlpParams(**{name: sections[name] for name in MlpParams.NAMES})
    psf = LearnablePsf(float(sections["log_sigma"][0]), int(meta["psf_kernel_size"]))
    moments = {}
    for key in sections:
        if key.startswith("adam_m/"):
            name = key[len("adam_m/") :]
            moments[name] = (sections[key], sections[f"adam_v/{name}"])
    state = TrainState(encoder, mlp, psf, moments, int(meta["epoch"]), sections["history"].tolist())
    return state, cfg, tuple(meta["dims"])


# --------------------------------------------------------------------------
# text outputs
# --------------------------------------------------------------------------


def write_manifest(path, manifest: dict):
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def write_csv(path, header: list[str], rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def ensure_parent(path):
    parent = Path(path).parent
    try:
        parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {parent}: {exc}") from exc
    if not os.access(parent, os.W_OK):
        raise OSError(f"output directory {parent} is not writable")


def check_finite(image: ImageGrid):
    if not np.all(np.isfinite(image.data)):
        raise DataError("image contains non-finite values")
