"""Image decoding and keypoint serialization."""
from __future__ import annotations

import csv
import json
import warnings
from pathlib import Path

import numpy as np

from .pyramid import to_grayscale

KEYPOINT_FIELDS = ("x", "y", "sigma", "response", "cm", "level")
_WS = b" \t\n\r\x0b\x0c"


class FormatError(ValueError):
    """Malformed or unsupported image file; ``offset`` is the byte position."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


def _pgm_token(data: bytes, pos: int) -> tuple[bytes, int]:
    while pos < len(data):
        if data[pos] in _WS:
            pos += 1
        elif data[pos] == ord("#"):
            while pos < len(data) and data[pos] not in b"\r\n":
                pos += 1
        else:
            break
    start = pos
    while pos < len(data) and data[pos] not in _WS and data[pos] != ord("#"):
        pos += 1
    if start == pos:
        raise FormatError("truncated PGM header", start)
    return data[start:pos], pos


def decode_pgm(data: bytes) -> np.ndarray:
    """Binary (P5) PGM with maxval 255 or 65535, scaled to [0, 1]."""
    if data[:2] != b"P5":
        raise FormatError(f"bad magic {data[:2]!r}, only binary P5 PGM is supported", 0)
    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        start = pos
        tok, pos = _pgm_token(data, pos)
        try:
            fields.append(int(tok))
        except ValueError:
            raise FormatError(f"invalid {name} {tok!r}", start) from None
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise FormatError(f"invalid dimensions {width}x{height}", 2)
    if maxval not in (255, 65535):
        raise FormatError(f"unsupported maxval {maxval}", pos)
    if pos >= len(data) or data[pos] not in _WS:
        raise FormatError("missing whitespace after header", pos)
    pos += 1
    dtype = np.dtype(">u2") if maxval == 65535 else np.dtype("u1")
    need = width * height * dtype.itemsize
    if len(data) - pos < need:
        raise FormatError(f"truncated payload: need {need} bytes, have {len(data) - pos}",
                          len(data))
    pixels = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos)
    return pixels.reshape(height, width).astype(np.float64) / maxval


def read_pgm(path) -> np.ndarray:
    return decode_pgm(Path(path).read_bytes())


def encode_pgm(image) -> bytes:
    """8-bit P5 encoding of a [0, 1] image (values are clipped)."""
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    pixels = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    return b"P5\n%d %d\n255\n" % (w, h) + pixels.tobytes()


def write_pgm(image, path) -> None:
    Path(path).write_bytes(encode_pgm(image))


def read_png(path) -> np.ndarray:
    """8-bit grayscale or RGB PNG; alpha is dropped with a warning."""
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover
        raise FormatError("PNG support needs Pillow (pip install 'artifact[png]')") from exc

    with Image.open(path) as im:
        if im.format != "PNG":
            raise FormatError(f"not a PNG file: {im.format}", 0)
        if im.info.get("interlace"):
            raise FormatError("interlaced PNG is not supported")
        mode = im.mode
        if mode in ("LA", "RGBA", "PA") or (mode == "P" and "transparency" in im.info):
            warnings.warn(f"{path}: alpha channel ignored", stacklevel=2)
        if mode in ("L", "LA"):
            return np.asarray(im.convert("L"), dtype=np.float64) / 255.0
        if mode in ("RGB", "RGBA", "P", "PA"):
            return to_grayscale(np.asarray(im.convert("RGB")))
        raise FormatError(f"unsupported PNG mode {mode!r} (8-bit gray or RGB only)")


def read_image(path) -> np.ndarray:
    """Dispatch on file signature: P5 PGM or PNG."""
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head.startswith(b"P5"):
        return read_pgm(path)
    if head.startswith(b"\x89PNG\r\n\x1a\n"):
        return read_png(path)
    if head[:1] == b"P" and head[1:2].isdigit():
        raise FormatError(f"unsupported netpbm variant {head[:2]!r}, only P5", 0)
    raise FormatError("unrecognized image format (expected P5 PGM or PNG)", 0)


def keypoint_record(kp) -> dict:
    return {
        "x": round(float(kp.x), 6),
        "y": round(float(kp.y), 6),
        "sigma": round(float(kp.sigma), 6),
        "response": round(float(kp.response), 6),
        "cm": round(float(kp.cm), 6),
        "level": int(kp.level),
    }


def format_keypoints(kps, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps([keypoint_record(k) for k in kps], indent=1) + "\n"
    if fmt == "csv":
        lines = [",".join(KEYPOINT_FIELDS)]
        for k in kps:
            lines.append(f"{k.x:.6f},{k.y:.6f},{k.sigma:.6f},{k.response:.6f},{k.cm:.6f},{int(k.level)}")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown keypoint format {fmt!r}")


def write_keypoints(kps, fmt, path) -> None:
    text = format_keypoints(kps, fmt)
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write keypoints to {path}: {exc.strerror}") from exc


def read_keypoints(path) -> list[dict]:
    """Inverse of :func:`write_keypoints`; format inferred from content."""
    text = Path(path).read_text()
    if text.lstrip().startswith("["):
        return json.loads(text)
    rows = list(csv.DictReader(text.splitlines()))
    return [{k: (int(r[k]) if k == "level" else float(r[k])) for k in KEYPOINT_FIELDS}
            for r in rows]
