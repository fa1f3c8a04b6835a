"""Raw bitmap decoding, grayscale conversion and nearest-neighbor downsampling.

Images are plain numpy arrays: RGB images are ``(height, width, 3)`` uint8,
gray images are ``(height, width)`` uint8, rows top-to-bottom.
"""
from __future__ import annotations

import os
import struct

import numpy as np

__all__ = [
    "ImageDecodeError",
    "ImageSizeError",
    "decode_image",
    "load_image",
    "encode_ppm",
    "encode_pgm",
    "encode_bmp",
    "save_image",
    "to_grayscale",
    "downsample_nn",
    "round_half_away",
]

BMP24 = "BMP24"
PPM_P6 = "PPM_P6"
PGM_P5 = "PGM_P5"
FORMATS = (BMP24, PPM_P6, PGM_P5)

GRAY_WEIGHTS = (0.299, 0.587, 0.114)


class ImageDecodeError(ValueError):
    """Raised for malformed or unsupported image files."""


class ImageSizeError(ValueError):
    """Raised when an image is too small for the requested operation."""


def round_half_away(x):
    """Round to nearest integer, ties away from zero."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def sniff_format(data: bytes) -> str:
    if data[:2] == b"BM":
        return BMP24
    if data[:2] == b"P6":
        return PPM_P6
    if data[:2] == b"P5":
        return PGM_P5
    raise ImageDecodeError("unrecognized magic number %r" % data[:2])


def decode_image(data: bytes, fmt: str | None = None) -> np.ndarray:
    """Decode an uncompressed bitmap into an ``(h, w, 3)`` uint8 array.

    Parameters
    ----------
    data : bytes
        Whole file contents.
    fmt : {"BMP24", "PPM_P6", "PGM_P5"}, optional
        Format of ``data``; sniffed from the magic number when omitted.

    Returns
    -------
    numpy.ndarray
        RGB raster with rows in top-to-bottom order. PGM files are
        replicated into three identical channels.
    """
    if not data:
        raise ImageDecodeError("empty file")
    if fmt is None:
        fmt = sniff_format(data)
    if fmt == BMP24:
        return _decode_bmp(data)
    if fmt in (PPM_P6, PGM_P5):
        return _decode_pnm(data, fmt)
    raise ImageDecodeError("unsupported format %r" % (fmt,))


def load_image(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    return decode_image(data)


def _pnm_tokens(data: bytes, count: int):
    """Read ``count`` whitespace separated header tokens, skipping comments."""
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        if pos >= n:
            raise ImageDecodeError("truncated header")
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    if pos >= n or not data[pos:pos + 1].isspace():
        raise ImageDecodeError("truncated header")
    return tokens, pos + 1


def _decode_pnm(data: bytes, fmt: str) -> np.ndarray:
    magic = b"P6" if fmt == PPM_P6 else b"P5"
    tokens, offset = _pnm_tokens(data, 4)
    if tokens[0] != magic:
        raise ImageDecodeError("bad magic %r, expected %r" % (tokens[0], magic))
    fields = {}
    for name, tok in zip(("width", "height", "maxval"), tokens[1:]):
        try:
            fields[name] = int(tok)
        except ValueError:
            raise ImageDecodeError("malformed %s %r" % (name, tok)) from None
        if fields[name] <= 0:
            raise ImageDecodeError("malformed %s %r" % (name, tok))
    if fields["maxval"] > 255:
        raise ImageDecodeError("unsupported maxval %d" % fields["maxval"])
    w, h = fields["width"], fields["height"]
    channels = 3 if fmt == PPM_P6 else 1
    need = w * h * channels
    raster = data[offset:offset + need]
    if len(raster) < need:
        raise ImageDecodeError(
            "truncated pixel data: expected %d bytes, got %d" % (need, len(raster)))
    arr = np.frombuffer(raster, dtype=np.uint8)
    if fields["maxval"] != 255:
        arr = round_half_away(arr * (255.0 / fields["maxval"])).astype(np.uint8)
    if channels == 1:
        return np.repeat(arr.reshape(h, w, 1), 3, axis=2)
    return arr.reshape(h, w, 3).copy()


def _decode_bmp(data: bytes) -> np.ndarray:
    if len(data) < 54:
        raise ImageDecodeError("truncated header")
    if data[:2] != b"BM":
        raise ImageDecodeError("bad magic %r" % data[:2])
    pixel_offset = struct.unpack_from("<I", data, 10)[0]
    dib_size = struct.unpack_from("<I", data, 14)[0]
    if dib_size < 40:
        raise ImageDecodeError("unsupported DIB header size %d" % dib_size)
    width, height, planes, bpp, compression = struct.unpack_from("<iiHHI", data, 18)
    if width <= 0:
        raise ImageDecodeError("malformed width %d" % width)
    if height == 0:
        raise ImageDecodeError("malformed height 0")
    if planes != 1:
        raise ImageDecodeError("malformed planes %d" % planes)
    if bpp != 24:
        raise ImageDecodeError("unsupported bit depth %d" % bpp)
    if compression != 0:
        raise ImageDecodeError("unsupported compression %d" % compression)
    top_down = height < 0
    h = abs(height)
    stride = (width * 3 + 3) & ~3
    need = stride * h
    raster = data[pixel_offset:pixel_offset + need]
    if len(raster) < need:
        raise ImageDecodeError(
            "truncated pixel data: expected %d bytes, got %d" % (need, len(raster)))
    rows = np.frombuffer(raster, dtype=np.uint8).reshape(h, stride)[:, :width * 3]
    bgr = rows.reshape(h, width, 3)
    if not top_down:
        bgr = bgr[::-1]
    return np.ascontiguousarray(bgr[:, :, ::-1])


def encode_ppm(img: np.ndarray) -> bytes:
    img = _check_rgb(img)
    h, w, _ = img.shape
    return b"P6\n%d %d\n255\n" % (w, h) + img.tobytes()


def encode_pgm(gray: np.ndarray) -> bytes:
    gray = np.asarray(gray, dtype=np.uint8)
    h, w = gray.shape
    return b"P5\n%d %d\n255\n" % (w, h) + gray.tobytes()


def encode_bmp(img: np.ndarray, top_down: bool = False) -> bytes:
    img = _check_rgb(img)
    h, w, _ = img.shape
    stride = (w * 3 + 3) & ~3
    rows = np.zeros((h, stride), dtype=np.uint8)
    rows[:, :w * 3] = img[:, :, ::-1].reshape(h, w * 3)
    if not top_down:
        rows = rows[::-1]
    pixels = rows.tobytes()
    header = struct.pack("<2sIHHI", b"BM", 54 + len(pixels), 0, 0, 54)
    dib = struct.pack("<IiiHHIIiiII", 40, w, -h if top_down else h, 1, 24, 0,
                      len(pixels), 2835, 2835, 0, 0)
    return header + dib + pixels


def save_image(path: str | os.PathLike, img: np.ndarray) -> None:
    """Write ``img`` as BMP or PPM depending on the file suffix."""
    suffix = os.fspath(path).lower().rsplit(".", 1)[-1]
    if suffix == "bmp":
        data = encode_bmp(img)
    elif suffix == "ppm":
        data = encode_ppm(img)
    else:
        raise ValueError("unsupported output suffix %r" % suffix)
    with open(path, "wb") as fh:
        fh.write(data)


def _check_rgb(img) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("expected an (h, w, 3) RGB array, got shape %s" % (img.shape,))
    if img.dtype != np.uint8:
        raise ValueError("expected uint8 data, got %s" % img.dtype)
    return img


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """BT.601 luma, rounded half away from zero."""
    img = _check_rgb(img).astype(np.float64)
    wr, wg, wb = GRAY_WEIGHTS
    y = wr * img[..., 0] + wg * img[..., 1] + wb * img[..., 2]
    return np.clip(round_half_away(y), 0, 255).astype(np.uint8)


def downsample_nn(img: np.ndarray, factor: int = 2, min_size: int = 1) -> np.ndarray:
    """Keep every ``factor``-th pixel starting at the top-left corner.

    Works on gray and RGB arrays alike. Output size is
    ``(h // factor, w // factor)``; a result with either side below
    ``min_size`` raises :class:`ImageSizeError`.
    """
    if factor < 1:
        raise ValueError("factor must be >= 1, got %r" % (factor,))
    img = np.asarray(img)
    h, w = img.shape[:2]
    oh, ow = h // factor, w // factor
    if oh < min_size or ow < min_size:
        raise ImageSizeError(
            "downsampled size %dx%d is below the %dx%d minimum" % (ow, oh, min_size, min_size))
    return np.ascontiguousarray(img[:oh * factor:factor, :ow * factor:factor])
