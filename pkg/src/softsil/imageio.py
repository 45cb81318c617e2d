"""Image writers: binary PGM (P5) and 8-bit grayscale PNG.

Values are quantized with round(v * 255).  The PNG encoder is a minimal
stdlib-only implementation (one IDAT chunk, no filtering beyond filter
type 0 per scanline).
"""

import struct
import zlib

import numpy as np


def quantize(image):
    """Image -> uint8 array via round(v * 255)."""
    vals = np.clip(np.asarray(image.values, dtype=np.float64), 0.0, 1.0)
    return np.round(vals * 255.0).astype(np.uint8)


def write_pgm(image, path):
    data = quantize(image)
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def _png_chunk(tag, payload):
    chunk = tag + payload
    return (struct.pack(">I", len(payload)) + chunk
            + struct.pack(">I", zlib.crc32(chunk) & 0xFFFFFFFF))


def write_png(image, path):
    data = quantize(image)
    height, width = data.shape
    raw = b"".join(b"\x00" + data[row].tobytes() for row in range(height))
    ihdr = struct.pack(">IIBBBBB", width, height, 8, 0, 0, 0, 0)
    with open(path, "wb") as fh:
        fh.write(b"\x89PNG\r\n\x1a\n")
        fh.write(_png_chunk(b"IHDR", ihdr))
        fh.write(_png_chunk(b"IDAT", zlib.compress(raw, 9)))
        fh.write(_png_chunk(b"IEND", b""))
