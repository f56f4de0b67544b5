"""Binary PGM (P5) read/write for 0/1 rasters, foreground stored as 255."""

import numpy as np


def write_pgm(path, pixels):
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise ValueError(f"write_pgm: expected 2-D raster, got shape {pixels.shape}")
    h, w = pixels.shape
    body = (pixels > 0).astype(np.uint8) * 255
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(body.tobytes())


def read_pgm(path):
    """Returns a 2-D uint8 array of {0,1}."""
    with open(path, "rb") as f:
        raw = f.read()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    if fields[0] != b"P5":
        raise ValueError(f"read_pgm: {path} is not a P5 file")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval > 255:
        raise ValueError(f"read_pgm: unsupported maxval {maxval}")
    pos += 1
    data = np.frombuffer(raw[pos : pos + w * h], dtype=np.uint8)
    if data.size != w * h:
        raise ValueError(f"read_pgm: {path} truncated")
    return (data.reshape(h, w) > 127).astype(np.uint8)
