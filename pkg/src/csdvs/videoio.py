"""Frame and event I/O: PGM sequences, log transform, event files, renders.

Event files
-----------
CSV: header ``t_us,x,y,p`` then one event per line, ``p`` is 1 (ON) or -1 (OFF).

BIN: a 16-byte little-endian header ``b"CSDV", u16 version=1, u16 width,
u16 height, u32 reserved, u16 reserved`` followed by packed 13-byte records
``(u64 t_us, u16 x, u16 y, i8 p)``.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from csdvs.errors import ConfigError, FormatError

LOG_OFFSET = 0.02

EVENT_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "i1")])
ON, OFF = 1, -1

BIN_MAGIC = b"CSDV"
BIN_VERSION = 1
_BIN_HEADER = struct.Struct("<4sHHHIH")
CSV_HEADER = "t_us,x,y,p"
TIMESTAMPS_FILE = "timestamps.txt"


@dataclass
class FrameSequence:
    """Grayscale frames ``(n, height, width)`` with luminance in [0, 1]."""

    frames: np.ndarray
    timestamps_us: np.ndarray

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=float)
        if self.frames.ndim == 2:
            self.frames = self.frames[None]
        if self.frames.ndim != 3:
            raise FormatError(f"frames must be (n, height, width), got {self.frames.shape}")
        self.timestamps_us = np.asarray(self.timestamps_us, dtype=np.int64)
        if self.timestamps_us.shape != (len(self.frames),):
            raise FormatError("need exactly one timestamp per frame")
        if np.any(np.diff(self.timestamps_us) <= 0):
            raise FormatError("frame timestamps must be strictly increasing")

    @classmethod
    def from_fps(cls, frames, fps):
        if not fps > 0:
            raise ConfigError(f"fps must be positive, got {fps}")
        return cls(frames, frame_timestamps_us(len(frames), fps))

    @classmethod
    def empty(cls, width, height):
        return cls(np.zeros((0, height, width)), np.zeros(0, dtype=np.int64))

    def __len__(self):
        return len(self.frames)

    @property
    def width(self):
        return self.frames.shape[2]

    @property
    def height(self):
        return self.frames.shape[1]


@dataclass
class EventStream:
    events: np.ndarray
    width: int
    height: int
    duration_us: int = 0

    def __post_init__(self):
        self.events = np.asarray(self.events, dtype=EVENT_DTYPE)

    def __len__(self):
        return len(self.events)

    def validate(self):
        ev = self.events
        if np.any(np.diff(ev["t"].astype(np.int64)) < 0):
            raise FormatError("event timestamps must be non-decreasing")
        if len(ev) and (ev["x"].max() >= self.width or ev["y"].max() >= self.height):
            raise FormatError("event coordinates outside the sensor")
        if not np.all((ev["p"] == ON) | (ev["p"] == OFF)):
            raise FormatError("event polarity must be 1 or -1")
        return self


def frame_timestamps_us(n, fps):
    """Timestamps ``k/fps`` seconds, in integer microseconds."""
    return np.round(np.arange(n) * (1e6 / fps)).astype(np.int64)


def sort_events(events):
    """Order by timestamp, then y, then x, then polarity."""
    order = np.lexsort((events["p"], events["x"], events["y"], events["t"]))
    return events[order]


# --------------------------------------------------------------------------
# frames


def log_transform(frame):
    """Natural log of luminance with a fixed additive floor of 0.02."""
    return np.log(np.asarray(frame, dtype=float) + LOG_OFFSET)


def _read_token(buf, pos):
    n = len(buf)
    while pos < n:
        c = buf[pos:pos + 1]
        if c == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise FormatError("truncated PGM header")
    return buf[start:pos], pos


def parse_pgm(buf, name="<bytes>"):
    """Parse one or more concatenated binary (P5) 8-bit images.

    Returns a list of ``uint8`` arrays.
    """
    images = []
    pos = 0
    while pos < len(buf) and buf[pos:].strip():
        magic, pos = _read_token(buf, pos)
        if magic != b"P5":
            raise FormatError(f"{name}: not a binary PGM (magic {magic!r})")
        try:
            w, pos = _read_token(buf, pos)
            h, pos = _read_token(buf, pos)
            maxval, pos = _read_token(buf, pos)
            w, h, maxval = int(w), int(h), int(maxval)
        except ValueError as exc:
            raise FormatError(f"{name}: bad PGM header") from exc
        if not 0 < maxval <= 255:
            raise FormatError(f"{name}: only 8-bit PGM supported (maxval {maxval})")
        pos += 1  # single whitespace before raster
        end = pos + w * h
        if end > len(buf):
            raise FormatError(f"{name}: truncated PGM raster")
        img = np.frombuffer(buf, dtype=np.uint8, count=w * h, offset=pos).reshape(h, w)
        images.append((img, maxval))
        pos = end
    if not images:
        raise FormatError(f"{name}: no image data")
    return images


def pgm_bytes(img):
    img = np.asarray(img, dtype=np.uint8)
    h, w = img.shape
    return b"P5\n%d %d\n255\n" % (w, h) + img.tobytes()


def write_pgm(path, img):
    path = Path(path)
    try:
        path.write_bytes(pgm_bytes(img))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def read_pgm(path):
    """Single-image PGM as a ``uint8`` array."""
    path = Path(path)
    imgs = parse_pgm(_read_bytes(path), str(path))
    return imgs[0][0]


def _read_bytes(path):
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror}") from exc


def to_dn(frame):
    return np.clip(np.round(np.asarray(frame) * 255.0), 0, 255).astype(np.uint8)


def load_frames(path, fps=None):
    """Load a directory of PGM frames, or one multi-image PGM file.

    Frames in a directory are taken in lexicographic filename order.  A
    ``timestamps.txt`` next to the frames (one integer microsecond value per
    line) overrides ``fps``.
    """
    path = Path(path)
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix.lower() == ".pgm" and p.is_file())
        images = []
        for f in files:
            images.extend(parse_pgm(_read_bytes(f), str(f)))
        ts_file = path / TIMESTAMPS_FILE
    elif path.is_file():
        images = parse_pgm(_read_bytes(path), str(path))
        ts_file = path.with_name(TIMESTAMPS_FILE)
    else:
        raise FileNotFoundError(f"no such frame source: {path}")
    shapes = {img.shape for img, _ in images}
    if len(shapes) > 1:
        raise FormatError(f"{path}: frames have mixed dimensions {sorted(shapes)}")
    if images:
        frames = np.stack([img / float(maxval) for img, maxval in images])
    else:
        frames = np.zeros((0, 0, 0))
    if ts_file.is_file():
        ts = np.array([int(s) for s in ts_file.read_text().split()], dtype=np.int64)
        if len(ts) != len(frames):
            raise FormatError(f"{ts_file}: {len(ts)} timestamps for {len(frames)} frames")
        return FrameSequence(frames, ts)
    if fps is None:
        raise ConfigError(f"{path}: no {TIMESTAMPS_FILE}; fps is required")
    return FrameSequence.from_fps(frames, fps)


def save_frames(seq: FrameSequence, directory, prefix="frame"):
    """Write ``prefix_00000.pgm ...`` plus ``timestamps.txt``; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    digits = max(5, len(str(max(len(seq) - 1, 0))))
    paths = []
    for k, frame in enumerate(seq.frames):
        p = directory / f"{prefix}_{k:0{digits}d}.pgm"
        write_pgm(p, to_dn(frame))
        paths.append(p)
    (directory / TIMESTAMPS_FILE).write_text("".join(f"{int(t)}\n" for t in seq.timestamps_us))
    return paths


# --------------------------------------------------------------------------
# events


def write_events(stream: EventStream, path, format=None):
    """Write ``stream`` as CSV or BIN (inferred from the suffix if not given)."""
    path = Path(path)
    fmt = format or path.suffix.lstrip(".").lower()
    ev = stream.events
    try:
        if fmt == "csv":
            with open(path, "w", newline="\n") as fh:
                fh.write(CSV_HEADER + "\n")
                if len(ev):
                    rows = np.column_stack([ev["t"].astype(np.int64), ev["x"], ev["y"], ev["p"]])
                    np.savetxt(fh, rows, fmt="%d", delimiter=",")
        elif fmt == "bin":
            if max(stream.width, stream.height) > 0xFFFF:
                raise ConfigError("sensor too large for the BIN format")
            with open(path, "wb") as fh:
                fh.write(_BIN_HEADER.pack(BIN_MAGIC, BIN_VERSION, stream.width, stream.height, 0, 0))
                fh.write(np.ascontiguousarray(ev, dtype=EVENT_DTYPE).tobytes())
        else:
            raise ConfigError(f"unknown event format {fmt!r} (csv or bin)")
    except OSError as exc:
        raise OSError(f"cannot write events to {path}: {exc.strerror}") from exc


def read_events(path, width=None, height=None, format=None):
    """Inverse of :func:`write_events`.

    CSV files carry no geometry: ``width``/``height`` default to the
    bounding box of the events.
    """
    path = Path(path)
    fmt = format or path.suffix.lstrip(".").lower()
    raw = _read_bytes(path)
    if fmt == "bin":
        if len(raw) < _BIN_HEADER.size:
            raise FormatError(f"{path}: truncated header")
        magic, version, w, h, _, _ = _BIN_HEADER.unpack_from(raw)
        if magic != BIN_MAGIC or version != BIN_VERSION:
            raise FormatError(f"{path}: not a CSDV v{BIN_VERSION} event file")
        body = raw[_BIN_HEADER.size:]
        if len(body) % EVENT_DTYPE.itemsize:
            raise FormatError(f"{path}: truncated event record")
        ev = np.frombuffer(body, dtype=EVENT_DTYPE).copy()
        width, height = w, h
    elif fmt == "csv":
        lines = raw.decode("ascii").splitlines()
        if not lines or lines[0].strip() != CSV_HEADER:
            raise FormatError(f"{path}: missing header {CSV_HEADER!r}")
        ev = np.zeros(len(lines) - 1, dtype=EVENT_DTYPE)
        if len(ev):
            try:
                rows = np.array([ln.split(",") for ln in lines[1:]], dtype=np.int64)
            except ValueError as exc:
                raise FormatError(f"{path}: malformed event line") from exc
            ev["t"], ev["x"], ev["y"], ev["p"] = rows.T
        if width is None:
            width = int(ev["x"].max()) + 1 if len(ev) else 0
        if height is None:
            height = int(ev["y"].max()) + 1 if len(ev) else 0
    else:
        raise ConfigError(f"unknown event format {fmt!r} (csv or bin)")
    duration = int(ev["t"].max()) if len(ev) else 0
    return EventStream(ev, int(width), int(height), duration).validate()


# --------------------------------------------------------------------------
# accumulation renders


def accumulate(stream: EventStream, window_us, n_windows=None):
    """Net ON-minus-OFF counts per window, as 8-bit gray images.

    Pixel value ``128 + 32 * clamp(on - off, -3, 3)``.
    """
    if not window_us > 0:
        raise ConfigError(f"window must be positive, got {window_us}")
    ev = stream.events
    if n_windows is None:
        span = max(stream.duration_us, int(ev["t"].max()) + 1 if len(ev) else 0)
        n_windows = max(1, -(-span // int(window_us)))
    net = np.zeros((n_windows, stream.height, stream.width), dtype=np.int64)
    if len(ev):
        k = (ev["t"] // np.uint64(window_us)).astype(np.int64)
        keep = k < n_windows
        np.add.at(net, (k[keep], ev["y"][keep], ev["x"][keep]), ev["p"][keep].astype(np.int64))
    return (128 + 32 * np.clip(net, -3, 3)).astype(np.uint8)


def render_accumulation(stream: EventStream, window_us, path, prefix="accum"):
    """Write one PGM per window into directory ``path``; returns the paths."""
    imgs = accumulate(stream, window_us)
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    out = []
    for k, img in enumerate(imgs):
        p = path / f"{prefix}_{k:05d}.pgm"
        write_pgm(p, img)
        out.append(p)
    return out


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return Path(path)
