"""Escape-time rendering of orbit behaviour over a pixel window.

Each pixel seeds an orbit at its center; the buffer records the 1-based step
at which the orbit first left the escape disk, or 0 if it survived every
iteration.  Rows are partitioned into contiguous bands that may run on a
thread pool, but each band writes a disjoint row range of one preallocated
array, so the assembled buffer is identical for every thread count.
"""

from __future__ import annotations

import hashlib
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .expr import EntireMap

MAX_PIXELS = 8192 * 8192


@dataclass(frozen=True)
class RenderResult:
    """Escape-time buffer plus the configuration that produced it."""

    buffer: np.ndarray  # (height, width) uint32, 0 = never escaped
    window: tuple[float, float, float, float]
    iterations: int
    escape_radius: float

    @property
    def height(self) -> int:
        return int(self.buffer.shape[0])

    @property
    def width(self) -> int:
        return int(self.buffer.shape[1])

    def buffer_hash(self) -> str:
        """sha256 over the raw little-endian pixel words, shape-tagged."""
        h = hashlib.sha256()
        h.update(f"{self.height}x{self.width}:".encode())
        h.update(np.ascontiguousarray(self.buffer, dtype="<u4").tobytes())
        return h.hexdigest()

    def escaped_fraction(self) -> float:
        return float(np.count_nonzero(self.buffer)) / self.buffer.size

    def to_grayscale(self) -> np.ndarray:
        """8-bit view: survivors black, earlier escapes brighter."""
        out = np.zeros(self.buffer.shape, dtype=np.uint8)
        esc = self.buffer > 0
        if esc.any():
            span = max(1, self.iterations - 1)
            steps = self.buffer[esc].astype(np.int64) - 1
            out[esc] = (255 - (230 * steps) // span).astype(np.uint8)
        return out

    def png_bytes(self) -> bytes:
        from PIL import Image

        img = Image.fromarray(self.to_grayscale(), mode="L")
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return buf.getvalue()

    def save_png(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.png_bytes())

    def to_json(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "window": list(self.window),
            "iterations": self.iterations,
            "escape_radius": self.escape_radius,
            "buffer_hash": self.buffer_hash(),
            "escaped_fraction": self.escaped_fraction(),
        }


def _normalize_resolution(resolution) -> tuple[int, int]:
    if isinstance(resolution, (int, np.integer)):
        width = height = int(resolution)
    else:
        width, height = (int(v) for v in resolution)
    if width < 1 or height < 1:
        raise ValueError(f"resolution must be positive, got {width}x{height}")
    if width * height > MAX_PIXELS:
        raise ValueError(
            f"resolution {width}x{height} exceeds the {MAX_PIXELS} pixel cap"
        )
    return width, height


def render_escape(
    f: EntireMap,
    window,
    iterations: int,
    escape_radius: float,
    resolution,
    threads: int = 1,
) -> RenderResult:
    """Render first escape times of f over a rectangular window.

    window is (xmin, xmax, ymin, ymax) in the dynamical plane; resolution is
    a pixel count per side or a (width, height) pair, capped at 8192^2 total.
    Row 0 of the buffer is the top of the window.
    """
    xmin, xmax, ymin, ymax = (float(v) for v in window)
    if not (xmax > xmin and ymax > ymin):
        raise ValueError(f"window {window} is empty")
    iterations = int(iterations)
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    escape_radius = float(escape_radius)
    if not escape_radius > 0.0:
        raise ValueError(f"escape_radius must be positive, got {escape_radius}")
    width, height = _normalize_resolution(resolution)
    threads = max(1, int(threads))

    # pixel centers, top row first
    xs = xmin + (np.arange(width) + 0.5) * ((xmax - xmin) / width)
    ys = ymax - (np.arange(height) + 0.5) * ((ymax - ymin) / height)
    buffer = np.empty((height, width), dtype=np.uint32)

    def run_band(r0: int, r1: int) -> None:
        seeds = (xs[None, :] + 1j * ys[r0:r1, None]).ravel()
        counts = _kernels.escape_counts(f, seeds, iterations, escape_radius)
        buffer[r0:r1] = counts.reshape(r1 - r0, width)

    if threads == 1 or height == 1:
        run_band(0, height)
    else:
        n_bands = min(threads * 4, height)
        edges = np.linspace(0, height, n_bands + 1, dtype=int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(run_band, int(a), int(b))
                for a, b in zip(edges[:-1], edges[1:])
                if b > a
            ]
            for fut in futures:
                fut.result()

    return RenderResult(
        buffer=buffer,
        window=(xmin, xmax, ymin, ymax),
        iterations=iterations,
        escape_radius=escape_radius,
    )
