"""Procedural scalar terrain sampled on demand.

The map is a multi-octave value-noise field: lattice corners get pseudo-random
heights from an integer hash of (seed, cell), and samples between corners are
blended with a smoothstep weight.  Everything is a pure function of
(map_seed, x, y), so any view rasterized anywhere, at any time, over the same
seed sees exactly the same terrain — the property every reproducibility test
in this package leans on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ViewArea, view_polygon

DEFAULT_WORLD_SIDE = 100.0

_MASK64 = 0xFFFFFFFFFFFFFFFF
_PRIME_X = 0x9E3779B97F4A7C15
_PRIME_Y = 0xC2B2AE3D27D4EB4F
_PRIME_S = 0xD6E8FEB86659FD93


def _mix(h: np.ndarray) -> np.ndarray:
    """Finalizing bit mixer (splitmix-style) over uint64 arrays."""
    h = h.astype(np.uint64, copy=True)
    h ^= h >> np.uint64(30)
    h *= np.uint64(0xBF58476D1CE4E5B9)
    h ^= h >> np.uint64(27)
    h *= np.uint64(0x94D049BB133111EB)
    h ^= h >> np.uint64(31)
    return h


def _corner_values(seed: int, xi: np.ndarray, yi: np.ndarray) -> np.ndarray:
    """Hash lattice corners to floats in [0, 1)."""
    with np.errstate(over="ignore"):      # modular wraparound is the design
        h = (xi * np.uint64(_PRIME_X)
             + yi * np.uint64(_PRIME_Y)
             + np.uint64(seed & _MASK64) * np.uint64(_PRIME_S))
        mixed = _mix(h)
    # top 53 bits -> exact double in [0, 1)
    return (mixed >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def _value_noise(seed: int, lx: np.ndarray, ly: np.ndarray) -> np.ndarray:
    """Smoothstep-interpolated lattice noise at lattice coordinates (lx, ly)."""
    x0 = np.floor(lx)
    y0 = np.floor(ly)
    fx = lx - x0
    fy = ly - y0
    sx = fx * fx * (3.0 - 2.0 * fx)
    sy = fy * fy * (3.0 - 2.0 * fy)
    xi = x0.astype(np.int64).astype(np.uint64)
    yi = y0.astype(np.int64).astype(np.uint64)
    one = np.uint64(1)
    v00 = _corner_values(seed, xi, yi)
    v10 = _corner_values(seed, xi + one, yi)
    v01 = _corner_values(seed, xi, yi + one)
    v11 = _corner_values(seed, xi + one, yi + one)
    top = v00 + (v10 - v00) * sx
    bot = v01 + (v11 - v01) * sx
    return top + (bot - top) * sy


@dataclass(frozen=True)
class WorldMap:
    """A deterministic scalar field over the square [0, world_side]^2."""

    map_seed: int
    world_side: float = DEFAULT_WORLD_SIDE
    octaves: int = 3
    base_cells: float = 4.0   # lattice cells spanning the world at octave 0

    def __post_init__(self):
        if self.world_side <= 0.0:
            raise ValueError(f"world_side must be positive, got {self.world_side}")
        if self.octaves < 1:
            raise ValueError("octaves must be >= 1")

    def sample(self, x, y):
        """Field value(s) in [0, 1] at world coordinates; accepts arrays."""
        xa = np.asarray(x, dtype=np.float64)
        ya = np.asarray(y, dtype=np.float64)
        total = np.zeros(np.broadcast(xa, ya).shape, dtype=np.float64)
        amp_sum = 0.0
        amp = 1.0
        for k in range(self.octaves):
            freq = self.base_cells * (2.0 ** k) / self.world_side
            total += amp * _value_noise(self.map_seed + k, xa * freq, ya * freq)
            amp_sum += amp
            amp *= 0.5
        out = total / amp_sum
        if np.isscalar(x) and np.isscalar(y):
            return float(out)
        return out

    def in_bounds(self, x: float, y: float, pad: float = 0.0) -> bool:
        return (pad <= x <= self.world_side - pad
                and pad <= y <= self.world_side - pad)

    def view_in_bounds(self, view: ViewArea, tol: float = 1e-9) -> bool:
        """True iff every corner of the rotated view lies inside the world."""
        return all(
            -tol <= cx <= self.world_side + tol
            and -tol <= cy <= self.world_side + tol
            for cx, cy in view_polygon(view).vertices
        )

    def rasterize(self, view: ViewArea, resolution: int) -> np.ndarray:
        """Sample an R-by-R pixel grid over the rotated view.

        Row 0 is the far edge of the view (the direction the drone faces when
        the view rotation equals its yaw); columns run left-to-right in the
        view frame.  Pixel centers sit at ((j+0.5)/R - 0.5, 0.5 - (i+0.5)/R)
        in view-relative units of one side length.
        """
        if resolution < 1:
            raise ValueError("resolution must be >= 1")
        if not self.view_in_bounds(view):
            raise ValueError(
                f"view at ({view.center_x}, {view.center_y}) side {view.side} "
                f"rotation {view.rotation} extends outside the world square")
        r = resolution
        idx = (np.arange(r, dtype=np.float64) + 0.5) / r - 0.5
        u = idx[np.newaxis, :]          # column offset, rightward
        v = (-idx)[:, np.newaxis]       # row offset, forward at row 0
        c = math.cos(view.rotation)
        s = math.sin(view.rotation)
        du = u * view.side
        dv = v * view.side
        # image-up is the facing direction (c, s); image-right is (s, -c)
        x = view.center_x + s * du + c * dv   # (R, R) by broadcasting
        y = view.center_y - c * du + s * dv
        return self.sample(x, y)
