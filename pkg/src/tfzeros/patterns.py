"""Planar point patterns observed in rectangular windows."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Window:
    """Rectangle ``[x_min, x_max] x [y_min, y_max]`` of the complex plane."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError(f"window {self} has no area")

    @classmethod
    def square(cls, half_side: float, center: complex = 0j) -> "Window":
        c = complex(center)
        return cls(c.real - half_side, c.real + half_side, c.imag - half_side, c.imag + half_side)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    @property
    def corners(self) -> np.ndarray:
        return np.array(
            [
                complex(self.x_min, self.y_min),
                complex(self.x_max, self.y_min),
                complex(self.x_min, self.y_max),
                complex(self.x_max, self.y_max),
            ]
        )

    def contains(self, z, strict: bool = False) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if strict:
            return (
                (z.real > self.x_min) & (z.real < self.x_max)
                & (z.imag > self.y_min) & (z.imag < self.y_max)
            )
        return (
            (z.real >= self.x_min) & (z.real <= self.x_max)
            & (z.imag >= self.y_min) & (z.imag <= self.y_max)
        )

    def boundary_distance(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return np.minimum.reduce(
            [z.real - self.x_min, self.x_max - z.real, z.imag - self.y_min, self.y_max - z.imag]
        )

    def intersect(self, other: "Window") -> "Window":
        return Window(
            max(self.x_min, other.x_min),
            min(self.x_max, other.x_max),
            max(self.y_min, other.y_min),
            min(self.y_max, other.y_max),
        )

    def translated(self, shift: complex) -> "Window":
        shift = complex(shift)
        return Window(
            self.x_min + shift.real, self.x_max + shift.real,
            self.y_min + shift.imag, self.y_max + shift.imag,
        )


@dataclass(frozen=True, eq=False)
class PointPattern:
    points: np.ndarray
    window: Window

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex).ravel()
        if not np.all(self.window.contains(pts)):
            raise ValueError("pattern has points outside its window")
        if len(np.unique(pts)) != len(pts):
            raise ValueError("pattern points must be distinct")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def intensity(self) -> float:
        """Points per unit area."""
        return len(self.points) / self.window.area

    @property
    def xy(self) -> np.ndarray:
        return np.column_stack([self.points.real, self.points.imag])

    def restrict(self, window: Window, strict: bool = False) -> "PointPattern":
        keep = window.contains(self.points, strict=strict)
        return PointPattern(self.points[keep], window)

    def translated(self, shift: complex) -> "PointPattern":
        return PointPattern(self.points + complex(shift), self.window.translated(shift))


def write_pattern_csv(path, pattern: PointPattern) -> None:
    w = pattern.window
    lines = [
        f"# window {w.x_min:.17g} {w.x_max:.17g} {w.y_min:.17g} {w.y_max:.17g}",
        "x,y",
    ]
    lines += [f"{z.real:.17g},{z.imag:.17g}" for z in pattern.points]
    Path(path).write_text("\n".join(lines) + "\n")


def read_pattern_csv(path) -> PointPattern:
    window = None
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts and parts[0] == "window":
                window = Window(*map(float, parts[1:5]))
            continue
        if line == "x,y":
            continue
        x, y = line.split(",")
        rows.append(complex(float(x), float(y)))
    if window is None:
        raise ValueError(f"{path}: missing '# window' line")
    return PointPattern(np.array(rows, dtype=complex), window)
