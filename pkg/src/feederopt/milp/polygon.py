"""Outer polygonal approximation of ``x**2 + y**2 <= r**2``."""

from __future__ import annotations

import math

from .program import LE, MathProgram, ProgramError

DEFAULT_SEGMENTS = 12
# Geometric minimum for a bounded polygon; the OPF builder asks for >= 8.
MIN_SEGMENTS = 3


def overshoot(segments: int) -> float:
    """Worst-case radius inflation of the circumscribing polygon."""
    return 1.0 / math.cos(math.pi / segments)


def add_circle_constraint(
    prog: MathProgram,
    x_var: int,
    y_var: int,
    radius: float,
    segments: int = DEFAULT_SEGMENTS,
    name: str = "circle",
) -> list[int]:
    """Add the tangent half-planes ``cos(t_k) x + sin(t_k) y <= radius``.

    ``t_k = 2 pi k / segments``.  Every point of the disc stays feasible and
    any feasible point has norm at most ``radius * overshoot(segments)``.
    """
    if not radius > 0.0:
        raise ProgramError(f"{name}: radius must be positive, got {radius}")
    if segments < MIN_SEGMENTS:
        raise ProgramError(f"{name}: need at least {MIN_SEGMENTS} segments, got {segments}")
    ids = []
    for k in range(segments):
        t = 2.0 * math.pi * k / segments
        cx, cy = math.cos(t), math.sin(t)
        # exact zeros keep the rows sparse at the axis-aligned tangents
        cx = 0.0 if abs(cx) < 1e-15 else cx
        cy = 0.0 if abs(cy) < 1e-15 else cy
        ids.append(prog.add_constraint({x_var: cx, y_var: cy}, LE, radius, f"{name}_{k}"))
    return ids
