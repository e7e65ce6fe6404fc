"""Sketch constructions and adversarial procedures."""

from .sketches import (
    CountSketch,
    GaussianSketch,
    HadamardBlock,
    OSNAP,
    SketchConstruction,
)

__all__ = [
    "CountSketch",
    "GaussianSketch",
    "HadamardBlock",
    "OSNAP",
    "SketchConstruction",
]
