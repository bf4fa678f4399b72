"""Continuous-field scene engine: reconstruct, decompose, manipulate, render.

A scene is a field mapping 3D points to volume density, color and an
(H+1)-dim object code (H solid-object slots plus one empty-space slot).
Fields come in two flavours: analytic oracles built from solid primitives
(`scenefield.oracle`) and trainable neural fields (`scenefield.network`,
`scenefield.training`).  Both are rendered by the same volume renderer
(`scenefield.render`) and edited by the same inverse-query manipulator
(`scenefield.manipulate`).
"""

__version__ = "0.1.0"

from scenefield.geometry import (
    Camera,
    Ray,
    RaySamples,
    SimilarityTransform,
    generate_ray,
    hierarchical_resample,
    stratified_samples,
)
from scenefield.oracle import AnalyticScene, FieldBatch, FieldSample, Primitive
from scenefield.render import RenderOutput, render_pixel, render_rays

__all__ = [
    "AnalyticScene",
    "Camera",
    "FieldBatch",
    "FieldSample",
    "Primitive",
    "Ray",
    "RaySamples",
    "RenderOutput",
    "SimilarityTransform",
    "generate_ray",
    "hierarchical_resample",
    "render_pixel",
    "render_rays",
    "stratified_samples",
]
