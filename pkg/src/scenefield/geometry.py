"""Vectors, similarity transforms, pinhole cameras and along-ray sampling.

Conventions (fixed once, everything downstream inherits them):

* world frame is right-handed with +z up,
* camera frame looks along -z, +x right, +y up; a pixel (u, v) back-projects
  to the camera-space direction ((u-cx)/fx, -(v-cy)/fy, -1),
* pixel centers sit at half-integer coordinates, so pixel (i, j) of an image
  is sampled at u = i + 0.5, v = j + 0.5,
* distances are meters, directions unit-norm.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class DomainError(ValueError):
    """An argument violates an operation's stated precondition."""


def vec3(x: float, y: float, z: float) -> np.ndarray:
    return np.array([x, y, z], dtype=np.float64)


def normalize(v: np.ndarray) -> np.ndarray:
    """Unit-norm copy of `v` (last axis). Raises on (near-)zero vectors."""
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n < 1e-12):
        raise DomainError("cannot normalize zero-length vector")
    return v / n


@dataclass(frozen=True)
class SimilarityTransform:
    """p -> scale * rotation @ p + translation.

    `rotation` must be orthonormal with determinant +1; `scale` > 0.
    """

    rotation: np.ndarray
    translation: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        if self.scale <= 0:
            raise DomainError(f"scale must be positive, got {self.scale}")
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-8):
            raise DomainError("rotation is not orthonormal")
        if np.linalg.det(R) < 0:
            raise DomainError("rotation has negative determinant (reflection)")

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls(np.eye(3), np.zeros(3), 1.0)

    def apply(self, p: np.ndarray) -> np.ndarray:
        """Transform one point (3,) or a batch (..., 3)."""
        p = np.asarray(p, dtype=np.float64)
        return self.scale * (p @ self.rotation.T) + self.translation

    def inverse_point(self, p: np.ndarray) -> np.ndarray:
        """Pre-image of `p`: (1/scale) * R^T @ (p - translation)."""
        p = np.asarray(p, dtype=np.float64)
        return (p - self.translation) @ self.rotation / self.scale

    def inverted(self) -> "SimilarityTransform":
        inv_scale = 1.0 / self.scale
        inv_rot = self.rotation.T
        return SimilarityTransform(inv_rot, -inv_scale * (inv_rot @ self.translation), inv_scale)


def apply_similarity(T: SimilarityTransform, p: np.ndarray) -> np.ndarray:
    return T.apply(p)


def invert_similarity(T: SimilarityTransform) -> SimilarityTransform:
    return T.inverted()


def rotation_about_z(angle_rad: float) -> np.ndarray:
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class Camera:
    """Pinhole camera with a world-from-camera rigid pose (4x4)."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    pose: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self):
        object.__setattr__(self, "pose", np.asarray(self.pose, dtype=np.float64).reshape(4, 4))
        if self.fx <= 0 or self.fy <= 0:
            raise DomainError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise DomainError("principal point must lie inside the image")

    @property
    def center(self) -> np.ndarray:
        return self.pose[:3, 3]

    @property
    def rotation(self) -> np.ndarray:
        return self.pose[:3, :3]

    def to_json(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
            "pose": [list(map(float, row)) for row in self.pose],
        }

    @classmethod
    def from_json(cls, d: dict) -> "Camera":
        return cls(
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            width=int(d["width"]),
            height=int(d["height"]),
            pose=np.array(d["pose"], dtype=np.float64),
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=2)

    @classmethod
    def load(cls, path) -> "Camera":
        with open(path) as f:
            return cls.from_json(json.load(f))


def camera_with_fov(width: int, height: int, fov_deg: float = 50.0,
                    pose: np.ndarray | None = None) -> Camera:
    """Square-pixel camera whose horizontal field of view is `fov_deg`."""
    f = 0.5 * width / np.tan(0.5 * np.deg2rad(fov_deg))
    if pose is None:
        pose = np.eye(4)
    return Camera(fx=f, fy=f, cx=width / 2.0, cy=height / 2.0,
                  width=width, height=height, pose=pose)


def look_at_pose(eye: np.ndarray, target: np.ndarray,
                 up: np.ndarray = (0.0, 0.0, 1.0)) -> np.ndarray:
    """World-from-camera pose for a camera at `eye` looking at `target`."""
    eye = np.asarray(eye, dtype=np.float64)
    z = normalize(eye - np.asarray(target, dtype=np.float64))  # camera +z points backward
    x = normalize(np.cross(np.asarray(up, dtype=np.float64), z))
    y = np.cross(z, x)
    pose = np.eye(4)
    pose[:3, 0], pose[:3, 1], pose[:3, 2], pose[:3, 3] = x, y, z, eye
    return pose


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    t_near: float
    t_far: float

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64).reshape(3))
        d = np.asarray(self.direction, dtype=np.float64).reshape(3)
        object.__setattr__(self, "direction", d)
        if not (0 <= self.t_near < self.t_far):
            raise DomainError(f"need 0 <= t_near < t_far, got [{self.t_near}, {self.t_far}]")
        if abs(np.linalg.norm(d) - 1.0) > 1e-6:
            raise DomainError("ray direction must be unit-norm")

    def point_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        return self.origin + t[..., None] * self.direction


def generate_ray(camera: Camera, u: float, v: float,
                 t_near: float = 0.05, t_far: float = 10.0) -> Ray:
    """Back-project pixel coordinate (u, v) into a world-space ray."""
    if not (0 <= u < camera.width and 0 <= v < camera.height):
        raise DomainError(f"pixel ({u}, {v}) outside {camera.width}x{camera.height} image")
    d_cam = np.array([(u - camera.cx) / camera.fx, -(v - camera.cy) / camera.fy, -1.0])
    d_world = normalize(camera.rotation @ d_cam)
    return Ray(camera.center, d_world, t_near, t_far)


def pixel_rays(camera: Camera) -> tuple[np.ndarray, np.ndarray]:
    """Origins (N,3) and unit directions (N,3) for every pixel center, row-major."""
    j, i = np.meshgrid(np.arange(camera.height), np.arange(camera.width), indexing="ij")
    u = i.ravel() + 0.5
    v = j.ravel() + 0.5
    d_cam = np.stack([(u - camera.cx) / camera.fx,
                      -(v - camera.cy) / camera.fy,
                      -np.ones_like(u)], axis=-1)
    d_world = normalize(d_cam @ camera.rotation.T)
    origins = np.broadcast_to(camera.center, d_world.shape).copy()
    return origins, d_world


def project(camera: Camera, p: np.ndarray) -> tuple[float, float]:
    """Forward-project a world point to pixel coordinates (u, v).

    Inverse of `generate_ray` for points in front of the camera; used as the
    round-trip oracle in tests.
    """
    p_cam = camera.rotation.T @ (np.asarray(p, dtype=np.float64) - camera.center)
    if p_cam[2] >= 0:
        raise DomainError("point is behind the camera")
    u = camera.cx + camera.fx * (p_cam[0] / -p_cam[2])
    v = camera.cy - camera.fy * (p_cam[1] / -p_cam[2])
    return float(u), float(v)


@dataclass(frozen=True)
class RaySamples:
    """Strictly increasing sample distances along a ray plus inter-sample deltas.

    delta_k = d_{k+1} - d_k for k < K; the terminal delta is capped at
    (t_far - t_near) / K since there is no successor sample.
    """

    distances: np.ndarray
    deltas: np.ndarray
    t_near: float
    t_far: float

    def __post_init__(self):
        d = np.asarray(self.distances, dtype=np.float64)
        object.__setattr__(self, "distances", d)
        object.__setattr__(self, "deltas", np.asarray(self.deltas, dtype=np.float64))
        if d.ndim != 1 or d.size == 0:
            raise DomainError("need at least one sample distance")
        if np.any(np.diff(d) <= 0):
            raise DomainError("sample distances must strictly increase")
        if d[0] < self.t_near - 1e-12 or d[-1] > self.t_far + 1e-12:
            raise DomainError("sample distances outside [t_near, t_far]")

    def __len__(self) -> int:
        return self.distances.size


def _deltas(dists: np.ndarray, t_near, t_far) -> np.ndarray:
    """Deltas for (..., K) distance arrays, terminal delta = span / K.

    Interior diffs are clamped to a tiny positive value so that merged sample
    sets with coincident distances still satisfy `deltas > 0`.
    """
    K = dists.shape[-1]
    span = np.broadcast_to(np.asarray(t_far - t_near, dtype=np.float64), dists.shape[:-1])
    last = (span / K)[..., None]
    if K == 1:
        return last
    diffs = np.maximum(np.diff(dists, axis=-1), span[..., None] * 1e-15)
    return np.concatenate([diffs, last], axis=-1)


def stratified_distances(t_near, t_far, K: int, rng: np.random.Generator | None,
                         jitter: bool) -> np.ndarray:
    """One distance per equal-width bin of [t_near, t_far]; shape (..., K).

    Bin midpoints when jitter is off, uniform within each bin when on.
    `t_near`/`t_far` may be scalars or equal-shape arrays.
    """
    if K < 1:
        raise DomainError("sample count K must be >= 1")
    t_near = np.asarray(t_near, dtype=np.float64)
    t_far = np.asarray(t_far, dtype=np.float64)
    width = (t_far - t_near) / K
    if jitter:
        if rng is None:
            raise DomainError("jittered sampling needs an rng")
        frac = rng.random(t_near.shape + (K,))
    else:
        frac = np.full(t_near.shape + (K,), 0.5)
    return t_near[..., None] + (np.arange(K) + frac) * width[..., None]


def stratified_samples(ray: Ray, K: int, jitter: bool = False,
                       rng_seed: int = 0) -> RaySamples:
    rng = np.random.default_rng(rng_seed) if jitter else None
    d = stratified_distances(ray.t_near, ray.t_far, K, rng, jitter)
    return RaySamples(d, _deltas(d, ray.t_near, ray.t_far), ray.t_near, ray.t_far)


def resample_distances(t_near, t_far, K_bins: int, weights: np.ndarray,
                       M: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draws from the piecewise-constant pdf over the K stratified bins.

    `weights` has shape (..., K_bins); all-zero weight rows fall back to a
    uniform pdf. Returns (..., M) unsorted distances.
    """
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0):
        raise DomainError("weights must be non-negative")
    total = w.sum(axis=-1, keepdims=True)
    w = np.where(total > 0, w, 1.0)
    cdf = np.cumsum(w, axis=-1)
    cdf = cdf / cdf[..., -1:]
    u = rng.random(w.shape[:-1] + (M,))
    # cdf[k] is the mass up to and including bin k; one searchsorted over all
    # rows at once by shifting each row's cdf into a disjoint interval
    flat_cdf = cdf.reshape(-1, K_bins)
    flat_u = u.reshape(-1, M)
    rows = np.arange(flat_cdf.shape[0])[:, None]
    idx = np.searchsorted((flat_cdf + 2.0 * rows).ravel(),
                          (flat_u + 2.0 * rows).ravel(), side="right")
    idx = idx.reshape(flat_u.shape) - rows * K_bins
    idx = np.minimum(idx.reshape(u.shape), K_bins - 1)
    lo = np.concatenate([np.zeros_like(cdf[..., :1]), cdf[..., :-1]], axis=-1)
    mass = np.take_along_axis(cdf, idx, axis=-1) - np.take_along_axis(lo, idx, axis=-1)
    frac = (u - np.take_along_axis(lo, idx, axis=-1)) / np.maximum(mass, 1e-12)
    t_near = np.asarray(t_near, dtype=np.float64)
    t_far = np.asarray(t_far, dtype=np.float64)
    width = ((t_far - t_near) / K_bins)[..., None]
    return t_near[..., None] + (idx + frac) * width


def hierarchical_resample(coarse: RaySamples, weights: np.ndarray, M: int,
                          rng_seed: int = 0) -> RaySamples:
    """Draw M extra samples proportional to `weights`, merge with `coarse`, re-sort."""
    rng = np.random.default_rng(rng_seed)
    extra = resample_distances(coarse.t_near, coarse.t_far, len(coarse),
                               np.asarray(weights), M, rng)
    merged = np.sort(np.concatenate([coarse.distances, extra]))
    # duplicate distances would violate strict monotonicity; nudge them apart
    merged = _dedupe_sorted(merged, coarse.t_near, coarse.t_far)
    return RaySamples(merged, _deltas(merged, coarse.t_near, coarse.t_far),
                      coarse.t_near, coarse.t_far)


def _dedupe_sorted(d: np.ndarray, t_near: float, t_far: float) -> np.ndarray:
    eps = (t_far - t_near) * 1e-12
    for k in range(1, d.size):
        if d[k] <= d[k - 1]:
            d[k] = d[k - 1] + eps
    return np.minimum(d, t_far)
