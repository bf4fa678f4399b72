"""Analytic scenes of solid primitives with known density, albedo and object id.

These scenes play three roles: training-data generator, ground-truth field,
and closed-form oracle for the volume renderer and the manipulator.  Density
is piecewise constant, so per-ray transmittance integrals have exact
closed forms (`analytic_pixel`).

Object ids live in [1, H]; code vectors are (H+1)-dim with slot `object_id-1`
for solids and slot H reserved for empty space.  Overlapping primitives are
resolved by list order: the first-listed primitive owns the point.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from scenefield.geometry import DomainError, Ray, SimilarityTransform

DEFAULT_DENSITY = 40.0  # 1/m: near-opaque over 0.1 m, crisp toy surfaces


class UnsupportedShapeError(ValueError):
    """Requested transform cannot be represented in closed form."""


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).reshape(3))
        if self.radius <= 0:
            raise DomainError("sphere radius must be positive")

    def contains(self, p: np.ndarray) -> np.ndarray:
        d = np.asarray(p, dtype=np.float64) - self.center
        return np.einsum("...i,...i->...", d, d) <= self.radius**2

    def ray_interval(self, o: np.ndarray, d: np.ndarray):
        oc = o - self.center
        b = float(oc @ d)
        disc = b * b - (float(oc @ oc) - self.radius**2)
        if disc <= 0:
            return None
        s = np.sqrt(disc)
        return (-b - s, -b + s)


@dataclass(frozen=True)
class Box:
    box_min: np.ndarray
    box_max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.box_min, dtype=np.float64).reshape(3)
        hi = np.asarray(self.box_max, dtype=np.float64).reshape(3)
        object.__setattr__(self, "box_min", lo)
        object.__setattr__(self, "box_max", hi)
        if np.any(lo >= hi):
            raise DomainError("box min must be strictly below max componentwise")

    def contains(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64)
        return np.all((p >= self.box_min) & (p <= self.box_max), axis=-1)

    def ray_interval(self, o: np.ndarray, d: np.ndarray):
        t0, t1 = -np.inf, np.inf
        for a in range(3):
            if abs(d[a]) < 1e-12:
                if not (self.box_min[a] <= o[a] <= self.box_max[a]):
                    return None
                continue
            ta = (self.box_min[a] - o[a]) / d[a]
            tb = (self.box_max[a] - o[a]) / d[a]
            if ta > tb:
                ta, tb = tb, ta
            t0, t1 = max(t0, ta), min(t1, tb)
        if t0 >= t1:
            return None
        return (t0, t1)


@dataclass(frozen=True)
class HalfSpace:
    """Solid half-space {p : normal . p <= offset}; normal points out of the solid."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64).reshape(3)
        n = n / np.linalg.norm(n)
        object.__setattr__(self, "normal", n)

    def contains(self, p: np.ndarray) -> np.ndarray:
        return np.asarray(p, dtype=np.float64) @ self.normal <= self.offset

    def ray_interval(self, o: np.ndarray, d: np.ndarray):
        denom = float(self.normal @ d)
        s = self.offset - float(self.normal @ o)
        if abs(denom) < 1e-12:
            return (-np.inf, np.inf) if s >= 0 else None
        t_star = s / denom
        return (-np.inf, t_star) if denom > 0 else (t_star, np.inf)


Shape = Sphere | Box | HalfSpace


@dataclass(frozen=True)
class Primitive:
    shape: Shape
    density: float
    albedo: np.ndarray
    object_id: int

    def __post_init__(self):
        object.__setattr__(self, "albedo", np.asarray(self.albedo, dtype=np.float64).reshape(3))
        if self.density < 0:
            raise DomainError("density must be non-negative")
        if self.object_id < 1:
            raise DomainError("object ids start at 1")


@dataclass(frozen=True)
class FieldSample:
    """Value of a field at one point: density, color, (H+1)-dim simplex code."""

    sigma: float
    color: np.ndarray
    object_code: np.ndarray


@dataclass(frozen=True)
class FieldBatch:
    """Field values at a batch of points: sigma (M,), color (M,3), code (M,H+1)."""

    sigma: np.ndarray
    color: np.ndarray
    code: np.ndarray


@dataclass(frozen=True)
class AnalyticScene:
    primitives: tuple[Primitive, ...]
    background: np.ndarray
    H: int
    bounds_min: np.ndarray
    bounds_max: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))
        object.__setattr__(self, "background",
                           np.asarray(self.background, dtype=np.float64).reshape(3))
        object.__setattr__(self, "bounds_min",
                           np.asarray(self.bounds_min, dtype=np.float64).reshape(3))
        object.__setattr__(self, "bounds_max",
                           np.asarray(self.bounds_max, dtype=np.float64).reshape(3))
        for prim in self.primitives:
            if prim.object_id > self.H:
                raise DomainError(f"object_id {prim.object_id} exceeds H={self.H}")

    @property
    def object_ids(self) -> list[int]:
        seen: list[int] = []
        for p in self.primitives:
            if p.object_id not in seen:
                seen.append(p.object_id)
        return seen

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.bounds_min + self.bounds_max)

    @property
    def bounding_radius(self) -> float:
        return float(np.linalg.norm(self.bounds_max - self.center))

    def field(self, points: np.ndarray, dirs: np.ndarray | None = None) -> FieldBatch:
        """Vectorized exact field query; `dirs` is accepted for API parity."""
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        M = p.shape[0]
        sigma = np.zeros(M)
        color = np.tile(self.background, (M, 1))
        code = np.zeros((M, self.H + 1))
        code[:, self.H] = 1.0
        # reversed so the first-listed primitive wins where shapes overlap
        for prim in reversed(self.primitives):
            m = prim.shape.contains(p)
            if not np.any(m):
                continue
            sigma[m] = prim.density
            color[m] = prim.albedo
            row = np.zeros(self.H + 1)
            row[prim.object_id - 1] = 1.0
            code[m] = row
        return FieldBatch(sigma, color, code)

    def to_json(self) -> dict:
        prims = []
        for p in self.primitives:
            d: dict = {"density": p.density, "albedo": p.albedo.tolist(),
                       "object_id": p.object_id}
            if isinstance(p.shape, Sphere):
                d.update(shape="sphere", center=p.shape.center.tolist(), radius=p.shape.radius)
            elif isinstance(p.shape, Box):
                d.update(shape="box", min=p.shape.box_min.tolist(), max=p.shape.box_max.tolist())
            else:
                d.update(shape="plane", normal=p.shape.normal.tolist(), offset=p.shape.offset)
            prims.append(d)
        return {
            "H": self.H,
            "background": self.background.tolist(),
            "bounds": {"min": self.bounds_min.tolist(), "max": self.bounds_max.tolist()},
            "primitives": prims,
        }

    @classmethod
    def from_json(cls, d: dict) -> "AnalyticScene":
        prims = []
        for pd in d["primitives"]:
            kind = pd["shape"]
            if kind == "sphere":
                shape: Shape = Sphere(np.array(pd["center"]), float(pd["radius"]))
            elif kind == "box":
                shape = Box(np.array(pd["min"]), np.array(pd["max"]))
            elif kind == "plane":
                shape = HalfSpace(np.array(pd["normal"]), float(pd["offset"]))
            else:
                raise DomainError(f"unknown primitive shape {kind!r}")
            prims.append(Primitive(shape, float(pd.get("density", DEFAULT_DENSITY)),
                                   np.array(pd["albedo"]), int(pd["object_id"])))
        return cls(tuple(prims), np.array(d["background"]), int(d["H"]),
                   np.array(d["bounds"]["min"]), np.array(d["bounds"]["max"]))

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=2)

    @classmethod
    def load(cls, path) -> "AnalyticScene":
        with open(path) as f:
            return cls.from_json(json.load(f))


def query_oracle_field(scene: AnalyticScene, p: np.ndarray,
                       view_dir: np.ndarray | None = None) -> FieldSample:
    """Exact field value at a single point (hard one-hot code)."""
    batch = scene.field(np.asarray(p, dtype=np.float64).reshape(1, 3), view_dir)
    return FieldSample(float(batch.sigma[0]), batch.color[0], batch.code[0])


def analytic_pixel(scene: AnalyticScene, ray: Ray) -> tuple[np.ndarray, float, np.ndarray]:
    """Exact transmittance integral along `ray` within [t_near, t_far].

    Returns (color, depth, code).  Color composites residual transmittance
    against the scene background; depth is the expected absorption distance
    with the residual mass placed at t_far; the code is the raw absorbed
    composite except that a ray absorbing nothing returns the empty one-hot.
    """
    cuts = {ray.t_near, ray.t_far}
    for prim in scene.primitives:
        iv = prim.shape.ray_interval(ray.origin, ray.direction)
        if iv is None:
            continue
        a, b = max(iv[0], ray.t_near), min(iv[1], ray.t_far)
        if a < b:
            cuts.update((a, b))
    ts = np.array(sorted(cuts))

    trans = 1.0
    color = np.zeros(3)
    code = np.zeros(scene.H + 1)
    depth = 0.0
    absorbed_total = 0.0
    for t0, t1 in zip(ts[:-1], ts[1:]):
        mid = ray.point_at(0.5 * (t0 + t1))
        prim = _first_containing(scene, mid)
        if prim is None or prim.density == 0.0:
            continue
        sigma, length = prim.density, t1 - t0
        e = np.exp(-sigma * length)
        absorbed = 1.0 - e
        color += trans * absorbed * prim.albedo
        code[prim.object_id - 1] += trans * absorbed
        # int_0^L (t0+s) sigma exp(-sigma s) ds, the exact depth expectation piece
        depth += trans * (t0 * absorbed + absorbed / sigma - length * e)
        absorbed_total += trans * absorbed
        trans *= e

    color += trans * scene.background
    depth += trans * ray.t_far
    if absorbed_total < 1e-12:
        code = np.zeros(scene.H + 1)
        code[scene.H] = 1.0
    return color, float(depth), code


def _first_containing(scene: AnalyticScene, p: np.ndarray) -> Primitive | None:
    for prim in scene.primitives:
        if bool(prim.shape.contains(p)):
            return prim
    return None


def transform_primitive(scene: AnalyticScene, object_id: int,
                        T: SimilarityTransform) -> AnalyticScene:
    """New scene with every primitive of `object_id` mapped through `T`.

    Boxes stay axis-aligned, so their rotation must be a signed axis
    permutation; spheres and half-spaces accept any similarity.
    """
    if object_id not in scene.object_ids:
        raise DomainError(f"object_id {object_id} not present in scene")
    new_prims = []
    for prim in scene.primitives:
        if prim.object_id != object_id:
            new_prims.append(prim)
            continue
        new_prims.append(replace(prim, shape=_transform_shape(prim.shape, T)))
    return replace(scene, primitives=tuple(new_prims))


def _transform_shape(shape: Shape, T: SimilarityTransform) -> Shape:
    if isinstance(shape, Sphere):
        return Sphere(T.apply(shape.center), T.scale * shape.radius)
    if isinstance(shape, Box):
        if not _is_axis_permutation(T.rotation):
            raise UnsupportedShapeError(
                "boxes stay axis-aligned; rotation must be a signed axis permutation")
        c0 = T.apply(shape.box_min)
        c1 = T.apply(shape.box_max)
        return Box(np.minimum(c0, c1), np.maximum(c0, c1))
    n = T.rotation @ shape.normal
    return HalfSpace(n, T.scale * shape.offset + float(n @ T.translation))


def _is_axis_permutation(R: np.ndarray, tol: float = 1e-9) -> bool:
    return bool(np.all(np.min(np.abs(np.abs(R)[..., None] - np.array([0.0, 1.0])), axis=-1) < tol))


def random_scene(rng: np.random.Generator, n_objects: int = 3, H: int = 8,
                 with_floor: bool = True) -> AnalyticScene:
    """Random spheres and boxes inside the unit-ish desk volume."""
    prims = []
    oid = 1
    for _ in range(n_objects):
        albedo = rng.uniform(0.05, 0.95, 3)
        center = rng.uniform(-0.7, 0.7, 3) * np.array([1, 1, 0.6])
        if rng.random() < 0.5:
            prims.append(Primitive(Sphere(center, float(rng.uniform(0.2, 0.45))),
                                   DEFAULT_DENSITY, albedo, oid))
        else:
            half = rng.uniform(0.15, 0.4, 3)
            prims.append(Primitive(Box(center - half, center + half),
                                   DEFAULT_DENSITY, albedo, oid))
        oid += 1
    if with_floor:
        prims.append(Primitive(Box((-1.2, -1.2, -0.75), (1.2, 1.2, -0.55)),
                               DEFAULT_DENSITY, rng.uniform(0.4, 0.9, 3), oid))
    return AnalyticScene(tuple(prims), rng.uniform(0.7, 1.0, 3), H,
                         (-1.2, -1.2, -0.75), (1.2, 1.2, 1.2))


def toy_scene(H: int = 8) -> AnalyticScene:
    """Three-object desk scene: red sphere, blue box, gray slab floor."""
    prims = (
        Primitive(Sphere(center=(0.35, 0.1, -0.1), radius=0.4),
                  DEFAULT_DENSITY, (0.85, 0.15, 0.1), 1),
        Primitive(Box(box_min=(-0.8, -0.45, -0.55), box_max=(-0.2, 0.25, 0.1)),
                  DEFAULT_DENSITY, (0.15, 0.3, 0.85), 2),
        Primitive(Box(box_min=(-1.2, -1.2, -0.75), box_max=(1.2, 1.2, -0.55)),
                  DEFAULT_DENSITY, (0.75, 0.72, 0.68), 3),
    )
    return AnalyticScene(prims, background=(0.9, 0.93, 0.95), H=H,
                         bounds_min=(-1.2, -1.2, -0.75), bounds_max=(1.2, 1.2, 1.2))
