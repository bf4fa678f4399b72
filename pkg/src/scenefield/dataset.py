"""Dataset generation from analytic scenes, label corruption, and disk layout.

Training cameras sit uniformly on the upper hemisphere around the scene;
test cameras follow a smooth spiral.  Every view is rendered through the
closed-form `analytic_pixel`, so colors and instance masks are exact ground
truth with no Monte-Carlo noise.

On disk a dataset directory holds scene.json, cameras.json and
{train,test}/{color_%04d.png, mask_%04d.png}; colors are 8-bit RGB PNG, masks
16-bit grayscale PNG of integer labels in [0, H] (0 = background/empty).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from scenefield.geometry import Camera, DomainError, Ray, camera_with_fov, look_at_pose
from scenefield.oracle import AnalyticScene, analytic_pixel


@dataclass(frozen=True)
class View:
    color: np.ndarray   # (H, W, 3) float in [0, 1]
    mask: np.ndarray    # (H, W) int labels in [0, H]
    camera: Camera
    t_near: float
    t_far: float


@dataclass(frozen=True)
class SceneDataset:
    views: tuple[View, ...]
    split: str
    H: int
    background: np.ndarray

    def __len__(self) -> int:
        return len(self.views)

    @property
    def resolution(self) -> tuple[int, int]:
        cam = self.views[0].camera
        return cam.height, cam.width


def camera_range(scene: AnalyticScene, eye: np.ndarray) -> tuple[float, float]:
    """Conservative per-camera sampling range covering the scene bounds."""
    dist = float(np.linalg.norm(np.asarray(eye) - scene.center))
    r = scene.bounding_radius
    return max(0.05, dist - r), dist + r


def hemisphere_cameras(scene: AnalyticScene, n: int, resolution: int,
                       rng: np.random.Generator, radius_factor: float = 2.4,
                       fov_deg: float = 50.0) -> list[Camera]:
    """Cameras uniform over the upper hemisphere, looking at the scene center."""
    radius = scene.bounding_radius * radius_factor
    cams = []
    for _ in range(n):
        z = rng.uniform(0.15, 0.95)          # area-uniform band, grazing poses excluded
        phi = rng.uniform(0.0, 2.0 * np.pi)
        rho = np.sqrt(1.0 - z * z)
        eye = scene.center + radius * np.array([rho * np.cos(phi), rho * np.sin(phi), z])
        pose = look_at_pose(eye, scene.center)
        cams.append(camera_with_fov(resolution, resolution, fov_deg, pose))
    return cams


def spiral_cameras(scene: AnalyticScene, n: int, resolution: int,
                   radius_factor: float = 2.4, fov_deg: float = 50.0,
                   turns: float = 1.0) -> list[Camera]:
    """Smooth spiral: azimuth sweeps `turns` revolutions while elevation rises."""
    radius = scene.bounding_radius * radius_factor
    cams = []
    for k in range(n):
        f = k / max(n - 1, 1)
        phi = 2.0 * np.pi * turns * f
        z = 0.25 + 0.5 * f
        rho = np.sqrt(1.0 - z * z)
        eye = scene.center + radius * np.array([rho * np.cos(phi), rho * np.sin(phi), z])
        cams.append(camera_with_fov(resolution, resolution, fov_deg, look_at_pose(eye, scene.center)))
    return cams


def analytic_view(scene: AnalyticScene, camera: Camera) -> View:
    """Exact per-pixel render of `camera`: color, instance labels, no noise."""
    t_near, t_far = camera_range(scene, camera.center)
    h, w = camera.height, camera.width
    color = np.zeros((h, w, 3))
    mask = np.zeros((h, w), dtype=np.int64)
    from scenefield.geometry import pixel_rays

    origins, dirs = pixel_rays(camera)
    for n in range(h * w):
        ray = Ray(origins[n], dirs[n], t_near, t_far)
        c, _, code = analytic_pixel(scene, ray)
        color[n // w, n % w] = c
        mask[n // w, n % w] = _display_label(code)
    return View(np.clip(color, 0.0, 1.0), mask, camera, t_near, t_far)


def _display_label(code: np.ndarray) -> int:
    """Argmax label after routing unabsorbed mass into the empty slot."""
    disp = code.copy()
    disp[-1] += max(0.0, 1.0 - code.sum())
    idx = int(np.argmax(disp))
    return 0 if idx == code.size - 1 else idx + 1


def generate_dataset(scene: AnalyticScene, n_train: int, n_test: int,
                     resolution: int, seed: int = 0) -> tuple[SceneDataset, SceneDataset]:
    rng = np.random.default_rng(seed)
    train_cams = hemisphere_cameras(scene, n_train, resolution, rng)
    test_cams = spiral_cameras(scene, n_test, resolution)
    train = SceneDataset(tuple(analytic_view(scene, c) for c in train_cams),
                         "train", scene.H, scene.background)
    test = SceneDataset(tuple(analytic_view(scene, c) for c in test_cams),
                        "test", scene.H, scene.background)
    return train, test


def corrupt_labels(masks: np.ndarray, fraction: float, seed: int, H: int) -> np.ndarray:
    """Reassign exactly floor(fraction * U * V) pixels per image to a wrong label.

    Wrong labels are uniform over [0, H] minus the pixel's current label.
    `masks` is (V, U, W) stacked label images; a corrupted copy is returned.
    """
    if not (0.0 <= fraction < 1.0):
        raise DomainError("fraction must be in [0, 1)")
    out = np.array(masks, copy=True)
    if fraction == 0.0:
        return out
    rng = np.random.default_rng(seed)
    n_img, u, v = out.shape
    n_corrupt = int(fraction * u * v)
    for i in range(n_img):
        flat = out[i].reshape(-1)
        idx = rng.choice(u * v, size=n_corrupt, replace=False)
        wrong = rng.integers(0, H, size=n_corrupt)
        wrong += wrong >= flat[idx]  # skip the current label -> uniform over the rest
        flat[idx] = wrong
    return out


def with_masks(dataset: SceneDataset, masks: np.ndarray) -> SceneDataset:
    """Dataset copy with replaced mask images (for label-noise studies)."""
    views = tuple(View(v.color, m, v.camera, v.t_near, v.t_far)
                  for v, m in zip(dataset.views, masks))
    return SceneDataset(views, dataset.split, dataset.H, dataset.background)


def save_color_png(path, color: np.ndarray) -> None:
    img = (np.clip(color, 0.0, 1.0) * 255.0).round().astype(np.uint8)
    Image.fromarray(img, mode="RGB").save(path)


def load_color_png(path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("RGB"), dtype=np.float64) / 255.0


def save_mask_png(path, mask: np.ndarray) -> None:
    Image.fromarray(mask.astype(np.uint16)).save(path)


def load_mask_png(path) -> np.ndarray:
    return np.asarray(Image.open(path), dtype=np.int64)


def write_dataset(root, scene: AnalyticScene, train: SceneDataset,
                  test: SceneDataset) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    scene.save(root / "scene.json")
    cameras = {}
    for split, ds in (("train", train), ("test", test)):
        split_dir = root / split
        split_dir.mkdir(exist_ok=True)
        cameras[split] = []
        for i, view in enumerate(ds.views):
            save_color_png(split_dir / f"color_{i:04d}.png", view.color)
            save_mask_png(split_dir / f"mask_{i:04d}.png", view.mask)
            cameras[split].append({"camera": view.camera.to_json(),
                                   "t_near": view.t_near, "t_far": view.t_far})
    with open(root / "cameras.json", "w") as f:
        json.dump(cameras, f, indent=2)


def load_dataset(root) -> tuple[AnalyticScene, SceneDataset, SceneDataset]:
    root = Path(root)
    scene = AnalyticScene.load(root / "scene.json")
    with open(root / "cameras.json") as f:
        cameras = json.load(f)
    out = []
    for split in ("train", "test"):
        views = []
        for i, entry in enumerate(cameras[split]):
            views.append(View(
                color=load_color_png(root / split / f"color_{i:04d}.png"),
                mask=load_mask_png(root / split / f"mask_{i:04d}.png"),
                camera=Camera.from_json(entry["camera"]),
                t_near=float(entry["t_near"]),
                t_far=float(entry["t_far"]),
            ))
        out.append(SceneDataset(tuple(views), split, scene.H, scene.background))
    return scene, out[0], out[1]
