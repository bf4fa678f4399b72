"""Discrete volume rendering over any field (analytic oracle or neural).

Per-sample absorption turns densities into compositing weights,

    T_k = exp(-sum_{i<k} sigma_i delta_i),  alpha_k = 1 - exp(-sigma_k delta_k),
    w_k = T_k alpha_k,

and a single weighted sum projects per-sample colors and object codes to the
pixel.  All operations work on (..., K) arrays so a batch of rays renders in
one shot; analytic backward functions for the sigma path are provided and are
verified against central finite differences in the test suite.

`color`/`code_hat` on outputs are raw composites (no background fill); the
`display_*` helpers composite residual transmittance against a background
color or the empty-code slot for visualisation, masks and picking.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from scenefield.geometry import (
    DomainError,
    Ray,
    RaySamples,
    _deltas,
    resample_distances,
    stratified_distances,
)
from scenefield.oracle import FieldBatch

FieldFn = Callable[[np.ndarray, np.ndarray], FieldBatch]


@dataclass(frozen=True)
class RayWeights:
    """Transmittances, per-segment alphas and compositing weights, shape (..., K)."""

    transmittance: np.ndarray
    alpha: np.ndarray
    w: np.ndarray

    @property
    def residual(self) -> np.ndarray:
        """Transmittance left after the last sample: T_K * (1 - alpha_K)."""
        return self.transmittance[..., -1] * (1.0 - self.alpha[..., -1])


@dataclass(frozen=True)
class SurfaceScores:
    """Eq.-style surfaceness/emptiness per sample, gated behind the surface."""

    s: np.ndarray
    e: np.ndarray


@dataclass(frozen=True)
class RenderOutput:
    color: np.ndarray
    code_hat: np.ndarray
    depth: float
    weights: RayWeights
    samples: RaySamples

    @property
    def residual(self) -> float:
        return float(self.weights.residual)


def compute_weights(sigmas: np.ndarray, deltas: np.ndarray) -> RayWeights:
    sigmas = np.asarray(sigmas, dtype=np.float64)
    deltas = np.asarray(deltas, dtype=np.float64)
    if np.any(sigmas < 0):
        raise DomainError("negative density; activation upstream must guarantee sigma >= 0")
    if np.any(deltas <= 0):
        raise DomainError("deltas must be positive")
    a = sigmas * deltas
    csum = np.cumsum(a, axis=-1)
    trans = np.exp(-(csum - a))
    alpha = -np.expm1(-a)
    return RayWeights(trans, alpha, trans * alpha)


def weights_backward(weights: RayWeights, deltas: np.ndarray,
                     grad_w: np.ndarray) -> np.ndarray:
    """d(loss)/d(sigma) given d(loss)/d(w); exact transpose of compute_weights.

    dw_k/da_k = T_k (1 - alpha_k) and dw_j/da_k = -w_j for j > k,
    with a_k = sigma_k delta_k.
    """
    gw = grad_w * weights.w
    tail = gw[..., ::-1].cumsum(axis=-1)[..., ::-1] - gw
    grad_a = grad_w * weights.transmittance * (1.0 - weights.alpha) - tail
    return grad_a * deltas


def residual_backward(weights: RayWeights, deltas: np.ndarray,
                      grad_residual: np.ndarray) -> np.ndarray:
    """d(loss)/d(sigma) through the residual transmittance T_{K+1} = exp(-sum a).

    Needed when a loss composites the residual against a background value;
    every a_k = sigma_k delta_k scales the residual by exp(-a_k), so
    dT/da_k = -T for all k.
    """
    grad_a = -weights.residual[..., None] * np.asarray(grad_residual)[..., None]
    return grad_a * deltas


def composite(values: np.ndarray, weights: RayWeights) -> np.ndarray:
    """sum_k w_k * value_k over the sample axis; values (..., K, D) -> (..., D)."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape[-2] != weights.w.shape[-1]:
        raise DomainError("one value per sample required")
    return np.einsum("...k,...kd->...d", weights.w, values)


def expected_depth(distances: np.ndarray, weights: RayWeights) -> np.ndarray:
    """Expected absorption distance sum_k w_k d_k (truncated when mass < 1)."""
    return np.einsum("...k,...k->...", weights.w, distances)


def estimate_depth(samples: RaySamples, weights: RayWeights,
                   literal_spacing: bool = False) -> float:
    """Camera-to-surface distance estimate for one ray.

    The default composites sample distances.  `literal_spacing=True` composites
    inter-sample deltas instead, which does not yield a camera distance; it is
    kept only so the two variants can be A/B compared.
    """
    values = samples.deltas if literal_spacing else samples.distances
    return float(np.einsum("k,k->", weights.w, values))


def depth_backward(distances: np.ndarray, weights: RayWeights, deltas: np.ndarray,
                   grad_depth: np.ndarray) -> np.ndarray:
    """d(loss)/d(sigma) for the expected-depth estimator."""
    grad_w = np.asarray(grad_depth)[..., None] * distances
    return weights_backward(weights, deltas, grad_w)


def surface_scores(distances: np.ndarray, depth, delta_d: float) -> SurfaceScores:
    """Surfaceness s_k = exp(-(d_k - d)^2) and emptiness e_k = (1-s_k) 1(d - dd - d_k > 0).

    The indicator masks out samples at or behind the estimated surface, which
    may be solid; only samples clearly in front count as empty.
    """
    if delta_d <= 0:
        raise DomainError("delta_d must be positive")
    distances = np.asarray(distances, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    diff = distances - depth[..., None]
    s = np.exp(-diff * diff)
    in_front = (depth[..., None] - delta_d - distances) > 0
    return SurfaceScores(s, (1.0 - s) * in_front)


def scores_backward(distances: np.ndarray, depth, scores: SurfaceScores,
                    grad_s: np.ndarray, grad_e: np.ndarray, delta_d: float) -> np.ndarray:
    """d(loss)/d(depth) through the score kernels (indicator held fixed)."""
    depth = np.asarray(depth, dtype=np.float64)
    ds_dd = 2.0 * (distances - depth[..., None]) * scores.s
    in_front = (depth[..., None] - delta_d - distances) > 0
    return ((grad_s - grad_e * in_front) * ds_dd).sum(axis=-1)


@dataclass(frozen=True)
class BatchRender:
    """Batched coarse+fine render used by training, evaluation and the service."""

    distances: np.ndarray      # (B, K) merged sample distances
    deltas: np.ndarray         # (B, K)
    sigma: np.ndarray          # (B, K)
    sample_color: np.ndarray   # (B, K, 3)
    sample_code: np.ndarray    # (B, K, H+1)
    weights: RayWeights        # (B, K)
    color: np.ndarray          # (B, 3) raw composite
    code_hat: np.ndarray       # (B, H+1) raw composite
    depth: np.ndarray          # (B,)
    coarse_color: np.ndarray   # (B, 3) raw composite of the coarse pass

    @property
    def residual(self) -> np.ndarray:
        return self.weights.residual


def render_rays(field: FieldFn, origins: np.ndarray, dirs: np.ndarray,
                t_near, t_far, K_coarse: int = 64, K_fine: int = 128,
                rng: np.random.Generator | int | None = 0,
                jitter: bool = True) -> BatchRender:
    """Stratified coarse pass, inverse-CDF refinement, merged fine composite."""
    if isinstance(rng, (int, np.integer)) or rng is None:
        rng = np.random.default_rng(rng)
    origins = np.atleast_2d(origins)
    dirs = np.atleast_2d(dirs)
    B = origins.shape[0]
    t_near = np.broadcast_to(np.asarray(t_near, dtype=np.float64), (B,))
    t_far = np.broadcast_to(np.asarray(t_far, dtype=np.float64), (B,))

    d_coarse = stratified_distances(t_near, t_far, K_coarse, rng, jitter)
    pts_c = origins[:, None, :] + d_coarse[..., None] * dirs[:, None, :]
    fb_c = field(pts_c.reshape(-1, 3), np.repeat(dirs, K_coarse, axis=0))
    sigma_c = fb_c.sigma.reshape(B, K_coarse)
    w_c = compute_weights(sigma_c, _deltas(d_coarse, t_near, t_far))
    coarse_color = composite(fb_c.color.reshape(B, K_coarse, 3), w_c)

    if K_fine > 0:
        d_new = resample_distances(t_near, t_far, K_coarse, w_c.w, K_fine, rng)
        pts_n = origins[:, None, :] + d_new[..., None] * dirs[:, None, :]
        fb_n = field(pts_n.reshape(-1, 3), np.repeat(dirs, K_fine, axis=0))
        merged = np.concatenate([d_coarse, d_new], axis=-1)
        order = np.argsort(merged, axis=-1, kind="stable")
        distances = np.take_along_axis(merged, order, axis=-1)
        K = K_coarse + K_fine
        sigma = np.take_along_axis(
            np.concatenate([sigma_c, fb_n.sigma.reshape(B, K_fine)], axis=-1), order, axis=-1)
        color_all = np.concatenate(
            [fb_c.color.reshape(B, K_coarse, 3), fb_n.color.reshape(B, K_fine, 3)], axis=1)
        code_all = np.concatenate(
            [fb_c.code.reshape(B, K_coarse, -1), fb_n.code.reshape(B, K_fine, -1)], axis=1)
        sample_color = np.take_along_axis(color_all, order[..., None], axis=1)
        sample_code = np.take_along_axis(code_all, order[..., None], axis=1)
    else:
        distances, sigma = d_coarse, sigma_c
        sample_color = fb_c.color.reshape(B, K_coarse, 3)
        sample_code = fb_c.code.reshape(B, K_coarse, -1)
        K = K_coarse

    deltas = _deltas(distances, t_near, t_far)
    weights = compute_weights(sigma, deltas)
    return BatchRender(
        distances=distances,
        deltas=deltas,
        sigma=sigma,
        sample_color=sample_color,
        sample_code=sample_code,
        weights=weights,
        color=composite(sample_color, weights),
        code_hat=composite(sample_code, weights),
        depth=expected_depth(distances, weights),
        coarse_color=coarse_color,
    )


def render_pixel(field: FieldFn, ray: Ray, K_coarse: int = 64, K_fine: int = 128,
                 rng_seed: int = 0, jitter: bool = True) -> RenderOutput:
    """Render a single ray; deterministic for a fixed seed."""
    out = render_rays(field, ray.origin[None], ray.direction[None],
                      ray.t_near, ray.t_far, K_coarse, K_fine,
                      np.random.default_rng(rng_seed), jitter)
    samples = RaySamples(out.distances[0], out.deltas[0], ray.t_near, ray.t_far)
    weights = RayWeights(out.weights.transmittance[0], out.weights.alpha[0],
                         out.weights.w[0])
    return RenderOutput(out.color[0], out.code_hat[0], float(out.depth[0]),
                        weights, samples)


def display_color(color: np.ndarray, residual: np.ndarray,
                  background: np.ndarray) -> np.ndarray:
    """Composite residual transmittance against a background color."""
    return color + np.asarray(residual)[..., None] * np.asarray(background)


def display_code(code_hat: np.ndarray, residual: np.ndarray) -> np.ndarray:
    """Route residual transmittance into the empty slot so codes sum to one."""
    out = np.array(code_hat, dtype=np.float64, copy=True)
    out[..., -1] += np.asarray(residual)
    return out


def render_image(field: FieldFn, camera, t_near: float, t_far: float,
                 background: np.ndarray, K_coarse: int = 64, K_fine: int = 64,
                 rng_seed: int = 0, jitter: bool = False):
    """Render every pixel of `camera`; returns (color HxWx3, label HxW, depth HxW).

    Labels are argmax of the display code, with the empty slot mapped to 0
    and solid slot h mapped to object id h+1.
    """
    from scenefield.geometry import pixel_rays

    origins, dirs = pixel_rays(camera)
    out = render_rays(field, origins, dirs, t_near, t_far, K_coarse, K_fine,
                      np.random.default_rng(rng_seed), jitter)
    H, W = camera.height, camera.width
    color = display_color(out.color, out.residual, background).reshape(H, W, 3)
    codes = display_code(out.code_hat, out.residual)
    labels = label_map(codes).reshape(H, W)
    depth = out.depth.reshape(H, W)
    return np.clip(color, 0.0, 1.0), labels, depth


def label_map(display_codes: np.ndarray) -> np.ndarray:
    """Argmax over display codes -> integer labels (0 = empty/background)."""
    idx = np.argmax(display_codes, axis=-1)
    empty = display_codes.shape[-1] - 1
    return np.where(idx == empty, 0, idx + 1)
