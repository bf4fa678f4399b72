"""End-to-end training of the neural field on a rendered dataset.

Each iteration draws P images and Q random pixels per image (the 2D object
loss needs per-image pixel groups for its mask association), runs a coarse
stratified pass and a weighted fine pass through the shared network, and
applies:

* photometric MSE on both passes -> backbone (trunk/density/color) parameters;
  the loss compares display colors, i.e. residual transmittance composited
  against the dataset's background (empty space then renders the background
  with zero density instead of forcing a fog wall),
* the 2D association loss plus the two 3D empty-space losses on the merged
  pass -> object-head parameters only (density is treated as a constant inside
  the code composite and the object head reads the trunk feature through a
  stop-gradient, so the object losses cannot move backbone parameters).

Runs are bit-reproducible for a fixed (seed, config, dataset).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from scenefield.dataset import SceneDataset
from scenefield.geometry import _deltas, pixel_rays, resample_distances, stratified_distances
from scenefield.losses import loss_2d_obj, loss_3d_empty, loss_3d_obj, photometric_loss
from scenefield.network import AdamState, FieldConfig, FieldNetwork, adam_step
from scenefield.render import (
    compute_weights,
    composite,
    expected_depth,
    residual_backward,
    surface_scores,
    weights_backward,
)


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 30_000
    batch_size: int = 1024
    images_per_batch: int = 16
    k_coarse: int = 64
    k_fine: int = 128
    lr_init: float = 5e-4
    lr_final: float = 5e-5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-7
    delta_d: float = 0.05
    seed: int = 0
    jitter: bool = True
    enable_3d_losses: bool = True
    log_every: int = 200

    def __post_init__(self):
        positive = ("iterations", "batch_size", "images_per_batch", "k_coarse",
                    "k_fine", "lr_init", "lr_final", "delta_d")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"TrainConfig.{name} must be positive")


@dataclass(frozen=True)
class TrainLogEntry:
    iteration: int
    lr: float
    photometric: float
    loss_2d: float
    loss_3d_empty: float
    loss_3d_obj: float

    @property
    def total(self) -> float:
        return self.photometric + self.loss_2d + self.loss_3d_empty + self.loss_3d_obj


def learning_rate(config: TrainConfig, iteration: int) -> float:
    frac = iteration / max(config.iterations, 1)
    return config.lr_init * (config.lr_final / config.lr_init) ** frac


@dataclass
class _FlatViews:
    origins: np.ndarray   # (V, N, 3)
    dirs: np.ndarray      # (V, N, 3)
    colors: np.ndarray    # (V, N, 3)
    labels: np.ndarray    # (V, N)
    t_near: np.ndarray    # (V,)
    t_far: np.ndarray     # (V,)


def _flatten_views(dataset: SceneDataset) -> _FlatViews:
    origins, dirs, colors, labels, tns, tfs = [], [], [], [], [], []
    for view in dataset.views:
        o, d = pixel_rays(view.camera)
        origins.append(o)
        dirs.append(d)
        colors.append(view.color.reshape(-1, 3))
        labels.append(view.mask.reshape(-1))
        tns.append(view.t_near)
        tfs.append(view.t_far)
    return _FlatViews(np.stack(origins), np.stack(dirs), np.stack(colors),
                      np.stack(labels), np.array(tns), np.array(tfs))


def _group_masks(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(Q, T) one-hot gt matrix over the object ids present in `labels`,
    plus the id of each column."""
    present = np.unique(labels)
    present = present[present > 0]
    return (labels[:, None] == present[None, :]).astype(np.float64), present


def train_scene(dataset: SceneDataset, config: TrainConfig,
                field_config: FieldConfig | None = None,
                callback=None) -> tuple[FieldNetwork, list[TrainLogEntry]]:
    """Train a field network on `dataset`; returns the network and loss curves.

    `callback(iteration, net)`, when given, runs after each optimizer step.
    """
    if field_config is None:
        field_config = FieldConfig(H=dataset.H)
    if field_config.H != dataset.H:
        raise ValueError(f"field H={field_config.H} but dataset H={dataset.H}")
    net = FieldNetwork(field_config, seed=config.seed)
    state = AdamState()
    rng = np.random.default_rng(config.seed)
    background = np.asarray(dataset.background, dtype=np.float64)
    flat = _flatten_views(dataset)
    V, N = flat.labels.shape
    P = min(config.images_per_batch, V)
    Q = config.batch_size // P
    Kc, Kf = config.k_coarse, config.k_fine
    Hp1 = dataset.H + 1
    logs: list[TrainLogEntry] = []

    for it in range(config.iterations):
        img_idx = rng.choice(V, size=P, replace=False)
        pix_idx = rng.integers(0, N, size=(P, Q))
        o = flat.origins[img_idx[:, None], pix_idx].reshape(-1, 3)
        d = flat.dirs[img_idx[:, None], pix_idx].reshape(-1, 3)
        gt_rgb = flat.colors[img_idx[:, None], pix_idx].reshape(-1, 3)
        gt_lab = flat.labels[img_idx[:, None], pix_idx]          # (P, Q)
        tn = np.repeat(flat.t_near[img_idx], Q)
        tf = np.repeat(flat.t_far[img_idx], Q)
        B = P * Q

        # coarse pass
        d_c = stratified_distances(tn, tf, Kc, rng, config.jitter)
        delt_c = _deltas(d_c, tn, tf)
        pts_c = o[:, None, :] + d_c[..., None] * d[:, None, :]
        dirs_c = np.repeat(d, Kc, axis=0)
        out_c, cache_c = net.forward(pts_c.reshape(-1, 3), dirs_c, need_cache=True)
        sig_c = out_c.sigma.reshape(B, Kc).astype(np.float64)
        col_c = out_c.color.reshape(B, Kc, 3).astype(np.float64)
        w_c = compute_weights(sig_c, delt_c)
        # photometric supervision on the display color: residual transmittance
        # composites against the known background (gt colors carry it too)
        rgb_c = composite(col_c, w_c) + w_c.residual[:, None] * background
        l_photo_c, g_rgb_c = photometric_loss(rgb_c, gt_rgb)

        # fine pass over merged samples; coarse evaluations are reused
        d_new = resample_distances(tn, tf, Kc, w_c.w, Kf, rng)
        pts_n = o[:, None, :] + d_new[..., None] * d[:, None, :]
        dirs_n = np.repeat(d, Kf, axis=0)
        out_n, cache_n = net.forward(pts_n.reshape(-1, 3), dirs_n, need_cache=True)
        order = np.argsort(np.concatenate([d_c, d_new], axis=-1), axis=-1, kind="stable")
        dist_m = np.take_along_axis(np.concatenate([d_c, d_new], axis=-1), order, axis=-1)
        sig_m = np.take_along_axis(
            np.concatenate([sig_c, out_n.sigma.reshape(B, Kf)], axis=-1), order, axis=-1)
        col_m = np.take_along_axis(
            np.concatenate([col_c, out_n.color.reshape(B, Kf, 3)], axis=1),
            order[..., None], axis=1)
        code_m = np.take_along_axis(
            np.concatenate([out_c.code.reshape(B, Kc, Hp1),
                            out_n.code.reshape(B, Kf, Hp1)], axis=1).astype(np.float64),
            order[..., None], axis=1)
        delt_m = _deltas(dist_m, tn, tf)
        w_m = compute_weights(sig_m, delt_m)
        rgb_f = composite(col_m, w_m) + w_m.residual[:, None] * background
        l_photo_f, g_rgb_f = photometric_loss(rgb_f, gt_rgb)

        # object supervision on the merged pass; weights/depth are constants here
        code_hat = composite(code_m, w_m)
        preds = list(code_hat.reshape(P, Q, Hp1))
        gts = []
        for pi in range(P):
            gt_mat, _ = _group_masks(gt_lab[pi])
            gts.append(gt_mat)
        l2d, g2d = loss_2d_obj(preds, gts)
        g_code_hat = np.stack(g2d).reshape(B, Hp1)
        d_code_m = w_m.w[..., None] * g_code_hat[:, None, :]

        l3e = l3o = 0.0
        if config.enable_3d_losses:
            depth = expected_depth(dist_m, w_m)
            scores = surface_scores(dist_m, depth, config.delta_d)
            l3e, g3e = loss_3d_empty(code_m[..., -1], scores)
            l3o, g3o = loss_3d_obj(code_m[..., :-1], scores.e)
            d_code_m[..., -1] += g3e
            d_code_m[..., :-1] += g3o

        # backward: fine pass
        d_col_m = w_m.w[..., None] * g_rgb_f[:, None, :]
        d_w_m = np.einsum("bkd,bd->bk", col_m, g_rgb_f)
        d_sig_m = (weights_backward(w_m, delt_m, d_w_m)
                   + residual_backward(w_m, delt_m, g_rgb_f @ background))

        d_sig_cat = np.empty_like(d_sig_m)
        np.put_along_axis(d_sig_cat, order, d_sig_m, axis=-1)
        d_col_cat = np.empty_like(d_col_m)
        np.put_along_axis(d_col_cat, order[..., None], d_col_m, axis=1)
        d_code_cat = np.empty_like(d_code_m)
        np.put_along_axis(d_code_cat, order[..., None], d_code_m, axis=1)

        # backward: coarse pass (own photometric term + reuse inside the fine pass)
        d_w_c = np.einsum("bkd,bd->bk", col_c, g_rgb_c)
        d_sig_c = (weights_backward(w_c, delt_c, d_w_c)
                   + residual_backward(w_c, delt_c, g_rgb_c @ background)
                   + d_sig_cat[:, :Kc])
        d_col_c = w_c.w[..., None] * g_rgb_c[:, None, :] + d_col_cat[:, :Kc]

        grads = net.zero_grads()
        net.backward(cache_c, d_sig_c.reshape(-1), d_col_c.reshape(-1, 3),
                     d_code_cat[:, :Kc].reshape(-1, Hp1), grads)
        net.backward(cache_n, d_sig_cat[:, Kc:].reshape(-1), d_col_cat[:, Kc:].reshape(-1, 3),
                     d_code_cat[:, Kc:].reshape(-1, Hp1), grads)

        lr = learning_rate(config, it)
        adam_step(net.params, grads, state, lr,
                  config.adam_beta1, config.adam_beta2, config.adam_eps)

        if it % config.log_every == 0 or it == config.iterations - 1:
            logs.append(TrainLogEntry(it, lr, l_photo_c + l_photo_f, l2d, l3e, l3o))
        if callback is not None:
            callback(it, net)

    return net, logs
