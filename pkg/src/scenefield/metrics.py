"""Image-quality metrics (PSNR, SSIM) and instance-segmentation AP.

AP protocol: per-channel predictions are binarized at 0.5, every non-empty
channel becomes one detection scored by its best mask IoU against the
ground-truth instances of the same image, detections are pooled over all
images and matched greedily to unmatched gt at the IoU threshold, and AP is
the area under the all-point interpolated precision/recall curve (percent).
"""

from __future__ import annotations

import numpy as np

from scenefield.geometry import DomainError

PSNR_CAP_DB = 99.0


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for images in [0, 1]; capped at 99 dB."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DomainError("psnr inputs must share a shape")
    mse = float(((a - b) ** 2).mean())
    if mse <= 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(1.0 / mse), PSNR_CAP_DB)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def _windows(img: np.ndarray, size: int) -> np.ndarray:
    """(H-size+1, W-size+1, size, size) sliding windows of a 2D image."""
    return np.lib.stride_tricks.sliding_window_view(img, (size, size))


def ssim(a: np.ndarray, b: np.ndarray, window: int = 11,
         sigma: float = 1.5) -> float:
    """Mean local SSIM over valid windows, averaged across channels.

    Gaussian-weighted local statistics; C1 = 0.01^2, C2 = 0.03^2 for a unit
    dynamic range.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DomainError("ssim inputs must share a shape")
    if a.ndim == 2:
        a = a[..., None]
        b = b[..., None]
    if a.shape[0] < window or a.shape[1] < window:
        raise DomainError(f"image smaller than the {window}x{window} ssim window")
    w = _gaussian_window(window, sigma)
    c1, c2 = 0.01**2, 0.03**2
    vals = []
    for ch in range(a.shape[2]):
        x = _windows(a[..., ch], window)
        y = _windows(b[..., ch], window)
        mx = np.einsum("ijkl,kl->ij", x, w)
        my = np.einsum("ijkl,kl->ij", y, w)
        mxx = np.einsum("ijkl,kl->ij", x * x, w)
        myy = np.einsum("ijkl,kl->ij", y * y, w)
        mxy = np.einsum("ijkl,kl->ij", x * y, w)
        vx = mxx - mx * mx
        vy = myy - my * my
        cxy = mxy - mx * my
        s = ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx**2 + my**2 + c1) * (vx + vy + c2))
        vals.append(s.mean())
    return float(np.mean(vals))


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 0.0
    return float(np.logical_and(a, b).sum() / union)


def average_precision(pred_mask_sets: list[np.ndarray], gt_masks: list[np.ndarray],
                      iou_threshold: float = 0.75) -> float:
    """Pooled-detection AP (percent) at one mask-IoU threshold.

    `pred_mask_sets[i]` is (C, U, V) soft channel masks for image i;
    `gt_masks[i]` is a (U, V) integer label image (0 = background).
    """
    detections = []  # (score, image, ious-per-gt-instance, gt-global-offset)
    n_gt = 0
    gt_offsets = []
    gt_instances = []
    for img_idx, labels in enumerate(gt_masks):
        ids = np.unique(labels)
        ids = ids[ids > 0]
        gt_offsets.append(n_gt)
        gt_instances.append([labels == i for i in ids])
        n_gt += len(ids)
    if n_gt == 0:
        raise DomainError("no ground-truth instances anywhere; AP undefined")

    for img_idx, channels in enumerate(pred_mask_sets):
        for ch in range(channels.shape[0]):
            pred = channels[ch] > 0.5
            if not pred.any():
                continue
            ious = np.array([mask_iou(pred, g) for g in gt_instances[img_idx]])
            score = float(ious.max()) if ious.size else 0.0
            detections.append((score, img_idx, ious))

    matched = np.zeros(n_gt, dtype=bool)
    detections.sort(key=lambda d: -d[0])
    tp = np.zeros(len(detections))
    fp = np.zeros(len(detections))
    for rank, (score, img_idx, ious) in enumerate(detections):
        best, best_iou = -1, iou_threshold
        for j, iou in enumerate(ious):
            g = gt_offsets[img_idx] + j
            if iou >= best_iou and not matched[g]:
                best, best_iou = g, iou
        if best >= 0:
            matched[best] = True
            tp[rank] = 1
        else:
            fp[rank] = 1

    if len(detections) == 0:
        return 0.0
    cum_tp = np.cumsum(tp)
    cum_fp = np.cumsum(fp)
    recall = cum_tp / n_gt
    precision = cum_tp / (cum_tp + cum_fp)
    # all-point interpolation: integrate max-precision-to-the-right over recall
    interp = np.maximum.accumulate(precision[::-1])[::-1]
    prev_r = 0.0
    ap = 0.0
    for r, p in zip(recall, interp):
        ap += (r - prev_r) * p
        prev_r = r
    return 100.0 * ap


def masks_to_channels(labels: np.ndarray, H: int) -> np.ndarray:
    """(H, U, V) binary channel stack for an integer label image."""
    return np.stack([(labels == h + 1).astype(np.float64) for h in range(H)])


def evaluate_rendered(pred_colors: list[np.ndarray], pred_labels: list[np.ndarray],
                      gt_colors: list[np.ndarray], gt_masks: list[np.ndarray],
                      iou_thresholds: tuple[float, ...] = (0.5, 0.75, 0.9)) -> dict:
    """PSNR/SSIM over view pairs plus AP over pooled per-object mask channels.

    `pred_labels[i]` is a (U, V) predicted label map (argmax of display
    codes); each present object id becomes one detection channel.
    """
    psnrs = [psnr(p, g) for p, g in zip(pred_colors, gt_colors)]
    ssims = [ssim(p, g) for p, g in zip(pred_colors, gt_colors)]
    n_channels = max(int(labels.max()) for labels in pred_labels + gt_masks)
    channel_sets = [masks_to_channels(labels, n_channels) for labels in pred_labels]
    out = {"psnr": float(np.mean(psnrs)), "ssim": float(np.mean(ssims))}
    for tau in iou_thresholds:
        out[f"ap{tau:g}"] = average_precision(channel_sets, gt_masks, tau)
    return out
