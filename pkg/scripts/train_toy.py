#!/usr/bin/env python3
"""Train the neural field on the built-in toy scene and report held-out metrics.

Desk-scale experiment driver: generates (or reuses) an analytic dataset,
trains, evaluates PSNR/SSIM/AP on the spiral test views, and optionally saves
a checkpoint.  Used to calibrate the configs frozen into the acceptance suite.

    python3 scripts/train_toy.py --iters 2500 --width 64 --out toy.ckpt.json
"""

import argparse
import json
import time

from scenefield.dataset import generate_dataset
from scenefield.evaluation import evaluate_field, empty_space_stats
from scenefield.network import FieldConfig, save_checkpoint
from scenefield.oracle import toy_scene
from scenefield.training import TrainConfig, train_scene


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--iters", type=int, default=2500)
    ap.add_argument("--batch", type=int, default=512)
    ap.add_argument("--images-per-batch", type=int, default=8)
    ap.add_argument("--kc", type=int, default=32)
    ap.add_argument("--kf", type=int, default=32)
    ap.add_argument("--res", type=int, default=64)
    ap.add_argument("--train-views", type=int, default=32)
    ap.add_argument("--test-views", type=int, default=8)
    ap.add_argument("--width", type=int, default=64)
    ap.add_argument("--depth", type=int, default=3)
    ap.add_argument("--lpos", type=int, default=8)
    ap.add_argument("--ldir", type=int, default=2)
    ap.add_argument("--head-width", type=int, default=40)
    ap.add_argument("--dtype", default="float32")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--no-3d-losses", action="store_true")
    ap.add_argument("--eval-kc", type=int, default=32)
    ap.add_argument("--eval-kf", type=int, default=64)
    ap.add_argument("--out", default=None, help="checkpoint path")
    args = ap.parse_args()

    scene = toy_scene()
    t0 = time.perf_counter()
    train, test = generate_dataset(scene, args.train_views, args.test_views,
                                   args.res, seed=0)
    print(f"dataset: {time.perf_counter() - t0:.1f}s "
          f"({args.train_views}+{args.test_views} views at {args.res}x{args.res})")

    fc = FieldConfig(H=scene.H, l_pos=args.lpos, l_dir=args.ldir,
                     trunk_depth=args.depth, trunk_width=args.width,
                     color_width=args.head_width, object_width=args.head_width,
                     dtype=args.dtype)
    cfg = TrainConfig(iterations=args.iters, batch_size=args.batch,
                      images_per_batch=args.images_per_batch,
                      k_coarse=args.kc, k_fine=args.kf, seed=args.seed,
                      enable_3d_losses=not args.no_3d_losses)
    t0 = time.perf_counter()
    net, logs = train_scene(train, cfg, fc)
    dt = time.perf_counter() - t0
    print(f"train: {dt:.0f}s ({1000 * dt / args.iters:.0f} ms/iter)")
    for entry in logs[:: max(1, len(logs) // 10)]:
        print(f"  it {entry.iteration:6d}  photo {entry.photometric:.5f}  "
              f"2d {entry.loss_2d:+.4f}  3de {entry.loss_3d_empty:.4f}")

    t0 = time.perf_counter()
    metrics = evaluate_field(net.as_field(), test, args.eval_kc, args.eval_kf)
    stats = empty_space_stats(net.as_field(), test, cfg.delta_d)
    print(f"eval: {time.perf_counter() - t0:.0f}s")
    print(json.dumps({**metrics, **stats}, indent=2))

    if args.out:
        meta = {"background": scene.background.tolist(), "center": scene.center.tolist(),
                "radius": scene.bounding_radius, "H": scene.H}
        save_checkpoint(args.out, net, args.iters, args.seed, meta)
        print(f"checkpoint -> {args.out}")


if __name__ == "__main__":
    main()
