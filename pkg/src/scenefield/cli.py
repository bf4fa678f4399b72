"""Command-line operator surface: gen / train / render / decompose / manipulate / eval / serve.

Every subcommand is a thin shell over the library; given identical seeds the
CLI and the corresponding library calls produce identical artifacts.
`--json` switches stdout to a machine-readable summary.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from scenefield import dataset as ds
from scenefield.evaluation import render_view
from scenefield.geometry import Camera
from scenefield.manipulate import ManipulationSpec, render_manipulated_view
from scenefield.metrics import average_precision, masks_to_channels, psnr, ssim
from scenefield.network import FieldConfig, save_checkpoint
from scenefield.oracle import AnalyticScene
from scenefield.service import load_field
from scenefield.training import TrainConfig, train_scene


def _emit(args, summary: dict, human: str) -> None:
    print(json.dumps(summary) if args.json else human)


def cmd_gen(args) -> int:
    scene = AnalyticScene.load(args.scene)
    train, test = ds.generate_dataset(scene, args.train, args.test, args.res, args.seed)
    ds.write_dataset(args.out, scene, train, test)
    _emit(args, {"out": str(args.out), "train_views": len(train), "test_views": len(test),
                 "resolution": args.res},
          f"wrote {len(train)} train / {len(test)} test views at {args.res}x{args.res} to {args.out}")
    return 0


def cmd_train(args) -> int:
    scene, train, _ = ds.load_dataset(args.data)
    config = TrainConfig(
        iterations=args.iters, batch_size=args.batch, images_per_batch=args.images_per_batch,
        k_coarse=args.kc, k_fine=args.kf, seed=args.seed,
        enable_3d_losses=not args.no_3d_losses)
    fc = FieldConfig(H=train.H, l_pos=args.lpos, l_dir=args.ldir,
                     trunk_depth=args.depth, trunk_width=args.width,
                     color_width=args.color_width, object_width=args.object_width,
                     dtype=args.dtype)
    net, logs = train_scene(train, config, fc)
    meta = {"background": scene.background.tolist(), "center": scene.center.tolist(),
            "radius": scene.bounding_radius, "H": scene.H}
    save_checkpoint(args.out, net, config.iterations, config.seed, meta)
    final = logs[-1]
    _emit(args, {"checkpoint": str(args.out), "iterations": config.iterations,
                 "final_photometric": final.photometric, "final_total": final.total},
          f"trained {config.iterations} iters; final photometric {final.photometric:.5f}; "
          f"checkpoint at {args.out}")
    return 0


def _load_field_and_camera(args):
    handle = load_field(scene_path=args.scene, checkpoint_path=args.ckpt)
    camera = Camera.load(args.camera)
    t_near, t_far = handle.camera_range(camera.center)
    return handle, camera, t_near, t_far


def cmd_render(args) -> int:
    handle, camera, t_near, t_far = _load_field_and_camera(args)
    r = render_view(handle.field, camera, t_near, t_far, handle.background,
                    args.kc, args.kf, args.seed)
    ds.save_color_png(args.out, r["color"])
    if args.mask:
        ds.save_mask_png(args.mask, r["labels"])
    _emit(args, {"out": str(args.out)}, f"rendered {args.out}")
    return 0


def cmd_decompose(args) -> int:
    handle, camera, t_near, t_far = _load_field_and_camera(args)
    r = render_view(handle.field, camera, t_near, t_far, handle.background,
                    args.kc, args.kf, args.seed)
    ds.save_mask_png(args.out, r["labels"])
    ids = sorted(int(i) for i in np.unique(r["labels"]) if i > 0)
    _emit(args, {"out": str(args.out), "object_ids": ids},
          f"decomposed view -> {args.out}; visible objects: {ids}")
    return 0


def cmd_manipulate(args) -> int:
    handle, camera, t_near, t_far = _load_field_and_camera(args)
    with open(args.spec) as f:
        doc = json.load(f)
    specs = [ManipulationSpec.from_json(d) for d in (doc if isinstance(doc, list) else [doc])]
    frame = render_manipulated_view(handle.field, camera, specs, t_near, t_far,
                                    handle.background, args.kc, args.kf, args.seed)
    ds.save_color_png(args.out, frame.color)
    if args.mask:
        ds.save_mask_png(args.mask, frame.labels)
    collisions = [{"u": c.u, "v": c.v, "sample_index": c.sample_index,
                   "occupying_object_id": c.occupying_id} for c in frame.collisions]
    coll_path = args.collisions or Path(args.out).with_name("collisions.json")
    with open(coll_path, "w") as f:
        json.dump(collisions, f, indent=2)
    _emit(args, {"out": str(args.out), "collisions": collisions},
          f"manipulated view -> {args.out}; {len(collisions)} collision(s)")
    return 0


def cmd_eval(args) -> int:
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    gt_masks, pred_channels, psnrs, ssims = [], [], [], []
    n_color = 0
    for i in range(100_000):
        gm = gt_dir / f"mask_{i:04d}.png"
        pm = pred_dir / f"mask_{i:04d}.png"
        if not gm.exists() or not pm.exists():
            break
        gt_mask = ds.load_mask_png(gm)
        pred_mask = ds.load_mask_png(pm)
        gt_masks.append(gt_mask)
        n_channels = int(max(gt_mask.max(), pred_mask.max()))
        pred_channels.append(masks_to_channels(pred_mask, n_channels))
        gc, pc = gt_dir / f"color_{i:04d}.png", pred_dir / f"color_{i:04d}.png"
        if gc.exists() and pc.exists():
            a, b = ds.load_color_png(pc), ds.load_color_png(gc)
            psnrs.append(psnr(a, b))
            ssims.append(ssim(a, b))
            n_color += 1
    if not gt_masks:
        print("no mask pairs found", file=sys.stderr)
        return 1
    summary = {"views": len(gt_masks)}
    for tau in args.ap:
        summary[f"ap{tau:g}"] = average_precision(pred_channels, gt_masks, tau)
    if psnrs:
        summary["psnr"] = float(np.mean(psnrs))
        summary["ssim"] = float(np.mean(ssims))
    human = ", ".join(f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}"
                      for k, v in summary.items())
    _emit(args, summary, human)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from scenefield.service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scenefield")
    ap.add_argument("--json", action="store_true", help="machine-readable summary on stdout")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a dataset from a scene file")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--train", type=int, default=32)
    p.add_argument("--test", type=int, default=8)
    p.add_argument("--res", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("train", help="train a field network on a dataset directory")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iters", type=int, default=3000)
    p.add_argument("--batch", type=int, default=1024)
    p.add_argument("--images-per-batch", type=int, default=16)
    p.add_argument("--kc", type=int, default=32)
    p.add_argument("--kf", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lpos", type=int, default=8)
    p.add_argument("--ldir", type=int, default=2)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--width", type=int, default=96)
    p.add_argument("--color-width", type=int, default=48)
    p.add_argument("--object-width", type=int, default=48)
    p.add_argument("--dtype", default="float32")
    p.add_argument("--no-3d-losses", action="store_true")
    p.set_defaults(fn=cmd_train)

    for name, fn in (("render", cmd_render), ("decompose", cmd_decompose)):
        p = sub.add_parser(name)
        p.add_argument("--scene")
        p.add_argument("--ckpt")
        p.add_argument("--camera", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--mask")
        p.add_argument("--kc", type=int, default=64)
        p.add_argument("--kf", type=int, default=64)
        p.add_argument("--seed", type=int, default=0)
        p.set_defaults(fn=fn)

    p = sub.add_parser("manipulate", help="apply manipulation specs and render")
    p.add_argument("--scene")
    p.add_argument("--ckpt")
    p.add_argument("--spec", required=True)
    p.add_argument("--camera", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mask")
    p.add_argument("--collisions")
    p.add_argument("--kc", type=int, default=64)
    p.add_argument("--kf", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_manipulate)

    p = sub.add_parser("eval", help="compare prediction and ground-truth directories")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--ap", type=float, nargs="+", default=[0.75])
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("serve", help="run the interactive editing service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8642)
    p.set_defaults(fn=cmd_serve)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
