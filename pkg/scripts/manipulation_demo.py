#!/usr/bin/env python3
"""Render before/after frames for the three canonical edits on the toy scene.

Writes a small image strip per edit (plain render, inverse-query edit,
analytic reference of the transformed scene) plus a collision demo, all from
the oracle field, into --out.

    python3 scripts/manipulation_demo.py --out /tmp/edits
"""

import argparse
from pathlib import Path

import numpy as np

from scenefield.dataset import camera_range, hemisphere_cameras, save_color_png, save_mask_png
from scenefield.evaluation import render_view
from scenefield.geometry import SimilarityTransform, rotation_about_z, vec3
from scenefield.manipulate import ManipulationSpec, render_manipulated_view
from scenefield.oracle import toy_scene, transform_primitive


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="/tmp/scenefield_edits")
    ap.add_argument("--res", type=int, default=96)
    ap.add_argument("--kc", type=int, default=32)
    ap.add_argument("--kf", type=int, default=32)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    scene = toy_scene()
    cam = hemisphere_cameras(scene, 1, args.res, np.random.default_rng(8))[0]
    t_near, t_far = camera_range(scene, cam.center)

    plain = render_view(scene.field, cam, t_near, t_far, scene.background,
                        args.kc, args.kf)
    save_color_png(out / "plain.png", plain["color"])
    save_mask_png(out / "plain_mask.png", plain["labels"])

    sphere_c = scene.primitives[0].shape.center
    box = scene.primitives[1].shape
    box_c = 0.5 * (box.box_min + box.box_max)
    R = rotation_about_z(np.pi / 2)
    edits = {
        "translate": ManipulationSpec(1, SimilarityTransform(np.eye(3), vec3(0.3, 0, 0), 1.0)),
        "rotate": ManipulationSpec(2, SimilarityTransform(R, box_c - R @ box_c, 1.0)),
        "scale": ManipulationSpec(1, SimilarityTransform(np.eye(3), sphere_c - 0.8 * sphere_c, 0.8)),
        "collide": ManipulationSpec(1, SimilarityTransform(np.eye(3), vec3(-0.6, 0, 0), 1.0)),
    }
    for name, spec in edits.items():
        frame = render_manipulated_view(scene.field, cam, [spec], t_near, t_far,
                                        scene.background, args.kc, args.kf)
        save_color_png(out / f"{name}.png", frame.color)
        save_mask_png(out / f"{name}_mask.png", frame.labels)
        print(f"{name}: {len(frame.collisions)} collision(s)")
        if name != "collide" and not frame.collisions:
            ref = render_view(transform_primitive(scene, spec.target_index, spec.transform).field,
                              cam, t_near, t_far, scene.background, args.kc, args.kf)
            save_color_png(out / f"{name}_reference.png", ref["color"])
    print(f"frames in {out}")


if __name__ == "__main__":
    main()
