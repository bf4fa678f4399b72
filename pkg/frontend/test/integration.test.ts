/** Editor round trip against a live service.
 *
 * Run with the service up:
 *   scenefield serve --port 8642 &
 *   SERVICE_URL=http://127.0.0.1:8642 SCENE_PATH=$PWD/../scenes/toy3.json npm run test:integration
 *
 * Covers: pick vs served mask, translation diff confinement to the
 * silhouette union plus a 1-pixel halo, and verbatim collision surfacing.
 */

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { Client, FramePayload } from "../src/api.js";
import { EditorState } from "../src/state.js";
import { decodeBase64Png, DecodedPng } from "./png.js";

const SERVICE_URL = process.env.SERVICE_URL;
const SCENE_PATH = process.env.SCENE_PATH ?? "scenes/toy3.json";

const maybe = SERVICE_URL ? describe : describe.skip;

function maskAt(mask: DecodedPng, u: number, v: number): number {
  return mask.data[v * mask.width + u]!;
}

function interiorPixel(mask: DecodedPng, label: number): [number, number] | null {
  for (let v = 1; v < mask.height - 1; v++) {
    for (let u = 1; u < mask.width - 1; u++) {
      let ok = true;
      for (let dv = -1; dv <= 1 && ok; dv++)
        for (let du = -1; du <= 1 && ok; du++)
          if (maskAt(mask, u + du, v + dv) !== label) ok = false;
      if (ok && maskAt(mask, u, v) === label) return [u, v];
    }
  }
  return null;
}

function dilate(mask: boolean[], w: number, h: number): boolean[] {
  const out = mask.slice();
  for (let v = 0; v < h; v++)
    for (let u = 0; u < w; u++) {
      if (!mask[v * w + u]) continue;
      for (let dv = -1; dv <= 1; dv++)
        for (let du = -1; du <= 1; du++) {
          const [x, y] = [u + du, v + dv];
          if (x >= 0 && x < w && y >= 0 && y < h) out[y * w + x] = true;
        }
    }
  return out;
}

maybe("editor against a live service", () => {
  const state = new EditorState(new Client(SERVICE_URL!));
  state.resolution = 64;

  beforeAll(async () => {
    await state.openFromPath({ scene_path: SCENE_PATH });
  }, 120_000);

  afterAll(async () => {
    await state.close();
  });

  it("pick returns the object id of the served mask at that pixel", async () => {
    const mask = decodeBase64Png(state.frame!.mask_png);
    const labels = new Set<number>(mask.data);
    expect(labels.size).toBeGreaterThan(1);
    for (const label of labels) {
      const px = interiorPixel(mask, label);
      if (!px) continue; // label has no interior at this resolution
      const got = await state.pick(px[0], px[1]);
      expect(got).toBe(label === 0 ? null : label);
    }
  }, 60_000);

  it("translation changes pixels only inside the silhouette union + halo", async () => {
    const before: FramePayload = state.frame!;
    const maskBefore = decodeBase64Png(before.mask_png);
    const target = 1;
    const px = interiorPixel(maskBefore, target)!;
    await state.pick(px[0], px[1]);
    expect(state.selected).toBe(target);

    state.pending = { translate: [0.3, 0, 0], eulerDeg: [0, 0, 0], scale: 1 };
    const after = await state.apply();
    expect(after.collisions).toHaveLength(0);

    const maskAfter = decodeBase64Png(after.mask_png);
    const colorBefore = decodeBase64Png(before.color_png);
    const colorAfter = decodeBase64Png(after.color_png);
    const w = maskBefore.width;
    const h = maskBefore.height;
    const union: boolean[] = new Array(w * h).fill(false);
    for (let i = 0; i < w * h; i++) {
      union[i] = maskBefore.data[i] === target || maskAfter.data[i] === target;
    }
    const allowed = dilate(union, w, h);
    for (let i = 0; i < w * h; i++) {
      let changed = false;
      for (let c = 0; c < 3; c++) {
        if (colorBefore.data[3 * i + c] !== colorAfter.data[3 * i + c]) changed = true;
      }
      if (changed) expect(allowed[i], `pixel ${i % w},${Math.floor(i / w)}`).toBe(true);
    }
  }, 120_000);

  it("colliding edit surfaces the server report verbatim and keeps the frame", async () => {
    const primary = state.frame!;
    state.pending = { translate: [-0.9, 0, 0], eulerDeg: [0, 0, 0], scale: 1 };
    await state.apply();
    expect(state.collisions.length).toBeGreaterThan(0);
    for (const c of state.collisions) {
      expect(c.occupying_object_id).toBe(2);
      expect(c.sample_index).toBeGreaterThanOrEqual(0);
    }
    expect(state.frame).toBe(primary); // previous frame kept primary
    expect(state.partialFrame).not.toBeNull();
  }, 120_000);
});
