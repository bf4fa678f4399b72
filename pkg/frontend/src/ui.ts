/** DOM wiring: canvas view with selection tint, orbit + transform controls,
 * before/after toggle and the collision banner.  All imagery is decoded
 * straight from the server's PNGs.
 */

import { FramePayload } from "./api.js";
import { EditorState, identityTransform } from "./state.js";

const TINT = [255, 220, 0];

async function decodeToCanvas(b64: string): Promise<HTMLCanvasElement> {
  const img = new Image();
  img.src = "data:image/png;base64," + b64;
  await img.decode();
  const canvas = document.createElement("canvas");
  canvas.width = img.width;
  canvas.height = img.height;
  canvas.getContext("2d")!.drawImage(img, 0, 0);
  return canvas;
}

export class EditorView {
  private viewCanvas: HTMLCanvasElement;
  private banner: HTMLElement;
  private status: HTMLElement;
  private applyButton: HTMLButtonElement;
  private toggleButton: HTMLButtonElement;
  private inputs = new Map<string, HTMLInputElement>();

  constructor(private root: HTMLElement, private state: EditorState) {
    root.innerHTML = this.layout();
    this.viewCanvas = root.querySelector("#view") as HTMLCanvasElement;
    this.banner = root.querySelector("#banner") as HTMLElement;
    this.status = root.querySelector("#status") as HTMLElement;
    this.applyButton = root.querySelector("#apply") as HTMLButtonElement;
    this.toggleButton = root.querySelector("#toggle") as HTMLButtonElement;
    root.querySelectorAll("input").forEach((el) => {
      this.inputs.set(el.name, el as HTMLInputElement);
    });
    this.bind();
    state.onChange(() => void this.render());
  }

  private layout(): string {
    const num = (name: string, value: number, step = 0.05) =>
      `<label>${name} <input name="${name}" type="number" value="${value}" step="${step}"></label>`;
    return `
      <div id="banner" class="banner" hidden></div>
      <div class="row">
        <canvas id="view" width="96" height="96"></canvas>
        <div class="controls">
          <fieldset><legend>camera</legend>
            ${num("azimuth", 45, 5)}${num("elevation", 35, 5)}${num("radius", 4.7, 0.2)}
            <button id="orbit">orbit</button>
          </fieldset>
          <fieldset><legend>transform</legend>
            ${num("tx", 0)}${num("ty", 0)}${num("tz", 0)}
            ${num("yaw", 0, 5)}${num("pitch", 0, 5)}${num("roll", 0, 5)}
            ${num("scale", 1, 0.05)}
            <button id="apply" disabled>apply</button>
            <button id="reset">reset</button>
            <button id="toggle" disabled>before/after</button>
          </fieldset>
          <div id="status"></div>
        </div>
      </div>`;
  }

  private bind(): void {
    this.viewCanvas.addEventListener("click", (ev) => {
      const rect = this.viewCanvas.getBoundingClientRect();
      const u = Math.floor(((ev.clientX - rect.left) / rect.width) * this.viewCanvas.width);
      const v = Math.floor(((ev.clientY - rect.top) / rect.height) * this.viewCanvas.height);
      void this.state.pick(u, v).catch(() => undefined);
    });
    this.root.querySelector("#orbit")!.addEventListener("click", () => {
      void this.state
        .moveCamera({
          azimuthDeg: this.value("azimuth"),
          elevationDeg: this.value("elevation"),
          radius: this.value("radius"),
          target: this.state.orbit.target,
        })
        .catch((err) => this.toast(err));
    });
    this.applyButton.addEventListener("click", () => {
      this.state.pending = {
        translate: [this.value("tx"), this.value("ty"), this.value("tz")],
        eulerDeg: [this.value("yaw"), this.value("pitch"), this.value("roll")],
        scale: this.value("scale"),
      };
      void this.state.apply().catch((err) => this.toast(err));
    });
    this.root.querySelector("#reset")!.addEventListener("click", () => {
      this.state.pending = identityTransform();
      for (const [name, el] of this.inputs) {
        el.value = name === "scale" ? "1" : el.name === "radius" ? el.value : "0";
      }
    });
    this.toggleButton.addEventListener("click", () => this.state.toggleBeforeAfter());
  }

  private value(name: string): number {
    return parseFloat(this.inputs.get(name)!.value);
  }

  private toast(err: unknown): void {
    this.status.textContent = err instanceof Error ? err.message : String(err);
  }

  async render(): Promise<void> {
    const state = this.state;
    this.applyButton.disabled = state.busy || state.selected === null;
    this.toggleButton.disabled = state.previousFrame === null;
    this.status.textContent = state.busy
      ? "rendering..."
      : state.lastError ??
        (state.selected ? `selected object ${state.selected}` : "click an object to select");

    const frame = state.displayedFrame();
    if (frame) await this.drawFrame(frame);

    if (state.collisions.length > 0) {
      const ids = [...new Set(state.collisions.map((c) => c.occupying_object_id))];
      this.banner.hidden = false;
      this.banner.textContent =
        `collision: edit blocked by object(s) ${ids.join(", ")} ` +
        `(${state.collisions.length} rays); previous frame kept`;
    } else {
      this.banner.hidden = true;
    }
  }

  /** Draw the frame and tint the selected object using the server's mask. */
  private async drawFrame(frame: FramePayload): Promise<void> {
    const color = await decodeToCanvas(frame.color_png);
    this.viewCanvas.width = frame.width;
    this.viewCanvas.height = frame.height;
    const ctx = this.viewCanvas.getContext("2d")!;
    ctx.drawImage(color, 0, 0);
    if (this.state.selected !== null) {
      const mask = await decodeToCanvas(frame.mask_png);
      const maskData = mask.getContext("2d")!.getImageData(0, 0, frame.width, frame.height);
      const view = ctx.getImageData(0, 0, frame.width, frame.height);
      for (let i = 0; i < frame.width * frame.height; i++) {
        // 16-bit grayscale decodes with the label replicated across RGB
        if (maskData.data[4 * i] === this.state.selected) {
          for (let c = 0; c < 3; c++) {
            view.data[4 * i + c] = Math.round(
              0.55 * view.data[4 * i + c]! + 0.45 * TINT[c]!,
            );
          }
        }
      }
      ctx.putImageData(view, 0, 0);
    }
  }
}
