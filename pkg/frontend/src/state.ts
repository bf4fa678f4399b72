/** Editor state machine.
 *
 * Holds the session, the current/previous frames, the selection and the
 * pending transform.  All mutations of server state flow through here, and
 * at most one mutating request is ever in flight: `apply`, `setCamera` and
 * `pick` reject while `busy`.
 *
 * Collision flow: a colliding apply keeps the previous frame as the primary
 * view, stores the partial render for inspection, raises the banner with the
 * server's report verbatim, and does not record history.
 */

import { ApiError, Client, CollisionJson, FramePayload, SpecJson } from "./api.js";
import { orbitCamera, Orbit } from "./camera.js";
import { rotationFromEuler } from "./euler.js";

export interface PendingTransform {
  translate: [number, number, number];
  eulerDeg: [number, number, number]; // yaw, pitch, roll
  scale: number;
}

export interface HistoryEntry {
  spec: SpecJson;
  noop: boolean;
}

export type Listener = (state: EditorState) => void;

export function identityTransform(): PendingTransform {
  return { translate: [0, 0, 0], eulerDeg: [0, 0, 0], scale: 1.0 };
}

export function isIdentity(t: PendingTransform): boolean {
  return (
    t.translate.every((x) => x === 0) &&
    t.eulerDeg.every((x) => x === 0) &&
    t.scale === 1.0
  );
}

export function specFromTransform(target: number, t: PendingTransform): SpecJson {
  if (!(t.scale > 0)) throw new Error(`scale must be positive, got ${t.scale}`);
  return {
    target,
    translate: [...t.translate],
    rotate: rotationFromEuler(t.eulerDeg[0], t.eulerDeg[1], t.eulerDeg[2]),
    scale: t.scale,
  };
}

export class EditorState {
  sessionId: string | null = null;
  frame: FramePayload | null = null;
  previousFrame: FramePayload | null = null; // before/after toggle
  partialFrame: FramePayload | null = null; // collision inspection
  showPrevious = false;
  selected: number | null = null;
  pending: PendingTransform = identityTransform();
  history: HistoryEntry[] = [];
  collisions: CollisionJson[] = [];
  busy = false;
  orbit: Orbit = { azimuthDeg: 45, elevationDeg: 35, radius: 4.7, target: [0, 0, 0.2] };
  resolution = 96;
  lastError: string | null = null;

  private listeners: Listener[] = [];

  constructor(private client: Client) {}

  onChange(fn: Listener): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn(this);
  }

  private async mutate<T>(fn: () => Promise<T>): Promise<T> {
    if (this.busy) throw new Error("request already in flight");
    this.busy = true;
    this.lastError = null;
    this.emit();
    try {
      return await fn();
    } finally {
      this.busy = false;
      this.emit();
    }
  }

  async open(scene: unknown): Promise<void> {
    await this.mutate(async () => {
      const info = await this.client.createSession(scene, this.resolution);
      this.sessionId = info.session_id;
      this.frame = await this.client.frame(info.session_id);
    });
  }

  async openFromPath(opts: { scene_path?: string; checkpoint_path?: string }): Promise<void> {
    await this.mutate(async () => {
      const info = await this.client.createSessionFromPath({
        ...opts,
        resolution: this.resolution,
      });
      this.sessionId = info.session_id;
      this.frame = await this.client.frame(info.session_id);
    });
  }

  async moveCamera(orbit: Orbit): Promise<void> {
    const sid = this.requireSession();
    await this.mutate(async () => {
      this.orbit = orbit;
      this.frame = await this.client.setCamera(sid, orbitCamera(orbit, this.resolution));
      this.previousFrame = null; // camera changed: old frame no longer comparable
      this.selected = null;
      this.collisions = [];
    });
  }

  /** Click-to-pick; selection is whatever the server says lives at (u, v). */
  async pick(u: number, v: number): Promise<number | null> {
    const sid = this.requireSession();
    return this.mutate(async () => {
      try {
        const res = await this.client.pick(sid, u, v);
        this.selected = res.object;
      } catch (err) {
        // selection unchanged on server error, surfaced as a toast
        this.lastError = err instanceof Error ? err.message : String(err);
      }
      return this.selected;
    });
  }

  /** Send the pending transform for the selected object and swap frames. */
  async apply(): Promise<FramePayload> {
    const sid = this.requireSession();
    if (this.selected === null) throw new Error("pick an object first");
    const spec = specFromTransform(this.selected, this.pending);
    return this.mutate(async () => {
      const before = this.frame;
      const result = await this.client.manipulate(sid, spec);
      this.collisions = result.collisions;
      if (result.collisions.length > 0) {
        // keep the previous frame primary; stash the partial render
        this.partialFrame = result;
        this.showPrevious = false;
      } else {
        this.previousFrame = before;
        this.frame = result;
        this.partialFrame = null;
        this.history.push({ spec, noop: isIdentity(this.pending) });
      }
      return result;
    });
  }

  async close(): Promise<void> {
    if (this.sessionId) {
      await this.client.deleteSession(this.sessionId);
      this.sessionId = null;
      this.emit();
    }
  }

  toggleBeforeAfter(): void {
    if (this.previousFrame) {
      this.showPrevious = !this.showPrevious;
      this.emit();
    }
  }

  displayedFrame(): FramePayload | null {
    return this.showPrevious && this.previousFrame ? this.previousFrame : this.frame;
  }

  private requireSession(): string {
    if (!this.sessionId) throw new Error("no open session");
    return this.sessionId;
  }
}
