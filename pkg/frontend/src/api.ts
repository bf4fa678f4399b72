/** Typed client for the scenefield editing service.
 *
 * The editor performs no field mathematics: every pixel, mask, depth value
 * and collision report comes out of these endpoints.
 */

export interface CameraJson {
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  width: number;
  height: number;
  pose: number[][];
}

export interface SpecJson {
  target: number;
  translate: [number, number, number];
  rotate: number[][];
  scale: number;
}

export interface CollisionJson {
  u: number;
  v: number;
  sample_index: number;
  occupying_object_id: number;
}

export interface FramePayload {
  width: number;
  height: number;
  color_png: string; // base64
  mask_png: string;
  depth_png: string;
  collisions: CollisionJson[];
}

export interface SessionInfo {
  session_id: string;
  H: number;
  width: number;
  height: number;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(`service error ${status}: ${detail}`);
  }
}

export class Client {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (u, i) => fetch(u, i),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const doc = await resp.json();
        if (doc && typeof doc.detail === "string") detail = doc.detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(resp.status, detail);
    }
    if (resp.status === 204) return undefined as T;
    return (await resp.json()) as T;
  }

  createSession(scene: unknown, resolution = 96): Promise<SessionInfo> {
    return this.request("POST", "/session", { scene, resolution });
  }

  createSessionFromPath(opts: {
    scene_path?: string;
    checkpoint_path?: string;
    resolution?: number;
  }): Promise<SessionInfo> {
    return this.request("POST", "/session", opts);
  }

  frame(sessionId: string): Promise<FramePayload> {
    return this.request("GET", `/session/${sessionId}/frame`);
  }

  setCamera(sessionId: string, camera: CameraJson): Promise<FramePayload> {
    return this.request("POST", `/session/${sessionId}/camera`, { camera });
  }

  pick(sessionId: string, u: number, v: number): Promise<{ object: number | null }> {
    return this.request("POST", `/session/${sessionId}/pick`, { u, v });
  }

  manipulate(sessionId: string, spec: SpecJson): Promise<FramePayload> {
    return this.request("POST", `/session/${sessionId}/manipulate`, { spec });
  }

  deleteSession(sessionId: string): Promise<void> {
    return this.request("DELETE", `/session/${sessionId}`);
  }
}
