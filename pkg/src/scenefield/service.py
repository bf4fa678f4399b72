"""HTTP service exposing interactive editing sessions over a loaded field.

A session pins one field (analytic scene or trained checkpoint), a camera and
a list of pending manipulation specs.  Frames are PNGs, base64-packed into
JSON payloads.  Within a session requests are serialized by a lock; sessions
share no mutable state.

Collision policy: a manipulate request whose render reports collisions is not
retained — the response carries the collision list and the partially-unedited
frame, and the session's pending specs stay as they were.
"""

from __future__ import annotations

import base64
import io
import threading
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException
from PIL import Image
from pydantic import BaseModel

from scenefield.geometry import Camera
from scenefield.manipulate import ManipulationSpec, render_manipulated_view, vote_map
from scenefield.network import load_checkpoint
from scenefield.oracle import AnalyticScene
from scenefield.dataset import spiral_cameras


@dataclass
class FieldHandle:
    """A renderable field plus the metadata needed to frame it."""

    field: object
    H: int
    background: np.ndarray
    center: np.ndarray
    radius: float

    def camera_range(self, eye: np.ndarray) -> tuple[float, float]:
        dist = float(np.linalg.norm(np.asarray(eye) - self.center))
        return max(0.05, dist - self.radius), dist + self.radius


def load_field(scene_path: str | None = None, checkpoint_path: str | None = None,
               scene_json: dict | None = None) -> FieldHandle:
    if sum(x is not None for x in (scene_path, checkpoint_path, scene_json)) != 1:
        raise ValueError("provide exactly one of scene_path, checkpoint_path, scene json")
    if checkpoint_path is not None:
        net, meta = load_checkpoint(checkpoint_path)
        rm = meta["render_meta"]
        return FieldHandle(net.as_field(), net.config.H, np.array(rm["background"]),
                           np.array(rm["center"]), float(rm["radius"]))
    scene = AnalyticScene.load(scene_path) if scene_path else AnalyticScene.from_json(scene_json)
    return FieldHandle(scene.field, scene.H, scene.background,
                       scene.center, scene.bounding_radius)


@dataclass
class Session:
    id: str
    handle: FieldHandle
    camera: Camera
    k_coarse: int = 32
    k_fine: int = 32
    specs: list[ManipulationSpec] = field(default_factory=list)
    cached_labels: np.ndarray | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


class CreateSessionRequest(BaseModel):
    scene: dict | None = None
    scene_path: str | None = None
    checkpoint_path: str | None = None
    camera: dict | None = None
    resolution: int = 96
    k_coarse: int = 32
    k_fine: int = 32


class CameraRequest(BaseModel):
    camera: dict


class PickRequest(BaseModel):
    u: int
    v: int


class ManipulateRequest(BaseModel):
    spec: dict


def _png_b64(img: Image.Image) -> str:
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode()


def _frame_payload(frame) -> dict:
    color = Image.fromarray((np.clip(frame.color, 0, 1) * 255).round().astype(np.uint8), "RGB")
    mask = Image.fromarray(frame.labels.astype(np.uint16))
    depth_mm = np.clip(frame.depth * 1000.0, 0, 65535).astype(np.uint16)
    depth = Image.fromarray(depth_mm)
    return {
        "width": frame.color.shape[1],
        "height": frame.color.shape[0],
        "color_png": _png_b64(color),
        "mask_png": _png_b64(mask),
        "depth_png": _png_b64(depth),
        "collisions": [
            {"u": c.u, "v": c.v, "sample_index": c.sample_index,
             "occupying_object_id": c.occupying_id}
            for c in frame.collisions
        ],
    }


def _render(session: Session, specs: list[ManipulationSpec]):
    eye = session.camera.center
    t_near, t_far = session.handle.camera_range(eye)
    return render_manipulated_view(
        session.handle.field, session.camera, specs, t_near, t_far,
        session.handle.background, session.k_coarse, session.k_fine,
        rng_seed=0, jitter=False)


def create_app() -> FastAPI:
    app = FastAPI(title="scenefield")
    sessions: dict[str, Session] = {}

    def get_session(session_id: str) -> Session:
        s = sessions.get(session_id)
        if s is None:
            raise HTTPException(404, f"no session {session_id}")
        return s

    @app.post("/session")
    def create_session(req: CreateSessionRequest):
        try:
            handle = load_field(req.scene_path, req.checkpoint_path, req.scene)
        except (ValueError, OSError) as exc:
            raise HTTPException(400, str(exc))
        if req.camera is not None:
            camera = Camera.from_json(req.camera)
        else:
            # deterministic default pose on the view spiral
            scene_like = _FramingScene(handle.center, handle.radius, handle.H)
            camera = spiral_cameras(scene_like, 1, req.resolution)[0]
        sid = uuid.uuid4().hex
        sessions[sid] = Session(sid, handle, camera, req.k_coarse, req.k_fine)
        return {"session_id": sid, "H": handle.H,
                "width": camera.width, "height": camera.height}

    @app.get("/session/{session_id}/frame")
    def frame(session_id: str):
        s = get_session(session_id)
        with s.lock:
            fr = _render(s, s.specs)
            s.cached_labels = vote_map(fr.labels)
            return _frame_payload(fr)

    @app.post("/session/{session_id}/camera")
    def set_camera(session_id: str, req: CameraRequest):
        s = get_session(session_id)
        with s.lock:
            try:
                s.camera = Camera.from_json(req.camera)
            except (KeyError, ValueError) as exc:
                raise HTTPException(400, f"malformed camera: {exc}")
            s.cached_labels = None
            fr = _render(s, s.specs)
            s.cached_labels = vote_map(fr.labels)
            return _frame_payload(fr)

    @app.post("/session/{session_id}/pick")
    def pick(session_id: str, req: PickRequest):
        s = get_session(session_id)
        with s.lock:
            if s.cached_labels is None:
                raise HTTPException(409, "no rendered frame cached; GET /frame first")
            h, w = s.cached_labels.shape
            if not (0 <= req.u < w and 0 <= req.v < h):
                raise HTTPException(400, f"pixel ({req.u}, {req.v}) outside {w}x{h} frame")
            label = int(s.cached_labels[req.v, req.u])
            return {"object": label if label > 0 else None}

    @app.post("/session/{session_id}/manipulate")
    def manipulate(session_id: str, req: ManipulateRequest):
        s = get_session(session_id)
        with s.lock:
            try:
                spec = ManipulationSpec.from_json(req.spec)
            except (KeyError, ValueError, TypeError) as exc:
                raise HTTPException(400, f"malformed spec: {exc}")
            if spec.target_index > s.handle.H:
                raise HTTPException(400, f"target {spec.target_index} exceeds H={s.handle.H}")
            attempt = [sp for sp in s.specs if sp.target_index != spec.target_index]
            attempt.append(spec)
            fr = _render(s, attempt)
            if not fr.collisions:
                s.specs = attempt
            s.cached_labels = vote_map(fr.labels)
            return _frame_payload(fr)

    @app.delete("/session/{session_id}", status_code=204)
    def delete_session(session_id: str):
        get_session(session_id)
        del sessions[session_id]

    return app


@dataclass(frozen=True)
class _FramingScene:
    """Just enough of the scene interface for the camera helpers."""

    center: np.ndarray
    bounding_radius: float
    H: int
