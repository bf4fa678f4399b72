import base64
import io

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from scenefield.service import create_app


@pytest.fixture(scope="module")
def client(scene):
    return TestClient(create_app())


@pytest.fixture(scope="module")
def session(client, scene):
    resp = client.post("/session", json={"scene": scene.to_json(),
                                         "resolution": 48, "k_coarse": 16, "k_fine": 16})
    assert resp.status_code == 200
    body = resp.json()
    yield body["session_id"]
    client.delete(f"/session/{body['session_id']}")


def decode_png(b64):
    return np.asarray(Image.open(io.BytesIO(base64.b64decode(b64))))


def identity_spec(target=1):
    return {"target": target, "translate": [0, 0, 0],
            "rotate": np.eye(3).tolist(), "scale": 1.0}


class TestSessionLifecycle:
    def test_create_reports_h(self, client, scene):
        resp = client.post("/session", json={"scene": scene.to_json(), "resolution": 32})
        assert resp.status_code == 200
        body = resp.json()
        assert body["H"] == scene.H
        client.delete(f"/session/{body['session_id']}")

    def test_unknown_session_404(self, client):
        assert client.get("/session/nope/frame").status_code == 404

    def test_delete_then_404(self, client, scene):
        sid = client.post("/session", json={"scene": scene.to_json(),
                                            "resolution": 24}).json()["session_id"]
        assert client.delete(f"/session/{sid}").status_code == 204
        assert client.get(f"/session/{sid}/frame").status_code == 404

    def test_bad_scene_payload_400(self, client):
        resp = client.post("/session", json={"scene_path": "/does/not/exist.json"})
        assert resp.status_code == 400

    def test_sessions_do_not_share_state(self, client, scene):
        a = client.post("/session", json={"scene": scene.to_json(), "resolution": 24}).json()
        b = client.post("/session", json={"scene": scene.to_json(), "resolution": 24}).json()
        client.get(f"/session/{a['session_id']}/frame")
        client.post(f"/session/{a['session_id']}/manipulate",
                    json={"spec": {"target": 1, "translate": [0.3, 0, 0],
                                   "rotate": np.eye(3).tolist(), "scale": 1.0}})
        fa = client.get(f"/session/{a['session_id']}/frame").json()
        fb = client.get(f"/session/{b['session_id']}/frame").json()
        assert fa["color_png"] != fb["color_png"]
        client.delete(f"/session/{a['session_id']}")
        client.delete(f"/session/{b['session_id']}")


class TestFrameAndPick:
    def test_frame_payload_shape(self, client, session):
        body = client.get(f"/session/{session}/frame").json()
        color = decode_png(body["color_png"])
        mask = decode_png(body["mask_png"])
        depth = decode_png(body["depth_png"])
        assert color.shape == (48, 48, 3) and color.dtype == np.uint8
        assert mask.shape == (48, 48)
        assert depth.shape == (48, 48)
        assert body["collisions"] == []

    def test_pick_requires_frame(self, client, scene):
        sid = client.post("/session", json={"scene": scene.to_json(),
                                            "resolution": 24}).json()["session_id"]
        resp = client.post(f"/session/{sid}/pick", json={"u": 1, "v": 1})
        assert resp.status_code == 409
        client.delete(f"/session/{sid}")

    def test_pick_matches_served_mask(self, client, session):
        body = client.get(f"/session/{session}/frame").json()
        mask = decode_png(body["mask_png"]).astype(int)
        # probe one pixel of each present object and one background pixel
        from scenefield.manipulate import vote_map

        voted = vote_map(mask)
        for label in np.unique(voted):
            vs, us = np.nonzero(voted == label)
            u, v = int(us[len(us) // 2]), int(vs[len(vs) // 2])
            got = client.post(f"/session/{session}/pick", json={"u": u, "v": v}).json()
            assert got["object"] == (int(label) if label > 0 else None)

    def test_pick_out_of_bounds(self, client, session):
        client.get(f"/session/{session}/frame")
        assert client.post(f"/session/{session}/pick",
                           json={"u": 99, "v": 0}).status_code == 400


class TestCameraAndManipulate:
    def test_camera_update_changes_frame(self, client, scene):
        sid = client.post("/session", json={"scene": scene.to_json(), "resolution": 32,
                                            "k_coarse": 12, "k_fine": 12}).json()["session_id"]
        f1 = client.get(f"/session/{sid}/frame").json()
        from scenefield.dataset import hemisphere_cameras

        cam = hemisphere_cameras(scene, 1, 32, np.random.default_rng(5))[0]
        f2 = client.post(f"/session/{sid}/camera", json={"camera": cam.to_json()}).json()
        assert f1["color_png"] != f2["color_png"]
        client.delete(f"/session/{sid}")

    def test_malformed_camera_400(self, client, session):
        assert client.post(f"/session/{session}/camera",
                           json={"camera": {"fx": 1}}).status_code == 400

    def test_identity_manipulation_byte_identical(self, client, session):
        before = client.get(f"/session/{session}/frame").json()
        after = client.post(f"/session/{session}/manipulate",
                            json={"spec": identity_spec(1)}).json()
        assert after["color_png"] == before["color_png"]

    def test_malformed_spec_400(self, client, session):
        resp = client.post(f"/session/{session}/manipulate",
                           json={"spec": {"target": 1, "scale": -2.0}})
        assert resp.status_code == 400

    def test_target_out_of_range_400(self, client, session):
        resp = client.post(f"/session/{session}/manipulate",
                           json={"spec": identity_spec(target=99)})
        assert resp.status_code == 400

    def test_translation_changes_only_silhouette_region(self, client, scene):
        sid = client.post("/session", json={"scene": scene.to_json(), "resolution": 48,
                                            "k_coarse": 24, "k_fine": 24}).json()["session_id"]
        before = client.get(f"/session/{sid}/frame").json()
        spec = {"target": 1, "translate": [0.3, 0, 0],
                "rotate": np.eye(3).tolist(), "scale": 1.0}
        after = client.post(f"/session/{sid}/manipulate", json={"spec": spec}).json()
        assert after["collisions"] == []
        mask_before = decode_png(before["mask_png"]).astype(int)
        mask_after = decode_png(after["mask_png"]).astype(int)
        changed = decode_png(before["color_png"]) != decode_png(after["color_png"])
        changed = changed.any(axis=-1)
        allowed = (mask_before == 1) | (mask_after == 1)
        # dilate by one pixel for the voting halo
        from scipy.ndimage import binary_dilation

        allowed = binary_dilation(allowed, iterations=1)
        assert not (changed & ~allowed).any()
        client.delete(f"/session/{sid}")

    def test_colliding_manipulation_reports_and_reverts(self, client, scene):
        sid = client.post("/session", json={"scene": scene.to_json(), "resolution": 48,
                                            "k_coarse": 24, "k_fine": 24}).json()["session_id"]
        before = client.get(f"/session/{sid}/frame").json()
        spec = {"target": 1, "translate": [-0.6, 0, 0],
                "rotate": np.eye(3).tolist(), "scale": 1.0}
        resp = client.post(f"/session/{sid}/manipulate", json={"spec": spec}).json()
        assert len(resp["collisions"]) > 0
        assert all(c["occupying_object_id"] == 2 for c in resp["collisions"])
        # colliding spec is not retained: next frame matches the original
        again = client.get(f"/session/{sid}/frame").json()
        assert again["color_png"] == before["color_png"]
        client.delete(f"/session/{sid}")
