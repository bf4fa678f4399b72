import numpy as np
import pytest

from conftest import fd_gradient, rel_err
from scenefield.losses import loss_2d_obj, loss_3d_empty, loss_3d_obj, photometric_loss
from scenefield.network import (
    AdamState,
    FieldConfig,
    FieldNetwork,
    adam_step,
    load_checkpoint,
    positional_encoding,
    save_checkpoint,
    softplus,
)
from scenefield.render import SurfaceScores, composite, compute_weights, weights_backward

TINY = FieldConfig(H=3, l_pos=2, l_dir=1, trunk_depth=2, trunk_width=8,
                   color_width=6, object_width=6, dtype="float64")


class TestPositionalEncoding:
    def test_l_zero_identity(self, rng):
        x = rng.normal(size=(4, 3))
        np.testing.assert_array_equal(positional_encoding(x, 0), x)

    def test_zero_input(self):
        out = positional_encoding(np.zeros(3), 4)
        assert out.shape == (3 + 24,)
        np.testing.assert_array_equal(out[3::6].repeat(3), 0.0)  # all sine triples zero
        sines = np.concatenate([out[3 + 6 * i:6 + 6 * i] for i in range(4)])
        cosines = np.concatenate([out[6 + 6 * i:9 + 6 * i] for i in range(4)])
        np.testing.assert_array_equal(sines, 0.0)
        np.testing.assert_array_equal(cosines, 1.0)

    def test_unit_x_first_band(self):
        out = positional_encoding(np.array([1.0, 0.0, 0.0]), 1)
        assert out.shape == (9,)
        assert out[3] == pytest.approx(np.sin(np.pi), abs=1e-12)
        assert out[6] == pytest.approx(-1.0)  # cos(pi)


class TestForward:
    def test_zeroed_density_layer_constant(self, rng):
        net = FieldNetwork(TINY, seed=0)
        net.params["sigma_w"][:] = 0.0
        net.params["sigma_b"][:] = 0.0
        out = net.forward(rng.normal(size=(5, 3)), rng.normal(size=(5, 3)))
        np.testing.assert_allclose(out.sigma, softplus(-1.0))

    def test_equal_logits_uniform_code(self, rng):
        net = FieldNetwork(TINY, seed=0)
        net.params["object_w1"][:] = 0.0
        net.params["object_b1"][:] = 0.0
        out = net.forward(rng.normal(size=(4, 3)), rng.normal(size=(4, 3)))
        np.testing.assert_allclose(out.code, 1.0 / (TINY.H + 1))

    def test_simplex_and_ranges(self, rng):
        net = FieldNetwork(TINY, seed=3)
        out = net.forward(rng.normal(size=(200, 3)) * 3, rng.normal(size=(200, 3)))
        np.testing.assert_allclose(out.code.sum(axis=-1), 1.0, atol=1e-6)
        assert np.all(out.sigma >= 0)
        assert np.all((out.color >= 0) & (out.color <= 1))


class TestBackward:
    def _flat_loss(self, net, pts, dirs, fn):
        """fn(FieldBatch) -> scalar; returns loss and closes over net params."""
        return fn(net.forward(pts, dirs))

    @pytest.mark.parametrize("head", ["sigma", "color", "code"])
    def test_head_gradients_vs_fd(self, rng, head):
        net = FieldNetwork(TINY, seed=7)
        pts = rng.normal(size=(4, 3))
        dirs = rng.normal(size=(4, 3))
        proj = {
            "sigma": rng.normal(size=4),
            "color": rng.normal(size=(4, 3)),
            "code": rng.normal(size=(4, TINY.H + 1)),
        }

        def value():
            out = net.forward(pts, dirs)
            return float((proj["sigma"] * out.sigma).sum()
                         + (proj["color"] * out.color).sum()
                         + (proj["code"] * out.code).sum()) if head == "all" else {
                "sigma": float((proj["sigma"] * out.sigma).sum()),
                "color": float((proj["color"] * out.color).sum()),
                "code": float((proj["code"] * out.code).sum()),
            }[head]

        out, cache = net.forward(pts, dirs, need_cache=True)
        grads = net.zero_grads()
        zero = {"sigma": np.zeros(4), "color": np.zeros((4, 3)),
                "code": np.zeros((4, TINY.H + 1))}
        up = dict(zero)
        up[head] = proj[head]
        net.backward(cache, up["sigma"], up["color"], up["code"], grads)

        if head == "code":
            # code value depends on the trunk, but the gradient is defined to
            # stop at the object head; FD applies to object params only
            names = [k for k in net.params if k.startswith("object_")]
        else:
            names = list(net.params)
        for name in names:
            param = net.params[name]
            def f(p, name=name, param=param):
                old = param.copy()
                param[...] = p
                v = value()
                param[...] = old
                return v

            fd = fd_gradient(f, param.copy())
            assert rel_err(grads[name], fd) < 1e-4, f"{head} grad mismatch on {name}"

    def test_object_loss_never_touches_backbone(self, rng):
        net = FieldNetwork(TINY, seed=1)
        pts = rng.normal(size=(6, 3))
        dirs = rng.normal(size=(6, 3))
        _, cache = net.forward(pts, dirs, need_cache=True)
        grads = net.zero_grads()
        net.backward(cache, np.zeros(6), np.zeros((6, 3)),
                     rng.normal(size=(6, TINY.H + 1)), grads)
        for name in net.backbone_names():
            np.testing.assert_array_equal(grads[name], 0.0, err_msg=name)
        assert any(np.abs(grads[k]).max() > 0 for k in grads if k.startswith("object_"))

    def test_zero_upstream_zero_grads(self, rng):
        net = FieldNetwork(TINY, seed=2)
        _, cache = net.forward(rng.normal(size=(3, 3)), rng.normal(size=(3, 3)),
                               need_cache=True)
        grads = net.zero_grads()
        net.backward(cache, np.zeros(3), np.zeros((3, 3)), np.zeros((3, TINY.H + 1)), grads)
        for g in grads.values():
            np.testing.assert_array_equal(g, 0.0)


def chain_losses(net: FieldNetwork, pts, dirs, deltas, gt_rgb, gt_masks, scores):
    """encode -> MLP -> weights -> composite -> losses, on fixed sample positions.

    Returns (photometric value, object value, grads dict) with the same
    gradient routing as the training loop: photometric through sigma+color,
    object losses through codes with density detached.
    """
    B, K = deltas.shape
    out, cache = net.forward(pts.reshape(-1, 3), dirs, need_cache=True)
    sigma = out.sigma.reshape(B, K)
    color = out.color.reshape(B, K, 3)
    code = out.code.reshape(B, K, -1)
    w = compute_weights(sigma, deltas)
    rgb = composite(color, w)
    code_hat = composite(code, w)

    v_photo, g_rgb = photometric_loss(rgb, gt_rgb)
    v_2d, g2d = loss_2d_obj(list(code_hat[:, None, :]), gt_masks)
    v_3e, g3e = loss_3d_empty(code[..., -1], scores)
    v_3o, g3o = loss_3d_obj(code[..., :-1], scores.e)

    d_code = (w.w[..., None] * np.stack(g2d).reshape(B, 1, -1)).copy()
    d_code[..., -1] += g3e
    d_code[..., :-1] += g3o
    d_color = w.w[..., None] * g_rgb[:, None, :]
    d_w = np.einsum("bkd,bd->bk", color, g_rgb)
    d_sigma = weights_backward(w, deltas, d_w)

    grads = net.zero_grads()
    net.backward(cache, d_sigma.reshape(-1), d_color.reshape(-1, 3),
                 d_code.reshape(-1, code.shape[-1]), grads)
    return v_photo, v_2d + v_3e + v_3o, grads


class TestFullChain:
    def _case(self, rng):
        net = FieldNetwork(TINY, seed=int(rng.integers(1 << 30)))
        B, K = 2, 2  # two rays, two samples each
        pts = rng.normal(size=(B, K, 3))
        dirs = np.repeat(rng.normal(size=(B, 3)), K, axis=0)
        deltas = rng.uniform(0.2, 0.6, (B, K))
        gt_rgb = rng.uniform(0, 1, (B, 3))
        gt_masks = [np.ones((1, 1)) for _ in range(B)]  # each ray-pixel owns one object
        s = rng.uniform(0, 0.5, (B, K))
        e = rng.uniform(0, 1, (B, K)) * (1 - s)
        return net, pts, dirs, deltas, gt_rgb, gt_masks, SurfaceScores(s, e)

    def test_photometric_chain_all_params(self, rng):
        for _ in range(10):
            net, pts, dirs, deltas, gt_rgb, gt_masks, scores = self._case(rng)
            _, _, grads = chain_losses(net, pts, dirs, deltas, gt_rgb, gt_masks, scores)
            for name in net.backbone_names():
                param = net.params[name]

                def f(p, name=name, param=param):
                    old = param.copy()
                    param[...] = p
                    v = chain_losses(net, pts, dirs, deltas, gt_rgb, gt_masks, scores)[0]
                    param[...] = old
                    return v

                fd = fd_gradient(f, param.copy())
                # photometric gradient is the only flow into backbone params
                assert rel_err(grads[name], fd) < 1e-4, name

    def test_object_chain_head_params(self, rng):
        for _ in range(10):
            net, pts, dirs, deltas, gt_rgb, gt_masks, scores = self._case(rng)
            _, _, grads = chain_losses(net, pts, dirs, deltas, gt_rgb, gt_masks, scores)
            for name in ("object_w0", "object_b0", "object_w1", "object_b1"):
                param = net.params[name]

                def f(p, name=name, param=param):
                    old = param.copy()
                    param[...] = p
                    v = chain_losses(net, pts, dirs, deltas, gt_rgb, gt_masks, scores)[1]
                    param[...] = old
                    return v

                fd = fd_gradient(f, param.copy())
                assert rel_err(grads[name], fd) < 1e-4, name


class TestAdam:
    def test_zero_grad_no_move(self):
        params = {"w": np.array([1.0, -2.0])}
        state = AdamState()
        adam_step(params, {"w": np.zeros(2)}, state, lr=0.1)
        np.testing.assert_array_equal(params["w"], [1.0, -2.0])

    def test_first_step_closed_form(self):
        # after one step with constant grad g: update = -lr * g / (|g| + eps)
        g = np.array([0.3, -0.02])
        params = {"w": np.zeros(2)}
        adam_step(params, {"w": g.copy()}, AdamState(), lr=0.01, eps=1e-7)
        expected = -0.01 * g / (np.abs(g) + 1e-7)
        np.testing.assert_allclose(params["w"], expected, rtol=1e-12)

    def test_bias_correction_two_steps(self, rng):
        # independent recurrence evaluation
        g1, g2 = rng.normal(size=2), rng.normal(size=2)
        params = {"w": np.zeros(2)}
        state = AdamState()
        adam_step(params, {"w": g1.copy()}, state, lr=0.1)
        adam_step(params, {"w": g2.copy()}, state, lr=0.1)
        m1 = 0.1 * g1
        v1 = 0.001 * g1**2
        w1 = -0.1 * (m1 / 0.1) / (np.sqrt(v1 / 0.001) + 1e-7)
        m2 = 0.9 * m1 + 0.1 * g2
        v2 = 0.999 * v1 + 0.001 * g2**2
        w2 = w1 - 0.1 * (m2 / (1 - 0.9**2)) / (np.sqrt(v2 / (1 - 0.999**2)) + 1e-7)
        np.testing.assert_allclose(params["w"], w2, rtol=1e-10)

    def test_determinism(self, rng):
        runs = []
        for _ in range(2):
            params = {"w": np.ones(4)}
            state = AdamState()
            g_rng = np.random.default_rng(5)
            for _ in range(25):
                adam_step(params, {"w": g_rng.normal(size=4)}, state, lr=0.01)
            runs.append(params["w"].copy())
        np.testing.assert_array_equal(runs[0], runs[1])


class TestCheckpoint:
    def test_round_trip(self, tmp_path, rng):
        net = FieldNetwork(TINY, seed=11)
        for v in net.params.values():
            v += rng.normal(size=v.shape) * 0.01
        path = tmp_path / "field.ckpt.json"
        save_checkpoint(path, net, iteration=123, seed=11,
                        render_meta={"background": [0, 0, 0], "center": [0, 0, 0],
                                     "radius": 2.0, "H": TINY.H})
        net2, meta = load_checkpoint(path)
        assert meta["iteration"] == 123 and meta["seed"] == 11
        assert net2.config == TINY
        for k in net.params:
            np.testing.assert_array_equal(net2.params[k], net.params[k])
        pts = rng.normal(size=(5, 3))
        dirs = rng.normal(size=(5, 3))
        a, b = net.forward(pts, dirs), net2.forward(pts, dirs)
        np.testing.assert_array_equal(a.sigma, b.sigma)
        np.testing.assert_array_equal(a.code, b.code)

    def test_rejects_foreign_file(self, tmp_path):
        p = tmp_path / "x.json"
        p.write_text('{"format": "something-else"}')
        with pytest.raises(ValueError):
            load_checkpoint(p)
