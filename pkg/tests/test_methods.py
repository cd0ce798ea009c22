import numpy as np
import pytest

from camforge.capture import CaptureFile, LayerRecord
from camforge.errors import UnsupportedMethodError
from camforge.methods import (
    METHODS,
    SaliencyRequest,
    compute_saliency,
    fullgrad,
    fuse_layers,
    grad_cam_layer,
    layer_cam_layer,
    lt_fullgrad,
    lt_grad_cam,
    lt_layer_cam,
    survival_fraction,
    truncation_mask,
)
from oracles import resize_bilinear_loop, saliency_loop
from util import make_random_capture, scale_capture_gradients


def single_layer_capture(A, G, bias=None, bias_grad=None, x=None, x_grad=None):
    A = np.asarray(A, dtype=np.float32)
    if x is None:
        x = np.zeros((1,) + A.shape[1:], dtype=np.float32)
    return CaptureFile(
        image_id="fix",
        class_index=0,
        score=0.0,
        input=np.asarray(x, dtype=np.float32),
        input_gradient=None if x_grad is None else np.asarray(x_grad, dtype=np.float32),
        layers=[
            LayerRecord(
                name="s1",
                depth_index=0,
                activation=A,
                gradient=np.asarray(G, dtype=np.float32),
                bias=bias,
                bias_gradient=bias_grad,
            )
        ],
    )


class TestGradCamLayer:
    def test_zero_gradients_zero_map(self):
        A = np.random.default_rng(0).normal(size=(3, 4, 4)).astype(np.float32)
        np.testing.assert_array_equal(
            grad_cam_layer(A, np.zeros_like(A)), np.zeros((4, 4), dtype=np.float32)
        )

    def test_constant_gradient_scales_activation(self):
        A = np.array([[[1.0, 2.0], [3.0, 4.0]]], dtype=np.float32)
        G = np.full_like(A, 2.0)
        np.testing.assert_array_equal(
            grad_cam_layer(A, G), np.array([[2.0, 4.0], [6.0, 8.0]], dtype=np.float32)
        )

    def test_negative_weight_clipped(self):
        A = np.array([[[1.0, 2.0], [3.0, 4.0]]], dtype=np.float32)
        G = np.full_like(A, -1.0)
        np.testing.assert_array_equal(grad_cam_layer(A, G), np.zeros((2, 2), dtype=np.float32))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            grad_cam_layer(np.ones((1, 2, 2)), np.ones((1, 2, 3)))


class TestLayerCamLayer:
    def test_zero_gradients_zero_map(self):
        A = np.random.default_rng(1).normal(size=(2, 3, 3)).astype(np.float32)
        np.testing.assert_array_equal(
            layer_cam_layer(A, np.zeros_like(A)), np.zeros((3, 3), dtype=np.float32)
        )

    def test_hand_example(self):
        A = np.array([[[1.0, -1.0], [2.0, 0.0]]], dtype=np.float32)
        G = np.array([[[1.0, 1.0], [-3.0, 5.0]]], dtype=np.float32)
        np.testing.assert_array_equal(
            layer_cam_layer(A, G), np.array([[1.0, 0.0], [0.0, 0.0]], dtype=np.float32)
        )

    def test_all_ones_counts_channels(self):
        A = np.ones((5, 2, 2), dtype=np.float32)
        G = np.ones((5, 2, 2), dtype=np.float32)
        np.testing.assert_array_equal(layer_cam_layer(A, G), np.full((2, 2), 5.0, dtype=np.float32))


class TestTruncationMask:
    def test_delta_zero_keeps_positives(self):
        G = np.array([[[1.0, -1.0], [2.0, -2.0]]], dtype=np.float32)
        np.testing.assert_array_equal(
            truncation_mask(G, 0.0), np.array([[[1.0, 0.0], [1.0, 0.0]]], dtype=np.float32)
        )

    def test_delta_hundred_keeps_max_only(self):
        G = np.array([[[1.0, -1.0], [2.0, -2.0]]], dtype=np.float32)
        np.testing.assert_array_equal(
            truncation_mask(G, 100.0), np.array([[[0.0, 0.0], [1.0, 0.0]]], dtype=np.float32)
        )

    def test_delta_fifty_threshold_interpolates(self):
        # positives {1,2,3,4}: 50th percentile 2.5, so 3 and 4 survive
        G = np.array([[[1.0, 2.0, 3.0, 4.0], [-1.0, 0.0, -2.0, -3.0]]], dtype=np.float32)
        expected = np.array([[[0.0, 0.0, 1.0, 1.0], [0.0, 0.0, 0.0, 0.0]]], dtype=np.float32)
        np.testing.assert_array_equal(truncation_mask(G, 50.0), expected)

    def test_channel_without_positives_is_zero(self):
        G = np.stack([np.full((2, 2), -1.0), np.full((2, 2), 1.0)]).astype(np.float32)
        mask = truncation_mask(G, 0.0)
        np.testing.assert_array_equal(mask[0], np.zeros((2, 2), dtype=np.float32))
        np.testing.assert_array_equal(mask[1], np.ones((2, 2), dtype=np.float32))

    def test_monotone_in_delta(self):
        rng = np.random.default_rng(3)
        G = rng.normal(size=(4, 5, 5)).astype(np.float32)
        counts = [
            int(truncation_mask(G, d).sum()) for d in range(0, 101, 10)
        ]
        assert all(b <= a for a, b in zip(counts, counts[1:]))

    def test_rejects_bad_delta(self):
        with pytest.raises(ValueError):
            truncation_mask(np.ones((1, 2, 2)), 101.0)


class TestFuseLayers:
    def test_single_map_identity(self):
        m = np.arange(9, dtype=np.float32).reshape(3, 3)
        np.testing.assert_array_equal(fuse_layers([m], (3, 3)), m)

    def test_two_identical_maps_double(self):
        m = np.arange(9, dtype=np.float32).reshape(3, 3)
        np.testing.assert_allclose(fuse_layers([m, m], (3, 3)), 2 * m, atol=1e-6, rtol=0)

    def test_mixed_sizes_resize_then_add(self):
        rng = np.random.default_rng(4)
        small = rng.normal(size=(2, 2)).astype(np.float32)
        big = rng.normal(size=(4, 4)).astype(np.float32)
        got = fuse_layers([small, big], (4, 4))
        want = (
            resize_bilinear_loop(small, 4, 4).astype(np.float64)
            + resize_bilinear_loop(big, 4, 4).astype(np.float64)
        ).astype(np.float32)
        np.testing.assert_allclose(got, want, atol=1e-6, rtol=0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            fuse_layers([], (2, 2))


class TestFullgrad:
    def test_zero_gradients_zero_map(self):
        A = np.ones((1, 2, 2), dtype=np.float32)
        cf = single_layer_capture(
            A,
            np.zeros_like(A),
            bias=np.array([0.5], dtype=np.float32),
            bias_grad=np.zeros_like(A),
            x_grad=np.zeros((1, 2, 2), dtype=np.float32),
        )
        np.testing.assert_array_equal(fullgrad(cf, (2, 2)), np.zeros((2, 2), dtype=np.float32))

    def test_hand_example_single_bias_term(self):
        A = np.zeros((1, 1, 2), dtype=np.float32)
        cf = single_layer_capture(
            A,
            np.zeros_like(A),
            bias=np.array([0.5], dtype=np.float32),
            bias_grad=np.array([[[2.0, 0.0]]], dtype=np.float32),
            x=np.zeros((1, 1, 2), dtype=np.float32),
            x_grad=np.zeros((1, 1, 2), dtype=np.float32),
        )
        np.testing.assert_array_equal(
            fullgrad(cf, (1, 2)), np.array([[1.0, 0.0]], dtype=np.float32)
        )

    def test_bias_rescaling_invariance(self):
        rng = np.random.default_rng(6)
        cf = make_random_capture(rng, n_layers=2)
        doubled = CaptureFile(
            image_id=cf.image_id,
            class_index=cf.class_index,
            score=cf.score,
            input=cf.input,
            input_gradient=cf.input_gradient,
            layers=[
                LayerRecord(
                    name=r.name,
                    depth_index=r.depth_index,
                    activation=r.activation,
                    gradient=r.gradient,
                    bias=r.bias * np.float32(2.0),
                    bias_gradient=r.bias_gradient * np.float32(0.5),
                )
                for r in cf.layers
            ],
        )
        np.testing.assert_allclose(
            fullgrad(doubled, (5, 5)), fullgrad(cf, (5, 5)), atol=1e-6, rtol=0
        )

    def test_missing_bias_raises_with_layer_name(self):
        cf = single_layer_capture(
            np.ones((1, 2, 2)), np.ones((1, 2, 2)), x_grad=np.zeros((1, 2, 2))
        )
        with pytest.raises(UnsupportedMethodError, match="s1"):
            fullgrad(cf, (2, 2))

    def test_missing_input_gradient_raises(self):
        cf = single_layer_capture(
            np.ones((1, 2, 2)),
            np.ones((1, 2, 2)),
            bias=np.array([1.0], dtype=np.float32),
            bias_grad=np.ones((1, 2, 2), dtype=np.float32),
        )
        with pytest.raises(UnsupportedMethodError):
            fullgrad(cf, (2, 2))


class TestLtGradCam:
    def test_delta_zero_positive_gradients_equals_plain(self):
        rng = np.random.default_rng(8)
        cf = make_random_capture(rng, n_layers=1, positive_gradients=True)
        rec = cf.layers[0]
        got = lt_grad_cam(cf, ("s1",), 0.0, rec.activation.shape[1:])
        want = grad_cam_layer(rec.activation, rec.gradient)
        np.testing.assert_array_equal(got, want)

    def test_all_nonpositive_gradients_zero_map(self):
        A = np.random.default_rng(9).normal(size=(2, 3, 3)).astype(np.float32)
        cf = single_layer_capture(A, -np.abs(A) - 0.1)
        np.testing.assert_array_equal(
            lt_grad_cam(cf, ("s1",), 0.0, (3, 3)), np.zeros((3, 3), dtype=np.float32)
        )

    def test_two_layer_delta_fifty_frozen(self):
        # layer 1: positives {1,2,4}, p50=2, surviving mean 1.5
        # layer 2: positives {1,3,5}, p50=3, surviving mean 2.0
        layers = [
            LayerRecord(
                name="s1",
                depth_index=0,
                activation=np.array([[[1.0, 2.0], [3.0, 4.0]]], dtype=np.float32),
                gradient=np.array([[[1.0, -1.0], [2.0, 4.0]]], dtype=np.float32),
            ),
            LayerRecord(
                name="s2",
                depth_index=1,
                activation=np.array([[[2.0, 0.0], [1.0, 1.0]]], dtype=np.float32),
                gradient=np.array([[[3.0, 1.0], [-2.0, 5.0]]], dtype=np.float32),
            ),
        ]
        cf = CaptureFile(
            image_id="fix2",
            class_index=0,
            score=0.0,
            input=np.zeros((1, 2, 2), dtype=np.float32),
            layers=layers,
        )
        expected = np.array([[5.5, 3.0], [6.5, 8.0]], dtype=np.float32)
        np.testing.assert_array_equal(lt_grad_cam(cf, ("s1", "s2"), 50.0, (2, 2)), expected)

    def test_unknown_layer_rejected(self):
        cf = single_layer_capture(np.ones((1, 2, 2)), np.ones((1, 2, 2)))
        with pytest.raises(ValueError):
            lt_grad_cam(cf, ("nope",), 0.0, (2, 2))


class TestLtLayerCam:
    def test_delta_zero_bit_equal_to_fused_layer_cam(self):
        rng = np.random.default_rng(10)
        for _ in range(5):
            cf = make_random_capture(rng, n_layers=3)
            names = tuple(cf.layer_names)
            got = lt_layer_cam(cf, names, 0.0, (6, 6))
            want = fuse_layers(
                [layer_cam_layer(r.activation, r.gradient) for r in cf.layers], (6, 6)
            )
            assert got.tobytes() == want.tobytes()

    def test_single_layer_delta_fifty_frozen(self):
        A = np.array([[[1.0, 2.0], [3.0, 4.0]]], dtype=np.float32)
        G = np.array([[[1.0, -1.0], [2.0, 4.0]]], dtype=np.float32)
        cf = single_layer_capture(A, G)
        expected = np.array([[0.0, 0.0], [6.0, 16.0]], dtype=np.float32)
        np.testing.assert_array_equal(lt_layer_cam(cf, ("s1",), 50.0, (2, 2)), expected)


class TestLtFullgrad:
    def test_delta_zero_all_positive_equals_fullgrad(self):
        rng = np.random.default_rng(11)
        cf = make_random_capture(rng, n_layers=2, positive_gradients=True)
        np.testing.assert_array_equal(
            lt_fullgrad(cf, 0.0, (5, 5)), fullgrad(cf, (5, 5))
        )

    def test_all_negative_bias_gradients_kill_bias_terms(self):
        A = np.ones((1, 2, 2), dtype=np.float32)
        cf = single_layer_capture(
            A,
            A,
            bias=np.array([2.0], dtype=np.float32),
            bias_grad=-np.ones((1, 2, 2), dtype=np.float32),
            x_grad=np.zeros((1, 2, 2), dtype=np.float32),
        )
        np.testing.assert_array_equal(
            lt_fullgrad(cf, 0.0, (2, 2)), np.zeros((2, 2), dtype=np.float32)
        )

    def test_single_layer_delta_fifty_frozen(self):
        cf = single_layer_capture(
            np.zeros((1, 2, 2), dtype=np.float32),
            np.zeros((1, 2, 2), dtype=np.float32),
            bias=np.array([0.5], dtype=np.float32),
            bias_grad=np.array([[[2.0, 0.0], [-1.0, 4.0]]], dtype=np.float32),
            x=np.array([[[0.5, 1.0], [0.0, 0.25]]], dtype=np.float32),
            x_grad=np.array([[[1.0, -2.0], [0.0, 2.0]]], dtype=np.float32),
        )
        expected = np.array([[0.0, 0.0], [0.0, 2.0]], dtype=np.float32)
        np.testing.assert_array_equal(lt_fullgrad(cf, 50.0, (2, 2)), expected)
        plain = np.array([[0.75, 1.0], [0.25, 1.25]], dtype=np.float32)
        np.testing.assert_array_equal(fullgrad(cf, (2, 2)), plain)


class TestComputeSaliency:
    def test_single_layer_grad_cam_matches_up_to_normalization(self):
        rng = np.random.default_rng(12)
        cf = make_random_capture(rng, n_layers=1)
        rec = cf.layers[0]
        req = SaliencyRequest("grad_cam", ("s1",), 0.0, rec.activation.shape[1:])
        got = compute_saliency(cf, req)
        raw = grad_cam_layer(rec.activation, rec.gradient)
        lo, hi = raw.min(), raw.max()
        want = (raw - lo) / (hi - lo) if hi > lo else np.zeros_like(raw)
        np.testing.assert_allclose(got, want, atol=1e-6, rtol=0)

    def test_outputs_are_normalized(self):
        rng = np.random.default_rng(13)
        cf = make_random_capture(rng, n_layers=3)
        for method in METHODS:
            req = SaliencyRequest(method, tuple(cf.layer_names), 20.0, (8, 8))
            out = compute_saliency(cf, req)
            assert out.shape == (8, 8)
            assert out.min() >= 0.0 and out.max() <= 1.0

    def test_zero_gradient_capture_gives_zero_map(self):
        A = np.ones((2, 3, 3), dtype=np.float32)
        cf = CaptureFile(
            image_id="z",
            class_index=0,
            score=0.0,
            input=np.ones((1, 3, 3), dtype=np.float32),
            input_gradient=np.zeros((1, 3, 3), dtype=np.float32),
            layers=[
                LayerRecord(
                    name="s1",
                    depth_index=0,
                    activation=A,
                    gradient=np.zeros_like(A),
                    bias=np.array([1.0, -1.0], dtype=np.float32),
                    bias_gradient=np.zeros_like(A),
                )
            ],
        )
        for method in METHODS:
            req = SaliencyRequest(method, ("s1",), 0.0, (3, 3))
            np.testing.assert_array_equal(
                compute_saliency(cf, req), np.zeros((3, 3), dtype=np.float32)
            )

    def test_matches_loop_oracle_for_all_methods(self):
        rng = np.random.default_rng(14)
        for _ in range(6):
            cf = make_random_capture(rng, n_layers=int(rng.integers(1, 4)))
            names = tuple(cf.layer_names)
            size = (int(rng.integers(3, 9)), int(rng.integers(3, 9)))
            delta = float(rng.choice([0.0, 25.0, 50.0, 80.0]))
            for method in METHODS:
                req = SaliencyRequest(method, names, delta, size)
                got = compute_saliency(cf, req)
                want = saliency_loop(cf, method, names, delta, size[0], size[1])
                np.testing.assert_allclose(got, want, atol=1e-6, rtol=0)

    def test_positive_gradient_scaling_leaves_output_unchanged(self):
        rng = np.random.default_rng(15)
        cf = make_random_capture(rng, n_layers=2)
        scaled = scale_capture_gradients(cf, 37.5)
        for method in METHODS:
            req = SaliencyRequest(method, tuple(cf.layer_names), 30.0, (6, 6))
            np.testing.assert_allclose(
                compute_saliency(scaled, req), compute_saliency(cf, req), atol=1e-5, rtol=0
            )

    def test_delta_only_matters_through_the_mask(self):
        # equal positive gradients per channel: the percentile threshold
        # equals every positive entry, so the delta=0 and delta=20 masks
        # coincide and the outputs must be bit-identical
        A = np.random.default_rng(19).normal(size=(2, 3, 3)).astype(np.float32)
        G = np.where(A > 0, np.float32(0.5), np.float32(-1.0))
        cf = single_layer_capture(A, G)
        req0 = SaliencyRequest("lt_grad_cam", ("s1",), 0.0, (3, 3))
        req20 = SaliencyRequest("lt_grad_cam", ("s1",), 20.0, (3, 3))
        assert compute_saliency(cf, req0).tobytes() == compute_saliency(cf, req20).tobytes()

    def test_missing_layer_rejected(self):
        rng = np.random.default_rng(16)
        cf = make_random_capture(rng, n_layers=1)
        req = SaliencyRequest("grad_cam", ("s1", "s9"), 0.0, (4, 4))
        with pytest.raises(ValueError, match="s9"):
            compute_saliency(cf, req)

    def test_request_validation(self):
        with pytest.raises(ValueError):
            SaliencyRequest("magic_cam", ("s1",), 0.0, (2, 2))
        with pytest.raises(ValueError):
            SaliencyRequest("grad_cam", (), 0.0, (2, 2))
        with pytest.raises(ValueError):
            SaliencyRequest("grad_cam", ("s1",), 120.0, (2, 2))


class TestSurvivalFraction:
    def test_all_positive_delta_zero_is_one(self):
        rng = np.random.default_rng(17)
        cf = make_random_capture(rng, n_layers=2, positive_gradients=True)
        req = SaliencyRequest("lt_grad_cam", tuple(cf.layer_names), 0.0, (4, 4))
        assert survival_fraction(cf, req) == 1.0

    def test_nonincreasing_in_delta(self):
        rng = np.random.default_rng(18)
        cf = make_random_capture(rng, n_layers=3)
        for method in ("lt_grad_cam", "lt_fullgrad"):
            fractions = [
                survival_fraction(
                    cf, SaliencyRequest(method, tuple(cf.layer_names), float(d), (4, 4))
                )
                for d in range(0, 101, 10)
            ]
            assert all(b <= a for a, b in zip(fractions, fractions[1:]))
