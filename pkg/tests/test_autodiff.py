import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lurlab import autodiff as ad
from lurlab.autodiff import HvpMode, grad_check, hvp, relative_error
from lurlab.core import ParamVector
from lurlab.errors import DegenerateDirectionError, ShapeError

from conftest import jittered_model, random_batch

FD = HvpMode("finite_difference", 1e-4)


def direction(model, seed):
    rng = np.random.default_rng(seed)
    return model.params.with_data(rng.standard_normal(len(model.params)))


class TestGrad:
    def test_quadratic_identity(self):
        theta = ParamVector([1.0, 2.0])
        np.testing.assert_array_equal(ad.grad(theta, ad.quadratic(np.eye(2))).data, [1.0, 2.0])

    def test_quadratic_is_symmetrised(self):
        q = ad.quadratic([[1.0, 2.0], [0.0, 1.0]])
        np.testing.assert_array_equal(q.batch.A, [[1.0, 1.0], [1.0, 1.0]])

    def test_neg_ce_negates(self, small_net, batches):
        g = ad.grad(small_net, ad.ce(batches[0]))
        np.testing.assert_array_equal(ad.grad(small_net, ad.neg_ce(batches[0])).data, -g.data)

    @pytest.mark.parametrize("seed", range(3))
    def test_mlp_against_central_differences(self, seed):
        model = jittered_model((2, 4, 2), seed)
        batch = random_batch(10, 2, 2, seed)
        report = grad_check(model, ad.ce(batch), tolerance=1e-5)
        assert report.passed, report.max_rel_err

    def test_relu_net(self):
        model = jittered_model((3, 5, 3), 4, activation="relu")
        assert grad_check(model, ad.ce(random_batch(10, 3, 3, 4)), tolerance=1e-5).passed

    def test_layout_mismatch(self, small_net):
        with pytest.raises(ShapeError):
            ad.grad(small_net, ad.quadratic(np.eye(3)))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
    def test_linearity(self, seed, a, b):
        model = jittered_model((3, 4, 3), seed)
        b1, b2 = random_batch(7, 3, 3, seed), random_batch(5, 3, 3, seed + 1)
        joint = ad.grad(model, [ad.ce(b1, a), ad.neg_ce(b2, b)])
        separate = ad.grad(model, ad.ce(b1)) * a + ad.grad(model, ad.neg_ce(b2)) * b
        np.testing.assert_allclose(joint.data, separate.data, atol=1e-10)


class TestHvp:
    def test_quadratic_exact(self):
        A = np.array([[2.0, 0.5], [0.5, 1.0]])
        theta = ParamVector([0.3, -0.7])
        v = ParamVector([1.0, 2.0])
        np.testing.assert_array_equal(hvp(theta, ad.quadratic(A), v).data, A @ v.data)

    @pytest.mark.parametrize("seed", range(4))
    def test_analytic_matches_finite_difference(self, seed):
        model = jittered_model((2, 4, 2), seed)
        req = ad.ce(random_batch(10, 2, 2, seed))
        v = direction(model, seed)
        exact, approx = hvp(model, req, v), hvp(model, req, v, FD)
        assert np.linalg.norm(exact.data - approx.data) <= 1e-4 * np.linalg.norm(exact.data)
        assert relative_error(exact.data, approx.data).max() <= 1e-4

    def test_linear_in_direction(self, small_net, batches):
        req = ad.ce(batches[0])
        v = direction(small_net, 0)
        np.testing.assert_allclose(hvp(small_net, req, v * 2.0).data,
                                   2.0 * hvp(small_net, req, v).data, atol=1e-10)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_symmetry(self, seed):
        model = jittered_model((3, 5, 3), seed)
        req = [ad.ce(random_batch(8, 3, 3, seed)), ad.neg_ce(random_batch(4, 3, 3, seed + 7))]
        u, v = direction(model, seed), direction(model, seed + 1)
        assert abs(u.dot(hvp(model, req, v)) - v.dot(hvp(model, req, u))) <= 1e-8

    def test_degenerate_direction(self, small_net, batches):
        with pytest.raises(DegenerateDirectionError):
            hvp(small_net, ad.ce(batches[0]), small_net.params.zeros_like())

    def test_fd_converges_quadratically(self):
        model = jittered_model((2, 4, 2), 1)
        req = ad.ce(random_batch(10, 2, 2, 1))
        v = direction(model, 1)
        exact = hvp(model, req, v)
        steps = np.array([1e-2, 1e-3, 1e-4])
        errs = [np.linalg.norm(hvp(model, req, v, HvpMode("finite_difference", h)).data - exact.data)
                for h in steps]
        order = np.polyfit(np.log(steps), np.log(errs), 1)[0]
        assert order >= 1.9


class TestGradCheck:
    def test_constant_loss_uses_absolute_fallback(self):
        theta = ParamVector([0.5, -1.0, 2.0])
        report = grad_check(theta, ad.quadratic(np.zeros((3, 3))), tolerance=1e-5)
        assert report.passed and report.max_rel_err == 0.0

    def test_corrupted_gradient_fails(self, small_net, batches):
        def corrupted(model, request):
            g = ad.grad(model, request).copy()
            g.data[3] *= 2.0
            return g
        report = grad_check(small_net, ad.ce(batches[0]), 1e-5, grad_fn=corrupted)
        assert not report.passed
        assert report.worst_index == 3
