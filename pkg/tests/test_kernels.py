"""Both kernel backends satisfy the same contracts and agree numerically."""

import numpy as np
import pytest

from dfotr._kernels import _pure

try:
    from dfotr._kernels import _native
    BACKENDS = [_pure, _native]
except ImportError:
    _native = None
    BACKENDS = [_pure]

IDS = ["pure", "native"][:len(BACKENDS)]


@pytest.fixture(params=BACKENDS, ids=IDS)
def backend(request):
    return request.param


class TestQuadValueGrad:
    def test_matches_reference(self, backend, rng):
        for _ in range(20):
            n = int(rng.integers(1, 8))
            c = float(rng.standard_normal())
            g = rng.standard_normal(n)
            H = rng.standard_normal((n, n))
            H = 0.5 * (H + H.T)
            d = rng.standard_normal(n)
            v, grad = backend.quad_value_grad(c, g, H, d)
            v_ref = c + g @ d + 0.5 * d @ H @ d
            assert v == pytest.approx(v_ref, rel=1e-12, abs=1e-12)
            np.testing.assert_allclose(grad, g + H @ d, atol=1e-12)

    def test_linear_none_hessian(self, backend, rng):
        g = rng.standard_normal(4)
        d = rng.standard_normal(4)
        v, grad = backend.quad_value_grad(1.5, g, None, d)
        assert v == pytest.approx(1.5 + g @ d)
        np.testing.assert_array_equal(grad, g)


class TestSteihaug:
    def test_identity_hessian_exact(self, backend, rng):
        g = rng.standard_normal(5)
        d, boundary = backend.steihaug(g, np.eye(5), 100.0, 1e-10, 0)
        np.testing.assert_allclose(d, -g, atol=1e-10)
        assert not boundary

    def test_negative_curvature_hits_boundary(self, backend):
        g = np.array([1.0, 0.0])
        H = np.diag([-4.0, 1.0])
        d, boundary = backend.steihaug(g, H, 0.5, 1e-2, 0)
        assert boundary
        assert abs(np.linalg.norm(d) - 0.5) <= 1e-12

    def test_radius_never_exceeded(self, backend, rng):
        for _ in range(30):
            n = int(rng.integers(2, 9))
            H = rng.standard_normal((n, n))
            H = 0.5 * (H + H.T)
            g = rng.standard_normal(n)
            delta = float(rng.uniform(0.05, 2.0))
            d, _ = backend.steihaug(g, H, delta, 1e-2, 0)
            assert np.linalg.norm(d) <= delta * (1 + 1e-10)

    def test_zero_gradient(self, backend):
        d, boundary = backend.steihaug(np.zeros(3), np.eye(3), 1.0, 1e-2, 0)
        np.testing.assert_array_equal(d, np.zeros(3))
        assert not boundary


@pytest.mark.skipif(_native is None, reason="compiled backend unavailable")
class TestBackendParity:
    def test_steps_agree(self, rng):
        for _ in range(40):
            n = int(rng.integers(1, 10))
            H = rng.standard_normal((n, n))
            H = 0.5 * (H + H.T)
            g = rng.standard_normal(n)
            delta = float(rng.uniform(0.05, 3.0))
            d1, b1 = _pure.steihaug(g, H, delta, 1e-2, 0)
            d2, b2 = _native.steihaug(g, H, delta, 1e-2, 0)
            assert b1 == b2
            np.testing.assert_allclose(d1, d2, atol=1e-10, rtol=1e-8)

    def test_values_agree(self, rng):
        for _ in range(40):
            n = int(rng.integers(1, 10))
            c = float(rng.standard_normal())
            g = rng.standard_normal(n)
            H = rng.standard_normal((n, n))
            H = 0.5 * (H + H.T)
            d = rng.standard_normal(n)
            v1, g1 = _pure.quad_value_grad(c, g, H, d)
            v2, g2 = _native.quad_value_grad(c, g, H, d)
            assert v1 == pytest.approx(v2, rel=1e-13, abs=1e-13)
            np.testing.assert_allclose(g1, g2, atol=1e-13)
