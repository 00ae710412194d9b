import math

import numpy as np
import pytest

from fracbem import _kernels_py, kernels
from fracbem.bem import kernel, kernel_derivs

try:
    from fracbem import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


class TestKernel:
    def test_unit_distance(self):
        assert kernel(1.0) == 0.0

    def test_e(self):
        assert kernel(math.e) == pytest.approx(1 / (2 * math.pi), rel=1e-15)

    def test_gradient_example(self):
        vals = kernel_derivs([0.0, 0.0], [1.0, 0.0], [0.0, 1.0])
        # derivative in the field point of ln|y - x| / 2pi with y = source
        assert vals["x"][0] == pytest.approx(1 / (2 * math.pi), rel=1e-14)
        assert vals["y"][0] == pytest.approx(0.0, abs=1e-15)

    def test_singular(self):
        with pytest.raises(ValueError):
            kernel(0.0)
        with pytest.raises(ValueError):
            kernel_derivs([0.2, 0.1], [0.2, 0.1], [1.0, 0.0])

    def test_closed_forms(self, rng):
        src = rng.normal(size=(50, 2))
        fld = rng.normal(size=(50, 2))
        th = rng.uniform(0, 2 * np.pi, 50)
        nrm = np.stack([np.cos(th), np.sin(th)], 1)
        vals = kernel_derivs(src, fld, nrm)
        d = src - fld
        r2 = (d * d).sum(1)
        np.testing.assert_allclose(vals["00"][0], np.log(np.sqrt(r2)) / (2 * np.pi), rtol=1e-13)
        np.testing.assert_allclose(vals["00"][1], (d * nrm).sum(1) / (2 * np.pi * r2), rtol=1e-12)

    @pytest.mark.parametrize("which", [0, 1])
    def test_derivatives_by_finite_differences(self, rng, which):
        src = rng.normal(size=(20, 2))
        fld = src + rng.uniform(0.5, 2.0, (20, 1)) * rng.normal(size=(20, 2))
        th = rng.uniform(0, 2 * np.pi, 20)
        nrm = np.stack([np.cos(th), np.sin(th)], 1)
        h = 1e-5

        def f(dx, dy, pq="00"):
            return kernel_derivs(src, fld + np.array([dx, dy]), nrm)[pq][which]

        fd = {
            "x": (f(h, 0) - f(-h, 0)) / (2 * h),
            "y": (f(0, h) - f(0, -h)) / (2 * h),
            "xx": (f(h, 0, "x") - f(-h, 0, "x")) / (2 * h),
            "xy": (f(0, h, "x") - f(0, -h, "x")) / (2 * h),
            "yy": (f(0, h, "y") - f(0, -h, "y")) / (2 * h),
        }
        vals = kernel_derivs(src, fld, nrm)
        for k, v in fd.items():
            np.testing.assert_allclose(vals[k][which], v, rtol=1e-6, atol=1e-8, err_msg=k)

    def test_laplacian_vanishes(self, rng):
        src = rng.normal(size=(30, 2))
        fld = rng.normal(size=(30, 2)) + 3.0
        nrm = np.tile([0.6, 0.8], (30, 1))
        v = kernel_derivs(src, fld, nrm)
        for which in (0, 1):
            np.testing.assert_allclose(v["xx"][which] + v["yy"][which], 0.0, atol=1e-12)


def _case(rng, P=37, N=41, M=13, nkind=6):
    th = np.linspace(0, 2 * np.pi, N + 1)
    ends = np.stack([np.cos(th), np.sin(th)], 1)
    starts, ends = ends[:-1], ends[1:]
    d = ends - starts
    lengths = np.hypot(*d.T)
    normals = np.stack([d[:, 1], -d[:, 0]], 1) / lengths[:, None]
    points = rng.uniform(-0.7, 0.7, (P, 2))
    points[:3] = [[0.97, 0.0], [0.0, -0.95], [0.5, 0.8]]   # close to the boundary
    rules = (np.polynomial.legendre.leggauss(8), np.polynomial.legendre.leggauss(32))
    uh = tuple(rng.normal(size=(N, len(r[0]), M)) for r in rules)
    qh = tuple(rng.normal(size=(N, len(r[0]), M)) for r in rules)
    skip = -np.ones(P, dtype=np.int64)
    return points, starts, ends, normals, lengths, skip, nkind, 1.0, rules, uh, qh


@pytest.mark.skipif(_compiled is None, reason="compiled extension not built")
class TestBackends:
    @pytest.mark.parametrize("nkind", [1, 6])
    def test_agree(self, rng, nkind):
        args = _case(rng, nkind=nkind)
        ref = _kernels_py.integrate_elements(*args)
        got = _compiled.integrate_elements(*args)
        for a, b in zip(ref, got):
            np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-13 * np.abs(a).max())

    def test_agree_boundary_collocation(self, rng):
        args = list(_case(rng, nkind=1))
        starts, ends = args[1], args[2]
        args[0] = 0.5 * (starts + ends)
        args[5] = np.arange(len(starts), dtype=np.int64)
        ref = _kernels_py.integrate_elements(*args)
        got = _compiled.integrate_elements(*args)
        for a, b in zip(ref, got):
            np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-13 * np.abs(a).max())

    def test_no_domain_term(self, rng):
        args = list(_case(rng))
        N = len(args[1])
        args[9] = (np.zeros((N, 8, 0)), np.zeros((N, 32, 0)))
        args[10] = args[9]
        G, H, A = _compiled.integrate_elements(*args)
        assert A.shape == (len(args[0]), 0, 6)
        G0, H0, _ = _kernels_py.integrate_elements(*args)
        np.testing.assert_allclose(G, G0, rtol=1e-12, atol=1e-14)


def test_backend_flag():
    assert kernels.BACKEND in ("compiled", "python")


def test_python_kernel_integral_of_constant(rng):
    # the double-layer integral over a closed boundary is 1 at any interior point
    args = list(_case(rng, nkind=1))
    G, H, _ = _kernels_py.integrate_elements(*args)
    np.testing.assert_allclose(H[:, :, 0].sum(1), 1.0, atol=1e-6)
