"""Compare the compiled and numpy element-integration kernels.

Usage: ``python benchmarks/bench_kernels.py [--N 160] [--M 400] [--repeat 3]``.
Reports wall time per backend, the speed-up and the largest difference
between the two results.
"""
import argparse
import time

import numpy as np

from fracbem import _kernels_py
from fracbem.bem import KINDS, NEAR_FACTOR, RbfSet, _rbf_on_rules, _rules, default_shape_parameter
from fracbem.geometry import discretize_boundary, generate_interior_nodes, square01

try:
    from fracbem import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def _timed(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=160)
    ap.add_argument("--M", type=int, default=400)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    curve = square01()
    mesh = discretize_boundary(curve, args.N)
    interior = generate_interior_nodes(curve, args.M)
    rbf = RbfSet(interior.points, default_shape_parameter(curve.diameter(), interior.M))
    rules = _rules()
    uh, qh = _rbf_on_rules(mesh, rbf, rules)
    call = (interior.points, mesh.starts, mesh.ends, mesh.normals, mesh.lengths,
            -np.ones(interior.M, dtype=np.int64), len(KINDS), NEAR_FACTOR, rules, uh, qh)

    bmesh = discretize_boundary(curve, 4 * args.N)
    bcall = (bmesh.nodes, bmesh.starts, bmesh.ends, bmesh.normals, bmesh.lengths,
             np.arange(bmesh.N), 1, NEAR_FACTOR, rules,
             (np.zeros((bmesh.N, 8, 0)), np.zeros((bmesh.N, 32, 0))),
             (np.zeros((bmesh.N, 8, 0)), np.zeros((bmesh.N, 32, 0))))
    cases = (("interior rows with domain term", f"N={args.N} M={interior.M} kinds={len(KINDS)}", call),
             ("boundary matrices H and G", f"N={bmesh.N} kinds=1", bcall))
    for title, shape, args_ in cases:
        print(f"{title}: {shape}")
        t_py, ref = _timed(lambda: _kernels_py.integrate_elements(*args_), args.repeat)
        print(f"  python   {t_py:8.3f} s")
        if _compiled is None:
            print("  compiled extension not built; run `pip install -e . --no-build-isolation`")
            continue
        t_c, out = _timed(lambda: _compiled.integrate_elements(*args_), args.repeat)
        diff = max(float(np.abs(a - b).max() / max(np.abs(a).max(), 1e-300))
                   for a, b in zip(ref, out) if a.size)
        print(f"  compiled {t_c:8.3f} s   speed-up {t_py / t_c:5.1f}x   "
              f"max relative difference {diff:.2e}")


if __name__ == "__main__":
    main()
