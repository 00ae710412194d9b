import numpy as np
import pytest

from fracbem.geometry import matched_interior_count
from fracbem.pipeline import ConfigError, RunConfig, build_geometry, run
from fracbem.problems import example1, example5

# alpha = 1 keeps the time factor smooth, so the error reflects the spatial discretisation
SMALL = dict(example="1", case="II", alpha=1.0, N=40, M=25, K=8)


@pytest.fixture(scope="module")
def small_run():
    return run(RunConfig(**SMALL))


class TestRunConfig:
    def test_defaults_from_problem(self):
        cfg = RunConfig(example="1", alpha=0.5).resolved()
        assert cfg.L == 1.5 and cfg.t_eval == (1.5,)
        assert cfg.M == 100

    def test_example5_default_M(self):
        cfg = RunConfig(example="5", N=50, K=16).resolved()
        assert cfg.M == example5().default_M == 132 and cfg.L == 4.0

    def test_M_policies(self):
        p = example1("I", 0.5)
        assert RunConfig(M="auto").M_policy == "auto"
        assert RunConfig(M=None).M_policy == "auto"
        assert RunConfig(M=30).M_policy == "fixed"
        m = RunConfig(N=80, M="matched")
        assert m.M_policy == "matched"
        assert m.interior_count(p) == matched_interior_count(p.curve, 80)
        assert RunConfig(N=160, M="matched").interior_count(p) > m.interior_count(p)

    def test_scalar_t_eval(self):
        assert RunConfig(t_eval=0.5, example="1", alpha=0.5).resolved().t_eval == (0.5,)

    @pytest.mark.parametrize("kw,msg", [
        (dict(N=6), "N >= 8"),
        (dict(M=2), "M >= 4"),
        (dict(M="many"), "M must be"),
        (dict(example="2", alpha=1.7, K=1), r"K >= ceil"),
        (dict(L=-1.0), "L must be positive"),
        (dict(L=1.0, t_eval=(1.5,)), "outside"),
        (dict(rbf_c=0.0), "rbf_c"),
        (dict(derivatives=("zz",)), "derivative"),
        (dict(tau_method="lu"), "tau_method"),
        (dict(sampling="random"), "sampling"),
        (dict(example="7"), "unknown example"),
        (dict(example="1", alpha=1.5), "alpha"),
    ])
    def test_invalid(self, kw, msg):
        with pytest.raises(ConfigError, match=msg):
            RunConfig(**{"alpha": 0.5, **kw}).resolved()


class TestRun:
    def test_outputs(self, small_run):
        r = small_run
        t = r.config.t_eval[0]
        assert set(r.fields[t]) == {"00"}
        assert r.fields[t]["00"].shape == (r.ops.interior.M,)
        rep = r.errors[t]["00"]
        assert rep.M == r.ops.interior.M
        assert 0 < rep.rms <= rep.l_inf
        assert rep.rms < 1e-3 * np.abs(r.exact[t]["00"]).max()

    def test_metadata(self, small_run):
        meta = small_run.metadata()
        for key in ("problem", "N", "M", "M_policy", "rbf_c", "shape_factor", "condition",
                    "tau_method", "tau_residual", "kernel_backend", "deviations", "timings"):
            assert key in meta
        assert meta["N"] == 40 and meta["M"] == 25 and meta["M_policy"] == "fixed"
        assert meta["condition"]["tau"] >= 1

    def test_b_matches_psi(self, small_run):
        t = 0.3
        np.testing.assert_allclose(small_run.b(t), small_run.solution.eval_b(t))

    def test_derivatives_requested(self):
        r = run(RunConfig(**{**SMALL, "derivatives": ("x", "xy")}))
        t = r.config.t_eval[0]
        assert set(r.fields[t]) == {"00", "x", "xy"}
        assert set(r.errors[t]) == {"00", "x", "xy"}

    def test_shared_geometry(self, small_run):
        cfg = RunConfig(**SMALL).resolved()
        geo = build_geometry(cfg.problem(), cfg.N, cfg.M, cfg.rbf_c)
        again = run(RunConfig(**SMALL), geometry=geo)
        t = cfg.t_eval[0]
        np.testing.assert_array_equal(again.fields[t]["00"], small_run.fields[t]["00"])

    def test_deterministic(self, small_run):
        again = run(RunConfig(**SMALL))
        t = small_run.config.t_eval[0]
        np.testing.assert_array_equal(again.fields[t]["00"], small_run.fields[t]["00"])

    def test_no_exact_solution(self):
        r = run(RunConfig(example="2", alpha=1.5, N=40, M=25, K=6))
        assert r.errors == {} and r.exact == {}
        assert np.all(np.isfinite(r.fields[0.5]["00"]))

    @pytest.mark.parametrize("example,alpha,needle", [
        ("2", 1.5, "trace"), ("3", 1.5, "regenerated"), ("4", 1.5, "unit square")])
    def test_deviations_recorded(self, example, alpha, needle):
        r = run(RunConfig(example=example, alpha=alpha, N=40, M=16, K=4))
        assert any(needle in d for d in r.metadata()["deviations"])

    def test_multiple_times(self):
        r = run(RunConfig(**{**SMALL, "t_eval": (0.1, 0.5)}))
        assert list(r.fields) == [0.1, 0.5]
        assert r.errors[0.1]["00"].rms > 0
