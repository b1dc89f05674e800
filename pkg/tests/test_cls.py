import numpy as np
import pytest

from cmvreserve.cls import (
    ClsConfig,
    EstimationError,
    _Design,
    _grid_start,
    default_initial_beta,
    fit_cls,
    minimize_box,
    objective_M,
    objective_V,
)
from cmvreserve.cmv import CmvSpec, ModelError, mean_step, residuals, sd_step
from cmvreserve.rng import RngStream
from cmvreserve.simulator import SimSpec, simulate_triangle
from cmvreserve.triangle import Triangle

from conftest import noiseless_triangle


def brute_M_V(t, alpha, beta, mean="sherman_exp", variance="exp_sqrt"):
    """Literal double loop over development years and accident years."""
    n = t.n
    M = V = 0.0
    for j in range(2, n + 1):
        sm = sv = 0.0
        for i in range(1, n + 2 - j):
            yp, y = t[i, j - 1], t[i, j]
            mu = mean_step(yp, alpha, j, mean)
            s = sd_step(yp, beta, j, variance)
            sm += (y - mu) ** 2 / s**2
            sv += ((y - mu) ** 2 - s**2) ** 2
        M += sm / (n + 1 - j)
        V += sv / (n + 1 - j)
    return M / (n - 1), V / (n - 1)


@pytest.fixture(scope="module")
def small():
    return simulate_triangle(SimSpec(n=4), RngStream(42))


def test_objectives_match_brute_force(small):
    rng = np.random.default_rng(0)
    spec = CmvSpec()
    for _ in range(100):
        a = (rng.uniform(0.1, 5), rng.uniform(0.1, 3))
        b = (rng.uniform(1, 500), rng.uniform(0.01, 2))
        m_ref, v_ref = brute_M_V(small, a, b)
        assert objective_M(small, spec, a, b) == pytest.approx(m_ref, rel=1e-12)
        assert objective_V(small, spec, a, b) == pytest.approx(v_ref, rel=1e-12)


@pytest.mark.parametrize("mean", ["inverse_power", "exp_decay"])
@pytest.mark.parametrize("variance", ["power_sqrt", "exp_linear"])
def test_other_families_match_brute_force(small, mean, variance):
    spec = CmvSpec(mean=mean, variance=variance)
    a, b = (0.7, 0.9), (3.0, 0.4)
    m_ref, v_ref = brute_M_V(small, a, b, mean, variance)
    assert objective_M(small, spec, a, b) == pytest.approx(m_ref, rel=1e-12)
    assert objective_V(small, spec, a, b) == pytest.approx(v_ref, rel=1e-12)


def test_M_zero_on_noiseless_for_any_beta():
    t = noiseless_triangle()
    for b in [(1.0, 0.1), (100.0, 0.5), (1e4, 3.0)]:
        assert objective_M(t, CmvSpec(), (2.0, 1.0), b) < 1e-20


def test_M_scaling(small):
    spec = CmvSpec()
    a = (2.0, 1.0)
    m1 = objective_M(small, spec, a, (50.0, 0.5))
    m2 = objective_M(small, spec, a, (150.0, 0.5))
    assert m2 == pytest.approx(m1 / 9.0, rel=1e-12)


def test_V_zero_when_squared_deviation_equals_variance():
    # build each cell as mu + sigma (residual exactly 1)
    spec, a, b = CmvSpec(), (2.0, 1.0), (100.0, 0.5)
    n = 5
    v = np.full((n, n), np.nan)
    v[:, 0] = [1e5, 1.1e5, 0.9e5, 1.2e5, 1e5]
    for i in range(n):
        for j in range(2, n + 1 - i):
            yp = v[i, j - 2]
            v[i, j - 1] = spec.mu(yp, a, j) + spec.sigma(yp, b, j)
    t = Triangle(v)
    assert objective_V(t, spec, a, b) < 1e-9 * np.nanmax(v)


def test_V_sign_invariant(small):
    # reflect every observation about its conditional mean: residuals change sign
    spec, a, b = CmvSpec(), np.array([2.0, 1.0]), np.array([100.0, 0.5])
    d = _Design(small, spec)
    mirrored = _Design(small, spec)
    mirrored.y = 2 * spec.eta(a, d.jf) * d.y_prev - d.y
    assert mirrored.V(a, b) == pytest.approx(d.V(a, b), rel=1e-9)
    assert mirrored.M(a, b) == pytest.approx(d.M(a, b), rel=1e-9)


def test_nonpositive_claims_rejected():
    t = Triangle.from_rows([[100, 0, 10], [10, 20], [5]])
    with pytest.raises(ModelError):
        objective_M(t, CmvSpec(), (2, 1), (1, 0.5))


def test_noiseless_recovers_alpha():
    t = noiseless_triangle(n=8)
    fit, trace = fit_cls(t, CmvSpec(), ClsConfig(initial_beta=(100.0, 0.5)))
    assert np.allclose(fit.alpha, (2.0, 1.0), atol=1e-6)


def test_argmin_matches_grid_oracle(small):
    bounds = ((0.2, 5.0), (0.2, 3.0))
    spec = CmvSpec(alpha_bounds=bounds)
    d = _Design(small, spec)
    beta = np.array([100.0, 0.5])
    f = lambda a: d.M(a, beta)
    a_hat, f_hat = minimize_box(f, _grid_start(f, bounds), bounds, restarts=1, rng=RngStream(0))
    g1 = np.linspace(*bounds[0], 200)
    g2 = np.linspace(*bounds[1], 200)
    vals = np.array([[f(np.array([x, y])) for y in g2] for x in g1])
    k1, k2 = np.unravel_index(np.argmin(vals), vals.shape)
    assert abs(a_hat[0] - g1[k1]) <= g1[1] - g1[0]
    assert abs(a_hat[1] - g2[k2]) <= g2[1] - g2[0]
    assert f_hat <= vals.min() + 1e-12


def test_block_descent_property(sim_triangle):
    spec = CmvSpec()
    fit, trace = fit_cls(sim_triangle, spec, ClsConfig(initial_beta=(100.0, 0.5)))
    d = _Design(sim_triangle, spec)
    its = trace.iterations
    assert len(its) >= 1
    for (a0, b0, _, _), (a1, b1, _, _) in zip(its, its[1:]):
        assert d.M(a1, b0) <= d.M(a0, b0) + 1e-9
        assert d.V(a1, b1) <= d.V(a1, b0) + 1e-9
    assert all(np.isfinite(m) and np.isfinite(v) for _, _, m, v in its)


def test_deterministic(sim_triangle):
    cfg = ClsConfig(optimizer_restarts=2, seed=3)
    f1, t1 = fit_cls(sim_triangle, CmvSpec(), cfg)
    f2, t2 = fit_cls(sim_triangle, CmvSpec(), cfg)
    assert f1.alpha.tobytes() == f2.alpha.tobytes()
    assert f1.beta.tobytes() == f2.beta.tobytes()
    assert len(t1.iterations) == len(t2.iterations)


def test_fit_residuals_consistent(sim_triangle):
    fit, _ = fit_cls(sim_triangle)
    assert len(fit.residuals) == sim_triangle.n * (sim_triangle.n - 1) // 2
    assert fit.residuals == residuals(sim_triangle, fit.spec, fit.alpha, fit.beta)


def test_max_iterations_reported(sim_triangle):
    _, trace = fit_cls(sim_triangle, CmvSpec(), ClsConfig(max_iterations=1, epsilon=1e-300))
    assert not trace.converged
    assert any("no convergence" in w for w in trace.warnings)


def test_boundary_warning():
    t = noiseless_triangle(n=6)
    spec = CmvSpec(alpha_bounds=((0.1, 1.5), (0.1, 3.0)))
    _, trace = fit_cls(t, spec, ClsConfig(initial_beta=(100.0, 0.5)))
    assert any("boundary" in w for w in trace.warnings)


def test_default_initial_beta_is_in_box(sim_triangle):
    b = default_initial_beta(sim_triangle, CmvSpec())
    assert b[1] == 0.5 and 1e-6 <= b[0] <= 1e6


def test_minimize_box_never_worse_and_clamped():
    f = lambda x: (x[0] - 3.0) ** 2 + (x[1] + 1.0) ** 2
    x, fx = minimize_box(f, [0.5, 0.5], ((0, 2), (0, 2)), restarts=2, rng=RngStream(1))
    assert np.allclose(x, [2.0, 0.0], atol=1e-6)
    assert fx <= f(np.array([0.5, 0.5]))


def test_config_validation():
    with pytest.raises(ValueError):
        ClsConfig(max_iterations=0)
    with pytest.raises(ValueError):
        ClsConfig(epsilon=0)


def test_estimation_error_on_nonfinite(monkeypatch, small):
    monkeypatch.setattr(_Design, "V", lambda self, a, b: float("nan"))
    with pytest.raises(EstimationError):
        fit_cls(small, CmvSpec(), ClsConfig(initial_beta=(100.0, 0.5)))
