import numpy as np
import pytest

from cmvreserve.cls import ClsConfig
from cmvreserve.cmv import residuals
from cmvreserve.copula import CopulaFamily, kendall_tau
from cmvreserve.rng import RngStream
from cmvreserve.simulator import (
    SimSpec,
    conditional_estimates,
    run_consistency_study,
    simulate_square,
    simulate_triangle,
)
from cmvreserve.triangle import observed_mask


def test_gamma_moment_matching():
    s = SimSpec()
    assert s.gamma_shape == pytest.approx(1e5) and s.gamma_scale == pytest.approx(1.0)


def test_first_column_mean():
    spec = SimSpec()
    firsts = np.concatenate([simulate_triangle(spec, RngStream(0).split(r)).values[:, 0] for r in range(200)])
    assert abs(firsts.mean() - 1e5) < 3 * np.sqrt(1e5 / (200 * 11))


def test_degenerate_errors_give_noiseless_recursion():
    spec = SimSpec(n=6, error_marginal="degenerate")
    t, y = simulate_triangle(spec, RngStream(1), full=True)
    for j in range(2, 7):
        assert np.array_equal(y[:, j - 1], spec.cmv.mu(y[:, j - 2], spec.alpha, j))
    assert np.isnan(t.values[~observed_mask(6)]).all()


def test_bit_reproducible():
    spec = SimSpec()
    a = simulate_triangle(spec, RngStream(3))
    b = simulate_triangle(spec, RngStream(3))
    assert a.values.tobytes() == b.values.tobytes()


def test_true_residuals_recover_copula_and_marginal():
    spec = SimSpec()
    eps, pairs = [], []
    for r in range(300):
        y, _ = simulate_square(spec, RngStream(7).split(r))
        e = (y[:, 1:] - spec.cmv.mu(y[:, :-1], spec.alpha, np.arange(2, 12))) / spec.cmv.sigma(
            y[:, :-1], spec.beta, np.arange(2, 12))
        eps.append(e)
        pairs.append(np.column_stack([e[:, :-1].ravel(), e[:, 1:].ravel()]))
    e = np.stack(eps)
    assert abs(e.mean()) < 0.02 and abs(e.std() - 1) < 0.02
    # Gumbel(2) has tau 0.5; se of tau at ~30k pairs is well under 0.01
    assert abs(kendall_tau(np.concatenate(pairs)) - 0.5) < 0.02
    # rows are independent: correlation of row 1 and row 2 errors across replications
    r12 = np.corrcoef(e[:, 0, 0], e[:, 1, 0])[0, 1]
    assert abs(r12) < 3 / np.sqrt(e.shape[0])


def test_row_streams_are_order_free():
    spec = SimSpec(n=5)
    y, _ = simulate_square(spec, RngStream(2))
    # regenerate row 3's path on its own
    x = RngStream(2).split(3).uniforms(4)
    from cmvreserve.copula import markov_paths
    from scipy.special import ndtri

    e = ndtri(markov_paths(spec.copula, x))
    yy = y[2, 0]
    for j in range(2, 6):
        yy = spec.cmv.mu(yy, spec.alpha, j) + spec.cmv.sigma(yy, spec.beta, j) * e[j - 2]
        assert yy == pytest.approx(y[2, j - 1], rel=1e-15)


def test_noiseless_study_recovers_truth():
    spec = SimSpec(error_marginal="degenerate", replications=4)
    rep = run_consistency_study(spec, mode="conditional")
    assert np.allclose(rep.mean[:2], (2.0, 1.0), atol=1e-6)
    assert np.all(rep.sd[:2] < 1e-6)


def test_noiseless_alternating_alpha():
    spec = SimSpec(n=8, error_marginal="degenerate", replications=3)
    rep = run_consistency_study(spec, mode="alternating")
    assert np.allclose(rep.estimates[:, :2], (2.0, 1.0), atol=1e-6)


def test_study_csv_layout():
    spec = SimSpec(replications=3)
    rep = run_consistency_study(spec)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "parameter,truth,mean,sd"
    assert [l.split(",")[0] for l in lines[1:]] == ["alpha1", "alpha2", "beta1", "beta2"]
    assert rep.failures == 0


def test_study_workers_match_sequential():
    spec = SimSpec(replications=4)
    a = run_consistency_study(spec, workers=1)
    b = run_consistency_study(spec, workers=2)
    assert a.estimates.tobytes() == b.estimates.tobytes()


def test_conditional_estimates_near_truth(sim_triangle, study_spec):
    est = conditional_estimates(sim_triangle, study_spec, ClsConfig())
    assert abs(est[0] - 2) < 0.2 and abs(est[1] - 1) < 0.2


@pytest.mark.slow
def test_monte_carlo_scaling_of_study_means():
    # the spread of study means over independent studies shrinks like 1/sqrt(m)
    def means(m, k):
        return np.array([
            run_consistency_study(SimSpec(replications=m, seed=100 + s)).mean for s in range(k)
        ])

    small, big = means(10, 8), means(20, 8)
    ratio = small.var(axis=0, ddof=1) / big.var(axis=0, ddof=1)
    # expected ratio 2 for each parameter; allow the factor-of-2 band on the pooled value
    pooled = np.exp(np.mean(np.log(ratio)))
    assert 1.0 <= pooled <= 4.0


def test_spec_validation():
    with pytest.raises(ValueError):
        SimSpec(n=2)
    with pytest.raises(ValueError):
        SimSpec(error_marginal="cauchy")
    with pytest.raises(ValueError):
        run_consistency_study(SimSpec(replications=1))
    with pytest.raises(ValueError):
        run_consistency_study(SimSpec(replications=2), mode="other")
