import io
import math

import numpy as np
import pytest

from merton_lab.closed_form import ProportionalStrategy, optimal_strategy, optimal_wealth_law
from merton_lab.model import InvalidModelError, ModelSpec
from merton_lab.sde import (PathBundle, SimConfig, iter_blocks, martingale_samples,
                            optimal_path_exact, path_normals, simulate)

# frozen draws of the per-path Philox streams
FROZEN_NORMALS = [[-0.5405856207153426, -1.356478457845364, 0.7074658823123272],
                  [1.0676249360529262, -0.5032857529911259, -0.8068499685732814]]
# set B optimum, x=1, T=1, 10 steps, 4 paths, seed 7
FROZEN_XT = [0.9822054471934343, 1.0377524341970974, 0.8819445672946234, 0.7659441592089492]
FROZEN_YT = [1.0059270548543804, 0.9011221065491924, 1.2476379798849722, 1.6541578414835922]
FROZEN_INT = [0.02979855270622385, 0.03049440242433511, 0.031952576116194197, 0.03576450731023982]


def test_frozen_normals():
    np.testing.assert_array_equal(path_normals(20240601, [0, 1], 3), FROZEN_NORMALS)


def test_frozen_paths(spec_b, backend):
    b = simulate(spec_b, optimal_strategy(spec_b), 1.0, SimConfig(1.0, 10, 4, 7))
    np.testing.assert_allclose(b.wealth[:, -1], FROZEN_XT, rtol=1e-13)
    np.testing.assert_allclose(b.deflator[:, -1], FROZEN_YT, rtol=1e-13)
    np.testing.assert_allclose(b.deflated_consumption_integral, FROZEN_INT, rtol=1e-13)


def test_exact_log_matches_explicit_formula(spec_b):
    cfg = SimConfig(2.0, 20, 3, 11)
    z = path_normals(cfg.seed, np.arange(3), cfg.steps)
    b = simulate(spec_b, optimal_strategy(spec_b), 1.5, cfg)
    w = math.sqrt(cfg.dt) * z.sum(axis=1)
    # log drift r + sigma lam theta - kappa - sigma^2 theta^2/2 = 0.005, vol 0.1
    np.testing.assert_allclose(b.wealth[:, -1], 1.5 * np.exp(0.005 * 2.0 + 0.1 * w), rtol=1e-12)
    np.testing.assert_allclose(b.deflator[:, -1], np.exp((-0.02 - 0.02) * 2.0 - 0.2 * w), rtol=1e-12)


def test_optimal_exact_law_matches_scheme(spec_b):
    cfg = SimConfig(5.0, 50, 16, 3)
    a = optimal_path_exact(spec_b, 2.0, cfg)
    b = simulate(spec_b, optimal_strategy(spec_b), 2.0, cfg)
    np.testing.assert_allclose(a.wealth, b.wealth, rtol=1e-12)
    np.testing.assert_allclose(a.deflator, b.deflator, rtol=1e-12)
    np.testing.assert_allclose(a.deflated_consumption_integral, b.deflated_consumption_integral,
                               rtol=1e-11)


def test_set_a_deterministic_path(spec_a):
    b = simulate(spec_a, optimal_strategy(spec_a), 1.0, SimConfig(1.0, 100, 1, 5))
    assert b.wealth[0, -1] == pytest.approx(math.exp(-0.5), rel=1e-13)
    np.testing.assert_array_equal(b.deflator, 1.0)


def test_constant_path():
    spec = ModelSpec.from_values(0.0, 0.05, 0.2, 0.1, 3.0)
    b = simulate(spec, ProportionalStrategy(0.0, 0.0), 2.0, SimConfig(1.0, 10, 3, 1))
    np.testing.assert_array_equal(b.wealth, 2.0)
    np.testing.assert_array_equal(b.consumption, 0.0)


def test_path_independent_of_batch(spec_b):
    strat = ProportionalStrategy(0.05, 0.7)
    small = simulate(spec_b, strat, 1.0, SimConfig(1.0, 30, 3, 99))
    big = simulate(spec_b, strat, 1.0, SimConfig(1.0, 30, 40, 99))
    np.testing.assert_array_equal(small.wealth, big.wealth[:3])
    blocks = list(iter_blocks(spec_b, strat, 1.0, SimConfig(1.0, 30, 40, 99), block=7))
    assert [b.n_paths for b in blocks] == [7, 7, 7, 7, 7, 5]
    np.testing.assert_array_equal(np.vstack([b.wealth for b in blocks]), big.wealth)


def test_invariants(spec_b):
    b = simulate(spec_b, ProportionalStrategy(0.1, 1.5), 3.0, SimConfig(4.0, 40, 50, 2))
    assert np.all(b.wealth > 0) and np.all(b.deflator > 0)
    np.testing.assert_array_equal(b.wealth[:, 0], 3.0)
    np.testing.assert_array_equal(b.deflator[:, 0], 1.0)
    np.testing.assert_allclose(b.cumulative_deflated_consumption()[:, -1],
                               b.deflated_consumption_integral, rtol=1e-12)
    with pytest.raises(ValueError):
        b.wealth[0, 0] = 1.0


def test_martingale_samples(spec_b):
    cfg = SimConfig(1.0, 10, 4, 7)
    m = martingale_samples(spec_b, optimal_strategy(spec_b), 1.0, cfg)
    np.testing.assert_allclose(m, np.array(FROZEN_XT) * FROZEN_YT + FROZEN_INT, rtol=1e-13)


def test_rejects_bad_inputs(spec_b):
    with pytest.raises(InvalidModelError):
        simulate(spec_b, optimal_strategy(spec_b), 0.0, SimConfig(1.0, 10, 1))
    for bad in (dict(horizon=0.0, steps=1, paths=1), dict(horizon=1.0, steps=0, paths=1),
                dict(horizon=1.0, steps=1, paths=0), dict(horizon=1.0, steps=1, paths=1, scheme="rk4")):
        with pytest.raises(InvalidModelError):
            SimConfig(**bad)


def test_csv_export(tmp_path, spec_a):
    cfg = SimConfig(1.0, 4, 2, 5)
    b = simulate(spec_a, optimal_strategy(spec_a), 1.0, cfg)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    b.to_csv(p1)
    simulate(spec_a, optimal_strategy(spec_a), 1.0, cfg).to_csv(p2)
    assert p1.read_bytes() == p2.read_bytes()
    lines = p1.read_text().splitlines()
    assert lines[0] == "path_id,t,X,c,Y"
    assert len(lines) == 1 + 2 * 5
    assert float(lines[-1].split(",")[2]) == pytest.approx(math.exp(-0.5), rel=1e-15)
    buf = io.StringIO()
    b.to_csv(buf)
    assert buf.getvalue() == p1.read_text()


def test_summary_fields(spec_b):
    s = simulate(spec_b, optimal_strategy(spec_b), 1.0, SimConfig(1.0, 10, 4, 7)).summary()
    assert s["seed"] == 7 and s["paths"] == 4 and s["clip_events"] == 0
    assert s["wealth_T_mean"] == pytest.approx(np.mean(FROZEN_XT), rel=1e-13)


def test_euler_weak_order_one(backend):
    # linear drift 1, vol 0.5: E[X_T] = e exactly; Euler error ~ e/(2n)
    spec = ModelSpec.from_values(r=0.5, mu=1.5, sigma=0.5, rho=2.0, gamma=2.0)
    strat = ProportionalStrategy(0.5, 1.0)
    errs = []
    for n in (4, 8, 16):
        b = simulate(spec, strat, 1.0, SimConfig(1.0, n, 40_000, 17, scheme="euler"))
        errs.append(abs(b.wealth[:, -1].mean() - math.e))
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(1.5 <= q <= 3.0 for q in ratios), ratios


def test_wealth_law_moments(spec_b):
    drift, vol = optimal_wealth_law(spec_b)
    b = optimal_path_exact(spec_b, 1.0, SimConfig(10.0, 10, 4000, 8))
    lx = np.log(b.wealth[:, -1])
    se = lx.std(ddof=1) / math.sqrt(lx.size)
    assert abs(lx.mean() - drift * 10.0) <= 3 * se
    assert lx.std(ddof=1) == pytest.approx(vol * math.sqrt(10.0), rel=0.05)
