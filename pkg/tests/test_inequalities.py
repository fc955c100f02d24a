import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qdd.errors import DegenerateRatio, DeltaTooLarge
from qdd.grid import build_grid
from qdd.inequalities import (SampleSpec, adversarial_gamma_probe, check_gagliardo_instance,
                              check_gamma_bound, check_n2_inequality, default_grid, dummy_suite,
                              eval_c0_gamma, gagliardo_suite, gamma_functionals, gamma_suite,
                              log_sobolev_suite, n2_exponent_audit, n2_required_constant,
                              n2_samples, n2_suite, sample_test_function)


# ---- sampling

def test_zero_amplitudes_give_midpoint(disc):
    u = sample_test_function(disc, SampleSpec(seed=1), amplitudes=np.zeros(6))
    assert np.all(u.values == 1.0)


def test_sampling_is_deterministic(disc):
    a = sample_test_function(disc, SampleSpec(seed=42))
    b = sample_test_function(disc, SampleSpec(seed=42))
    assert np.array_equal(a.values, b.values)
    c = sample_test_function(disc, SampleSpec(seed=43))
    assert not np.array_equal(a.values, c.values)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_samples_pinched_and_neumann(d):
    g = default_grid(d)
    k = 0.2
    for seed in range(1000):
        u, dn = sample_test_function(g, SampleSpec(seed=seed, k=k), with_normal_derivative=True)
        assert k <= u.values.min() and u.values.max() <= 1 / k
        assert abs(dn) <= 1e-10


@pytest.mark.parametrize("kw", [{"k": 0.0}, {"k": 1.0}, {"modes": -1}, {"margin": 5.0}])
def test_sample_spec_validation(kw):
    with pytest.raises(ValueError):
        SampleSpec(seed=0, **kw)


# ---- c0 / gamma

def test_c0_gamma_closed_forms():
    assert eval_c0_gamma(2, 0.0) == pytest.approx((0.75, 0.875))
    assert eval_c0_gamma(2, 0.1) == pytest.approx((0.6875, 0.84375))
    c0, _ = eval_c0_gamma(3, 0.0)
    assert c0 == pytest.approx(0.6) and c0 == pytest.approx(3 / 5)
    assert eval_c0_gamma(3, 1e-3)[0] < 0.6


def test_c0_gamma_one_dimension():
    assert eval_c0_gamma(1, 0.05) == (1.0, 1.0)
    with pytest.raises(DeltaTooLarge):
        eval_c0_gamma(1, 0.4)


@pytest.mark.parametrize("d,delta", [(2, 0.375), (2, 0.5), (3, 0.36), (3, 0.4)])
def test_c0_gamma_too_large(d, delta):
    # c0 > 0 needs delta < 3/8 in d = 2 and delta < 9/25 in d = 3
    with pytest.raises(DeltaTooLarge):
        eval_c0_gamma(d, delta)


@pytest.mark.parametrize("d,delta", [(2, 0.37), (3, 0.355)])
def test_c0_gamma_near_threshold(d, delta):
    c0, gamma = eval_c0_gamma(d, delta)
    assert 0 < c0 < 0.05
    assert gamma == pytest.approx((1 + (d - 1) * c0) / d)


@pytest.mark.parametrize("d", [2, 3])
def test_gamma_monotone_in_delta(d):
    deltas = np.linspace(1e-4, 0.15, 40)
    vals = [eval_c0_gamma(d, x) for x in deltas]
    gammas = [v[1] for v in vals]
    assert all(b < a for a, b in zip(gammas, gammas[1:]))
    assert all(v[0] < 3 / (d + 2) for v in vals)


def test_gamma_bound_constant(disc):
    chk = check_gamma_bound(disc, np.full(disc.N, 2.0), 0.05)
    assert chk.J == 0 and chk.K == 0 and chk.margin == 0


def test_gamma_functional_one_dimensional_identity():
    # in one dimension J - K = (1/3 - delta) int u'^4/u^2 after integration by parts
    g = build_grid(1, "slab", 2001)
    u = 1.5 + 0.4 * np.cos(np.pi * g.nodes)
    delta = 0.1
    J, K = gamma_functionals(g, u, delta)
    du = -0.4 * np.pi * np.sin(np.pi * g.nodes)
    ref = (1 / 3 - delta) * np.trapezoid(du**4 / u**2, g.nodes)
    assert J - K == pytest.approx(ref, rel=1e-4)


def test_gamma_suite_small():
    rep = gamma_suite(2, 0.05, trials=100, seed=3)
    assert rep.violations == 0
    assert rep.worst_margin >= -1e-8
    d = json.loads(rep.to_json())
    for key in ("inequality", "d", "delta", "trials", "violations", "worst_margin",
                "empirical_constant", "seed"):
        assert key in d


def test_adversarial_probe_budget():
    worst, evals = adversarial_gamma_probe(2, 0.05, restarts=5, budget=500, N=61)
    assert evals <= 500
    assert worst >= -1e-8


# ---- fourth-moment bound

def test_n2_unit_constant():
    g = build_grid(1, "slab", 101)
    assert n2_required_constant(g, np.ones(g.N), 0.1, 0.1) == pytest.approx(1.0, rel=1e-14)


@given(seed=st.integers(0, 10**6), d2=st.floats(0.01, 1.0))
def test_n2_monotone_in_delta2(seed, d2):
    g = default_grid(2, 81)
    u = sample_test_function(g, SampleSpec(seed=seed))
    assert check_n2_inequality(g, u, 0.1, 2 * d2) <= check_n2_inequality(g, u, 0.1, d2)


def test_n2_constant_order_independent():
    vals = n2_samples(2, 200, 5, 0.1, 0.1, N=81)
    rng = np.random.default_rng(0)
    assert abs(np.max(vals) - np.max(rng.permutation(vals))) < 1e-12


def test_n2_suite_small():
    rep = n2_suite(2, trials=100, holdout=50, seed=1, N=81)
    assert np.isfinite(rep.empirical_constant)
    assert rep.extra["relative_change"] < 0.1
    assert rep.trials == 200


@pytest.mark.parametrize("d,alpha,ok", [(2, 0.5, True), (3, 0.5, True), (3, 0.2, False)])
def test_exponent_audit(d, alpha, ok):
    a = n2_exponent_audit(d, alpha)
    assert a["alpha_admissible"] is ok
    assert a["young_weight"] == pytest.approx(d * (3 - alpha) / 8)
    assert a["power_u_l2"] == pytest.approx((16 - (3 - alpha) * d) / 4)


def test_exponent_audit_rejects_slab():
    with pytest.raises(ValueError):
        n2_exponent_audit(1, 0.5)


# ---- interpolation instances

def test_gns_constant_degenerate(slab):
    with pytest.raises(DegenerateRatio):
        check_gagliardo_instance(slab, np.ones(slab.N))


def test_gns_single_cosine_closed_form():
    pi2 = math.pi**2
    h22 = 0.5 * (1 + pi2 + pi2**2)
    exact = 1.0 / (h22 ** (1 / 8) * 0.5 ** (3 / 8))
    errs = []
    for N in (101, 201, 401):
        g = build_grid(1, "slab", N)
        errs.append(abs(check_gagliardo_instance(g, np.cos(math.pi * g.nodes), "sup") - exact))
    assert errs[-1] < 1e-4
    assert errs[0] / errs[-1] > 10


def test_gns_unknown_instance(slab):
    with pytest.raises(ValueError):
        check_gagliardo_instance(slab, np.cos(np.pi * slab.nodes), "grad6")


def test_gns_suite_stable_slab():
    rep = gagliardo_suite(1, "sup", trials=50)
    assert np.isfinite(rep.empirical_constant)
    assert rep.extra["stable"]


def test_log_sobolev_suite_records_constant():
    rep = log_sobolev_suite(1, trials=50)
    assert rep.violations == 0 and np.isfinite(rep.empirical_constant)


def test_dummy_suite_passes():
    rep = dummy_suite(2, trials=20)
    assert rep.violations == 0
    assert rep.extra["rate"] >= 1.8
