import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qdd.diagnostics import (dummy_integral, entropy, entropy_report, fisher_information,
                             fisher_information_log_form, gronwall_envelope, hessian_decomposition,
                             hessian_l2, log_sobolev_ratio, slab_curvature_check)
from qdd.grid import build_grid, integrate
from qdd.inequalities import SampleSpec, neumann_family, sample_test_function

from conftest import rate


@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
def test_entropy_of_constants(slab, c):
    assert entropy(slab, np.full(slab.N, c)) == pytest.approx(c * (math.log(c) - 1) + 1,
                                                             abs=1e-12)


def test_entropy_half_two_half_zero():
    # nodes on either side of x = 1/2; the midpoint cell gets the mean value
    g = build_grid(1, "slab", 2001)
    n = np.where(g.nodes < 0.5, 2.0, 0.0)
    n[g.N // 2] = 1.0
    ref = 0.5 * (2 * math.log(2) - 1) + 0.5
    assert ref == pytest.approx(math.log(2))
    assert entropy(g, n) == pytest.approx(ref, abs=1e-3)


def test_entropy_rejects_negative(slab):
    n = np.ones(slab.N)
    n[3] = -1e-3
    with pytest.raises(ValueError):
        entropy(slab, n)


@given(st.lists(st.floats(0, 20), min_size=5, max_size=5))
def test_entropy_nonnegative(vals):
    g = build_grid(2, "radial", 51)
    n = np.interp(g.nodes, np.linspace(0, 1, 5), vals)
    assert entropy(g, n) >= -1e-12


def test_fisher_constant_zero(disc):
    assert fisher_information(disc, np.full(disc.N, 0.3)) == 0.0


def test_fisher_exponential_profile():
    errs, hs = [], []
    for N in (101, 201, 401):
        g = build_grid(1, "slab", N)
        rho = np.exp(g.nodes / 2) / math.sqrt(math.e - 1)
        hs.append(g.h)
        errs.append(abs(fisher_information(g, rho) - 1.0))
    assert errs[-1] < 1e-5
    assert rate(hs, errs) >= 1.8


@pytest.mark.parametrize("d", [1, 2, 3])
def test_fisher_forms_agree(d):
    g = build_grid(d, "slab" if d == 1 else "radial", 801)
    n = neumann_family(g, 0.5)
    a = fisher_information(g, np.sqrt(n))
    b = fisher_information_log_form(g, n)
    assert a == pytest.approx(b, rel=1e-4)


@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_fisher_zero_iff_constant(coefs):
    g = build_grid(2, "radial", 61)
    rho = 4 + sum(c * np.cos((i + 1) * np.pi * g.nodes**2) for i, c in enumerate(coefs))
    J = fisher_information(g, rho)
    assert J >= 0
    if max(abs(c) for c in coefs) > 1e-3:
        assert J > 0
    else:
        assert J < 1e-3


def test_entropy_report_json(disc):
    n = neumann_family(disc)
    n /= integrate(disc, n)
    d = json.loads(entropy_report(disc, n).to_json())
    assert set(d) == {"entropy", "fisher", "mass", "hessian_l2", "min_n", "max_n"}
    assert d["mass"] == pytest.approx(1.0)
    assert d["entropy"] >= 0 and d["fisher"] >= 0 and d["hessian_l2"] >= 0


def test_hessian_decomposition_constant(disc):
    hd = hessian_decomposition(disc, np.full(disc.N, 1.5))
    for f in (hd.xi, hd.eta, hd.mu, hd.varrho_sq):
        assert np.max(np.abs(f)) < 1e-9


def test_hessian_decomposition_paraboloid():
    g = build_grid(2, "radial", 201)
    hd = hessian_decomposition(g, 1 + g.nodes**2)
    # Neumann reflection at r = 1 does not hold for 1 + r^2, so skip the end node
    assert np.max(np.abs(hd.mu[:-1])) < 1e-10
    assert np.max(np.abs(hd.varrho_sq[:-1])) < 1e-10


@pytest.mark.parametrize("d", [2, 3])
def test_hessian_identity_on_samples(d):
    g = build_grid(d, "radial", 201)
    for seed in range(50):
        hd = hessian_decomposition(g, sample_test_function(g, SampleSpec(seed=seed)))
        assert hd.identity_residual <= 1e-10
        assert hd.varrho_sq.min() >= -1e-10 * max(1.0, np.max(np.abs(hd.eta)) ** 2)


def test_hessian_decomposition_slab_rejected(slab):
    with pytest.raises(ValueError):
        hessian_decomposition(slab, np.ones(slab.N))
    assert slab_curvature_check(slab, neumann_family(slab)) == 0.0


def test_dummy_integral_constant(disc):
    assert dummy_integral(disc, np.full(disc.N, 0.7)) == 0.0


@pytest.mark.parametrize("d", [1, 2, 3])
def test_dummy_integral_refines(d):
    hs, errs = [], []
    for N in (101, 201, 401):
        g = build_grid(d, "slab" if d == 1 else "radial", N)
        rho = neumann_family(g)
        hs.append(g.h)
        errs.append(abs(dummy_integral(g, rho / math.sqrt(integrate(g, rho**2)))))
    assert rate(hs, errs) >= 1.8


def test_dummy_integral_rejects_nonpositive(slab):
    with pytest.raises(ValueError):
        dummy_integral(slab, np.zeros(slab.N))


def test_hessian_l2_cosine():
    g = build_grid(1, "slab", 401)
    assert hessian_l2(g, np.cos(np.pi * g.nodes)) == pytest.approx(np.pi**4 / 2, rel=1e-4)


def test_log_sobolev_ratio_sign(disc, slab):
    # near-uniform densities on a domain of measure pi have negative int n log n
    assert log_sobolev_ratio(disc, neumann_family(disc, 0.05)) < 0
    assert log_sobolev_ratio(slab, neumann_family(slab, 0.5)) > 0
    with pytest.raises(ValueError):
        log_sobolev_ratio(slab, np.ones(slab.N))


def test_gronwall_envelope_dominates_calibration():
    t = np.linspace(0, 1, 101)
    E = 2 - np.exp(-3 * t)
    rep = gronwall_envelope(t, E)
    assert rep.violations == 0
    assert np.all(E <= rep.envelope + 1e-12)
    assert rep.c3 > 0


def test_gronwall_envelope_flags_late_growth():
    t = np.linspace(0, 1, 101)
    E = 1 + np.where(t > 0.5, 50 * (t - 0.5) ** 2, 0.0)
    rep = gronwall_envelope(t, E)
    assert rep.violations > 0


def test_gronwall_envelope_validation():
    with pytest.raises(ValueError):
        gronwall_envelope([0.0], [1.0])
    with pytest.raises(ValueError):
        gronwall_envelope([0.0, 0.0], [1.0, 1.0])
