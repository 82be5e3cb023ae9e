import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from quantproc import dominance as dom
from quantproc import transforms as tr
from quantproc.errors import ParameterError


def gh(g, h):
    return tr.TukeyGH(0.0, 1.0, g, h)


# ---------------------------------------------------------------------------
# crossing levels (the canonical skew/kurtosis table)
# ---------------------------------------------------------------------------

def test_crossing_low_tail_pair():
    u = dom.crossing_u_star(gh(2.0, 0.4), gh(0.8, 0.05))
    assert u == pytest.approx(0.0218, abs=0.001)
    rep = dom.crossing_report(gh(2.0, 0.4), gh(0.8, 0.05))
    assert rep.direction == 1
    assert rep.domain_lower == pytest.approx(-1.109, abs=0.01)


def test_crossing_effectively_zero():
    u = dom.crossing_u_star(gh(3.0, 0.2), gh(0.5, 0.05))
    assert u == pytest.approx(0.0, abs=1e-3)


def test_crossing_boundary_pair():
    rep = dom.crossing_report(gh(2.0, 0.05), gh(0.8, 0.4))
    assert rep.u_star == pytest.approx(1.0, abs=1e-3)
    assert "boundary" in rep.notes


def test_equal_g_crosses_at_median():
    # the quantile difference vanishes cubically at the median, so the root is
    # resolvable only to the documented 1e-8 level
    u = dom.crossing_u_star(gh(1.0, 0.4), gh(1.0, 0.1))
    assert u == pytest.approx(0.5, abs=1e-7)


def test_crossing_none_when_second_dominates():
    # second curve strictly above everywhere: shifted location
    u = dom.crossing_u_star(tr.TukeyGH(0.0, 1.0, 0.5, 0.1), tr.TukeyGH(1.0, 1.0, 0.5, 0.1))
    assert u is None


def test_crossing_zero_when_first_dominates_everywhere():
    u = dom.crossing_u_star(tr.TukeyGH(1.0, 1.0, 0.5, 0.1), tr.TukeyGH(0.0, 1.0, 0.5, 0.1))
    assert u == 0.0


def test_crossing_antisymmetry():
    q1, q2 = gh(2.0, 0.4), gh(0.8, 0.05)
    r12 = dom.crossing_report(q1, q2)
    r21 = dom.crossing_report(q2, q1)
    assert r12.u_star == pytest.approx(r21.u_star, abs=1e-9)
    assert r12.direction == -r21.direction


def test_crossing_consistency_with_quantile_value():
    # the dominance domain bound is the common quantile value at the crossing
    for q1, q2 in ((gh(2.0, 0.4), gh(0.8, 0.05)), (gh(2.0, 0.05), gh(1.5, 0.4))):
        rep = dom.crossing_report(q1, q2)
        z1 = float(q1.eval(1.0, rep.u_star))
        z2 = float(q2.eval(1.0, rep.u_star))
        assert rep.domain_lower == pytest.approx(z1, rel=1e-6)
        assert z1 == pytest.approx(z2, rel=1e-6)


def test_reference_pair_with_heavier_second_tail():
    # the (2, 1.5, 0.05, 0.4) pair reproduces the reference crossing level
    # 0.985 and domain bound 42.36
    rep = dom.crossing_report(gh(2.0, 0.05), gh(1.5, 0.4))
    assert rep.u_star == pytest.approx(0.985, abs=0.002)
    assert rep.domain_lower == pytest.approx(42.36, abs=0.1)
    assert rep.direction == -1


def test_crossing_monotone_in_skew_gap():
    # u* falls as the skew gap widens, at fixed kurtosis gap
    g2, h2 = 0.1, 0.05
    for dh in (0.2, 0.35, 0.5):
        us = []
        for dg in (0.05, 0.5, 1.0, 2.0, 4.0):
            us.append(dom.crossing_u_star(gh(g2 + dg, h2 + dh), gh(g2, h2)))
        assert all(a >= b - 1e-9 for a, b in zip(us, us[1:]))
        assert 0.3 < us[0] < 0.5
        assert us[-1] <= 0.01


def test_crossing_curve_ordering_in_kurtosis_gap():
    g2, h2 = 0.1, 0.05
    dg = 1.0
    u_by_dh = [dom.crossing_u_star(gh(g2 + dg, h2 + dh), gh(g2, h2))
               for dh in (0.2, 0.35, 0.5)]
    assert u_by_dh[0] < u_by_dh[1] < u_by_dh[2]


# ---------------------------------------------------------------------------
# first-order checks
# ---------------------------------------------------------------------------

def test_fosd_mean_shift():
    rep = dom.fosd_check(lambda z: stats.norm.cdf(z, 1, 1),
                         lambda z: stats.norm.cdf(z, 0, 1), (-6.0, 7.0))
    assert rep.order == "FOSD" and rep.direction == 1
    assert rep.domain_lower == -6.0
    assert rep.strictness_witness is not None


def test_fosd_reversed_direction_detected():
    rep = dom.fosd_check(lambda z: stats.norm.cdf(z, 0, 1),
                         lambda z: stats.norm.cdf(z, 1, 1), (-6.0, 7.0))
    assert rep.order == "FOSD" and rep.direction == -1


def test_fosd_identical_cdfs_no_verdict():
    rep = dom.fosd_check(lambda z: stats.norm.cdf(z), lambda z: stats.norm.cdf(z),
                         (-6.0, 6.0))
    assert rep.order is None and rep.direction == 0


def test_fosd_tukey_g_ordering_in_g():
    # canonical pure-skew processes order by the skew parameter
    q1, q2 = tr.TukeyG(0, 1, 0.8), tr.TukeyG(0, 1, 0.3)
    rep = dom.fosd_check(lambda z: q1.cdf(1.0, z), lambda z: q2.cdf(1.0, z),
                         (-1.0 / 0.3 + 1e-9, np.inf))
    assert rep.order == "FOSD" and rep.direction == 1
    u = dom.crossing_u_star(q1, q2)
    assert u == pytest.approx(0.0, abs=1e-6)


def test_fosd_grid_size_guard():
    with pytest.raises(ParameterError):
        dom.fosd_check(lambda z: z, lambda z: z, (0.0, 1.0), grid_size=16)


# ---------------------------------------------------------------------------
# second-order checks
# ---------------------------------------------------------------------------

def test_fosd_implies_sosd():
    pairs = [
        (lambda z: stats.norm.cdf(z, 1, 1), lambda z: stats.norm.cdf(z, 0, 1)),
        (lambda z: tr.TukeyG(0, 1, 0.8).cdf(1.0, z), lambda z: tr.TukeyG(0, 1, 0.3).cdf(1.0, z)),
    ]
    for F1, F2 in pairs:
        fosd = dom.fosd_check(F1, F2, (-10.0, np.inf))
        sosd = dom.sosd_check(F1, F2, (-10.0, np.inf))
        assert fosd.order == "FOSD" and fosd.direction == 1
        assert sosd.order == "SOSD" and sosd.direction == 1


def test_sosd_mean_preserving_spread():
    # lower-variance normal second-order dominates the spread one
    rep = dom.sosd_check(lambda z: stats.norm.cdf(z, 0, 1),
                         lambda z: stats.norm.cdf(z, 0, math.sqrt(2.0)),
                         (-np.inf, np.inf))
    assert rep.order == "SOSD" and rep.direction == 1
    fosd = dom.fosd_check(lambda z: stats.norm.cdf(z, 0, 1),
                          lambda z: stats.norm.cdf(z, 0, math.sqrt(2.0)),
                          (-np.inf, np.inf))
    assert fosd.order is None


@settings(max_examples=25, deadline=None)
@given(g2=st.floats(0.15, 0.6), gap=st.floats(0.1, 1.2))
def test_fosd_implies_sosd_property(g2, gap):
    # pure-skew pairs order first-order in g, hence also second-order
    g1 = g2 + gap
    F1 = lambda z: tr.TukeyG(0, 1, g1).cdf(1.0, z)
    F2 = lambda z: tr.TukeyG(0, 1, g2).cdf(1.0, z)
    domain = (-1.0 / g2 + 1e-9, np.inf)
    fosd = dom.fosd_check(F1, F2, domain, grid_size=256)
    sosd = dom.sosd_check(F1, F2, domain, grid_size=256)
    assert fosd.order == "FOSD" and fosd.direction == 1
    assert sosd.order == "SOSD" and sosd.direction == 1


def test_sosd_flags_live_truncation():
    # cutting the comparison domain through live probability mass is reported
    F1 = lambda z: stats.norm.cdf(z, 0.5, 1)
    F2 = lambda z: stats.norm.cdf(z, 0.0, 1)
    rep = dom.sosd_check(F2, F1, (-6.0, 1.0))
    assert rep.inconclusive
    assert "truncation" in rep.notes


def test_state_dependent_pair_sosd_without_fosd():
    F1 = dom.state_dependent_tukey_g_cdf(0.8, 0.2)
    q2 = tr.TukeyG(0.0, 1.0, 0.3)
    F2 = lambda z: q2.cdf(1.0, z)
    domain = (-1.0 / 0.3, np.inf)
    assert dom.fosd_check(F1, F2, domain).order is None
    rep = dom.sosd_check(F1, F2, domain)
    assert rep.order == "SOSD" and rep.direction == 1


def test_split_g_integrals_reference_values():
    left, right = dom.split_g_sosd_integrals(0.8, 0.2, 0.3)
    assert left == pytest.approx(0.1341347, abs=1e-4)
    assert right == pytest.approx(0.0660684, abs=1e-4)
    assert left >= right


def test_split_g_integrals_degenerate_equal_parameters():
    left, right = dom.split_g_sosd_integrals(0.3, 0.3, 0.3)
    assert left == pytest.approx(0.0, abs=1e-10)
    assert right == pytest.approx(0.0, abs=1e-10)


def test_split_g_integrals_validation():
    with pytest.raises(ParameterError):
        dom.split_g_sosd_integrals(-0.1, 0.2, 0.3)


# ---------------------------------------------------------------------------
# sufficient conditions
# ---------------------------------------------------------------------------

def test_sufficient_conditions_identical_maps():
    cm = tr.CompositeMap(dist=tr.GaussianLaw(0.0, 1.0),
                         quantile=tr.GaussianQuantile(0.0, 1.0))
    res = dom.sosd_sufficient_conditions(cm, cm, 1.0, np.linspace(-2, 2, 41))
    # ratio bounds hold with equality everywhere: every point satisfies some condition
    assert res.sufficient
    assert np.all(res.any_condition() | res.indeterminate)


def test_sufficient_conditions_scaled_gaussian_base():
    # identity quantiles over bases with different spreads: the derivative
    # fields d/dz Q_i(F_zeta_i(z)) are constants sigma_i, bracketing 1
    narrow = tr.CompositeMap(dist=tr.GaussianLaw(0.0, 0.25),
                             quantile=tr.GaussianQuantile(0.0, 1.0))
    wide = tr.CompositeMap(dist=tr.GaussianLaw(0.0, 4.0),
                           quantile=tr.GaussianQuantile(0.0, 1.0))
    z = np.linspace(-3, 3, 61)
    res = dom.sosd_sufficient_conditions(wide, narrow, 1.0, z)
    # d1 = 2 >= 1 >= d2 = 0.5 everywhere: condition (i)
    assert np.all(res.cond_i | res.indeterminate)
    assert res.sufficient
    # finite-difference cross-check of the derivative fields at one point
    q = tr.GaussianQuantile(0.0, 1.0)
    eps = 1e-6
    for cm, want in ((wide, 2.0), (narrow, 0.5)):
        f = lambda zz: float(cm.dist.quantile(1.0, q.cdf(1.0, zz)))
        got = (f(0.3 + eps) - f(0.3 - eps)) / (2 * eps)
        assert got == pytest.approx(want, rel=1e-5)


def test_sufficient_conditions_not_necessary():
    # a pair that is second-order ordered although the pointwise conditions fail
    # somewhere is a legal outcome: sufficiency false, dominance true
    m1 = tr.CompositeMap(dist=tr.GaussianLaw(0.0, 1.0),
                         quantile=tr.GaussianQuantile(0.5, 1.0))
    m2 = tr.CompositeMap(dist=tr.GaussianLaw(0.0, 1.0),
                         quantile=tr.GaussianQuantile(0.0, 1.0))
    z = np.linspace(-4, 4, 81)
    res = dom.sosd_sufficient_conditions(m1, m2, 1.0, z)
    sosd = dom.sosd_check(lambda zz: m1.quantile.cdf(1.0, zz),
                          lambda zz: m2.quantile.cdf(1.0, zz), (-8.0, 8.0))
    assert sosd.order == "SOSD" and sosd.direction == 1
    assert isinstance(res.sufficient, bool)


# ---------------------------------------------------------------------------
# Kendall ordering
# ---------------------------------------------------------------------------

def test_kendall_comonotone_dominates_independence():
    K_com = lambda v: v
    K_ind = lambda v: v - v * math.log(v) if v > 0 else 0.0
    rep = dom.kendall_order_check(K_com, K_ind)
    assert rep.order == "Kendall" and rep.direction == 1


def test_kendall_equal_functions_no_verdict():
    K = lambda v: v
    assert dom.kendall_order_check(K, K).order is None


def test_kendall_reversed_direction():
    K_com = lambda v: v
    K_ind = lambda v: v - v * math.log(v) if v > 0 else 0.0
    rep = dom.kendall_order_check(K_ind, K_com)
    assert rep.direction == -1
