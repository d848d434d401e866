from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import q_const
from holee_lattice.asymptotics import (
    ALL_DOWN,
    ALL_UP,
    BOUNDED,
    DIVERGES_NEGATIVE,
    DIVERGES_TO_INFINITY,
    EXTENDED,
    CLASSICAL,
    classify_series,
    drawback_report,
    f_infinity_estimate,
    short_rate_profile,
)
from holee_lattice.lattice import DiscountCurve, build_lattice, short_rate
from holee_lattice.model import (
    Convention,
    ModelParams,
    SaturatingScale,
    TimeGrid,
    UniformEta,
    classical_model,
)

GRID = TimeGrid(1.0, 20)
CURVE = DiscountCurve.flat(GRID, 0.05)
SAT = SaturatingScale(0.4, 5.0)


def classical(delta=0.99, q=0.5):
    return classical_model(q, delta, GRID)


def extended(convention=Convention.TIME_TO_MATURITY):
    return ModelParams(GRID, UniformEta(), SAT, q_const(0.5), convention=convention)


def classical_closed_form(n, ups, y=0.05, q=0.5, delta=0.99):
    """Short rate at node (n, ups) of the classical model on a flat curve."""
    return y + math.log(q + (1 - q) * delta**n) + (n - ups) * math.log(1 / delta)


# --- verdict rules ---------------------------------------------------------------


def test_classify_linear_growth():
    assert classify_series(0.01 * np.arange(200)).kind == DIVERGES_TO_INFINITY


def test_classify_explosion_above_level():
    assert classify_series(np.linspace(0, 11, 40)).kind == DIVERGES_TO_INFINITY


def test_classify_negative_slide():
    assert classify_series(-0.01 * np.arange(200)).kind == DIVERGES_NEGATIVE


def test_classify_constant_is_bounded():
    v = classify_series(np.full(100, 0.2))
    assert v.kind == BOUNDED and v.lo == v.hi == 0.2
    assert str(v) == "Bounded(0.2, 0.2)"


def test_classify_saturating_growth_is_bounded():
    # rising but decelerating toward 1
    r = 1 - np.exp(-np.arange(400) / 20)
    assert classify_series(r).kind == BOUNDED


def test_classify_positive_decline_is_bounded():
    r = 0.1 + np.exp(-np.arange(100) / 10)
    assert classify_series(r).kind == BOUNDED


def test_classify_short_series():
    assert classify_series([1.0, 2.0, 3.0]).kind == BOUNDED


# --- profiles -------------------------------------------------------------------


def test_profile_matches_lattice_at_small_depth():
    p = classical()
    lat = build_lattice(CURVE, p, 19)
    down = short_rate_profile(CURVE, p, ALL_DOWN, 19)
    up = short_rate_profile(CURVE, p, ALL_UP, 19)
    for m in range(1, 20):
        assert down.rates[m - 1] == pytest.approx(short_rate(lat, m, 0), rel=1e-12, abs=1e-14)
        assert up.rates[m - 1] == pytest.approx(short_rate(lat, m, m), rel=1e-12, abs=1e-14)


def test_classical_profile_closed_form():
    down = short_rate_profile(CURVE, classical(), ALL_DOWN, 500)
    up = short_rate_profile(CURVE, classical(), ALL_UP, 500)
    n = np.arange(1, 501)
    assert np.allclose(down.rates, [classical_closed_form(k, 0) for k in n], rtol=0, atol=1e-10)
    assert np.allclose(up.rates, [classical_closed_form(k, k) for k in n], rtol=0, atol=1e-10)


def test_classical_eventual_monotonicity():
    down = short_rate_profile(CURVE, classical(), ALL_DOWN, 500)
    up = short_rate_profile(CURVE, classical(), ALL_UP, 500)
    q = 3 * 500 // 4
    # down moves multiply bond prices by D < 1, so the all-down rate climbs
    assert np.all(np.diff(down.rates[q:]) > 0)
    assert np.all(np.diff(up.rates[q:]) < 0)
    assert down.verdict.kind == DIVERGES_TO_INFINITY
    assert up.verdict.kind == DIVERGES_NEGATIVE
    # per-step increment approaches ln(1 / delta); ln(q + (1-q) delta^n) still bends it slightly
    slope = np.polyfit(down.steps[q:], down.rates[q:], 1)[0]
    assert slope == pytest.approx(math.log(1 / 0.99), rel=2e-2)
    late = np.polyfit(np.arange(1500, 2000), [classical_closed_form(k, 0) for k in range(1500, 2000)], 1)[0]
    assert late == pytest.approx(math.log(1 / 0.99), rel=1e-6)


def test_classical_up_rate_limit():
    up = short_rate_profile(CURVE, classical(), ALL_UP, 2000)
    assert up.rates[-1] == pytest.approx(0.05 + math.log(0.5), abs=1e-6)


def test_extended_bounded_and_window_shrinks():
    for path in (ALL_DOWN, ALL_UP):
        short = short_rate_profile(CURVE, extended(), path, 200)
        long = short_rate_profile(CURVE, extended(), path, 1000)
        assert long.verdict.kind == BOUNDED
        assert long.window_width <= short.window_width + 1e-6


def test_extended_calendar_time_positive():
    rep = short_rate_profile(CURVE, extended(Convention.CALENDAR_TIME), ALL_DOWN, 500)
    assert np.all(rep.rates[250:] > -1e-9)


def test_profile_depth_limits():
    with pytest.raises(ValueError):
        short_rate_profile(CURVE, classical(), ALL_DOWN, 0)
    with pytest.raises(ValueError):
        short_rate_profile(CURVE, classical(), ALL_DOWN, 2001)
    with pytest.raises(ValueError):
        short_rate_profile(CURVE, classical(), "Sideways", 5)


def test_profile_series_fields():
    rep = short_rate_profile(CURVE, extended(), ALL_DOWN, 50)
    assert rep.steps.size == rep.rates.size == rep.bonds.size == rep.f_inf.size == 50
    assert np.allclose(rep.bonds, np.exp(-rep.rates))
    assert rep.mode == EXTENDED and not rep.truncated
    assert len(list(rep.records())) == 50


def test_extreme_classical_stays_finite():
    rep = short_rate_profile(CURVE, classical(delta=1e-300), ALL_DOWN, 2000)
    assert not rep.truncated and rep.rates.size == 2000
    assert rep.verdict.kind == DIVERGES_TO_INFINITY


# --- F_inf ----------------------------------------------------------------------


def test_f_inf_degenerate_tree():
    p = classical(delta=1 - 1e-12)
    est = f_infinity_estimate(CURVE, p, [0, 1, 0], 2.0, 60.0)
    assert np.allclose(est.ratios, math.exp(0.05), rtol=1e-9)
    assert est.limit == pytest.approx(math.exp(0.05), rel=1e-9)


def test_f_inf_classical_converges_geometrically():
    est = f_infinity_estimate(CURVE, classical(), [0] * 11, 10.0, 2000.0)
    d = np.abs(np.diff(est.ratios))
    assert est.cauchy < 1e-7
    assert np.allclose(d[-100:] / d[-101:-1], 0.99, atol=1e-6)


def test_f_inf_extended_converges():
    short = f_infinity_estimate(CURVE, extended(), [0] * 11, 10.0, 400.0)
    long = f_infinity_estimate(CURVE, extended(), [0] * 11, 10.0, 2000.0)
    assert np.all(np.diff(np.abs(np.diff(long.ratios))) <= 0)
    assert long.cauchy < short.cauchy < 1e-4
    assert abs(long.limit - short.limit) < 1e-2


def test_f_inf_argument_checks():
    with pytest.raises(ValueError):
        f_infinity_estimate(CURVE, classical(), [0] * 3, 5.0, 40.0)
    with pytest.raises(ValueError):
        f_infinity_estimate(CURVE, classical(), [0] * 3, 1.5, 40.0)
    with pytest.raises(ValueError):
        f_infinity_estimate(CURVE, classical(), [0] * 3, 2.0, 3.0)


# --- drawback report ----------------------------------------------------------------


def test_drawback_depth_one():
    rep = drawback_report(CURVE, classical(), extended(), 1)
    rows = list(rep.rows())
    assert len(rows) == 1 and rows[0][0] == 1
    assert all(math.isfinite(x) for x in rows[0][1:])


def test_drawback_degenerate_classical_bounded():
    rep = drawback_report(CURVE, classical(delta=1 - 1e-12), extended(), 300)
    assert all(v.kind == BOUNDED for v in rep.verdicts.values())
    assert not rep.contract_holds


def test_drawback_contract_reference():
    rep = drawback_report(CURVE, classical(), extended(), 500)
    v = rep.verdicts
    assert v["r_classical_down"].kind == DIVERGES_TO_INFINITY
    assert v["r_classical_up"].kind == DIVERGES_NEGATIVE
    assert v["r_extended_down"].kind == BOUNDED and v["r_extended_up"].kind == BOUNDED
    assert rep.contract_holds
    assert rep.reports[(CLASSICAL, ALL_DOWN)].mode == CLASSICAL
    assert rep.COLUMNS == ("step", "r_classical_down", "r_classical_up", "r_extended_down", "r_extended_up")


def test_drawback_requires_shared_dt():
    other = classical_model(0.5, 0.99, TimeGrid(0.5, 20))
    with pytest.raises(ValueError):
        drawback_report(CURVE, other, extended(), 10)
