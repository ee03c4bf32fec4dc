import dataclasses
import json
import math

import pytest

from meshecon import (
    Choice,
    NumericsError,
    ParamError,
    Regime,
    competitive_price,
    eu_no_peering,
    eu_peering_no_transfers,
    eu_peering_perfcomp,
    hop_distance,
    integrate,
    intermediate_best_response,
    intermediate_count,
    leapfrog_profitable,
    leapfrog_threshold,
    nodes_within,
    originator_choice,
    originator_savings,
    price_bounds,
    regime_utilities,
    social_cost,
    value_added,
)
from conftest import make_params, random_draws
import oracles


# --------------------------------------------------------------------------
# integrate


def test_integrate_polynomials():
    assert integrate(lambda x: 2 * x, 0, 1) == pytest.approx(1.0, abs=1e-9)
    assert integrate(lambda x: x * x, 0, 1) == pytest.approx(1 / 3, abs=1e-9)
    assert integrate(lambda x: 1.0, 2, 2) == 0.0


def test_integrate_pdf_times_cost_matches_midpoint_oracle(defaults):
    oracle = oracles.midpoint(lambda x: 2 * x * x * x, 0, 1)  # pdf * cost, defaults
    assert oracle == pytest.approx(0.5, abs=1e-11)
    value = integrate(lambda x: (2 * x) * defaults.cost(x), 0, 1)
    assert value == pytest.approx(oracle, abs=1e-9)


def test_integrate_input_errors():
    with pytest.raises(ParamError):
        integrate(lambda x: x, 1, 0)
    with pytest.raises(ParamError):
        integrate(lambda x: x, 0, 1, tol=0.0)
    with pytest.raises(NumericsError):
        integrate(lambda x: math.nan, 0, 1)
    with pytest.raises(NumericsError):
        integrate(lambda x: 1 / (x - 0.5) if x != 0.5 else math.inf, 0.5, 1)


# --------------------------------------------------------------------------
# expected utilities


def test_eu_no_peering_defaults_pinned(defaults):
    got = eu_no_peering(defaults)
    assert got.eu_originator == pytest.approx(oracles.EU_ORIG_NO_PEERING, abs=1e-9)
    assert got.eu_intermediate == 0.0
    assert got.eu_outsider == pytest.approx(oracles.EU_OUT_NO_PEERING, abs=1e-9)
    assert got.total == got.eu_originator + got.eu_intermediate + got.eu_outsider
    orig, inter, out = oracles.eu_oracle("NO_PEERING")
    assert got.eu_originator == pytest.approx(orig, abs=1e-8)
    assert got.eu_outsider == pytest.approx(out, abs=1e-8)


def test_eu_no_peering_zero_pollution_and_zero_surplus(defaults):
    no_pollution = eu_no_peering(dataclasses.replace(defaults, w=0.0))
    assert no_pollution.eu_outsider == 0.0
    # zero-surplus construction: v equals the mean connection cost; bypasses
    # validation on purpose
    boundary = eu_no_peering(dataclasses.replace(defaults, v=0.5))
    assert boundary.eu_originator == pytest.approx(0.0, abs=1e-9)


def test_eu_no_transfers_defaults_match_oracle(defaults):
    got, sustainable = eu_peering_no_transfers(defaults)
    assert sustainable is False
    orig, inter, out = oracles.eu_oracle("NOTRANS")
    assert got.eu_originator == pytest.approx(orig, abs=1e-8)
    assert got.eu_intermediate == pytest.approx(inter, abs=1e-8)
    assert got.eu_outsider == pytest.approx(out, abs=1e-8)


def test_eu_no_transfers_originator_dominates_direct(defaults):
    direct = eu_no_peering(defaults).eu_originator
    relayed = eu_peering_no_transfers(defaults)[0].eu_originator
    assert relayed > direct  # c(D(x)) <= c(x) pointwise


def test_eu_no_transfers_never_sustainable():
    for p, _ in random_draws(25, seed=11):
        assert eu_peering_no_transfers(p)[1] is False


def test_eu_no_transfers_zero_pollution(defaults):
    got, _ = eu_peering_no_transfers(dataclasses.replace(defaults, w=0.0))
    assert got.eu_outsider == 0.0


def test_eu_perfcomp_defaults_match_oracle(defaults):
    got = eu_peering_perfcomp(defaults)
    orig, inter, out = oracles.eu_oracle("PERFCOMP")
    assert got.eu_originator == pytest.approx(orig, abs=1e-8)
    assert got.eu_intermediate == pytest.approx(inter, abs=1e-8)
    assert got.eu_outsider == pytest.approx(out, abs=1e-8)


def test_eu_perfcomp_zero_pollution_zeroes_both_roles(defaults):
    got = eu_peering_perfcomp(dataclasses.replace(defaults, w=0.0))
    assert got.eu_intermediate == 0.0
    assert got.eu_outsider == 0.0


def test_eu_perfcomp_outsider_nonpositive_in_sparse_networks():
    # at n*d_max barely above 1 most of the range has N(x) < 1; flooring the
    # receiver-exempt circle count at zero keeps outsiders from "gaining"
    p = make_params(n=1.05, d_max=1.0, v=20.0)
    validate_ok = p.v - p.u > p.cost(p.d_max)
    assert validate_ok
    got = eu_peering_perfcomp(p)
    assert got.eu_outsider <= 0.0


def test_eu_perfcomp_originator_below_no_transfers(defaults):
    # the originator now pays I * p on top of its own hop
    free_ride = eu_peering_no_transfers(defaults)[0].eu_originator
    paying = eu_peering_perfcomp(defaults).eu_originator
    assert paying < free_ride


def test_regime_utilities_identities():
    for p, _ in random_draws(12, seed=5):
        for regime in Regime:
            got = regime_utilities(p, regime)
            assert got.total == got.eu_originator + got.eu_intermediate + got.eu_outsider
            assert math.isfinite(got.total)
            assert got.eu_outsider <= 0.0
            if regime is Regime.NO_PEERING:
                assert got.eu_intermediate == 0.0


def test_regime_utilities_tolerance_stability(defaults):
    tol = 1e-9
    for regime in Regime:
        coarse = regime_utilities(defaults, regime, tol=tol)
        fine = regime_utilities(defaults, regime, tol=tol / 10)
        assert abs(coarse.total - fine.total) < 10 * tol


def test_regime_utilities_serialization(defaults):
    got = eu_no_peering(defaults)
    blob = json.loads(json.dumps(got.to_json_dict()))
    assert blob["regime"] == "NO_PEERING"
    assert blob["total"] == got.total
    assert blob["params"]["n"] == 10.0
    row = got.csv_row()
    assert row[0] == "NO_PEERING"
    assert float(row[1]) == 10.0
    assert float(row[5]) == got.total


# --------------------------------------------------------------------------
# best responses


def test_intermediate_best_response_threshold(defaults):
    relay_cost = defaults.cost(hop_distance(defaults, 0.5))  # c(0.125) = 0.015625
    assert relay_cost == pytest.approx(0.015625)
    assert intermediate_best_response(defaults, 0.5, 0.02) is True
    assert intermediate_best_response(defaults, 0.5, relay_cost) is True  # tie accepts
    assert intermediate_best_response(defaults, 0.5, 0.01) is False
    assert intermediate_best_response(defaults, 0.5, 0.0) is False  # free riding
    with pytest.raises(ParamError):
        intermediate_best_response(defaults, 0.5, -0.1)


def test_accept_refuse_boundary_sits_at_competitive_price():
    for p, d in random_draws(30, seed=55):
        price = competitive_price(p, d)
        assert intermediate_best_response(p, d, price) is True
        assert intermediate_best_response(p, d, price * (1 - 1e-9)) is False


def test_originator_choice_nearest_neighbor_always_direct(defaults):
    for price in (0.0, 0.01, 10.0):
        choice = originator_choice(defaults, 0.1, price)
        assert choice.mode is Choice.DIRECT
        assert choice.net_utility == pytest.approx(defaults.v - defaults.cost(0.1))


def test_originator_choice_peers_at_marginal_cost(defaults):
    p = competitive_price(defaults, 0.5)
    choice = originator_choice(defaults, 0.5, p)
    assert choice.mode is Choice.PEER
    assert choice.net_utility == pytest.approx(10.0 - 4 * 0.015625)


def test_originator_choice_direct_at_expensive_relay(defaults):
    choice = originator_choice(defaults, 0.5, defaults.cost(0.5))
    assert choice.mode is Choice.DIRECT  # 0.015625 + 3 * 0.25 > 0.25
    with pytest.raises(ParamError):
        originator_choice(defaults, 0.5, -1.0)


def test_originator_choice_tie_goes_direct(defaults):
    # at d below the relay clamp the two branches are equal for any price
    choice = originator_choice(defaults, 0.15, 0.0)
    assert choice.mode is Choice.DIRECT


# --------------------------------------------------------------------------
# social cost, value added, savings


def test_social_cost_examples(defaults):
    direct = social_cost(defaults, 0.5, "direct")
    assert direct == pytest.approx(0.25 + 0.01 * (25 * math.pi - 1))
    full = social_cost(defaults, 0.5, "full_peering")
    assert full == pytest.approx(4 * (0.015625 + 0.01 * nodes_within(defaults, 0.125)))
    assert full < direct
    with pytest.raises(ParamError):
        social_cost(defaults, 0.15, "skip_one")
    with pytest.raises(ParamError):
        social_cost(defaults, 0.5, "bogus")


def test_social_cost_peering_dominance_over_draws():
    for p, d in random_draws(60, seed=77):
        assert social_cost(p, d, "full_peering") < social_cost(p, d, "direct")


def test_value_added_examples(defaults):
    hop = hop_distance(defaults, 0.5)
    expected = (
        -2 * defaults.cost(hop) + defaults.cost(2 * hop)
        - 2 * 0.01 * nodes_within(defaults, hop) + 0.01 * nodes_within(defaults, 2 * hop)
    )
    assert value_added(defaults, 0.5) == pytest.approx(expected)
    assert value_added(defaults, 0.5) > 0
    with pytest.raises(ParamError):
        value_added(defaults, 0.15)


def test_value_added_zero_on_linear_boundary():
    # beta = 1 bypasses validation on purpose: the convexity inequality binds
    p = make_params(beta=1.0, w=0.0)
    assert value_added(p, 0.5) == 0.0


def test_value_added_positive_from_pollution_alone():
    # linear cost but convex circle counts still make a relay valuable
    p = make_params(beta=1.0, w=0.01)
    assert nodes_within(p, hop_distance(p, 0.5)) > 0
    assert value_added(p, 0.5) > 0


def test_value_added_quadratic_no_pollution_closed_form():
    p = make_params(w=0.0)
    for d in (0.3, 0.5, 0.8, 1.0):
        hop = hop_distance(p, d)
        assert value_added(p, d) == pytest.approx(2 * p.cost.a * hop * hop, rel=1e-12)
        assert value_added(p, d) > 0


def test_value_added_equals_skip_minus_full(defaults):
    for p, d in random_draws(40, seed=3):
        lhs = value_added(p, d)
        rhs = social_cost(p, d, "skip_one") - social_cost(p, d, "full_peering")
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)


def test_originator_savings_examples(defaults):
    assert originator_savings(defaults, 0.5) == pytest.approx(0.25 - 0.015625)
    assert originator_savings(defaults, 0.1) == 0.0
    assert originator_savings(defaults, 1.0) == pytest.approx(1.0 - (1 / 9) ** 2)


def test_savings_cover_compensation():
    # c(d) - c(D) >= I * c(D), strictly when I >= 1 and beta > 1
    for p, d in random_draws(60, seed=41):
        i = intermediate_count(p, d)
        assert originator_savings(p, d) > i * competitive_price(p, d)


# --------------------------------------------------------------------------
# prices, leapfrog


def test_price_bounds_and_competitive_price(defaults):
    lo, hi = price_bounds(defaults, 0.5)
    assert (lo, hi) == (pytest.approx(0.015625), pytest.approx(0.25))
    assert competitive_price(defaults, 0.5) == lo
    lo2, hi2 = price_bounds(defaults, 0.15)  # no relays: bounds collapse
    assert lo2 == hi2
    for _, d in random_draws(20, seed=9, require_relay=False):
        lo, hi = price_bounds(defaults, min(d, defaults.d_max))
        assert lo <= hi


def test_leapfrog_threshold_and_profitability(defaults):
    thr = leapfrog_threshold(defaults, 0.5)
    assert thr == pytest.approx(defaults.cost(0.25))
    assert leapfrog_profitable(defaults, 0.5, competitive_price(defaults, 0.5)) is False
    assert leapfrog_profitable(defaults, 0.5, thr) is False       # strict threshold
    assert leapfrog_profitable(defaults, 0.5, thr * 1.01) is True
    with pytest.raises(ParamError):
        leapfrog_threshold(defaults, 0.15)
