import math

import numpy as np
import pytest

from meshecon import (
    CostFunction,
    ParamError,
    RadioParams,
    channels_per_cell,
    connect_probability,
    distance_cdf,
    distance_pdf,
    hop_distance,
    intermediate_count,
    max_peers,
    nodes_within,
    params_from_dict,
    params_from_json,
    params_from_kv,
    params_to_dict,
    params_to_json,
    params_to_kv,
    path_loss,
    read_params_file,
    shannon_capacity,
    validate,
)
from conftest import make_params
import oracles


# --------------------------------------------------------------------------
# validate


def test_validate_accepts_defaults(defaults):
    assert validate(defaults) is defaults  # v - u = 8 > cost(d_max) = 1


def test_validate_rejects_small_connection_premium():
    with pytest.raises(ParamError, match="v - u"):
        validate(make_params(v=2.5, u=2.0))


def test_validate_rejects_linear_cost():
    with pytest.raises(ParamError, match="cost_beta"):
        validate(make_params(beta=1.0))


@pytest.mark.parametrize("kwargs,field", [
    (dict(n=-1.0), "n"),
    (dict(n=0.5), "d_max"),          # d_max = 1 not > 1/n = 2
    (dict(d_max=0.05), "d_max"),
    (dict(z=0.0), "z"),
    (dict(z=1.0), "z"),
    (dict(w=-0.01), "w"),
    (dict(v=0.0), "v"),
    (dict(u=-1.0), "u"),
    (dict(a=0.0), "cost_a"),
    (dict(beta=0.5), "cost_beta"),
])
def test_validate_names_offending_field(kwargs, field):
    with pytest.raises(ParamError, match=field):
        validate(make_params(**kwargs))


# --------------------------------------------------------------------------
# intermediate count, hop distance


def test_intermediate_count_examples(defaults):
    assert intermediate_count(defaults, 0.5) == pytest.approx(3.0)
    assert intermediate_count(defaults, 0.2) == 0.0
    assert intermediate_count(defaults, 0.05) == 0.0   # raw -1.5 clamps to 0


def test_intermediate_count_range_errors(defaults):
    with pytest.raises(ParamError):
        intermediate_count(defaults, -0.1)
    with pytest.raises(ParamError):
        intermediate_count(defaults, 1.5)


def test_intermediate_count_monotone_in_d_and_n():
    ds = np.linspace(0.0, 1.0, 101)
    for n in (3.0, 10.0, 25.0):
        p = make_params(n=n)
        vals = [intermediate_count(p, d) for d in ds]
        assert all(b >= a for a, b in zip(vals, vals[1:]))
    for d in (0.15, 0.4, 0.9):
        vals = [intermediate_count(make_params(n=n), d) for n in (3, 5, 10, 20, 40)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_intermediate_count_exact_above_clamp(defaults):
    for d in (0.2, 0.35, 0.8, 1.0):
        assert intermediate_count(defaults, d) == pytest.approx(10 * d - 2, abs=1e-15)


def test_hop_distance_examples(defaults):
    # D(d) = d/(n d - 1): 0.5/4, single full hop below the clamp, 1/9 at d_max
    assert hop_distance(defaults, 0.5) == pytest.approx(0.125)
    assert hop_distance(defaults, 0.2) == pytest.approx(0.2)
    assert hop_distance(defaults, 1.0) == pytest.approx(1 / 9)


def test_hop_distance_errors(defaults):
    with pytest.raises(ParamError):
        hop_distance(defaults, 0.0)
    with pytest.raises(ParamError):
        hop_distance(defaults, -0.2)
    with pytest.raises(ParamError):
        hop_distance(defaults, 1.2)


def test_hop_distance_below_distance_with_equality_iff_direct(defaults):
    for d in np.linspace(0.01, 1.0, 97):
        hop = hop_distance(defaults, float(d))
        if intermediate_count(defaults, float(d)) == 0:
            assert hop == d
        else:
            assert hop < d


def test_hop_distance_limit_near_nearest_neighbor():
    # |D(d_max) - 1/n| <= 2/(n^2 d_max) once n d_max >= 2
    for n, d_max in ((10.0, 1.0), (5.0, 0.9), (50.0, 2.0)):
        p = make_params(n=n, d_max=d_max)
        assert abs(hop_distance(p, d_max) - 1 / n) <= 2 / (n * n * d_max)


def test_full_path_length_recovers_distance(defaults):
    # (I + 1) * D = d whenever relays exist
    for d in (0.21, 0.5, 0.77, 1.0):
        i = intermediate_count(defaults, d)
        assert i > 0
        assert (i + 1) * hop_distance(defaults, d) == pytest.approx(d, rel=1e-14)


# --------------------------------------------------------------------------
# nodes within, connect probability


def test_nodes_within_examples(defaults):
    assert nodes_within(defaults, 0.5) == pytest.approx(25 * math.pi - 1)
    assert nodes_within(defaults, 1 / (10 * math.sqrt(math.pi))) == pytest.approx(0.0, abs=1e-12)
    assert nodes_within(defaults, 1.0) == pytest.approx(100 * math.pi - 1)
    assert max_peers(defaults) == nodes_within(defaults, defaults.d_max)


def test_nodes_within_clamps_and_rejects_negative(defaults):
    assert nodes_within(defaults, 0.01) == 0.0
    with pytest.raises(ParamError):
        nodes_within(defaults, -0.1)


def test_nodes_within_monotone_convex_above_clamp(defaults):
    ds = np.linspace(0.06, 1.4, 120)  # unclamped from 1/(n sqrt(pi)) ~ 0.0564
    vals = np.array([nodes_within(defaults, float(d)) for d in ds])
    assert np.all(np.diff(vals) > 0)
    assert np.all(np.diff(vals, 2) > 0)


def test_connect_probability_examples(defaults):
    assert connect_probability(defaults, 0.0) == 0.0
    p_half = make_params(z=0.5)
    assert connect_probability(p_half, 1.0) == pytest.approx(0.5, abs=1e-15)
    # pinned: 1 - 0.99^(100 pi - 1) evaluated at 30 digits
    assert connect_probability(defaults, max_peers(defaults)) == pytest.approx(
        oracles.P_DEFAULT, abs=1e-14
    )


def test_connect_probability_increasing_concave(defaults):
    counts = np.linspace(0.0, 400.0, 81)
    vals = np.array([connect_probability(defaults, float(c)) for c in counts])
    assert np.all(np.diff(vals) > 0)
    assert np.all(np.diff(vals, 2) < 0)
    assert np.all((vals >= 0) & (vals < 1))
    with pytest.raises(ParamError):
        connect_probability(defaults, -1.0)


# --------------------------------------------------------------------------
# distance distribution


def test_distance_cdf_pdf_examples(defaults):
    assert distance_cdf(defaults, defaults.d_max) == 1.0
    assert distance_pdf(defaults, 0.5) == 1.0
    with pytest.raises(ParamError):
        distance_pdf(defaults, 1.5)
    with pytest.raises(ParamError):
        distance_cdf(defaults, -0.1)


def test_distance_pdf_integrates_to_one():
    for d_max in (1.0, 0.7, 2.5):
        p = make_params(d_max=d_max)
        total = oracles.midpoint(lambda x: 2 * x / (d_max * d_max), 0, d_max)
        assert total == pytest.approx(1.0, abs=1e-9)
        assert distance_cdf(p, d_max) == 1.0


def test_distance_pdf_is_cdf_derivative(defaults):
    h = 1e-7
    for d in (0.1, 0.33, 0.5, 0.9):
        fd = (distance_cdf(defaults, d + h) - distance_cdf(defaults, d - h)) / (2 * h)
        assert fd == pytest.approx(distance_pdf(defaults, d), rel=1e-6)


# --------------------------------------------------------------------------
# radio helpers


def _radio(**kw):
    base = dict(snr=0.0, alpha=1.0, bandwidth_total=1e6, user_bit_rate=1e4,
                path_loss_constant=1.0, carrier_frequency=1.0, path_loss_exponent=2.0)
    base.update(kw)
    return RadioParams(**base)


def test_shannon_capacity_examples():
    assert shannon_capacity(0.0) == 0.0
    assert shannon_capacity(1.0) == 1.0
    assert shannon_capacity(3.0) == 2.0
    with pytest.raises(ParamError):
        shannon_capacity(-0.5)


def test_channels_per_cell_examples():
    assert channels_per_cell(_radio()) == 142.0
    assert channels_per_cell(_radio(alpha=0.5)) == 71.0
    assert channels_per_cell(_radio(bandwidth_total=1e4)) == pytest.approx(1.42)


def test_path_loss_examples():
    assert path_loss(_radio(), 2.0) == 0.25
    assert path_loss(_radio(path_loss_exponent=4.0), 2.0) == 0.0625
    assert path_loss(_radio(carrier_frequency=2.0), 1.0) == 0.25
    with pytest.raises(ParamError):
        path_loss(_radio(), 0.0)


def test_radio_params_validation():
    with pytest.raises(ParamError):
        _radio(snr=-1.0)
    with pytest.raises(ParamError):
        _radio(alpha=1.5)
    with pytest.raises(ParamError):
        _radio(user_bit_rate=0.0)
    with pytest.raises(ParamError):
        _radio(path_loss_exponent=1.5)


# --------------------------------------------------------------------------
# serialization


def test_params_kv_round_trip(defaults):
    text = params_to_kv(defaults)
    assert params_from_kv(text) == defaults


def test_params_json_round_trip(defaults):
    assert params_from_json(params_to_json(defaults)) == defaults


def test_params_dict_unknown_and_missing_keys(defaults):
    d = params_to_dict(defaults)
    d["extra"] = 1.0
    with pytest.raises(ParamError, match="unknown"):
        params_from_dict(d)
    del d["extra"]
    del d["cost_a"]
    with pytest.raises(ParamError, match="missing"):
        params_from_dict(d)


def test_params_kv_rejects_garbage_and_duplicates():
    with pytest.raises(ParamError, match="key=value"):
        params_from_kv("n 10\n")
    with pytest.raises(ParamError, match="duplicate"):
        params_from_kv("n=10\nn=11\n")


def test_params_kv_allows_comments_and_blank_lines(defaults):
    text = "# reference parameters\n\n" + params_to_kv(defaults)
    assert params_from_kv(text) == defaults


def test_read_params_file_sniffs_format(tmp_path, defaults):
    kv = tmp_path / "p.cfg"
    kv.write_text(params_to_kv(defaults))
    js = tmp_path / "p.json"
    js.write_text(params_to_json(defaults))
    assert read_params_file(kv) == defaults
    assert read_params_file(js) == defaults


def test_cost_function_basics():
    c = CostFunction(a=2.0, beta=1.5)
    assert c(0.0) == 0.0
    assert c(1.0) == 2.0
    assert c(4.0) == pytest.approx(16.0)
