"""Closed-form expected utilities, prices, and best responses per regime.

Three regimes are evaluated at a given density:

    NO_PEERING                  every connection is direct
    PEERING_NO_TRANSFERS        all nodes hypothetically relay for free
    PEERING_PERFECT_COMPETITION relays are paid the competitive price c(D)

Each regime assigns an expected utility to the three roles a node can play
for someone else's connection or its own: originator, intermediate (relay),
and outsider (suffers interference only). Expectations integrate over the
connection-distance density f(x) = 2x/d_max^2 and are scaled by the demand
probability P(N(d_max)):

    orig  NO_PEERING   P * int (v - c(x)) f dx
    out   NO_PEERING  -w P * int N(x) f dx
    orig  NOTRANS      P * int (v - c(D(x))) f dx
    int   NOTRANS     -P * int I(x) (w + c(D(x))) f dx     (hypothetical)
    out   NOTRANS     -w P * int (I(x)+1) N(D(x)) f dx
    orig  PERFCOMP     P * int (v - (I(x)+1) c(D(x))) f dx
    int   PERFCOMP    -w P * int I(x) f dx                 (price nets out cost)
    out   PERFCOMP    -w P * int (I(x)+1) max(0, N(D(x))-1) f dx

The no-transfers intermediate line aggregates the per-exposure payoff
-w - c(D) over the all-peer hypothesis so the (always false) sustainability
flag has a quantitative counterfactual next to it: a relay's best response
to a zero price is refusal, so unpriced peering never survives.

Note the outsider lines: the no-transfers form counts every node in a hop's
circle, the competitive form excludes the hop's receiving endpoint (whose
exposure is booked on the intermediate line instead). The discrepancy is
kept, not reconciled; the receiving-peer count is floored at zero so the
outsider utility can never turn positive where the continuum approximation
of N breaks down.

All operations are pure functions; nothing here holds mutable state.
"""

import math
from dataclasses import dataclass
from enum import Enum

from scipy.integrate import quad

from .errors import NumericsError, ParamError
from .model import (
    ModelParams,
    connect_probability,
    hop_distance,
    intermediate_count,
    max_peers,
    nodes_within,
    params_to_dict,
)

__all__ = [
    "Regime",
    "REGIME_ORDER",
    "Choice",
    "ConnectionChoice",
    "RegimeUtilities",
    "UTILITIES_CSV_HEADER",
    "DEFAULT_TOL",
    "integrate",
    "eu_no_peering",
    "eu_peering_no_transfers",
    "eu_peering_perfcomp",
    "regime_utilities",
    "intermediate_best_response",
    "originator_choice",
    "social_cost",
    "value_added",
    "originator_savings",
    "price_bounds",
    "competitive_price",
    "leapfrog_threshold",
    "leapfrog_profitable",
]

DEFAULT_TOL = 1e-9


class Regime(Enum):
    NO_PEERING = "NO_PEERING"
    PEERING_NO_TRANSFERS = "PEERING_NO_TRANSFERS"
    PEERING_PERFECT_COMPETITION = "PEERING_PERFECT_COMPETITION"


# Canonical ordering for reports, sweeps, and CSV output.
REGIME_ORDER = (
    Regime.NO_PEERING,
    Regime.PEERING_NO_TRANSFERS,
    Regime.PEERING_PERFECT_COMPETITION,
)


class Choice(Enum):
    DIRECT = "DIRECT"
    PEER = "PEER"


@dataclass(frozen=True)
class ConnectionChoice:
    """An originator's best response: how to connect, and the resulting
    maximized net utility."""

    mode: Choice
    net_utility: float


@dataclass(frozen=True)
class RegimeUtilities:
    """Per-role expected utilities for one regime at one parameter point.

    total is the exact float sum of the three role fields. eu_outsider is
    never positive; eu_intermediate is zero when no relaying occurs.
    """

    regime: Regime
    eu_originator: float
    eu_intermediate: float
    eu_outsider: float
    total: float
    params: ModelParams

    @classmethod
    def build(cls, regime, params, orig, inter, outsider):
        return cls(
            regime=regime,
            eu_originator=orig,
            eu_intermediate=inter,
            eu_outsider=outsider,
            total=orig + inter + outsider,
            params=params,
        )

    def to_json_dict(self) -> dict:
        return {
            "regime": self.regime.value,
            "eu_originator": self.eu_originator,
            "eu_intermediate": self.eu_intermediate,
            "eu_outsider": self.eu_outsider,
            "total": self.total,
            "params": params_to_dict(self.params),
        }

    def csv_row(self) -> list:
        return [
            self.regime.value,
            repr(self.params.n),
            repr(self.eu_originator),
            repr(self.eu_intermediate),
            repr(self.eu_outsider),
            repr(self.total),
        ]


UTILITIES_CSV_HEADER = ("regime", "n", "eu_orig", "eu_int", "eu_out", "total")


# --------------------------------------------------------------------------
# Quadrature


# Large-magnitude integrals (the congestion term grows like n^2) cannot hit
# an absolute error below ~1e-13 of their own size in float64; the error
# contract is floored there.
_REL_FLOOR = 1e-13


def integrate(f, lo: float, hi: float, tol: float = DEFAULT_TOL) -> float:
    """Adaptive quadrature of f over [lo, hi] with absolute error <= tol
    (or within _REL_FLOOR of the value's magnitude, whichever is weaker).

    Deterministic for a given tolerance. Raises NumericsError if the
    integrand produces a non-finite sample or the error contract cannot be
    met.
    """
    if not (lo <= hi):
        raise ParamError(f"integration bounds must satisfy lo <= hi, got {lo!r} > {hi!r}")
    if not (tol > 0):
        raise ParamError(f"tol must be > 0, got {tol!r}")
    if lo == hi:
        return 0.0

    def checked(x):
        y = f(x)
        if not math.isfinite(y):
            raise NumericsError(f"integrand returned non-finite value {y!r} at x={x!r}")
        return y

    # full_output suppresses QUADPACK's warning machinery; the achieved
    # error estimate is checked against the contract directly.
    value, abserr = quad(
        checked, lo, hi, epsabs=tol, epsrel=_REL_FLOOR, limit=200, full_output=1
    )[:2]
    if abserr > max(tol, abs(value) * _REL_FLOOR):
        raise NumericsError(
            f"quadrature error estimate {abserr!r} exceeds tolerance {tol!r} "
            f"on [{lo!r}, {hi!r}]"
        )
    return value


def _integrate_piecewise(f, lo, hi, tol, cuts):
    """Integrate with explicit splits at known kinks (clamp boundaries)."""
    points = sorted({lo, hi, *(c for c in cuts if lo < c < hi)})
    per_piece = tol / max(1, len(points) - 1)
    return sum(
        integrate(f, a, b, per_piece) for a, b in zip(points[:-1], points[1:])
    )


def _kinks(params: ModelParams):
    """Distances where the clamped elementary functions change branch."""
    n = params.n
    return (
        1 / (n * math.sqrt(math.pi)),       # N(x) leaves its clamp
        math.sqrt(2 / math.pi) / n,          # N(x) - 1 crosses zero
        2 / n,                               # I(x) leaves its clamp
    )


# --------------------------------------------------------------------------
# Expected utilities per regime


def eu_no_peering(params: ModelParams, tol: float = DEFAULT_TOL) -> RegimeUtilities:
    """Expected utilities when every connection is direct."""
    p_conn = connect_probability(params, max_peers(params))
    d_max = params.d_max
    f = lambda x: 2 * x / (d_max * d_max)
    orig = p_conn * _integrate_piecewise(
        lambda x: (params.v - params.cost(x)) * f(x), 0.0, d_max, tol, ()
    )
    outsider = -params.w * p_conn * _integrate_piecewise(
        lambda x: nodes_within(params, x) * f(x), 0.0, d_max, tol, _kinks(params)
    )
    return RegimeUtilities.build(Regime.NO_PEERING, params, orig, 0.0, outsider)


def eu_peering_no_transfers(
    params: ModelParams, tol: float = DEFAULT_TOL
) -> tuple[RegimeUtilities, bool]:
    """Expected utilities if every node relayed for free, and whether that
    arrangement is sustainable (it never is: a relay's best response to a
    zero price is refusal)."""
    p_conn = connect_probability(params, max_peers(params))
    d_max = params.d_max
    f = lambda x: 2 * x / (d_max * d_max)
    cuts = _kinks(params)
    cD = lambda x: params.cost(hop_distance(params, x))
    orig = p_conn * _integrate_piecewise(
        lambda x: (params.v - cD(x)) * f(x), 0.0, d_max, tol, cuts
    )
    inter = -p_conn * _integrate_piecewise(
        lambda x: intermediate_count(params, x) * (params.w + cD(x)) * f(x),
        0.0, d_max, tol, cuts,
    )
    outsider = -params.w * p_conn * _integrate_piecewise(
        lambda x: (intermediate_count(params, x) + 1)
        * nodes_within(params, hop_distance(params, x)) * f(x),
        0.0, d_max, tol, cuts,
    )
    utilities = RegimeUtilities.build(
        Regime.PEERING_NO_TRANSFERS, params, orig, inter, outsider
    )
    return utilities, False


def eu_peering_perfcomp(params: ModelParams, tol: float = DEFAULT_TOL) -> RegimeUtilities:
    """Expected utilities when relays are paid the competitive price c(D).

    The price exactly offsets relay cost, so the intermediate line is -w
    times the expected number of relay exposures.
    """
    p_conn = connect_probability(params, max_peers(params))
    d_max = params.d_max
    f = lambda x: 2 * x / (d_max * d_max)
    cuts = _kinks(params)
    orig = p_conn * _integrate_piecewise(
        lambda x: (
            params.v
            - (intermediate_count(params, x) + 1)
            * params.cost(hop_distance(params, x))
        ) * f(x),
        0.0, d_max, tol, cuts,
    )
    inter = -params.w * p_conn * _integrate_piecewise(
        lambda x: intermediate_count(params, x) * f(x), 0.0, d_max, tol, cuts
    )
    outsider = -params.w * p_conn * _integrate_piecewise(
        lambda x: (intermediate_count(params, x) + 1)
        * max(0.0, nodes_within(params, hop_distance(params, x)) - 1) * f(x),
        0.0, d_max, tol, cuts,
    )
    return RegimeUtilities.build(
        Regime.PEERING_PERFECT_COMPETITION, params, orig, inter, outsider
    )


def regime_utilities(
    params: ModelParams, regime: Regime, tol: float = DEFAULT_TOL
) -> RegimeUtilities:
    """Dispatch to the regime's expected-utility computation."""
    if regime is Regime.NO_PEERING:
        return eu_no_peering(params, tol)
    if regime is Regime.PEERING_NO_TRANSFERS:
        return eu_peering_no_transfers(params, tol)[0]
    if regime is Regime.PEERING_PERFECT_COMPETITION:
        return eu_peering_perfcomp(params, tol)
    raise ParamError(f"unknown regime {regime!r}")


# --------------------------------------------------------------------------
# Best responses, prices, and per-connection cost accounting


def intermediate_best_response(params: ModelParams, d: float, price: float) -> bool:
    """Whether a relay on a connection of length d accepts price per hop.

    Accept iff price >= c(D(d)): max(-w - c(D) + p, -w) resolves to relaying
    exactly when the price covers the relay cost. Ties accept, so trade
    happens at marginal cost.
    """
    if not (price >= 0):
        raise ParamError(f"price must be >= 0, got {price!r}")
    return price >= params.cost(hop_distance(params, d))


def originator_choice(params: ModelParams, d: float, price: float) -> ConnectionChoice:
    """The originator's max[v - c(d), v - c(D(d)) - I(d) p]; ties go DIRECT."""
    if not (price >= 0):
        raise ParamError(f"price must be >= 0, got {price!r}")
    direct_net = params.v - params.cost(d)
    peer_net = (
        params.v
        - params.cost(hop_distance(params, d))
        - intermediate_count(params, d) * price
    )
    if direct_net >= peer_net:
        return ConnectionChoice(Choice.DIRECT, direct_net)
    return ConnectionChoice(Choice.PEER, peer_net)


def social_cost(params: ModelParams, d: float, mode: str) -> float:
    """Total resource cost of one connection of length d.

    mode: direct        c(d) + w N(d)
          full_peering  (I+1) (c(D) + w N(D))
          skip_one      one relay skipped: (I-1) c(D) + c(2D)
                        + (I-1) w N(D) + w N(2D); needs I >= 1
    """
    i = intermediate_count(params, d)
    hop = hop_distance(params, d)
    if mode == "direct":
        return params.cost(d) + params.w * nodes_within(params, d)
    if mode == "full_peering":
        return (i + 1) * (params.cost(hop) + params.w * nodes_within(params, hop))
    if mode == "skip_one":
        if not (i >= 1):
            raise ParamError(f"skip_one requires at least one relay, I(d)={i!r}")
        return (
            (i - 1) * params.cost(hop)
            + params.cost(2 * hop)
            + (i - 1) * params.w * nodes_within(params, hop)
            + params.w * nodes_within(params, 2 * hop)
        )
    raise ParamError(f"unknown social-cost mode {mode!r}")


def value_added(params: ModelParams, d: float) -> float:
    """Welfare contribution of one willing relay, net of its own cost:
    -2 c(D) + c(2D) - 2 w N(D) + w N(2D).

    Strictly positive wherever cost or the circle count is strictly convex
    at the evaluated points; exactly zero on the linear boundary
    (beta=1, w=0). N can clamp to zero at tiny hop lengths, which zeroes the
    pollution half of the expression.
    """
    if not (intermediate_count(params, d) >= 1):
        raise ParamError(
            f"value_added requires at least one relay to skip, "
            f"I(d)={intermediate_count(params, d)!r}"
        )
    hop = hop_distance(params, d)
    return (
        -2 * params.cost(hop)
        + params.cost(2 * hop)
        - 2 * params.w * nodes_within(params, hop)
        + params.w * nodes_within(params, 2 * hop)
    )


def originator_savings(params: ModelParams, d: float) -> float:
    """What peering saves the originator before transfers: c(d) - c(D(d)).

    Nonnegative, zero exactly when there are no intermediates; large enough
    to compensate every relay at marginal cost (c(d) >= (I+1) c(D) for
    convex cost, since (I+1) D = d).
    """
    return params.cost(d) - params.cost(hop_distance(params, d))


def price_bounds(params: ModelParams, d: float) -> tuple[float, float]:
    """Admissible per-relay prices: relay cost floor, direct-cost ceiling."""
    return (params.cost(hop_distance(params, d)), params.cost(d))


def competitive_price(params: ModelParams, d: float) -> float:
    """Marginal-cost relay price c(D(d)) — the lower bound binds under
    competition."""
    return params.cost(hop_distance(params, d))


def leapfrog_threshold(params: ModelParams, d: float) -> float:
    """Relay price above which skipping a relay (transmitting 2D) pays:
    c(2 D(d))."""
    if not (intermediate_count(params, d) >= 1):
        raise ParamError(
            f"leapfrog requires at least one relay, "
            f"I(d)={intermediate_count(params, d)!r}"
        )
    return params.cost(2 * hop_distance(params, d))


def leapfrog_profitable(params: ModelParams, d: float, price: float) -> bool:
    """Strictly profitable only when the price rises above the threshold."""
    return price > leapfrog_threshold(params, d)
