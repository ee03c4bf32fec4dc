"""Core model state and the elementary functions every regime shares.

The network is an infinite plane of nodes laid out in equally spaced rows
and columns with density n^2 per unit square (spacing 1/n). A node may
connect directly to any peer within radius d_max, or relay the connection
hop-by-hop through the nodes in between. Everything downstream — regime
utilities, equilibrium densities, the lattice simulator — is built from the
handful of functions defined here:

    intermediate_count   I(d) = max(0, n*d - 2)    relays on a peering path
    hop_distance         D(d) = d / (n*d - 1)      per-hop length, (I+1)*D = d
    nodes_within         N(d) = max(0, pi*d^2*n^2 - 1)   interference circle
    connect_probability  P(N) = 1 - z^N            demand for a connection
    distance_pdf/cdf     f(d) = 2d/d_max^2, F(d) = d^2/d_max^2

I and N are clamped at zero: the linear/quadratic forms go negative below
d = 2/n and d = 1/(n*sqrt(pi)), and clamping keeps every integral over
[0, d_max] well defined without changing values where the large-network
approximation is meant to apply.

A small set of radio-physics helpers (Shannon capacity, channels per cell,
path loss) lives here too. They motivate the cost and pollution structure
qualitatively but do not feed the economic model.
"""

import json
import math
from dataclasses import dataclass, replace

from .errors import ParamError

__all__ = [
    "CostFunction",
    "ModelParams",
    "RadioParams",
    "PARAM_KEYS",
    "default_params",
    "validate",
    "intermediate_count",
    "hop_distance",
    "nodes_within",
    "max_peers",
    "connect_probability",
    "distance_pdf",
    "distance_cdf",
    "shannon_capacity",
    "channels_per_cell",
    "path_loss",
    "params_to_dict",
    "params_from_dict",
    "params_to_kv",
    "params_from_kv",
    "params_to_json",
    "params_from_json",
    "read_params_file",
]


@dataclass(frozen=True)
class CostFunction:
    """Transmission cost cost(d) = a * d^beta.

    a > 0 and beta > 1 give the strictly increasing, strictly convex cost
    with cost(0) = 0 that the model requires. The two-parameter power law is
    the minimal family with those properties.
    """

    a: float
    beta: float

    def __call__(self, d: float) -> float:
        return self.a * d**self.beta


@dataclass(frozen=True)
class ModelParams:
    """All economic and geometric parameters in one immutable record.

    n      node density per unit length (n^2 nodes per 1x1 square)
    d_max  maximum direct-connection radius
    v      utility of connecting to the one most-desired peer
    u      utility of connecting to any other desired peer (only enters the
           v - u > cost(d_max) assumption; no utility expression uses it)
    w      pollution cost per affected node per transmission
    z      per-peer probability of NOT wanting a connection
    cost   transmission cost function of distance

    Construction does not validate; call validate() explicitly so tests can
    probe boundary and out-of-contract regions.
    """

    n: float
    d_max: float
    v: float
    u: float
    w: float
    z: float
    cost: CostFunction

    def with_n(self, n: float) -> "ModelParams":
        return replace(self, n=n)


def default_params() -> ModelParams:
    """Reference parameter set used throughout the docs and tests.

    Satisfies every invariant with slack: v - u = 8 > cost(d_max) = 1.
    """
    return ModelParams(
        n=10.0, d_max=1.0, v=10.0, u=2.0, w=0.01, z=0.99,
        cost=CostFunction(a=1.0, beta=2.0),
    )


# Sample fractions of d_max for the numerical monotonicity/convexity check.
_COST_CHECK_FRACTIONS = tuple(k / 16 for k in range(1, 17))


def validate(params: ModelParams) -> ModelParams:
    """Check every invariant; return params unchanged iff all hold.

    Raises ParamError naming the offending field and the violated bound.
    """
    p = params
    if not (p.n > 0):
        raise ParamError(f"n must be > 0, got {p.n!r}")
    if not (p.d_max > 1 / p.n):
        raise ParamError(
            f"d_max must exceed 1/n = {1 / p.n!r} so the circle contains the "
            f"nearest neighbor, got d_max={p.d_max!r}"
        )
    if not (0 < p.z < 1):
        raise ParamError(f"z must lie strictly inside (0, 1), got {p.z!r}")
    if not (p.w >= 0):
        raise ParamError(f"w must be >= 0, got {p.w!r}")
    if not (p.v > 0):
        raise ParamError(f"v must be > 0, got {p.v!r}")
    if not (p.u > 0):
        raise ParamError(f"u must be > 0, got {p.u!r}")
    if not (p.cost.a > 0):
        raise ParamError(f"cost_a must be > 0, got {p.cost.a!r}")
    if not (p.cost.beta > 1):
        raise ParamError(
            f"cost_beta must be > 1 for strict convexity, got {p.cost.beta!r}"
        )
    if not (p.v - p.u > p.cost(p.d_max)):
        raise ParamError(
            f"model requires v - u > cost(d_max): {p.v!r} - {p.u!r} = "
            f"{p.v - p.u!r} is not > {p.cost(p.d_max)!r}"
        )
    # Numerical spot check that cost is strictly increasing and strictly
    # convex on (0, d_max]; with a power law this is implied by a>0, beta>1,
    # but the check also guards any future cost family.
    ds = [f * p.d_max for f in _COST_CHECK_FRACTIONS]
    cs = [p.cost(d) for d in ds]
    for i in range(len(ds) - 1):
        if not (cs[i + 1] > cs[i]):
            raise ParamError(
                f"cost must be strictly increasing on (0, d_max]; fails "
                f"between d={ds[i]!r} and d={ds[i + 1]!r}"
            )
    for i in range(len(ds) - 2):
        if not (cs[i] + cs[i + 2] > 2 * cs[i + 1]):
            raise ParamError(
                f"cost must be strictly convex on (0, d_max]; fails around "
                f"d={ds[i + 1]!r}"
            )
    return params


# --------------------------------------------------------------------------
# Elementary functions of density and distance


def intermediate_count(params: ModelParams, d: float) -> float:
    """Expected relays on a peering connection of length d: max(0, n*d - 2).

    Continuous on purpose — it sits inside integrals. The lattice simulator
    is where hop counts become integers.
    """
    if not (0 <= d <= params.d_max):
        raise ParamError(f"d must lie in [0, d_max={params.d_max!r}], got {d!r}")
    return max(0.0, params.n * d - 2)


def hop_distance(params: ModelParams, d: float) -> float:
    """Per-hop length of a peering connection: d/(n*d - 1), or d itself when
    there are no intermediates (one direct hop). Satisfies (I+1)*D = d."""
    if not (d > 0):
        raise ParamError(f"d must be > 0, got {d!r}")
    if not (d <= params.d_max):
        raise ParamError(f"d must be <= d_max={params.d_max!r}, got {d!r}")
    if intermediate_count(params, d) == 0:
        return d
    return d / (params.n * d - 1)


def nodes_within(params: ModelParams, d: float) -> float:
    """Expected other nodes inside a transmission circle of radius d:
    max(0, pi*d^2*n^2 - 1)."""
    if not (d >= 0):
        raise ParamError(f"d must be >= 0, got {d!r}")
    return max(0.0, math.pi * d * d * params.n * params.n - 1)


def max_peers(params: ModelParams) -> float:
    """Nodes reachable without relaying: N(d_max)."""
    return nodes_within(params, params.d_max)


def connect_probability(params: ModelParams, peer_count: float) -> float:
    """Probability of wanting at least one connection among peer_count peers:
    1 - z^peer_count.

    Computed as 1 - exp(peer_count * log z); pow is unstable for the large
    counts this model routinely produces.
    """
    if not (peer_count >= 0):
        raise ParamError(f"peer_count must be >= 0, got {peer_count!r}")
    return 1.0 - math.exp(peer_count * math.log(params.z))


def distance_cdf(params: ModelParams, d: float) -> float:
    """Probability a random destination lies within d: d^2/d_max^2
    (large-network form of N(d)/N(d_max))."""
    if not (0 <= d <= params.d_max):
        raise ParamError(f"d must lie in [0, d_max={params.d_max!r}], got {d!r}")
    return (d * d) / (params.d_max * params.d_max)


def distance_pdf(params: ModelParams, d: float) -> float:
    """Density of the connection distance: 2d/d_max^2, normalized so it
    integrates to 1 on [0, d_max]."""
    if not (0 <= d <= params.d_max):
        raise ParamError(f"d must lie in [0, d_max={params.d_max!r}], got {d!r}")
    return 2 * d / (params.d_max * params.d_max)


# --------------------------------------------------------------------------
# Radio physics


@dataclass(frozen=True)
class RadioParams:
    """Physical-layer parameters for the capacity and path-loss helpers.

    path_loss_exponent is the signal-decay exponent (>= 2); despite the
    conventional letter it has nothing to do with the node density n.
    """

    snr: float
    alpha: float
    bandwidth_total: float
    user_bit_rate: float
    path_loss_constant: float
    carrier_frequency: float
    path_loss_exponent: float

    def __post_init__(self):
        if not (self.snr >= 0):
            raise ParamError(f"snr must be >= 0, got {self.snr!r}")
        for name in ("alpha", "bandwidth_total", "user_bit_rate",
                     "path_loss_constant", "carrier_frequency"):
            val = getattr(self, name)
            if not (val > 0):
                raise ParamError(f"{name} must be > 0, got {val!r}")
        if not (0 < self.alpha <= 1):
            raise ParamError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        if not (self.path_loss_exponent >= 2):
            raise ParamError(
                f"path_loss_exponent must be >= 2, got {self.path_loss_exponent!r}"
            )


def shannon_capacity(snr: float) -> float:
    """Channel capacity in bits/s/Hz: log2(1 + snr)."""
    if not (snr >= 0):
        raise ParamError(f"snr must be >= 0, got {snr!r}")
    return math.log2(1 + snr)


def channels_per_cell(radio: RadioParams) -> float:
    """Maximum simultaneous channels per cell: 1.42 * alpha * B_t / R_b."""
    if not (radio.user_bit_rate > 0):
        raise ParamError(f"user_bit_rate must be > 0, got {radio.user_bit_rate!r}")
    # Ratio first: keeps the common whole-number cases exact in floats.
    return 1.42 * radio.alpha * (radio.bandwidth_total / radio.user_bit_rate)


def path_loss(radio: RadioParams, d: float) -> float:
    """Received/transmitted power ratio K / (f^2 * d^exponent)."""
    if not (d > 0):
        raise ParamError(f"d must be > 0, got {d!r}")
    if not (radio.carrier_frequency > 0):
        raise ParamError(
            f"carrier_frequency must be > 0, got {radio.carrier_frequency!r}"
        )
    return radio.path_loss_constant / (
        radio.carrier_frequency**2 * d**radio.path_loss_exponent
    )


# --------------------------------------------------------------------------
# Serialization: flat key=value text and JSON with identical keys

PARAM_KEYS = ("n", "d_max", "v", "u", "w", "z", "cost_a", "cost_beta")


def params_to_dict(params: ModelParams) -> dict:
    return {
        "n": params.n,
        "d_max": params.d_max,
        "v": params.v,
        "u": params.u,
        "w": params.w,
        "z": params.z,
        "cost_a": params.cost.a,
        "cost_beta": params.cost.beta,
    }


def params_from_dict(data: dict) -> ModelParams:
    unknown = sorted(set(data) - set(PARAM_KEYS))
    if unknown:
        raise ParamError(f"unknown parameter keys: {', '.join(unknown)}")
    missing = [k for k in PARAM_KEYS if k not in data]
    if missing:
        raise ParamError(f"missing parameter keys: {', '.join(missing)}")
    try:
        vals = {k: float(data[k]) for k in PARAM_KEYS}
    except (TypeError, ValueError) as exc:
        raise ParamError(f"non-numeric parameter value: {exc}") from exc
    return ModelParams(
        n=vals["n"], d_max=vals["d_max"], v=vals["v"], u=vals["u"],
        w=vals["w"], z=vals["z"],
        cost=CostFunction(a=vals["cost_a"], beta=vals["cost_beta"]),
    )


def params_to_kv(params: ModelParams) -> str:
    d = params_to_dict(params)
    return "".join(f"{k}={d[k]!r}\n" for k in PARAM_KEYS)


def params_from_kv(text: str) -> ModelParams:
    data = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ParamError(f"line {lineno}: expected key=value, got {raw!r}")
        key = key.strip()
        if key in data:
            raise ParamError(f"line {lineno}: duplicate key {key!r}")
        data[key] = value.strip()
    return params_from_dict(data)


def params_to_json(params: ModelParams) -> str:
    return json.dumps(params_to_dict(params), indent=2, sort_keys=True) + "\n"


def params_from_json(text: str) -> ModelParams:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParamError(f"invalid JSON parameter file: {exc}") from exc
    if not isinstance(data, dict):
        raise ParamError("JSON parameter file must contain an object")
    return params_from_dict(data)


def read_params_file(path) -> ModelParams:
    """Load parameters from a file, sniffing JSON vs key=value."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        return params_from_json(text)
    return params_from_kv(text)
