import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from meshecon import ModelParams, CostFunction, default_params, intermediate_count


@pytest.fixture
def defaults() -> ModelParams:
    return default_params()


def make_params(n=10.0, d_max=1.0, v=10.0, u=2.0, w=0.01, z=0.99, a=1.0, beta=2.0):
    return ModelParams(n=n, d_max=d_max, v=v, u=u, w=w, z=z,
                       cost=CostFunction(a=a, beta=beta))


def random_draws(count=200, seed=20240, require_relay=True):
    """Seeded (params, distance) draws with beta in [1.5, 3]; when
    require_relay, the distance carries at least one intermediate."""
    rng = np.random.default_rng(seed)
    draws = []
    while len(draws) < count:
        n = rng.uniform(5.0, 40.0)
        d_max = rng.uniform(0.5, 2.0)
        if n * d_max < 3.5:
            continue
        a = rng.uniform(0.1, 5.0)
        beta = rng.uniform(1.5, 3.0)
        w = rng.uniform(0.0, 0.1)
        z = rng.uniform(0.5, 0.999)
        u = 1.0
        v = u + a * d_max**beta * (1.0 + rng.uniform(0.1, 2.0))
        p = make_params(n=n, d_max=d_max, v=v, u=u, w=w, z=z, a=a, beta=beta)
        d = rng.uniform(3.0 / n, d_max) if require_relay else rng.uniform(0.01, d_max)
        if require_relay and intermediate_count(p, d) < 1:
            continue
        draws.append((p, float(d)))
    return draws
