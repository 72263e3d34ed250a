import numpy as np
import pytest

from copolymer import (DisorderLaw, ModelParams, build_srw_kernel,
                       sample_disorder)

ALL_LAWS = (DisorderLaw.RADEMACHER, DisorderLaw.GAUSSIAN,
            DisorderLaw.UNIFORM_SYM)


@pytest.fixture(scope="session")
def srw16():
    return build_srw_kernel(16)


@pytest.fixture(scope="session")
def srw64():
    return build_srw_kernel(64)


@pytest.fixture(scope="session")
def srw512():
    return build_srw_kernel(512)


@pytest.fixture(scope="session")
def make_instance():
    """Factory for deterministic random (params, disorder) instances."""

    def factory(i, n, coupling_range=(0.0, 2.0), seed=1000):
        rng = np.random.default_rng(seed + i)
        lo, hi = coupling_range
        p = ModelParams(*(rng.uniform(lo, hi, size=4)))
        law = ALL_LAWS[i % len(ALL_LAWS)]
        d = sample_disorder(law, ALL_LAWS[(i + 1) % 3], n, p.h, seed, i)
        return p, d

    return factory
