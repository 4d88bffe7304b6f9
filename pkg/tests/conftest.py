import numpy as np
import pytest

from quasilocal.chain import LocalOperator, sample_random_interaction
from quasilocal.series import DecayProfile, Explicit


def random_profile(rng, cutoff=8, head=0.5):
    """Random non-increasing profile with explicit tail."""
    drops = rng.random(cutoff + 1)
    drops /= drops.sum()
    entries = head * np.cumsum(drops[::-1])[::-1]
    return DecayProfile(tuple(entries), Explicit())


def exp_target(head=0.25, rate=1.0, cutoff=6):
    entries = tuple(head * np.exp(-rate * n) for n in range(cutoff + 1))
    return DecayProfile(entries, Explicit())


def random_spec(seed, head=0.25, rate=1.0, max_support=3, d=2):
    return sample_random_interaction(seed, d, exp_target(head, rate),
                                     max_support)


def random_hermitian(rng, dim, norm=1.0):
    raw = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    herm = (raw + raw.conj().T) / 2
    return herm * (norm / np.linalg.norm(herm, 2))


def random_local(rng, support, d=2, norm=1.0):
    support = tuple(support)
    return LocalOperator(random_hermitian(rng, d ** len(support), norm),
                         support, d)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
