import os
import time

import numpy as np
import pytest

from risassoc import experiments as ex
from risassoc.channels import ChannelSet, SystemConfig, draw_network
from risassoc.config import RunConfig

# criterion number -> (passed, detail), filled in by test_acceptance.py
ACCEPTANCE = {}


def record(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


def random_channels(rng, J=2, K=3, M=3, N=4, scale=1.0):
    def cn(*shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    return ChannelSet(scale * cn(J, K, M), scale * cn(J, N, M), cn(K, N))


def random_unit(rng, *shape):
    return np.exp(1j * rng.uniform(-np.pi, np.pi, shape))


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def desk_config():
    return SystemConfig()


@pytest.fixture(scope="session")
def desk_network(desk_config):
    return draw_network(desk_config, 0)


_BATCHES = {}
BATCH_SECONDS = {}


def scheme_batch(run, schemes, seeds):
    """{scheme: [SchemeResult per seed]}, computed once per session; failures raise."""
    key = (run.digest(), tuple(schemes), tuple(seeds))
    if key not in _BATCHES:
        tasks = [(run, s, seed) for s in schemes for seed in seeds]
        start = time.perf_counter()
        results = ex.run_batch(tasks, os.cpu_count() or 1)
        BATCH_SECONDS[key] = time.perf_counter() - start
        errors = [err for _, err in results if err is not None]
        if errors:
            raise RuntimeError(f"{len(errors)} runs failed, first: {errors[0]}")
        out = {s: [] for s in schemes}
        for (_, s, _), (res, _) in zip(tasks, results):
            out[s].append(res)
        _BATCHES[key] = out
    return _BATCHES[key]


DESK_SEEDS = tuple(range(50))


@pytest.fixture(scope="session")
def desk_batch():
    return scheme_batch(RunConfig(), ex.SCHEMES, DESK_SEEDS)
