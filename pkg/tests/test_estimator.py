"""Separated-orbit entropy estimation on known systems."""

import json
import math

import numpy as np
import pytest

from hfbound._kernels import numba_backend, numpy_backend
from hfbound.errors import SampleEscapeError
from hfbound.estimator import EntropyEstimate, separated_entropy_estimate
from hfbound.expr import parse_map

LOG2 = math.log(2.0)


def unit_circle(n):
    return np.exp(2j * np.pi * np.arange(n) / n)


def disk_cloud(n, seed=5):
    rng = np.random.default_rng(seed)
    return np.sqrt(rng.random(n)) * np.exp(2j * np.pi * rng.random(n))


class TestZeroEntropySystems:
    def test_irrational_rotation(self):
        # every circle rotation is an isometry, so orbit segments never
        # separate beyond their initial distance
        alpha = (math.sqrt(5.0) - 1.0) / 2.0
        turn = complex(np.exp(2j * np.pi * alpha))
        est = separated_entropy_estimate(lambda z: turn * z, unit_circle(4096), 8, 0.05)
        assert est.value <= 0.05

    def test_uniform_contraction(self):
        est = separated_entropy_estimate(parse_map("z/2"), disk_cloud(2048), 8, 0.05)
        assert est.value <= 0.05

    def test_contraction_counts_constant(self):
        est = separated_entropy_estimate(parse_map("z/2"), disk_cloud(2048), 8, 0.05)
        assert len(set(est.counts)) == 1


class TestAngleDoubling:
    def test_doubling_near_log2(self):
        est = separated_entropy_estimate(parse_map("z^2"), unit_circle(8192), 6, 0.05)
        assert LOG2 - 0.15 <= est.value <= LOG2 + 0.05

    def test_counts_roughly_double(self):
        est = separated_entropy_estimate(parse_map("z^2"), unit_circle(8192), 6, 0.05)
        assert est.counts[-1] >= 8 * est.counts[0]


class TestCountInvariants:
    @pytest.mark.parametrize("system,samples", [
        ("z^2", unit_circle(4096)),
        ("z/2", disk_cloud(1024)),
    ])
    def test_counts_nondecreasing_in_horizon(self, system, samples):
        est = separated_entropy_estimate(parse_map(system), samples, 7, 0.05)
        assert all(a <= b for a, b in zip(est.counts, est.counts[1:]))

    def test_counts_nondecreasing_as_eps_halves(self):
        # an eps-separated set maps injectively into any eps/2-net,
        # so halving eps can only grow each horizon's count
        f = parse_map("z^2")
        for samples in (unit_circle(4096), np.exp(2j * np.pi * np.random.default_rng(17).random(4096))):
            prev = None
            for eps in (0.2, 0.1, 0.05):
                counts = separated_entropy_estimate(f, samples, 6, eps).counts
                if prev is not None:
                    assert all(a <= b for a, b in zip(prev, counts))
                prev = counts

    def test_zero_entropy_slope_stable_in_eps(self):
        pts = disk_cloud(1024)
        f = parse_map("z/2")
        values = [separated_entropy_estimate(f, pts, 6, eps).value for eps in (0.2, 0.1, 0.05)]
        assert all(v <= 1e-12 for v in values)


class TestEscapeDetection:
    def test_escaping_orbit_raises(self):
        pts = 1.2 * unit_circle(64)
        with pytest.raises(SampleEscapeError, match="left the sampled region"):
            separated_entropy_estimate(parse_map("z^2"), pts, 6, 0.05)

    def test_blowup_raises(self):
        pts = 2.0 + 0.1 * unit_circle(32)
        with pytest.raises(SampleEscapeError):
            separated_entropy_estimate(parse_map("exp(z)"), pts, 8, 0.05)


class TestValidation:
    def test_empty_samples(self):
        with pytest.raises(ValueError):
            separated_entropy_estimate(parse_map("z"), [], 4, 0.1)

    def test_bad_epsilon(self):
        with pytest.raises(ValueError):
            separated_entropy_estimate(parse_map("z"), [1.0], 4, 0.0)

    def test_short_horizon(self):
        with pytest.raises(ValueError):
            separated_entropy_estimate(parse_map("z"), [1.0], 1, 0.1)


class TestReporting:
    def test_json_fields(self):
        est = separated_entropy_estimate(parse_map("z/2"), disk_cloud(256), 4, 0.1)
        blob = json.loads(json.dumps(est.to_json()))
        assert set(blob) == {"value", "n_max", "epsilon", "counts"}
        assert blob["n_max"] == 4
        assert len(blob["counts"]) == 4
        assert isinstance(est, EntropyEstimate)

    def test_callable_and_parsed_step_agree(self):
        pts = unit_circle(512)
        a = separated_entropy_estimate(parse_map("z^2"), pts, 5, 0.1)
        b = separated_entropy_estimate(lambda z: z * z, pts, 5, 0.1)
        assert a.counts == b.counts
        assert a.value == b.value

    def test_deterministic(self):
        pts = unit_circle(1024)
        a = separated_entropy_estimate(parse_map("z^2"), pts, 5, 0.07)
        b = separated_entropy_estimate(parse_map("z^2"), pts, 5, 0.07)
        assert a == b


class TestBackendAgreement:
    def test_greedy_counts_match(self):
        from hfbound.estimator import _orbit_table

        table = _orbit_table(parse_map("z^2"), unit_circle(2048), 6)
        a = np.asarray(numpy_backend.greedy_counts(table, 0.05, 6))
        b = np.asarray(numba_backend.greedy_counts(table, 0.05, 6))
        assert np.array_equal(a, b)
