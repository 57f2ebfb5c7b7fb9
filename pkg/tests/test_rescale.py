"""Rescaled families, zero counting, and the two certification pipelines."""

import json
import math

import numpy as np
import pytest

from hfbound import certificates
from hfbound.errors import (
    GeometryError,
    LiftFailureError,
    StageFailureError,
    ZeroDeficientError,
)
from hfbound.expr import parse_map
from hfbound.rescale import (
    CertificationRequest,
    LadderResult,
    RescaleFamily,
    certify_via_islands,
    certify_via_zeros,
    count_zeros,
    default_probes,
    entropy_ladder,
    max_modulus,
    rescaled,
)

RNG = np.random.default_rng(20260822)


def _rand_points(n, scale=1.0):
    pts = RNG.uniform(-scale, scale, size=(n, 2))
    return [complex(a, b) for a, b in pts]


class TestRescaled:
    def test_square_by_two_is_twice_square(self):
        # (2z)^2/2 = 2z^2, checked pointwise
        g = rescaled(parse_map("z^2"), 2)
        for z in _rand_points(40, 3.0):
            assert abs(complex(g.eval(z)) - 2.0 * z * z) <= 1e-12 * (1 + abs(z) ** 2)

    def test_index_one_is_the_same_map(self):
        f = parse_map("exp(z)")
        assert rescaled(f, 1) is f

    def test_sin_by_three(self):
        g = rescaled(parse_map("sin(z)"), 3)
        for z in _rand_points(40):
            want = complex(np.sin(3 * z) / 3)
            assert abs(complex(g.eval(z)) - want) <= 1e-12 * (1 + abs(want))

    def test_result_is_a_printable_expression(self):
        """The rescaled map is a real expression, not a numeric wrapper."""
        g = rescaled(parse_map("exp(z)"), 5)
        h = parse_map(g.source)
        for z in _rand_points(20):
            assert complex(h.eval(z)) == pytest.approx(complex(g.eval(z)), rel=1e-14)

    @pytest.mark.parametrize("src", ["z^2 + 1", "exp(z)", "sin(z)"])
    @pytest.mark.parametrize("n", [2, 5])
    def test_conjugation_relation(self, src, n):
        f = parse_map(src)
        g = rescaled(f, n)
        for z in _rand_points(25):
            want = complex(f.eval(n * z)) / n
            assert abs(complex(g.eval(z)) - want) <= 1e-12 * (1 + abs(want))

    def test_family_iteration(self):
        fam = RescaleFamily(parse_map("z^2"), (1, 4))
        members = list(fam)
        assert len(members) == 4
        z = 0.7 + 0.2j
        assert complex(fam.member(3).eval(z)) == pytest.approx(
            complex(members[2].eval(z))
        )

    def test_family_range_validation(self):
        with pytest.raises(ValueError):
            RescaleFamily(parse_map("z^2"), (0, 3))
        fam = RescaleFamily(parse_map("z^2"), (2, 5))
        with pytest.raises(ValueError):
            fam.member(6)


class TestCountZeros:
    def test_sin_radius_ten(self):
        # zeros k*pi with |k*pi| < 10: k = -3..3, seven of them
        assert count_zeros(parse_map("sin(z)"), 10.0) == 7

    def test_exp_is_zero_free(self):
        assert count_zeros(parse_map("exp(z)"), 100.0) == 0

    def test_cube_roots_of_unity(self):
        f = parse_map("z^3 - 1")
        assert count_zeros(f, 2.0) == 3
        assert count_zeros(f, 0.5) == 0

    def test_zeros_on_the_circle_are_resolved(self):
        # z^2 - 1 has both zeros exactly on |z| = 1; the nudge ladder
        # must settle on the count just outside
        assert count_zeros(parse_map("z^2 - 1"), 1.0) == 2

    def test_multiplicity_counts(self):
        assert count_zeros(parse_map("z^2"), 1.0) == 2

    def test_radius_stability(self):
        f = parse_map("z^3 - 1")
        assert count_zeros(f, 2.0) == count_zeros(f, 2.0006)

    def test_positive_radius_required(self):
        with pytest.raises(GeometryError):
            count_zeros(parse_map("z^2"), 0.0)


class TestMaxModulus:
    def test_square(self):
        assert max_modulus(parse_map("z^2"), 3.0) == pytest.approx(9.0, abs=1e-9)

    def test_exp(self):
        assert max_modulus(parse_map("exp(z)"), 1.0) == pytest.approx(
            math.e, abs=1e-9
        )

    def test_sin(self):
        # |sin(x+iy)|^2 = sin^2 x + sinh^2 y peaks on the imaginary axis
        assert max_modulus(parse_map("sin(z)"), 2.0) == pytest.approx(
            math.sinh(2.0), abs=1e-9
        )

    def test_minimum_sample_count(self):
        with pytest.raises(ValueError):
            max_modulus(parse_map("z^2"), 1.0, samples=128)


class TestDefaultProbes:
    def test_nine_points_on_imaginary_axis(self):
        probes = default_probes(parse_map("exp(z)"))
        assert len(probes) == 9
        assert probes[0] == 0
        step = 2.0 * math.pi / 9.0
        for j, p in enumerate(probes):
            assert p.real == 0.0
            assert p.imag == pytest.approx(j * step, abs=1e-15)

    def test_count_override(self):
        assert len(default_probes(parse_map("exp(z)"), n=13)) == 13


class TestCertificationRequest:
    def test_small_target_rejected(self):
        with pytest.raises(ValueError):
            CertificationRequest(parse_map("z^2"), 1)

    def test_unknown_route_rejected(self):
        with pytest.raises(ValueError):
            CertificationRequest(parse_map("z^2"), 2, route_preference="fast")

    def test_budget_merging(self):
        req = CertificationRequest(parse_map("z^2"), 2, budgets={"depth": 3})
        assert req.budget("depth") == 3
        assert req.budget("k_max") == 65536


class TestCertifyViaZeros:
    def test_square_target_two(self):
        cert = certify_via_zeros(CertificationRequest(parse_map("z^2"), 2))
        assert cert.route == "polylike"
        assert cert.bound == pytest.approx(math.log(2.0), abs=1e-12)
        p = cert.parameters
        assert p["degree"] == 2
        assert p["achieved_degree"] == 2
        assert p["zeros_radius"] == 1.0
        # M = 1.1 * 1, smallest integer > 2M
        assert p["rescale_index"] == 3
        assert certificates.revalidate(cert)["ok"] is True

    def test_cubic_target_three(self):
        cert = certify_via_zeros(CertificationRequest(parse_map("z^3 - 1"), 3))
        assert cert.bound == pytest.approx(math.log(3.0), abs=1e-12)
        assert cert.parameters["zeros_radius"] == 1.0
        assert cert.parameters["rescale_index"] == 5

    def test_zero_free_map_reports_deficiency(self):
        with pytest.raises(ZeroDeficientError):
            certify_via_zeros(CertificationRequest(parse_map("exp(z)"), 2))

    @pytest.mark.parametrize(
        "src,m", [("sin(z)", 2), ("sin(z)", 5), ("z*sin(z)", 3)]
    )
    def test_real_axis_trapped_component_refused(self, src, m):
        # maps bounded (or sublinear) on the real axis drag the whole
        # axis into the rescaled sublevel set: the restriction is not
        # proper over the range disk and the boundary trace cannot close
        with pytest.raises(LiftFailureError, match="did not close"):
            certify_via_zeros(CertificationRequest(parse_map(src), m))

    def test_bound_is_conjugation_invariant(self):
        a = certify_via_zeros(CertificationRequest(parse_map("z^2"), 2))
        b = certify_via_zeros(CertificationRequest(rescaled(parse_map("z^2"), 3), 2))
        assert a.bound == b.bound

    def test_json_roundtrip_revalidates(self):
        cert = certify_via_zeros(CertificationRequest(parse_map("z^2"), 2))
        again = certificates.EntropyCertificate.from_json(cert.to_json())
        assert again.content_hash() == cert.content_hash()
        assert certificates.revalidate(again)["ok"] is True


@pytest.fixture(scope="module")
def exp_horseshoe():
    f = parse_map("exp(z)")
    return certify_via_islands(CertificationRequest(f, 2), default_probes(f))


class TestCertifyViaIslands:
    def test_too_few_probes(self):
        with pytest.raises(GeometryError, match="9"):
            certify_via_islands(
                CertificationRequest(parse_map("exp(z)"), 2), [1j * k for k in range(5)]
            )

    def test_overlapping_probe_closures(self):
        probes = default_probes(parse_map("exp(z)"))
        probes[3] = probes[2]
        with pytest.raises(GeometryError):
            certify_via_islands(CertificationRequest(parse_map("exp(z)"), 2), probes)

    @pytest.mark.slow
    def test_exp_nine_probes(self, exp_horseshoe):
        cert = exp_horseshoe
        p = cert.parameters
        assert cert.route == "horseshoe"
        assert p["symbols"] >= 2
        assert cert.bound >= math.log(2.0) / 2.0
        assert cert.bound == pytest.approx(math.log(p["symbols"]) / 2.0, abs=1e-12)
        assert p["rescale_index"] == 32768
        assert p["hub"] == 1
        assert p["symbols"] == len(p["partners"])
        assert set(p["partners"]) <= set(p["partner_pool"])
        assert p["conjugacy"]["passed"] is True
        assert p["contraction_bound"] <= 0.5
        assert p["closure_gap"] > 0.0

    @pytest.mark.slow
    def test_horseshoe_revalidates_from_serialized_form(self, exp_horseshoe):
        blob = json.dumps(exp_horseshoe.to_json())
        again = certificates.EntropyCertificate.from_json(json.loads(blob))
        report = certificates.revalidate(again)
        assert report["ok"] is True
        assert report["stages"]["conjugacy"]["passed"] is True

    @pytest.mark.slow
    def test_tampered_symbol_count_is_rejected(self, exp_horseshoe):
        blob = exp_horseshoe.to_json()
        blob["parameters"] = dict(blob["parameters"], symbols=9)
        with pytest.raises(ValueError):
            certificates.EntropyCertificate.from_json(blob)

    @pytest.mark.slow
    def test_exp_thirteen_probes(self):
        f = parse_map("exp(z)")
        cert = certify_via_islands(
            CertificationRequest(f, 2), default_probes(f, n=13)
        )
        assert cert.parameters["symbols"] >= 5
        assert cert.bound >= math.log(5.0) / 2.0


class TestEntropyLadder:
    def test_cubic_ladder(self):
        with pytest.warns(UserWarning, match="polynomial"):
            res = entropy_ladder(parse_map("z^3 - 1"), (2, 3))
        assert isinstance(res, LadderResult)
        assert [c.bound for c in res] == pytest.approx(
            [math.log(2.0), math.log(3.0)], abs=1e-12
        )
        assert res.failures == []

    def test_polynomial_cap_warning_and_unreachable_target(self):
        with pytest.warns(UserWarning, match="polynomial"):
            res = entropy_ladder(parse_map("z^2"), (2, 4))
        assert len(res) == 1
        assert res[0].bound == pytest.approx(math.log(2.0), abs=1e-12)
        assert len(res.failures) == 1
        assert res.failures[0]["target"] == 4
        assert "unreachable" in res.failures[0]["errors"]["zeros"]

    def test_empty_targets(self):
        res = entropy_ladder(parse_map("exp(z)"), ())
        assert list(res) == []
        assert res.failures == []

    def test_target_validation(self):
        with pytest.raises(ValueError):
            entropy_ladder(parse_map("exp(z)"), (4, 2))
        with pytest.raises(ValueError):
            entropy_ladder(parse_map("exp(z)"), (1,))

    def test_bounds_nondecreasing(self):
        with pytest.warns(UserWarning):
            res = entropy_ladder(parse_map("z^3 - 1"), (2, 3))
        bounds = [c.bound for c in res]
        assert bounds == sorted(bounds)

    @pytest.mark.slow
    def test_sin_ladder_records_honest_failures(self):
        """Both routes fail for sin at every target; the ladder reports
        the per-target errors instead of inventing a certificate."""
        res = entropy_ladder(parse_map("sin(z)"), (2, 4, 8))
        assert list(res) == []
        assert [fail["target"] for fail in res.failures] == [2, 4, 8]
        for fail in res.failures:
            assert "did not close" in fail["errors"]["zeros"]
            assert "scan" in fail["errors"]["islands"]
