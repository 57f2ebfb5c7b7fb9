"""Island detection and digraph construction.

Expected values come from explicit inverse branches: the principal
square root for z^2, the principal log for exp, w/2 for the doubling
map.  Margins are frozen from the branch images, not from the detector.
"""

import json
import math

import numpy as np
import pytest

from hfbound.errors import GeometryError
from hfbound.expr import parse_map
from hfbound.geometry import Disk
from hfbound.islands import (
    IslandDigraph,
    IslandWitness,
    build_digraph,
    check_disjoint_targets,
    find_islands,
)


SQ = parse_map("z^2")
EXP = parse_map("exp(z)")

# max |sqrt(w) - 1| over |w - 1| = 0.5 is attained at w = 0.5
SQRT_BRANCH_REACH = 1.0 - math.sqrt(0.5)
# max |log(w)| over |w - 1| = 0.5 is attained at w = 0.5
LOG_BRANCH_REACH = abs(math.log(0.5))


class TestFindIslands:
    def test_sqrt_branch_island(self):
        found = find_islands(SQ, Disk(1.0, 0.4), Disk(1.0, 0.5))
        assert len(found) == 1
        w = found[0]
        assert abs(w.core_preimage - 1.0) < 1e-9
        assert w.traversals == 1
        assert w.univalence.winding == 1
        # branch image reaches 1 - sqrt(0.5) from the source center
        assert w.containment_margin == pytest.approx(0.4 - SQRT_BRANCH_REACH, abs=1e-6)
        # boundary is the principal sqrt of the target circle
        branch = np.sqrt(w.boundary**2)
        assert np.abs(w.boundary - branch).max() < 1e-9

    def test_critical_component_rejected(self):
        # the only preimage component of B(0, 0.5) is B(0, sqrt(0.5)),
        # too large for the source and not univalent either
        assert find_islands(SQ, Disk(0.0, 0.4), Disk(0.0, 0.5)) == []

    def test_log_branch_needs_room(self):
        # the principal log image of B(1, 0.5) reaches |log 0.5| ~ 0.693,
        # so a source of radius 0.6 cannot contain it
        assert find_islands(EXP, Disk(0.0, 0.6), Disk(1.0, 0.5)) == []

    def test_log_branch_island(self):
        found = find_islands(EXP, Disk(0.0, 0.75), Disk(1.0, 0.5))
        assert len(found) == 1
        w = found[0]
        assert abs(w.core_preimage) < 1e-9
        assert w.containment_margin == pytest.approx(0.75 - LOG_BRANCH_REACH, abs=1e-6)
        branch = np.log(np.exp(w.boundary))
        assert np.abs(w.boundary - branch).max() < 1e-9

    def test_witnesses_sorted_by_core(self):
        # target around 1 of the doubling map z^2 has preimages near +-1
        found = find_islands(SQ, Disk(0.0, 1.3), Disk(1.0, 0.5))
        cores = [w.core_preimage for w in found]
        assert len(found) == 2
        assert cores == sorted(cores, key=lambda c: (c.real, c.imag))
        assert abs(cores[0] + 1.0) < 1e-9 and abs(cores[1] - 1.0) < 1e-9

    def test_translation_never_islands(self):
        f = parse_map("z + 5")
        assert find_islands(f, Disk(0.0, 0.3), Disk(0.0, 0.4)) == []


class TestWitnessChecks:
    def setup_method(self):
        self.source = Disk(1.0, 0.4)
        self.target = Disk(1.0, 0.5)
        self.w = find_islands(SQ, self.source, self.target)[0]

    def test_reverify_passes(self):
        report = self.w.reverify(SQ, self.source, self.target)
        assert report["ok"]
        assert report["boundary_defect"] <= 1e-6 * self.target.radius
        assert report["winding"] == 1

    def test_reverify_catches_wrong_map(self):
        report = self.w.reverify(parse_map("z^2 + 0.2"), self.source, self.target)
        assert not report["ok"]

    def test_json_round_trip(self):
        blob = self.w.to_json()
        again = IslandWitness.from_json(json.loads(json.dumps(blob)))
        assert again.to_json() == blob
        report = again.reverify(SQ, self.source, self.target)
        assert report["ok"]

    def test_summary_fields(self):
        s = self.w.summary_json()
        assert set(s) == {
            "source",
            "target",
            "core",
            "margin",
            "vertex_count",
            "traversals",
            "max_residual",
            "winding",
        }


class TestBuildDigraph:
    def test_translation_digraph_empty(self):
        f = parse_map("z + 5")
        dg = build_digraph(f, [0.0, 3.0, -3.0], gamma=0.3, delta=0.4)
        assert dg.edge_pairs() == []
        assert dg.min_out_degree() == 0

    def test_power_map_on_eighth_roots(self):
        f = parse_map("z^8")
        centers = [np.exp(2j * np.pi * m / 8) for m in range(8)]
        dg = build_digraph(f, centers, gamma=0.1, delta=0.1)
        # every center is an 8th root of 1, so each carries a branch of
        # the 8th root over B(1, 0.1); no other target is reachable
        assert dg.edge_pairs() == [(i, 0) for i in range(8)]
        assert all(dg.out_degree(v) >= 1 for v in range(8))
        # vertex 0's single edge is its self-loop
        assert dg.nonself_out_degree(0) == 0
        assert dg.min_nonself_out_degree() == 0

    def test_single_center_self_loop(self):
        # f = 2z is univalent onto a disk twice the size; the explicit
        # inverse branch w/2 maps B(0, 0.1) into B(0, 0.05)
        f = parse_map("2*z")
        dg = build_digraph(f, [0.0], gamma=0.1, delta=0.1)
        assert dg.edge_pairs() == [(0, 0)]
        w = dg.witness(0, 0)
        branch = 0.5 * (0.1 * np.exp(1j * w.boundary_angles))
        assert np.abs(w.boundary - branch).max() < 1e-8

    def test_single_center_empty_when_branch_escapes(self):
        f = parse_map("z + 5")
        dg = build_digraph(f, [0.0], gamma=0.1, delta=0.1)
        assert dg.edge_pairs() == []

    def test_disjointness_enforced(self):
        with pytest.raises(GeometryError):
            build_digraph(SQ, [0.0, 0.5], gamma=0.3, delta=0.3)
        with pytest.raises(GeometryError):
            check_disjoint_targets([0.0, 1.0, 1.2], 0.2)

    def test_gamma_above_delta_rejected(self):
        with pytest.raises(GeometryError):
            build_digraph(SQ, [0.0, 5.0], gamma=0.5, delta=0.4)

    def test_shrinking_targets_keeps_edges(self):
        # an island over the larger target restricts to one over the
        # smaller, so edges never disappear when delta shrinks
        f = parse_map("z^8")
        centers = [np.exp(2j * np.pi * m / 8) for m in range(8)]
        wide = build_digraph(f, centers, gamma=0.08, delta=0.1)
        narrow = build_digraph(f, centers, gamma=0.08, delta=0.08)
        assert set(wide.edge_pairs()) <= set(narrow.edge_pairs())

    def test_json_round_trip(self):
        f = parse_map("z^8")
        centers = [np.exp(2j * np.pi * m / 8) for m in range(8)]
        dg = build_digraph(f, centers, gamma=0.1, delta=0.1)
        blob = dg.to_json()
        again = IslandDigraph.from_json(json.loads(json.dumps(blob)))
        assert again.to_json() == blob
        assert again.edge_pairs() == dg.edge_pairs()
        assert again.gamma == dg.gamma and again.delta == dg.delta

    def test_adjacency_matches_edges(self):
        f = parse_map("z^8")
        centers = [np.exp(2j * np.pi * m / 8) for m in range(8)]
        dg = build_digraph(f, centers, gamma=0.1, delta=0.1)
        adj = dg.adjacency()
        assert adj.shape == (8, 8) and adj.dtype == bool
        assert [(i, j) for i in range(8) for j in range(8) if adj[i, j]] == dg.edge_pairs()
