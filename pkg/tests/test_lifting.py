"""Circle lifting and radial continuation checks.

Oracles here are explicit inverse branches: sqrt for the squaring map,
log for exp, k-th roots for power maps.  Every lifted loop is compared
against the branch it should follow, and traversal counts against the
local covering degree.
"""

import cmath
import math

import numpy as np
import pytest

from hfbound.errors import LiftFailureError
from hfbound.expr import parse_map
from hfbound.geometry import Disk
from hfbound.lifting import lift_circle, ray_shoot


SQ = parse_map("z^2")
EXP = parse_map("exp(z)")


def principal_sqrt(w):
    return np.sqrt(np.asarray(w, dtype=np.complex128))


class TestRayShoot:
    def test_walks_value_to_target_circle(self):
        target = Disk(1.0, 0.4)
        z = ray_shoot(SQ, 1.0 + 0j, target)
        assert abs(abs(complex(SQ(z)) - target.center) - target.radius) < 1e-8

    def test_stays_on_starting_branch(self):
        # seed near +1, so the endpoint must be the principal sqrt branch
        target = Disk(1.0, 0.4)
        z = ray_shoot(SQ, 1.05 + 0j, target)
        w = complex(SQ(z))
        assert abs(z - cmath.sqrt(w)) < 1e-8

    def test_critical_seed_gets_kicked(self):
        # core of z^2 over 0: derivative vanishes, a plain Newton walk
        # cannot leave the seed, the kick ring must rescue it
        z = ray_shoot(SQ, 0.0, Disk(0.0, 0.25))
        assert abs(abs(z) - 0.5) < 1e-6

    def test_rejects_seed_with_value_outside(self):
        with pytest.raises(LiftFailureError):
            ray_shoot(SQ, 2.0 + 0j, Disk(0.0, 1.0))

    def test_rejects_overflowing_seed(self):
        with pytest.raises(LiftFailureError):
            ray_shoot(EXP, 1e9, Disk(0.0, 1.0))


class TestLiftCircle:
    def test_sqrt_branch_single_traversal(self):
        target = Disk(1.0, 0.4)
        start = ray_shoot(SQ, 1.0 + 0j, target)
        loop = lift_circle(SQ, start, target)
        assert loop.traversals == 1
        assert loop.closure_defect < 1e-9
        assert loop.max_residual < 1e-9
        # the loop is the principal sqrt of the target circle
        branch = principal_sqrt(loop.circle_points())
        assert np.abs(loop.vertices - branch).max() < 1e-8

    def test_full_cover_needs_two_traversals(self):
        # target disk contains the critical value 0, the preimage of its
        # boundary is one connected curve covering the circle twice
        target = Disk(0.0, 1.0)
        loop = lift_circle(SQ, 1.0 + 0j, target)
        assert loop.traversals == 2
        assert np.abs(np.abs(loop.vertices) - 1.0).max() < 1e-9

    def test_cube_cover_three_traversals(self):
        cube = parse_map("z^3")
        loop = lift_circle(cube, 1.0 + 0j, Disk(0.0, 1.0))
        assert loop.traversals == 3

    def test_identity_loop(self):
        ident = parse_map("z")
        target = Disk(0.5, 0.25)
        loop = lift_circle(ident, 0.75 + 0j, target)
        assert loop.traversals == 1
        assert np.abs(loop.vertices - loop.circle_points()).max() < 1e-12

    def test_exp_log_branch(self):
        target = Disk(1.0, 0.5)
        start = ray_shoot(EXP, 0.0, target)
        loop = lift_circle(EXP, start, target)
        assert loop.traversals == 1
        branch = np.log(loop.circle_points())
        assert np.abs(loop.vertices - branch).max() < 1e-8

    def test_vertices_satisfy_equation(self):
        target = Disk(1.0, 0.4)
        start = ray_shoot(SQ, 1.0 + 0j, target)
        loop = lift_circle(SQ, start, target)
        resid = np.abs(np.asarray(SQ.eval(loop.vertices)) - loop.circle_points())
        assert resid.max() <= 1e-9 * target.radius * 1.01

    def test_angle_grid_hits_sweep_boundary(self):
        target = Disk(1.0, 0.4)
        start = ray_shoot(SQ, 1.0 + 0j, target)
        loop = lift_circle(SQ, start, target, min_points=720)
        # angles start at the snapped start phase and stay sorted
        assert np.all(np.diff(loop.angles) > 0)
        span = loop.angles[-1] - loop.angles[0]
        assert span < 2 * math.pi * loop.traversals

    def test_min_points_lower_bounds_vertex_count(self):
        target = Disk(1.0, 0.4)
        start = ray_shoot(SQ, 1.0 + 0j, target)
        coarse = lift_circle(SQ, start, target, min_points=180)
        fine = lift_circle(SQ, start, target, min_points=1440)
        assert coarse.vertices.size >= 180
        assert fine.vertices.size >= 1440

    def test_critical_value_on_target_circle_tracks_one_lobe(self):
        # |w - 1| = 1 passes through the critical value 0 of z^2, so the
        # preimage is a figure eight (lemniscate).  The lift walks through
        # the node and closes around the right lobe alone; what matters is
        # that every vertex still satisfies the circle equation.
        loop = lift_circle(SQ, cmath.sqrt(2.0), Disk(1.0, 1.0))
        assert loop.traversals == 1
        assert loop.vertices.real.min() > -1e-4
        resid = np.abs(np.asarray(SQ.eval(loop.vertices)) - loop.circle_points())
        assert resid.max() < 1e-9

    def test_node_with_tight_max_step_stalls(self):
        # crossing the lemniscate node forces a vertex jump of about
        # sqrt(substep); a max_step below that floor cannot be honored
        with pytest.raises(LiftFailureError):
            lift_circle(SQ, cmath.sqrt(2.0), Disk(1.0, 1.0), max_step=1e-4)

    def test_noncompact_preimage_never_closes(self):
        # exp omits 0, so lifting a circle that encloses 0 gains 2*pi*i
        # per sweep forever; the sweep cap must turn that into an error
        with pytest.raises(LiftFailureError, match="did not close"):
            lift_circle(EXP, complex(np.log(1.5)), Disk(0.5, 1.0), max_traversals=4)

    def test_start_off_circle_rejected(self):
        with pytest.raises(LiftFailureError):
            lift_circle(SQ, 5.0 + 0j, Disk(1.0, 0.4))

    def test_max_step_controls_spacing(self):
        target = Disk(1.0, 0.4)
        start = ray_shoot(SQ, 1.0 + 0j, target)
        loop = lift_circle(SQ, start, target, max_step=0.01)
        gaps = np.abs(np.diff(loop.vertices))
        assert gaps.max() <= 0.01 * 1.0001
