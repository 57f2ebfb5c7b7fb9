"""Analytic continuation of circle preimages.

Lifting a target circle through an entire map means tracking z(theta)
with f(z(theta)) = w(theta) as theta sweeps the circle: tangent
prediction, then damped Newton correction at every step.  A lift of a
closed circle closes after an integer number of sweeps, and that
integer is the local covering degree of the component being traced.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import EvalOverflowError, LiftFailureError
from .expr import EntireMap
from .geometry import Disk

_NEWTON_ROUNDS = 40
_LAM_FLOOR = 1e-6
# accept threshold never drops below the forward-error floor
# eps*(|f'||z| + |f|): one ulp of z already moves f by |f'||z|*eps, so a
# smaller residual is unmeasurable and demanding it fakes a stall
_EVAL_NOISE = 4.0 * 2.220446049250313e-16
# finest substep: 2^-14 of a base step; below this the curve is treated
# as stalled on a critical point
_MIN_SUBSTEP = 2.0 ** -14


def _jet_or_nan(f, z: complex):
    try:
        val, der = f.jet(z)
    except EvalOverflowError:
        return complex("nan"), complex("nan")
    return val, der


def _finite(c: complex) -> bool:
    return math.isfinite(c.real) and math.isfinite(c.imag)


def _newton_correct(f, z: complex, w: complex, tol: float):
    """Scalar damped Newton toward f(z) = w.

    Returns (z, ok, residual, derivative_at_z).  Same accept/reject flow
    as the array kernels: a proposed step counts only if it strictly
    shrinks the residual, otherwise damping halves until it collapses.
    """
    val, der = _jet_or_nan(f, z)
    if not (_finite(val) and _finite(der)):
        return z, False, math.inf, der
    resid = abs(val - w)
    lam = 1.0
    for _ in range(_NEWTON_ROUNDS):
        if resid <= max(tol, _EVAL_NOISE * (abs(der) * abs(z) + abs(val))):
            return z, True, resid, der
        if der == 0:
            lam *= 0.5
            if lam < _LAM_FLOOR:
                break
            continue
        zn = z - lam * (val - w) / der
        vn, dn = _jet_or_nan(f, zn)
        if _finite(vn) and _finite(dn) and abs(vn - w) < resid:
            z, val, der, resid = zn, vn, dn, abs(vn - w)
            lam = 1.0
        else:
            lam *= 0.5
            if lam < _LAM_FLOOR:
                break
    return z, resid <= max(tol, _EVAL_NOISE * (abs(der) * abs(z) + abs(val))), resid, der


def ray_shoot(
    f: EntireMap,
    seed: complex,
    target: Disk,
    *,
    steps: int = 48,
    tol: float | None = None,
) -> complex:
    """Walk the value f(seed) radially out to the target circle.

    Returns a point near seed whose value lies on the boundary of target
    to within tol, continuing along the radial value path by Newton
    correction.  A seed sitting on a critical point cannot move under
    Newton, so such seeds get a ring of small kicks first.
    """
    if tol is None:
        tol = 1e-10 * target.radius
    seed = complex(seed)
    val, der = _jet_or_nan(f, seed)
    if not _finite(val):
        raise LiftFailureError(f"seed {seed} has no finite value")
    r0 = abs(val - target.center)
    if r0 >= target.radius:
        raise LiftFailureError(
            f"seed value {val} is not inside the target disk {target}"
        )
    starts = [seed]
    if abs(der) < 1e-12 * (1.0 + abs(val)):
        kick = 1e-4 * (1.0 + abs(seed))
        starts = [seed + kick * cmath.exp(2j * math.pi * m / 8) for m in range(8)]
    last_reason = "no start attempted"
    # direction retries: a ray aimed straight through a critical value
    # stalls; a small rotation walks around it.  Non-zero rotations only
    # run after the natural direction fails.
    rotations = (0.0, 0.05, -0.05, 0.45, -0.45, 1.5707963267948966, -1.5707963267948966)
    for start, rot in ((s, r) for s in starts for r in rotations):
        val, _ = _jet_or_nan(f, start)
        if not _finite(val):
            continue
        r0 = abs(val - target.center)
        if r0 >= target.radius:
            continue
        # value direction is frozen at the start so the path is a straight ray
        off = val - target.center
        direction = off / r0 if r0 > 1e-14 * target.radius else 1.0 + 0j
        direction *= cmath.exp(1j * rot)
        z = start
        frac = r0 / target.radius
        ok_path = True
        # a critical seed kicks to a value like eps^d, exponentially deep
        # inside the disk, where Newton steps along the ray would need
        # damping far beyond the floor.  Grow the offset from the seed
        # geometrically instead; the walked path stays inside the value
        # sublevel set, so it cannot leave the seed's component.
        offset = z - seed
        rounds = 0
        while frac < 1.0 / steps and abs(offset) > 0.0:
            rounds += 1
            if rounds > 5000:
                last_reason = "geometric seed ramp did not escape the critical point"
                ok_path = False
                break
            g = 2.0
            grown = False
            while g - 1.0 > 1e-3:
                zc = seed + offset * g
                vc, dc = _jet_or_nan(f, zc)
                if _finite(vc) and _finite(dc):
                    fr = abs(vc - target.center) / target.radius
                    if fr < 2.0 / steps:
                        z, offset, frac = zc, offset * g, fr
                        grown = True
                        break
                g = math.sqrt(g)
            if not grown:
                if frac <= 0.0:
                    last_reason = "geometric seed ramp stalled at the center value"
                    ok_path = False
                break
        if ok_path and frac > 0.0:
            # re-freeze the ray on the post-ramp value direction
            val, _ = _jet_or_nan(f, z)
            off_val = val - target.center
            r0 = abs(off_val)
            frac = r0 / target.radius
            if r0 > 1e-14 * target.radius:
                direction = off_val / r0 * cmath.exp(1j * rot)
        h = (1.0 - frac) / steps
        while ok_path and frac < 1.0:
            step = min(h, 1.0 - frac)
            w = target.center + direction * target.radius * (frac + step)
            zn, ok, _, _ = _newton_correct(f, z, w, tol)
            if ok:
                z = zn
                frac += step
                h = min(h * 2.0, (1.0 - frac) if frac < 1.0 else h)
            else:
                h *= 0.5
                if h < (1.0 / steps) * _MIN_SUBSTEP:
                    last_reason = f"radial continuation stalled at fraction {frac:.4f}"
                    ok_path = False
                    break
        if ok_path:
            return z
    raise LiftFailureError(f"ray shoot from {seed} failed: {last_reason}")


@dataclass(frozen=True)
class LiftedLoop:
    """A closed preimage of a target circle.

    vertices[m] satisfies f(vertices[m]) = center + radius*e^{i*angles[m]}
    to the lift tolerance; the closing vertex is implicit (equal to
    vertices[0] within closure_defect).  traversals counts how many full
    sweeps of the target circle the lift needed before closing.
    """

    vertices: np.ndarray
    angles: np.ndarray
    traversals: int
    target_center: complex
    target_radius: float
    closure_defect: float
    max_residual: float

    def circle_points(self) -> np.ndarray:
        return self.target_center + self.target_radius * np.exp(1j * self.angles)


def lift_circle(
    f: EntireMap,
    start: complex,
    target: Disk,
    *,
    min_points: int = 720,
    max_step: float | None = None,
    tol: float | None = None,
    max_traversals: int = 16,
    close_tol: float | None = None,
) -> LiftedLoop:
    """Lift the target circle through f starting at a boundary preimage.

    start must satisfy f(start) on the target circle (within about 1e-6
    of its radius; it is snapped exactly before marching).  The sweep
    advances by dyadic substeps of the base grid 2*pi/min_points: a step
    is halved whenever Newton correction fails or the lifted point moves
    farther than max_step, and regrows after success.  The loop closes
    when the lift returns to its start at a full-sweep boundary.
    """
    if tol is None:
        tol = 1e-10 * target.radius
    if close_tol is None:
        close_tol = max(1e-9 * target.radius, 1e-13 * (1.0 + abs(start)))
    val, _ = _jet_or_nan(f, complex(start))
    if not _finite(val):
        raise LiftFailureError("lift start has no finite value")
    if abs(abs(val - target.center) - target.radius) > max(
        1e-6 * target.radius, 10.0 * tol
    ):
        raise LiftFailureError(f"lift start value {val} is not on the target circle")
    theta0 = cmath.phase(val - target.center)
    w0 = target.boundary_point(theta0)
    z, ok, resid, der = _newton_correct(f, complex(start), w0, tol)
    if not ok:
        raise LiftFailureError("could not snap the lift start onto the circle")

    base = 2.0 * math.pi / min_points
    verts = [z]
    angs = [theta0]
    max_resid = resid
    # s counts base steps from the start; dyadic so sweep boundaries at
    # multiples of min_points are hit exactly
    s = 0.0
    h = 1.0
    sweeps = 0
    while sweeps < max_traversals:
        boundary = float((sweeps + 1) * min_points)
        while s < boundary:
            step = min(h, boundary - s)
            theta = theta0 + base * (s + step)
            w = target.boundary_point(theta)
            w_prev = target.boundary_point(theta0 + base * s)
            if der != 0 and _finite(der):
                z_pred = z + (w - w_prev) / der
            else:
                z_pred = z
            zn, ok, resid, dn = _newton_correct(f, z_pred, w, tol)
            if ok and max_step is not None and abs(zn - z) > max_step:
                ok = False
            if ok:
                z, der = zn, dn
                s += step
                max_resid = max(max_resid, resid)
                verts.append(z)
                angs.append(theta0 + base * s)
                h = min(1.0, step * 2.0)
            else:
                h = step * 0.5
                if h < _MIN_SUBSTEP:
                    raise LiftFailureError(
                        f"circle lift stalled at angle {theta:.6f} "
                        f"(sweep {sweeps + 1}); a critical point sits on "
                        "or near the lifted curve"
                    )
        sweeps += 1
        defect = abs(z - verts[0])
        if defect <= close_tol:
            return LiftedLoop(
                vertices=np.asarray(verts[:-1], dtype=np.complex128),
                angles=np.asarray(angs[:-1], dtype=np.float64),
                traversals=sweeps,
                target_center=complex(target.center),
                target_radius=float(target.radius),
                closure_defect=float(defect),
                max_residual=float(max_resid),
            )
    err = LiftFailureError(
        f"lift did not close after {max_traversals} sweeps of the target circle"
    )
    # closure failure is structural (unbounded component or budget), not a
    # critical-value stall; radius jitter cannot cure it
    err.reason = "no_close"
    raise err
