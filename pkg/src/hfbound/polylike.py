"""Polynomial-like restrictions and the degree lower bound they certify.

A restriction (f, U, V) is polynomial-like of degree d when U is a
bounded component of f^{-1}(V) compactly contained in V and f: U -> V is
a proper degree-d cover.  Every check here is performed three ways on
independent machinery: loop traversal count, boundary winding, and a
preimage census with multiplicity.  Agreement of all three is what the
certificate records.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import certificates
from .errors import (
    DegreeMismatchError,
    GeometryError,
    LiftFailureError,
    NearSingularError,
    NotCompactlyContainedError,
)
from .expr import EntireMap
from .geometry import Disk, point_in_polygon, polyline_bounding_disk, winding_number
from .lifting import lift_circle, ray_shoot
from .roots import newton_preimages

__all__ = [
    "TracedBoundary",
    "PolyLikeRestriction",
    "trace_component",
    "winding_degree",
    "certify_polylike",
    "entropy_from_polylike",
]

# relative radius nudges tried in order when a critical value sits on the
# target circle and the lift stalls
JITTER_SCHEDULE = (0.0, 3e-4, -3e-4, 9e-4, -9e-4, 2.7e-3, -2.7e-3)

COMPACT_MARGIN_FRACTION = 1e-3
WINDING_DEFECT_LIMIT = 0.1
MIN_VALUE_SEPARATION = 1e-6


@dataclass(frozen=True)
class TracedBoundary:
    """Closed boundary polyline of one preimage component.

    vertices includes an explicit closing vertex equal to the first.
    traversals is the number of full target-circle sweeps the trace
    needed before closing, which equals the covering degree of the
    component.
    """

    vertices: np.ndarray
    angles: np.ndarray
    traversals: int
    target: Disk
    closure_defect: float
    max_residual: float

    def open_vertices(self) -> np.ndarray:
        return self.vertices[:-1]

    def to_json(self) -> dict:
        return {
            "vertex_count": int(self.vertices.size - 1),
            "traversals": self.traversals,
            "target": self.target.to_json(),
            "closure_defect": self.closure_defect,
            "max_residual": self.max_residual,
        }


def trace_component(
    f: EntireMap,
    V: Disk,
    seed: complex,
    min_steps: int = 720,
) -> TracedBoundary:
    """Trace the boundary of the component of f^{-1}(V) containing seed.

    Requires f(seed) strictly inside V.  Shoots the seed's value radially
    out to the circle, then lifts the full circle until the curve closes.
    Raises LiftFailureError when a critical value obstructs the trace or
    the component is unbounded (the lift then never closes); callers that
    can tolerate a slightly different disk retry with a nudged radius.
    """
    if min_steps < 16:
        raise ValueError(f"min_steps must be >= 16, got {min_steps}")
    seed = complex(seed)
    val = f.eval(seed)
    if not V.contains(val):
        raise GeometryError(
            f"seed value {val} does not lie inside the target disk {V}"
        )
    start = ray_shoot(f, seed, V)
    loop = lift_circle(f, start, V, min_points=min_steps)
    closed = np.concatenate([loop.vertices, loop.vertices[:1]])
    closed_ang = np.concatenate([loop.angles, loop.angles[:1]])
    return TracedBoundary(
        vertices=closed,
        angles=closed_ang,
        traversals=loop.traversals,
        target=V,
        closure_defect=loop.closure_defect,
        max_residual=loop.max_residual,
    )


def winding_degree(f: EntireMap, boundary: np.ndarray, w: complex) -> int:
    """Turns of f(boundary) around w, an integer by the argument principle.

    boundary is a closed polyline given by vertices (a repeated closing
    vertex is tolerated).  The image values must stay away from w: the
    minimum distance must be at least 1e-6 of the maximum, and the raw
    winding total must sit within 0.1 turns of an integer.  Either
    failure raises NearSingularError; the cure is a denser polyline or a
    shifted w, chosen by the caller.
    """
    verts = np.asarray(boundary, dtype=np.complex128)
    if verts.size >= 2 and abs(verts[0] - verts[-1]) <= 1e-12 * (1.0 + abs(verts[0])):
        verts = verts[:-1]
    if verts.size < 3:
        raise GeometryError("winding needs at least 3 distinct vertices")
    vals = f.eval(verts)
    dist = np.abs(vals - w)
    scale = float(dist.max())
    if scale == 0.0 or float(dist.min()) < MIN_VALUE_SEPARATION * scale:
        raise NearSingularError(
            f"image of the boundary passes within {float(dist.min()):.3e} of "
            f"w = {w}; winding is unreliable"
        )
    turns, defect = winding_number(vals, w)
    if defect >= WINDING_DEFECT_LIMIT:
        raise NearSingularError(
            f"winding total is {defect:.3f} turns away from an integer; "
            "the polyline is too coarse near w"
        )
    return turns


def _local_multiplicity(f: EntireMap, root: complex, w: complex, radius: float) -> int:
    """Covering multiplicity of f at an isolated solution of f(z) = w.

    Winds f over a small circle around the root; shrinks the circle when
    the image grazes w or the total refuses to settle on an integer.
    """
    r = radius
    for _ in range(8):
        theta = np.linspace(0.0, 2.0 * np.pi, 256, endpoint=False)
        ring = root + r * np.exp(1j * theta)
        vals = f.eval(ring)
        dist = np.abs(vals - w)
        if float(dist.min()) > 1e-13 * (1.0 + abs(w)):
            turns, defect = winding_number(vals, w)
            if defect < WINDING_DEFECT_LIMIT and turns >= 1:
                return turns
        r *= 0.25
    raise NearSingularError(
        f"could not resolve the multiplicity of the preimage at {root}"
    )


def _preimage_count(f: EntireMap, w: complex, boundary_open: np.ndarray) -> int:
    """Solutions of f(z) = w inside the traced component, with multiplicity."""
    region = polyline_bounding_disk(boundary_open)
    roots = newton_preimages(f, w, region)
    roots = [z for z in roots if point_in_polygon(complex(z), boundary_open)]
    if not roots:
        return 0
    total = 0
    for z in roots:
        # the census circle must beat the location error of a multiple
        # root (~ tol^(1/m), far above the dedup radius) while excluding
        # the other roots and staying inside the component
        to_boundary = float(np.abs(boundary_open - z).min())
        r0 = min(0.5 * to_boundary, 0.25 * region.radius)
        others = [abs(z - u) for u in roots if u is not z]
        if others:
            r0 = min(r0, 0.25 * min(others))
        total += _local_multiplicity(f, complex(z), w, r0)
    return total


@dataclass(frozen=True)
class PolyLikeRestriction:
    """A certified proper cover f: U -> V of integer degree.

    target is the disk actually certified (it differs from the requested
    one only when the jitter schedule had to nudge the radius).  margin
    is the distance from the traced boundary to the target circle, the
    quantity that witnesses compact containment.
    """

    function_source: str
    domain: Disk
    target: Disk
    seed: complex
    degree: int
    margin: float
    boundary: TracedBoundary

    def to_json(self) -> dict:
        return {
            "function": self.function_source,
            "domain": self.domain.to_json(),
            "range": self.target.to_json(),
            "seed": [self.seed.real, self.seed.imag],
            "degree": self.degree,
            "margin": self.margin,
            "boundary": self.boundary.to_json(),
        }


def certify_polylike(
    f: EntireMap,
    D: Disk,
    V: Disk,
    seed: complex,
    *,
    min_steps: int = 720,
) -> PolyLikeRestriction:
    """Certify that f restricted to a component of f^{-1}(V) inside D is
    polynomial-like, and determine its degree.

    The boundary is traced (nudging V.radius through JITTER_SCHEDULE when
    a critical value blocks the lift), every vertex is required to lie in
    V with margin at least 1e-3 of the radius and inside D, and the
    degree is computed three independent ways: lift traversals, boundary
    winding about V.center, and preimages of V.center inside the
    component counted with multiplicity.  Any disagreement aborts with
    DegreeMismatchError; a certificate is only built from full agreement.
    """
    seed = complex(seed)
    if not D.contains(seed):
        raise GeometryError(f"seed {seed} lies outside the domain disk {D}")
    last_lift_error: LiftFailureError | None = None
    trace = None
    V_used = V
    for jit in JITTER_SCHEDULE:
        V_try = V if jit == 0.0 else Disk(V.center, V.radius * (1.0 + jit))
        try:
            trace = trace_component(f, V_try, seed, min_steps=min_steps)
            V_used = V_try
            break
        except LiftFailureError as e:
            last_lift_error = e
            if getattr(e, "reason", "") == "no_close":
                # the component did not close; a nudged radius cannot
                # bound an unbounded component
                break
    if trace is None:
        raise last_lift_error

    verts = trace.open_vertices()
    dist = np.abs(verts - V_used.center)
    margin = float(V_used.radius - dist.max())
    if margin < COMPACT_MARGIN_FRACTION * V_used.radius:
        raise NotCompactlyContainedError(
            f"traced boundary approaches the target circle to within "
            f"{margin:.3e} (needs {COMPACT_MARGIN_FRACTION * V_used.radius:.3e}); "
            "the component is not compactly contained in the target disk"
        )
    dom_dist = np.abs(verts - D.center)
    if float(dom_dist.max()) >= D.radius:
        raise NotCompactlyContainedError(
            f"traced boundary leaves the domain disk {D} "
            f"(max distance {float(dom_dist.max()):.6g})"
        )

    traversals = trace.traversals
    wind = winding_degree(f, verts, V_used.center)
    count = _preimage_count(f, V_used.center, verts)
    if not (traversals == wind == count):
        raise DegreeMismatchError(
            f"degree checks disagree: traversals={traversals}, "
            f"winding={wind}, preimage count={count}"
        )
    if traversals < 1:
        raise DegreeMismatchError(f"degree must be >= 1, got {traversals}")
    return PolyLikeRestriction(
        function_source=f.source,
        domain=D,
        target=V_used,
        seed=seed,
        degree=traversals,
        margin=margin,
        boundary=trace,
    )


def entropy_from_polylike(p: PolyLikeRestriction) -> certificates.EntropyCertificate:
    """Entropy lower bound log(degree) carried by a certified restriction."""
    params = p.to_json()
    params["checks"] = {
        "traversals": p.boundary.traversals,
        "closure_defect": p.boundary.closure_defect,
        "max_boundary_residual": p.boundary.max_residual,
        "compact_margin": p.margin,
    }
    return certificates.make_certificate(
        bound=math.log(p.degree),
        route=certificates.ROUTE_POLYLIKE,
        parameters=params,
    )
