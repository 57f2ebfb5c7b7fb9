"""Detection of simple islands and the island-relation digraph.

An island is a component of the preimage of a target disk that the map
carries onto that disk bijectively, sitting inside a prescribed source
disk.  The detector finds candidate components by root search, traces
each component boundary by circle lifting, and accepts only components
whose trace closes after one sweep, stays inside the source disk with
quantified margin, winds exactly once, and contains no critical point.
A missed island costs nothing downstream; a falsely accepted one would,
so every check errs toward rejection.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, LiftFailureError
from .expr import EntireMap
from .geometry import Disk, point_in_polygon, polyline_bounding_disk, winding_number
from .lifting import lift_circle, ray_shoot
from .roots import newton_preimages

log = logging.getLogger(__name__)

# accept a component only if its boundary clears the source circle by
# this fraction of the source radius
CONTAINMENT_FRACTION = 1e-3
BOUNDARY_RESIDUAL_FRACTION = 1e-6


@dataclass(frozen=True)
class UnivalenceRecord:
    winding: int
    winding_defect: float
    interior_critical_points: int


@dataclass(frozen=True)
class IslandWitness:
    """Everything needed to re-check one simple island without the detector."""

    source_index: int
    target_index: int
    core_preimage: complex
    boundary: np.ndarray
    boundary_angles: np.ndarray
    containment_margin: float
    univalence: UnivalenceRecord
    traversals: int
    max_residual: float

    def reverify(self, f: EntireMap, source: Disk, target: Disk) -> dict:
        """Re-check the witness from its stored boundary alone.

        Fresh evaluations of f along the stored polyline must land back on
        the target circle, the loop must wind once around the target
        center, and every vertex must clear the source circle.
        """
        vals = np.asarray(f.eval(self.boundary))
        expected = target.center + target.radius * np.exp(1j * self.boundary_angles)
        boundary_defect = float(np.abs(vals - expected).max())
        wind, wind_defect = winding_number(vals, target.center)
        margin = float(source.radius - np.abs(self.boundary - source.center).max())
        core_ok = abs(complex(f(self.core_preimage)) - target.center) <= max(
            1e-8 * target.radius, 1e-12 * (1.0 + abs(target.center))
        )
        ok = (
            boundary_defect <= BOUNDARY_RESIDUAL_FRACTION * target.radius
            and wind == 1
            and wind_defect < 0.1
            and margin >= CONTAINMENT_FRACTION * source.radius
            and core_ok
        )
        return {
            "ok": bool(ok),
            "boundary_defect": boundary_defect,
            "winding": wind,
            "winding_defect": wind_defect,
            "containment_margin": margin,
            "core_ok": bool(core_ok),
        }

    def summary_json(self) -> dict:
        return {
            "source": self.source_index,
            "target": self.target_index,
            "core": [self.core_preimage.real, self.core_preimage.imag],
            "margin": self.containment_margin,
            "vertex_count": int(self.boundary.size),
            "traversals": self.traversals,
            "max_residual": self.max_residual,
            "winding": self.univalence.winding,
        }

    def to_json(self) -> dict:
        blob = self.summary_json()
        blob["boundary"] = [[v.real, v.imag] for v in self.boundary]
        blob["angles"] = list(map(float, self.boundary_angles))
        blob["winding_defect"] = self.univalence.winding_defect
        blob["interior_critical_points"] = self.univalence.interior_critical_points
        return blob

    @classmethod
    def from_json(cls, blob: dict) -> "IslandWitness":
        boundary = np.asarray(
            [complex(re, im) for re, im in blob["boundary"]], dtype=np.complex128
        )
        return cls(
            source_index=int(blob["source"]),
            target_index=int(blob["target"]),
            core_preimage=complex(blob["core"][0], blob["core"][1]),
            boundary=boundary,
            boundary_angles=np.asarray(blob["angles"], dtype=np.float64),
            containment_margin=float(blob["margin"]),
            univalence=UnivalenceRecord(
                winding=int(blob["winding"]),
                winding_defect=float(blob["winding_defect"]),
                interior_critical_points=int(blob["interior_critical_points"]),
            ),
            traversals=int(blob["traversals"]),
            max_residual=float(blob["max_residual"]),
        )


def _critical_points_inside(f: EntireMap, boundary: np.ndarray) -> int:
    deriv = f.derivative()
    region = polyline_bounding_disk(boundary, inflate=1.05)
    try:
        crits = newton_preimages(deriv, 0.0, region, grid_density=10)
    except Exception:  # pragma: no cover - root search is total in practice
        return -1
    return sum(1 for c in crits if point_in_polygon(complex(c), boundary))


def find_islands(
    f: EntireMap,
    source: Disk,
    target: Disk,
    *,
    grid_density: int = 12,
    source_index: int = -1,
    target_index: int = -1,
) -> list[IslandWitness]:
    """All simple islands over `target` found inside `source`.

    Witnesses are sorted by core preimage.  The detector is sound, not
    complete: a component whose trace stalls near a critical point is
    skipped (and logged), never guessed at.  Any pair of disks is legal
    here; digraph construction separately enforces its narrower regime
    of source radii below target radii.
    """
    cores = newton_preimages(f, target.center, source, grid_density=grid_density)
    witnesses = []
    for core in cores:
        core = complex(core)
        try:
            start = ray_shoot(f, core, target)
            loop = lift_circle(
                f,
                start,
                target,
                min_points=720,
                max_step=source.radius / 20.0,
            )
        except LiftFailureError as exc:
            log.info(
                "island candidate %s -> %s rejected: %s", core, target.center, exc
            )
            continue
        if loop.traversals != 1:
            continue
        margin = float(source.radius - np.abs(loop.vertices - source.center).max())
        if margin < CONTAINMENT_FRACTION * source.radius:
            continue
        if not point_in_polygon(core, loop.vertices):
            continue
        vals = np.asarray(f.eval(loop.vertices))
        wind, wind_defect = winding_number(vals, target.center)
        if wind != 1 or wind_defect >= 0.1:
            continue
        crit_inside = _critical_points_inside(f, loop.vertices)
        if crit_inside != 0:
            log.info(
                "island candidate %s rejected: %d interior critical points",
                core,
                crit_inside,
            )
            continue
        witnesses.append(
            IslandWitness(
                source_index=source_index,
                target_index=target_index,
                core_preimage=core,
                boundary=loop.vertices,
                boundary_angles=loop.angles,
                containment_margin=margin,
                univalence=UnivalenceRecord(wind, wind_defect, 0),
                traversals=loop.traversals,
                max_residual=loop.max_residual,
            )
        )
    witnesses.sort(key=lambda w: (w.core_preimage.real, w.core_preimage.imag))
    return witnesses


@dataclass(frozen=True, eq=False)
class IslandDigraph:
    """Vertices are probe disks; edge (i, j) records a verified island
    over the j-th target disk lying inside the i-th source disk.

    out_degree counts every distinct target including a self-loop; the
    nonself variants exist because the two-cycle search's hypothesis is
    about edges to other vertices only, where a self-loop cannot help.
    """

    centers: tuple[complex, ...]
    gamma: float
    delta: float
    edges: tuple[IslandWitness, ...]

    @property
    def n(self) -> int:
        return len(self.centers)

    def edge_pairs(self) -> list[tuple[int, int]]:
        return sorted((w.source_index, w.target_index) for w in self.edges)

    def has_edge(self, i: int, j: int) -> bool:
        return any(
            w.source_index == i and w.target_index == j for w in self.edges
        )

    def witness(self, i: int, j: int) -> IslandWitness | None:
        for w in self.edges:
            if w.source_index == i and w.target_index == j:
                return w
        return None

    def out_degree(self, v: int) -> int:
        return len({w.target_index for w in self.edges if w.source_index == v})

    def nonself_out_degree(self, v: int) -> int:
        return len(
            {
                w.target_index
                for w in self.edges
                if w.source_index == v and w.target_index != v
            }
        )

    def min_out_degree(self) -> int:
        return min(self.out_degree(v) for v in range(self.n)) if self.n else 0

    def min_nonself_out_degree(self) -> int:
        return min(self.nonself_out_degree(v) for v in range(self.n)) if self.n else 0

    def adjacency(self) -> np.ndarray:
        mat = np.zeros((self.n, self.n), dtype=bool)
        for w in self.edges:
            mat[w.source_index, w.target_index] = True
        return mat

    def to_json(self) -> dict:
        return {
            "centers": [[c.real, c.imag] for c in self.centers],
            "gamma": self.gamma,
            "delta": self.delta,
            "edges": [w.to_json() for w in self.edges],
        }

    @classmethod
    def from_json(cls, blob: dict) -> "IslandDigraph":
        return cls(
            centers=tuple(complex(re, im) for re, im in blob["centers"]),
            gamma=float(blob["gamma"]),
            delta=float(blob["delta"]),
            edges=tuple(IslandWitness.from_json(e) for e in blob["edges"]),
        )


def check_disjoint_targets(centers, delta: float) -> None:
    """Closed target disks must be pairwise disjoint: |x_i - x_j| > 2*delta."""
    centers = [complex(c) for c in centers]
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            if abs(centers[i] - centers[j]) <= 2.0 * delta:
                raise GeometryError(
                    f"target disks {i} and {j} overlap: "
                    f"|x_{i} - x_{j}| = {abs(centers[i] - centers[j]):.6g} "
                    f"<= 2*delta = {2.0 * delta:.6g}"
                )


def build_digraph(
    f: EntireMap,
    centers,
    gamma: float,
    delta: float,
    *,
    grid_density: int = 12,
) -> IslandDigraph:
    """The island relation over the probe centers.

    Edge (i, j) is present exactly when the detector certifies an island
    over B(x_j, delta) inside B(x_i, gamma); the first witness (by core
    preimage order) is kept on the edge.
    """
    centers = tuple(complex(c) for c in centers)
    if not centers:
        raise GeometryError("need at least one probe center")
    if not (0.0 < gamma <= delta):
        raise GeometryError(f"need 0 < gamma <= delta, got {gamma}, {delta}")
    check_disjoint_targets(centers, delta)
    edges = []
    for i, xi in enumerate(centers):
        source = Disk(xi, gamma)
        for j, xj in enumerate(centers):
            found = find_islands(
                f,
                source,
                Disk(xj, delta),
                grid_density=grid_density,
                source_index=i,
                target_index=j,
            )
            if found:
                edges.append(found[0])
    return IslandDigraph(
        centers=centers, gamma=float(gamma), delta=float(delta), edges=tuple(edges)
    )


__all__ = [
    "IslandWitness",
    "UnivalenceRecord",
    "IslandDigraph",
    "find_islands",
    "build_digraph",
    "check_disjoint_targets",
]
