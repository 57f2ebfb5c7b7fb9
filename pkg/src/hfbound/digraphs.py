"""Mutual-edge hubs in dense digraphs, and scanning a map family for one.

A digraph in which every vertex points at all but k-1 of the others must
contain a hub: a vertex joined in both directions with at least N-2k
distinct partners.  Counting missing edges proves it: each vertex omits
at most k-1 outgoing edges to others, so on average a vertex is missed
by at most k-1 incoming edges, and the best-covered vertex loses at most
2(k-1) of its N-1 potential partners.  The search below just finds such
a hub and certifies it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, HypothesisViolatedError, ScanExhaustedError
from .islands import IslandDigraph, build_digraph


def _adjacency(g) -> np.ndarray:
    if isinstance(g, IslandDigraph):
        return g.adjacency()
    mat = np.asarray(g, dtype=bool)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"adjacency matrix must be square, got {mat.shape}")
    return mat


@dataclass(frozen=True)
class TwoCycleCertificate:
    """Hub vertex plus partners joined to it by edges in both directions."""

    hub: int
    partners: tuple[int, ...]
    k: int

    def validate(self, g) -> None:
        """Raise unless this certificate states true facts about g."""
        mat = _adjacency(g)
        n = mat.shape[0]
        need = n - 2 * self.k
        if not (0 <= self.hub < n):
            raise ValueError(f"hub {self.hub} out of range")
        if len(set(self.partners)) != len(self.partners):
            raise ValueError("partners are not pairwise distinct")
        if self.hub in self.partners:
            raise ValueError("hub listed among its own partners")
        if len(self.partners) < need:
            raise ValueError(
                f"only {len(self.partners)} partners, need at least {need}"
            )
        for p in self.partners:
            if not (0 <= p < n):
                raise ValueError(f"partner {p} out of range")
            if not (mat[self.hub, p] and mat[p, self.hub]):
                raise ValueError(f"pair ({self.hub}, {p}) is not a two-cycle")

    def to_json(self) -> dict:
        return {"hub": self.hub, "partners": list(self.partners), "k": self.k}


def find_two_cycles(g, k: int) -> TwoCycleCertificate:
    """Find a hub with at least N - 2k mutual partners.

    Hypothesis (checked): N >= 2k + 1 and every vertex has edges to at
    least N - k OTHER vertices; self-loops do not count toward that,
    since a vertex cannot be its own partner.  Under the hypothesis a
    valid hub provably exists, so exhausting the search means the code
    is wrong, not the input.  Hubs are scanned in index order and all
    partners of the first valid hub are returned.
    """
    mat = _adjacency(g)
    n = mat.shape[0]
    if k < 1:
        raise HypothesisViolatedError(f"k must be >= 1, got {k}")
    if n < 2 * k + 1:
        raise HypothesisViolatedError(
            f"need at least 2k+1 = {2 * k + 1} vertices, got {n}"
        )
    nonself = mat.copy()
    np.fill_diagonal(nonself, False)
    degrees = nonself.sum(axis=1)
    weakest = int(degrees.argmin())
    if degrees[weakest] < n - k:
        raise HypothesisViolatedError(
            f"vertex {weakest} has only {int(degrees[weakest])} non-self "
            f"out-edges, hypothesis needs {n - k}"
        )
    mutual = nonself & nonself.T
    need = n - 2 * k
    for hub in range(n):
        partners = np.flatnonzero(mutual[hub])
        if partners.size >= need:
            return TwoCycleCertificate(
                hub=hub, partners=tuple(int(p) for p in partners), k=k
            )
    raise RuntimeError(
        "no hub found although the hypothesis holds; this is a bug in the "
        "search, not a property of the digraph"
    )


def scan_family(
    family,
    centers,
    gamma: float,
    delta: float,
    min_outdeg: int,
    k_max: int | None = None,
    *,
    grid_density: int = 12,
) -> tuple[int, IslandDigraph]:
    """First member of the family whose island digraph is dense enough.

    Density means: every vertex has at least min_outdeg distinct non-self
    targets, the form the two-cycle search consumes.  Returns (index,
    digraph) for the first success; exhausting the family (or the k_max
    budget) raises, because nothing about a finite scan can distinguish
    "the family never works" from "the budget was too small".
    """
    centers = tuple(complex(c) for c in centers)
    n = len(centers)
    if min_outdeg > n:
        raise GeometryError(f"min_outdeg {min_outdeg} exceeds vertex count {n}")
    tried = 0
    for index, member in enumerate(family):
        if k_max is not None and tried >= k_max:
            break
        tried += 1
        digraph = build_digraph(
            member, centers, gamma, delta, grid_density=grid_density
        )
        if digraph.min_nonself_out_degree() >= min_outdeg:
            return index, digraph
    raise ScanExhaustedError(
        f"no family member reached min non-self out-degree {min_outdeg} "
        f"after {tried} digraphs"
    )
