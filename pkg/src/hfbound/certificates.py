"""Entropy lower-bound certificates and their audit trail.

A certificate asserts h(f) >= bound and records everything needed to
re-run the verification that produced it.  The content hash covers the
claim and its parameters; creation time lives in a metadata side car so
that identical runs produce identical hashes.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone

from .errors import GeometryError

ROUTE_POLYLIKE = "polylike"
ROUTE_HORSESHOE = "horseshoe"


def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, no whitespace, ASCII only."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


@dataclass(frozen=True)
class EntropyCertificate:
    """Machine-checkable record that a verified construction forces
    topological entropy >= bound.

    route is "polylike" (bound = log degree) or "horseshoe"
    (bound = log(symbols)/2).  parameters carries the full provenance:
    function source, disks, rescale index, measured margins, depths and
    tolerances of every sub-verification.
    """

    bound: float
    route: str
    parameters: dict
    created_at: str

    def __post_init__(self):
        if self.route not in (ROUTE_POLYLIKE, ROUTE_HORSESHOE):
            raise ValueError(f"unknown certificate route {self.route!r}")
        if not self.bound >= 0.0:
            raise ValueError(f"bound must be nonnegative, got {self.bound}")
        if self.route == ROUTE_POLYLIKE:
            want = math.log(int(self.parameters["degree"]))
        else:
            want = math.log(int(self.parameters["symbols"])) / 2.0
        if abs(self.bound - want) > 1e-12:
            raise ValueError(
                f"bound {self.bound} does not match the {self.route} formula {want}"
            )

    def content_hash(self) -> str:
        payload = {
            "bound": self.bound,
            "route": self.route,
            "parameters": self.parameters,
        }
        return hashlib.sha256(canonical_json(payload).encode()).hexdigest()

    def to_json(self) -> dict:
        return {
            "bound": self.bound,
            "route": self.route,
            "parameters": self.parameters,
            "content_hash": self.content_hash(),
            "metadata": {"created_at": self.created_at},
        }

    @classmethod
    def from_json(cls, blob: dict) -> "EntropyCertificate":
        cert = cls(
            bound=float(blob["bound"]),
            route=str(blob["route"]),
            parameters=blob["parameters"],
            created_at=str(blob.get("metadata", {}).get("created_at", "")),
        )
        stored = blob.get("content_hash")
        if stored is not None and stored != cert.content_hash():
            raise ValueError("certificate content hash does not match its payload")
        return cert


def make_certificate(bound: float, route: str, parameters: dict) -> EntropyCertificate:
    return EntropyCertificate(
        bound=float(bound),
        route=route,
        parameters=parameters,
        created_at=datetime.now(timezone.utc).isoformat(),
    )


def revalidate(cert: EntropyCertificate) -> dict:
    """Re-run the checks recorded in a certificate's provenance.

    Returns a report dict with ok plus per-stage outcomes.  Imports are
    local to avoid cycles: this module is the bottom of the dependency
    stack.
    """
    from .expr import parse_map
    from .geometry import Disk

    p = cert.parameters
    f = parse_map(p["function"])
    report = {"route": cert.route, "stages": {}}
    if cert.route == ROUTE_POLYLIKE:
        from .polylike import certify_polylike

        inner = p.get("rescale_index")
        if inner is not None and int(inner) != 1:
            from .rescale import rescaled

            f = rescaled(f, int(inner))
        D = Disk(complex(*p["domain"]["center"]), p["domain"]["radius"])
        V = Disk(complex(*p["range"]["center"]), p["range"]["radius"])
        seed = complex(*p["seed"])
        restriction = certify_polylike(f, D, V, seed)
        got = restriction.degree
        report["stages"]["polylike"] = {
            "expected_degree": p["degree"],
            "recomputed_degree": got,
        }
        # the bound claims log(degree); any recomputed degree at or above
        # the claim re-justifies it
        ok = got >= int(p["degree"])
    else:
        from .rescale import rebuild_horseshoe

        ok, stages = rebuild_horseshoe(f, p)
        report["stages"].update(stages)
    report["ok"] = bool(ok)
    if not ok:
        raise GeometryError(f"certificate failed revalidation: {report}")
    return report
