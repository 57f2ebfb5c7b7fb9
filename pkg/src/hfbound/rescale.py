"""Rescaled families f_n(z) = f(nz)/n and the two certification pipelines.

Rescaling conjugates f by z -> nz, so entropy is preserved while the map
is squeezed toward the origin.  Two independent routes turn that into a
certificate: count zeros inside a disk and certify a polynomial-like
restriction of degree >= m (bound log m), or scan the family for a dense
island digraph, collapse it to a two-cycle branch system for the second
iterate, and verify the shift conjugacy (bound log(symbols)/2).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import certificates
from .digraphs import find_two_cycles, scan_family
from .errors import (
    DisjointnessViolationError,
    EvalOverflowError,
    GeometryError,
    HfboundError,
    NearSingularError,
    StageFailureError,
    ZeroDeficientError,
)
from .expr import Call, Const, Div, EntireMap, simplify, unparse
from .geometry import Disk, winding_number
from .ifs import GAMMA_FACTOR, branch_from_island, build_branch_system, compose_branch, verify_conjugacy
from .islands import build_digraph, check_disjoint_targets
from .polylike import certify_polylike

__all__ = [
    "RescaleFamily",
    "CertificationRequest",
    "rescaled",
    "count_zeros",
    "max_modulus",
    "default_probes",
    "certify_via_zeros",
    "certify_via_islands",
    "entropy_ladder",
    "LadderResult",
]

RANGE_RADIUS = 0.9

DEFAULT_BUDGETS = {
    "radius_doublings": 20,    # zero search tries R = 1, 2, 4, ... 2^20
    "k_max": 65536,            # rescale indices 1, 2, 4, ... up to this
    "depth": 5,                # conjugacy verification depth
    "samples": 1024,           # modulus estimation circle samples
    "zero_samples": 2048,      # zero counting circle samples
    "grid_density": 12,        # island detector seeding grid
}

# relative radius ladder for a zero sitting on or near the counting
# circle: counts are accepted only when two consecutive radii agree
ZERO_JITTER_SCHEDULE = (0.0, 2e-6, 5e-6, 1e-5, 3e-5, 1e-4, 3e-4, 1e-3)


def rescaled(f: EntireMap, n: int) -> EntireMap:
    """The conjugated map f(nz)/n, built by AST substitution."""
    if n != int(n) or n < 1:
        raise ValueError(f"rescale index must be a positive integer, got {n}")
    n = int(n)
    if n == 1:
        return f
    node = simplify(Div(f.substituted_scaled(complex(n)), Const(complex(n))))
    return EntireMap(unparse(node), node)


@dataclass(frozen=True)
class RescaleFamily:
    """The indexed family n -> f(nz)/n over a contiguous index range."""

    base: EntireMap
    index_range: tuple[int, int]

    def __post_init__(self):
        lo, hi = self.index_range
        if not (1 <= lo <= hi):
            raise ValueError(f"invalid index range {self.index_range}")

    def member(self, n: int) -> EntireMap:
        lo, hi = self.index_range
        if not lo <= n <= hi:
            raise ValueError(f"index {n} outside {self.index_range}")
        return rescaled(self.base, n)

    def __iter__(self):
        lo, hi = self.index_range
        return (rescaled(self.base, n) for n in range(lo, hi + 1))


@dataclass(frozen=True)
class CertificationRequest:
    """One rung of the entropy ladder: certify h(f) >= log(target_m)."""

    f: EntireMap
    target_m: int
    route_preference: str = "auto"
    budgets: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.target_m < 2:
            raise ValueError(f"target_m must be >= 2, got {self.target_m}")
        if self.route_preference not in ("auto", "zeros", "islands"):
            raise ValueError(f"unknown route {self.route_preference!r}")

    def budget(self, key: str):
        return self.budgets.get(key, DEFAULT_BUDGETS[key])


def count_zeros(f: EntireMap, R: float, samples: int = 2048) -> int:
    """Zeros of f inside |z| < R, counted with multiplicity by winding.

    The image of the circle can span an enormous dynamic range (exp does
    e^{+-R}), so the raw argument accumulator is used directly.  A zero
    sitting on or near the circle flips the count between nearby radii;
    the count is only accepted once two consecutive radii of the nudge
    ladder agree cleanly.
    """
    if not R > 0.0:
        raise GeometryError(f"counting radius must be positive, got {R}")
    theta = np.linspace(0.0, 2.0 * np.pi, samples, endpoint=False)
    ring_dirs = np.exp(1j * theta)

    def attempt(radius: float):
        vals = f.eval(radius * ring_dirs)
        if not np.all(np.isfinite(vals)):
            raise EvalOverflowError(f"|f| overflowed on the circle |z| = {radius:g}")
        if float(np.abs(vals).min()) == 0.0:
            return None
        turns, defect = winding_number(vals, 0.0)
        if defect >= 0.1:
            return None
        return turns

    prev = None
    for jit in ZERO_JITTER_SCHEDULE:
        got = attempt(R * (1.0 + jit))
        if got is not None and got == prev:
            return got
        prev = got
    raise NearSingularError(
        f"zero counts near |z| = {R:g} never stabilized across the "
        "radius nudge ladder; a zero sits too close to the circle"
    )


def max_modulus(f: EntireMap, R: float, samples: int = 1024) -> float:
    """Lower estimate of max |f| on the circle |z| = R.

    Dense sampling plus golden-section refinement around the best arc.
    The estimate can only come in low, so consumers inflate it before
    using it as an upper bound.
    """
    if samples < 256:
        raise ValueError(f"samples must be >= 256, got {samples}")
    theta = np.linspace(0.0, 2.0 * np.pi, samples, endpoint=False)
    vals = np.abs(f.eval(R * np.exp(1j * theta)))
    if not np.all(np.isfinite(vals)):
        raise EvalOverflowError(f"|f| overflowed on the circle |z| = {R}")
    best = int(np.argmax(vals))
    span = 2.0 * np.pi / samples

    def neg_mod(t: float) -> float:
        return -abs(f.eval(R * np.exp(1j * t)))

    res = minimize_scalar(
        neg_mod,
        bounds=(theta[best] - span, theta[best] + span),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return max(float(vals[best]), float(-res.fun))


def default_probes(f: EntireMap, n: int = 9, oscillation: float = 2.0 * math.pi):
    """Equally spaced probe points on the imaginary axis.

    The spacing matches the oscillation scale of the base map (the
    imaginary period 2*pi for exp-like growth); callers with better
    knowledge pass their own probes.
    """
    if n < 1:
        raise ValueError("need at least one probe")
    return [1j * (oscillation / n) * j for j in range(n)]


def _power_ladder(k_max: int):
    ks = []
    k = 1
    while k <= k_max:
        ks.append(k)
        k *= 2
    return ks


def certify_via_zeros(req: CertificationRequest) -> certificates.EntropyCertificate:
    """Zeros route: m zeros in B(0,R) force a degree >= m restriction.

    Finds R with at least target_m zeros, takes n_k just above twice the
    (inflated) maximum modulus so the rescaled map contracts B(0,R/n_k)
    into the range disk, and certifies the polynomial-like restriction
    of f_{n_k} over B(0, 0.9) seeded at the origin.  The certified bound
    is log(target_m); the achieved degree is recorded alongside.
    """
    f = req.f
    m = req.target_m
    R = 1.0
    found = None
    for _ in range(req.budget("radius_doublings") + 1):
        try:
            cnt = count_zeros(f, R, req.budget("zero_samples"))
        except EvalOverflowError:
            # |f| already overflows on this circle, so every larger
            # radius is uncountable too: the search is over
            break
        if cnt >= m:
            found = (R, cnt)
            break
        R *= 2.0
    if found is None:
        raise ZeroDeficientError(
            f"no countable radius up to {R / 2.0:g} holds {m} zeros of {f.source}"
        )
    R, cnt = found
    mod_est = max_modulus(f, R, req.budget("samples"))
    M = 1.1 * mod_est
    n_k = int(math.floor(2.0 * M)) + 1
    f_k = rescaled(f, n_k)
    V = Disk(0.0, RANGE_RADIUS)
    restriction = certify_polylike(f_k, V, V, 0.0)
    if restriction.degree < m:
        raise StageFailureError(
            "degree",
            GeometryError(
                f"restriction degree {restriction.degree} is below the "
                f"target {m}; the zero cluster did not survive rescaling"
            ),
        )
    params = {
        "function": f.source,
        "target_m": m,
        "zeros_radius": R,
        "zero_count": cnt,
        "max_modulus_estimate": mod_est,
        "modulus_inflation": 1.1,
        "rescale_index": n_k,
        "domain": restriction.domain.to_json(),
        "range": restriction.target.to_json(),
        "seed": [0.0, 0.0],
        "degree": m,
        "achieved_degree": restriction.degree,
        "margin": restriction.margin,
        "route_detail": "zeros",
    }
    return certificates.make_certificate(math.log(m), certificates.ROUTE_POLYLIKE, params)


def _second_iterate_branches(f_k: EntireMap, digraph, hub: int, partners, probes, delta: float):
    """Composed inverse branches of f_k^2 over the hub disk, one per partner."""
    a_h = probes[hub]
    branches = []
    for idx, p in enumerate(partners):
        into_hub = digraph.witness(hub, p)
        into_partner = digraph.witness(p, hub)
        if into_hub is None or into_partner is None:
            raise GeometryError(f"two-cycle edge ({hub},{p}) lost its witness")
        outer = branch_from_island(
            f_k, into_hub, Disk(probes[p], delta), index=idx
        )
        inner = branch_from_island(
            f_k, into_partner, Disk(a_h, delta), index=idx
        )
        branches.append(compose_branch(idx, outer, inner))
    return branches


def _disjoint_partner_subset(branches, partners):
    """Maximal greedy subset of branches with pairwise separated hulls.

    Composed islands stack along a curve with radii shrinking as the
    partner modulus grows, so adjacent hulls can graze even when every
    skip-one pair is clear.  Keeping only a separated subset claims
    exactly the symbols that are verified, nothing more.
    """
    order = sorted(
        range(len(branches)),
        key=lambda i: (
            branches[i].region_center.real + branches[i].region_radius,
            branches[i].region_center.imag,
        ),
    )
    kept: list[int] = []
    for i in order:
        bi = branches[i]
        if all(
            abs(bi.region_center - branches[j].region_center)
            - bi.region_radius
            - branches[j].region_radius
            > 0.0
            for j in kept
        ):
            kept.append(i)
    kept.sort()
    return [branches[i] for i in kept], [partners[i] for i in kept]


def certify_via_islands(
    req: CertificationRequest, probes
) -> certificates.EntropyCertificate:
    """Islands route: a dense digraph over the probes collapses to a
    verified two-cycle horseshoe for the second iterate.

    Stages: probe geometry, family scan to min non-self out-degree
    n - 4, two-cycle extraction with k = 4, second-iterate branch
    composition, branch-system construction, conjugacy verification.
    Each stage failure aborts with that stage recorded; no certificate
    is ever produced from a failed stage.
    """
    probes = [complex(p) for p in probes]
    n = len(probes)
    if n < 9:
        raise GeometryError(f"need at least 9 probes, got {n}")
    gaps = [
        abs(probes[i] - probes[j]) for i in range(n) for j in range(i + 1, n)
    ]
    delta = float(req.budgets.get("delta", 0.45 * min(gaps)))
    check_disjoint_targets(probes, delta)
    gamma = delta / GAMMA_FACTOR

    ks = _power_ladder(req.budget("k_max"))
    try:
        pos, digraph = scan_family(
            (rescaled(req.f, k) for k in ks),
            probes,
            gamma,
            delta,
            n - 4,
            grid_density=req.budget("grid_density"),
        )
    except HfboundError as e:
        raise StageFailureError("scan", e) from e
    k_star = ks[pos]
    f_k = rescaled(req.f, k_star)

    try:
        cycle = find_two_cycles(digraph, 4)
    except HfboundError as e:
        raise StageFailureError("two_cycle", e) from e

    try:
        branches = _second_iterate_branches(
            f_k, digraph, cycle.hub, cycle.partners, probes, delta
        )
        branches, partners = _disjoint_partner_subset(
            branches, list(cycle.partners)
        )
        if len(branches) < 2:
            raise DisjointnessViolationError(
                "fewer than 2 pairwise-separated second-iterate islands "
                f"among {len(cycle.partners)} two-cycle partners"
            )
        g2 = _SecondIterate(f_k)
        system = build_branch_system(g2, probes[cycle.hub], delta, branches)
    except HfboundError as e:
        raise StageFailureError("branch_system", e) from e

    depth = req.budget("depth")
    tol = float(req.budgets.get("conjugacy_tol", 1e-8 * delta))
    try:
        report = verify_conjugacy(system, g2, depth, tol)
    except HfboundError as e:
        raise StageFailureError("conjugacy", e) from e
    if not report.passed:
        raise StageFailureError(
            "conjugacy",
            GeometryError(
                f"conjugacy defect {report.max_defect:g} exceeds "
                f"threshold {report.threshold:g} at depth {depth}"
            ),
        )

    symbols = len(partners)
    params = {
        "function": req.f.source,
        "target_m": req.target_m,
        "probes": [[p.real, p.imag] for p in probes],
        "delta": delta,
        "gamma": gamma,
        "rescale_index": k_star,
        "hub": cycle.hub,
        "partners": partners,
        "partner_pool": list(cycle.partners),
        "symbols": symbols,
        "conjugacy": report.to_json(),
        "contraction_bound": max(
            b.contraction_bound for b in system.branches
        ),
        "closure_gap": system.closure_gap,
        "route_detail": "islands",
    }
    return certificates.make_certificate(
        math.log(symbols) / 2.0, certificates.ROUTE_HORSESHOE, params
    )


class _SecondIterate:
    """f∘f as a callable usable by the branch-system verifier."""

    def __init__(self, f: EntireMap):
        self.f = f

    def __call__(self, z):
        return self.f.eval(self.f.eval(z))

    def eval(self, z):
        return self(z)


def rebuild_horseshoe(f: EntireMap, params: dict) -> tuple[bool, dict]:
    """Re-run the islands-route checks recorded in a certificate."""
    stages: dict = {}
    k = int(params["rescale_index"])
    f_k = rescaled(f, k)
    probes = [complex(re, im) for re, im in params["probes"]]
    delta = float(params["delta"])
    gamma = float(params["gamma"])
    hub = int(params["hub"])
    partners = [int(p) for p in params["partners"]]

    digraph = build_digraph(f_k, probes, gamma, delta)
    edges_ok = all(
        digraph.has_edge(hub, p) and digraph.has_edge(p, hub) for p in partners
    )
    stages["digraph"] = {"edges_ok": edges_ok}
    if not edges_ok:
        return False, stages

    branches = _second_iterate_branches(f_k, digraph, hub, partners, probes, delta)
    g2 = _SecondIterate(f_k)
    system = build_branch_system(g2, probes[hub], delta, branches)
    stages["branch_system"] = {"n_symbols": system.n_symbols}

    depth = int(params["conjugacy"]["depth"])
    threshold = float(params["conjugacy"]["threshold"])
    report = verify_conjugacy(
        system, g2, depth, max(threshold - delta * 2.0 ** (-depth), 1e-14 * delta)
    )
    stages["conjugacy"] = report.to_json()
    ok = (
        report.passed
        and system.n_symbols == len(partners)
        and int(params["symbols"]) == len(partners)
    )
    return ok, stages


def certify_map(
    req: CertificationRequest, probes=None
) -> certificates.EntropyCertificate:
    """Run the request along its preferred route.

    "zeros" and "islands" run exactly that pipeline and let its error
    propagate.  "auto" tries zeros first and falls back to islands,
    raising only when both fail, with both failure messages kept.
    """
    zeros_err: HfboundError | None = None
    if req.route_preference != "islands":
        try:
            return certify_via_zeros(req)
        except HfboundError as e:
            if req.route_preference == "zeros":
                raise
            zeros_err = e
    if probes is None:
        probes = default_probes(req.f)
    try:
        return certify_via_islands(req, probes)
    except HfboundError as ie:
        if req.route_preference == "islands":
            raise
        raise HfboundError(
            "both routes failed; "
            f"zeros: {type(zeros_err).__name__}: {zeros_err}; "
            f"islands: {type(ie).__name__}: {ie}"
        ) from ie


class LadderResult(list):
    """Certificates in target order, plus recorded per-target failures.

    Behaves as a plain list of EntropyCertificate; the ``failures``
    attribute maps each unserved target to the errors its routes hit.
    """

    def __init__(self, certs=()):
        super().__init__(certs)
        self.failures: list[dict] = []


def _is_polynomial(f: EntireMap) -> bool:
    from .expr import Add, Div, Mul, Neg, Pow, Sub, Var

    def walk(node) -> bool:
        if isinstance(node, Call):
            return False
        if isinstance(node, (Var, Const)):
            return True
        if isinstance(node, (Add, Sub, Mul)):
            return walk(node.left) and walk(node.right)
        if isinstance(node, Div):
            return walk(node.left)
        if isinstance(node, Neg):
            return walk(node.operand)
        if isinstance(node, Pow):
            return walk(node.base)
        return False

    return walk(f.ast)


def _poly_degree(node) -> int:
    from .expr import Add, Div, Mul, Neg, Pow, Sub, Var

    if isinstance(node, Var):
        return 1
    if isinstance(node, Const):
        return 0
    if isinstance(node, (Add, Sub)):
        return max(_poly_degree(node.left), _poly_degree(node.right))
    if isinstance(node, Mul):
        return _poly_degree(node.left) + _poly_degree(node.right)
    if isinstance(node, Div):
        return _poly_degree(node.left)
    if isinstance(node, Neg):
        return _poly_degree(node.operand)
    if isinstance(node, Pow):
        return node.exponent * _poly_degree(node.base)
    raise TypeError(f"not a polynomial node: {node!r}")


def entropy_ladder(
    f: EntireMap,
    targets,
    *,
    probes=None,
    budgets: dict | None = None,
) -> LadderResult:
    """One certificate per target, zeros route first, islands fallback.

    Targets must be nondecreasing integers >= 2.  Failures never abort
    the ladder; each is recorded on the result and the next target is
    attempted.  Emitted bounds are nondecreasing: a fallback certificate
    whose bound regresses below an already-emitted one is recorded as a
    failure instead.
    """
    targets = [int(m) for m in targets]
    if any(b < a for a, b in zip(targets, targets[1:])):
        raise ValueError(f"targets must be nondecreasing, got {targets}")
    result = LadderResult()
    if not targets:
        return result
    if any(m < 2 for m in targets):
        raise ValueError("every target must be >= 2")
    budgets = dict(budgets or {})

    poly_cap: int | None = None
    if _is_polynomial(f):
        poly_cap = _poly_degree(f.ast)
        warnings.warn(
            f"{f.source} is a polynomial: its entropy is exactly "
            f"log {poly_cap}, which caps the ladder",
            stacklevel=2,
        )

    if probes is None:
        probes = default_probes(f)
    islands_outcome: dict = {}
    best_bound = 0.0

    for m in targets:
        errors: dict = {}
        cert = None
        if poly_cap is not None and m > poly_cap:
            result.failures.append(
                {
                    "target": m,
                    "errors": {
                        "zeros": f"a degree-{poly_cap} polynomial has only "
                        f"{poly_cap} zeros; target {m} is unreachable"
                    },
                }
            )
            continue
        req = CertificationRequest(f, m, budgets=budgets)
        try:
            cert = certify_via_zeros(req)
        except HfboundError as e:
            errors["zeros"] = f"{type(e).__name__}: {e}"
            # the islands scan does not depend on the target, so one
            # attempt (success or failure) serves the whole ladder
            if "cert" not in islands_outcome and "error" not in islands_outcome:
                try:
                    islands_outcome["cert"] = certify_via_islands(req, probes)
                except HfboundError as ie:
                    islands_outcome["error"] = f"{type(ie).__name__}: {ie}"
            if "cert" in islands_outcome:
                cert = islands_outcome["cert"]
            else:
                errors["islands"] = islands_outcome["error"]
        if cert is None:
            result.failures.append({"target": m, "errors": errors})
        elif cert.bound < best_bound:
            errors["monotonicity"] = (
                f"fallback bound {cert.bound:g} regresses below the "
                f"ladder's current bound {best_bound:g}"
            )
            result.failures.append({"target": m, "errors": errors})
        else:
            best_bound = cert.bound
            result.append(cert)
    return result
