"""Contracting inverse-branch systems and finite-depth shift conjugacy.

A branch system packages n >= 2 inverse branches of an expanding map g,
each contracting the closed half-disk around a base point into its own
island.  Symbol words then address attractor points by composing
branches, and the conjugacy checker replays the shift relation
g(T_first(x)) = x over every word up to a depth bound.

Distortion bookkeeping uses the sharp univalent-map constant at half
radius, 81, which forces islands into the tiny concentric disk of
radius delta/648 before the geometric machinery applies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    ContractionViolationError,
    DisjointnessViolationError,
    GeometryError,
)
from .expr import EntireMap
from .geometry import Disk
from .islands import IslandWitness

__all__ = [
    "koebe_constant",
    "DISTORTION_BOUND",
    "InverseBranch",
    "BranchSystem",
    "ConjugacyReport",
    "branch_from_affine",
    "branch_from_island",
    "compose_branch",
    "build_branch_system",
    "address_point",
    "verify_conjugacy",
]

_VERIFY_POINTS = 200
_VERIFY_SEED = 2026
_WORD_BUDGET = 10**6


def koebe_constant(r: float) -> float:
    """Sharp derivative-distortion ratio for univalent maps on |z| <= r.

    Over all maps univalent on the unit disk, sup |f'(z)| / |f'(w)| for
    |z|, |w| <= r equals ((1+r)/(1-r))^4, attained by rotations of
    z/(1-z)^2 at the points +-r.
    """
    r = float(r)
    if not 0.0 < r < 1.0:
        raise ValueError(f"radius fraction must lie in (0, 1), got {r}")
    return ((1.0 + r) / (1.0 - r)) ** 4


# half-radius restriction of the geometry, fixed once
DISTORTION_BOUND = koebe_constant(0.5)
GAMMA_FACTOR = 8.0 * DISTORTION_BOUND  # 648


def _apply_map(g, z):
    if hasattr(g, "eval"):
        if isinstance(z, np.ndarray):
            return np.asarray(g.eval(z))
        return g.eval(z)
    out = g(np.asarray(z, dtype=np.complex128))
    if isinstance(z, np.ndarray):
        return np.asarray(out, dtype=np.complex128)
    return complex(out)


@dataclass(frozen=True, eq=False)
class InverseBranch:
    """One contracting right inverse of the expanding map.

    value accepts a complex scalar or ndarray in the closed half-disk
    and returns points of the branch's island; derivative reports T'
    there.  region_center/region_radius bound the island closure (a
    hull disk, used for disjointness and containment checks).
    contraction_bound is measured during system assembly.
    """

    index: int
    region_center: complex
    region_radius: float
    value: Callable
    derivative: Callable
    contraction_bound: float = float("nan")

    def __call__(self, z):
        return self.value(z)


def branch_from_affine(
    index: int, alpha: complex, beta: complex, region_center: complex, region_radius: float
) -> InverseBranch:
    """Synthetic branch T(z) = alpha*z + beta with |alpha| < 1."""
    alpha = complex(alpha)
    beta = complex(beta)

    def value(z):
        return alpha * z + beta

    def derivative(z):
        if isinstance(z, np.ndarray):
            return np.full(z.shape, alpha, dtype=np.complex128)
        return alpha

    return InverseBranch(
        index=index,
        region_center=complex(region_center),
        region_radius=float(region_radius),
        value=value,
        derivative=derivative,
    )


# the branch solvers never demand residuals below the forward-error
# floor eps*(|f'||z| + |f|); one ulp of z already moves f by that much
_EVAL_NOISE = 4.0 * 2.220446049250313e-16


def _scalar_rescue(f: EntireMap, core: complex, target_center: complex, w: complex, tol: float):
    """Segment continuation from the island core for points where the
    straight Newton iteration did not settle."""
    z = core
    lo, hi = 0.0, 1.0
    h = 1.0
    while lo < 1.0:
        frac = min(lo + h, 1.0)
        wt = target_center + (w - target_center) * frac
        zn = z
        ok = False
        for _ in range(60):
            v, d = f.jet(zn)
            r = v - wt
            if abs(r) <= max(tol, _EVAL_NOISE * (abs(d) * abs(zn) + abs(v))):
                ok = True
                break
            if d == 0:
                break
            zn = zn - r / d
        if ok:
            z, lo = zn, frac
            h = min(h * 2.0, 1.0)
        else:
            h *= 0.5
            if h < 2.0**-20:
                raise GeometryError(
                    f"branch continuation stalled between {target_center} and {w}"
                )
    return z


def branch_from_island(
    f: EntireMap,
    witness: IslandWitness,
    target: Disk,
    *,
    index: int = 0,
    tol: float | None = None,
    use_cache: bool = True,
) -> InverseBranch:
    """Newton-corrected inverse branch of f landing on a verified island.

    The initial guess linearizes around the island core; islands in the
    contraction regime are so small that two or three Newton rounds
    settle every point.  A per-branch cache of solved pairs seeds later
    scalar calls; it is capped and only ever changes the starting guess,
    never the accepted tolerance.
    """
    if tol is None:
        tol = 1e-11 * target.radius
    core = complex(witness.core_preimage)
    boundary = witness.boundary
    center = complex(boundary.mean())
    radius = float(np.abs(boundary - center).max())
    _, core_der = f.jet(core)
    if core_der == 0:
        raise GeometryError(f"island core {core} is a critical point")
    cache: list[tuple[complex, complex]] = [(complex(target.center), core)]

    def _solve_array(w: np.ndarray) -> np.ndarray:
        z = core + (w - target.center) / core_der
        settled = None
        for _ in range(24):
            v, d = f.jet(z)
            settled = np.abs(v - w) <= np.maximum(
                tol, _EVAL_NOISE * (np.abs(d) * np.abs(z) + np.abs(v))
            )
            if settled.all():
                return z
            step = np.where(d != 0, (v - w) / np.where(d != 0, d, 1.0), 0.0)
            z = z - step
        # stragglers walk the segment path one by one
        for idx in np.flatnonzero(~settled):
            z[idx] = _scalar_rescue(f, core, target.center, complex(w[idx]), tol)
        return z

    def value(w):
        if isinstance(w, np.ndarray):
            flat = w.astype(np.complex128).ravel()
            return _solve_array(flat).reshape(w.shape)
        w = complex(w)
        if use_cache and cache:
            near = min(cache, key=lambda p: abs(p[0] - w))
            z = near[1] + (w - near[0]) / f.jet(near[1]).deriv
        else:
            z = core + (w - target.center) / core_der
        for _ in range(24):
            v, d = f.jet(z)
            if abs(v - w) <= max(tol, _EVAL_NOISE * (abs(d) * abs(z) + abs(v))):
                if use_cache and len(cache) < 64:
                    cache.append((w, z))
                return z
            if d == 0:
                break
            z = z - (v - w) / d
        z = _scalar_rescue(f, core, target.center, w, tol)
        if use_cache and len(cache) < 64:
            cache.append((w, z))
        return z

    def derivative(w):
        z = value(w)
        if isinstance(z, np.ndarray):
            return 1.0 / f.jet(z).deriv
        return 1.0 / f.jet(z).deriv

    return InverseBranch(
        index=index,
        region_center=center,
        region_radius=radius,
        value=value,
        derivative=derivative,
    )


def compose_branch(index: int, outer: InverseBranch, inner: InverseBranch) -> InverseBranch:
    """Branch of a composed map: z -> outer(inner(z)).

    Used for second-iterate systems, where each leg inverts one
    application of the underlying map and stays well conditioned even
    though the composed forward map has a huge derivative.
    """

    def value(z):
        return outer.value(inner.value(z))

    def derivative(z):
        y = inner.value(z)
        return outer.derivative(y) * inner.derivative(z)

    return InverseBranch(
        index=index,
        region_center=outer.region_center,
        region_radius=outer.region_radius,
        value=value,
        derivative=derivative,
    )


@dataclass(frozen=True, eq=False)
class BranchSystem:
    """n >= 2 verified contracting branches over the half-disk at a.

    gamma is always delta/648; koebe_checked records whether the island
    containment in B(a, gamma) was actually enforced (it is for
    island-backed systems, not for synthetic branch input).
    """

    a: complex
    delta: float
    gamma: float
    distortion_bound: float
    branches: tuple[InverseBranch, ...]
    closure_gap: float
    koebe_checked: bool

    @property
    def n_symbols(self) -> int:
        return len(self.branches)

    def half_disk(self) -> Disk:
        return Disk(self.a, self.delta / 2.0)

    def to_json(self) -> dict:
        return {
            "a": [self.a.real, self.a.imag],
            "delta": self.delta,
            "gamma": self.gamma,
            "distortion_bound": self.distortion_bound,
            "closure_gap": self.closure_gap,
            "koebe_checked": self.koebe_checked,
            "branches": [
                {
                    "index": b.index,
                    "region_center": [b.region_center.real, b.region_center.imag],
                    "region_radius": b.region_radius,
                    "contraction_bound": b.contraction_bound,
                }
                for b in self.branches
            ],
        }


def _half_disk_samples(a: complex, delta: float) -> np.ndarray:
    rng = np.random.default_rng(_VERIFY_SEED)
    u = rng.random(_VERIFY_POINTS)
    t = rng.random(_VERIFY_POINTS)
    pts = a + (delta / 2.0) * np.sqrt(u) * np.exp(2j * np.pi * t)
    # make sure the boundary circle and the center are exercised too
    pts[0] = a
    pts[1] = a + delta / 2.0
    pts[2] = a - delta / 2.0
    return pts


def build_branch_system(
    g,
    a: complex,
    delta: float,
    islands: Sequence,
    *,
    tol: float | None = None,
) -> BranchSystem:
    """Assemble and verify a branch system.

    islands may be IslandWitness records (branches are then built by
    Newton continuation against g, and containment in B(a, delta/648)
    is enforced) or prebuilt InverseBranch objects (synthetic or
    composed; geometric containment is the caller's business then).
    Every branch is checked on 200 fixed pseudo-random points of the
    half-disk: g(T(z)) must return z and |T'| must stay below 1/2.
    """
    a = complex(a)
    delta = float(delta)
    if delta <= 0:
        raise GeometryError(f"delta must be positive, got {delta}")
    if len(islands) < 2:
        raise GeometryError(
            f"a branch system needs at least 2 branches, got {len(islands)}"
        )
    gamma = delta / GAMMA_FACTOR
    if tol is None:
        tol = 1e-9 * delta

    if all(isinstance(it, IslandWitness) for it in islands):
        if not isinstance(g, EntireMap):
            raise TypeError("island-backed construction needs the map itself")
        target = Disk(a, delta)
        ordered = sorted(
            islands, key=lambda w: (w.core_preimage.real, w.core_preimage.imag)
        )
        branches = [
            branch_from_island(g, w, target, index=j) for j, w in enumerate(ordered)
        ]
        koebe_checked = True
        for b in branches:
            reach = abs(b.region_center - a) + b.region_radius
            if reach > gamma:
                raise GeometryError(
                    f"island {b.index} reaches {reach:.3e} from the base point, "
                    f"outside the containment disk of radius {gamma:.3e}"
                )
    elif all(isinstance(it, InverseBranch) for it in islands):
        branches = [replace(b, index=j) for j, b in enumerate(islands)]
        koebe_checked = False
    else:
        raise TypeError("islands must be all witnesses or all branches")

    # island closures must be pairwise separated (hull-disk test)
    closure_gap = math.inf
    for i in range(len(branches)):
        for j in range(i + 1, len(branches)):
            bi, bj = branches[i], branches[j]
            gap = (
                abs(bi.region_center - bj.region_center)
                - bi.region_radius
                - bj.region_radius
            )
            if gap <= 0:
                raise DisjointnessViolationError(
                    f"island closures {i} and {j} are not separated (gap {gap:.3e})"
                )
            closure_gap = min(closure_gap, gap)

    pts = _half_disk_samples(a, delta)
    verified = []
    for b in branches:
        img = np.asarray(b.value(pts))
        back = _apply_map(g, img)
        resid = np.abs(back - pts)
        ders = np.abs(np.asarray(b.derivative(pts)))
        # forward evaluation of g amplifies roundoff by |g'|; the floor
        # below keeps the check honest for steep maps without loosening
        # it for tame ones
        floor = 64.0 * np.finfo(float).eps / np.maximum(ders, 1e-300) * (
            1.0 + np.abs(img)
        )
        bad = resid > np.maximum(tol, floor)
        if bad.any():
            k = int(np.argmax(resid))
            raise ContractionViolationError(
                f"branch {b.index} fails inversion at {pts[k]}: "
                f"g(T(z)) off by {resid[k]:.3e}"
            )
        worst = float(ders.max())
        if worst > 0.5:
            k = int(np.argmax(ders))
            raise ContractionViolationError(
                f"branch {b.index} contraction {worst:.4f} exceeds 1/2 "
                f"at {pts[k]}"
            )
        verified.append(replace(b, contraction_bound=worst))

    return BranchSystem(
        a=a,
        delta=delta,
        gamma=gamma,
        distortion_bound=DISTORTION_BOUND,
        branches=tuple(verified),
        closure_gap=float(closure_gap),
        koebe_checked=koebe_checked,
    )


def address_point(bs: BranchSystem, word: Sequence[int], depth: int) -> complex:
    """Image of the base point under the first `depth` word branches.

    Composition is outside-in, so successive depths form a Cauchy
    sequence contracting at least geometrically with ratio 1/2: the
    returned value lies within delta * 2^-depth of the word's limit.
    """
    if depth < 0 or depth > len(word):
        raise ValueError(f"depth {depth} outside word length {len(word)}")
    n = bs.n_symbols
    z = bs.a
    for s in reversed(word[:depth]):
        s = int(s)
        if not 0 <= s < n:
            raise ValueError(f"symbol {s} outside range 0..{n - 1}")
        z = bs.branches[s].value(z)
    return complex(z)


@dataclass(frozen=True)
class ConjugacyReport:
    """Finite-depth certificate that branch addressing conjugates the
    full shift to the dynamics of g on the attractor sample."""

    depth: int
    n_symbols: int
    max_defect: float
    worst_word: tuple[int, ...]
    injectivity_gap: float
    threshold: float
    passed: bool

    def to_json(self) -> dict:
        return {
            "depth": self.depth,
            "n_symbols": self.n_symbols,
            "max_defect": self.max_defect,
            "worst_word": list(self.worst_word),
            "injectivity_gap": self.injectivity_gap,
            "threshold": self.threshold,
            "passed": self.passed,
        }


def _decode_word(idx: int, n: int, length: int) -> tuple[int, ...]:
    digits = []
    for _ in range(length):
        digits.append(idx % n)
        idx //= n
    return tuple(reversed(digits))


def verify_conjugacy(bs: BranchSystem, g, depth: int, tol: float) -> ConjugacyReport:
    """Replay g(address(word, depth+1)) = address(shifted word, depth)
    over all words of length depth+1.

    Addresses are built level by level (the depth-d table is the n-fold
    branch image of the depth-(d-1) table), so the whole enumeration
    costs about n^(depth+1) branch evaluations.  The injectivity gap is
    the least distance between depth-d address clusters of different
    first symbols; a positive gap witnesses injectivity at this
    resolution.
    """
    if depth < 1:
        raise ValueError(f"depth must be at least 1, got {depth}")
    n = bs.n_symbols
    if n**depth > _WORD_BUDGET:
        raise ValueError(
            f"word budget exceeded: {n}^{depth} > {_WORD_BUDGET}"
        )
    level = np.asarray([bs.a], dtype=np.complex128)
    for _ in range(depth):
        blocks = [np.asarray(bs.branches[s].value(level)) for s in range(n)]
        level = np.concatenate(blocks)
    deep = np.concatenate([np.asarray(bs.branches[s].value(level)) for s in range(n)])
    # deep[i] with i = s*n^depth + j holds address((s,)+word_j, depth+1),
    # and its shift is word_j, whose address is level[j]
    g_deep = _apply_map(g, deep)
    defects = np.abs(g_deep - np.tile(level, n))
    worst_idx = int(np.argmax(defects))
    max_defect = float(defects[worst_idx])
    worst_word = _decode_word(worst_idx, n, depth + 1)

    # distance between first-symbol clusters of the depth-level table
    block = n ** (depth - 1)
    groups = [level[s * block : (s + 1) * block] for s in range(n)]
    gap = math.inf
    for i in range(n):
        pts_i = np.column_stack([groups[i].real, groups[i].imag])
        tree = cKDTree(pts_i)
        for j in range(i + 1, n):
            pts_j = np.column_stack([groups[j].real, groups[j].imag])
            d, _ = tree.query(pts_j, k=1)
            gap = min(gap, float(np.min(d)))
    threshold = tol + bs.delta * 2.0**-depth
    passed = max_defect <= threshold and gap > 0.0
    return ConjugacyReport(
        depth=depth,
        n_symbols=n,
        max_defect=max_defect,
        worst_word=worst_word,
        injectivity_gap=float(gap),
        threshold=threshold,
        passed=passed,
    )
