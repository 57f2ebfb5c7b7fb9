"""Preimage finding: damped Newton from a deterministic seed grid.

The solver never claims completeness: it reports the distinct converged
preimages it found inside the search disk.  Downstream certification
logic is arranged so that missing a preimage can only weaken a bound,
never wrongly strengthen one.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .expr import EntireMap
from .geometry import Disk

__all__ = ["newton_preimages", "ROOT_TOL_SCALE", "DEDUP_SCALE"]

# residual tolerance 1e-10*(1+|w|): absolute near the origin, relative for
# large targets.  dedup radius is relative to the search disk.
ROOT_TOL_SCALE = 1e-10
DEDUP_SCALE = 1e-7


def root_tolerance(w: complex) -> float:
    return ROOT_TOL_SCALE * (1.0 + abs(w))


def newton_preimages(
    f: EntireMap,
    w: complex,
    region: Disk,
    grid_density: int = 12,
    max_rounds: int = 60,
) -> np.ndarray:
    """Distinct solutions of f(p) = w inside `region`, lexicographically sorted.

    Seeds form a grid_density x grid_density grid over the bounding square of
    the disk.  Each seed runs damped Newton (step halved while the residual
    fails to decrease, seed abandoned after `max_rounds` evaluations).
    Converged points are kept when they lie in the closed disk, deduplicated
    at radius 1e-7*region.radius (cluster representative = smallest residual),
    and sorted by (re, im).
    """
    if grid_density < 4:
        raise ValueError(f"grid_density must be >= 4, got {grid_density}")
    c, r = region.center, region.radius
    axis = np.linspace(-r, r, grid_density)
    re, im = np.meshgrid(axis, axis)
    seeds = (c.real + re.ravel()) + 1j * (c.imag + im.ravel())

    tol = root_tolerance(w)
    z, ok, resid = _kernels.newton_solve(f, seeds, complex(w), tol, max_rounds)
    if not ok.any():
        return np.empty(0, dtype=np.complex128)
    z = z[ok]
    resid = resid[ok]

    inside = np.abs(z - c) <= r * (1.0 + 1e-12)
    z = z[inside]
    resid = resid[inside]
    if z.size == 0:
        return np.empty(0, dtype=np.complex128)

    # first pass: collapse near-duplicates at the dedup radius,
    # best-residual representative first, deterministic order
    order = np.lexsort((z.imag, z.real, resid))
    z = z[order]
    resid = resid[order]
    dedup_radius = DEDUP_SCALE * r
    reps: list[int] = []
    for k in range(z.size):
        p = z[k]
        if all(abs(p - z[j]) >= dedup_radius for j in reps):
            reps.append(k)
    zr = z[reps]
    rr = resid[reps]

    # second pass: a multiple root scatters converged seeds across a cloud of
    # diameter ~ tol^(1/multiplicity), far wider than the dedup radius.  Two
    # representatives are the same root when the segment between them stays in
    # the residual sublevel set; the midpoint test detects that.  A locality
    # guard keeps genuinely distinct roots (low ridge between basins) apart.
    m = zr.size
    if m > 1:
        parent = list(range(m))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        ii, jj = np.triu_indices(m, k=1)
        close = np.abs(zr[ii] - zr[jj]) <= 0.25 * r
        ii, jj = ii[close], jj[close]
        if ii.size:
            mids = (zr[ii] + zr[jj]) / 2.0
            vals = f.eval(np.asarray(mids))
            midres = np.abs(np.asarray(vals) - complex(w))
            thresh = 4.0 * np.maximum(tol, np.maximum(rr[ii], rr[jj]))
            for a, b in zip(ii[midres <= thresh], jj[midres <= thresh]):
                ra, rb = find(int(a)), find(int(b))
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
        chosen = sorted({find(a) for a in range(m)})
        zr = zr[chosen]

    kept = sorted((complex(p) for p in zr), key=lambda q: (q.real, q.imag))
    return np.array(kept, dtype=np.complex128)
