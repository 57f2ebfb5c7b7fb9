"""Pure-numpy kernel implementations.

Each kernel mirrors the numba backend's per-seed control flow exactly
(one jet evaluation per round, residual-decrease acceptance, halving on
reject) so the two backends produce the same numbers.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"

_LAM_FLOOR = 1e-6
_MAX_ROUNDS = 60


def _as_full(a, shape):
    a = np.asarray(a, dtype=np.complex128)
    if a.shape != shape:
        a = np.broadcast_to(a, shape).copy()
    return a


def newton_solve(fmap, z0, w, tol, max_rounds=_MAX_ROUNDS):
    """Damped Newton toward f(z) = w, elementwise over seed/target arrays.

    Returns (z, ok, resid).  A round is one jet evaluation: the proposed step
    is accepted only if it strictly decreases the residual, otherwise the
    damping factor is halved; a seed dies when damping collapses or the
    round budget runs out.
    """
    z = np.array(z0, dtype=np.complex128, copy=True)
    w = np.broadcast_to(np.asarray(w, dtype=np.complex128), z.shape).copy()
    tol = np.broadcast_to(np.asarray(tol, dtype=np.float64), z.shape).copy()

    jet = fmap._compiled("array_jet")
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        fz, dz = jet(z)
    fz = _as_full(fz, z.shape)
    dz = _as_full(dz, z.shape)
    resid = np.abs(fz - w)
    dead = ~(np.isfinite(fz) & np.isfinite(dz) & np.isfinite(z))
    resid[dead] = np.inf
    ok = (resid <= tol) & ~dead
    lam = np.ones(z.shape, dtype=np.float64)

    for _ in range(max_rounds):
        active = ~(ok | dead)
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            step = (fz[idx] - w[idx]) / dz[idx]
            zn = z[idx] - lam[idx] * step
            fn, dn = jet(zn)
        fn = _as_full(fn, zn.shape)
        dn = _as_full(dn, zn.shape)
        rn = np.abs(fn - w[idx])
        good = np.isfinite(zn) & np.isfinite(fn) & np.isfinite(dn) & (rn < resid[idx])

        gi = idx[good]
        z[gi] = zn[good]
        fz[gi] = fn[good]
        dz[gi] = dn[good]
        resid[gi] = rn[good]
        lam[gi] = 1.0

        bi = idx[~good]
        lam[bi] *= 0.5
        dead[bi] |= lam[bi] < _LAM_FLOOR

        ok[idx] = (resid[idx] <= tol[idx]) & ~dead[idx]

    return z, ok & ~dead, resid


def greedy_counts(orbits, eps, n_max):
    """Greedy maximal separated-set sizes for horizons 1..n_max.

    orbits: complex (n_samples, >= n_max) array of forward orbits.
    The kept set for horizon k seeds horizon k+1 (a set separated at
    horizon k stays separated at k+1), making counts nondecreasing by
    construction.  Samples are scanned in index order.
    """
    n = orbits.shape[0]
    kept_idx = np.empty(n, dtype=np.int64)
    kept_mask = np.zeros(n, dtype=bool)
    cnt = 0
    buf = np.empty((n, n_max), dtype=np.complex128)
    counts = np.zeros(n_max, dtype=np.int64)
    for k in range(1, n_max + 1):
        window = orbits[:, :k]
        buf[:cnt, :k] = window[kept_idx[:cnt]]
        for s in range(n):
            if kept_mask[s]:
                continue
            if cnt:
                d = np.abs(buf[:cnt, :k] - window[s][None, :]).max(axis=1)
                if (d <= eps).any():
                    continue
            kept_idx[cnt] = s
            buf[cnt, :k] = window[s]
            cnt += 1
            kept_mask[s] = True
        counts[k - 1] = cnt
    return counts


def escape_counts(fmap, z0, max_iter, escape_radius):
    """Escape-time iteration counts over a flat array of start points.

    Escaped entries report the 1-based step at which |f^k(z)| first exceeded
    the escape radius; entries that survive all max_iter steps report 0.
    Non-finite intermediates count as escaped on that step.
    """
    value = fmap._compiled("array")
    z = np.array(z0, dtype=np.complex128, copy=True)
    out = np.zeros(z.shape, dtype=np.uint32)
    alive = np.ones(z.shape, dtype=bool)
    r2 = float(escape_radius) * float(escape_radius)
    for it in range(max_iter):
        idx = np.nonzero(alive)[0]
        if idx.size == 0:
            break
        with np.errstate(over="ignore", invalid="ignore"):
            zn = value(z[idx])
        zn = _as_full(zn, idx.shape)
        a2 = zn.real * zn.real + zn.imag * zn.imag
        gone = (a2 > r2) | ~np.isfinite(a2)
        out[idx[gone]] = it + 1
        alive[idx[gone]] = False
        z[idx] = zn
    return out
