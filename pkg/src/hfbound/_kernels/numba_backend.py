"""numba-accelerated kernels.

Per-map scalar/jet callables are generated from the expression tree (same
source text the numpy backend evaluates with numpy ufuncs, here bound to
cmath and jitted) and passed into static kernels as first-class functions.
Arithmetic order matches the numpy backend so results agree.
"""

from __future__ import annotations

import cmath

import numpy as np
from numba import njit

from ..expr import generate_jet_source, generate_value_source

NAME = "numba"

_LAM_FLOOR = 1e-6
_MAX_ROUNDS = 60

_NJIT_CACHE: dict = {}


def _jit_from_source(source: str, name: str):
    key = (name, source)
    fn = _NJIT_CACHE.get(key)
    if fn is None:
        ns = {"exp": cmath.exp, "sin": cmath.sin, "cos": cmath.cos}
        exec(compile(source, f"<hfbound-njit:{name}>", "exec"), ns)
        fn = njit(nogil=True)(ns[name])
        _NJIT_CACHE[key] = fn
    return fn


def scalar_fn(fmap):
    return _jit_from_source(generate_value_source(fmap.ast), "_f")


def jet_fn(fmap):
    return _jit_from_source(generate_jet_source(fmap.ast), "_fjet")


@njit(nogil=True, cache=True)
def _finite(c):
    return c.real - c.real == 0.0 and c.imag - c.imag == 0.0


@njit(nogil=True)
def _newton_kernel(jet, z0, w, tol, max_rounds, out_z, out_ok, out_resid):
    n = z0.shape[0]
    for s in range(n):
        z = z0[s]
        ws = w[s]
        v, d = jet(z)
        if not (_finite(v) and _finite(d) and _finite(z)):
            out_z[s] = z
            out_ok[s] = 0
            out_resid[s] = np.inf
            continue
        resid = abs(v - ws)
        lam = 1.0
        ok = resid <= tol[s]
        dead = False
        rounds = 0
        while not ok and not dead and rounds < max_rounds:
            rounds += 1
            if d == 0.0:
                # numpy path yields a non-finite candidate here; same reject
                lam *= 0.5
                if lam < _LAM_FLOOR:
                    dead = True
                continue
            zn = z - lam * ((v - ws) / d)
            vn, dn = jet(zn)
            rn = abs(vn - ws)
            if _finite(zn) and _finite(vn) and _finite(dn) and rn < resid:
                z = zn
                v = vn
                d = dn
                resid = rn
                lam = 1.0
            else:
                lam *= 0.5
                if lam < _LAM_FLOOR:
                    dead = True
            if not dead and resid <= tol[s]:
                ok = True
        out_z[s] = z
        out_ok[s] = 1 if (ok and not dead) else 0
        out_resid[s] = resid


def newton_solve(fmap, z0, w, tol, max_rounds=_MAX_ROUNDS):
    """Same contract as numpy_backend.newton_solve."""
    z0 = np.asarray(z0, dtype=np.complex128)
    w = np.broadcast_to(np.asarray(w, dtype=np.complex128), z0.shape).copy()
    tol = np.broadcast_to(np.asarray(tol, dtype=np.float64), z0.shape).copy()
    out_z = np.empty_like(z0)
    out_ok = np.empty(z0.shape, dtype=np.uint8)
    out_resid = np.empty(z0.shape, dtype=np.float64)
    _newton_kernel(jet_fn(fmap), z0, w, tol, max_rounds, out_z, out_ok, out_resid)
    return out_z, out_ok.astype(bool), out_resid


@njit(nogil=True, cache=True)
def _greedy_kernel(orbits, eps, n_max, counts):
    n = orbits.shape[0]
    kept_idx = np.empty(n, dtype=np.int64)
    kept_mask = np.zeros(n, dtype=np.uint8)
    cnt = 0
    for k in range(1, n_max + 1):
        for s in range(n):
            if kept_mask[s]:
                continue
            separated = True
            for t in range(cnt):
                row = kept_idx[t]
                dmax = 0.0
                for j in range(k):
                    dj = abs(orbits[s, j] - orbits[row, j])
                    if dj > dmax:
                        dmax = dj
                if dmax <= eps:
                    separated = False
                    break
            if separated:
                kept_idx[cnt] = s
                cnt += 1
                kept_mask[s] = 1
        counts[k - 1] = cnt


def greedy_counts(orbits, eps, n_max):
    """Same contract as numpy_backend.greedy_counts."""
    orbits = np.ascontiguousarray(orbits, dtype=np.complex128)
    counts = np.zeros(n_max, dtype=np.int64)
    _greedy_kernel(orbits, float(eps), int(n_max), counts)
    return counts


@njit(nogil=True)
def _escape_kernel(value, z0, max_iter, r2, out):
    n = z0.shape[0]
    for s in range(n):
        z = z0[s]
        count = 0
        for it in range(max_iter):
            z = value(z)
            a2 = z.real * z.real + z.imag * z.imag
            if a2 > r2 or not (a2 - a2 == 0.0):
                count = it + 1
                break
        out[s] = count


def escape_counts(fmap, z0, max_iter, escape_radius):
    """Same contract as numpy_backend.escape_counts."""
    z0 = np.asarray(z0, dtype=np.complex128)
    out = np.empty(z0.shape, dtype=np.uint32)
    _escape_kernel(
        scalar_fn(fmap), z0, int(max_iter), float(escape_radius) ** 2, out
    )
    return out
