"""Fixed-step RK4 kernels for the impulsive system.

Two backends share one calling convention:

* ``numba``: scalar loops compiled with ``@njit`` (default when numba imports).
* ``numpy``: the same scalar path run as plain Python, plus a batch kernel
  vectorised over the leading axis with numpy.

Set ``ALLEE_RELEASE_BACKEND=numpy`` to force the fallback.  The choice is read
once at import time; ``kernels_for(name)`` returns either set explicitly, which
is what the benchmark and the backend-equivalence tests use.

Parameter vector layout (see ``ModelParams.as_array``):
    [psi1, psi2, delta1, delta2, K0, K1, K2, r1, r2]

Impulse indexing: grid node ``i`` sits at ``(i // m) * tau + (i % m) * dt``
with ``m`` steps per period.  Node ``i = k*m`` fires ``amounts[k - first_k]``
when that index is in range.
"""

from __future__ import annotations

import math
import os
from types import SimpleNamespace

import numpy as np

BACKEND_ENV = "ALLEE_RELEASE_BACKEND"

# RK4 is stable on the negative real axis up to |h*lambda| ~ 2.78; substeps keep
# h * ||J||_inf at or below this, which also keeps the local error small.
STIFF_LIMIT = 0.5
MAX_SUBSTEPS = 100_000

TAG_INTERIOR = 0
TAG_PRE = 1
TAG_POST = 2


def _identity(fn):
    return fn


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _requested_backend() -> str:
    flag = os.environ.get(BACKEND_ENV, "numba").strip().lower()
    if flag in ("numpy", "python", "off", "0", "false"):
        return "numpy"
    return "numba" if _numba_available() else "numpy"


def _build_scalar(jit):
    """Compile (or not) the scalar kernels with the given decorator."""

    @jit
    def rhs(p, a, b):
        total = a + b
        da = a * (p[0] - p[7] / p[5] * total) * (a / p[4] - 1.0) - p[2] * a
        db = b * (p[1] - p[8] / p[6] * total) - p[3] * b
        return da, db

    @jit
    def jac_bound(p, a, b):
        c = p[0] - p[7] / p[5] * (a + b)
        al = a / p[4] - 1.0
        j11 = c * al - p[7] / p[5] * a * al + c * a / p[4] - p[2]
        j12 = -p[7] / p[5] * a * al
        j21 = -p[8] / p[6] * b
        j22 = p[1] - p[8] / p[6] * (a + 2.0 * b) - p[3]
        return max(abs(j11) + abs(j12), abs(j21) + abs(j22))

    @jit
    def rk4(p, a, b, h):
        k1a, k1b = rhs(p, a, b)
        k2a, k2b = rhs(p, a + 0.5 * h * k1a, b + 0.5 * h * k1b)
        k3a, k3b = rhs(p, a + 0.5 * h * k2a, b + 0.5 * h * k2b)
        k4a, k4b = rhs(p, a + h * k3a, b + h * k3b)
        a = a + h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        b = b + h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
        return a, b

    @jit
    def step(p, a, b, dt):
        lip = jac_bound(p, a, b) * dt
        ns = 1
        if lip > STIFF_LIMIT and math.isfinite(lip):
            ns = min(int(math.ceil(lip / STIFF_LIMIT)), MAX_SUBSTEPS)
        h = dt / ns
        for _ in range(ns):
            a, b = rk4(p, a, b, h)
        clamped = False
        if a < 0.0:
            a = 0.0
            clamped = True
        if b < 0.0:
            b = 0.0
            clamped = True
        return a, b, clamped

    @jit
    def integrate_path(p, s1_0, s2_0, amounts, first_k, m, tau, dt, n_steps, tail, stride):
        n_amt = amounts.shape[0]
        n_imp = n_steps // m + 2
        cap = n_steps // stride + 3 + 2 * n_imp
        t_out = np.empty(cap)
        s1_out = np.empty(cap)
        s2_out = np.empty(cap)
        tag_out = np.empty(cap, dtype=np.int8)
        u_out = np.zeros(cap)
        idx = 0
        a = s1_0
        b = s2_0
        clamped = False
        for i in range(n_steps + 1):
            k = i // m
            r = i - k * m
            t = k * tau + r * dt
            j = k - first_k
            if r == 0 and j >= 0 and j < n_amt:
                t_out[idx] = t
                s1_out[idx] = a
                s2_out[idx] = b
                tag_out[idx] = TAG_PRE
                idx += 1
                b = b + amounts[j]
                t_out[idx] = t
                s1_out[idx] = a
                s2_out[idx] = b
                tag_out[idx] = TAG_POST
                u_out[idx] = amounts[j]
                idx += 1
            elif i % stride == 0 or (i == n_steps and tail == 0.0):
                t_out[idx] = t
                s1_out[idx] = a
                s2_out[idx] = b
                tag_out[idx] = TAG_INTERIOR
                idx += 1
            if i == n_steps:
                break
            a, b, c = step(p, a, b, dt)
            clamped = clamped or c
        if tail > 0.0:
            a, b, c = step(p, a, b, tail)
            clamped = clamped or c
            k = n_steps // m
            t_out[idx] = k * tau + (n_steps - k * m) * dt + tail
            s1_out[idx] = a
            s2_out[idx] = b
            tag_out[idx] = TAG_INTERIOR
            idx += 1
        return t_out[:idx], s1_out[:idx], s2_out[:idx], tag_out[:idx], u_out[:idx], clamped

    @jit
    def integrate_final_one(p, s1_0, s2_0, amounts, first_k, m, dt, n_steps, tail, i_start):
        n_amt = amounts.shape[0]
        a = s1_0
        b = s2_0
        clamped = False
        for i in range(i_start, n_steps + 1):
            k = i // m
            j = k - first_k
            if i - k * m == 0 and j >= 0 and j < n_amt:
                b = b + amounts[j]
            if i == n_steps:
                break
            a, b, c = step(p, a, b, dt)
            clamped = clamped or c
        if tail > 0.0:
            a, b, c = step(p, a, b, tail)
            clamped = clamped or c
        return a, b, clamped

    @jit
    def integrate_final(p, s1_0, s2_0, amounts, first_k, m, dt, n_steps, tail, i_start=0):
        n = amounts.shape[0]
        s1 = np.empty(n)
        s2 = np.empty(n)
        flags = np.zeros(n, dtype=np.bool_)
        for q in range(n):
            a, b, c = integrate_final_one(p, s1_0[q], s2_0[q], amounts[q], first_k, m, dt, n_steps, tail, i_start)
            s1[q] = a
            s2[q] = b
            flags[q] = c
        return s1, s2, flags

    return SimpleNamespace(
        rhs=rhs,
        jac_bound=jac_bound,
        rk4=rk4,
        step=step,
        integrate_path=integrate_path,
        integrate_final=integrate_final,
    )


# ---------------------------------------------------------------------------
# numpy batch fallback


def _rhs_vec(p, a, b):
    total = a + b
    da = a * (p[0] - p[7] / p[5] * total) * (a / p[4] - 1.0) - p[2] * a
    db = b * (p[1] - p[8] / p[6] * total) - p[3] * b
    return da, db


def _jac_bound_vec(p, a, b):
    c = p[0] - p[7] / p[5] * (a + b)
    al = a / p[4] - 1.0
    j11 = c * al - p[7] / p[5] * a * al + c * a / p[4] - p[2]
    j12 = -p[7] / p[5] * a * al
    j21 = -p[8] / p[6] * b
    j22 = p[1] - p[8] / p[6] * (a + 2.0 * b) - p[3]
    return np.maximum(np.abs(j11) + np.abs(j12), np.abs(j21) + np.abs(j22))


def _rk4_vec(p, a, b, h):
    k1a, k1b = _rhs_vec(p, a, b)
    k2a, k2b = _rhs_vec(p, a + 0.5 * h * k1a, b + 0.5 * h * k1b)
    k3a, k3b = _rhs_vec(p, a + 0.5 * h * k2a, b + 0.5 * h * k2b)
    k4a, k4b = _rhs_vec(p, a + h * k3a, b + h * k3b)
    a = a + h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
    b = b + h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
    return a, b


def _step_vec(p, a, b, dt, flags):
    lip = _jac_bound_vec(p, a, b) * dt
    stiff = (lip > STIFF_LIMIT) & np.isfinite(lip)
    if not stiff.any():
        a, b = _rk4_vec(p, a, b, dt)
    else:
        ns = np.ones(a.shape, dtype=np.int64)
        ns[stiff] = np.minimum(np.ceil(lip[stiff] / STIFF_LIMIT).astype(np.int64), MAX_SUBSTEPS)
        h = dt / ns
        for j in range(int(ns.max())):
            live = j < ns
            na, nb = _rk4_vec(p, a, b, h)
            a = np.where(live, na, a)
            b = np.where(live, nb, b)
    neg_a = a < 0.0
    neg_b = b < 0.0
    flags |= neg_a | neg_b
    return np.where(neg_a, 0.0, a), np.where(neg_b, 0.0, b)


def integrate_final_numpy(p, s1_0, s2_0, amounts, first_k, m, dt, n_steps, tail, i_start=0):
    """Batch final-state integration vectorised across rows of ``amounts``.

    Integration starts at grid node ``i_start`` from the given states, which
    must be the pre-release states there when that node is a release time.
    """
    a = np.array(s1_0, dtype=np.float64, copy=True)
    b = np.array(s2_0, dtype=np.float64, copy=True)
    flags = np.zeros(a.shape, dtype=np.bool_)
    n_amt = amounts.shape[1]
    for i in range(i_start, n_steps + 1):
        k, r = divmod(i, m)
        j = k - first_k
        if r == 0 and 0 <= j < n_amt:
            b = b + amounts[:, j]
        if i == n_steps:
            break
        a, b = _step_vec(p, a, b, dt, flags)
    if tail > 0.0:
        a, b = _step_vec(p, a, b, tail, flags)
    return a, b, flags


_CACHE: dict[str, SimpleNamespace] = {}


def kernels_for(backend: str) -> SimpleNamespace:
    """Kernel namespace for ``"numba"`` or ``"numpy"``."""
    if backend not in _CACHE:
        if backend == "numba":
            from numba import njit

            _CACHE[backend] = _build_scalar(njit(cache=True, nogil=True))
        elif backend == "numpy":
            ns = _build_scalar(_identity)
            ns.integrate_final = integrate_final_numpy
            _CACHE[backend] = ns
        else:
            raise ValueError(f"unknown backend {backend!r}")
        _CACHE[backend].name = backend
    return _CACHE[backend]


BACKEND = _requested_backend()
K = kernels_for(BACKEND)
