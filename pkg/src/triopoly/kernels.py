"""Hot loops: orbit iteration and tangent-vector products.

Every kernel is written once in plain scalar Python. When numba is importable
the kernels are compiled with ``@njit``; otherwise they run interpreted, and
batched orbit runs switch to a vectorised numpy path instead.

Set ``TRIOPOLY_NO_NUMBA=1`` in the environment to force the numpy path even
when numba is installed. The flag is read once, at import time.
"""

from __future__ import annotations

import math
import os

import numpy as np

ANB = 0
LNB = 1

# escape policies
POSITIVE = 0  # outputs must stay positive (a coordinate at zero may stay zero)
DEFINED = 1  # only states where the map itself is undefined escape


def _numba_disabled() -> bool:
    flag = os.environ.get("TRIOPOLY_NO_NUMBA", "").strip().lower()
    return flag not in ("", "0", "false", "no")


try:
    if _numba_disabled():
        raise ImportError("numba disabled by TRIOPOLY_NO_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


def maybe_njit(func):
    if HAVE_NUMBA:
        return njit(cache=True)(func)
    return func


@maybe_njit
def _root(v):
    # math.sqrt raises on negatives under CPython; keep numba and CPython consistent
    if v >= 0.0:
        return math.sqrt(v)
    return math.nan


@maybe_njit
def step_scalar(model, c1, c2, c3, k, l, x, y, z):
    q = x + y + z
    if q <= 0.0:
        return math.nan, math.nan, math.nan
    if model == ANB:
        nx = (1.0 - l) * x + l * (_root((y + z) / c1) - y - z)
    else:
        nx = (2.0 * x + y + z - c1 * q * q) / 2.0
    ny = _root((x + z) / c2) - x - z
    nz = z + k * z * ((x + y) / (q * q) - c3)
    return nx, ny, nz


@maybe_njit
def escape_coordinate(px, py, pz, nx, ny, nz, domain=POSITIVE):
    """Index of the first coordinate that left the domain, or -1.

    Under ``POSITIVE`` a coordinate escapes when it is non-finite, negative, or
    drops to zero from a positive value. A coordinate that was already zero may
    stay zero (the boundary equilibrium keeps z = 0 forever). Under ``DEFINED``
    only non-finite values escape; the step returns NaN wherever a square root
    argument is negative or total supply is not positive.
    """
    prev = (px, py, pz)
    nxt = (nx, ny, nz)
    for i in range(3):
        v = nxt[i]
        if not math.isfinite(v):
            return i
        if domain == POSITIVE and (v < 0.0 or (v == 0.0 and prev[i] > 0.0)):
            return i
    return -1


@maybe_njit
def run_orbit(model, c1, c2, c3, k, l, x0, y0, z0, n_transient, n_keep, out, domain=POSITIVE):
    """Iterate one orbit, writing the last ``n_keep`` states into ``out``.

    Returns ``(escape_step, coordinate, value)``; ``escape_step`` is -1 when
    the orbit never leaves the domain, otherwise the 1-based iteration that
    produced the offending state.
    """
    x, y, z = x0, y0, z0
    for t in range(n_transient + n_keep):
        nx, ny, nz = step_scalar(model, c1, c2, c3, k, l, x, y, z)
        code = escape_coordinate(x, y, z, nx, ny, nz, domain)
        if code >= 0:
            if code == 0:
                bad = nx
            elif code == 1:
                bad = ny
            else:
                bad = nz
            return t + 1, code, bad
        x, y, z = nx, ny, nz
        if t >= n_transient:
            j = t - n_transient
            out[j, 0] = x
            out[j, 1] = y
            out[j, 2] = z
    return -1, -1, 0.0


@maybe_njit
def _run_orbits_loop(model, params, x0, n_transient, n_keep, domain, samples, esc, coord, value):
    for i in range(params.shape[0]):
        s, c, v = run_orbit(
            model,
            params[i, 0], params[i, 1], params[i, 2], params[i, 3], params[i, 4],
            x0[i, 0], x0[i, 1], x0[i, 2],
            n_transient, n_keep, samples[i], domain,
        )
        esc[i] = s
        coord[i] = c
        value[i] = v


def _allocate(n, n_keep):
    samples = np.full((n, n_keep, 3), np.nan)
    esc = np.full(n, -1, dtype=np.int64)
    coord = np.full(n, -1, dtype=np.int64)
    value = np.zeros(n)
    return samples, esc, coord, value


def run_orbits_compiled(model, params, x0, n_transient, n_keep, domain=POSITIVE):
    """Batch of independent orbits, one scalar kernel call per row."""
    params = np.ascontiguousarray(params, dtype=np.float64)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    out = _allocate(params.shape[0], n_keep)
    _run_orbits_loop(int(model), params, x0, int(n_transient), int(n_keep), int(domain), *out)
    return out


def run_orbits_numpy(model, params, x0, n_transient, n_keep, domain=POSITIVE):
    """Vectorised counterpart of :func:`run_orbits_compiled`.

    All rows advance together on full arrays; a row stops updating at the step
    it escapes. The arithmetic follows the scalar kernel operation for
    operation (``np.sqrt`` of a negative is NaN, as in ``_root``), so both
    paths give bit-identical samples.
    """
    params = np.asarray(params, dtype=np.float64)
    c1, c2, c3, k, l = (np.ascontiguousarray(params[:, i]) for i in range(5))
    n = params.shape[0]
    samples, esc, coord, value = _allocate(n, n_keep)
    state = np.array(x0, dtype=np.float64, copy=True)
    nxt = np.empty_like(state)
    alive = np.ones(n, dtype=bool)
    keep = alive[:, None]
    with np.errstate(all="ignore"):
        for t in range(n_transient + n_keep):
            x, y, z = state[:, 0], state[:, 1], state[:, 2]
            q = x + y + z
            if model == ANB:
                nxt[:, 0] = (1.0 - l) * x + l * (np.sqrt((y + z) / c1) - y - z)
            else:
                nxt[:, 0] = (2.0 * x + y + z - c1 * q * q) / 2.0
            nxt[:, 1] = np.sqrt((x + z) / c2) - x - z
            nxt[:, 2] = z + k * z * ((x + y) / (q * q) - c3)
            nxt[q <= 0.0] = np.nan
            bad = ~np.isfinite(nxt)
            if domain == POSITIVE:
                bad |= (nxt < 0.0) | ((nxt == 0.0) & (state > 0.0))
            escaped = alive & bad.any(axis=1)
            if escaped.any():
                rows = np.flatnonzero(escaped)
                first = np.argmax(bad[rows], axis=1)
                esc[rows] = t + 1
                coord[rows] = first
                value[rows] = nxt[rows, first]
                alive &= ~escaped
                if not alive.any():
                    break
                keep = alive[:, None]
            np.copyto(state, nxt, where=keep)
            if t >= n_transient:
                np.copyto(samples[:, t - n_transient], state, where=keep)
    return samples, esc, coord, value


def run_orbits(model, params, x0, n_transient, n_keep, domain=POSITIVE):
    """Dispatch a batch of orbits to the active backend.

    ``params`` is ``(n, 5)`` with columns ``c1, c2, c3, k, l``; ``x0`` is
    ``(n, 3)``. Returns ``(samples, escape_step, coordinate, value)`` where
    ``samples`` has shape ``(n, n_keep, 3)`` and is NaN past an escape.
    """
    if HAVE_NUMBA:
        return run_orbits_compiled(model, params, x0, n_transient, n_keep, domain)
    return run_orbits_numpy(model, params, x0, n_transient, n_keep, domain)


@maybe_njit
def jacobian_scalar(model, c1, c2, c3, k, l, x, y, z, out):
    q = x + y + z
    q3 = q * q * q
    if model == ANB:
        g1 = 1.0 / (2.0 * c1) / _root((y + z) / c1) - 1.0
        out[0, 0] = 1.0 - l
        out[0, 1] = l * g1
        out[0, 2] = l * g1
    else:
        out[0, 0] = 1.0 - c1 * q
        out[0, 1] = 0.5 - c1 * q
        out[0, 2] = 0.5 - c1 * q
    g2 = 1.0 / (2.0 * c2) / _root((x + z) / c2) - 1.0
    out[1, 0] = g2
    out[1, 1] = 0.0
    out[1, 2] = g2
    r = k * z * (z - x - y) / q3
    out[2, 0] = r
    out[2, 1] = r
    out[2, 2] = 1.0 - k * c3 + k * (x + y) * (x + y - z) / q3


@maybe_njit
def lyapunov_kernel(model, c1, c2, c3, k, l, x0, y0, z0, n, n_transient, renorm_every, domain=POSITIVE):
    """Largest Lyapunov exponent by tangent-vector propagation.

    Returns ``(exponent, escape_step)``; ``escape_step`` is -1 on success.
    """
    x, y, z = x0, y0, z0
    for t in range(n_transient):
        nx, ny, nz = step_scalar(model, c1, c2, c3, k, l, x, y, z)
        if escape_coordinate(x, y, z, nx, ny, nz, domain) >= 0:
            return math.nan, t + 1
        x, y, z = nx, ny, nz
    jac = np.empty((3, 3))
    v0 = 1.0 / math.sqrt(3.0)
    v1 = v0
    v2 = v0
    log_sum = 0.0
    for t in range(n):
        jacobian_scalar(model, c1, c2, c3, k, l, x, y, z, jac)
        w0 = jac[0, 0] * v0 + jac[0, 1] * v1 + jac[0, 2] * v2
        w1 = jac[1, 0] * v0 + jac[1, 1] * v1 + jac[1, 2] * v2
        w2 = jac[2, 0] * v0 + jac[2, 1] * v1 + jac[2, 2] * v2
        v0, v1, v2 = w0, w1, w2
        if (t + 1) % renorm_every == 0 or t == n - 1:
            norm = math.sqrt(v0 * v0 + v1 * v1 + v2 * v2)
            if norm == 0.0:
                return -math.inf, -1
            log_sum += math.log(norm)
            v0 /= norm
            v1 /= norm
            v2 /= norm
        nx, ny, nz = step_scalar(model, c1, c2, c3, k, l, x, y, z)
        if escape_coordinate(x, y, z, nx, ny, nz, domain) >= 0:
            return math.nan, n_transient + t + 1
        x, y, z = nx, ny, nz
    return log_sum / n, -1
