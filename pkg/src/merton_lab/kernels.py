"""Hot numeric loops, each in two flavours.

* ``*_jit``: explicit loops compiled with ``numba.njit`` (default backend).
* ``*_np``: vectorised numpy over paths, looping only over time steps.

The backend is chosen once at import from ``MERTON_LAB_DISABLE_NUMBA``
(any of ``1/true/yes`` forces numpy) and can be switched at runtime with
:func:`set_backend`. Both flavours consume the same normal draws, so results
agree to rounding (different ``exp`` implementations and summation order).
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_DISABLED = os.environ.get("MERTON_LAB_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}
_backend = "numpy" if (_DISABLED or numba is None) else "numba"

WEALTH_FLOOR = 1e-300


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and numba is None:
        raise RuntimeError("numba is not installed")
    _backend = name


def _njit(fn):
    if numba is None:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


# ---------------------------------------------------------------------------
# path simulation: wealth X, deflator Y, trapezoid of Y * kappa * X
# ---------------------------------------------------------------------------

def _paths_loop(x0, kappa, a, s, ya, ys, dt, z, euler, floor):
    m, n = z.shape
    sq = np.sqrt(dt)
    X = np.empty((m, n + 1))
    Y = np.empty((m, n + 1))
    integral = np.zeros(m)
    clips = np.zeros(m, dtype=np.int64)
    logx0 = np.log(x0)
    for i in range(m):
        lx = logx0
        ly = 0.0
        xk = x0
        X[i, 0] = x0
        Y[i, 0] = 1.0
        prev = kappa * x0
        acc = 0.0
        for k in range(n):
            zk = z[i, k]
            if euler:
                xk = xk + a * xk * dt + s * xk * sq * zk
                if xk < floor:
                    xk = floor
                    clips[i] += 1
            else:
                lx += a * dt + s * sq * zk
                xk = np.exp(lx)
            ly += ya * dt + ys * sq * zk
            yk = np.exp(ly)
            X[i, k + 1] = xk
            Y[i, k + 1] = yk
            cur = yk * kappa * xk
            acc += 0.5 * dt * (prev + cur)
            prev = cur
        integral[i] = acc
    return X, Y, integral, clips


def _paths_np(x0, kappa, a, s, ya, ys, dt, z, euler, floor):
    m, n = z.shape
    sq = np.sqrt(dt)
    ly = np.zeros((m, n + 1))
    np.cumsum(ya * dt + ys * sq * z, axis=1, out=ly[:, 1:])
    Y = np.exp(ly)
    clips = np.zeros(m, dtype=np.int64)
    if euler:
        X = np.empty((m, n + 1))
        X[:, 0] = x0
        for k in range(n):
            nxt = X[:, k] + a * X[:, k] * dt + s * X[:, k] * sq * z[:, k]
            low = nxt < floor
            clips += low
            X[:, k + 1] = np.where(low, floor, nxt)
    else:
        # same accumulation order as the loop kernel: log x0 first, then increments
        lx = np.empty((m, n + 1))
        lx[:, 0] = np.log(x0)
        lx[:, 1:] = a * dt + s * sq * z
        np.cumsum(lx, axis=1, out=lx)
        X = np.exp(lx)
        X[:, 0] = x0
    f = Y * (kappa * X)
    integral = np.cumsum(0.5 * dt * (f[:, :-1] + f[:, 1:]), axis=1)[:, -1]
    return X, Y, integral, clips


_paths_jit = _njit(_paths_loop)


def simulate_paths(x0, kappa, a, s, ya, ys, dt, z, euler=False, floor=WEALTH_FLOOR):
    """Step wealth and deflator over a block of normal draws ``z`` (paths x steps).

    ``a`` is the log-drift (exact scheme) or linear drift (Euler) of wealth,
    ``s`` its volatility; ``ya, ys`` the log-drift and volatility of the deflator.
    """
    z = np.ascontiguousarray(z, dtype=np.float64)
    args = (float(x0), float(kappa), float(a), float(s), float(ya), float(ys), float(dt), z,
            bool(euler), float(floor))
    if _backend == "numba":
        return _paths_jit(*args)
    return _paths_np(*args)


# ---------------------------------------------------------------------------
# streaming discounted CRRA utility, no path storage
# ---------------------------------------------------------------------------

def _utility_loop(x0, kappa, a, s, rho, gamma, dt, z, euler, floor):
    m, n = z.shape
    sq = np.sqrt(dt)
    e = 1.0 - gamma
    out = np.empty(m)
    clips = np.zeros(m, dtype=np.int64)
    lk = np.log(kappa)
    lx0 = np.log(x0)
    for i in range(m):
        lx = lx0
        xk = x0
        prev = np.exp(e * (lk + lx)) / e
        acc = 0.0
        for k in range(n):
            zk = z[i, k]
            if euler:
                xk = xk + a * xk * dt + s * xk * sq * zk
                if xk < floor:
                    xk = floor
                    clips[i] += 1
                lx = np.log(xk)
            else:
                lx += a * dt + s * sq * zk
            cur = np.exp(e * (lk + lx) - rho * (k + 1) * dt) / e
            acc += 0.5 * dt * (prev + cur)
            prev = cur
        out[i] = acc
    return out, clips


def _utility_np(x0, kappa, a, s, rho, gamma, dt, z, euler, floor):
    m, n = z.shape
    sq = np.sqrt(dt)
    e = 1.0 - gamma
    lk = np.log(kappa)
    lx = np.full(m, np.log(x0))
    xk = np.full(m, x0)
    clips = np.zeros(m, dtype=np.int64)
    prev = np.exp(e * (lk + lx)) / e
    acc = np.zeros(m)
    for k in range(n):
        if euler:
            nxt = xk + a * xk * dt + s * xk * sq * z[:, k]
            low = nxt < floor
            clips += low
            xk = np.where(low, floor, nxt)
            lx = np.log(xk)
        else:
            lx = lx + (a * dt + s * sq * z[:, k])
        cur = np.exp(e * (lk + lx) - rho * (k + 1) * dt) / e
        acc += 0.5 * dt * (prev + cur)
        prev = cur
    return acc, clips


_utility_jit = _njit(_utility_loop)


def utility_integral(x0, kappa, a, s, rho, gamma, dt, z, euler=False, floor=WEALTH_FLOOR):
    """Per-path trapezoid of ``e^(-rho t) (kappa X_t)^(1-gamma)/(1-gamma)`` over the grid."""
    z = np.ascontiguousarray(z, dtype=np.float64)
    args = (float(x0), float(kappa), float(a), float(s), float(rho), float(gamma), float(dt), z,
            bool(euler), float(floor))
    if _backend == "numba":
        return _utility_jit(*args)
    return _utility_np(*args)


# ---------------------------------------------------------------------------
# tridiagonal solve (Thomas algorithm)
# ---------------------------------------------------------------------------

def _thomas_loop(lower, diag, upper, rhs):
    n = diag.shape[0]
    cp = np.empty(n)
    dp = np.empty(n)
    cp[0] = upper[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        den = diag[i] - lower[i] * cp[i - 1]
        cp[i] = upper[i] / den
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / den
    out = np.empty(n)
    out[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        out[i] = dp[i] - cp[i] * out[i + 1]
    return out


def _thomas_np(lower, diag, upper, rhs):
    # banded LAPACK solve; lower[0] and upper[-1] are ignored like in the loop version
    from scipy.linalg import solve_banded

    n = diag.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    return solve_banded((1, 1), ab, rhs)


_thomas_jit = _njit(_thomas_loop)


def solve_tridiagonal(lower, diag, upper, rhs):
    """Solve ``lower[i] v[i-1] + diag[i] v[i] + upper[i] v[i+1] = rhs[i]``."""
    args = tuple(np.ascontiguousarray(v, dtype=np.float64) for v in (lower, diag, upper, rhs))
    if _backend == "numba":
        return _thomas_jit(*args)
    return _thomas_np(*args)
