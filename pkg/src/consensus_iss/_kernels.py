"""Compiled inner loops for rollouts with quadratic costs.

Each kernel advances the state for up to ``n_steps`` steps, writing every
intermediate state and the perturbation applied at each step. Only the
linear algebra of the update maps lives here; bookkeeping stays in Python.
"""

import math

import numpy as np
from numba import njit

WANG_ELIA = 0
GRADIENT_TRACKING = 1

STATUS_OK = 0
STATUS_THRESHOLD = 1
STATUS_NONFINITE = 2


@njit(cache=True, nogil=True)
def quantize_scalar(v, res):
    # floor(v / res) can land one unit off when v is an exact multiple
    q = math.floor(v / res)
    if (q + 1.0) * res <= v:
        q += 1.0
    elif q * res > v:
        q -= 1.0
    return q * res


@njit(cache=True, nogil=True)
def run_chunk(alg, quantized, m1, m2, a, b, gamma, res, wx_in, wz_in, n_steps, threshold,
              xs, zs, wxs, wzs):
    """Advance from ``xs[0], zs[0]``; returns ``(steps_done, status)``.

    ``wx_in``/``wz_in`` with zero rows mean "no additive perturbation".
    """
    n = xs.shape[1]
    have_noise = wx_in.shape[0] > 0
    phi = np.empty(n)
    qz = np.empty(n)
    thr2 = threshold * threshold
    for t in range(n_steps):
        for i in range(n):
            phi[i] = 2.0 * a[i] * (xs[t, i] - b[i])
        if quantized:
            for i in range(n):
                qz[i] = quantize_scalar(zs[t, i], res)
        for i in range(n):
            wx = wx_in[t, i] if have_noise else 0.0
            if alg == WANG_ELIA:
                kx = 0.0
                kz = 0.0
                for j in range(n):
                    kx += m1[i, j] * xs[t, j]
                    kz += m1[i, j] * zs[t, j]
                xs[t + 1, i] = xs[t, i] - kx - kz - gamma * phi[i] + wx
                if quantized:
                    wz = qz[i] - zs[t, i]
                    zs[t + 1, i] = qz[i] + kx
                else:
                    wz = wz_in[t, i] if have_noise else 0.0
                    zs[t + 1, i] = zs[t, i] + kx + wz
            else:
                rx = 0.0
                cz = 0.0
                cphi = 0.0
                cq = 0.0
                for j in range(n):
                    rx += m1[i, j] * xs[t, j]
                    cz += m2[i, j] * zs[t, j]
                    cphi += m2[i, j] * phi[j]
                    if quantized:
                        cq += m2[i, j] * qz[j]
                xs[t + 1, i] = rx + zs[t, i] - gamma * phi[i] + wx
                if quantized:
                    wz = cq - cz
                    zs[t + 1, i] = cq - gamma * (cphi - phi[i])
                else:
                    wz = wz_in[t, i] if have_noise else 0.0
                    zs[t + 1, i] = cz - gamma * (cphi - phi[i]) + wz
            wxs[t, i] = wx
            wzs[t, i] = wz
        sq = 0.0
        for i in range(n):
            sq += xs[t + 1, i] * xs[t + 1, i] + zs[t + 1, i] * zs[t + 1, i]
        if not math.isfinite(sq):
            return t + 1, STATUS_NONFINITE
        if sq > thr2:
            return t + 1, STATUS_THRESHOLD
    return n_steps, STATUS_OK
