"""Sequential minimal optimization over a precomputed kernel matrix.

Deterministic variant of Platt's SMO: the second-choice heuristic breaks
ties by index and scans from a position derived from the current example
instead of a random start. When the pair's curvature is non-positive
(duplicate rows), the dual objective is evaluated at both clip ends.
"""

import numpy as np
from numba import njit

ALPHA_EPS = 1e-12


@njit(cache=True)
def _take_step(i1, i2, K, y, alpha, err, b_arr, C, eps):
    if i1 == i2:
        return 0
    alph1 = alpha[i1]
    alph2 = alpha[i2]
    y1 = y[i1]
    y2 = y[i2]
    E1 = err[i1]
    E2 = err[i2]
    s = y1 * y2
    if s > 0:
        L = max(0.0, alph1 + alph2 - C)
        H = min(C, alph1 + alph2)
    else:
        L = max(0.0, alph2 - alph1)
        H = min(C, C + alph2 - alph1)
    if L >= H:
        return 0
    k11 = K[i1, i1]
    k12 = K[i1, i2]
    k22 = K[i2, i2]
    eta = k11 + k22 - 2.0 * k12
    if eta > 0.0:
        a2 = alph2 + y2 * (E1 - E2) / eta
        if a2 < L:
            a2 = L
        elif a2 > H:
            a2 = H
    else:
        # Flat or concave direction: compare the dual objective at the ends.
        b = b_arr[0]
        f1 = E1 + y1
        f2 = E2 + y2
        v1 = f1 - b - alph1 * y1 * k11 - alph2 * y2 * k12
        v2 = f2 - b - alph1 * y1 * k12 - alph2 * y2 * k22

        a1L = alph1 + s * (alph2 - L)
        WL = (
            a1L
            + L
            - 0.5 * k11 * a1L * a1L
            - 0.5 * k22 * L * L
            - s * k12 * a1L * L
            - y1 * a1L * v1
            - y2 * L * v2
        )
        a1H = alph1 + s * (alph2 - H)
        WH = (
            a1H
            + H
            - 0.5 * k11 * a1H * a1H
            - 0.5 * k22 * H * H
            - s * k12 * a1H * H
            - y1 * a1H * v1
            - y2 * H * v2
        )
        if WL > WH + eps:
            a2 = L
        elif WL < WH - eps:
            a2 = H
        else:
            a2 = alph2
    if abs(a2 - alph2) < eps * (a2 + alph2 + eps):
        return 0
    a1 = alph1 + s * (alph2 - a2)
    if a1 < 0.0:
        a2 += s * a1
        a1 = 0.0
    elif a1 > C:
        a2 += s * (a1 - C)
        a1 = C

    b_old = b_arr[0]
    d1 = y1 * (a1 - alph1)
    d2 = y2 * (a2 - alph2)
    b1 = b_old - E1 - d1 * k11 - d2 * k12
    b2 = b_old - E2 - d1 * k12 - d2 * k22
    if ALPHA_EPS < a1 < C - ALPHA_EPS:
        b_new = b1
    elif ALPHA_EPS < a2 < C - ALPHA_EPS:
        b_new = b2
    else:
        b_new = 0.5 * (b1 + b2)
    db = b_new - b_old

    n = K.shape[0]
    for j in range(n):
        err[j] += d1 * K[i1, j] + d2 * K[i2, j] + db
    alpha[i1] = a1
    alpha[i2] = a2
    b_arr[0] = b_new
    err[i1] = 0.0 if ALPHA_EPS < a1 < C - ALPHA_EPS else err[i1]
    err[i2] = 0.0 if ALPHA_EPS < a2 < C - ALPHA_EPS else err[i2]
    return 1


@njit(cache=True)
def _examine(i2, K, y, alpha, err, b_arr, C, tol, eps):
    y2 = y[i2]
    alph2 = alpha[i2]
    E2 = err[i2]
    r2 = E2 * y2
    if not ((r2 < -tol and alph2 < C) or (r2 > tol and alph2 > 0.0)):
        return 0
    n = K.shape[0]
    # Heuristic 1: largest |E1 - E2| among non-bound points.
    best = -1.0
    i1 = -1
    for j in range(n):
        if ALPHA_EPS < alpha[j] < C - ALPHA_EPS:
            gap = abs(err[j] - E2)
            if gap > best:
                best = gap
                i1 = j
    if i1 >= 0 and _take_step(i1, i2, K, y, alpha, err, b_arr, C, eps):
        return 1
    # Heuristic 2: all non-bound points, scanning from i2 + 1.
    for off in range(n):
        j = (i2 + 1 + off) % n
        if ALPHA_EPS < alpha[j] < C - ALPHA_EPS:
            if _take_step(j, i2, K, y, alpha, err, b_arr, C, eps):
                return 1
    # Heuristic 3: every point.
    for off in range(n):
        j = (i2 + 1 + off) % n
        if _take_step(j, i2, K, y, alpha, err, b_arr, C, eps):
            return 1
    return 0


@njit(cache=True)
def smo_solve(K, y, C, tol, eps, max_passes):
    """Optimize the dual; returns (alpha, b, converged, n_passes).

    ``y`` must be in {-1, +1}. A pass is one sweep of the outer loop;
    the solver stops cleanly when a full sweep over all examples changes
    nothing (KKT satisfied within ``tol``), or gives up after
    ``max_passes`` sweeps with the best iterate so far.
    """
    n = K.shape[0]
    alpha = np.zeros(n, dtype=np.float64)
    b_arr = np.zeros(1, dtype=np.float64)
    err = -y.astype(np.float64)  # decision is 0 everywhere at the start
    examine_all = True
    passes = 0
    converged = False
    while passes < max_passes:
        passes += 1
        num_changed = 0
        if examine_all:
            for i in range(n):
                num_changed += _examine(i, K, y, alpha, err, b_arr, C, tol, eps)
        else:
            for i in range(n):
                if ALPHA_EPS < alpha[i] < C - ALPHA_EPS:
                    num_changed += _examine(i, K, y, alpha, err, b_arr, C, tol, eps)
        if examine_all:
            if num_changed == 0:
                converged = True
                break
            examine_all = False
        elif num_changed == 0:
            examine_all = True
    return alpha, b_arr[0], converged, passes
