"""Numba kernels for tree growing and traversal.

Two growers share the flat-array tree layout (feature == -1 marks a
leaf): an exact Gini CART grower with optional per-split feature
subsampling (single trees, random forests), and a presorted level-wise
second-order grower for boosted regression trees. Both are exercised
against brute-force reference implementations in the test suite.
"""

import numpy as np
from numba import njit

GAIN_EPS = 1e-12


@njit(cache=True)
def _splitmix_next(state):
    """SplitMix64 step; ``state`` is a length-1 uint64 array."""
    state[0] = state[0] + np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def grow_gini_tree(
    X,
    y,
    max_depth,
    min_leaf,
    m_feats,
    rng_seed,
    feat,
    thr,
    left,
    right,
    leaf_p,
    node_count,
    importances,
):
    """Grow one CART tree in place; returns the number of nodes used.

    Splits maximize the Gini impurity decrease; only strictly positive
    decreases are accepted. ``m_feats`` < d draws a random feature subset
    per split (deterministic in ``rng_seed``). ``importances`` accumulates
    n_node * decrease per split feature.
    """
    n, d = X.shape
    idx = np.arange(n)
    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(rng_seed) ^ np.uint64(0xD1B54A32D192ED03)
    pool = np.arange(d)

    cap = feat.shape[0]
    stack_node = np.empty(cap, dtype=np.int64)
    stack_lo = np.empty(cap, dtype=np.int64)
    stack_hi = np.empty(cap, dtype=np.int64)
    stack_depth = np.empty(cap, dtype=np.int64)
    top = 0
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = n
    stack_depth[0] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        depth = stack_depth[top]
        n_node = hi - lo

        npos = 0.0
        for t in range(lo, hi):
            npos += y[idx[t]]
        p = npos / n_node
        leaf_p[node] = p
        node_count[node] = n_node
        feat[node] = -1

        if depth >= max_depth or n_node < 2 * min_leaf:
            continue
        if npos == 0.0 or npos == n_node:
            continue
        gini_parent = 2.0 * p * (1.0 - p)

        m = m_feats
        if m <= 0 or m > d:
            m = d
        if m < d:
            for t in range(m):
                r = int(_splitmix_next(state) % np.uint64(d - t))
                j = t + r
                tmp = pool[t]
                pool[t] = pool[j]
                pool[j] = tmp

        best_gain = 0.0
        best_f = -1
        best_t = 0.0
        col = np.empty(n_node, dtype=np.float64)
        ycol = np.empty(n_node, dtype=np.float64)
        for fi in range(m):
            j = pool[fi]
            for t in range(n_node):
                col[t] = X[idx[lo + t], j]
            order = np.argsort(col)
            for t in range(n_node):
                ycol[t] = y[idx[lo + order[t]]]
            pos = 0.0
            for t in range(n_node - 1):
                pos += ycol[t]
                v0 = col[order[t]]
                v1 = col[order[t + 1]]
                if v1 == v0:
                    continue
                nl = t + 1
                nr = n_node - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                pl = pos / nl
                pr = (npos - pos) / nr
                child = (nl * 2.0 * pl * (1.0 - pl) + nr * 2.0 * pr * (1.0 - pr)) / n_node
                gain = gini_parent - child
                if gain > best_gain + GAIN_EPS:
                    best_gain = gain
                    best_f = j
                    best_t = 0.5 * (v0 + v1)

        if best_f < 0:
            continue

        feat[node] = best_f
        thr[node] = best_t
        importances[best_f] += n_node * best_gain

        # Stable partition of the node's index segment.
        buf = np.empty(n_node, dtype=np.int64)
        nl = 0
        for t in range(lo, hi):
            if X[idx[t], best_f] <= best_t:
                buf[nl] = idx[t]
                nl += 1
        nr = nl
        for t in range(lo, hi):
            if X[idx[t], best_f] > best_t:
                buf[nr] = idx[t]
                nr += 1
        for t in range(n_node):
            idx[lo + t] = buf[t]

        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack_node[top] = n_nodes
        stack_lo[top] = lo
        stack_hi[top] = lo + nl
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = n_nodes + 1
        stack_lo[top] = lo + nl
        stack_hi[top] = hi
        stack_depth[top] = depth + 1
        top += 1
        n_nodes += 2

    return n_nodes


@njit(cache=True)
def grow_boost_tree(
    X,
    sorted_idx,
    g,
    h,
    max_depth,
    min_leaf,
    lam,
    gamma,
    feat,
    thr,
    left,
    right,
    value,
):
    """Grow one second-order regression tree level by level.

    Uses the presorted column order (``sorted_idx``) shared by every
    round of a boosting fit. Split gain is
    (G_L^2/(H_L+lam) + G_R^2/(H_R+lam) - G^2/(H+lam)) / 2 - gamma and
    leaf weight is -G/(H+lam). Returns the number of nodes used.
    """
    n, d = X.shape
    cap = feat.shape[0]
    node_of = np.zeros(n, dtype=np.int64)
    is_open = np.zeros(cap, dtype=np.bool_)
    is_open[0] = True

    G_tot = np.zeros(cap, dtype=np.float64)
    H_tot = np.zeros(cap, dtype=np.float64)
    cnt_tot = np.zeros(cap, dtype=np.int64)
    parent_score = np.zeros(cap, dtype=np.float64)
    best_gain = np.zeros(cap, dtype=np.float64)
    best_f = np.zeros(cap, dtype=np.int64)
    best_t = np.zeros(cap, dtype=np.float64)
    run_G = np.zeros(cap, dtype=np.float64)
    run_H = np.zeros(cap, dtype=np.float64)
    run_cnt = np.zeros(cap, dtype=np.int64)
    last_val = np.zeros(cap, dtype=np.float64)

    level = np.empty(cap, dtype=np.int64)
    level[0] = 0
    n_level = 1
    n_nodes = 1

    for depth in range(max_depth + 1):
        if n_level == 0:
            break
        for t in range(n_level):
            nd = level[t]
            G_tot[nd] = 0.0
            H_tot[nd] = 0.0
            cnt_tot[nd] = 0
            best_gain[nd] = 0.0
            best_f[nd] = -1
        for i in range(n):
            nd = node_of[i]
            if is_open[nd]:
                G_tot[nd] += g[i]
                H_tot[nd] += h[i]
                cnt_tot[nd] += 1

        if depth < max_depth:
            for t in range(n_level):
                nd = level[t]
                parent_score[nd] = G_tot[nd] * G_tot[nd] / (H_tot[nd] + lam)
            for j in range(d):
                for t in range(n_level):
                    nd = level[t]
                    run_G[nd] = 0.0
                    run_H[nd] = 0.0
                    run_cnt[nd] = 0
                for s in range(n):
                    i = sorted_idx[s, j]
                    nd = node_of[i]
                    if not is_open[nd]:
                        continue
                    v = X[i, j]
                    if run_cnt[nd] > 0 and v != last_val[nd]:
                        nl = run_cnt[nd]
                        nr = cnt_tot[nd] - nl
                        if nl >= min_leaf and nr >= min_leaf:
                            GL = run_G[nd]
                            HL = run_H[nd]
                            GR = G_tot[nd] - GL
                            HR = H_tot[nd] - HL
                            gain = (
                                0.5
                                * (
                                    GL * GL / (HL + lam)
                                    + GR * GR / (HR + lam)
                                    - parent_score[nd]
                                )
                                - gamma
                            )
                            if gain > best_gain[nd] + GAIN_EPS:
                                best_gain[nd] = gain
                                best_f[nd] = j
                                best_t[nd] = 0.5 * (last_val[nd] + v)
                    run_G[nd] += g[i]
                    run_H[nd] += h[i]
                    run_cnt[nd] += 1
                    last_val[nd] = v

        n_next = 0
        for t in range(n_level):
            nd = level[t]
            if depth >= max_depth or best_f[nd] < 0 or best_gain[nd] <= 0.0:
                feat[nd] = -1
                value[nd] = -G_tot[nd] / (H_tot[nd] + lam)
                is_open[nd] = False
            else:
                feat[nd] = best_f[nd]
                thr[nd] = best_t[nd]
                left[nd] = n_nodes
                right[nd] = n_nodes + 1
                is_open[nd] = False
                is_open[n_nodes] = True
                is_open[n_nodes + 1] = True
                level[n_level + n_next] = n_nodes
                level[n_level + n_next + 1] = n_nodes + 1
                n_next += 2
                n_nodes += 2
        for i in range(n):
            nd = node_of[i]
            if feat[nd] >= 0:
                if X[i, feat[nd]] <= thr[nd]:
                    node_of[i] = left[nd]
                else:
                    node_of[i] = right[nd]
        for t in range(n_next):
            level[t] = level[n_level + t]
        n_level = n_next

    return n_nodes


@njit(cache=True)
def tree_apply(X, feat, thr, left, right):
    """Leaf index reached by each row."""
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        nd = 0
        while feat[nd] >= 0:
            if X[i, feat[nd]] <= thr[nd]:
                nd = left[nd]
            else:
                nd = right[nd]
        out[i] = nd
    return out
