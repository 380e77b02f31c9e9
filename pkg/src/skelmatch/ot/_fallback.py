"""Pure-Python/numpy kernels; same algorithms and pivot rules as ``_kernels.pyx``."""

from collections import deque

import numpy as np

NAME = "python"

OK = 0
ITER_LIMIT = 1
BREAKDOWN = 2


def initial_basis(d, r, c, order):
    """Least-cost starting tree: P + Q - 1 basic cells, degenerate ones included."""
    P, Q = d.shape
    rem_r = r.astype(np.float64).copy()
    rem_c = c.astype(np.float64).copy()
    row_on = np.ones(P, dtype=bool)
    col_on = np.ones(Q, dtype=bool)
    n_rows, n_cols = P, Q
    bi, bj, bf = [], [], []
    for flat in order:
        i, j = divmod(int(flat), Q)
        if not (row_on[i] and col_on[j]):
            continue
        if n_rows == 1 and n_cols == 1:
            x = rem_r[i]
            drop_row = drop_col = True
        elif n_rows == 1:
            x = min(rem_c[j], rem_r[i])
            drop_row, drop_col = False, True
        elif n_cols == 1:
            x = min(rem_r[i], rem_c[j])
            drop_row, drop_col = True, False
        elif rem_c[j] < rem_r[i]:
            x = rem_c[j]
            drop_row, drop_col = False, True
        else:
            x = rem_r[i]
            drop_row, drop_col = True, False
        bi.append(i)
        bj.append(j)
        bf.append(x)
        rem_r[i] -= x
        rem_c[j] -= x
        if drop_row:
            row_on[i] = False
            rem_r[i] = 0.0
            n_rows -= 1
        if drop_col:
            col_on[j] = False
            rem_c[j] = 0.0
            n_cols -= 1
        if n_rows == 0 or n_cols == 0:
            break
    return bi, bj, bf


def network_simplex(d, r, c, order, max_iter, tol):
    """Solve the balanced transportation problem on cost matrix ``d``.

    Returns ``(bi, bj, bf, iterations, status)``: the basic cells and their
    flows at termination.
    """
    P, Q = d.shape
    n = P + Q
    bi, bj, bf = initial_basis(d, r, c, order)
    if len(bi) != n - 1:
        return bi, bj, bf, 0, BREAKDOWN
    u = np.zeros(P)
    v = np.zeros(Q)
    parent = [0] * n
    pedge = [0] * n
    depth = [0] * n
    stall = 0
    it = 0
    while True:
        adj = [[] for _ in range(n)]
        for k in range(n - 1):
            adj[bi[k]].append(k)
            adj[P + bj[k]].append(k)
        seen = [False] * n
        seen[0] = True
        parent[0] = -1
        depth[0] = 0
        u[0] = 0.0
        queue = deque([0])
        reached = 1
        while queue:
            a = queue.popleft()
            for k in adj[a]:
                i, j = bi[k], bj[k]
                if a < P:
                    b = P + j
                    if seen[b]:
                        continue
                    v[j] = d[i, j] - u[i]
                else:
                    b = i
                    if seen[b]:
                        continue
                    u[i] = d[i, j] - v[j]
                seen[b] = True
                parent[b] = a
                pedge[b] = k
                depth[b] = depth[a] + 1
                reached += 1
                queue.append(b)
        if reached != n:
            return bi, bj, bf, it, BREAKDOWN

        red = d - u[:, None] - v[None, :]
        if stall > n:
            neg = np.flatnonzero(red.ravel() < -tol)
            if neg.size == 0:
                return bi, bj, bf, it, OK
            flat = int(neg[0])
        else:
            flat = int(np.argmin(red))
            if red.flat[flat] >= -tol:
                return bi, bj, bf, it, OK
        if it >= max_iter:
            return bi, bj, bf, it, ITER_LIMIT
        it += 1
        ei, ej = divmod(flat, Q)

        a, b = ei, P + ej
        path_a, path_b = [], []
        while a != b:
            if depth[a] >= depth[b]:
                path_a.append(pedge[a])
                a = parent[a]
            else:
                path_b.append(pedge[b])
                b = parent[b]
        cycle = path_b + path_a[::-1]

        theta = np.inf
        leave = -1
        for pos in range(0, len(cycle), 2):
            k = cycle[pos]
            f = bf[k]
            if f < theta or (f == theta and bi[k] * Q + bj[k] < bi[leave] * Q + bj[leave]):
                theta = f
                leave = k
        for pos, k in enumerate(cycle):
            if pos % 2 == 0:
                bf[k] -= theta
            else:
                bf[k] += theta
        bi[leave], bj[leave], bf[leave] = ei, ej, theta
        stall = stall + 1 if theta == 0.0 else 0


def sinkhorn(d, r, c, eps, tol, max_iter, tau=1e50, check_every=10):
    """Entropic OT by Sinkhorn scaling with log-domain absorption.

    The Gibbs kernel is kept relative to dual potentials ``alpha, beta``;
    whenever a scaling vector leaves ``[1/tau, tau]`` it is folded into the
    potentials and the kernel is rebuilt, so large/small scalings never
    overflow. Returns ``(plan, iterations, column_error, status)``.
    """
    alpha = d.min(axis=1)
    beta = (d - alpha[:, None]).min(axis=0)

    def kernel():
        return np.exp((alpha[:, None] + beta[None, :] - d) / eps)

    K = kernel()
    u = np.ones(d.shape[0])
    v = np.ones(d.shape[1])
    err = np.inf
    it = 0
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        while True:
            acc = K.T @ u
            if it > 0 and (it % check_every == 0 or it == max_iter):
                err = np.abs(v * acc - c).max()
                if err < tol:
                    status = OK
                    break
            if it >= max_iter:
                status = ITER_LIMIT
                break
            it += 1
            v = c / acc
            u = r / (K @ v)
            if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
                return None, it, err, BREAKDOWN
            if u.max() > tau or v.max() > tau or u.min() < 1.0 / tau or v.min() < 1.0 / tau:
                alpha = alpha + eps * np.log(u)
                beta = beta + eps * np.log(v)
                u = np.ones_like(u)
                v = np.ones_like(v)
                K = kernel()
    return u[:, None] * K * v[None, :], it, err, status


def round_plan(F, r, c):
    """In-place projection of ``F`` onto the transport polytope of ``(r, c)``.

    Rows are scaled down to at most ``r``, then columns to at most ``c``,
    and the leftover mass is redistributed as a rank-one correction.
    """
    rs = F.sum(axis=1)
    F *= np.minimum(np.divide(r, rs, out=np.ones_like(r), where=rs > r), 1.0)[:, None]
    cs = F.sum(axis=0)
    F *= np.where(cs > c, np.divide(c, cs, out=np.ones_like(c), where=cs > 0), 1.0)[None, :]
    err_r = np.maximum(r - F.sum(axis=1), 0.0)
    err_c = np.maximum(c - F.sum(axis=0), 0.0)
    total = err_r.sum()
    if total > 0:
        F += np.outer(err_r / total, err_c)
    return F
