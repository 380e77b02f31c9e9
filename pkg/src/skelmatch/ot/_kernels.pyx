# cython: language_level=3
"""Compiled OT kernels. Mirrors ``_fallback.py`` step for step."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY, isfinite
from libc.stdlib cimport malloc, free

cnp.import_array()

NAME = "compiled"

cdef enum:
    OK = 0
    ITER_LIMIT = 1
    BREAKDOWN = 2


cdef Py_ssize_t _initial_basis(const double[:, ::1] d, const double[::1] r, const double[::1] c,
                               const Py_ssize_t[::1] order, Py_ssize_t[::1] bi, Py_ssize_t[::1] bj,
                               double[::1] bf) noexcept nogil:
    cdef Py_ssize_t P = d.shape[0], Q = d.shape[1]
    cdef Py_ssize_t n_rows = P, n_cols = Q, nb = 0, t, i, j, flat
    cdef double x
    cdef bint drop_row, drop_col
    cdef double *rem_r = <double *> malloc(P * sizeof(double))
    cdef double *rem_c = <double *> malloc(Q * sizeof(double))
    cdef char *row_on = <char *> malloc(P)
    cdef char *col_on = <char *> malloc(Q)
    for i in range(P):
        rem_r[i] = r[i]
        row_on[i] = 1
    for j in range(Q):
        rem_c[j] = c[j]
        col_on[j] = 1
    for t in range(order.shape[0]):
        flat = order[t]
        i = flat // Q
        j = flat - i * Q
        if not (row_on[i] and col_on[j]):
            continue
        if n_rows == 1 and n_cols == 1:
            x = rem_r[i]
            drop_row = True
            drop_col = True
        elif n_rows == 1:
            x = rem_c[j] if rem_c[j] <= rem_r[i] else rem_r[i]
            drop_row = False
            drop_col = True
        elif n_cols == 1:
            x = rem_r[i] if rem_r[i] <= rem_c[j] else rem_c[j]
            drop_row = True
            drop_col = False
        elif rem_c[j] < rem_r[i]:
            x = rem_c[j]
            drop_row = False
            drop_col = True
        else:
            x = rem_r[i]
            drop_row = True
            drop_col = False
        bi[nb] = i
        bj[nb] = j
        bf[nb] = x
        nb += 1
        rem_r[i] -= x
        rem_c[j] -= x
        if drop_row:
            row_on[i] = 0
            rem_r[i] = 0.0
            n_rows -= 1
        if drop_col:
            col_on[j] = 0
            rem_c[j] = 0.0
            n_cols -= 1
        if n_rows == 0 or n_cols == 0:
            break
    free(rem_r)
    free(rem_c)
    free(row_on)
    free(col_on)
    return nb


def network_simplex(const double[:, ::1] d, const double[::1] r, const double[::1] c,
                    const Py_ssize_t[::1] order, Py_ssize_t max_iter, double tol):
    """Balanced transportation problem; returns ``(bi, bj, bf, iterations, status)``."""
    cdef Py_ssize_t P = d.shape[0], Q = d.shape[1]
    cdef Py_ssize_t n = P + Q
    bi_arr = np.zeros(max(n - 1, 1), dtype=np.intp)
    bj_arr = np.zeros(max(n - 1, 1), dtype=np.intp)
    bf_arr = np.zeros(max(n - 1, 1), dtype=np.float64)
    cdef Py_ssize_t[::1] bi = bi_arr
    cdef Py_ssize_t[::1] bj = bj_arr
    cdef double[::1] bf = bf_arr
    cdef Py_ssize_t nb, it = 0, stall = 0, status = OK
    cdef Py_ssize_t k, a, b, i, j, head, tail, reached, pos, na, nc, ei = 0, ej = 0, flat, leave
    cdef double best, red, theta, f

    with nogil:
        nb = _initial_basis(d, r, c, order, bi, bj, bf)
    if nb != n - 1:
        return bi_arr[:nb], bj_arr[:nb], bf_arr[:nb], 0, BREAKDOWN

    cdef double *u = <double *> malloc(P * sizeof(double))
    cdef double *v = <double *> malloc(Q * sizeof(double))
    cdef Py_ssize_t *parent = <Py_ssize_t *> malloc(n * sizeof(Py_ssize_t))
    cdef Py_ssize_t *pedge = <Py_ssize_t *> malloc(n * sizeof(Py_ssize_t))
    cdef Py_ssize_t *depth = <Py_ssize_t *> malloc(n * sizeof(Py_ssize_t))
    cdef Py_ssize_t *deg = <Py_ssize_t *> malloc((n + 1) * sizeof(Py_ssize_t))
    cdef Py_ssize_t *fill = <Py_ssize_t *> malloc(n * sizeof(Py_ssize_t))
    cdef Py_ssize_t *adj = <Py_ssize_t *> malloc(2 * n * sizeof(Py_ssize_t))
    cdef Py_ssize_t *queue = <Py_ssize_t *> malloc(n * sizeof(Py_ssize_t))
    cdef char *seen = <char *> malloc(n)
    cdef Py_ssize_t *cycle = <Py_ssize_t *> malloc(2 * n * sizeof(Py_ssize_t))
    cdef Py_ssize_t *path_b = <Py_ssize_t *> malloc(n * sizeof(Py_ssize_t))

    with nogil:
        while True:
            # CSR adjacency of the basis tree, edges in ascending index per node
            for a in range(n + 1):
                deg[a] = 0
            for k in range(n - 1):
                deg[bi[k] + 1] += 1
                deg[P + bj[k] + 1] += 1
            for a in range(n):
                deg[a + 1] += deg[a]
                fill[a] = deg[a]
            for k in range(n - 1):
                adj[fill[bi[k]]] = k
                fill[bi[k]] += 1
                adj[fill[P + bj[k]]] = k
                fill[P + bj[k]] += 1

            for a in range(n):
                seen[a] = 0
            seen[0] = 1
            parent[0] = -1
            depth[0] = 0
            u[0] = 0.0
            queue[0] = 0
            head = 0
            tail = 1
            reached = 1
            while head < tail:
                a = queue[head]
                head += 1
                for pos in range(deg[a], deg[a + 1]):
                    k = adj[pos]
                    i = bi[k]
                    j = bj[k]
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
                    seen[b] = 1
                    parent[b] = a
                    pedge[b] = k
                    depth[b] = depth[a] + 1
                    reached += 1
                    queue[tail] = b
                    tail += 1
            if reached != n:
                status = BREAKDOWN
                break

            flat = -1
            if stall > n:
                for i in range(P):
                    for j in range(Q):
                        if d[i, j] - u[i] - v[j] < -tol:
                            flat = i * Q + j
                            break
                    if flat >= 0:
                        break
                if flat < 0:
                    status = OK
                    break
            else:
                best = INFINITY
                for i in range(P):
                    for j in range(Q):
                        red = d[i, j] - u[i] - v[j]
                        if red < best:
                            best = red
                            flat = i * Q + j
                if best >= -tol:
                    status = OK
                    break
            if it >= max_iter:
                status = ITER_LIMIT
                break
            it += 1
            ei = flat // Q
            ej = flat - ei * Q

            a = ei
            b = P + ej
            na = 0
            nc = 0
            while a != b:
                if depth[a] >= depth[b]:
                    cycle[n + na] = pedge[a]
                    na += 1
                    a = parent[a]
                else:
                    path_b[nc] = pedge[b]
                    nc += 1
                    b = parent[b]
            # cycle = path_b followed by reversed path_a
            for pos in range(nc):
                cycle[pos] = path_b[pos]
            for pos in range(na):
                cycle[nc + pos] = cycle[n + na - 1 - pos]
            nc = nc + na

            theta = INFINITY
            leave = -1
            pos = 0
            while pos < nc:
                k = cycle[pos]
                f = bf[k]
                if f < theta or (f == theta and bi[k] * Q + bj[k] < bi[leave] * Q + bj[leave]):
                    theta = f
                    leave = k
                pos += 2
            for pos in range(nc):
                k = cycle[pos]
                if pos % 2 == 0:
                    bf[k] -= theta
                else:
                    bf[k] += theta
            bi[leave] = ei
            bj[leave] = ej
            bf[leave] = theta
            if theta == 0.0:
                stall += 1
            else:
                stall = 0

    free(u)
    free(v)
    free(parent)
    free(pedge)
    free(depth)
    free(deg)
    free(fill)
    free(adj)
    free(queue)
    free(seen)
    free(cycle)
    free(path_b)
    return bi_arr, bj_arr, bf_arr, it, status


cdef Py_ssize_t _scale(const double[:, ::1] K, const double[::1] r, const double[::1] c,
                      double *u, double *v, double *acc, double tau, Py_ssize_t *it,
                      Py_ssize_t max_iter, Py_ssize_t check_every, double tol,
                      double *err) noexcept nogil:
    """Run scaling iterations until convergence, the iteration limit, or a
    scaling leaves ``[1/tau, tau]``. Returns OK, ITER_LIMIT, BREAKDOWN or -1
    (absorption needed)."""
    cdef Py_ssize_t P = K.shape[0], Q = K.shape[1], i, j
    cdef double s0, s1, s2, s3, e, ui, umax, umin, vmax, vmin
    cdef bint finite
    while True:
        for j in range(Q):
            acc[j] = 0.0
        for i in range(P):
            ui = u[i]
            for j in range(Q):
                acc[j] += K[i, j] * ui
        # acc = K^T u for the current state: test the column marginals first
        if it[0] > 0 and (it[0] % check_every == 0 or it[0] == max_iter):
            e = 0.0
            for j in range(Q):
                s0 = v[j] * acc[j] - c[j]
                if s0 < 0:
                    s0 = -s0
                if s0 > e:
                    e = s0
            err[0] = e
            if e < tol:
                return OK
        if it[0] >= max_iter:
            return ITER_LIMIT
        it[0] += 1
        for j in range(Q):
            v[j] = c[j] / acc[j]
        for i in range(P):
            s0 = 0.0
            s1 = 0.0
            s2 = 0.0
            s3 = 0.0
            j = 0
            while j + 3 < Q:
                s0 += K[i, j] * v[j]
                s1 += K[i, j + 1] * v[j + 1]
                s2 += K[i, j + 2] * v[j + 2]
                s3 += K[i, j + 3] * v[j + 3]
                j += 4
            while j < Q:
                s0 += K[i, j] * v[j]
                j += 1
            u[i] = r[i] / ((s0 + s1) + (s2 + s3))

        finite = True
        umax = -INFINITY
        umin = INFINITY
        vmax = -INFINITY
        vmin = INFINITY
        for i in range(P):
            if not isfinite(u[i]):
                finite = False
            if u[i] > umax:
                umax = u[i]
            if u[i] < umin:
                umin = u[i]
        for j in range(Q):
            if not isfinite(v[j]):
                finite = False
            if v[j] > vmax:
                vmax = v[j]
            if v[j] < vmin:
                vmin = v[j]
        if not finite:
            return BREAKDOWN
        if umax > tau or vmax > tau or umin < 1.0 / tau or vmin < 1.0 / tau:
            return -1


def sinkhorn(const double[:, ::1] d, const double[::1] r, const double[::1] c,
             double eps, double tol, Py_ssize_t max_iter, double tau=1e50,
             Py_ssize_t check_every=10):
    """Stabilized Sinkhorn scaling; returns ``(plan, iterations, column_error, status)``.

    The Gibbs kernel is rebuilt (vectorized) only on absorption; the scaling
    loop itself runs without the GIL.
    """
    cdef Py_ssize_t P = d.shape[0], Q = d.shape[1]
    cdef Py_ssize_t i, j, it = 0, status
    cdef double err = INFINITY
    d_arr = np.asarray(d)
    alpha = d_arr.min(axis=1)
    beta = (d_arr - alpha[:, None]).min(axis=0)
    u_arr = np.ones(P)
    v_arr = np.ones(Q)
    acc_arr = np.empty(Q)
    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef double[::1] acc = acc_arr
    cdef double[:, ::1] K
    while True:
        K_arr = d_arr - alpha[:, None]
        K_arr -= beta[None, :]
        K_arr *= -1.0 / eps
        np.exp(K_arr, out=K_arr)
        K = K_arr
        with nogil:
            status = _scale(K, r, c, &u[0], &v[0], &acc[0], tau, &it, max_iter, check_every, tol, &err)
        if status != -1:
            break
        alpha += eps * np.log(u_arr)
        beta += eps * np.log(v_arr)
        u_arr[:] = 1.0
        v_arr[:] = 1.0
    if status == BREAKDOWN:
        return None, it, err, status
    with nogil:
        for i in range(P):
            for j in range(Q):
                K[i, j] = u[i] * K[i, j] * v[j]
    return K_arr, it, err, status


def round_plan(double[:, ::1] F, const double[::1] r, const double[::1] c):
    """In-place projection of ``F`` onto the transport polytope of ``(r, c)``."""
    cdef Py_ssize_t P = F.shape[0], Q = F.shape[1], i, j
    cdef double s, total
    err_r_arr = np.empty(P)
    err_c_arr = np.zeros(Q)
    cdef double[::1] err_r = err_r_arr
    cdef double[::1] err_c = err_c_arr
    with nogil:
        for i in range(P):
            s = 0.0
            for j in range(Q):
                s += F[i, j]
            if s > r[i]:
                s = r[i] / s
                for j in range(Q):
                    F[i, j] *= s
        for i in range(P):
            for j in range(Q):
                err_c[j] += F[i, j]
        for j in range(Q):
            # err_c temporarily holds the column scale factor
            err_c[j] = c[j] / err_c[j] if err_c[j] > c[j] else 1.0
        for i in range(P):
            s = 0.0
            for j in range(Q):
                F[i, j] *= err_c[j]
                s += F[i, j]
            err_r[i] = r[i] - s
            if err_r[i] < 0:
                err_r[i] = 0.0
        for j in range(Q):
            err_c[j] = c[j]
        for i in range(P):
            for j in range(Q):
                err_c[j] -= F[i, j]
        total = 0.0
        for i in range(P):
            total += err_r[i]
        for j in range(Q):
            if err_c[j] < 0:
                err_c[j] = 0.0
        if total > 0:
            for i in range(P):
                s = err_r[i] / total
                for j in range(Q):
                    F[i, j] += s * err_c[j]
    return np.asarray(F)
