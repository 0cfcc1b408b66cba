# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled graph kernels. Mirrors ``_pykernels`` exactly."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t i64

NAME = "cython"


def bfs_distances(const i64[::1] indptr, const i64[::1] nbr, const i64[::1] rel,
                  i64 root, i64 max_depth, i64 ban_from=-1, i64 ban_rel=-1,
                  i64 ban_to=-1):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    dist_arr = np.full(n, -1, dtype=np.int64)
    cdef i64[::1] dist = dist_arr
    cdef i64[::1] queue = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t head = 0, tail = 0, i
    cdef i64 x, y, dx
    dist[root] = 0
    queue[tail] = root
    tail += 1
    while head < tail:
        x = queue[head]
        head += 1
        dx = dist[x]
        if dx >= max_depth:
            continue
        for i in range(indptr[x], indptr[x + 1]):
            y = nbr[i]
            if dist[y] != -1:
                continue
            if x == ban_from and y == ban_to and rel[i] == ban_rel:
                continue
            dist[y] = dx + 1
            queue[tail] = y
            tail += 1
    return dist_arr


def filter_edges(const i64[::1] indptr, const i64[::1] nbr, const i64[::1] rel,
                 const i64[::1] dist_s, const i64[::1] dist_t, i64 k,
                 i64 ban_from=-1, i64 ban_rel=-1, i64 ban_to=-1):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t u, i, cnt = 0
    cdef i64 du, dv, v, r
    # first pass sizes the output exactly
    for u in range(n):
        du = dist_s[u]
        if du < 0 or du >= k:
            continue
        for i in range(indptr[u], indptr[u + 1]):
            v = nbr[i]
            dv = dist_t[v]
            if dv < 0 or du + 1 + dv > k:
                continue
            if u == ban_from and v == ban_to and rel[i] == ban_rel:
                continue
            cnt += 1
    ou_arr = np.empty(cnt, dtype=np.int64)
    or_arr = np.empty(cnt, dtype=np.int64)
    ov_arr = np.empty(cnt, dtype=np.int64)
    cdef i64[::1] ou = ou_arr, orr = or_arr, ov = ov_arr
    cnt = 0
    for u in range(n):
        du = dist_s[u]
        if du < 0 or du >= k:
            continue
        for i in range(indptr[u], indptr[u + 1]):
            v = nbr[i]
            dv = dist_t[v]
            if dv < 0 or du + 1 + dv > k:
                continue
            r = rel[i]
            if u == ban_from and v == ban_to and r == ban_rel:
                continue
            ou[cnt] = u
            orr[cnt] = r
            ov[cnt] = v
            cnt += 1
    return ou_arr, or_arr, ov_arr


def bfs_tree(const i64[::1] indptr, const i64[::1] nbr, const i64[::1] rel, i64 root):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    depth_arr = np.full(n, -1, dtype=np.int64)
    parent_arr = np.full(n, -1, dtype=np.int64)
    prel_arr = np.full(n, -1, dtype=np.int64)
    cdef i64[::1] depth = depth_arr, parent = parent_arr, prel = prel_arr
    cdef i64[::1] queue = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t head = 0, tail = 0, i
    cdef i64 x, y, r
    depth[root] = 0
    queue[tail] = root
    tail += 1
    while head < tail:
        x = queue[head]
        head += 1
        for i in range(indptr[x], indptr[x + 1]):
            y = nbr[i]
            if depth[y] == -1:
                depth[y] = depth[x] + 1
                parent[y] = x
                prel[y] = rel[i]
                queue[tail] = y
                tail += 1
            elif depth[y] == depth[x] + 1:
                r = rel[i]
                if x < parent[y] or (x == parent[y] and r < prel[y]):
                    parent[y] = x
                    prel[y] = r
    return depth_arr, parent_arr, prel_arr


def condense(const i64[::1] eu, const i64[::1] er, const i64[::1] ev,
             const i64[::1] par_s, const i64[::1] prel_s, const i64[::1] depth_s,
             const i64[::1] par_t, const i64[::1] prel_t, const i64[::1] depth_t):
    cdef Py_ssize_t m = eu.shape[0]
    cdef Py_ssize_t i, j, pre_tot = 0, suf_tot = 0
    cdef i64 x, du, dv
    pre_off_arr = np.empty(m + 1, dtype=np.int64)
    suf_off_arr = np.empty(m + 1, dtype=np.int64)
    cdef i64[::1] pre_off = pre_off_arr, suf_off = suf_off_arr
    pre_off[0] = 0
    suf_off[0] = 0
    for i in range(m):
        pre_tot += depth_s[eu[i]]
        suf_tot += depth_t[ev[i]]
        pre_off[i + 1] = pre_tot
        suf_off[i + 1] = suf_tot
    pre_nodes_arr = np.empty(pre_tot + m, dtype=np.int64)
    pre_rels_arr = np.empty(pre_tot, dtype=np.int64)
    suf_nodes_arr = np.empty(suf_tot + m, dtype=np.int64)
    suf_rels_arr = np.empty(suf_tot, dtype=np.int64)
    cdef i64[::1] pre_nodes = pre_nodes_arr, pre_rels = pre_rels_arr
    cdef i64[::1] suf_nodes = suf_nodes_arr, suf_rels = suf_rels_arr
    cdef Py_ssize_t nb, rb
    for i in range(m):
        x = eu[i]
        du = depth_s[x]
        nb = pre_off[i] + i
        rb = pre_off[i]
        for j in range(du, 0, -1):
            pre_nodes[nb + j] = x
            pre_rels[rb + j - 1] = prel_s[x]
            x = par_s[x]
        pre_nodes[nb] = x

        x = ev[i]
        dv = depth_t[x]
        nb = suf_off[i] + i
        rb = suf_off[i]
        suf_nodes[nb] = x
        for j in range(dv):
            suf_rels[rb + j] = prel_t[x]
            x = par_t[x]
            suf_nodes[nb + j + 1] = x
    return (pre_off_arr, pre_nodes_arr, pre_rels_arr,
            suf_off_arr, suf_nodes_arr, suf_rels_arr)


cdef tuple _dfs(const i64[::1] indptr, const i64[::1] nbr, const i64[::1] rel,
                i64 s, i64 t, i64 k, const i64[::1] dist_t, i64 cap, bint collect):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef cnp.uint8_t[::1] on_path = np.zeros(n, dtype=np.uint8)
    cdef i64[::1] nodes = np.empty(k + 2, dtype=np.int64)
    cdef i64[::1] rels = np.empty(k + 1, dtype=np.int64)
    cdef i64[::1] cursor = np.empty(k + 2, dtype=np.int64)
    cdef Py_ssize_t depth = 0, i, j
    cdef i64 x, y, count = 0
    cdef bint truncated = False
    found = []
    nodes[0] = s
    cursor[0] = indptr[s]
    on_path[s] = 1
    depth = 1
    while depth > 0:
        x = nodes[depth - 1]
        i = cursor[depth - 1]
        if x == t or i >= indptr[x + 1]:
            on_path[x] = 0
            depth -= 1
            continue
        cursor[depth - 1] = i + 1
        y = nbr[i]
        if on_path[y] or dist_t[y] < 0 or (depth - 1) + 1 + dist_t[y] > k:
            continue
        if y == t:
            if count >= cap:
                truncated = True
                break
            count += 1
            if collect:
                found.append((
                    tuple([nodes[j] for j in range(depth)]) + (t,),
                    tuple([rels[j] for j in range(depth - 1)]) + (rel[i],),
                ))
            continue
        rels[depth - 1] = rel[i]
        nodes[depth] = y
        cursor[depth] = indptr[y]
        on_path[y] = 1
        depth += 1
    return found, count, truncated


def enumerate_paths(indptr, nbr, rel, i64 s, i64 t, i64 k, dist_t, i64 cap):
    found, _, truncated = _dfs(indptr, nbr, rel, s, t, k, dist_t, cap, True)
    return found, truncated


def count_paths(indptr, nbr, rel, i64 s, i64 t, i64 k, dist_t, i64 cap):
    _, count, truncated = _dfs(indptr, nbr, rel, s, t, k, dist_t, cap, False)
    return count, truncated
