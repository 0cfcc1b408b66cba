"""Pure-Python graph kernels.

Reference twin of ``_kernels.pyx``. Every function here has the same
signature and return layout as its compiled counterpart, and the test
suite runs both against the same fixtures.

Graphs are passed as CSR triples ``(indptr, nbr, rel)``: the neighbours of
node ``x`` are ``nbr[indptr[x]:indptr[x + 1]]`` with relation ids in the
parallel ``rel`` slice. Rows are sorted by ``(nbr, rel)``.
"""
from collections import deque

import numpy as np

NAME = "python"


def bfs_distances(indptr, nbr, rel, root, max_depth, ban_from=-1, ban_rel=-1, ban_to=-1):
    """Hop distances from ``root``, ``-1`` where unreached within ``max_depth``.

    The single directed edge ``(ban_from, ban_rel, ban_to)`` is not traversed.
    """
    indptr = indptr.tolist() if isinstance(indptr, np.ndarray) else indptr
    nbr = nbr.tolist() if isinstance(nbr, np.ndarray) else nbr
    rel = rel.tolist() if isinstance(rel, np.ndarray) else rel
    n = len(indptr) - 1
    dist = [-1] * n
    dist[root] = 0
    queue = deque([root])
    while queue:
        x = queue.popleft()
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
            queue.append(y)
    return np.asarray(dist, dtype=np.int64)


def filter_edges(indptr, nbr, rel, dist_s, dist_t, k, ban_from=-1, ban_rel=-1, ban_to=-1):
    """Edges ``(u, r, v)`` with ``dist_s[u] + 1 + dist_t[v] <= k``.

    Returned as three int64 arrays in CSR order (by ``u``, then ``(v, r)``).
    """
    indptr = indptr.tolist()
    nbr = nbr.tolist()
    rel = rel.tolist()
    ds = dist_s.tolist()
    dt = dist_t.tolist()
    out_u, out_r, out_v = [], [], []
    for u in range(len(indptr) - 1):
        du = ds[u]
        if du < 0 or du >= k:
            continue
        for i in range(indptr[u], indptr[u + 1]):
            v = nbr[i]
            dv = dt[v]
            if dv < 0 or du + 1 + dv > k:
                continue
            r = rel[i]
            if u == ban_from and v == ban_to and r == ban_rel:
                continue
            out_u.append(u)
            out_r.append(r)
            out_v.append(v)
    return (
        np.asarray(out_u, dtype=np.int64),
        np.asarray(out_r, dtype=np.int64),
        np.asarray(out_v, dtype=np.int64),
    )


def bfs_tree(indptr, nbr, rel, root):
    """Shortest-path tree from ``root``.

    Returns ``(depth, parent, parent_rel)``; unreached nodes have depth -1
    and parent -1. Among all tree-consistent parents the smallest
    ``(parent, rel)`` pair wins.
    """
    indptr = indptr.tolist()
    nbr = nbr.tolist()
    rel = rel.tolist()
    n = len(indptr) - 1
    depth = [-1] * n
    parent = [-1] * n
    prel = [-1] * n
    depth[root] = 0
    queue = deque([root])
    while queue:
        x = queue.popleft()
        for i in range(indptr[x], indptr[x + 1]):
            y = nbr[i]
            if depth[y] == -1:
                depth[y] = depth[x] + 1
                parent[y] = x
                prel[y] = rel[i]
                queue.append(y)
            elif depth[y] == depth[x] + 1:
                r = rel[i]
                if x < parent[y] or (x == parent[y] and r < prel[y]):
                    parent[y] = x
                    prel[y] = r
    return (
        np.asarray(depth, dtype=np.int64),
        np.asarray(parent, dtype=np.int64),
        np.asarray(prel, dtype=np.int64),
    )


def condense(eu, er, ev, par_s, prel_s, depth_s, par_t, prel_t, depth_t):
    """Assemble one condensed path per edge from the two trees.

    Prefix segments are node/relation runs ``s .. u`` read off the
    from-source tree; suffix segments ``v .. t`` off the to-target tree.
    Returns flattened ``(pre_off, pre_nodes, pre_rels, suf_off, suf_nodes,
    suf_rels)`` where the node run of edge ``i`` is
    ``pre_nodes[pre_off[i] + i : pre_off[i + 1] + i + 1]`` and its relation
    run is ``pre_rels[pre_off[i] : pre_off[i + 1]]`` (same for suffixes).
    """
    eu = eu.tolist()
    ev = ev.tolist()
    par_s = par_s.tolist()
    prel_s = prel_s.tolist()
    depth_s = depth_s.tolist()
    par_t = par_t.tolist()
    prel_t = prel_t.tolist()
    depth_t = depth_t.tolist()
    m = len(eu)
    pre_off = [0] * (m + 1)
    suf_off = [0] * (m + 1)
    pre_nodes, pre_rels, suf_nodes, suf_rels = [], [], [], []
    for i in range(m):
        u = eu[i]
        du = depth_s[u]
        run_n = [0] * (du + 1)
        run_r = [0] * du
        x = u
        for j in range(du, 0, -1):
            run_n[j] = x
            run_r[j - 1] = prel_s[x]
            x = par_s[x]
        run_n[0] = x
        pre_nodes.extend(run_n)
        pre_rels.extend(run_r)
        pre_off[i + 1] = pre_off[i] + du

        v = ev[i]
        x = v
        suf_nodes.append(x)
        for _ in range(depth_t[v]):
            suf_rels.append(prel_t[x])
            x = par_t[x]
            suf_nodes.append(x)
        suf_off[i + 1] = suf_off[i] + depth_t[v]
    return (
        np.asarray(pre_off, dtype=np.int64),
        np.asarray(pre_nodes, dtype=np.int64),
        np.asarray(pre_rels, dtype=np.int64),
        np.asarray(suf_off, dtype=np.int64),
        np.asarray(suf_nodes, dtype=np.int64),
        np.asarray(suf_rels, dtype=np.int64),
    )


def _dfs(indptr, nbr, rel, s, t, k, dist_t, cap, collect):
    indptr = indptr.tolist()
    nbr = nbr.tolist()
    rel = rel.tolist()
    dt = dist_t.tolist()
    on_path = [False] * (len(indptr) - 1)
    nodes = [s]
    rels = []
    found = []
    count = 0
    truncated = False
    # explicit stack of next-edge cursors keeps deep k safe from recursion limits
    cursor = [indptr[s]]
    on_path[s] = True
    while cursor:
        x = nodes[-1]
        i = cursor[-1]
        if x == t or i >= indptr[x + 1]:
            on_path[x] = False
            nodes.pop()
            cursor.pop()
            if rels:
                rels.pop()
            continue
        cursor[-1] = i + 1
        y = nbr[i]
        if on_path[y] or dt[y] < 0 or len(rels) + 1 + dt[y] > k:
            continue
        if y == t:
            if count >= cap:
                truncated = True
                break
            count += 1
            if collect:
                found.append((tuple(nodes) + (t,), tuple(rels) + (rel[i],)))
            continue
        nodes.append(y)
        rels.append(rel[i])
        on_path[y] = True
        cursor.append(indptr[y])
    return found, count, truncated


def enumerate_paths(indptr, nbr, rel, s, t, k, dist_t, cap):
    """Simple ``s -> t`` paths of length ``<= k`` in DFS (sorted adjacency) order.

    ``dist_t`` prunes branches that cannot reach ``t`` in the remaining
    budget. Returns ``(paths, truncated)`` where each path is a
    ``(nodes, rels)`` tuple pair; at most ``cap`` paths are produced and
    ``truncated`` is set when a further path exists.
    """
    found, _, truncated = _dfs(indptr, nbr, rel, s, t, k, dist_t, cap, True)
    return found, truncated


def count_paths(indptr, nbr, rel, s, t, k, dist_t, cap):
    """Same traversal as :func:`enumerate_paths`, counting only."""
    _, count, truncated = _dfs(indptr, nbr, rel, s, t, k, dist_t, cap, False)
    return count, truncated
