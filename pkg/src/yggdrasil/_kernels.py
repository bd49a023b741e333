"""Compiled inner loops for the cloud's near-match search.

``greedy_ops_array`` mirrors :func:`yggdrasil.metrics.greedy_ops` op for op;
the test suite checks the two against each other.
"""

import numpy as np
from numba import njit

SWAP = 0
CHANGE = 1


@njit(cache=True)
def lower_bounds(mat, nrows, f, cap, k):
    """Lower bound on the swap distance from ``f`` to each of the first ``nrows`` rows.

    A swap fixes at most two mismatches and never changes the symbol
    histogram; a change fixes one mismatch and one unit of histogram
    imbalance D. Hence ops >= ceil((h + D) / 2). Rows whose Hamming
    distance exceeds ``2 * cap`` are abandoned early and get ``cap + 1``.
    """
    n = f.shape[0]
    out = np.empty(nrows, dtype=np.int64)
    limit = 2 * cap
    use_hist = k <= 16
    size = (1 << k) if use_hist else 1
    cnt = np.zeros(size, dtype=np.int64)
    for r in range(nrows):
        h = 0
        for i in range(n):
            if mat[r, i] != f[i]:
                h += 1
                if h > limit:
                    break
        if h > limit:
            out[r] = cap + 1
            continue
        d = 0
        if use_hist and h > 0:
            for i in range(n):
                x = mat[r, i]
                y = f[i]
                if x != y:
                    cnt[y] += 1
                    cnt[x] -= 1
            for i in range(n):
                x = mat[r, i]
                y = f[i]
                if x != y:
                    if cnt[y] > 0:
                        d += cnt[y]
                    cnt[y] = 0
                    cnt[x] = 0
        out[r] = (h + d + 1) // 2
    return out


@njit(cache=True)
def _find_group(sorted_keys, key):
    lo = np.searchsorted(sorted_keys, key)
    if lo < sorted_keys.shape[0] and sorted_keys[lo] == key:
        return lo
    return -1


@njit(cache=True)
def greedy_ops_array(a, b, k, pos_bits, count_only):
    """Greedy swap/change-value script from ``a`` to ``b``.

    Returns ``(n_ops, ops)`` where each row of ``ops`` is
    ``(kind, i, j_or_old, new)``; with ``count_only`` the ops array is empty.
    """
    n = a.shape[0]
    cur = np.empty(n, dtype=np.uint64)
    tgt = np.empty(n, dtype=np.uint64)
    for i in range(n):
        cur[i] = a[i]
        tgt[i] = b[i]
    m = 0
    for i in range(n):
        if cur[i] != tgt[i]:
            m += 1
    ops = np.empty((0 if count_only else m, 4), dtype=np.int64)
    if m == 0:
        return 0, ops
    mism = np.empty(m, dtype=np.int64)
    t = 0
    for i in range(n):
        if cur[i] != tgt[i]:
            mism[t] = i
            t += 1
    done = np.zeros(n, dtype=np.bool_)
    n_ops = 0

    # (cur, target) pair buckets, positions ascending within a bucket.
    pair_keys = np.empty(m, dtype=np.uint64)
    for t in range(m):
        p = mism[t]
        pair_keys[t] = (cur[p] << np.uint64(32)) | tgt[p]
    porder = np.argsort(pair_keys, kind="mergesort")
    psorted = pair_keys[porder]
    phead = np.arange(m)

    for t in range(m):
        i = mism[t]
        if done[i]:
            continue
        g = _find_group(psorted, (tgt[i] << np.uint64(32)) | cur[i])
        if g < 0:
            continue
        key = psorted[g]
        s = phead[g]
        while s < m and psorted[s] == key and done[mism[porder[s]]]:
            s += 1
        phead[g] = s
        if s >= m or psorted[s] != key:
            continue
        j = mism[porder[s]]
        if not count_only:
            ops[n_ops, 0] = 0
            ops[n_ops, 1] = i
            ops[n_ops, 2] = j
            ops[n_ops, 3] = 0
        n_ops += 1
        tmp = cur[i]
        cur[i] = cur[j]
        cur[j] = tmp
        done[i] = True
        done[j] = True

    swap_cost = 2 * pos_bits
    change_cost = k + pos_bits

    # Remaining mismatches grouped by current value.
    r = 0
    for t in range(m):
        if not done[mism[t]]:
            r += 1
    rem = np.empty(r, dtype=np.int64)
    r = 0
    for t in range(m):
        if not done[mism[t]]:
            rem[r] = mism[t]
            r += 1
    vkeys = np.empty(r, dtype=np.uint64)
    for t in range(r):
        vkeys[t] = cur[rem[t]]
    vorder = np.argsort(vkeys, kind="mergesort")
    vsorted = vkeys[vorder]
    vhead = np.arange(r)

    # Pair buckets restricted to the remaining positions, for closing edges.
    rkeys = np.empty(r, dtype=np.uint64)
    for t in range(r):
        p = rem[t]
        rkeys[t] = (cur[p] << np.uint64(32)) | tgt[p]
    rorder = np.argsort(rkeys, kind="mergesort")
    rsorted = rkeys[rorder]
    rhead = np.arange(r)

    in_path = np.zeros(n, dtype=np.bool_)
    path = np.empty(r + 1, dtype=np.int64)
    leftovers = np.zeros(n, dtype=np.bool_)

    for t in range(r):
        p0 = rem[t]
        if done[p0]:
            continue
        close_val = cur[p0]
        plen = 1
        path[0] = p0
        in_path[p0] = True
        need = tgt[p0]
        closed = False
        while True:
            j = -1
            g = _find_group(rsorted, (need << np.uint64(32)) | close_val)
            if g >= 0:
                key = rsorted[g]
                s = rhead[g]
                while s < r and rsorted[s] == key and done[rem[rorder[s]]]:
                    s += 1
                rhead[g] = s
                while s < r and rsorted[s] == key:
                    q = rem[rorder[s]]
                    if not done[q] and not in_path[q]:
                        j = q
                        break
                    s += 1
            if j >= 0:
                path[plen] = j
                plen += 1
                closed = True
                break
            g = _find_group(vsorted, need)
            if g >= 0:
                key = vsorted[g]
                s = vhead[g]
                while s < r and vsorted[s] == key and done[rem[vorder[s]]]:
                    s += 1
                vhead[g] = s
                while s < r and vsorted[s] == key:
                    q = rem[vorder[s]]
                    if not done[q] and not in_path[q]:
                        j = q
                        break
                    s += 1
            if j < 0:
                break
            path[plen] = j
            plen += 1
            in_path[j] = True
            need = tgt[j]
        for u in range(plen):
            in_path[path[u]] = False
        if closed and (plen - 1) * swap_cost < plen * change_cost:
            for u in range(plen - 1):
                p = path[u]
                q = path[u + 1]
                if not count_only:
                    ops[n_ops, 0] = 0
                    ops[n_ops, 1] = p
                    ops[n_ops, 2] = q
                    ops[n_ops, 3] = 0
                n_ops += 1
                tmp = cur[p]
                cur[p] = cur[q]
                cur[q] = tmp
            for u in range(plen):
                done[path[u]] = True
        elif closed:
            for u in range(plen):
                done[path[u]] = True
                leftovers[path[u]] = True
        else:
            done[p0] = True
            leftovers[p0] = True

    for i in range(n):
        if leftovers[i]:
            if not count_only:
                ops[n_ops, 0] = 1
                ops[n_ops, 1] = i
                ops[n_ops, 2] = np.int64(cur[i])
                ops[n_ops, 3] = np.int64(tgt[i])
            n_ops += 1
    if count_only:
        return n_ops, ops
    return n_ops, ops[:n_ops]



@njit(cache=True)
def _next_free(head, key, nxt, done):
    # Drop settled positions from the front of a bucket list.
    p = head[key]
    while p >= 0 and done[p]:
        p = nxt[p]
    head[key] = p
    return p


@njit(cache=True)
def _scan_free(p, nxt, done, in_path):
    while p >= 0 and (done[p] or in_path[p]):
        p = nxt[p]
    return p


@njit(cache=True)
def greedy_dense(a, b, k, pos_bits, count_only, ws):
    """Same result as :func:`greedy_ops_array`, for k <= 8, using workspace ``ws``.

    Buckets are singly linked lists through positions, with heads in dense
    tables indexed by symbol value (or value pair); the tables are left
    all -1 on return.
    """
    pair_head, val_head, nxt_pair, nxt_val, done, in_path, path, leftover, ops = ws
    n = a.shape[0]
    radix = 1 << k
    m = 0
    for i in range(n):
        if a[i] != b[i]:
            m += 1
    if m == 0:
        return 0
    cur = np.empty(n, dtype=np.int64)
    for i in range(n):
        cur[i] = a[i]
        done[i] = False
        in_path[i] = False
        leftover[i] = False
    # Build pair lists in ascending position order by pushing from the back.
    for i in range(n - 1, -1, -1):
        if cur[i] != b[i]:
            key = cur[i] * radix + b[i]
            nxt_pair[i] = pair_head[key]
            pair_head[key] = i
    n_ops = 0
    for i in range(n):
        if cur[i] == b[i] or done[i]:
            continue
        j = _next_free(pair_head, b[i] * radix + cur[i], nxt_pair, done)
        if j < 0:
            continue
        if not count_only:
            ops[n_ops, 0] = 0
            ops[n_ops, 1] = i
            ops[n_ops, 2] = j
            ops[n_ops, 3] = 0
        n_ops += 1
        tmp = cur[i]
        cur[i] = cur[j]
        cur[j] = tmp
        done[i] = True
        done[j] = True

    for i in range(n - 1, -1, -1):
        if cur[i] != b[i] and not done[i]:
            nxt_val[i] = val_head[cur[i]]
            val_head[cur[i]] = i

    swap_cost = 2 * pos_bits
    change_cost = k + pos_bits
    for p0 in range(n):
        if cur[p0] == b[p0] or done[p0]:
            continue
        close_val = cur[p0]
        plen = 1
        path[0] = p0
        in_path[p0] = True
        need = b[p0]
        closed = False
        while True:
            key = need * radix + close_val
            j = _next_free(pair_head, key, nxt_pair, done)
            j = _scan_free(j, nxt_pair, done, in_path)
            if j >= 0:
                path[plen] = j
                plen += 1
                closed = True
                break
            j = _next_free(val_head, need, nxt_val, done)
            j = _scan_free(j, nxt_val, done, in_path)
            if j < 0:
                break
            path[plen] = j
            plen += 1
            in_path[j] = True
            need = b[j]
        for u in range(plen):
            in_path[path[u]] = False
        if closed and (plen - 1) * swap_cost < plen * change_cost:
            for u in range(plen - 1):
                p = path[u]
                q = path[u + 1]
                if not count_only:
                    ops[n_ops, 0] = 0
                    ops[n_ops, 1] = p
                    ops[n_ops, 2] = q
                    ops[n_ops, 3] = 0
                n_ops += 1
                tmp = cur[p]
                cur[p] = cur[q]
                cur[q] = tmp
            for u in range(plen):
                done[path[u]] = True
        elif closed:
            for u in range(plen):
                done[path[u]] = True
                leftover[path[u]] = True
        else:
            done[p0] = True
            leftover[p0] = True

    for i in range(n):
        if leftover[i]:
            if not count_only:
                ops[n_ops, 0] = 1
                ops[n_ops, 1] = i
                ops[n_ops, 2] = cur[i]
                ops[n_ops, 3] = b[i]
            n_ops += 1
    # Reset the touched heads.
    for i in range(n):
        if a[i] != b[i]:
            pair_head[a[i] * radix + b[i]] = -1
            val_head[a[i]] = -1
            val_head[b[i]] = -1
    return n_ops


@njit(cache=True)
def make_workspace(n, k):
    radix = 1 << k
    return (np.full(radix * radix, -1, dtype=np.int64),
            np.full(radix, -1, dtype=np.int64),
            np.empty(n, dtype=np.int64),
            np.empty(n, dtype=np.int64),
            np.zeros(n, dtype=np.bool_),
            np.zeros(n, dtype=np.bool_),
            np.empty(n + 1, dtype=np.int64),
            np.zeros(n, dtype=np.bool_),
            np.empty((n, 4), dtype=np.int64))


_BYTE_ONES = np.uint64(0x0101010101010101)


@njit(cache=True)
def lower_bounds_u8(words, nrows, fw, mat, f, cap, k):
    """:func:`lower_bounds` for one-byte symbols, Hamming counted 8 symbols per word.

    ``words``/``fw`` are uint64 views of zero-padded rows of ``mat``/``f``.
    """
    nw = fw.shape[0]
    n = f.shape[0]
    out = np.empty(nrows, dtype=np.int64)
    limit = 2 * cap
    cnt = np.zeros(1 << k, dtype=np.int64)
    ones = _BYTE_ONES
    for r in range(nrows):
        h = 0
        for w in range(nw):
            x = words[r, w] ^ fw[w]
            if x:
                x |= x >> np.uint64(4)
                x |= x >> np.uint64(2)
                x |= x >> np.uint64(1)
                x &= ones
                h += np.int64((x * ones) >> np.uint64(56))
                if h > limit:
                    break
        if h > limit:
            out[r] = cap + 1
            continue
        d = 0
        if h > 0:
            for i in range(n):
                x8 = mat[r, i]
                y8 = f[i]
                if x8 != y8:
                    cnt[y8] += 1
                    cnt[x8] -= 1
            for i in range(n):
                x8 = mat[r, i]
                y8 = f[i]
                if x8 != y8:
                    if cnt[y8] > 0:
                        d += cnt[y8]
                    cnt[y8] = 0
                    cnt[x8] = 0
        out[r] = (h + d + 1) // 2
    return out


@njit(cache=True)
def _select(lbs, nrows, tau):
    c = 0
    for r in range(nrows):
        if lbs[r] <= tau:
            c += 1
    cand = np.empty(c, dtype=np.int64)
    keys = np.empty(c, dtype=np.int64)
    c = 0
    for r in range(nrows):
        if lbs[r] <= tau:
            cand[c] = r
            keys[c] = lbs[r] * nrows + r
            c += 1
    return cand[np.argsort(keys)]


@njit(cache=True)
def nearest_base_u8(words, mat, nrows, fw, f, tau, k, pos_bits, ws):
    """Row with the smallest greedy distance in ``(0, tau]`` (ties: lowest row).

    One-byte symbols only. Returns ``(row, distance)`` with row -1 when no
    row qualifies.
    """
    if tau <= 0 or nrows == 0:
        return -1, 0
    lbs = lower_bounds_u8(words, nrows, fw, mat, f, tau, k)
    order = _select(lbs, nrows, tau)
    best = -1
    best_d = tau + 1
    for t in range(order.shape[0]):
        r = order[t]
        if lbs[r] > best_d:
            break
        d = greedy_dense(f, mat[r], k, pos_bits, True, ws)
        if d == 0:
            continue
        if d < best_d or (d == best_d and r < best):
            best_d = d
            best = r
    if best < 0:
        return -1, 0
    return best, best_d


@njit(cache=True)
def nearest_base(mat, nrows, f, tau, k, pos_bits):
    """General-width version of :func:`nearest_base_u8`."""
    if tau <= 0 or nrows == 0:
        return -1, 0
    lbs = lower_bounds(mat, nrows, f, tau, k)
    order = _select(lbs, nrows, tau)
    best = -1
    best_d = tau + 1
    for t in range(order.shape[0]):
        r = order[t]
        if lbs[r] > best_d:
            break
        d, _ = greedy_ops_array(f, mat[r], k, pos_bits, True)
        if d == 0:
            continue
        if d < best_d or (d == best_d and r < best):
            best_d = d
            best = r
    if best < 0:
        return -1, 0
    return best, best_d
