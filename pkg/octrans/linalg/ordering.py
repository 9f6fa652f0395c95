"""Fill-reducing orderings for symmetric patterns.

``amd`` is approximate minimum degree on the quotient graph of the
pattern, with element absorption, mass elimination, supernode detection
by hashing, and a postorder of the resulting assembly tree. It follows
the CSparse formulation, compiled with numba.
"""

from typing import Callable, Dict, List, Tuple

import numpy as np
from numba import njit

from octrans.core.exceptions import ConfigurationException

from .sparse import SparseSym

Ordering = Callable[[SparseSym], np.ndarray]


@njit(cache=True)
def _flip(i):
    return -i - 2


@njit(cache=True)
def _wclear(mark, lemax, w, n):
    if mark < 2 or mark + lemax < 0:
        for k in range(n):
            if w[k] != 0:
                w[k] = 1
        mark = 2
    return mark


@njit(cache=True)
def _tdfs(j, k, head, next_, post, stack):
    top = 0
    stack[0] = j
    while top >= 0:
        p = stack[top]
        i = head[p]
        if i == -1:
            top -= 1
            post[k] = p
            k += 1
        else:
            head[p] = next_[i]
            top += 1
            stack[top] = i
    return k


@njit(cache=True)
def _amd(n, ap, ai):  # noqa: C901
    """Ordering of the graph with adjacency ``(ap, ai)`` (no self loops)."""
    cnz = ap[n]
    nzmax = cnz + cnz // 5 + 2 * n
    ci = np.empty(max(nzmax, 1), dtype=np.int64)
    ci[:cnz] = ai[:cnz]
    cp = ap.copy()

    P = np.empty(n + 1, dtype=np.int64)
    length = np.empty(n + 1, dtype=np.int64)
    nv = np.empty(n + 1, dtype=np.int64)
    nxt = np.empty(n + 1, dtype=np.int64)
    head = np.empty(n + 1, dtype=np.int64)
    elen = np.empty(n + 1, dtype=np.int64)
    degree = np.empty(n + 1, dtype=np.int64)
    w = np.empty(n + 1, dtype=np.int64)
    hhead = np.empty(n + 1, dtype=np.int64)
    last = P

    dense = max(16, int(10.0 * np.sqrt(float(n))))
    dense = min(n - 2, dense)
    lemax = 0
    mindeg = 0
    nel = 0

    for k in range(n):
        length[k] = cp[k + 1] - cp[k]
    length[n] = 0
    for i in range(n + 1):
        head[i] = -1
        last[i] = -1
        nxt[i] = -1
        hhead[i] = -1
        nv[i] = 1
        w[i] = 1
        elen[i] = 0
        degree[i] = length[i]
    mark = _wclear(0, 0, w, n)
    elen[n] = -2
    cp[n] = -1
    w[n] = 0

    for i in range(n):
        d = degree[i]
        if d == 0:
            elen[i] = -2
            nel += 1
            cp[i] = -1
            w[i] = 0
        elif d > dense:
            nv[i] = 0
            elen[i] = -1
            nel += 1
            cp[i] = _flip(n)
            nv[n] += 1
        else:
            if head[d] != -1:
                last[head[d]] = i
            nxt[i] = head[d]
            head[d] = i

    while nel < n:
        # node of minimum approximate degree
        k = -1
        while mindeg < n:
            k = head[mindeg]
            if k != -1:
                break
            mindeg += 1
        if nxt[k] != -1:
            last[nxt[k]] = -1
        head[mindeg] = nxt[k]
        elenk = elen[k]
        nvk = nv[k]
        nel += nvk

        # garbage collection
        if elenk > 0 and cnz + mindeg >= nzmax:
            for j in range(n):
                p = cp[j]
                if p >= 0:
                    cp[j] = ci[p]
                    ci[p] = _flip(j)
            q = 0
            p = 0
            while p < cnz:
                j = _flip(ci[p])
                p += 1
                if j >= 0:
                    ci[q] = cp[j]
                    cp[j] = q
                    q += 1
                    for _ in range(length[j] - 1):
                        ci[q] = ci[p]
                        q += 1
                        p += 1
            cnz = q

        # new element Lk
        dk = 0
        nv[k] = -nvk
        p = cp[k]
        pk1 = p if elenk == 0 else cnz
        pk2 = pk1
        for k1 in range(1, elenk + 2):
            if k1 > elenk:
                e = k
                pj = p
                ln = length[k] - elenk
            else:
                e = ci[p]
                p += 1
                pj = cp[e]
                ln = length[e]
            for _ in range(ln):
                i = ci[pj]
                pj += 1
                nvi = nv[i]
                if nvi <= 0:
                    continue
                dk += nvi
                nv[i] = -nvi
                ci[pk2] = i
                pk2 += 1
                if nxt[i] != -1:
                    last[nxt[i]] = last[i]
                if last[i] != -1:
                    nxt[last[i]] = nxt[i]
                else:
                    head[degree[i]] = nxt[i]
            if e != k:
                cp[e] = _flip(k)
                w[e] = 0
        if elenk != 0:
            cnz = pk2
        degree[k] = dk
        cp[k] = pk1
        length[k] = pk2 - pk1
        elen[k] = -2

        # set differences |Le \ Lk|
        mark = _wclear(mark, lemax, w, n)
        for pk in range(pk1, pk2):
            i = ci[pk]
            eln = elen[i]
            if eln <= 0:
                continue
            nvi = -nv[i]
            wnvi = mark - nvi
            for p in range(cp[i], cp[i] + eln):
                e = ci[p]
                if w[e] >= mark:
                    w[e] -= nvi
                elif w[e] != 0:
                    w[e] = degree[e] + wnvi

        # degree update
        for pk in range(pk1, pk2):
            i = ci[pk]
            p1 = cp[i]
            p2 = p1 + elen[i] - 1
            pn = p1
            h = 0
            d = 0
            for p in range(p1, p2 + 1):
                e = ci[p]
                if w[e] != 0:
                    dext = w[e] - mark
                    if dext > 0:
                        d += dext
                        ci[pn] = e
                        pn += 1
                        h += e
                    else:
                        cp[e] = _flip(k)
                        w[e] = 0
            elen[i] = pn - p1 + 1
            p3 = pn
            p4 = p1 + length[i]
            for p in range(p2 + 1, p4):
                j = ci[p]
                nvj = nv[j]
                if nvj <= 0:
                    continue
                d += nvj
                ci[pn] = j
                pn += 1
                h += j
            if d == 0:
                # mass elimination
                cp[i] = _flip(k)
                nvi = -nv[i]
                dk -= nvi
                nvk += nvi
                nel += nvi
                nv[i] = 0
                elen[i] = -1
            else:
                degree[i] = min(degree[i], d)
                ci[pn] = ci[p3]
                ci[p3] = ci[p1]
                ci[p1] = k
                length[i] = pn - p1 + 1
                h = abs(h) % n
                nxt[i] = hhead[h]
                hhead[h] = i
                last[i] = h
        degree[k] = dk
        lemax = max(lemax, dk)
        mark = _wclear(mark + lemax, lemax, w, n)

        # supernode detection
        for pk in range(pk1, pk2):
            i = ci[pk]
            if nv[i] >= 0:
                continue
            h = last[i]
            i = hhead[h]
            hhead[h] = -1
            while i != -1 and nxt[i] != -1:
                ln = length[i]
                eln = elen[i]
                for p in range(cp[i] + 1, cp[i] + ln):
                    w[ci[p]] = mark
                jlast = i
                j = nxt[i]
                while j != -1:
                    ok = length[j] == ln and elen[j] == eln
                    p = cp[j] + 1
                    while ok and p <= cp[j] + ln - 1:
                        if w[ci[p]] != mark:
                            ok = False
                        p += 1
                    if ok:
                        cp[j] = _flip(i)
                        nv[i] += nv[j]
                        nv[j] = 0
                        elen[j] = -1
                        j = nxt[j]
                        nxt[jlast] = j
                    else:
                        jlast = j
                        j = nxt[j]
                i = nxt[i]
                mark += 1

        # finalize Lk
        p = pk1
        for pk in range(pk1, pk2):
            i = ci[pk]
            nvi = -nv[i]
            if nvi <= 0:
                continue
            nv[i] = nvi
            d = degree[i] + dk - nvi
            d = min(d, n - nel - nvi)
            if head[d] != -1:
                last[head[d]] = i
            nxt[i] = head[d]
            last[i] = -1
            head[d] = i
            mindeg = min(mindeg, d)
            degree[i] = d
            ci[p] = i
            p += 1
        nv[k] = nvk
        length[k] = p - pk1
        if length[k] == 0:
            cp[k] = -1
            w[k] = 0
        if elenk != 0:
            cnz = p

    # postorder the assembly tree
    for i in range(n):
        cp[i] = _flip(cp[i])
    for j in range(n + 1):
        head[j] = -1
    for j in range(n, -1, -1):
        if nv[j] > 0:
            continue
        nxt[j] = head[cp[j]]
        head[cp[j]] = j
    for e in range(n, -1, -1):
        if nv[e] <= 0:
            continue
        if cp[e] != -1:
            nxt[e] = head[cp[e]]
            head[cp[e]] = e
    k = 0
    for i in range(n + 1):
        if cp[i] == -1:
            k = _tdfs(i, k, head, nxt, P, w)
    return P[:n].copy()


def adjacency(matrix: SparseSym) -> Tuple[np.ndarray, np.ndarray]:
    """Column pointers and row indices of the full pattern minus the diagonal."""
    cols = matrix.column_indices()
    rows = matrix.indices
    off = rows != cols
    full_rows = np.concatenate([rows[off], cols[off]])
    full_cols = np.concatenate([cols[off], rows[off]])
    order = np.lexsort((full_rows, full_cols))
    ap = np.zeros(matrix.n + 1, dtype=np.int64)
    np.cumsum(np.bincount(full_cols, minlength=matrix.n), out=ap[1:])
    return ap, full_rows[order].astype(np.int64)


def amd_order(matrix: SparseSym) -> np.ndarray:
    """Approximate minimum degree permutation; ``perm[k]`` is the k-th pivot."""
    if matrix.n == 0:
        return np.zeros(0, dtype=np.int64)
    ap, ai = adjacency(matrix)
    return _amd(matrix.n, ap, ai)


def natural_order(matrix: SparseSym) -> np.ndarray:
    return np.arange(matrix.n, dtype=np.int64)


class OrderingFactory:
    """Registry of ordering algorithms by name."""

    _orderings: Dict[str, Ordering] = {
        "amd": amd_order,
        "natural": natural_order,
    }

    @classmethod
    def create_ordering(cls, name: str) -> Ordering:
        try:
            return cls._orderings[name]
        except KeyError:
            available = ", ".join(cls.get_available_orderings())
            raise ConfigurationException(
                f"unknown ordering '{name}' (available: {available})",
                config_key="ordering",
            ) from None

    @classmethod
    def get_available_orderings(cls) -> List[str]:
        return sorted(cls._orderings)

    @classmethod
    def register_ordering(cls, name: str, ordering: Ordering) -> None:
        cls._orderings[name] = ordering
