# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled token-move kernel; same contract as ``_kernel_py.fire_all``.

Token tuples and rule deltas are both sorted by element id, so checks and
updates are linear merges instead of dict round-trips.
"""


cdef inline Py_ssize_t _find(tuple tokens, Py_ssize_t n, object key, Py_ssize_t lo):
    # first position >= lo whose id is >= key
    cdef Py_ssize_t hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if (<tuple>tokens[mid])[0] < key:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef tuple _merge(tuple tokens, Py_ssize_t n, tuple delta):
    cdef Py_ssize_t i = 0, j = 0, m = len(delta)
    cdef long v
    cdef tuple a, b
    cdef list out = []
    while i < n and j < m:
        a = <tuple>tokens[i]
        b = <tuple>delta[j]
        if a[0] == b[0]:
            v = <long>a[1] + <long>b[1]
            if v:
                out.append((a[0], v))
            i += 1
            j += 1
        elif a[0] < b[0]:
            out.append(a)
            i += 1
        else:
            out.append(b)
            j += 1
    while i < n:
        out.append(tokens[i])
        i += 1
    while j < m:
        out.append(delta[j])
        j += 1
    return tuple(out)


def fire_all(tuple tokens, table):
    cdef Py_ssize_t n = len(tokens), pos, k
    cdef tuple entry, need, forbidden, req
    cdef list out = []
    cdef bint ok
    for entry in table:
        need = <tuple>entry[1]
        ok = True
        pos = 0
        for k in range(len(need)):
            req = <tuple>need[k]
            pos = _find(tokens, n, req[0], pos)
            if pos == n or (<tuple>tokens[pos])[0] != req[0] or <long>(<tuple>tokens[pos])[1] < <long>req[1]:
                ok = False
                break
        if not ok:
            continue
        forbidden = <tuple>entry[2]
        for k in range(len(forbidden)):
            pos = _find(tokens, n, forbidden[k], 0)
            if pos < n and (<tuple>tokens[pos])[0] == forbidden[k]:
                ok = False
                break
        if not ok:
            continue
        out.append((entry[0], _merge(tokens, n, <tuple>entry[3])))
    return out
