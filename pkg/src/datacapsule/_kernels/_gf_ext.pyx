# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled linear algebra over Z_p.

Moduli below 2**31 take a machine-integer path; larger moduli (the pairing
group order) run the same loops on Python integers.
"""

from libc.stdlib cimport malloc, free

cdef long long SMALL = 2147483648


cdef long long _inv_small(long long a, long long p):
    cdef long long t = 0, nt = 1, r = p, nr = a, q, tmp
    while nr:
        q = r // nr
        tmp = t - q * nt; t = nt; nt = tmp
        tmp = r - q * nr; r = nr; nr = tmp
    if t < 0:
        t += p
    return t


def matvec(matrix, vec, p):
    cdef list out = []
    cdef long long acc, sp
    cdef Py_ssize_t j, n
    if p < SMALL:
        sp = p
        n = len(vec)
        for row in matrix:
            acc = 0
            for j in range(n):
                acc = (acc + (<long long>(row[j] % p)) * (<long long>(vec[j] % p))) % sp
            out.append(acc)
        return out
    for row in matrix:
        obj = 0
        for a, b in zip(row, vec):
            obj += a * b
        out.append(obj % p)
    return out


def solve_left(rows, width, p):
    if p < SMALL:
        return _solve_small(rows, width, p)
    return _solve_big(rows, width, p)


cdef object _solve_small(rows, Py_ssize_t width, long long p):
    cdef Py_ssize_t k = len(rows), i, j, col, r = 0, sel
    cdef Py_ssize_t stride = k + 1
    cdef long long inv, f
    cdef long long* aug = <long long*>malloc(width * stride * sizeof(long long))
    cdef Py_ssize_t* pivot_of = <Py_ssize_t*>malloc((k + 1) * sizeof(Py_ssize_t))
    if aug == NULL or pivot_of == NULL:
        free(aug)
        free(pivot_of)
        raise MemoryError()
    try:
        for j in range(width):
            for i in range(k):
                aug[j * stride + i] = rows[i][j] % p
            aug[j * stride + k] = 1 if j == 0 else 0
        for col in range(k):
            if r == width:
                break
            sel = -1
            for i in range(r, width):
                if aug[i * stride + col]:
                    sel = i
                    break
            if sel < 0:
                continue
            if sel != r:
                for j in range(stride):
                    f = aug[r * stride + j]
                    aug[r * stride + j] = aug[sel * stride + j]
                    aug[sel * stride + j] = f
            inv = _inv_small(aug[r * stride + col], p)
            for j in range(col, stride):
                aug[r * stride + j] = aug[r * stride + j] * inv % p
            for i in range(width):
                if i != r:
                    f = aug[i * stride + col]
                    if f:
                        for j in range(col, stride):
                            aug[i * stride + j] = (aug[i * stride + j] - f * aug[r * stride + j]) % p
                            if aug[i * stride + j] < 0:
                                aug[i * stride + j] += p
            pivot_of[r] = col
            r += 1
        for i in range(r, width):
            if aug[i * stride + k]:
                return None
        w = [0] * k
        for i in range(r):
            w[pivot_of[i]] = aug[i * stride + k]
        return w
    finally:
        free(aug)
        free(pivot_of)


cdef object _solve_big(rows, Py_ssize_t width, object p):
    cdef Py_ssize_t k = len(rows), i, j, col, r = 0, sel
    cdef list aug = [[rows[i][j] % p for i in range(k)] + [1 if j == 0 else 0] for j in range(width)]
    cdef list prow, row
    cdef list pivot_of = []
    for col in range(k):
        if r == width:
            break
        sel = -1
        for i in range(r, width):
            if (<list>aug[i])[col]:
                sel = i
                break
        if sel < 0:
            continue
        aug[r], aug[sel] = aug[sel], aug[r]
        prow = aug[r]
        inv = pow(prow[col], -1, p)
        if inv != 1:
            for j in range(col, k + 1):
                prow[j] = prow[j] * inv % p
        for i in range(width):
            if i != r:
                row = aug[i]
                f = row[col]
                if f:
                    for j in range(col, k + 1):
                        row[j] = (row[j] - f * prow[j]) % p
        pivot_of.append(col)
        r += 1
    for i in range(r, width):
        if (<list>aug[i])[k]:
            return None
    w = [0] * k
    for i in range(r):
        w[pivot_of[i]] = (<list>aug[i])[k]
    return w
