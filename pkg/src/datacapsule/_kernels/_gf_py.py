"""Pure-Python linear algebra over Z_p (fallback for the compiled kernel)."""


def matvec(matrix, vec, p):
    """Return ``matrix @ vec`` reduced mod ``p``."""
    out = []
    for row in matrix:
        acc = 0
        for a, b in zip(row, vec):
            acc += a * b
        out.append(acc % p)
    return out


def solve_left(rows, width, p):
    """Find w with ``sum(w[i] * rows[i]) == (1, 0, ..., 0)`` mod ``p``.

    Gaussian elimination on the transposed system; unknowns are visited in
    row order, so the earliest independent rows become pivots and every
    free unknown is zero. Returns None when e1 is not in the row span.
    """
    k = len(rows)
    # width equations, k unknowns, augmented with the target column
    aug = [[rows[i][j] % p for i in range(k)] + [1 if j == 0 else 0] for j in range(width)]
    pivot_of = []
    r = 0
    for col in range(k):
        if r == width:
            break
        sel = -1
        for i in range(r, width):
            if aug[i][col]:
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
        if aug[i][k]:
            return None
    w = [0] * k
    for i, col in enumerate(pivot_of):
        w[col] = aug[i][k]
    return w
