"""BLS12-381 base-field arithmetic and backend-independent point encodings.

Points travel as affine integers between the backends and this module, so
byte encodings are identical whichever backend computed them:

* G1: 48-byte compressed form (x big-endian, flag bits in the top byte:
  0x80 compressed, 0x40 infinity, 0x20 y is the larger root).
* G2: 96-byte compressed form, x.c1 then x.c0, same flags; the sign is the
  lexicographic order on (c1, c0).
* GT: 576 bytes, twelve base-field coefficients in tower order
  Fp12 = Fp6[w]/(w^2 - v), Fp6 = Fp2[v]/(v^3 - (u + 1)), Fp2 = Fp[u]/(u^2 + 1).
"""

from ..errors import Malformed

P = 0x1A0111EA397FE69A4B1BA7B6434BACD764774B84F38512BF6730D2A0F6B0F6241EABFFFEB153FFFFB9FEFFFFFFFFAAAB
R = 0x73EDA753299D7D483339D80809A1D80553BDA402FFFE5BFEFFFFFFFF00000001
FP_BYTES = 48
_HALF = (P - 1) // 2

G1Affine = tuple[int, int] | None
G2Affine = tuple[tuple[int, int], tuple[int, int]] | None


def fp_sqrt(a: int) -> int | None:
    a %= P
    root = pow(a, (P + 1) // 4, P)
    return root if root * root % P == a else None


def fp2_mul(a, b):
    a0, a1 = a
    b0, b1 = b
    return ((a0 * b0 - a1 * b1) % P, (a0 * b1 + a1 * b0) % P)


def fp2_sqr(a):
    return fp2_mul(a, a)


def fp2_sqrt(a):
    a0, a1 = a[0] % P, a[1] % P
    if a1 == 0:
        r = fp_sqrt(a0)
        if r is not None:
            return (r, 0)
        r = fp_sqrt(-a0)
        return None if r is None else (0, r)
    s = fp_sqrt(a0 * a0 + a1 * a1)
    if s is None:
        return None
    inv2 = (P + 1) // 2
    for sign in (1, -1):
        x0 = fp_sqrt((a0 + sign * s) * inv2)
        if x0:
            x1 = a1 * pow(2 * x0, -1, P) % P
            cand = (x0, x1)
            if fp2_sqr(cand) == (a0, a1):
                return cand
    return None


def _larger(y: int) -> bool:
    return y > _HALF


def _larger2(y) -> bool:
    return _larger(y[1]) if y[1] else _larger(y[0])


def encode_g1(pt: G1Affine) -> bytes:
    if pt is None:
        return bytes([0xC0]) + bytes(FP_BYTES - 1)
    x, y = pt
    out = bytearray(x.to_bytes(FP_BYTES, "big"))
    out[0] |= 0x80 | (0x20 if _larger(y) else 0)
    return bytes(out)


def decode_g1(data: bytes) -> G1Affine:
    """Decode and check the curve equation; subgroup membership is the backend's job."""
    if len(data) != FP_BYTES:
        raise Malformed("G1 encoding must be 48 bytes")
    flags = data[0] & 0xE0
    body = bytes([data[0] & 0x1F]) + data[1:]
    if not flags & 0x80:
        raise Malformed("G1 encoding must be compressed")
    if flags & 0x40:
        if flags != 0xC0 or any(body):
            raise Malformed("non-canonical G1 infinity")
        return None
    x = int.from_bytes(body, "big")
    if x >= P:
        raise Malformed("G1 x coordinate out of range")
    y = fp_sqrt(x * x * x + 4)
    if y is None:
        raise Malformed("G1 point not on curve")
    if _larger(y) != bool(flags & 0x20):
        y = (P - y) % P
    return (x, y)


def encode_g2(pt: G2Affine) -> bytes:
    if pt is None:
        return bytes([0xC0]) + bytes(2 * FP_BYTES - 1)
    (x0, x1), y = pt
    out = bytearray(x1.to_bytes(FP_BYTES, "big") + x0.to_bytes(FP_BYTES, "big"))
    out[0] |= 0x80 | (0x20 if _larger2(y) else 0)
    return bytes(out)


def decode_g2(data: bytes) -> G2Affine:
    if len(data) != 2 * FP_BYTES:
        raise Malformed("G2 encoding must be 96 bytes")
    flags = data[0] & 0xE0
    body = bytes([data[0] & 0x1F]) + data[1:]
    if not flags & 0x80:
        raise Malformed("G2 encoding must be compressed")
    if flags & 0x40:
        if flags != 0xC0 or any(body):
            raise Malformed("non-canonical G2 infinity")
        return None
    x1 = int.from_bytes(body[:FP_BYTES], "big")
    x0 = int.from_bytes(body[FP_BYTES:], "big")
    if x0 >= P or x1 >= P:
        raise Malformed("G2 x coordinate out of range")
    x = (x0, x1)
    rhs = fp2_mul(fp2_sqr(x), x)
    rhs = ((rhs[0] + 4) % P, (rhs[1] + 4) % P)
    y = fp2_sqrt(rhs)
    if y is None:
        raise Malformed("G2 point not on curve")
    if _larger2(y) != bool(flags & 0x20):
        y = ((P - y[0]) % P, (P - y[1]) % P)
    return (x, y)


def encode_gt(coeffs: list[int]) -> bytes:
    return b"".join(c.to_bytes(FP_BYTES, "big") for c in coeffs)


def decode_gt(data: bytes) -> list[int]:
    if len(data) != 12 * FP_BYTES:
        raise Malformed("GT encoding must be 576 bytes")
    coeffs = [int.from_bytes(data[i:i + FP_BYTES], "big") for i in range(0, len(data), FP_BYTES)]
    if any(c >= P for c in coeffs):
        raise Malformed("GT coefficient out of range")
    return coeffs
