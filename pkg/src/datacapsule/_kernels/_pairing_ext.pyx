# cython: language_level=3
"""Product of pairings with one shared final exponentiation.

Binds RELIC's simultaneous optimal-ate map from the shared library that
petrelic already loaded, so the library state (curve parameters) is the
one petrelic initialized. Elements are passed as raw struct addresses and
copied into contiguous arrays, which is what the C routine expects.
"""

from libc.stdint cimport uintptr_t
from libc.stdlib cimport free, malloc
from libc.string cimport memcpy
from posix.dlfcn cimport RTLD_NOW, dlopen, dlsym

ctypedef void (*map_sim_t)(void *r, void *p, void *q, int m) noexcept nogil

cdef map_sim_t _map_sim = NULL


def bind(path):
    global _map_sim
    handle = dlopen(path.encode(), RTLD_NOW)
    if handle == NULL:
        raise OSError(f"cannot load {path}")
    sym = dlsym(handle, b"pp_map_sim_oatep_k12")
    if sym == NULL:
        raise OSError("pp_map_sim_oatep_k12 not exported")
    _map_sim = <map_sim_t>sym


def bound():
    return _map_sim != NULL


def multi_pairing(uintptr_t out, list g1_addrs, list g2_addrs, size_t g1_size, size_t g2_size):
    cdef Py_ssize_t m = len(g1_addrs), i
    if _map_sim == NULL:
        raise RuntimeError("multi-pairing kernel not bound")
    if len(g2_addrs) != m:
        raise ValueError("argument lists differ in length")
    cdef char *bp = <char *>malloc(g1_size * m + 1)
    cdef char *bq = <char *>malloc(g2_size * m + 1)
    if bp == NULL or bq == NULL:
        free(bp)
        free(bq)
        raise MemoryError()
    try:
        for i in range(m):
            memcpy(bp + i * g1_size, <void *><uintptr_t>g1_addrs[i], g1_size)
            memcpy(bq + i * g2_size, <void *><uintptr_t>g2_addrs[i], g2_size)
        with nogil:
            _map_sim(<void *>out, bp, bq, <int>m)
    finally:
        free(bp)
        free(bq)
