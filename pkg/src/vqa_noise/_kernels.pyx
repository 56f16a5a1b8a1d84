# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled in-place kernels for Pauli-string gates and channels.

All routines mutate their complex128 argument. Masks follow the convention of
:mod:`vqa_noise.pauli`: P|b> = i**ny (-1)**popcount(b & z) |b ^ x>.
"""

from libc.math cimport cos, sin
from libc.stdlib cimport free, malloc

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


cdef inline double complex _ipow(int ny) noexcept nogil:
    ny = ny & 3
    if ny == 0:
        return 1.0
    elif ny == 1:
        return 1j
    elif ny == 2:
        return -1.0
    return -1j


cdef inline double _sign(Py_ssize_t b, long long z) noexcept nogil:
    if __builtin_popcountll(<unsigned long long>(b & z)) & 1:
        return -1.0
    return 1.0


cdef double complex* _phases(Py_ssize_t dim, long long z, double complex base) noexcept nogil:
    """Table of i**ny (-1)**popcount(b & z) for every index b."""
    cdef double complex* w = <double complex*> malloc(dim * sizeof(double complex))
    cdef Py_ssize_t b
    if w != NULL:
        for b in range(dim):
            w[b] = base * _sign(b, z)
    return w


def pauli_vec(double complex[::1] psi, long long x, long long z, int ny):
    """psi <- P psi."""
    cdef Py_ssize_t dim = psi.shape[0], b, b2
    cdef double complex base = _ipow(ny), a, c
    with nogil:
        if x == 0:
            for b in range(dim):
                psi[b] = psi[b] * base * _sign(b, z)
        else:
            for b in range(dim):
                b2 = b ^ x
                if b < b2:
                    a = psi[b]
                    c = psi[b2]
                    psi[b] = base * _sign(b2, z) * c
                    psi[b2] = base * _sign(b, z) * a


def rotate_vec(double complex[::1] psi, long long x, long long z, int ny, double theta):
    """psi <- exp(-i theta P / 2) psi."""
    cdef Py_ssize_t dim = psi.shape[0], b, b2
    cdef double complex a, c
    cdef double co = cos(0.5 * theta), si = sin(0.5 * theta)
    cdef double complex mis = -1j * si * _ipow(ny)
    with nogil:
        if x == 0:
            for b in range(dim):
                psi[b] = psi[b] * (co + mis * _sign(b, z))
        else:
            for b in range(dim):
                b2 = b ^ x
                if b < b2:
                    a = psi[b]
                    c = psi[b2]
                    psi[b] = co * a + (mis * _sign(b2, z)) * c
                    psi[b2] = co * c + (mis * _sign(b, z)) * a


def rotate_rho(double complex[:, ::1] rho, long long x, long long z, int ny, double theta):
    """rho <- U rho U^dagger with U = exp(-i theta P / 2)."""
    cdef Py_ssize_t dim = rho.shape[0], r, col, r2
    cdef double co = cos(0.5 * theta), si = sin(0.5 * theta)
    cdef double complex a, c, wl, wr
    cdef double complex* lw
    cdef double complex* rw
    cdef double complex* row
    cdef double complex* row2
    with nogil:
        # lw[b] = -i sin * omega(b); rw[b] = conj(lw[b]) (right factor U^dagger)
        lw = _phases(dim, z, -1j * si * _ipow(ny))
        rw = _phases(dim, z, (-1j * si * _ipow(ny)).conjugate())
        if lw == NULL or rw == NULL:
            free(lw)
            free(rw)
            with gil:
                raise MemoryError()
        if x == 0:
            for r in range(dim):
                row = &rho[r, 0]
                wl = co + lw[r]
                for col in range(dim):
                    row[col] = row[col] * wl * (co + rw[col])
        else:
            for r in range(dim):
                r2 = r ^ x
                if r < r2:
                    row = &rho[r, 0]
                    row2 = &rho[r2, 0]
                    wl = lw[r2]
                    wr = lw[r]
                    for col in range(dim):
                        a = row[col]
                        c = row2[col]
                        row[col] = co * a + wl * c
                        row2[col] = co * c + wr * a
            for r in range(dim):
                row = &rho[r, 0]
                for col in range(dim):
                    r2 = col ^ x
                    if col < r2:
                        a = row[col]
                        c = row[r2]
                        row[col] = co * a + rw[r2] * c
                        row[r2] = co * c + rw[col] * a
        free(lw)
        free(rw)


def pauli_channel_rho(double complex[:, ::1] rho, long long x, long long z, double p):
    """rho <- (1 - p) rho + p P rho P."""
    cdef Py_ssize_t dim = rho.shape[0], r, col, r2
    cdef double q = 1.0 - p, sr
    cdef double complex a, b
    cdef double* sg
    cdef double complex* row
    cdef double complex* row2
    with nogil:
        sg = <double*> malloc(dim * sizeof(double))
        if sg == NULL:
            with gil:
                raise MemoryError()
        for r in range(dim):
            sg[r] = _sign(r, z)
        if x == 0:
            for r in range(dim):
                row = &rho[r, 0]
                for col in range(dim):
                    row[col] = row[col] * (q + p * sg[r] * sg[col])
        else:
            for r in range(dim):
                r2 = r ^ x
                if r < r2:
                    row = &rho[r, 0]
                    row2 = &rho[r2, 0]
                    sr = p * sg[r2]
                    for col in range(dim):
                        a = row[col]
                        b = row2[col ^ x]
                        row[col] = q * a + (sr * sg[col ^ x]) * b
                        row2[col ^ x] = q * b + (p * sg[r] * sg[col]) * a
        free(sg)


def phase_flip_vec(double complex[::1] psi, long long mask):
    """Negate amplitudes whose index has every bit of ``mask`` set (CZ-type gates)."""
    cdef Py_ssize_t dim = psi.shape[0], b
    with nogil:
        for b in range(dim):
            if (b & mask) == mask:
                psi[b] = -psi[b]


def phase_flip_rho(double complex[:, ::1] rho, long long mask):
    cdef Py_ssize_t dim = rho.shape[0], r, col
    cdef bint fr, fc
    with nogil:
        for r in range(dim):
            fr = (r & mask) == mask
            for col in range(dim):
                fc = (col & mask) == mask
                if fr != fc:
                    rho[r, col] = -rho[r, col]
