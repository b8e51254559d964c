# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled descent kernels; see pyref.py for the shared contract.

The core binds its buffers once, so per-iteration calls only marshal
scalars.  The maintained inverse and the sample covariance are Hermitian:
the coordinate evaluation runs two BLAS zhemv (half the memory traffic of
a general matvec), the rank-one update one zher on one triangle followed
by a mirror, and the all-coordinate refresh two zgemm with fused
reductions.

Layout note: BLAS sees a C-contiguous buffer as its transpose, which for a
Hermitian matrix is its conjugate.  zhemv/zher therefore operate on
conj(S); feeding conjugated vectors and conjugating results restores the
true quantities (worked out per call below).
"""

import numpy as np

from libc.math cimport log1p
from scipy.linalg.cython_blas cimport zgemm, zhemv, zher

from ..errors import NumericalError

NAME = "compiled"

ctypedef double complex zcomplex

cdef double DENOM_FLOOR = 1e-12


cdef class CdCore:
    cdef zcomplex[:, ::1] sigma_inv
    cdef zcomplex[:, ::1] sigma_hat
    cdef zcomplex[:, ::1] rows
    cdef zcomplex[::1] wbar
    cdef zcomplex[::1] vbar
    cdef Py_ssize_t d, n

    def __init__(self, sigma_inv, sigma_hat, rows):
        self.sigma_inv = sigma_inv
        self.sigma_hat = sigma_hat
        self.rows = rows
        self.d = sigma_inv.shape[0]
        self.n = rows.shape[0]
        self.wbar = np.empty(self.d, dtype=np.complex128)
        self.vbar = np.empty(self.d, dtype=np.complex128)

    cdef (double, double, double, double) _evaluate(self, Py_ssize_t i, double gamma_i):
        cdef int d = <int> self.d, inc = 1
        cdef zcomplex alpha = 1.0, beta = 0.0
        cdef Py_ssize_t r
        cdef double quad = 0.0, fit = 0.0, step, denom
        cdef zcomplex[::1] a = self.rows[i]
        # wbar = conj(S) @ conj(a) = conj(S @ a); stage conj(a) in vbar
        for r in range(d):
            self.vbar[r] = a[r].conjugate()
        zhemv("U", &d, &alpha, &self.sigma_inv[0, 0], &d, &self.vbar[0], &inc,
              &beta, &self.wbar[0], &inc)
        # quad = Re(a^H S a) = Re(sum a * wbar)
        for r in range(d):
            quad += a[r].real * self.wbar[r].real - a[r].imag * self.wbar[r].imag
        if quad <= 0.0:
            raise NumericalError(
                f"nonpositive quadratic form {quad!r}; inverse state is unusable")
        # vbar = conj(C) @ wbar = conj(C @ w) with w = S @ a = conj(wbar);
        # fit = Re(w^H C w) reduces to sum(wbar.re*vbar.re + wbar.im*vbar.im)
        zhemv("U", &d, &alpha, &self.sigma_hat[0, 0], &d, &self.wbar[0], &inc,
              &beta, &self.vbar[0], &inc)
        for r in range(d):
            fit += self.wbar[r].real * self.vbar[r].real + self.wbar[r].imag * self.vbar[r].imag
        step = (fit - quad) / (quad * quad)
        if step < -gamma_i:
            step = -gamma_i
        denom = 1.0 + step * quad
        if denom <= DENOM_FLOOR:
            raise NumericalError(f"singular rank-one update: 1 + d*quad = {denom!r}")
        return step, step * fit / denom - log1p(step * quad), quad, denom

    def probe(self, Py_ssize_t i, double gamma_i):
        cdef (double, double, double, double) out = self._evaluate(i, gamma_i)
        return out[0], out[1], out[2]

    def update(self, Py_ssize_t i, double gamma_i):
        cdef (double, double, double, double) out = self._evaluate(i, gamma_i)
        cdef int d = <int> self.d, inc = 1
        cdef Py_ssize_t r, c
        cdef double coef
        if out[0] != 0.0:
            # S += coef w w^H is conj(S) += coef wbar wbar^H in the Fortran
            # view; zher writes the Fortran-upper (C-lower) triangle, the
            # mirror restores the other one.
            coef = -out[0] / out[3]
            zher("U", &d, &coef, &self.wbar[0], &inc, &self.sigma_inv[0, 0], &d)
            for r in range(self.d):
                for c in range(r + 1, self.d):
                    self.sigma_inv[r, c] = self.sigma_inv[c, r].conjugate()
        return out[0], out[1]

    def refresh(self, double[::1] gamma, double[::1] psi):
        cdef int ni = <int> self.n, di = <int> self.d
        cdef zcomplex alpha = 1.0, beta = 0.0
        wr_arr = np.empty((self.n, self.d), dtype=np.complex128)
        vr_arr = np.empty((self.n, self.d), dtype=np.complex128)
        cdef zcomplex[:, ::1] wr = wr_arr
        cdef zcomplex[:, ::1] vr = vr_arr
        # A C-contiguous (n, d) buffer is Fortran-order (d, n), i.e. the
        # transpose; 'T' on the square factors undoes their implicit
        # transpose: wr^T = sigma_inv @ rows^T, vr^T = sigma_hat @ wr^T.
        zgemm("T", "N", &di, &ni, &di, &alpha, &self.sigma_inv[0, 0], &di,
              &self.rows[0, 0], &di, &beta, &wr[0, 0], &di)
        zgemm("T", "N", &di, &ni, &di, &alpha, &self.sigma_hat[0, 0], &di,
              &wr[0, 0], &di, &beta, &vr[0, 0], &di)
        cdef Py_ssize_t i, c
        cdef double quad, fit, step, denom
        for i in range(self.n):
            quad = 0.0
            fit = 0.0
            for c in range(self.d):
                quad += self.rows[i, c].real * wr[i, c].real + self.rows[i, c].imag * wr[i, c].imag
                fit += wr[i, c].real * vr[i, c].real + wr[i, c].imag * vr[i, c].imag
            if quad <= 0.0:
                raise NumericalError("nonpositive quadratic form during refresh")
            step = (fit - quad) / (quad * quad)
            if step < -gamma[i]:
                step = -gamma[i]
            denom = 1.0 + step * quad
            if denom <= DENOM_FLOOR:
                raise NumericalError("singular hypothetical update during refresh")
            psi[i] = step * fit / denom - log1p(step * quad)


def make_core(sigma_inv, sigma_hat, rows):
    return CdCore(sigma_inv, sigma_hat, rows)
