"""Pure-numpy reference implementation of the descent kernels.

Backend contract (shared with the compiled twin in ``_cdcore``):

 * ``make_core(sigma_inv, sigma_hat, rows)`` binds the maintained inverse
   (C-contiguous complex128, Hermitian, caller-owned: external writes such
   as resyncs are visible to the core), the sample covariance, and the
   row-major codeword matrix (row i is codeword i).
 * ``core.probe(i, gamma_i)`` evaluates coordinate i against the current
   state without changing it and returns ``(step, reward, quad)``:
   ``quad = Re(a_i^H sigma_inv a_i)``, ``step`` the feasibility-clipped
   coordinate minimizer, ``reward`` the exact cost decrease committing the
   step would produce.
 * ``core.update(i, gamma_i)`` additionally commits the rank-one inverse
   change and returns ``(step, reward)``.
 * ``core.refresh(gamma, psi)`` evaluates every coordinate's hypothetical
   step against the frozen state and writes the rewards into ``psi``.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import NumericalError

NAME = "python"

# floor for 1 + step*quad before the update is declared singular
DENOM_FLOOR = 1e-12


class PyCore:
    def __init__(self, sigma_inv, sigma_hat, rows):
        self.sigma_inv = sigma_inv
        self.sigma_hat = sigma_hat
        self.rows = rows
        self._w = np.empty(sigma_inv.shape[0], dtype=np.complex128)
        self._v = np.empty(sigma_inv.shape[0], dtype=np.complex128)

    def _evaluate(self, i, gamma_i):
        a = self.rows[i]
        w = np.dot(self.sigma_inv, a, out=self._w)
        quad = float(np.vdot(a, w).real)
        if quad <= 0.0:
            raise NumericalError(
                f"nonpositive quadratic form {quad!r}; inverse state is unusable"
            )
        fit = float(np.vdot(w, np.dot(self.sigma_hat, w, out=self._v)).real)
        step = (fit - quad) / (quad * quad)
        if step < -gamma_i:
            step = -gamma_i
        denom = 1.0 + step * quad
        if denom <= DENOM_FLOOR:
            raise NumericalError(f"singular rank-one update: 1 + d*quad = {denom!r}")
        reward = step * fit / denom - math.log1p(step * quad)
        return step, reward, quad, denom

    def probe(self, i, gamma_i):
        step, reward, quad, _ = self._evaluate(i, gamma_i)
        return step, reward, quad

    def update(self, i, gamma_i):
        step, reward, quad, denom = self._evaluate(i, gamma_i)
        if step != 0.0:
            w = self._w
            # outer(w, conj(w)) is exactly Hermitian in floating point, so
            # the maintained inverse stays Hermitian without resymmetrizing
            self.sigma_inv -= (step / denom) * np.outer(w, w.conj())
        return step, reward

    def refresh(self, gamma, psi):
        wr = self.rows @ self.sigma_inv.T  # row i is (sigma_inv @ a_i)^T
        quad = np.einsum("nd,nd->n", self.rows.conj(), wr).real
        if quad.min() <= 0.0:
            raise NumericalError("nonpositive quadratic form during refresh")
        vr = wr @ self.sigma_hat.T
        fit = np.einsum("nd,nd->n", wr.conj(), vr).real
        step = np.maximum((fit - quad) / (quad * quad), -gamma)
        denom = 1.0 + step * quad
        if denom.min() <= DENOM_FLOOR:
            raise NumericalError("singular hypothetical update during refresh")
        np.subtract(step * fit / denom, np.log1p(step * quad), out=psi)


def make_core(sigma_inv, sigma_hat, rows):
    return PyCore(sigma_inv, sigma_hat, rows)
