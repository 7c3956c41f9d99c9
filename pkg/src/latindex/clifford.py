"""Explicit Clifford generators and chirality matrices for n = 1..4.

Conventions (fixed, so that regression values are reproducible):

* n = 1: ``c_1 = [1]``.
* n = 2: ``c_1 = sigma_1``, ``c_2 = sigma_2`` and ``gamma = -i c_1 c_2 = sigma_3``.
  Together with the gauge convention of :mod:`latindex.gauge` a U(1)
  background of charge Q then has index +Q.
* n = 3: ``c_k = sigma_k``; no chirality exists.
* n = 4: chiral (Weyl) basis ``c_k = [[0, -i sigma_k], [i sigma_k, 0]]`` for
  k = 1..3, ``c_4 = [[0, 1], [1, 0]]`` and ``gamma = c_1 c_2 c_3 c_4``,
  which is ``diag(1, 1, -1, -1)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OddDimension, UnsupportedDimension

SIGMA = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass(frozen=True, eq=False)
class GammaRep:
    """Clifford generators ``c_i`` and (for even n) the grading ``gamma``."""

    n: int
    gammas: tuple
    chirality: np.ndarray | None

    @property
    def spinor_dim(self) -> int:
        return self.gammas[0].shape[0]

    @property
    def even(self) -> bool:
        return self.chirality is not None

    def require_chirality(self) -> np.ndarray:
        if self.chirality is None:
            raise OddDimension(f"n={self.n} has no chirality operator")
        return self.chirality


def build_gamma_rep(n: int) -> GammaRep:
    if n == 1:
        gammas = (np.eye(1, dtype=complex),)
        chir = None
    elif n == 2:
        gammas = (SIGMA[0].copy(), SIGMA[1].copy())
        chir = -1j * gammas[0] @ gammas[1]
    elif n == 3:
        gammas = tuple(s.copy() for s in SIGMA)
        chir = None
    elif n == 4:
        z = np.zeros((2, 2), dtype=complex)
        one = np.eye(2, dtype=complex)
        gammas = tuple(np.block([[z, -1j * s], [1j * s, z]]) for s in SIGMA)
        gammas = gammas + (np.block([[z, one], [one, z]]),)
        chir = gammas[0] @ gammas[1] @ gammas[2] @ gammas[3]
    else:
        raise UnsupportedDimension(f"supported dimensions are 1..4, got n={n}")
    for g in gammas:
        g.setflags(write=False)
    if chir is not None:
        chir = np.real_if_close(chir).astype(complex)
        chir.setflags(write=False)
    return GammaRep(n=n, gammas=gammas, chirality=chir)


def clifford_residuals(rep: GammaRep) -> dict:
    """Max-norm violations of the Clifford and grading identities."""
    eye = np.eye(rep.spinor_dim)
    anti = 0.0
    for i, ci in enumerate(rep.gammas):
        for j, cj in enumerate(rep.gammas):
            target = 2 * eye if i == j else 0 * eye
            anti = max(anti, np.abs(ci @ cj + cj @ ci - target).max())
    herm = max(np.abs(c - c.conj().T).max() for c in rep.gammas)
    out = {"anticommutator": anti, "hermiticity": herm}
    if rep.chirality is not None:
        g = rep.chirality
        out["gamma_square"] = np.abs(g @ g - eye).max()
        out["gamma_anticommutator"] = max(np.abs(g @ c + c @ g).max() for c in rep.gammas)
        out["gamma_hermiticity"] = np.abs(g - g.conj().T).max()
        out["gamma_trace"] = abs(np.trace(g))
    return out
