"""Overlap Dirac operator built from the exact sign of H_W(-M)."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import NonIntegerTrace, SignUndefined
from .latops import LatticeOperator, LatticeSpace, WilsonFamily

SIGN_TOL = 1e-10
TRACE_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class OverlapOperator:
    space: LatticeSpace
    D: np.ndarray          # (1/a)(1 + gamma sgn)
    Gamma: np.ndarray      # gamma/2 - sgn/2
    sgn: np.ndarray
    gamma: np.ndarray
    M: float
    min_abs_eig: float     # min |lambda(H_W(-M))|
    source: object = None

    @property
    def a(self) -> float:
        return self.space.a

    @property
    def u(self) -> np.ndarray:
        return self.gamma @ self.sgn

    def operator(self) -> LatticeOperator:
        return LatticeOperator(self.space, self.D, check=False)

    def unitarity_residual(self) -> float:
        u = self.u
        return float(np.abs(u.conj().T @ u - np.eye(u.shape[0])).max())

    def spectrum(self) -> np.ndarray:
        return np.linalg.eigvals(self.D)

    def zero_modes(self, tol: float = 1e-8):
        """Orthonormal basis of ker D (right singular vectors with sigma < tol)."""
        _, sv, vh = np.linalg.svd(self.D)
        return vh[sv < tol].conj().T

    def summary(self) -> dict:
        return {"index": overlap_index(self), "gw_residual": gw_residual(self),
                "min_abs_eig_HW": self.min_abs_eig, "M": self.M, "N": self.space.N}

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def sign_matrix(h: np.ndarray, tol: float = SIGN_TOL):
    """``V diag(sign lambda) V^dagger`` from a full eigendecomposition."""
    lam, vec = np.linalg.eigh(h)
    gap = float(np.abs(lam).min())
    if gap <= tol:
        raise SignUndefined(f"H has a (near) zero mode, min |lambda| = {gap:.3e}")
    s = (vec * np.sign(lam)) @ vec.conj().T
    return 0.5 * (s + s.conj().T), gap


def _from_sign(space, gamma, s, M, gap, source=None) -> OverlapOperator:
    a = space.a
    eye = np.eye(s.shape[0])
    D = (eye + gamma @ s) / a
    Gamma = 0.5 * (gamma - s)
    return OverlapOperator(space=space, D=D, Gamma=Gamma, sgn=s, gamma=gamma,
                           M=float(M), min_abs_eig=gap, source=source)


def build_overlap(lf, rep, M: float = 1.0) -> OverlapOperator:
    fam = WilsonFamily(lf, rep)
    h = fam(-M).dense()
    gamma = fam.gamma.toarray() if hasattr(fam.gamma, "toarray") else np.asarray(fam.gamma)
    s, gap = sign_matrix(h)
    return _from_sign(fam.space, gamma, s, M, gap, source=(lf, M))


def overlap_index(ov: OverlapOperator) -> int:
    """``round(Tr Gamma)``; Tr Gamma = -Tr sgn / 2 since gamma is traceless."""
    tr = np.trace(ov.Gamma)
    k = int(round(tr.real))
    if abs(tr - k) >= TRACE_TOL:
        raise NonIntegerTrace(f"Tr Gamma = {tr} is not an integer")
    return k


def gw_residual(ov: OverlapOperator) -> float:
    """Max-norm of ``gamma D + D gamma - a D gamma D``."""
    g, D, a = ov.gamma, ov.D, ov.a
    return float(np.abs(g @ D + D @ g - a * D @ g @ D).max())


def gw_unitary_residual(ov: OverlapOperator) -> float:
    """Equivalent form: ``u = 1 - aD`` satisfies ``gamma u gamma^{-1} = u^{-1}``."""
    g, a = ov.gamma, ov.a
    u = np.eye(ov.D.shape[0]) - a * ov.D
    try:
        uinv = np.linalg.inv(u)
    except np.linalg.LinAlgError:
        return float("inf")
    return float(np.abs(g @ u @ g - uinv).max())


def corrupt_sign(ov: OverlapOperator, entry: int | None = None) -> OverlapOperator:
    """Negative control: flip the sign of one diagonal matrix element of sgn.

    Flipping the sign of an eigenvalue would give another Hermitian
    involution, which satisfies the relation exactly; flipping a matrix
    element destroys ``sgn^2 = 1`` instead.  The default entry is the
    largest diagonal element in magnitude.
    """
    s = ov.sgn.copy()
    j = int(np.argmax(np.abs(np.diag(s)))) if entry is None else int(entry)
    s[j, j] = -s[j, j]
    return _from_sign(ov.space, ov.gamma, s, ov.M, ov.min_abs_eig, source=ov.source)


def chiral_zero_modes(ov: OverlapOperator, tol: float = 1e-8):
    """Chiralities ``<phi, gamma phi>`` of a chirality-diagonal basis of ker D."""
    z = ov.zero_modes(tol)
    if z.shape[1] == 0:
        return np.empty(0)
    return np.linalg.eigvalsh(z.conj().T @ ov.gamma @ z)
