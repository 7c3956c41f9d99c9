"""Truncated continuum Dirac operator gamma(D + m) on the torus.

Two Galerkin bases are used:

* trivial background (any even n, any nc): plane waves ``e^{2 pi i k.x}``
  with ``|k_i| <= K``;
* U(1) flux Q != 0 (n = 2): magnetic Bloch (Landau) functions
  ``Phi_{r,l}(x) = sum_j h_l(x_1 - r/Q - j) e^{2 pi i (r + jQ) x_2}`` for the
  |Q| sectors ``r = 0..|Q|-1``, with h_l the Hermite functions of frequency
  ``omega = 2 pi |Q|``.  They satisfy the twisted periodicity of the fixed
  gauge ``a = (0, -2 pi Q x_1)``, so the twist is absorbed into the basis.
  In a sector, ``nabla_1 = d/du`` and ``nabla_2 = i b u`` with
  ``u = x_1 - l/Q`` and ``b = -2 pi Q``.

A momentum cutoff K is matched to ``floor(pi K^2 / |Q|) + 1`` Landau levels
(equal kinetic energy).  The spinor component whose top level would be
mapped outside the truncation is cut one level lower; the retained block of
D is then exact for the unperturbed operator and the truncated matrix has no
spurious zero modes.

Smooth perturbations ``A cos(2 pi k.x + phase)`` of a connection component
couple basis functions through multiplication by ``e^{2 pi i k.x}``; these
are exact index shifts for plane waves and one-dimensional Hermite overlap
integrals (trapezoid rule, spectrally accurate) for Landau functions.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .clifford import GammaRep
from .errors import AmbiguousKernel, OddDimension, RoughBackground, UnsupportedBackground
from .gauge import ConnectionDescriptor
from .latops import LatticeOperator

ZERO_TOL = 1e-6
CHIRALITY_MIN = 0.99


def landau_levels(K: int, Q: int) -> int:
    return int(np.floor(np.pi * K * K / abs(Q))) + 1


@dataclass(frozen=True, eq=False)
class ContinuumSpace:
    """Truncated orthonormal basis; entries of ``labels`` are (mode, spinor, colour).

    For plane waves ``mode`` is an integer momentum vector, for Landau
    functions it is ``(r, level)``.
    """

    n: int
    K: int
    spinor_dim: int
    nc: int
    basis: str              # "plane" or "landau"
    charge: int
    modes: np.ndarray       # scalar modes, (n_modes, n) or (n_modes, 2)
    keep: np.ndarray        # retained flat indices of the (mode, spinor, colour) product
    levels: int = 0

    @property
    def dim(self) -> int:
        return int(self.keep.size)

    @property
    def omega(self) -> float:
        return 2 * np.pi * abs(self.charge)

    def labels(self):
        full = np.array([(m, s, c) for m in range(len(self.modes))
                         for s in range(self.spinor_dim) for c in range(self.nc)])
        return full[self.keep]

    def inner(self, u, v) -> complex:
        return complex(np.vdot(u, v))

    def norm(self, v) -> float:
        return float(np.linalg.norm(v))

    def restrict(self, mat):
        """Full (mode x spinor x colour) matrix -> retained block."""
        mat = sp.csr_matrix(mat)
        return mat[self.keep][:, self.keep]

    def scalar_values(self, x):
        """Values of the scalar basis functions at points x, shape (npts, n_modes)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.basis == "plane":
            return np.exp(2j * np.pi * x @ self.modes.T)
        Q = self.charge
        q = abs(Q)
        out = np.zeros((x.shape[0], len(self.modes)), dtype=complex)
        x1 = np.mod(x[:, 0], 1.0)
        reach = (np.sqrt(2.0 * self.levels) + 12.0) / np.sqrt(self.omega) + 2
        for r in range(q):
            sel = self.modes[:, 0] == r
            lv = self.modes[sel, 1]
            acc = np.zeros((x.shape[0], lv.size), dtype=complex)
            for j in range(-int(np.ceil(reach)) - 1, int(np.ceil(reach)) + 2):
                u = x1 - r / Q - j
                near = np.abs(u) < reach
                if not near.any():
                    continue
                h = hermite_functions(self.levels, u[near], self.omega)[lv].T
                acc[near] += h * np.exp(2j * np.pi * (r + j * Q) * x[near, 1])[:, None]
            out[:, sel] = acc
        return out

    def evaluate(self, coeffs, x):
        """Section with coefficients ``coeffs`` at points x, shape (npts, spinor, nc)."""
        full = np.zeros(len(self.modes) * self.spinor_dim * self.nc, dtype=complex)
        full[self.keep] = coeffs
        full = full.reshape(len(self.modes), self.spinor_dim, self.nc)
        return np.einsum("pm,msc->psc", self.scalar_values(x), full)


def hermite_functions(levels: int, u, omega: float = 1.0) -> np.ndarray:
    """``h_l(u) = omega^{1/4} psi_l(sqrt(omega) u)`` for l < levels, shape (levels, len(u)).

    The three-term recursion is run with per-point log scaling so that high
    levels far in the tails neither overflow nor lose the Gaussian factor.
    """
    xi = np.sqrt(omega) * np.asarray(u, dtype=float)
    out = np.empty((levels, xi.size))
    logs = -0.5 * xi * xi
    prev = np.zeros(xi.size)
    cur = np.full(xi.size, np.pi ** -0.25)
    out[0] = cur * np.exp(logs)
    for l in range(levels - 1):
        nxt = np.sqrt(2.0 / (l + 1)) * xi * cur - np.sqrt(l / (l + 1.0)) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > 1e150
        if big.any():
            cur[big] *= 1e-150
            prev[big] *= 1e-150
            logs[big] += np.log(1e150)
        out[l + 1] = cur * np.exp(logs)
    return out * omega ** 0.25


def _ladder(levels: int, omega: float):
    """Matrices of ``u`` and ``d/du`` in the first ``levels`` Hermite functions."""
    off = np.sqrt(np.arange(1, levels) / 2.0)
    u = (np.diag(off, 1) + np.diag(off, -1)) / np.sqrt(omega)
    d = (np.diag(off, 1) - np.diag(off, -1)) * np.sqrt(omega)
    return u, d


@lru_cache(maxsize=64)
def _hermite_overlap(levels: int, omega: float, shift: float, k1: int):
    """``int h_l'(u - shift) h_l(u) e^{2 pi i k1 u} du`` for all l', l."""
    width = np.sqrt(2.0 * levels) / np.sqrt(omega)
    R = width + 14.0 / np.sqrt(omega) + abs(shift)
    step = np.pi / (2 * np.sqrt(2.0 * levels * omega) + 2 * np.pi * abs(k1) + 12 * np.sqrt(omega))
    u = np.arange(-R, R + step, step)
    h = hermite_functions(levels, u, omega)
    hs = hermite_functions(levels, u - shift, omega)
    return (hs * np.exp(2j * np.pi * k1 * u)) @ h.T * step


def _check_background(desc: ConnectionDescriptor, rep: GammaRep, K: int):
    if not rep.even:
        raise OddDimension(f"continuum index needs even n, got n={rep.n}")
    if desc.kind not in ("trivial", "u1_flux", "u1_flux_plus_smooth"):
        raise UnsupportedBackground(f"no continuum model for kind {desc.kind!r}")
    if desc.n != rep.n:
        raise UnsupportedBackground(f"descriptor n={desc.n} but gamma rep n={rep.n}")
    for t in desc.perturbation:
        if max(abs(v) for v in t.k) > K / 2:
            raise RoughBackground(f"perturbation momentum {t.k} exceeds K/2 = {K / 2}")


def continuum_space(desc: ConnectionDescriptor, rep: GammaRep, K: int) -> ContinuumSpace:
    _check_background(desc, rep, K)
    ns, nc, Q = rep.spinor_dim, desc.nc, desc.flux
    if Q == 0:
        rng = np.arange(-K, K + 1)
        modes = np.stack(np.meshgrid(*([rng] * desc.n), indexing="ij"), -1).reshape(-1, desc.n)
        keep = np.arange(len(modes) * ns * nc)
        return ContinuumSpace(desc.n, K, ns, nc, "plane", 0, modes, keep)
    L = landau_levels(K, Q)
    modes = np.array([(r, l) for r in range(abs(Q)) for l in range(L)])
    # drop the top level of the spinor component whose D-image leaves the truncation
    drop = 1 if Q > 0 else 0
    keep = [i for i, (m, s) in enumerate((m, s) for m in range(len(modes)) for s in range(ns))
            if not (s == drop and modes[m, 1] == L - 1)]
    return ContinuumSpace(2, K, ns, 1, "landau", Q, modes, np.array(keep), levels=L)


def _multiplier(space: ContinuumSpace, k) -> sp.csr_matrix:
    """Scalar multiplication by ``e^{2 pi i k.x}`` on the mode basis."""
    k = np.asarray(k, dtype=int)
    modes = space.modes
    if space.basis == "plane":
        lookup = {tuple(m): i for i, m in enumerate(modes)}
        rows, cols = [], []
        for i, m in enumerate(modes):
            j = lookup.get(tuple(m + k))
            if j is not None:
                rows.append(j)
                cols.append(i)
        return sp.csr_matrix((np.ones(len(rows), complex), (rows, cols)), shape=(len(modes),) * 2)
    Q, L = space.charge, space.levels
    q = abs(Q)
    k1, k2 = int(k[0]), int(k[1])
    block = _hermite_overlap(L, space.omega, k2 / Q, k1)
    out = sp.lil_matrix((len(modes), len(modes)), dtype=complex)
    for r in range(q):
        rp = (r + k2) % q
        phase = np.exp(2j * np.pi * k1 * r / Q)
        out[rp * L:(rp + 1) * L, r * L:(r + 1) * L] = phase * block
    return out.tocsr()


def continuum_covariant(space: ContinuumSpace, desc: ConnectionDescriptor):
    """Scalar matrices of ``nabla_i`` (without spinor/colour factors), full mode basis."""
    if space.basis == "plane":
        nab = [sp.diags(2j * np.pi * space.modes[:, i].astype(float)).tocsr()
               for i in range(space.n)]
    else:
        L = space.levels
        u, d = _ladder(L, space.omega)
        eye = sp.identity(abs(space.charge), format="csr")
        nab = [sp.kron(eye, d).tocsr(), sp.kron(eye, 1j * desc.slope * u).tocsr()]
    for t in desc.perturbation:
        mult = 0.5 * t.amplitude * (np.exp(1j * t.phase) * _multiplier(space, t.k)
                                    + np.exp(-1j * t.phase) * _multiplier(space, [-v for v in t.k]))
        nab[t.direction] = nab[t.direction] + 1j * mult
    return nab


def continuum_dirac(desc: ConnectionDescriptor, rep: GammaRep, K: int, m: float = 0.0) -> LatticeOperator:
    """``gamma (D + m)`` in the truncated basis, as a Hermitian operator."""
    space = continuum_space(desc, rep, K)
    gamma = rep.require_chirality()
    nab = continuum_covariant(space, desc)
    colour = sp.identity(space.nc, format="csr")
    D = sum(sp.kron(sp.kron(nb, rep.gammas[i]), colour) for i, nb in enumerate(nab))
    G = sp.kron(sp.kron(sp.identity(len(space.modes)), gamma), colour)
    H = space.restrict(G @ D + m * G)
    H = 0.5 * (H + H.conj().T)
    mat = H.toarray() if space.dim <= 8192 else H.tocsr()
    return LatticeOperator(space, mat, hermitian=True, check=False)


def continuum_gamma(space: ContinuumSpace, rep: GammaRep) -> np.ndarray:
    """Diagonal of the chirality operator in the retained basis."""
    g = np.real(np.diag(rep.require_chirality()))
    full = np.tile(np.repeat(g, space.nc), len(space.modes))
    return full[space.keep]


def continuum_index(desc: ConnectionDescriptor, rep: GammaRep, K: int,
                    zero_tol: float = ZERO_TOL) -> int:
    """Trace of gamma on the numerical kernel of gamma D (|lambda| < zero_tol)."""
    op = continuum_dirac(desc, rep, K, 0.0)
    lam, vec = np.linalg.eigh(op.dense())
    ab = np.abs(lam)
    grey = (ab >= zero_tol) & (ab < 10 * zero_tol)
    if grey.any():
        raise AmbiguousKernel(f"{grey.sum()} eigenvalues in [{zero_tol:g}, {10 * zero_tol:g})")
    z = vec[:, ab < zero_tol]
    if z.shape[1] == 0:
        return 0
    g = continuum_gamma(op.space, rep)
    chir = np.linalg.eigvalsh(z.conj().T @ (g[:, None] * z))
    if np.any(np.abs(chir) <= CHIRALITY_MIN):
        raise AmbiguousKernel(f"zero-mode chiralities {chir} not within 0.99 of +-1")
    return int(np.sign(chir).sum())
