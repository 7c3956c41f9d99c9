"""Lattice difference operators and the Wilson Dirac operator.

Flat index layout is site-major: ``index = (site * spinor_dim + s) * nc + c``
with sites in row-major order over ``(N,)*n``.  Matrices are the plain
(unweighted) matrices of the operators; the L^2 lattice inner product
carries the volume factor ``a^n``, which drops out of adjoints and spectra.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .clifford import GammaRep
from .errors import DimensionMismatch, OddDimension
from .gauge import LinkField

DENSE_LIMIT = 8192


@dataclass(frozen=True)
class LatticeSpace:
    N: int
    n: int
    spinor_dim: int
    nc: int

    @property
    def a(self) -> float:
        return 1.0 / self.N

    @property
    def volume(self) -> int:
        return self.N ** self.n

    @property
    def dim(self) -> int:
        return self.volume * self.spinor_dim * self.nc

    def index(self, z, s, c):
        site = np.ravel_multi_index(tuple(np.asarray(z).T), (self.N,) * self.n)
        return (site * self.spinor_dim + s) * self.nc + c

    def inner(self, u, v) -> complex:
        """Volume-weighted product ``a^n sum_z (u(z), v(z))``."""
        return self.a ** self.n * np.vdot(u, v)

    def norm(self, v) -> float:
        return float(np.sqrt(self.a ** self.n) * np.linalg.norm(v))

    def neighbours(self):
        """Forward and backward neighbour tables, each of shape (volume, n)."""
        idx = np.arange(self.volume).reshape((self.N,) * self.n)
        fwd = np.stack([np.roll(idx, -1, axis=i).ravel() for i in range(self.n)], axis=1)
        bwd = np.stack([np.roll(idx, 1, axis=i).ravel() for i in range(self.n)], axis=1)
        return fwd, bwd


def lattice_space(lf: LinkField, rep: GammaRep) -> LatticeSpace:
    if lf.n != rep.n:
        raise DimensionMismatch(f"link field n={lf.n} but gamma rep n={rep.n}")
    return LatticeSpace(N=lf.N, n=lf.n, spinor_dim=rep.spinor_dim, nc=lf.nc)


class LatticeOperator:
    """A matrix on a lattice (or truncated continuum) space."""

    def __init__(self, space, matrix, hermitian: bool = False, check: bool = True):
        self.space = space
        if not sp.issparse(matrix):
            matrix = np.asarray(matrix)
        if matrix.shape != (space.dim, space.dim):
            raise DimensionMismatch(f"matrix {matrix.shape} does not fit dim {space.dim}")
        self.matrix = matrix
        self.hermitian = hermitian
        if hermitian and check:
            res = self.hermiticity_residual()
            if res >= 1e-12 * max(1.0, self.scale()):
                raise ValueError(f"operator flagged hermitian but |M - M^H| = {res:.3e}")

    @property
    def sparse(self) -> bool:
        return sp.issparse(self.matrix)

    @property
    def dim(self) -> int:
        return self.space.dim

    def scale(self) -> float:
        m = self.matrix
        return float(abs(m).max()) if self.sparse else float(np.abs(m).max(initial=0.0))

    def hermiticity_residual(self) -> float:
        m = self.matrix
        if self.sparse:
            d = (m - m.conj().T).tocoo()
            return float(np.abs(d.data).max(initial=0.0))
        return float(np.abs(m - m.conj().T).max(initial=0.0))

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.sparse else self.matrix

    def tosparse(self):
        return self.matrix.tocsr() if self.sparse else sp.csr_matrix(self.matrix)

    def __matmul__(self, v):
        return apply(self, v)


def _store(matrix):
    matrix = sp.csr_matrix(matrix)
    if matrix.shape[0] <= DENSE_LIMIT:
        return matrix.toarray()
    return matrix


def apply(opr: LatticeOperator, v):
    v = np.asarray(v)
    if v.shape[0] != opr.dim:
        raise DimensionMismatch(f"vector of length {v.shape[0]} for operator of dim {opr.dim}")
    return opr.matrix @ v


def identity_operator(space) -> LatticeOperator:
    return LatticeOperator(space, _store(sp.identity(space.dim, dtype=complex)), hermitian=True)


# ------------------------------------------------------------------ assembly

def spinor_matrix(space: LatticeSpace, c) -> sp.csr_matrix:
    """``id_site (x) c (x) id_color`` as a sparse matrix."""
    return sp.kron(sp.kron(sp.identity(space.volume), sp.csr_matrix(c)),
                   sp.identity(space.nc)).tocsr()


def shift_matrix(lf: LinkField, rep: GammaRep, i: int) -> sp.csr_matrix:
    """Parallel-transported shift ``(U_i phi)(z) = U(z, z + e_i a) phi(z + e_i a)``."""
    space = lattice_space(lf, rep)
    fwd, _ = space.neighbours()
    links = lf.links.reshape(space.volume, lf.n, lf.nc, lf.nc)[:, i]
    eye_s = np.eye(space.spinor_dim)
    blocks = np.einsum("st,vcd->vsctd", eye_s, links).reshape(
        space.volume, space.spinor_dim * lf.nc, space.spinor_dim * lf.nc)
    indptr = np.arange(space.volume + 1)
    return sp.bsr_matrix((blocks, fwd[:, i], indptr), shape=(space.dim, space.dim)).tocsr()


def _diff_matrices(lf, rep, i):
    u = shift_matrix(lf, rep, i)
    eye = sp.identity(u.shape[0], dtype=complex, format="csr")
    fwd = (u - eye) / lf.a
    bwd_adj = (u.conj().T - eye) / lf.a
    return fwd.tocsr(), bwd_adj.tocsr()


def forward_diff(lf: LinkField, rep: GammaRep, i: int) -> LatticeOperator:
    """``nabla_i = (U_i - id) / a``."""
    space = lattice_space(lf, rep)
    return LatticeOperator(space, _store(_diff_matrices(lf, rep, i)[0]))


def backward_diff(lf: LinkField, rep: GammaRep, i: int) -> LatticeOperator:
    """The adjoint ``nabla_i^* = (U_i^-1 - id) / a``.

    The backward difference proper is ``-nabla_i^*``, acting as
    ``[phi(z) - U(z - e_i a, z)^-1 phi(z - e_i a)] / a``.
    """
    space = lattice_space(lf, rep)
    return LatticeOperator(space, _store(_diff_matrices(lf, rep, i)[1]))


class WilsonAssembly:
    """Sparse building blocks ``nabla_i``, ``nabla_i^*``, ``c_i`` and ``gamma`` for one field."""

    def __init__(self, lf: LinkField, rep: GammaRep):
        self.lf = lf
        self.rep = rep
        self.space = lattice_space(lf, rep)
        pairs = [_diff_matrices(lf, rep, i) for i in range(lf.n)]
        self.nabla = [p[0] for p in pairs]
        self.nabla_star = [p[1] for p in pairs]
        self.c = [spinor_matrix(self.space, g) for g in rep.gammas]

    @cached_property
    def gamma(self):
        return spinor_matrix(self.space, self.rep.require_chirality())

    @cached_property
    def naive(self):
        return sum(self.c[i] @ (self.nabla[i] - self.nabla_star[i]) / 2 for i in range(self.lf.n)).tocsr()

    @cached_property
    def wilson(self):
        return sum(-(self.nabla[i] + self.nabla_star[i]) / 2 for i in range(self.lf.n)).tocsr()

    @cached_property
    def wilson_laplacian_form(self):
        return sum(self.lf.a / 2 * (self.nabla_star[i] @ self.nabla[i]) for i in range(self.lf.n)).tocsr()

    @cached_property
    def dirac(self):
        return (self.naive + self.wilson).tocsr()

    @cached_property
    def hermitian_dirac(self):
        return (self.gamma @ self.dirac).tocsr()


def naive_dirac(lf: LinkField, rep: GammaRep) -> LatticeOperator:
    asm = WilsonAssembly(lf, rep)
    return LatticeOperator(asm.space, _store(asm.naive))


def wilson_term(lf: LinkField, rep: GammaRep) -> LatticeOperator:
    """``W = sum_i -(nabla_i + nabla_i^*) / 2`` (Wilson parameter r = 1)."""
    asm = WilsonAssembly(lf, rep)
    return LatticeOperator(asm.space, _store(asm.wilson), hermitian=True)


class WilsonFamily:
    """The massive family ``m -> H_W(m) = gamma (D_a + W + m)`` on one field.

    Assembles ``gamma D_W`` once; evaluating at a mass only adds ``m gamma``.
    """

    def __init__(self, lf: LinkField, rep: GammaRep):
        if not rep.even:
            raise OddDimension(f"H_W needs even n, got n={rep.n}")
        self.lf = lf
        self.rep = rep
        self.assembly = WilsonAssembly(lf, rep)
        self.space = self.assembly.space
        self._h0 = _store(self.assembly.hermitian_dirac)
        self._gamma = _store(self.assembly.gamma)

    @property
    def gamma(self):
        return self._gamma

    def matrix(self, m: float):
        return self._h0 + m * self._gamma

    def __call__(self, m: float) -> LatticeOperator:
        return LatticeOperator(self.space, self.matrix(m), hermitian=True, check=False)


def wilson_dirac(lf: LinkField, rep: GammaRep, m: float) -> LatticeOperator:
    """Hermitian massive Wilson Dirac operator ``H_W(m) = gamma (D_a + W + m)``."""
    if not rep.even:
        raise OddDimension(f"H_W needs even n, got n={rep.n}")
    asm = WilsonAssembly(lf, rep)
    h = asm.hermitian_dirac + m * asm.gamma
    return LatticeOperator(asm.space, _store(h), hermitian=True)


class WilsonStencil:
    """Matrix-free ``H_W(m)`` backed by the hopping kernel (compiled when available)."""

    def __init__(self, lf: LinkField, rep: GammaRep, m: float, backend=None):
        if not rep.even:
            raise OddDimension(f"H_W needs even n, got n={rep.n}")
        self.space = lattice_space(lf, rep)
        self.m = float(m)
        self.backend = backend
        self._links = lf.links.reshape(self.space.volume, lf.n, lf.nc, lf.nc)
        self._fwd, self._bwd = self.space.neighbours()
        self._gammas = np.stack(rep.gammas)
        self._chir = rep.chirality

    @property
    def shape(self):
        return (self.space.dim, self.space.dim)

    def apply(self, v):
        v = np.asarray(v, dtype=complex)
        if v.shape[0] != self.space.dim:
            raise DimensionMismatch(f"vector of length {v.shape[0]} for dim {self.space.dim}")
        psi = v.reshape(self.space.volume, self.space.spinor_dim, self.space.nc)
        out = kernels.wilson_apply(self._links, self._fwd, self._bwd, self._gammas,
                                   self._chir, self.space.a, self.m, psi, backend=self.backend)
        return out.reshape(-1)

    def linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator(self.shape, matvec=self.apply, rmatvec=self.apply, dtype=complex)


# ------------------------------------------------------- a priori estimate

def _spectral_norm(m) -> float:
    m = sp.csr_matrix(m)
    if m.nnz == 0:
        return 0.0
    if m.shape[0] <= 64:
        return float(np.linalg.norm(m.toarray(), 2))
    gram = (m.conj().T @ m).tocsr()
    val = spla.eigsh(gram, k=1, which="LA", return_eigenvectors=False, tol=1e-10)
    return float(np.sqrt(max(val[0], 0.0)))


def commutator_constant(lf: LinkField, rep: GammaRep) -> float:
    """``C0``: the largest operator norm among ``[nabla_i, nabla_j]``,
    ``[nabla_i, nabla_j^*]`` and ``[nabla_i^*, nabla_j^*]`` over all i, j."""
    asm = WilsonAssembly(lf, rep)
    c0 = 0.0
    for i in range(lf.n):
        for j in range(lf.n):
            for x, y in ((asm.nabla[i], asm.nabla[j]),
                         (asm.nabla[i], asm.nabla_star[j]),
                         (asm.nabla_star[i], asm.nabla_star[j])):
                c0 = max(c0, _spectral_norm(x @ y - y @ x))
    return c0


def a_priori_constant(n: int, c0: float) -> float:
    return (3.5 * n * n - 1.5 * n) * c0 + 1.0


def a_priori_check(lf: LinkField, rep: GammaRep, trials: int = 1000, seed: int = 0) -> dict:
    """Test ``sum_i |nabla_i phi|^2 <= 2 |gamma D_W phi|^2 + C |phi|^2`` on random phi.

    Random vectors are mixed with smooth (low-momentum) ones so that the
    check is not dominated by rough fields.
    """
    asm = WilsonAssembly(lf, rep)
    space = asm.space
    c0 = commutator_constant(lf, rep)
    const = a_priori_constant(lf.n, c0)
    rng = np.random.default_rng(seed)
    phis = rng.normal(size=(space.dim, trials)) + 1j * rng.normal(size=(space.dim, trials))
    # smooth half: heat-kernel filtered noise exp(-W/ a) phi
    smooth = trials // 2
    if smooth:
        w = asm.wilson.toarray() if space.dim <= DENSE_LIMIT else None
        if w is not None:
            lam, vec = np.linalg.eigh(w)
            filt = vec @ (np.exp(-lam * 4 * lf.a)[:, None] * (vec.conj().T @ phis[:, :smooth]))
            phis[:, :smooth] = filt
    hw = asm.hermitian_dirac
    lhs = sum(np.linalg.norm(nb @ phis, axis=0) ** 2 for nb in asm.nabla)
    rhs = 2 * np.linalg.norm(hw @ phis, axis=0) ** 2 + const * np.linalg.norm(phis, axis=0) ** 2
    vol = lf.a ** lf.n
    margin = rhs - lhs
    return {
        "c0": c0,
        "C": const,
        "a": lf.a,
        "threshold_ok": lf.n * c0 * lf.a ** 2 <= 2.0,
        "violations": int((margin < 0).sum()),
        "min_margin": float(vol * margin.min()),
        "max_ratio": float((lhs / rhs).max()),
        "trials": trials,
    }


def export_matrix_market(opr: LatticeOperator, path) -> None:
    scipy.io.mmwrite(str(path), opr.tosparse())
