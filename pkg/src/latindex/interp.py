"""Maps between lattice and continuum sections, and the combined operator.

Implemented for n = 2 abelian backgrounds (trivial, u1_flux,
u1_flux_plus_smooth with nc = 1).  All integrals over the torus use a
tensor Gauss-Legendre rule with ``points`` nodes per lattice cell and axis;
the cutoff function is piecewise linear between lattice points, so the rule
is exact for it and only the smooth factors (transport, basis functions)
contribute quadrature error.

Lattice vectors are arrays of site values (site-major, then spinor); the
lattice inner product carries the weight ``a^n``.  Continuum vectors are
coefficients in the orthonormal truncated basis of :mod:`latindex.continuum`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import lu_factor, lu_solve

from .clifford import GammaRep, build_gamma_rep
from .continuum import ContinuumSpace, continuum_dirac, continuum_space, hermite_functions
from .errors import GapClosed, QuadratureTooCoarse, UnsupportedBackground
from .gauge import GeneralizedLink, discretize, make_generalized_link
from .latops import WilsonAssembly, WilsonFamily

MIN_POINTS = 8
GAP_TOL = 0.05


# ------------------------------------------------------------------ cutoff


@dataclass(frozen=True)
class CutoffRho:
    """``rho_a(x) = prod_i (1/a) max(0, 1 - x_i/a, 1 - (1 - x_i)/a)``, x_i mod 1."""

    a: float

    def axis(self, t):
        t = np.mod(np.asarray(t, dtype=float), 1.0)
        return np.maximum(0.0, np.maximum(1 - t / self.a, 1 - (1 - t) / self.a)) / self.a

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.prod(self.axis(x), axis=-1)

    def partition_residual(self, x) -> float:
        """``max |a^n sum_z rho_a(x - z) - 1|`` over points x, shape (npts, n)."""
        x = np.atleast_2d(x)
        n = x.shape[1]
        N = int(round(1 / self.a))
        per_axis = [self.a * self.axis(x[:, i, None] - np.arange(N) * self.a).sum(axis=1)
                    for i in range(n)]
        return float(np.abs(np.prod(per_axis, axis=0) - 1).max())


def gauss_grid(N: int, points: int = MIN_POINTS):
    """Per-axis nodes and weights of the cellwise Gauss-Legendre rule on [0, 1)."""
    if points < MIN_POINTS:
        raise QuadratureTooCoarse(f"need at least {MIN_POINTS} nodes per cell, got {points}")
    t, w = np.polynomial.legendre.leggauss(points)
    a = 1.0 / N
    nodes = ((np.arange(N)[:, None] + 0.5 * (t + 1)[None, :]) * a).ravel()
    weights = np.tile(0.5 * a * w, N)
    return nodes, weights


def unit_mass_residual(N: int, n: int = 2, points: int = MIN_POINTS) -> float:
    """``|int rho_a(x - z) dx - 1|`` for every site z (the same for all by symmetry)."""
    rho = CutoffRho(1.0 / N)
    nodes, w = gauss_grid(N, points)
    worst = 0.0
    for z in (0.0, rho.a * (N // 2)):
        worst = max(worst, abs((w * rho.axis(nodes - z)).sum() ** n - 1))
    return worst


def neighbour_overlap_sum(N: int, n: int = 2, points: int = MIN_POINTS, offsets: str = "full") -> float:
    """``a^n sum_{e in B} int rho_a(x) rho_a(x - a e) dx`` by quadrature.

    ``offsets="full"`` uses every offset whose support overlaps,
    ``B = {-1, 0, 1}^n``; this equals 1.  ``offsets="axes"`` uses
    ``B = {0} u {+-e_k}``, which equals 1 only for n = 1 (for n = 2 it is 8/9).
    """
    rho = CutoffRho(1.0 / N)
    a = rho.a
    nodes, w = gauss_grid(N, points)
    base = rho.axis(nodes)
    ov = {s: (w * base * rho.axis(nodes - s * a)).sum() for s in (-1, 0, 1)}
    if offsets == "full":
        total = sum(ov.values()) ** n
    elif offsets == "axes":
        total = ov[0] ** n + sum(ov[s] * ov[0] ** (n - 1) for s in (-1, 1) for _ in range(n))
    else:
        raise ValueError(offsets)
    return float(a ** n * total)


# ------------------------------------------------------------------ maps


def _require_supported(desc):
    if desc.n != 2 or desc.nc != 1 or not desc.abelian:
        raise UnsupportedBackground("interpolation maps are implemented for abelian n = 2, nc = 1")


class InterpMaps:
    """Quadrature data for ``f_a`` and ``f_a^*`` on one field and lattice.

    ``R[p, z] = w_p rho_a(x_p - z) U(x_p, z)`` over quadrature points p;
    ``(f_a phi)(x_p) = a^n sum_z R[p, z] phi(z) / w_p`` and
    ``(f_a^* psi)(z) = sum_p conj(R[p, z]) psi(x_p)``.
    """

    def __init__(self, link: GeneralizedLink, N: int, K: int | None = None,
                 rep: GammaRep | None = None, points: int = MIN_POINTS):
        _require_supported(link.desc)
        self.link = link
        self.desc = link.desc
        self.N = N
        self.n = 2
        self.a = 1.0 / N
        self.points = points
        self.rep = rep or build_gamma_rep(2)
        self.lf = discretize(link, N)
        self.K = K
        self.nodes, self.weights = gauss_grid(N, points)
        P = self.nodes.size
        # supporting sites per axis: the two ends of the node's cell
        cell = np.repeat(np.arange(N), points)
        self._cell = cell
        self.rho = CutoffRho(self.a)
        g1, g2 = np.meshgrid(np.arange(P), np.arange(P), indexing="ij")
        self.xp = np.stack([self.nodes[g1.ravel()], self.nodes[g2.ravel()]], -1)
        self.wp = (self.weights[g1] * self.weights[g2]).ravel()
        rows, cols, vals = [], [], []
        for s1 in (0, 1):
            for s2 in (0, 1):
                z1 = (cell[g1.ravel()] + s1) % N
                z2 = (cell[g2.ravel()] + s2) % N
                zc = np.stack([z1, z2], -1) * self.a
                r = self.rho(self.xp - zc)
                u = self.link(self.xp, zc)[..., 0, 0]
                rows.append(np.arange(P * P))
                cols.append(z1 * N + z2)
                vals.append(self.wp * r * u)
        self.R = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                               shape=(P * P, N * N))

    @property
    def volume(self) -> int:
        return self.N ** 2

    @property
    def spinor_dim(self) -> int:
        return self.rep.spinor_dim

    # -- pointwise application
    def f(self, phi):
        """``f_a phi`` at the quadrature points; phi has shape (V, spinor)."""
        phi = np.asarray(phi).reshape(self.volume, -1)
        return self.a ** 2 * (self.R @ phi) / self.wp[:, None]

    def f_star(self, psi_points):
        """``f_a^* psi`` on the lattice from the values of psi at the quadrature points."""
        return self.R.conj().T @ np.asarray(psi_points).reshape(self.R.shape[0], -1)

    def l2_points(self, values) -> float:
        return float(np.sqrt((self.wp * (np.abs(values) ** 2).sum(axis=-1)).sum()))

    def lattice_norm(self, phi) -> float:
        return float(np.sqrt(self.a ** 2 * (np.abs(phi) ** 2).sum()))

    @cached_property
    def gram(self) -> np.ndarray:
        """``f_a^* f_a`` on scalar lattice fields, by quadrature (no truncation)."""
        G = self.a ** 2 * (self.R.conj().T @ sp.diags(1.0 / self.wp) @ self.R)
        return G.toarray()

    def f_norm(self) -> float:
        """Operator norm of ``f_a`` (lattice L^2 -> continuum L^2), sqrt of ||f_a^* f_a||."""
        return float(np.sqrt(np.linalg.eigvalsh(self.gram).max()))

    def adjointness_residual(self, trials: int = 5, seed: int = 0) -> float:
        """``|<f_a phi, psi> - <phi, f_a^* psi>|`` relative, for random pointwise psi."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(trials):
            phi = rng.normal(size=(self.volume, 2)) + 1j * rng.normal(size=(self.volume, 2))
            psi = rng.normal(size=(self.xp.shape[0], 2)) + 1j * rng.normal(size=(self.xp.shape[0], 2))
            lhs = np.sum(self.wp[:, None] * np.conj(self.f(phi)) * psi)
            rhs = self.a ** 2 * np.sum(np.conj(phi) * self.f_star(psi))
            worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-300))
        return worst

    # -- truncated-basis matrices
    def projection(self, space: ContinuumSpace) -> np.ndarray:
        """``V^H R``: rows are scalar continuum modes, columns lattice sites."""
        P = self.nodes.size
        Rt = self.R.toarray().reshape(P, P, self.volume)
        x1, x2 = self.nodes, self.nodes
        if space.basis == "plane":
            k = np.arange(-space.K, space.K + 1)
            E1 = np.exp(-2j * np.pi * np.outer(x1, k))
            E2 = np.exp(-2j * np.pi * np.outer(x2, k))
            T = np.einsum("qk,pqz->pkz", E2, Rt)
            out = np.einsum("pj,pkz->jkz", E1, T)
            return out.reshape(k.size * k.size, self.volume)
        Q, L, om = space.charge, space.levels, space.omega
        out = np.zeros((len(space.modes), self.volume), dtype=complex)
        reach = (np.sqrt(2.0 * L) + 12.0) / np.sqrt(om) + 2
        J = int(np.ceil(reach)) + 1
        for r in range(abs(Q)):
            block = np.zeros((L, self.volume), dtype=complex)
            for j in range(-J, J + 1):
                u = x1 - r / Q - j
                near = np.abs(u) < reach
                if not near.any():
                    continue
                h = hermite_functions(L, u[near], om)
                e = np.exp(-2j * np.pi * (r + j * Q) * x2)
                T = np.einsum("q,pqz->pz", e, Rt[near])
                block += h @ T
            out[r * L:(r + 1) * L] = block
        return out

    def transfer_matrix(self, space: ContinuumSpace) -> np.ndarray:
        """Matrix of ``f_a`` from orthonormal lattice coordinates to basis coefficients."""
        B = self.a ** 2 * self.projection(space)
        F = self.a ** -1.0 * B  # a^{-n/2} B with n = 2
        ns = space.spinor_dim
        full = np.kron(F, np.eye(ns))
        return full[space.keep]


def build_maps(link: GeneralizedLink, N: int, K: int | None = None, rep=None,
               points: int = MIN_POINTS) -> InterpMaps:
    return InterpMaps(link, N, K, rep, points)


# ------------------------------------------------------------------ test sections


def smooth_sections(desc, rep, trials: int, seed: int = 0, band: int = 1):
    """Random band-limited continuum sections: (space, coefficient vectors).

    Plane waves with ``|k_i| <= band`` for the trivial field, the lowest
    ``band + 1`` Landau levels for flux backgrounds.
    """
    space = continuum_space(desc, rep, K=max(band, 2))
    rng = np.random.default_rng(seed)
    labels = space.labels()
    modes = space.modes[labels[:, 0]]
    if space.basis == "plane":
        allowed = np.abs(modes).max(axis=1) <= band
    else:
        allowed = modes[:, 1] <= band
    coeffs = []
    for _ in range(trials):
        c = np.zeros(space.dim, dtype=complex)
        c[allowed] = rng.normal(size=allowed.sum()) + 1j * rng.normal(size=allowed.sum())
        coeffs.append(c / np.linalg.norm(c))
    return space, coeffs


def _fit_order(a_values, errors) -> float:
    return float(np.polyfit(np.log(a_values), np.log(errors), 1)[0])


def check_f_bounds(link: GeneralizedLink, Ns=(4, 8, 16), trials: int = 5, seed: int = 0,
                   rep=None, points: int = MIN_POINTS) -> dict:
    """Uniform bound on ||f_a|| and the a-scaling of ``||(f_a^* f_a - 1) v_a||^2``.

    ``v_a`` are site samples of fixed smooth sections, normalised in the
    lattice L^2_1 norm (mass scale m0 = 1), so the fitted slope measures the
    power of a directly.
    """
    rep = rep or build_gamma_rep(2)
    space, coeffs = smooth_sections(link.desc, rep, trials, seed)
    norms, residuals = [], []
    for N in Ns:
        maps = build_maps(link, N, rep=rep, points=points)
        asm = WilsonAssembly(maps.lf, rep)
        sites = maps.lf.sites()
        vals = space.scalar_values(sites)
        norms.append(maps.f_norm())
        G = maps.gram
        res = []
        for c in coeffs:
            v = np.asarray(space.evaluate(c, sites))[:, :, 0]       # (V, spinor)
            flat = v.reshape(-1)
            l21 = np.linalg.norm(flat) ** 2 + sum(np.linalg.norm(nb @ flat) ** 2 for nb in asm.nabla)
            l21 *= maps.a ** 2
            r = (G @ v) - v
            res.append(maps.lattice_norm(r) ** 2 / l21)
        residuals.append(res)
        del vals
    residuals = np.array(residuals)
    a = 1.0 / np.asarray(Ns, float)
    slopes = [_fit_order(a, residuals[:, i]) for i in range(residuals.shape[1])]
    return {"N": list(Ns), "f_norm": norms, "f_norm_bound": 4.0 ** 2,
            "residuals": residuals.tolist(), "slopes": slopes, "min_slope": min(slopes)}


def check_reconstruction(link: GeneralizedLink, Ns=(4, 8, 16), trials: int = 10, seed: int = 0,
                         rep=None, points: int = MIN_POINTS) -> dict:
    """``||f_a f_a^* psi - psi||_{L^2}`` over N for band-limited psi."""
    rep = rep or build_gamma_rep(2)
    space, coeffs = smooth_sections(link.desc, rep, trials, seed)
    errors = []
    for N in Ns:
        maps = build_maps(link, N, rep=rep, points=points)
        vals = space.scalar_values(maps.xp)
        row = []
        for c in coeffs:
            psi = _point_values(space, vals, c)
            back = maps.f(maps.f_star(psi))
            row.append(maps.l2_points(back - psi))
        errors.append(row)
    errors = np.array(errors)
    decreasing = bool(np.all(np.diff(errors, axis=0) < 0))
    return {"N": list(Ns), "errors": errors.tolist(), "strictly_decreasing": decreasing}


def _point_values(space, scalar_vals, coeffs):
    full = np.zeros(len(space.modes) * space.spinor_dim * space.nc, dtype=complex)
    full[space.keep] = coeffs
    full = full.reshape(len(space.modes), space.spinor_dim * space.nc)
    return scalar_vals @ full


def check_dirac_convergence(link: GeneralizedLink, Ns=(4, 8, 16), trials: int = 5, seed: int = 0,
                            rep=None, points: int = MIN_POINTS, coeffs=None, space=None) -> dict:
    """``||f_a D_W^* f_a^* psi - D^* psi||_{L^2}`` over N and its fitted order in a."""
    rep = rep or build_gamma_rep(2)
    if coeffs is None:
        space, coeffs = smooth_sections(link.desc, rep, trials, seed)
    gamma = rep.require_chirality()
    H = continuum_dirac(link.desc, rep, space.K, 0.0).dense()
    # D = gamma H, and D^* = -D for the continuum Dirac operator
    G = np.kron(np.eye(len(space.modes)), gamma)[np.ix_(space.keep, space.keep)]
    Dstar = -(G @ H)
    errors = []
    for N in Ns:
        maps = build_maps(link, N, rep=rep, points=points)
        asm = WilsonAssembly(maps.lf, rep)
        DW = (asm.naive + asm.wilson)
        DWs = DW.conj().T.tocsr()
        vals = space.scalar_values(maps.xp)
        row = []
        for c in coeffs:
            psi = _point_values(space, vals, c)
            phi = maps.f_star(psi)                         # (V, spinor)
            chi = (DWs @ phi.reshape(-1)).reshape(phi.shape)
            lhs = maps.f(chi)
            rhs = _point_values(space, vals, Dstar @ c)
            row.append(maps.l2_points(lhs - rhs))
        errors.append(row)
    errors = np.array(errors)
    a = 1.0 / np.asarray(Ns, float)
    orders = [_fit_order(a, errors[:, i]) for i in range(errors.shape[1])]
    return {"N": list(Ns), "errors": errors.tolist(), "orders": orders, "min_order": min(orders)}


# ------------------------------------------------------------------ combined operator


def bounded_transform(H: np.ndarray, M0: float = 1.0) -> np.ndarray:
    """``h / (h^2 + M0^2)^{1/2}`` of a Hermitian matrix."""
    lam, vec = np.linalg.eigh(H)
    return (vec * (lam / np.sqrt(lam ** 2 + M0 ** 2))) @ vec.conj().T


def combined_operator(lattice_block, continuum_block, F, t: float) -> np.ndarray:
    """Dense ``H_com = [[-H_lat, t F^H], [t F, H_cont]]``."""
    lat = np.asarray(lattice_block)
    cont = np.asarray(continuum_block)
    return np.block([[-lat, t * F.conj().T], [t * F, cont]])


class StapleProblem:
    """H_com(m, t) for one field with cheap minimal-|eigenvalue| evaluation.

    The continuum block is sparse (block diagonal for unperturbed
    backgrounds), so ``(H_com - sigma)^{-1}`` is applied through the Schur
    complement on the lattice block and the extreme eigenvalues of the
    inverse are found by Lanczos.
    """

    SIGMA = 1.3e-7

    def __init__(self, link: GeneralizedLink, N: int, K: int, rep=None, points: int = MIN_POINTS,
                 transform: bool = False, M0: float = 1.0):
        rep = rep or build_gamma_rep(2)
        self.rep = rep
        self.maps = build_maps(link, N, K, rep, points)
        self.family = WilsonFamily(self.maps.lf, rep)
        self.space = continuum_space(link.desc, rep, K)
        self.F = self.maps.transfer_matrix(self.space)
        self._h0 = sp.csr_matrix(continuum_dirac(link.desc, rep, K, 0.0).tosparse())
        g = np.kron(np.ones(len(self.space.modes)), np.real(np.diag(rep.require_chirality())))
        self._g = sp.diags(g[self.space.keep])
        self.transform = transform
        self.M0 = M0

    def lattice_block(self, m):
        return np.asarray(self.family(m).dense())

    def continuum_block(self, m):
        c = (self._h0 + m * self._g).tocsc()
        if self.transform:
            return sp.csc_matrix(bounded_transform(c.toarray(), self.M0))
        return c

    def dense(self, m, t) -> np.ndarray:
        return combined_operator(self.lattice_block(m), self.continuum_block(m).toarray(), self.F, t)

    def min_abs_eig(self, m: float, t: float, k: int = 6) -> float:
        A = -self.lattice_block(m)
        C = self.continuum_block(m)
        if t == 0:
            la = np.abs(np.linalg.eigvalsh(A)).min()
            lc = _min_abs_sparse(C)
            return float(min(la, lc))
        s = self.SIGMA
        nl, nc_ = A.shape[0], C.shape[0]
        lu_c = spla.splu((C - s * sp.identity(nc_, format="csc")).tocsc())
        B = t * self.F
        CinvB = lu_c.solve(np.ascontiguousarray(B))
        S = A - s * np.eye(nl) - B.conj().T @ CinvB
        lu_s = lu_factor(S)

        def inv(v):
            v = np.asarray(v).ravel()
            vl, vc = v[:nl], v[nl:]
            y = lu_c.solve(vc)
            xl = lu_solve(lu_s, vl - B.conj().T @ y)
            xc = lu_c.solve(vc - B @ xl)
            return np.concatenate([xl, xc])

        op = spla.LinearOperator((nl + nc_,) * 2, matvec=inv, dtype=complex)
        nu = spla.eigsh(op, k=k, which="LM", return_eigenvectors=False, tol=1e-10)
        lam = s + 1.0 / nu
        return float(np.abs(lam).min())


def _min_abs_sparse(C) -> float:
    """Smallest |eigenvalue| of a sparse Hermitian matrix via its connected blocks."""
    from scipy.sparse.csgraph import connected_components
    C = sp.csr_matrix(C)
    ncomp, lab = connected_components(abs(C) > 0, directed=False)
    order = np.argsort(lab, kind="stable")
    bounds = np.searchsorted(lab[order], np.arange(ncomp + 1))
    best = np.inf
    for c in range(ncomp):
        idx = order[bounds[c]:bounds[c + 1]]
        best = min(best, np.abs(np.linalg.eigvalsh(C[idx][:, idx].toarray())).min())
    return float(best)


@dataclass
class StapleReport:
    samples: list          # (m, t, min_abs_eig)
    min_gap: float
    argmin: tuple
    gap_tol: float

    @property
    def ok(self) -> bool:
        return self.min_gap > self.gap_tol

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["m", "t", "min_abs_eig"])
            for m, t, g in self.samples:
                w.writerow([repr(float(m)), repr(float(t)), repr(float(g))])

    def summary(self) -> dict:
        return {"min_gap": self.min_gap, "argmin": list(self.argmin), "gap_tol": self.gap_tol,
                "ok": self.ok, "samples": len(self.samples)}


def staple_points(M: float = 1.0, m_samples: int = 33, t_samples: int = 11):
    ms = np.linspace(-M, M, m_samples)
    ts = np.linspace(0.0, 1.0, t_samples)
    pts = [(float(m), 1.0) for m in ms]
    pts += [(float(s * M), float(t)) for s in (-1, 1) for t in ts[:-1]]
    return pts


def staple_gap_scan(link: GeneralizedLink, N: int, K: int, M: float = 1.0, m_samples: int = 33,
                    t_samples: int = 11, gap_tol: float = GAP_TOL, rep=None, raise_on_close: bool = False,
                    problem: StapleProblem | None = None, points=None) -> StapleReport:
    """Minimal |eigenvalue| of H_com over the staple region {t=1} u {m=+-M}."""
    prob = problem or StapleProblem(link, N, K, rep)
    pts = points if points is not None else staple_points(M, m_samples, t_samples)
    samples = [(m, t, prob.min_abs_eig(m, t)) for m, t in pts]
    i = int(np.argmin([s[2] for s in samples]))
    rep_ = StapleReport(samples, samples[i][2], samples[i][:2], gap_tol)
    if raise_on_close and not rep_.ok:
        raise GapClosed(f"gap {rep_.min_gap:.3e} at (m, t) = {rep_.argmin}", m=rep_.argmin[0],
                        t=rep_.argmin[1], gap=rep_.min_gap)
    return rep_
