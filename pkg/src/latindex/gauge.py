"""Continuum gauge data, generalized link variables and lattice link fields.

``u1_flux(Q)`` is the line bundle on T^2 with first Chern number
``Q = (i / 2 pi) int F``.  Its connection ``A = i a`` is written in the fixed gauge

    a(x) = (0, -2 pi Q x_1),         x in [0, 1)^2,

with covariant derivative ``d + i a``.  Sections obey the twisted
periodicity ``phi(x + e_1) = exp(2 pi i Q x_2) phi(x)`` and
``phi(x + e_2) = phi(x)``; the twist sits on the x_1 = 0 seam.  Link
variables are parallel transports ``U(x, y) = exp(i int_x^y a)`` along the
straight segment (shortest periodic image), so that
``U(z, z + e_i a) phi(z + e_i a) ~ phi(z) + a (d_i + i a_i) phi(z)``.
Individual links depend on the seam placement; plaquettes and spectra do
not.  Plaquettes are holonomies of counter-clockwise loops, whose phases
add up to ``2 pi Q``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    InvalidDescriptor,
    NonUnitaryGauge,
    RoughField,
    SpacingTooCoarse,
)

KINDS = ("trivial", "u1_flux", "u1_flux_plus_smooth", "external")
DEFAULT_A0 = 0.5


@dataclass(frozen=True)
class FourierTerm:
    """One smooth periodic connection mode ``a_dir(x) += amp cos(2 pi k.x + phase)``."""

    direction: int
    k: tuple
    amplitude: float
    phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(int(v) for v in self.k))


@dataclass(frozen=True, eq=False)
class ConnectionDescriptor:
    kind: str
    n: int = 2
    nc: int = 1
    charge: int = 0
    perturbation: tuple = ()
    table: "LinkField | None" = None
    group: str = "U1"

    def __post_init__(self):
        object.__setattr__(self, "perturbation", tuple(self.perturbation))
        if self.kind not in KINDS:
            raise InvalidDescriptor(f"unknown connection kind {self.kind!r}")
        if self.n < 1 or self.nc < 1:
            raise InvalidDescriptor("n and nc must be positive")
        if self.kind in ("u1_flux", "u1_flux_plus_smooth"):
            if self.n != 2 or self.nc != 1:
                raise InvalidDescriptor("u1_flux requires n = 2 and nc = 1")
            if int(self.charge) != self.charge:
                raise InvalidDescriptor("flux charge must be an integer")
        if self.kind == "u1_flux_plus_smooth":
            for term in self.perturbation:
                if not isinstance(term, FourierTerm):
                    raise InvalidDescriptor("perturbation entries must be FourierTerm")
                if not 0 <= term.direction < self.n or len(term.k) != self.n:
                    raise InvalidDescriptor(f"bad perturbation term {term}")
                if not np.isfinite(term.amplitude):
                    raise InvalidDescriptor("perturbation amplitude must be finite")
        elif self.perturbation:
            raise InvalidDescriptor(f"kind {self.kind!r} takes no perturbation")
        if self.kind == "external":
            if self.table is None:
                raise InvalidDescriptor("external descriptor needs a link table")
            if (self.table.n, self.table.nc) != (self.n, self.nc):
                raise InvalidDescriptor("table shape does not match descriptor")

    @classmethod
    def trivial(cls, n=2, nc=1):
        return cls("trivial", n=n, nc=nc, group="trivial")

    @classmethod
    def u1_flux(cls, charge):
        return cls("u1_flux", charge=int(charge))

    @classmethod
    def u1_flux_plus_smooth(cls, charge, terms):
        return cls("u1_flux_plus_smooth", charge=int(charge), perturbation=tuple(terms))

    @classmethod
    def external(cls, table, group=None):
        return cls("external", n=table.n, nc=table.nc, table=table,
                   group=group or table.group)

    @property
    def abelian(self) -> bool:
        return self.kind in ("u1_flux", "u1_flux_plus_smooth") or (
            self.kind == "trivial" and self.nc == 1)

    @property
    def flux(self) -> int:
        return self.charge if self.kind in ("u1_flux", "u1_flux_plus_smooth") else 0

    @property
    def slope(self) -> float:
        """Coefficient b of the background gauge ``a = (0, b x_1)``, ``b = -2 pi Q``."""
        return -2 * np.pi * self.flux

    def connection(self, x):
        """Real connection components ``a_i(x)`` (abelian kinds), shape (..., n)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        if self.kind == "external":
            raise InvalidDescriptor("external tables carry no continuum connection")
        if self.flux:
            out[..., 1] += self.slope * np.mod(x[..., 0], 1.0)
        for t in self.perturbation:
            arg = 2 * np.pi * (x @ np.asarray(t.k, float)) + t.phase
            out[..., t.direction] += t.amplitude * np.cos(arg)
        return out

    def field_strength(self, x):
        """Curvature ``f_12 = d_1 a_2 - d_2 a_1`` of an abelian n = 2 connection."""
        x = np.asarray(x, dtype=float)
        f = np.full(x.shape[:-1], self.slope, dtype=float)
        for t in self.perturbation:
            arg = 2 * np.pi * (x @ np.asarray(t.k, float)) + t.phase
            # d_j [A cos(arg)] = -A 2 pi k_j sin(arg)
            if t.direction == 1:
                f += -t.amplitude * 2 * np.pi * t.k[0] * np.sin(arg)
            elif t.direction == 0:
                f -= -t.amplitude * 2 * np.pi * t.k[1] * np.sin(arg)
        return f

    def perturbation_curvature_bound(self) -> float:
        """Upper bound on ``|f_12|`` coming from the Fourier perturbation alone."""
        total = 0.0
        for t in self.perturbation:
            other = t.k[0] if t.direction == 1 else t.k[1]
            total += abs(t.amplitude) * 2 * np.pi * abs(other)
        return total


def _min_image(d):
    return d - np.round(d)


class GeneralizedLink:
    """Parallel transport ``U(x, y)`` for points closer than the stripe width a0."""

    def __init__(self, desc: ConnectionDescriptor, a0: float = DEFAULT_A0):
        self.desc = desc
        self.a0 = float(a0)

    @property
    def n(self):
        return self.desc.n

    @property
    def nc(self):
        return self.desc.nc

    def phase(self, x, y):
        """Transport phase of an abelian link, broadcasting over leading axes."""
        desc = self.desc
        if not desc.abelian:
            raise InvalidDescriptor("phase() needs an abelian descriptor")
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        xb = np.mod(x, 1.0)
        d = _min_image(y - x)
        if np.any(np.linalg.norm(d, axis=-1) >= self.a0):
            raise SpacingTooCoarse("points farther apart than the stripe width a0")
        theta = np.zeros(np.broadcast_shapes(xb.shape, d.shape)[:-1])
        if desc.flux:
            b = desc.slope
            yt = xb + d
            # seam crossings: phi(y + k e_1) = exp(-i k b y_2) phi(y)
            k1 = np.floor(yt[..., 0])
            yb2 = np.mod(yt[..., 1], 1.0)
            theta = theta + b * (d[..., 1] * (xb[..., 0] + 0.5 * d[..., 0]) - k1 * yb2)
        for t in desc.perturbation:
            kv = np.asarray(t.k, float)
            beta = 2 * np.pi * (d @ kv)
            mid = 2 * np.pi * (xb @ kv) + t.phase + 0.5 * beta
            theta = theta + t.amplitude * d[..., t.direction] * np.cos(mid) * np.sinc(beta / (2 * np.pi))
        return theta

    def __call__(self, x, y):
        desc = self.desc
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if desc.kind == "external":
            return self._table_link(x, y)
        lead = np.broadcast_shapes(x.shape, y.shape)[:-1]
        if desc.kind == "trivial" and desc.nc > 1:
            d = _min_image(y - x)
            if np.any(np.linalg.norm(d, axis=-1) >= self.a0):
                raise SpacingTooCoarse("points farther apart than the stripe width a0")
            return np.broadcast_to(np.eye(desc.nc, dtype=complex), lead + (desc.nc, desc.nc)).copy()
        return np.exp(1j * self.phase(x, y))[..., None, None]

    def _table_link(self, x, y):
        lf = self.desc.table
        N = lf.N
        xs = np.asarray(x) * N
        ys = np.asarray(y) * N
        xi = np.rint(xs)
        yi = np.rint(ys)
        if np.abs(xs - xi).max(initial=0) > 1e-9 or np.abs(ys - yi).max(initial=0) > 1e-9:
            raise InvalidDescriptor("external tables are only defined on lattice pairs")
        xi = np.mod(xi.astype(int), N)
        yi = np.mod(yi.astype(int), N)
        xi, yi = np.broadcast_arrays(xi, yi)
        lead = xi.shape[:-1]
        out = np.empty(lead + (lf.nc, lf.nc), dtype=complex)
        for idx in np.ndindex(lead):
            zx, zy = xi[idx], yi[idx]
            diff = np.mod(zy - zx + N // 2, N) - N // 2
            nz = np.flatnonzero(diff)
            if nz.size == 0:
                out[idx] = np.eye(lf.nc)
            elif nz.size == 1 and abs(diff[nz[0]]) == 1:
                i = nz[0]
                if diff[i] == 1:
                    out[idx] = lf.links[tuple(zx) + (i,)]
                else:
                    out[idx] = lf.links[tuple(zy) + (i,)].conj().T
            else:
                raise InvalidDescriptor("external tables only connect nearest neighbours")
        return out

    def wilson_triangle(self, x, y, z):
        """Holonomy ``U(x, y) U(y, z) U(z, x)`` around a small triangle."""
        return self(x, y) @ self(y, z) @ self(z, x)


def make_generalized_link(desc: ConnectionDescriptor, a0: float = DEFAULT_A0) -> GeneralizedLink:
    if not isinstance(desc, ConnectionDescriptor):
        raise InvalidDescriptor("expected a ConnectionDescriptor")
    return GeneralizedLink(desc, a0)


@dataclass(frozen=True, eq=False)
class LinkField:
    """Lattice links ``U(z, z + e_i a)``; ``links`` has shape (N,)*n + (n, nc, nc)."""

    N: int
    n: int
    nc: int
    links: np.ndarray
    desc: ConnectionDescriptor | None = field(default=None, repr=False)
    group: str = "U1"

    def __post_init__(self):
        expected = (self.N,) * self.n + (self.n, self.nc, self.nc)
        if self.links.shape != expected:
            raise InvalidDescriptor(f"links shape {self.links.shape} != {expected}")
        self.links.setflags(write=False)

    @property
    def a(self) -> float:
        return 1.0 / self.N

    @property
    def volume(self) -> int:
        return self.N ** self.n

    def sites(self):
        """Site coordinates ``z`` in [0, 1)^n in row-major (lexicographic) order."""
        grids = np.meshgrid(*([np.arange(self.N)] * self.n), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1) * self.a

    def unitarity_residual(self) -> float:
        u = self.links
        prod = u @ np.conj(np.swapaxes(u, -1, -2))
        return float(np.abs(prod - np.eye(self.nc)).max())


def discretize(link: GeneralizedLink, N: int) -> LinkField:
    desc = link.desc
    n, nc = desc.n, desc.nc
    a = 1.0 / N
    if desc.kind == "external":
        if desc.table.N != N:
            raise InvalidDescriptor(f"external table has N={desc.table.N}, requested {N}")
        return desc.table
    if a >= link.a0:
        raise SpacingTooCoarse(f"a = 1/{N} is not below the stripe width {link.a0}")
    sites = np.stack(np.meshgrid(*([np.arange(N) * a] * n), indexing="ij"), axis=-1)
    links = np.empty((N,) * n + (n, nc, nc), dtype=complex)
    for i in range(n):
        step = np.zeros(n)
        step[i] = a
        links[..., i, :, :] = link(sites, sites + step)
    if desc.kind == "trivial":
        links[...] = np.eye(nc)
    return LinkField(N=N, n=n, nc=nc, links=links, desc=desc, group=desc.group)


def _shift(arr, j, n):
    # arr[z + e_j] along site axis j
    return np.roll(arr, -1, axis=j)


def plaquettes(lf: LinkField):
    """Counter-clockwise holonomies ``U_j(z) U_i(z+j) U_j(z+i)^-1 U_i(z)^-1``, keyed by (i, j), i < j."""
    out = {}
    U = lf.links
    for i in range(lf.n):
        for j in range(i + 1, lf.n):
            ui = U[..., i, :, :]
            uj = U[..., j, :, :]
            uj_i = _shift(uj, i, lf.n)
            ui_j = _shift(ui, j, lf.n)
            dag = lambda m: np.conj(np.swapaxes(m, -1, -2))
            out[(i, j)] = uj @ ui_j @ dag(uj_i) @ dag(ui)
    return out


def plaquette_angles(lf: LinkField) -> np.ndarray:
    if lf.n != 2 or lf.nc != 1:
        raise InvalidDescriptor("plaquette angles need n = 2 and nc = 1")
    return np.angle(plaquettes(lf)[(0, 1)][..., 0, 0])


def plaquette_charge(lf: LinkField):
    """Integer topological charge and its pre-rounding residual."""
    theta = plaquette_angles(lf)
    if np.abs(theta).max() >= np.pi * (1 - 1e-6):
        raise RoughField("a plaquette angle reaches pi; the charge is ill-defined")
    raw = theta.sum() / (2 * np.pi)
    q = int(np.rint(raw))
    return q, float(abs(raw - q))


def curvature_bound(link: GeneralizedLink, samples: int, seed: int = 0, r_max: float = 0.02) -> float:
    """Sampled ``max |id - U_W(x,y,z)| / (|x-y||x-z|)`` over small triangles.

    A lower bound for the constant F; for a constant abelian curvature f the
    supremum is ``|f| / 2`` (attained by right-angled triangles).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    n = link.n
    x = rng.random((samples, n))
    r1 = r_max * (0.05 + 0.95 * rng.random(samples))
    r2 = r_max * (0.05 + 0.95 * rng.random(samples))
    u = rng.normal(size=(samples, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    v = rng.normal(size=(samples, n))
    if n > 1:
        # half of the triangles right-angled: those approach the supremum
        w = v - (v * u).sum(axis=1, keepdims=True) * u
        v = np.where((np.arange(samples) % 2 == 0)[:, None], w, v)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    y = x + r1[:, None] * u
    z = x + r2[:, None] * v
    hol = link.wilson_triangle(x, y, z)
    eye = np.eye(link.nc)
    norms = np.linalg.norm(eye - hol, ord=2, axis=(-2, -1))
    return float((norms / (r1 * r2)).max())


def _check_unitary(g, tol=1e-10):
    prod = g @ np.conj(np.swapaxes(g, -1, -2))
    return np.abs(prod - np.eye(g.shape[-1])).max() <= tol


def gauge_transform(lf: LinkField, g) -> LinkField:
    """``U'(z, i) = g(z) U(z, i) g(z + e_i a)^-1`` for per-site unitaries g."""
    g = np.asarray(g, dtype=complex)
    expected = (lf.N,) * lf.n + (lf.nc, lf.nc)
    if g.shape != expected:
        raise NonUnitaryGauge(f"gauge array shape {g.shape} != {expected}")
    if not _check_unitary(g):
        raise NonUnitaryGauge("gauge transformation is not unitary")
    new = np.empty_like(lf.links)
    for i in range(lf.n):
        g_next = _shift(g, i, lf.n)
        new[..., i, :, :] = g @ lf.links[..., i, :, :] @ np.conj(np.swapaxes(g_next, -1, -2))
    return LinkField(N=lf.N, n=lf.n, nc=lf.nc, links=new, desc=None, group=lf.group)


def random_gauge(lf: LinkField, rng) -> np.ndarray:
    """Haar-random per-site unitaries (random phases when nc = 1)."""
    shape = (lf.N,) * lf.n
    if lf.nc == 1:
        return np.exp(2j * np.pi * rng.random(shape))[..., None, None]
    z = (rng.normal(size=shape + (lf.nc, lf.nc)) + 1j * rng.normal(size=shape + (lf.nc, lf.nc))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (d / np.abs(d))[..., None, :]


# ---------------------------------------------------------------- link tables

TABLE_MAGIC = "# latindex link table v1"


def write_link_table(lf: LinkField, path) -> None:
    lines = [TABLE_MAGIC, f"n {lf.n}", f"N {lf.N}", f"Nc {lf.nc}", f"group {lf.group}"]
    flat = lf.links.reshape(lf.volume, lf.n, lf.nc * lf.nc)
    for s in range(lf.volume):
        for i in range(lf.n):
            vals = " ".join(f"{v.real:.17e} {v.imag:.17e}" for v in flat[s, i])
            lines.append(f"{s} {i} {vals}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_link_table(path, unitarity_tol: float = 1e-12) -> LinkField:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != TABLE_MAGIC:
        raise InvalidDescriptor("missing link table header")
    header = {}
    body_start = 1
    for body_start in range(1, len(text)):
        parts = text[body_start].split()
        if len(parts) == 2 and parts[0] in ("n", "N", "Nc", "group"):
            header[parts[0]] = parts[1]
        else:
            break
    else:
        body_start = len(text)
    try:
        n, N, nc = int(header["n"]), int(header["N"]), int(header["Nc"])
    except KeyError as exc:
        raise InvalidDescriptor(f"link table header lacks {exc}") from None
    group = header.get("group", "U1")
    vol = N ** n
    links = np.full((vol, n, nc * nc), np.nan, dtype=complex)
    for line in text[body_start:]:
        if not line.strip():
            continue
        parts = line.split()
        s, i = int(parts[0]), int(parts[1])
        vals = np.array(parts[2:], dtype=float)
        if vals.size != 2 * nc * nc:
            raise InvalidDescriptor(f"record for site {s} dir {i} has {vals.size} reals")
        links[s, i] = vals[0::2] + 1j * vals[1::2]
    if np.isnan(links.real).any():
        raise InvalidDescriptor("link table is missing records")
    links = links.reshape((N,) * n + (n, nc, nc))
    lf = LinkField(N=N, n=n, nc=nc, links=links, group=group)
    if lf.unitarity_residual() > unitarity_tol:
        raise InvalidDescriptor("link table contains non-unitary matrices")
    return lf
