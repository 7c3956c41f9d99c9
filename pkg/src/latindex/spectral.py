"""Eta invariants and spectral flow of one-parameter Hermitian families."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import EndpointKernel, MethodMismatch, NearZeroMode
from .latops import LatticeOperator, WilsonFamily

ZERO_TOL = 1e-10
MIN_GRID_POINTS = 9
MAX_DEPTH = 12
OVERLAP_MIN = 0.5


def _dense(op):
    if isinstance(op, LatticeOperator):
        return op.dense()
    if sp.issparse(op):
        return op.toarray()
    return np.atleast_2d(np.asarray(op))


def eigenvalues(op) -> np.ndarray:
    return np.linalg.eigvalsh(_dense(op))


def eta(op, zero_tol: float = ZERO_TOL):
    """``#(lambda > 0) - #(lambda < 0)`` of a Hermitian operator, plus ``min |lambda|``."""
    lam = eigenvalues(op)
    gap = float(np.abs(lam).min())
    if gap < zero_tol:
        raise NearZeroMode(f"min |lambda| = {gap:.3e}; eta is ill-defined")
    return int((lam > 0).sum() - (lam < 0).sum()), gap


@dataclass(frozen=True)
class MassGrid:
    M: float
    points: tuple
    max_depth: int = MAX_DEPTH

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", tuple(float(p) for p in pts))
        if self.M <= 0:
            raise ValueError("M must be positive")
        if len(pts) < MIN_GRID_POINTS:
            raise ValueError(f"a mass grid needs at least {MIN_GRID_POINTS} points")
        if pts[0] != -self.M or pts[-1] != self.M:
            raise ValueError("grid endpoints must be exactly -M and +M")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")

    @classmethod
    def uniform(cls, M: float = 1.0, count: int = 65, max_depth: int = MAX_DEPTH):
        pts = np.linspace(-M, M, count)
        pts[0], pts[-1] = -M, M
        return cls(M=float(M), points=tuple(pts), max_depth=max_depth)


@dataclass(frozen=True)
class Crossing:
    m_left: float
    m_right: float
    sign: int
    count: int = 1
    counted: bool = False  # resolved by inertia counting at maximal depth

    def as_dict(self):
        return {"m_left": self.m_left, "m_right": self.m_right, "sign": self.sign,
                "count": self.count, "counted": self.counted}


@dataclass
class FlowResult:
    grid: MassGrid
    window: float
    masses: list
    spectra: list
    crossings: list
    sf: int
    sf_eta: int
    eta_minus: int
    eta_plus: int
    gap_minus: float
    gap_plus: float
    bisections: int = 0
    extra: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "sf": self.sf,
            "eta_minus": self.eta_minus,
            "eta_plus": self.eta_plus,
            "crossings": [c.as_dict() for c in self.crossings],
            "window": self.window,
            "M": self.grid.M,
            "grid_points": len(self.grid.points),
            "evaluated_points": len(self.masses),
            "bisections": self.bisections,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["m", "index", "lambda"])
            for m, lam in zip(self.masses, self.spectra):
                for i, v in enumerate(lam):
                    w.writerow([repr(float(m)), i, repr(float(v))])


class _Point:
    __slots__ = ("m", "lam", "vec")

    def __init__(self, m, lam, vec):
        self.m = m
        self.lam = lam
        self.vec = vec


def _windowed(family, m, window, nudge=0.0):
    """Windowed eigenpairs at m; interior points sitting on an exact zero are nudged."""
    for _ in range(8):
        h = _dense(family(m))
        if h.shape[0] == 1:
            lam = h[0, 0].real
            keep = abs(lam) < window
            lam_w = np.array([lam]) if keep else np.empty(0)
            vec = np.ones((1, 1 if keep else 0), dtype=complex)
        else:
            lam_w, vec = sla.eigh(h, subset_by_value=(-window, window), driver="evr")
        if not nudge or lam_w.size == 0 or np.abs(lam_w).min() > 1e3 * ZERO_TOL:
            break
        m = m + nudge
    return _Point(m, lam_w, vec)


def _components(ov, threshold=0.05):
    """Connected components of the bipartite overlap graph (left i, right j)."""
    nl, nr = ov.shape
    parent = list(range(nl + nr))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in zip(*np.nonzero(ov > threshold)):
        ri, rj = find(i), find(nl + j)
        if ri != rj:
            parent[ri] = rj
    groups = {}
    for x in range(nl + nr):
        groups.setdefault(find(x), ([], []))
        if x < nl:
            groups[find(x)][0].append(x)
        else:
            groups[find(x)][1].append(x - nl)
    return list(groups.values())


def _interval_flow(left: _Point, right: _Point, window, lipschitz):
    """Net upward crossings in (left.m, right.m), or None when tracking is ambiguous."""
    width = right.m - left.m
    reach = lipschitz * width
    if reach >= 2 * window:
        return None  # an eigenvalue could jump across the whole window unseen
    ov = np.abs(left.vec.conj().T @ right.vec) ** 2 if left.lam.size and right.lam.size else \
        np.zeros((left.lam.size, right.lam.size))
    net = 0
    for lc, rc in _components(ov):
        la, ra = left.lam[lc], right.lam[rc]
        if len(lc) != len(rc):
            # traffic through the window edges; nothing can reach zero from there
            if reach >= window or np.abs(la).min(initial=np.inf) < window / 4 or \
                    np.abs(ra).min(initial=np.inf) < window / 4:
                return None
            continue
        block = ov[np.ix_(lc, rc)]
        if block.sum(axis=1).min() < OVERLAP_MIN or block.sum(axis=0).min() < OVERLAP_MIN:
            return None
        change = int((la < 0).sum() - (ra < 0).sum())
        signs_moved = change != 0 or np.any(np.sign(np.sort(la)) != np.sign(np.sort(ra)))
        if not signs_moved and np.abs(la).min() + np.abs(ra).min() <= reach:
            return None  # a branch could dip through zero and back
        net += change
    return net


def spectral_flow(family, grid: MassGrid, window: float | None = None,
                  lipschitz: float | None = None) -> FlowResult:
    """Spectral flow over ``[-M, M]`` by crossing tracking, cross-checked against eta.

    ``family`` maps a mass to a Hermitian operator (LatticeOperator, array or
    sparse matrix).  ``lipschitz`` bounds ``|d lambda / dm|``; by default it
    is ``||H(M) - H(-M)|| / 2M``, exact for affine families such as H_W(m).
    Windowed eigenvectors at neighbouring masses are grouped by overlap;
    intervals whose grouping is ambiguous are bisected (depth <= max_depth),
    and only intervals still ambiguous at maximal depth fall back to
    inertia counting.
    """
    M = grid.M
    h_minus = _dense(family(-M))
    h_plus = _dense(family(M))
    lam_minus = np.linalg.eigvalsh(h_minus)
    lam_plus = np.linalg.eigvalsh(h_plus)
    gap_minus = float(np.abs(lam_minus).min())
    gap_plus = float(np.abs(lam_plus).min())
    if min(gap_minus, gap_plus) < ZERO_TOL:
        raise EndpointKernel(f"zero mode at an endpoint (gaps {gap_minus:.2e}, {gap_plus:.2e})")
    eta_minus = int((lam_minus > 0).sum() - (lam_minus < 0).sum())
    eta_plus = int((lam_plus > 0).sum() - (lam_plus < 0).sum())
    if window is None:
        window = 0.5 * min(gap_minus, gap_plus)
    if lipschitz is None:
        diff = np.linalg.eigvalsh(h_plus - h_minus)
        lipschitz = float(np.abs(diff).max()) / (2 * M)
    lipschitz = max(lipschitz, 1e-12)
    nudge = 1e-7 * M

    points = []
    for k, m in enumerate(grid.points):
        interior = 0 < k < len(grid.points) - 1
        points.append(_windowed(family, m, window, nudge if interior else 0.0))
    evaluated = {p.m: p for p in points}
    crossings: list[Crossing] = []
    bisections = 0

    def inertia(m):
        return int((np.linalg.eigvalsh(_dense(family(m))) < 0).sum())

    def resolve(left: _Point, right: _Point, depth: int):
        nonlocal bisections
        net = _interval_flow(left, right, window, lipschitz)
        if net is None and depth < grid.max_depth:
            p = _windowed(family, 0.5 * (left.m + right.m), window, nudge * 2.0 ** -depth)
            if left.m < p.m < right.m:
                evaluated[p.m] = p
                bisections += 1
                resolve(left, p, depth + 1)
                resolve(p, right, depth + 1)
                return
        if net is None:
            net = inertia(left.m) - inertia(right.m)
            if net:
                crossings.append(Crossing(left.m, right.m, int(np.sign(net)), abs(net), counted=True))
            return
        if net:
            crossings.append(Crossing(left.m, right.m, int(np.sign(net)), abs(net)))

    for left, right in zip(points[:-1], points[1:]):
        resolve(left, right, 0)

    crossings.sort(key=lambda c: c.m_left)
    sf_track = sum(c.sign * c.count for c in crossings)
    twice = eta_plus - eta_minus
    if twice % 2:
        raise MethodMismatch("eta difference is odd")
    sf_eta = twice // 2
    if sf_track != sf_eta:
        raise MethodMismatch(f"tracked spectral flow {sf_track} != (eta+ - eta-)/2 = {sf_eta}")
    masses = sorted(evaluated)
    return FlowResult(
        grid=grid, window=float(window), masses=masses,
        spectra=[evaluated[m].lam for m in masses], crossings=crossings,
        sf=int(sf_track), sf_eta=int(sf_eta), eta_minus=eta_minus, eta_plus=eta_plus,
        gap_minus=gap_minus, gap_plus=gap_plus, bisections=bisections,
    )


def wilson_flow(lf, rep, M: float = 1.0, points: int = 65, **kw) -> FlowResult:
    return spectral_flow(WilsonFamily(lf, rep), MassGrid.uniform(M, points), **kw)


def wilson_index(lf, rep, M: float = 1.0) -> int:
    """Lattice index ``-eta(H_W(-M)) / 2``."""
    e, _ = eta(WilsonFamily(lf, rep)(-M))
    if e % 2:
        raise NearZeroMode("odd eta at -M")
    return -e // 2
