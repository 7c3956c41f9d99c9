"""Pure numpy implementation of the Wilson hopping kernel (import fallback)."""

import numpy as np


def wilson_apply(links, fwd, bwd, gammas, chirality, a, m, psi):
    """Return ``gamma (D_W + m) psi`` for psi of shape (V, spinor, color).

    links: (V, n, nc, nc); fwd/bwd: (V, n) neighbour tables.
    """
    V, n = fwd.shape
    ns = gammas.shape[1]
    eye = np.eye(ns)
    hop = np.zeros_like(psi)
    for i in range(n):
        u = links[:, i]
        f = np.einsum("vcd,vsd->vsc", u, psi[fwd[:, i]])
        b = np.einsum("vdc,vsd->vsc", u[bwd[:, i]].conj(), psi[bwd[:, i]])
        hop += np.einsum("st,vtc->vsc", eye - gammas[i], f)
        hop += np.einsum("st,vtc->vsc", eye + gammas[i], b)
    res = (m + n / a) * psi - hop / (2 * a)
    return np.einsum("st,vtc->vsc", chirality, res)
