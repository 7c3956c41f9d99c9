"""Hot-loop backend selection.

The compiled extension ``latindex._kernels`` is used when it was built;
otherwise the numpy fallback is imported.  Set ``LATINDEX_KERNEL=python``
to force the fallback.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py.wilson_apply

if os.environ.get("LATINDEX_KERNEL", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        _impl = _compiled.wilson_apply


def wilson_apply(links, fwd, bwd, gammas, chirality, a, m, psi, backend=None):
    """Matrix-free ``gamma (D_W + m) psi``; ``backend`` overrides the import-time choice."""
    fn = _impl
    if backend == "python":
        fn = _kernels_py.wilson_apply
    elif backend == "cython":
        if BACKEND != "cython":
            raise RuntimeError("compiled kernel not available")
        fn = _compiled.wilson_apply
    return fn(
        np.ascontiguousarray(links, dtype=np.complex128),
        np.ascontiguousarray(fwd, dtype=np.int64),
        np.ascontiguousarray(bwd, dtype=np.int64),
        np.ascontiguousarray(gammas, dtype=np.complex128),
        np.ascontiguousarray(chirality, dtype=np.complex128),
        float(a),
        float(m),
        np.ascontiguousarray(psi, dtype=np.complex128),
    )
