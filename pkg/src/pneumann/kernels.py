"""Backend selection for the hot p-energy kernel.

The compiled extension is used when it imports; otherwise the numpy
implementation.  Set ``PNEUMANN_BACKEND=python`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py.p_energy

if os.environ.get("PNEUMANN_BACKEND", "").lower() not in ("python", "numpy"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        _impl = _ckernels.p_energy


def p_energy(cells, grads, vol, u, p, eps, want_grad=True, want_hdiag=False):
    return _impl(cells, grads, vol, u, float(p), float(eps), want_grad, want_hdiag)


def available_backends() -> dict:
    out = {"python": _kernels_py.p_energy}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels.p_energy
    return out
