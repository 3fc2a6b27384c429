"""Kernel backend selection.

The compiled extension is preferred when present; set WSD_BACKEND=pure (or
=compiled) to force a choice.  Everything downstream calls through the
module-level aliases so the selection happens once, at import.
"""

import os

from . import _kernels_py

_requested = os.environ.get("WSD_BACKEND", "").strip().lower()

_compiled = None
if _requested != "pure":
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None
    if _requested == "compiled" and _compiled is None:
        raise ImportError(
            "WSD_BACKEND=compiled but the georgian_wsd._kernels extension "
            "is not built; run pip install -e . --no-build-isolation"
        )

_impl = _compiled if _compiled is not None else _kernels_py

BACKEND = "compiled" if _compiled is not None else "pure"

rng_fill_u32 = _impl.rng_fill_u32
sgns_train_epoch = _impl.sgns_train_epoch
lstm_layer_forward = _impl.lstm_layer_forward
lstm_layer_backward = _impl.lstm_layer_backward


def backend_name() -> str:
    return BACKEND
