"""Hot-loop kernels with a compiled core and a numpy fallback.

The compiled Cython extension is preferred when built; otherwise the numpy
fallback is used. Selection happens once at import. Override with the
GAILBIAS_KERNELS environment variable: "compiled" (fail if missing),
"python" (force fallback), or "auto" (default).
"""
import os as _os

from gailbias.kernels import fallback as _fallback

CHAIN_EXPERT = _fallback.CHAIN_EXPERT
CHAIN_LOOP = _fallback.CHAIN_LOOP
CHAIN_TERMINATE = _fallback.CHAIN_TERMINATE

_requested = _os.environ.get("GAILBIAS_KERNELS", "auto").strip().lower()

if _requested == "python":
    _impl = _fallback
    BACKEND = "python"
elif _requested in ("auto", "compiled", ""):
    try:
        from gailbias.kernels import _core as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        _impl = _fallback
        BACKEND = "python"
else:
    raise ValueError(f"unknown GAILBIAS_KERNELS value: {_requested!r}")

actor_forward = _impl.actor_forward
gae_scan = _impl.gae_scan
chain_value_iteration = _impl.chain_value_iteration


def get_backend() -> str:
    """Name of the active kernel backend: "compiled" or "python"."""
    return BACKEND
