"""Hot-path kernel selection: compiled Cython extension when built, otherwise
the pure-Python fallback. Set SATAGG_PURE=1 to force the fallback."""
import os

if os.environ.get("SATAGG_PURE"):
    from .pure import shortest_path_csr
    IMPLEMENTATION = "pure"
else:
    try:
        from ._dijkstra import shortest_path_csr  # type: ignore[no-redef]
        IMPLEMENTATION = "compiled"
    except ImportError:
        from .pure import shortest_path_csr  # type: ignore[no-redef]
        IMPLEMENTATION = "pure"

__all__ = ["shortest_path_csr", "IMPLEMENTATION"]
