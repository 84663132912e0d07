"""Worker-thread budget, capped by the DOODLE_THREADS environment variable."""

from __future__ import annotations

import os


def worker_count() -> int:
    """Number of worker threads kernels may use (>= 1)."""
    raw = os.environ.get("DOODLE_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)
