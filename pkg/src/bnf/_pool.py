"""Order-preserving worker pool shared by the sweep and sampling code."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def resolve_jobs(jobs: int | None = None) -> int:
    """Explicit value, else BNF_JOBS, else the CPU count."""
    if jobs is None:
        env = os.environ.get("BNF_JOBS")
        jobs = int(env) if env else (os.cpu_count() or 1)
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    return jobs


def parallel_map(fn, items, jobs: int | None = 1) -> list:
    """map(fn, items) with results in input order regardless of worker count.

    ``fn`` must be a picklable module-level callable when jobs > 1.
    """
    items = list(items)
    jobs = min(resolve_jobs(jobs), max(len(items), 1))
    if jobs == 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))
