"""Deterministic task fan-out over a thread pool.

Work is cut into fixed-size tasks before any thread starts. Task ``i``
draws from ``make_stream(seed, i)`` and results come back in task order,
so the output does not depend on the number of workers.
"""

import os
from concurrent.futures import ThreadPoolExecutor

from .streams import check_positive_int, make_stream

ENV_THREADS = "AIRY_LAB_THREADS"


def resolve_threads(cli_value=None, config_value=None):
    """Thread count: command line, then environment, then config, then CPUs."""
    if cli_value is not None:
        return check_positive_int("threads", cli_value)
    env = os.environ.get(ENV_THREADS)
    if env:
        return check_positive_int(ENV_THREADS, int(env))
    if config_value is not None:
        return check_positive_int("threads", config_value)
    return os.cpu_count() or 1


def task_sizes(total, chunk):
    total = check_positive_int("total", total)
    chunk = check_positive_int("chunk", chunk)
    return [min(chunk, total - s) for s in range(0, total, chunk)]


def map_tasks(func, total, chunk, seed, threads=1, first_task=0):
    """Run ``func(count, rng)`` over fixed-size chunks of ``total`` items.

    Returns the list of results in task order.
    """
    sizes = task_sizes(total, chunk)
    jobs = [(size, first_task + i) for i, size in enumerate(sizes)]

    def run(job):
        size, task = job
        return func(size, make_stream(seed, task))

    if threads <= 1 or len(jobs) == 1:
        return [run(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, jobs))
