"""Counter-based random streams and small validation helpers.

Every sampler in the package takes an explicit :class:`numpy.random.Generator`.
Reproducible parallel runs derive one generator per work item from the pair
``(experiment_seed, task_index)`` using the Philox counter-based bit generator,
so the stream of a task never depends on how many workers execute the run.
"""

import math
import numbers

import numpy as np

from .exceptions import ParameterError

_U64 = 1 << 64


def make_stream(experiment_seed, task_index=0):
    """Return the generator for work item ``task_index`` of an experiment.

    The Philox key is the 128-bit concatenation of the two unsigned 64-bit
    integers, so distinct pairs give independent streams.
    """
    seed = int(experiment_seed)
    task = int(task_index)
    if not (0 <= seed < _U64 and 0 <= task < _U64):
        raise ParameterError("seed and task index must be unsigned 64-bit integers")
    return np.random.Generator(np.random.Philox(key=(task << 64) | seed))


def as_generator(rng):
    """Coerce ``None``, an int seed or a Generator into a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return np.random.default_rng()
    if isinstance(rng, numbers.Integral):
        return make_stream(int(rng), 0)
    raise ParameterError(f"cannot use {rng!r} as a random stream")


def check_positive(name, value, allow_inf=False):
    value = float(value)
    if not value > 0 or (math.isinf(value) and not allow_inf) or math.isnan(value):
        raise ParameterError(f"{name} must be positive, got {value}")
    return value


def check_positive_int(name, value, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise ParameterError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ParameterError(f"{name} must be >= {minimum}, got {value}")
    return int(value)
