"""Operation-count hook for factorizations, solves and inversions.

``count_factorizations`` temporarily wraps the dense linear-algebra entry
points of ``numpy.linalg`` and ``scipy.linalg`` so every call made while the
context is active is tallied::

    with count_factorizations() as events:
        lml_step(belief, noise, w, y)
    assert events.total == 0

The wrappers patch module attributes, so this is not safe to use from
several threads at once.
"""

from __future__ import annotations

import contextlib
import functools
from collections import Counter

import numpy as np
import scipy.linalg

NUMPY_NAMES = (
    "cholesky", "det", "eig", "eigh", "eigvals", "eigvalsh", "inv", "lstsq",
    "matrix_rank", "pinv", "qr", "slogdet", "solve", "svd", "tensorinv", "tensorsolve",
)
SCIPY_NAMES = (
    "cho_factor", "cho_solve", "cholesky", "det", "eig", "eigh", "inv", "ldl",
    "lstsq", "lu", "lu_factor", "lu_solve", "pinv", "qr", "solve", "solve_triangular", "svd",
)


class FactorizationEvents(Counter):
    @property
    def total(self) -> int:
        return sum(self.values())


@contextlib.contextmanager
def count_factorizations():
    events = FactorizationEvents()
    originals = []

    def wrap(module, prefix, name):
        fn = getattr(module, name, None)
        if fn is None:
            return
        originals.append((module, name, fn))

        @functools.wraps(fn)
        def counted(*args, **kwargs):
            events[f"{prefix}.{name}"] += 1
            return fn(*args, **kwargs)

        setattr(module, name, counted)

    for name in NUMPY_NAMES:
        wrap(np.linalg, "numpy.linalg", name)
    for name in SCIPY_NAMES:
        wrap(scipy.linalg, "scipy.linalg", name)
    try:
        yield events
    finally:
        for module, name, fn in reversed(originals):
            setattr(module, name, fn)
