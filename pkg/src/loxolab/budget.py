"""Central resource budgets.

Defaults can be overridden through ``LOXOLAB_BUDGET``, either a bare
integer (sphere budget) or comma separated ``key=value`` pairs, e.g.
``LOXOLAB_BUDGET="sphere=2e6,bfs=10"``.
"""

import os
from dataclasses import dataclass, replace

from .errors import BudgetExceeded


@dataclass(frozen=True)
class Budget:
    sphere: int = 10_000_000     # max words enumerated from one sphere
    bfs_radius: int = 14         # max ball radius for Cayley-graph BFS
    count_bits: int = 1_000_000  # max bit length of an exact path count
    cesaro_steps: int = 1_000_000

    def check_sphere(self, size, what="sphere"):
        if size > self.sphere:
            raise BudgetExceeded(
                f"{what} has {size} words, over the enumeration budget of "
                f"{self.sphere} (raise it with LOXOLAB_BUDGET=sphere=N)")


_KEYS = {"sphere": "sphere", "bfs": "bfs_radius", "bfs_radius": "bfs_radius",
         "bits": "count_bits", "count_bits": "count_bits",
         "cesaro": "cesaro_steps", "cesaro_steps": "cesaro_steps"}


def parse_budget(text, base=None):
    base = base or Budget()
    text = text.strip()
    if not text:
        return base
    if "=" not in text:
        return replace(base, sphere=int(float(text)))
    changes = {}
    for part in text.split(","):
        key, _, value = part.partition("=")
        key = key.strip().lower()
        if key not in _KEYS:
            raise ValueError(f"unknown budget key {key!r}")
        changes[_KEYS[key]] = int(float(value))
    return replace(base, **changes)


def current_budget():
    return parse_budget(os.environ.get("LOXOLAB_BUDGET", ""))
