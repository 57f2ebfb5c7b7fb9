"""hfbound: certified lower bounds for the topological entropy of entire maps.

The package computes entropy lower bounds along two verified routes — island
digraphs collapsed to expanding inverse-branch systems, and polynomial-like
restrictions with argument-principle degree counts — and emits
machine-checkable certificates for h(f) >= log(m).
"""

__version__ = "0.1.0"

from .errors import HfboundError
from .expr import EntireMap, Jet, eval_jet, parse_map
from .geometry import Disk

__all__ = [
    "__version__",
    "HfboundError",
    "EntireMap",
    "Jet",
    "eval_jet",
    "parse_map",
    "Disk",
]
