"""frontal-lab: equiaffine invariants of frontals.

Jets, an expression DSL, the moving-basis frontal kernel, induced
equiaffine structures, affine-normal (Blaschke) fields with singular-set
limit certificates, conormals, and a structure-data reconstruction
engine with path-independence audits.
"""

from .config import Config, load_config

__all__ = ["Config", "load_config"]
__version__ = "0.1.0"
