"""
SCASRec - scene-aware route list recommendation

Generates an ordered, variable-length list of routes for an origin-destination
query. Training weights each decode step by the remaining coverage gap and
teaches a learnable end-of-recommendation token when to stop.
"""

__version__ = "0.1.0"

from scasrec.core.config import RunConfig
from scasrec.core.schema import Route, Sample
from scasrec.model.network import ScasrecModel

__all__ = ["RunConfig", "Route", "Sample", "ScasrecModel", "__version__"]
