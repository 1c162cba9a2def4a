"""HTTP sidecar scoring sentence perplexity with a pretrained causal LM."""

__version__ = "0.1.0"

from .app import create_app
from .model import PerplexityModel, ScoringFailure

__all__ = ["PerplexityModel", "ScoringFailure", "create_app", "__version__"]
