"""Contextualized non-local sequence model.

A sentence is treated as a fully connected graph over its tokens. Each
layer scores every ordered token pair from the current node states plus
static node/edge attributes, normalizes the scores into a soft adjacency,
aggregates neighbor states, and blends the result into each node through a
sigmoid gate. The final node states feed a mean-pool classifier, a
sentence-pair classifier, or a linear-chain CRF tagger.
"""

from cn3.autodiff import Tensor
from cn3.config import RunConfig, parse_config
from cn3.model import Cn3Model, ModelConfig
from cn3.training import TrainConfig, evaluate, train

__all__ = ["Tensor", "Cn3Model", "ModelConfig", "RunConfig", "TrainConfig",
           "evaluate", "parse_config", "train"]
__version__ = "0.1.0"
