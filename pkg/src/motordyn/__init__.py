"""Data-driven induction motor dynamics: simulator, numpy layers with exact
backward passes, recurrent-skip encoder-decoders, losses and training."""

__version__ = "0.1.0"
