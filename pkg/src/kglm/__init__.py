"""Entity-embedding infusion for a small causal language model.

Train translation-based knowledge-graph embeddings, project entity vectors into
the model's token-embedding space through a trainable layer, infuse them at a
reserved prompt slot, and measure factual-accuracy gains against a text-only
fine-tuned baseline.
"""

__version__ = "0.1.0"
