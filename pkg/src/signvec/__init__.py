"""One-shot isolated sign recognition from keypoint sequences.

Pretrain a sequence encoder on labeled signs, freeze it, embed a sign
dictionary into a support set, and answer query sequences with an exact
softmax-attention search over the embeddings.
"""

__version__ = "0.1.0"
