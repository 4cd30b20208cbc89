"""veridict: a desk-scale AI-generated-text detection pipeline.

Corpus construction, hindsight reasoning augmentation, outcome-weighted
supervised training, variance-filtered reinforcement learning, and
calibrated document scoring, all runnable on a built-in toy policy with
deterministic mock backends.
"""

__version__ = "0.1.0"
