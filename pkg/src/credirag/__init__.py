"""Retrieval-augmented misinformation labeling with graph attention refinement."""

__version__ = "0.1.0"
