"""Polyphonic piano transcription with a hybrid acoustic / music-language model.

Frame-level neural classifiers supply per-pitch posteriors, an RNN-NADE music
language model supplies a prior over note configurations, and a
high-dimensional beam search finds the jointly most likely piano roll.
"""
from .kernels import BACKEND

__version__ = "0.1.0"
N_PITCHES = 88
LOWEST_PITCH = 21

__all__ = ["BACKEND", "N_PITCHES", "LOWEST_PITCH", "__version__"]
