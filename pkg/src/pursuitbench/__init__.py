"""Synthetic two-boat pursuit trajectories, from-scratch neural classifiers,
and entropy-threshold clustering baselines, with a reproducible
accuracy-vs-prefix-length experiment grid."""

__version__ = "0.1.0"
