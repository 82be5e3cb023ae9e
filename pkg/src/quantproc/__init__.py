"""Quantile processes by composite distribution/quantile maps, stochastic
dominance tests between them, and valuation under the probability measures
they distort."""

__version__ = "0.1.0"
