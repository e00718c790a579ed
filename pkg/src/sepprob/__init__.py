"""Separability probabilities of random quantum states by quasi-Monte Carlo.

Submodules:

* :mod:`~sepprob.lowdisc`: scrambled Faure streams.
* :mod:`~sepprob.statespace`: Haar unitaries, spectra, density matrices.
* :mod:`~sepprob.measures`: HS and monotone-metric weights.
* :mod:`~sepprob.criteria`: PPT, concurrence and alpha-family constraints.
* :mod:`~sepprob.estimator`: weighted block estimators and histograms.
* :mod:`~sepprob.oracles`: exact constants, closed forms, cubature checks.
* :mod:`~sepprob.cli`: command-line front end.
"""

from .estimator import (SYSTEMS, CurveTable, EsfHistogram, Estimate, absolute_separability_probability,
                        alpha_curve, esf_histogram, get_system, jump_detect, marginal_histogram,
                        ratio_analysis, sep_prob_from_esf, sep_vs_concurrence)

__version__ = "0.1.0"

__all__ = [
    "SYSTEMS", "CurveTable", "EsfHistogram", "Estimate", "absolute_separability_probability",
    "alpha_curve", "esf_histogram", "get_system", "jump_detect", "marginal_histogram",
    "ratio_analysis", "sep_prob_from_esf", "sep_vs_concurrence", "__version__",
]
