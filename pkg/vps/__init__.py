"""
Variational post-selection toolkit.

Statevector simulation of post-selection-enhanced VQE and neural-reweighted
Renyi-2 thermal state preparation, with exact oracles and an experiment CLI.
"""

__version__ = "0.1.0"
