"""Repeat-until-success two-qubit gate and cluster-growth simulator.

Subpackages:

- :mod:`rusim.qcore` -- dense state-vector engine with projections and
  entanglement diagnostics.
- :mod:`rusim.rusgate` -- photon-pair measurement bases, mutual
  unbiasedness checks, correction tables, and the gate loop.
- :mod:`rusim.optics` -- beam-splitter and multiport apparatuses in
  second quantization, detection classification, photon loss.
- :mod:`rusim.graphstate` -- graph-state tracker with Pauli measurement
  rules, bond repair, and the vertical-bond procedure.
- :mod:`rusim.growth` -- exact-rational overhead-cost model and Monte
  Carlo growth experiments.
- :mod:`rusim.cli` -- seeded, reproducible command-line front end.
"""

__version__ = "0.1.0"

from . import graphstate, growth, optics, qcore, rusgate  # noqa: F401
