"""Dynamic IR-drop estimation toolkit.

Per-cell power/timing features are decomposed into spatial and per-instant
power maps; a small CNN evaluated once per instant with a maximum over the
outputs predicts each tile's IR drop; a resistive-grid supply-network
solver generates ground-truth labels on synthetic designs; evaluation,
mitigation, a pipeline driver, a CLI and an HTTP service sit on top.
"""

__version__ = "0.1.0"
