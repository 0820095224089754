"""Photonic Carnot engine driven by multilevel phaseonium fuel."""
from . import coarse, cycle, harness, microsim, phaseonium, prep, qcore

__all__ = ["qcore", "phaseonium", "coarse", "cycle", "microsim", "prep", "harness"]
