"""Hot loops behind a single backend switch (see ``_jit``)."""

from . import loops, vectorized
from ._jit import BACKEND, USE_NUMBA

if USE_NUMBA:
    label_all_configs = loops.label_all_configs
    lattice_margin = loops.lattice_margin
else:
    label_all_configs = vectorized.label_all_configs
    lattice_margin = vectorized.lattice_margin

label_components = loops.label_components
heat_bath_updates = loops.heat_bath_updates
bond_log_odds = loops.bond_log_odds
bernoulli_label_batch = loops.bernoulli_label_batch

__all__ = [
    "BACKEND",
    "USE_NUMBA",
    "label_all_configs",
    "lattice_margin",
    "label_components",
    "heat_bath_updates",
    "bond_log_odds",
    "bernoulli_label_batch",
]
