"""Weak cross-Kerr optical quantum information toolkit."""

from .branch import (
    BranchState,
    apply_register_unitary,
    bus_phase,
    coherent_overlap,
    cross_kerr,
    displace,
    loss_channel,
    measure_register,
    normalize,
    prune,
    reduced_density_matrix,
)
from .gates import (
    ParityGateConfig,
    bell_measurement,
    cnot,
    fuse_clusters,
    make_bell_pair,
    parity_gate,
    prepare_heralded_photon,
    qnd_photon_detect,
)

__all__ = [
    "BranchState",
    "ParityGateConfig",
    "apply_register_unitary",
    "bell_measurement",
    "bus_phase",
    "cnot",
    "coherent_overlap",
    "cross_kerr",
    "displace",
    "fuse_clusters",
    "loss_channel",
    "make_bell_pair",
    "measure_register",
    "normalize",
    "parity_gate",
    "prepare_heralded_photon",
    "prune",
    "qnd_photon_detect",
    "reduced_density_matrix",
]
__version__ = "0.1.0"
