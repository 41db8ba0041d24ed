"""Streaming pseudo-label refinement with online constrained K-means."""
from .banks import ClusterLabelTable, SampleBanks, footprint, footprint_slots
from .engine import Engine, EngineConfig, EpochReport, Simulation
from .kmeans import ClusterState, MultiHeadState, init_clusters, multi_head_wrap
from .prototypes import PrototypeSet
from .simulator import World, WorldConfig, biased_world_preset

__version__ = "0.1.0"
