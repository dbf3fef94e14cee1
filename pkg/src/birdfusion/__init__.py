"""BIRD fusion of GM-Poisson posteriors for multi-sensor tracking with limited FoVs."""
from .geometry import ALL, EMPTY, contains, disc, gaussian_mass, rect, region_difference, \
    region_intersect, region_union, region_volume
from .gm import GaussianComponent, GaussianMixture, GMParams, NumericError, gm_evaluate, \
    gm_prune_merge
from .poisson import PoissonPosterior, PreconditionError, disjoint_union, poisson_intensity, \
    restrict, split
from .fusion import FusionWeights, bird_fuse_pair, gci_fuse_common, gm_power, sequential_bird, \
    standard_gci, uninformative_poisson
from .network import NetworkGraph, consensus_round, run_consensus
from .metrics import cardinality_stats, ospa

__version__ = "0.1.0"
