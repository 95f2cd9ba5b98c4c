"""Proxy-voting truth discovery.

Estimate each crowd worker's fault level from how far their answers sit
from everyone else's (the proxy distance), turn the estimates into
weights and aggregate continuous, categorical or ranking answers.
"""

from .aggregation import WeightVector, aggregate, kemeny, weights_grofman, weights_inverse_variance
from .core import Instance, Population, ProtoPopulation, distance_matrix, proxy_distances
from .dataio import load_dataset, load_instance, save_instance
from .estimators import FaultEstimate, d_efl, estimate_mu, id_td_estimate, ip_efl, p_efl
from .experiments import ExperimentConfig, emit_reports, load_config, run_grid
from .noisegen import NoiseModelSpec, gen_icn, gen_ier, gen_inn, gen_mallows
from .pipelines import MethodSpec, run_method

__version__ = "0.1.0"

__all__ = [
    "Instance", "Population", "ProtoPopulation", "distance_matrix", "proxy_distances",
    "NoiseModelSpec", "gen_inn", "gen_ier", "gen_icn", "gen_mallows",
    "FaultEstimate", "d_efl", "p_efl", "estimate_mu", "ip_efl", "id_td_estimate",
    "WeightVector", "weights_inverse_variance", "weights_grofman", "aggregate", "kemeny",
    "MethodSpec", "run_method",
    "ExperimentConfig", "load_config", "run_grid", "emit_reports",
    "load_dataset", "load_instance", "save_instance",
]
