"""Partner selection for cooperative uplinks over Rician indoor channels.

The package models link quality with a bivariate (K-factor, path loss)
channel law, prices amplify-and-forward pairs by the energy needed to meet
an outage target, and assigns partners either optimally (min-max energy)
or greedily (worst-link-first).
"""

__version__ = "0.1.0"

from .channel import (  # noqa: E402
    I2I_MODEL,
    I2O_INDOOR_MODEL,
    I2O_OUTDOOR_MODEL,
    BivariateModel,
    FadingParams,
    I2OComposition,
    Topology,
    fit_bivariate_model,
    generate_topology,
    mean_vector,
    sample_links,
)
from .energy import RadioConfig  # noqa: E402
from .montecarlo import ExperimentSpec, LifetimeResult, run_experiment, run_topology  # noqa: E402
from .pairing import (  # noqa: E402
    PairingSet,
    QualityMatrix,
    WeightedPairGraph,
    build_weight_graph,
    optimal_pairing,
    wlf_pairing,
)
from .quality import coding_gain_db, map_db, mmse_db  # noqa: E402

__all__ = [
    "__version__",
    "BivariateModel",
    "FadingParams",
    "I2OComposition",
    "Topology",
    "I2I_MODEL",
    "I2O_INDOOR_MODEL",
    "I2O_OUTDOOR_MODEL",
    "fit_bivariate_model",
    "generate_topology",
    "mean_vector",
    "sample_links",
    "RadioConfig",
    "ExperimentSpec",
    "LifetimeResult",
    "run_experiment",
    "run_topology",
    "PairingSet",
    "QualityMatrix",
    "WeightedPairGraph",
    "build_weight_graph",
    "optimal_pairing",
    "wlf_pairing",
    "coding_gain_db",
    "map_db",
    "mmse_db",
]
