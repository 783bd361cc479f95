"""Node-wise spectral filtering with a mixture of Chebyshev experts."""
from .autodiff import FILTER_COEFF, NETWORK_WEIGHT, Param, Tape, TapeError
from .bundle import BundleError, DatasetBundle, load_bundle, save_bundle
from .csbm import CsbmError, CsbmParams, CsbmSample, expected_filtered_mean, generate, regime1
from .graph import (
    Graph,
    GraphError,
    NormalizedOperator,
    OperatorKind,
    apply_operator,
    build_graph,
    detect_communities,
    graph_homophily,
    modularity,
    node_homophily,
)
from .kernels import BACKEND
from .model import (
    ExpertConfig,
    GateConfig,
    LossWeights,
    ModelConfig,
    NodeMoE,
    gate_input,
    load_checkpoint,
    save_checkpoint,
)
from .spectral import (
    FilterCoeffs,
    SmoothingGrid,
    SpectralBasis,
    frequency_response,
    init_coeffs,
    precompute_basis,
    smoothing_loss,
)
from .trainer import Split, TrainConfig, evaluate, make_split, train

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "FILTER_COEFF", "NETWORK_WEIGHT", "BundleError", "CsbmError", "CsbmParams",
    "CsbmSample", "DatasetBundle", "ExpertConfig", "FilterCoeffs", "GateConfig", "Graph",
    "GraphError", "LossWeights", "ModelConfig", "NodeMoE", "NormalizedOperator", "OperatorKind",
    "Param", "SmoothingGrid", "SpectralBasis", "Split", "Tape", "TapeError", "TrainConfig",
    "apply_operator", "build_graph", "detect_communities", "evaluate", "expected_filtered_mean",
    "frequency_response", "gate_input", "generate", "graph_homophily", "init_coeffs",
    "load_bundle", "load_checkpoint", "make_split", "modularity", "node_homophily",
    "precompute_basis", "regime1", "save_bundle", "save_checkpoint", "smoothing_loss", "train",
]
