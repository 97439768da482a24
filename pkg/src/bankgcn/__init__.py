"""Graph convolution with learnable Chebyshev filter banks."""

from bankgcn.errors import (
    BankGCNError,
    CheckpointError,
    ConfigError,
    DimensionError,
    DomainError,
    GraphConstructionError,
    OracleSizeError,
    ParseError,
    SplitError,
    TrainingFault,
)
from bankgcn.graph import (
    Batch,
    Graph,
    batch_graphs,
    build_graph,
    laplacian_matvec,
    permute_graph,
    scaled_laplacian_matvec,
)
from bankgcn.kernels import BACKEND
from bankgcn.layer import (
    BankLayerParams,
    bank_forward,
    bank_layer_param_count,
    diversity_penalty,
    init_bank_layer,
    subspace_project,
)
from bankgcn.model import (
    ModelParams,
    Prediction,
    cross_entropy,
    init_model,
    model_forward,
    model_param_count,
    objective,
    readout,
)
from bankgcn.spectral import (
    FilterCoeffs,
    SpectralBasis,
    cheb_eval_scalar,
    cheb_filter_apply,
    eig_laplacian,
    frequency_response_grid,
    gft,
    igft,
    spectral_filter_oracle,
)

__version__ = "0.1.0"
