"""geopfn: in-context probabilistic prediction of geotechnical parameters
with a prior-data fitted network (PFN) trained purely on synthetic tasks.

A small two-way-attention transformer, implemented on plain numpy buffers
with hand-written reverse-mode differentiation, is pre-trained on tasks drawn
from a structural-causal-model prior. One forward pass then approximates the
posterior-predictive distribution for new tabular regression tasks — no
per-site fitting. The geodata/context/baseline/evaluate modules wrap this
engine into a borehole site-characterization workflow with a hierarchical
Bayesian reference model.
"""

from .autodiff import GradTape, Tensor, backward
from .bardist import PredictiveDistribution
from .errors import (
    CapacityError,
    CheckpointError,
    ContextError,
    ContractError,
    CorruptHeaderError,
    DataError,
    GeopfnError,
    NotACheckpointError,
    NumericsError,
    PriorError,
    ShapeError,
    TrainingError,
    TruncatedBlobError,
    VersionMismatchError,
)
from .geodata import (
    BoreholeRecord,
    SiteTable,
    SynthSiteConfig,
    generate_site,
    load_csv,
    split_verification,
    write_csv,
)
from .infer import Prediction, predict
from .model import BinStrategy, Checkpoint, ModelConfig, forward, logits_to_distribution
from .prior import PriorConfig, Task, sample_conjugate_task, sample_task
from .train import TrainConfig, default_bin_strategy, train

__version__ = "0.1.0"

__all__ = [
    "BinStrategy",
    "BoreholeRecord",
    "CapacityError",
    "Checkpoint",
    "CheckpointError",
    "ContextError",
    "ContractError",
    "CorruptHeaderError",
    "DataError",
    "GeopfnError",
    "GradTape",
    "ModelConfig",
    "NotACheckpointError",
    "NumericsError",
    "Prediction",
    "PredictiveDistribution",
    "PriorConfig",
    "PriorError",
    "ShapeError",
    "SiteTable",
    "SynthSiteConfig",
    "Task",
    "Tensor",
    "TrainConfig",
    "TrainingError",
    "TruncatedBlobError",
    "VersionMismatchError",
    "backward",
    "default_bin_strategy",
    "forward",
    "generate_site",
    "load_csv",
    "logits_to_distribution",
    "predict",
    "sample_conjugate_task",
    "sample_task",
    "split_verification",
    "train",
    "write_csv",
    "__version__",
]
