"""Reliable structural enhancement and aggregation for multi-view GNNs."""

from .data import (Dataset, GraphView, MultiViewGraph, Split, SyntheticConfig,
                   generate_synthetic, load_dataset, make_split, save_dataset)
from .enhancement import (EnhancementOutcome, PriorityState, decorrelate,
                          degree_centrality, enhance_node, feature_variance,
                          priority_vector, reliable_enhance)
from .evaluation import (EvalReport, ari, evaluate, kmeans, linear_svm,
                         macro_f1, micro_f1, nmi)
from .model import (ForwardTrace, ModelConfig, ModelParams, aggregation_params,
                    embed_dataset, init_params, inter_forward, intra_forward,
                    load_checkpoint, model_forward, readout, save_checkpoint,
                    uncertainty_probe, view_evidence)
from .opinions import (DirichletParams, Opinion, alpha_to_opinion,
                       dirichlet_log_pdf, evidence_to_alpha)
from .tensor import Tensor, backward, no_grad
from .training import (TrainConfig, TrainReport, ace_loss, enhance_dataset,
                       total_loss, train)

__version__ = "0.1.0"
