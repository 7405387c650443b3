"""autossl: search for graph self-supervised task weights that maximize
pseudo-homophily, plus the information-theoretic bound that motivates it."""

from ._kernels import BACKEND
from .clustering import (ClusterModel, homophily_loss,
                         homophily_loss_grad_embeddings, kmeans,
                         pseudo_homophily, soft_assign)
from .encoder import (EncoderConfig, EncoderState, encode, encode_backward,
                      init_encoder, load_checkpoint, save_checkpoint)
from .errors import (AutosslError, ConfigError, DimensionError,
                     IngestionError, MalformedInputError, NumericError,
                     PreparationError)
from .evaluation import (ProbeResult, Split, cluster_eval, logistic_probe,
                         make_split, nmi)
from .graph import (Graph, bfs_distances, build_graph, homophily,
                    load_graph, normalized_adjacency, save_graph,
                    sbm_generate)
from .numeric import (AdamState, CsrMatrix, adam_init, adam_step,
                      finite_diff_check, make_csr, spmm)
from .rng import RngStream
from .search_ds import DsConfig, DsResult, run_ds
from .search_es import CmaEs, EsConfig, EsResult, evaluate_candidate, run_es
from .tasks import TASK_NAMES, TaskConfig, make_step_draw, make_tasks
from .theory import (binary_mutual_information, builtin_verification_corpus,
                     delta_from_homophily, pseudo_homophily_bound,
                     verify_theorem)
from .training import TrainConfig, train_with_weights

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ClusterModel", "homophily_loss",
    "homophily_loss_grad_embeddings", "kmeans", "pseudo_homophily",
    "soft_assign", "EncoderConfig", "EncoderState", "encode",
    "encode_backward", "init_encoder", "load_checkpoint", "save_checkpoint",
    "AutosslError", "ConfigError", "DimensionError", "IngestionError",
    "MalformedInputError", "NumericError", "PreparationError", "ProbeResult",
    "Split", "cluster_eval", "logistic_probe", "make_split", "nmi", "Graph",
    "bfs_distances", "build_graph", "homophily", "load_graph",
    "normalized_adjacency", "save_graph", "sbm_generate", "AdamState",
    "CsrMatrix", "adam_init", "adam_step", "finite_diff_check", "make_csr",
    "spmm", "RngStream", "DsConfig", "DsResult", "run_ds", "CmaEs",
    "EsConfig", "EsResult", "evaluate_candidate", "run_es", "TASK_NAMES",
    "TaskConfig", "make_step_draw", "make_tasks",
    "binary_mutual_information", "builtin_verification_corpus",
    "delta_from_homophily", "pseudo_homophily_bound", "verify_theorem",
    "TrainConfig", "train_with_weights",
]
