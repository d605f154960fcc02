"""Large-scale kernel SVM: Nyström embedding + staged stochastic subgradient."""
from .data_io import (
    Dataset,
    binarize_labels,
    ensure_binary,
    parse_libsvm,
    read_libsvm,
    split_kfold,
    subsample,
    write_libsvm,
)
from .embedding import NystromEmbedding, embed, embed_batch, fit_embedding, psd_pinv_sqrt
from .kernels import KernelSpec, gram_block, kernel_eval
from .metrics import classification_error, f1_score
from .model import (
    SvmModel,
    TrainConfig,
    decision_function,
    load_model,
    predict,
    save_model,
    train,
)
from .optim import Objective, SolverConfig, SolveTrace, solve_snacks, solve_ssg
from .studies import bench_curves, cross_validate, grid_study, largest_plateau

__version__ = "0.1.0"
