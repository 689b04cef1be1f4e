"""One-step neural implicit samplers with chain baselines and KSD evaluation.

Everything lives in the compiled core; this package just re-exports it.
"""

from dftsampler._core import (
    BlrDataset,
    BlrPosterior,
    Error,
    Net,
    Target,
    TrainConfig,
    __version__,
    blr_accuracy,
    check_gradient_identity,
    config_schema,
    ksd,
    load_blr_csv,
    load_net,
    make_net,
    make_target,
    run_chain,
    run_experiment,
    sample,
    save_net,
    train,
)

__all__ = [
    "BlrDataset",
    "BlrPosterior",
    "Error",
    "Net",
    "Target",
    "TrainConfig",
    "__version__",
    "blr_accuracy",
    "check_gradient_identity",
    "config_schema",
    "ksd",
    "load_blr_csv",
    "load_net",
    "make_net",
    "make_target",
    "run_chain",
    "run_experiment",
    "sample",
    "save_net",
    "train",
]
