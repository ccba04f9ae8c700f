"""Event-driven simulator for decentralized asynchronous optimization."""

from ._dadao import (
    CertificationError,
    DisconnectedError,
    Error,
    FormatError,
    NumericError,
    OrderingError,
    ParameterError,
    Graph,
    Objective,
    Params,
    build_schedule,
    chi1,
    chi2,
    drift_matrix,
    drift_exp,
    generate_graph,
    lambda_star,
    laplacian,
    make_linear_regression,
    make_logistic,
    params_from,
    run,
    run_experiment,
    scaling_sweep,
)

__all__ = [
    "CertificationError",
    "DisconnectedError",
    "Error",
    "FormatError",
    "NumericError",
    "OrderingError",
    "ParameterError",
    "Graph",
    "Objective",
    "Params",
    "build_schedule",
    "chi1",
    "chi2",
    "drift_matrix",
    "drift_exp",
    "generate_graph",
    "lambda_star",
    "laplacian",
    "make_linear_regression",
    "make_logistic",
    "params_from",
    "run",
    "run_experiment",
    "scaling_sweep",
]
