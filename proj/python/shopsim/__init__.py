"""Python access to the shopsim core."""

import json as _json

from . import _core
from ._core import (
    AnalysisError,
    CatalogError,
    ConfigError,
    Error,
    PricingError,
    ProbeError,
    TraceError,
    discounted_price,
    hashing_embed,
    matrix_size,
    persona_count,
    shipping_fee,
    split_product_disjoint,
    token_cost,
)

__all__ = [
    "AnalysisError",
    "CatalogError",
    "ConfigError",
    "Error",
    "PricingError",
    "ProbeError",
    "TraceError",
    "discounted_price",
    "estimate_elasticity",
    "hashing_embed",
    "load_catalog",
    "load_traces",
    "matrix_size",
    "paired_t_test",
    "persona_count",
    "personas",
    "run_cli",
    "shipping_fee",
    "split_product_disjoint",
    "token_cost",
    "two_proportion_test",
]


def load_catalog(path):
    """Products of a line-delimited JSON file, as dicts."""
    return _json.loads(_core.load_catalog_json(str(path)))


def load_traces(path):
    """Latest trajectory per run from a trace store, as dicts."""
    return _json.loads(_core.load_traces_json(str(path)))


def personas(role):
    return _json.loads(_core.personas_json(role))


def estimate_elasticity(rates_by_percent):
    """OLS elasticity from {percent change: purchase rate}."""
    return _json.loads(_core.estimate_elasticity_json({int(k): float(v) for k, v in rates_by_percent.items()}))


def paired_t_test(deltas):
    return _json.loads(_core.paired_t_test_json([float(d) for d in deltas]))


def two_proportion_test(successes_a, n_a, successes_b, n_b):
    return _json.loads(_core.two_proportion_test_json(successes_a, n_a, successes_b, n_b))


def run_cli(*args):
    """Run the command line in-process; returns (exit status, stdout, stderr)."""
    return _core.run_cli([str(a) for a in args])
