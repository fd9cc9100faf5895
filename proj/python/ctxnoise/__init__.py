# Copyright 2026 The ctxnoise Authors
# SPDX-License-Identifier: Apache-2.0
"""Python bindings for the ctxnoise core."""

from ctxnoise._core import (
    Error,
    __version__,
    aggregate_cells,
    analyze_traces,
    attention_by_condition,
    blend,
    confidence_gain,
    correlations,
    entropy,
    load_cell_table,
    run,
    ter,
    ter_detail,
)

__all__ = [
    "Error",
    "__version__",
    "aggregate_cells",
    "analyze_traces",
    "attention_by_condition",
    "blend",
    "confidence_gain",
    "correlations",
    "entropy",
    "load_cell_table",
    "run",
    "ter",
    "ter_detail",
]
