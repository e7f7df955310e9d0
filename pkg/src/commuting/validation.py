"""Comparison OD tables and the common part of commuters (Sørensen index)."""

from __future__ import annotations

import numpy as np

from .core import OUT_LABEL, DataInconsistencyError, FlowMatrix, InputError


def build_comparison_table(W, s_in, s_out=None, labels=None):
    """Fold an ``n x N_TOT`` flow matrix into the ``(n+1) x (n+1)`` comparison table.

    The extra row holds in-commuters of each region unit that are not
    explained by region residents (``s_in - column sum``); the extra column
    holds region residents working outside. ``W`` may be a FlowMatrix (the
    result is then a FlowMatrix too) or a plain array.
    """
    wrap = isinstance(W, FlowMatrix)
    if wrap and labels is None:
        labels = W.row_labels
    w = np.asarray(W.flows if wrap else W)
    s_in = np.asarray(s_in)
    n, n_tot = w.shape
    if n_tot < n or s_in.shape != (n_tot,):
        raise InputError(f"margins of length {s_in.shape} do not fit flows of shape {w.shape}")
    out_row = s_in[:n] - w[:, :n].sum(axis=0)
    if np.any(out_row < 0):
        bad = np.flatnonzero(out_row < 0)
        raise DataInconsistencyError(
            f"flows into units {bad.tolist()} exceed their in-commuters")
    if s_out is not None:
        rows = w.sum(axis=1)
        if not np.array_equal(rows, np.asarray(s_out)):
            bad = np.flatnonzero(rows != np.asarray(s_out))
            raise DataInconsistencyError(
                f"row sums of units {bad.tolist()} differ from their out-commuters")
    dtype = np.result_type(w.dtype, s_in.dtype)
    table = np.zeros((n + 1, n + 1), dtype=dtype)
    table[:n, :n] = w[:, :n]
    table[:n, n] = w[:, n:].sum(axis=1)
    table[n, :n] = out_row
    if not wrap and labels is None:
        return table
    labels = tuple(labels) + (OUT_LABEL,)
    return FlowMatrix(table, labels, labels, "comparison")


def _pair(Y, Yt):
    if isinstance(Y, FlowMatrix) and isinstance(Yt, FlowMatrix):
        if Y.row_labels != Yt.row_labels or Y.col_labels != Yt.col_labels:
            raise InputError("flow matrices have different labels")
    a = np.asarray(Y.flows if isinstance(Y, FlowMatrix) else Y)
    b = np.asarray(Yt.flows if isinstance(Yt, FlowMatrix) else Yt)
    if a.shape != b.shape:
        raise InputError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def nc(Y):
    """Number of commuters in a table."""
    a = np.asarray(Y.flows if isinstance(Y, FlowMatrix) else Y)
    return a.sum().item()


def ncc(Y, Yt):
    """Number of common commuters: the entrywise minimum, summed."""
    a, b = _pair(Y, Yt)
    return np.minimum(a, b).sum().item()


def cpc(Y, Yt) -> float:
    """Common part of commuters, ``2 NCC / (NC(Y) + NC(Yt))``, in [0, 1]."""
    a, b = _pair(Y, Yt)
    denom = a.sum() + b.sum()
    if not denom > 0:
        raise InputError("CPC is undefined for two empty networks")
    return float(2 * np.minimum(a, b).sum() / denom)
