"""Distances between real-valued time series.

Three kinds are supported: ``"euclidean"`` (L2 norm of the coordinate
differences), ``"chebychev"`` (largest absolute coordinate difference) and
``"dtw"`` (classic unconstrained dynamic time warping with absolute
per-step cost and no path-length normalization).
"""

from __future__ import annotations

import csv
from typing import Literal

import numpy as np
from scipy.spatial.distance import cdist

from . import _kernels

DistanceKind = Literal["euclidean", "chebychev", "dtw"]
DISTANCE_KINDS: tuple[str, ...] = ("euclidean", "chebychev", "dtw")


def _check_kind(kind: str) -> str:
    if kind not in DISTANCE_KINDS:
        raise ValueError(f"unknown distance kind {kind!r}; expected one of {DISTANCE_KINDS}")
    return kind


def _pair(x, y, same_length: bool) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size == 0 or y.size == 0:
        raise ValueError("series must be non-empty")
    if same_length and x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    return x, y


def euclidean(x, y) -> float:
    """L2 distance between two equal-length series."""
    x, y = _pair(x, y, True)
    return float(np.sqrt(np.sum((x - y) ** 2)))


def chebychev(x, y) -> float:
    """Maximum absolute coordinate difference between two equal-length series."""
    x, y = _pair(x, y, True)
    return float(np.max(np.abs(x - y)))


def dtw(x, y) -> float:
    """Dynamic time warping distance.

    Minimizes the summed absolute cost ``|x_i - y_j|`` over warping paths
    that start at (0, 0), end at (len(x)-1, len(y)-1) and advance by
    (1, 0), (0, 1) or (1, 1). Series may differ in length.
    """
    x, y = _pair(x, y, False)
    return float(_kernels.dtw_pair(x, y))


def distance(x, y, kind: DistanceKind) -> float:
    return {"euclidean": euclidean, "chebychev": chebychev, "dtw": dtw}[_check_kind(kind)](x, y)


def _as_samples(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError("expected an (n_samples, length) array")
    if X.shape[1] == 0:
        raise ValueError("series must be non-empty")
    return np.ascontiguousarray(X)


def pairwise(X, kind: DistanceKind) -> np.ndarray:
    """All-pairs distance matrix for the rows of ``X`` (n_samples, length).

    A 1-D input is treated as ``n_samples`` series of length one.
    """
    X = _as_samples(X)
    _check_kind(kind)
    if kind == "dtw":
        return _kernels.dtw_matrix(X)
    D = cdist(X, X, metric="euclidean" if kind == "euclidean" else "chebyshev")
    # cdist can leave rounding asymmetry; the estimators rely on exact symmetry
    D = np.minimum(D, D.T)
    np.fill_diagonal(D, 0.0)
    return D


def cross(X, Y, kind: DistanceKind) -> np.ndarray:
    X, Y = _as_samples(X), _as_samples(Y)
    _check_kind(kind)
    if kind == "dtw":
        return _kernels.dtw_cross(X, Y)
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"length mismatch: {X.shape[1]} vs {Y.shape[1]}")
    return cdist(X, Y, metric="euclidean" if kind == "euclidean" else "chebyshev")


def write_matrix_csv(path, D: np.ndarray, kind: str) -> None:
    """Export a distance matrix as ``i,j,kind,value`` rows (upper triangle incl. diagonal)."""
    D = np.asarray(D)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "kind", "value"])
        n = D.shape[0]
        for i in range(n):
            for j in range(i, n):
                w.writerow([i, j, kind, repr(float(D[i, j]))])
