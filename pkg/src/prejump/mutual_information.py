"""k-nearest-neighbour mutual information between time-series variables.

Two estimators are provided:

* ``mi_ts_ts`` -- MI between two time-series variables. Each sample is a
  pair of series; the joint distance between two samples is the maximum of
  the two per-variable series distances, ``xi(n)`` is the joint distance to
  the k-th nearest other sample, and the marginal counts are the numbers of
  other samples strictly closer than ``xi(n)`` in each variable.
* ``mi_ts_class`` -- MI between a time-series variable and a discrete class
  label, using the distance to the k-th nearest neighbour of the same class.

Neighbour counts are passed to the digamma function as ``nu + 1`` by default
(a strict count can be zero); ``strict=True`` passes ``nu`` unchanged and
raises when a count is zero. Finite-sample bias is removed by subtracting a
zero baseline: the mean estimate over random re-pairings of whole series
(or of labels).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from . import _kernels
from .distances import DISTANCE_KINDS, pairwise

EULER_GAMMA = 0.57721566490153286061


class DigammaTable:
    """Digamma values at positive integers, grown on demand.

    Built from ``psi(1) = -gamma`` and ``psi(n + 1) = psi(n) + 1/n``.
    """

    def __init__(self, size: int = 1024):
        self._values = np.empty(0)
        self._grow(size)

    def _grow(self, size: int) -> None:
        n = np.arange(1, size, dtype=float)
        self._values = np.concatenate(([-EULER_GAMMA], -EULER_GAMMA + np.cumsum(1.0 / n)))

    def __call__(self, n):
        n = np.asarray(n)
        if n.size and n.min() < 1:
            raise ValueError("digamma table is defined for positive integers only")
        top = int(n.max()) if n.size else 0
        if top > self._values.size:
            self._grow(max(top, 2 * self._values.size))
        return self._values[n - 1]


digamma = DigammaTable()


@dataclass(frozen=True)
class MIEstimate:
    value: float
    corrected_value: float
    distance_kind: str
    k: int
    n_permutations: int
    baseline: float
    seed: int


class Neighborhoods:
    """Distance matrix plus per-row sort order, shared by repeated estimates."""

    def __init__(self, D: np.ndarray):
        D = np.ascontiguousarray(D, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise ValueError("distance matrix must be square")
        self.D = D
        # stable sort: among equidistant neighbours the smallest index comes first
        self.order = np.ascontiguousarray(np.argsort(D, axis=1, kind="stable"))
        self.sorted = np.ascontiguousarray(np.take_along_axis(D, self.order, axis=1))

    @property
    def n(self) -> int:
        return self.D.shape[0]

    @classmethod
    def from_series(cls, X, kind: str) -> "Neighborhoods":
        return cls(pairwise(X, kind))


def _nbhd(obj, kind: str) -> Neighborhoods:
    return obj if isinstance(obj, Neighborhoods) else Neighborhoods.from_series(obj, kind)


def _psi_counts(nu: np.ndarray, strict: bool) -> np.ndarray:
    if strict:
        if np.any(nu == 0):
            raise ValueError("zero neighbour count: the estimator as printed is undefined (strict mode)")
        return digamma(nu)
    return digamma(nu + 1)


def _permutations(n: int, n_permutations: int, seed: int) -> np.ndarray:
    if n_permutations < 1:
        raise ValueError("n_permutations must be >= 1")
    children = np.random.SeedSequence(seed).spawn(n_permutations)
    return np.stack([np.random.default_rng(c).permutation(n) for c in children])


# --- series versus series -------------------------------------------------


def _ts_ts_values(P: Neighborhoods, Q: Neighborhoods, perms: np.ndarray, k: int, strict: bool) -> np.ndarray:
    N = P.n
    if Q.n != N:
        raise ValueError("both variables need the same number of samples")
    if not 1 <= k < N:
        raise ValueError(f"need N > k >= 1 (N={N}, k={k})")
    _, nu_p, nu_q = _kernels.joint_knn_counts(
        P.D, P.order, P.sorted, Q.D, Q.sorted, np.ascontiguousarray(perms, dtype=np.int64), k
    )
    base = digamma(k) + digamma(N) - 1.0 / k
    return base - (_psi_counts(nu_p, strict) + _psi_counts(nu_q, strict)).mean(axis=1)


def mi_ts_ts(x, y, k: int = 3, distance: str = "euclidean", *, strict: bool = False) -> float:
    """Uncorrected MI (nats) between two time-series variables.

    ``x`` and ``y`` are (N, length) arrays of realizations, row n of each
    belonging to sample n, or precomputed :class:`Neighborhoods`.
    """
    P, Q = _nbhd(x, distance), _nbhd(y, distance)
    ident = np.arange(P.n)[None, :]
    return float(_ts_ts_values(P, Q, ident, k, strict)[0])


def baseline_ts_ts(x, y, k: int = 3, distance: str = "euclidean", n_permutations: int = 100,
                   seed: int = 0, *, strict: bool = False) -> float:
    """Mean estimate over random re-pairings of the second variable's series."""
    P, Q = _nbhd(x, distance), _nbhd(y, distance)
    perms = _permutations(P.n, n_permutations, seed)
    return float(_ts_ts_values(P, Q, perms, k, strict).mean())


def corrected_mi_ts_ts(x, y, k: int = 3, distance: str = "euclidean", n_permutations: int = 100,
                       seed: int = 0, *, strict: bool = False) -> MIEstimate:
    P, Q = _nbhd(x, distance), _nbhd(y, distance)
    value = mi_ts_ts(P, Q, k, distance, strict=strict)
    base = baseline_ts_ts(P, Q, k, distance, n_permutations, seed, strict=strict)
    return MIEstimate(value, value - base, distance, k, n_permutations, base, seed)


# --- series versus class --------------------------------------------------


def _check_classes(labels: np.ndarray, k: int) -> None:
    classes, counts = np.unique(labels, return_counts=True)
    if classes.size < 2:
        raise ValueError(f"need at least two classes, got only {classes.tolist()}")
    for c, m in zip(classes, counts):
        if m <= k:
            raise ValueError(f"class {c!r} has {m} members; need more than k={k}")


def _ts_class_values(S: Neighborhoods, labels_batch: np.ndarray, k: int, strict: bool) -> np.ndarray:
    N = S.n
    labels_batch = np.atleast_2d(labels_batch)
    if labels_batch.shape[1] != N:
        raise ValueError("one label per sample required")
    _check_classes(labels_batch[0], k)
    _, coded = np.unique(labels_batch, return_inverse=True)
    coded = coded.reshape(labels_batch.shape).astype(np.int64)
    class_size = np.bincount(coded[0])
    _, nu = _kernels.class_knn_counts(S.order, S.sorted, S.D, np.ascontiguousarray(coded), k)
    # class counts include the sample itself and are always >= k + 1
    psi_class = digamma(class_size[coded])
    return digamma(k) + digamma(N) - (psi_class + _psi_counts(nu, strict)).mean(axis=1)


def mi_ts_class(x, labels, k: int = 3, distance: str = "euclidean", *, strict: bool = False) -> float:
    """Uncorrected MI (nats) between a time-series variable and class labels."""
    S = _nbhd(x, distance)
    return float(_ts_class_values(S, np.asarray(labels), k, strict)[0])


def _label_permutations(labels: np.ndarray, n_permutations: int, seed: int) -> np.ndarray:
    perms = _permutations(labels.size, n_permutations, seed)
    return labels[perms]


def baseline_ts_class(x, labels, k: int = 3, distance: str = "euclidean", n_permutations: int = 100,
                      seed: int = 0, *, strict: bool = False) -> float:
    """Mean estimate over random permutations of the labels."""
    S = _nbhd(x, distance)
    labels = np.asarray(labels)
    batch = _label_permutations(labels, n_permutations, seed)
    return float(_ts_class_values(S, batch, k, strict).mean())


def corrected_mi_ts_class(x, labels, k: int = 3, distance: str = "euclidean", n_permutations: int = 100,
                          seed: int = 0, *, strict: bool = False) -> MIEstimate:
    S = _nbhd(x, distance)
    value = mi_ts_class(S, labels, k, distance, strict=strict)
    base = baseline_ts_class(S, labels, k, distance, n_permutations, seed, strict=strict)
    return MIEstimate(value, value - base, distance, k, n_permutations, base, seed)


def zero_baseline(estimator: Callable[[np.random.Generator], float], n_permutations: int = 100,
                  seed: int = 0) -> float:
    """Generic zero baseline: mean of ``estimator(rng)`` over derived generators.

    Each call receives its own generator spawned from ``seed``, so the result
    does not depend on evaluation order. The estimator is expected to re-pair
    whole series (or labels) using that generator.
    """
    if n_permutations < 1:
        raise ValueError("n_permutations must be >= 1")
    children = np.random.SeedSequence(seed).spawn(n_permutations)
    return float(np.mean([estimator(np.random.default_rng(c)) for c in children]))


# --- reports over many attributes ----------------------------------------


def informativeness_report(samples, labels, attributes: Sequence[str],
                           distances: Iterable[str] = DISTANCE_KINDS, ks: Iterable[int] = (1, 3, 5),
                           windows: Iterable[int] = (48,), n_permutations: int = 100,
                           seed: int = 0) -> pd.DataFrame:
    """Corrected class-MI of every attribute for every (distance, k, window).

    ``samples`` is (n_samples, n_attributes, length). A window ``w`` keeps
    the last ``w`` coordinates, i.e. the ``w`` intervals closest to the
    jump. Returns one row per (attribute, distance, k, window) with columns
    ``value``, ``baseline`` and ``corrected``.
    """
    samples = np.asarray(samples, dtype=float)
    labels = np.asarray(labels)
    if samples.ndim != 3 or samples.shape[1] != len(attributes):
        raise ValueError("samples must be (n_samples, n_attributes, length) matching attributes")
    length = samples.shape[2]
    windows = list(windows)
    for w in windows:
        if not 1 <= w <= length:
            raise ValueError(f"window {w} outside 1..{length}")
    ks = list(ks)
    batch = np.concatenate([labels[None, :], _label_permutations(labels, n_permutations, seed)])
    rows = []
    for w in windows:
        for kind in distances:
            for a, name in enumerate(attributes):
                S = Neighborhoods.from_series(samples[:, a, length - w:], kind)
                for k in ks:
                    vals = _ts_class_values(S, batch, k, False)
                    value, base = float(vals[0]), float(vals[1:].mean())
                    rows.append((name, kind, k, w, value, base, value - base))
    return pd.DataFrame(rows, columns=["attribute", "distance", "k", "window", "value", "baseline", "corrected"])


def redundancy_matrix(samples, distance: str = "euclidean", k: int = 3, n_permutations: int = 100,
                      seed: int = 0) -> np.ndarray:
    """Symmetric matrix of corrected MI between every pair of attributes.

    ``samples`` is (n_samples, n_attributes, length); the diagonal is left 0.
    The same seeded re-pairings are used for every pair.
    """
    samples = np.asarray(samples, dtype=float)
    n, P, _ = samples.shape
    nb = [Neighborhoods.from_series(samples[:, a, :], distance) for a in range(P)]
    perms = np.concatenate([np.arange(n)[None, :], _permutations(n, n_permutations, seed)])
    out = np.zeros((P, P))
    for a, b in itertools.combinations(range(P), 2):
        vals = _ts_ts_values(nb[a], nb[b], perms, k, False)
        out[a, b] = out[b, a] = vals[0] - vals[1:].mean()
    return out


def rank_stability_test(ranks_a, ranks_b) -> float:
    """Two-sided Wilcoxon signed-rank p-value for zero median rank difference.

    Zero differences are dropped; if every difference is zero, p = 1.
    """
    a = np.asarray(ranks_a, dtype=float)
    b = np.asarray(ranks_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("rank vectors must have equal length")
    if np.all(a == b):
        return 1.0
    return float(stats.wilcoxon(a, b, zero_method="wilcox", alternative="two-sided").pvalue)


def attribute_ranks(report: pd.DataFrame, window: int | None = None) -> pd.DataFrame:
    """Rank attributes (1 = most informative) within each (distance, k) setting."""
    df = report if window is None else report[report["window"] == window]
    table = df.pivot_table(index="attribute", columns=["distance", "k"], values="corrected", sort=False)
    return table.rank(ascending=False, method="average")


def pairwise_rank_stability(ranks: pd.DataFrame) -> pd.DataFrame:
    """Wilcoxon p-value for every pair of settings (columns of ``ranks``)."""
    rows = []
    for s, t in itertools.combinations(ranks.columns, 2):
        rows.append((s, t, rank_stability_test(ranks[s].to_numpy(), ranks[t].to_numpy())))
    return pd.DataFrame(rows, columns=["setting_a", "setting_b", "p_value"])
