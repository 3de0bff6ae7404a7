"""Hierarchical clustering of stocks on their jump-indicator series.

Each stock is a bundle of indicator series (the median pre-jump series of
the selected indicators). Series are min-max normalized per indicator over
all stocks, stocks are compared by summing per-indicator series distances,
and the distance matrix is agglomerated with unweighted average linkage
(UPGMA). Links are scored with the inconsistency coefficient over a
depth-2 neighbourhood: the link itself and its non-singleton children.

Distinct stocks are found by walking down from the root: while the link
of the current node is more inconsistent than the cutoff and one child
holds a strict majority of its leaves, the minority child is reported as
distinct and the walk continues in the majority child.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .distances import DISTANCE_KINDS, pairwise


def minmax_normalize(bundles: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Rescale every indicator to [0, 1] with its min and max over all stocks and coordinates.

    ``bundles`` maps a stock to an (n_indicators, length) array. An
    indicator that is constant over all stocks becomes 0 (with a warning).
    """
    if len(bundles) < 2:
        raise ValueError("need at least 2 stocks")
    names = list(bundles)
    X = np.stack([np.asarray(bundles[s], dtype=float) for s in names])      # (N, P, L)
    lo = X.min(axis=(0, 2), keepdims=True)
    hi = X.max(axis=(0, 2), keepdims=True)
    span = hi - lo
    flat = (span == 0).ravel()
    if flat.any():
        warnings.warn(f"{int(flat.sum())} indicator(s) constant over all stocks; set to 0", RuntimeWarning,
                      stacklevel=2)
    Y = np.where(span > 0, (X - lo) / np.where(span > 0, span, 1.0), 0.0)
    return {s: Y[i] for i, s in enumerate(names)}


def stock_distance(a, b, kind: str = "euclidean", mode: str = "sum") -> float:
    """Distance between two indicator bundles: sum (or root-sum-of-squares) of per-indicator distances."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"indicator mismatch: {a.shape[0]} vs {b.shape[0]}")
    D = stock_distance_matrix(np.stack([a, b]), kind, mode)
    return float(D[0, 1])


def stock_distance_matrix(X, kind: str = "euclidean", mode: str = "sum") -> np.ndarray:
    """(N, N) distances for stacked bundles ``X`` of shape (N, n_indicators, length)."""
    X = np.asarray(X, dtype=float)
    if mode not in ("sum", "rss"):
        raise ValueError("mode must be 'sum' or 'rss'")
    parts = np.stack([pairwise(X[:, p, :], kind) for p in range(X.shape[1])])
    return parts.sum(axis=0) if mode == "sum" else np.sqrt((parts ** 2).sum(axis=0))


def _check_distance_matrix(D) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError("distance matrix must be square")
    if D.shape[0] < 2:
        raise ValueError("need at least 2 points")
    if not np.all(np.isfinite(D)):
        raise ValueError("distance matrix must be finite")
    if np.any(D < 0):
        raise ValueError("distances must be non-negative")
    if not np.allclose(D, D.T, rtol=1e-10, atol=1e-12):
        raise ValueError("distance matrix must be symmetric")
    if np.any(np.diag(D) != 0):
        raise ValueError("distance matrix must have a zero diagonal")
    return D


def upgma(D) -> np.ndarray:
    """Average-linkage agglomeration in the linkage-matrix layout.

    Row ``t`` is ``[left, right, height, size]``; cluster ``N + t`` is the
    one formed at step ``t``. At each step the closest pair of active
    clusters merges (ties: lowest cluster ids), and distances to the new
    cluster are the size-weighted means of the merged clusters' distances.
    """
    D = _check_distance_matrix(D)
    N = D.shape[0]
    dist = D.copy()
    np.fill_diagonal(dist, np.inf)
    ids = list(range(N))            # slot -> cluster id
    size = np.ones(N)
    active = np.ones(N, dtype=bool)
    Z = np.zeros((N - 1, 4))
    for t in range(N - 1):
        sub = np.where(active[:, None] & active[None, :], dist, np.inf)
        h = sub.min()
        cand = np.argwhere(sub == h)
        # among tied pairs pick the one with the smallest (min id, max id)
        key = [(min(ids[i], ids[j]), max(ids[i], ids[j])) for i, j in cand]
        i, j = cand[int(np.argmin([a * (2 * N) + b for a, b in key]))]
        if ids[i] > ids[j]:
            i, j = j, i
        Z[t] = (ids[i], ids[j], h, size[i] + size[j])
        merged = (size[i] * dist[i] + size[j] * dist[j]) / (size[i] + size[j])
        dist[i, :] = merged
        dist[:, i] = merged
        dist[i, i] = np.inf
        active[j] = False
        dist[j, :] = np.inf
        dist[:, j] = np.inf
        size[i] += size[j]
        ids[i] = N + t
    return Z


def inconsistency(Z, depth: int = 2) -> np.ndarray:
    """Per-link ``[mean, std, count, coefficient]`` over links within ``depth`` levels.

    The standard deviation uses ``ddof=1``; the coefficient is
    ``(height - mean) / std``, or 0 when the std is 0 (including a
    single-link neighbourhood).
    """
    Z = np.asarray(Z, dtype=float)
    N = Z.shape[0] + 1
    R = np.zeros((N - 1, 4))
    for t in range(N - 1):
        heights = []
        stack = [(t, 1)]
        while stack:
            node, level = stack.pop()
            heights.append(Z[node, 2])
            if level < depth:
                for child in Z[node, :2].astype(int):
                    if child >= N:
                        stack.append((child - N, level + 1))
        h = np.array(heights)
        mean = h.mean()
        std = h.std(ddof=1) if h.size > 1 else 0.0
        R[t] = (mean, std, h.size, (Z[t, 2] - mean) / std if std > 0 else 0.0)
    return R


def leaves_under(Z, node: int) -> list[int]:
    """Leaf indices under cluster id ``node`` in left-to-right dendrogram order."""
    N = len(Z) + 1
    out, stack = [], [int(node)]
    while stack:
        c = stack.pop()
        if c < N:
            out.append(c)
        else:
            left, right = Z[c - N, :2].astype(int)
            stack.extend((right, left))
    return out


@dataclass
class Dendrogram:
    labels: list[str]
    linkage: np.ndarray
    inconsistency: np.ndarray
    depth: int = 2

    @property
    def n_leaves(self) -> int:
        return len(self.labels)

    @property
    def leaf_order(self) -> list[int]:
        return leaves_under(self.linkage, 2 * self.n_leaves - 2)

    @property
    def heights(self) -> np.ndarray:
        return self.linkage[:, 2]

    def to_dict(self) -> dict:
        N = self.n_leaves
        name = lambda c: self.labels[c] if c < N else f"cluster{c}"   # noqa: E731
        return {
            "labels": self.labels,
            "inconsistency_depth": self.depth,
            "leaf_order": [self.labels[i] for i in self.leaf_order],
            "merges": [
                {"id": N + t, "left": name(int(a)), "right": name(int(b)), "height": float(h), "size": int(s),
                 "inconsistency": float(self.inconsistency[t, 3])}
                for t, (a, b, h, s) in enumerate(self.linkage)
            ],
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def hierarchical_cluster(D, labels: Sequence[str] | None = None, depth: int = 2) -> Dendrogram:
    Z = upgma(D)
    if np.any(np.diff(Z[:, 2]) < -1e-9 * max(1.0, float(Z[:, 2].max()))):
        raise AssertionError("average-linkage heights are not monotone")
    labels = list(labels) if labels is not None else [str(i) for i in range(len(Z) + 1)]
    return Dendrogram(labels, Z, inconsistency(Z, depth), depth)


def detect_distinct(dendrogram: Dendrogram, cutoff: float) -> list[str]:
    """Stocks split off the majority body by links more inconsistent than ``cutoff``."""
    Z, N = dendrogram.linkage, dendrogram.n_leaves
    coef = dendrogram.inconsistency[:, 3]
    node = 2 * N - 2
    distinct: list[int] = []
    while node >= N and coef[node - N] > cutoff:
        left, right = Z[node - N, :2].astype(int)
        nl, nr = len(leaves_under(Z, left)), len(leaves_under(Z, right))
        if nl == nr:
            break
        major, minor = (left, right) if nl > nr else (right, left)
        distinct.extend(leaves_under(Z, minor))
        node = major
    if not distinct:
        warnings.warn("no link above the inconsistency cutoff splits off a minority", RuntimeWarning, stacklevel=2)
    return sorted(dendrogram.labels[i] for i in distinct)


def distinct_by_distance(found: Mapping[str, Sequence[str]]):
    """Per-distance distinct sets and their intersection."""
    sets = {k: sorted(v) for k, v in found.items()}
    inter = sorted(set.intersection(*(set(v) for v in sets.values()))) if sets else []
    return sets, inter


def write_distinct_table(found: Mapping[str, Sequence[str]], path) -> None:
    """One row per flagged stock, one 0/1 column per distance plus ``all``."""
    sets, inter = distinct_by_distance(found)
    stocks = sorted(set().union(*map(set, sets.values()))) if sets else []
    table = pd.DataFrame({k: [int(s in set(v)) for s in stocks] for k, v in sets.items()},
                         index=pd.Index(stocks, name="instrument"))
    table["all"] = [int(s in inter) for s in stocks]
    table.to_csv(path)


def dendrogram_svg(dendrogram: Dendrogram, title: str = "", width: int = 900, height: int = 420) -> str:
    """Plain SVG rendering with leaves along the bottom and U-shaped links."""
    Z, N = dendrogram.linkage, dendrogram.n_leaves
    order = dendrogram.leaf_order
    margin_l, margin_r, margin_t, margin_b = 50, 20, 30, 70
    pw, ph = width - margin_l - margin_r, height - margin_t - margin_b
    top = float(Z[:, 2].max()) or 1.0
    xs, ys = {}, {}
    for pos, leaf in enumerate(order):
        xs[leaf] = margin_l + pw * (pos + 0.5) / N
        ys[leaf] = margin_t + ph
    y_of = lambda h: margin_t + ph * (1.0 - h / top)   # noqa: E731
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">',
             f'<rect width="{width}" height="{height}" fill="white"/>']
    if title:
        parts.append(f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{_esc(title)}</text>')
    for t, (a, b, h, _) in enumerate(Z):
        a, b = int(a), int(b)
        yh = y_of(h)
        parts.append(f'<path d="M{xs[a]:.1f},{ys[a]:.1f} V{yh:.1f} H{xs[b]:.1f} V{ys[b]:.1f}" '
                     f'fill="none" stroke="#1f4e79" stroke-width="1"/>')
        xs[N + t], ys[N + t] = (xs[a] + xs[b]) / 2.0, yh
    for pos, leaf in enumerate(order):
        x = xs[leaf]
        parts.append(f'<text x="{x:.1f}" y="{margin_t + ph + 8:.1f}" transform="rotate(90 {x:.1f} '
                     f'{margin_t + ph + 8:.1f})">{_esc(dendrogram.labels[leaf])}</text>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = y_of(top * frac)
        parts.append(f'<line x1="{margin_l - 4}" y1="{y:.1f}" x2="{margin_l}" y2="{y:.1f}" stroke="black"/>')
        parts.append(f'<text x="{margin_l - 6}" y="{y + 3:.1f}" text-anchor="end">{top * frac:.3g}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _esc(s: str) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def cluster_stocks(bundles: Mapping[str, np.ndarray], kinds: Sequence[str] = DISTANCE_KINDS,
                   cutoff: float = 1.0, mode: str = "sum", depth: int = 2):
    """Normalize, cluster under every distance kind and detect distinct stocks.

    Returns ``(dendrograms, distinct, intersection)`` keyed by distance kind.
    """
    normed = minmax_normalize(bundles)
    names = sorted(normed)
    X = np.stack([normed[s] for s in names])
    dendros, found = {}, {}
    for kind in kinds:
        dendros[kind] = hierarchical_cluster(stock_distance_matrix(X, kind, mode), names, depth)
        found[kind] = detect_distinct(dendros[kind], cutoff)
    sets, inter = distinct_by_distance(found)
    return dendros, sets, inter
