"""Forward minimum-redundancy maximum-relevance selection.

The objective of a subset ``S`` is::

    J(S) = sum_{s in S} rel(s) - 1/(2|S|) * sum_{s in S} sum_{q in S, q != s} red(s, q)

with ``J(empty) = 0``. Features are added greedily: first the most relevant
one, then at each step the candidate maximizing ``rel(q) - mean_{s in S}
red(q, s)`` (or the sum instead of the mean). The reported subset is the
prefix of the greedy order with the largest ``J``; ties go to the shorter
prefix and, inside a step, to the lower feature index.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import pandas as pd


def objective(subset, relevance, redundancy) -> float:
    """``J`` of a subset of feature indices."""
    S = list(subset)
    if not S:
        return 0.0
    rel = np.asarray(relevance, dtype=float)
    red = np.asarray(redundancy, dtype=float)
    block = red[np.ix_(S, S)]
    return float(rel[S].sum() - (block.sum() - np.trace(block)) / (2.0 * len(S)))


@dataclass
class SelectionState:
    names: list[str]
    relevance: np.ndarray             # clamped
    redundancy: np.ndarray            # clamped, symmetric
    order: list[int]                  # full greedy order
    criteria: list[np.ndarray]        # step criterion of every feature (NaN once selected)
    scores: list[float]               # J of each prefix of ``order``
    selected: list[int] = field(default_factory=list)
    redundancy_form: str = "mean"

    @property
    def selected_names(self) -> list[str]:
        return [self.names[i] for i in self.selected]

    @property
    def best_score(self) -> float:
        return self.scores[len(self.selected) - 1] if self.selected else 0.0

    def trace(self) -> list[dict]:
        return [
            {"step": t + 1, "pick": self.names[i], "criterion": float(self.criteria[t][i]),
             "J": float(self.scores[t]), "in_subset": t < len(self.selected)}
            for t, i in enumerate(self.order)
        ]

    def to_json(self, path) -> None:
        payload = {"redundancy_form": self.redundancy_form, "selected": self.selected_names,
                   "J": self.best_score, "trace": self.trace()}
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def select_indicators(relevance, redundancy, names: Sequence[str] | None = None, *,
                      redundancy_form: str = "mean", clamp: bool = True) -> SelectionState:
    """Greedy forward selection followed by the best-prefix cut.

    Negative MI values (noise below the zero baseline) are clamped to 0
    unless ``clamp`` is False.
    """
    rel = np.asarray(relevance, dtype=float).copy()
    red = np.asarray(redundancy, dtype=float).copy()
    P = rel.size
    if P == 0:
        raise ValueError("no features to select from")
    if red.shape != (P, P):
        raise ValueError(f"redundancy must be {P}x{P}, got {red.shape}")
    if not np.allclose(red, red.T, equal_nan=False):
        raise ValueError("redundancy matrix must be symmetric")
    if np.isnan(rel).any() or np.isnan(red).any():
        raise ValueError("relevance and redundancy must not contain NaN")
    if redundancy_form not in ("mean", "sum"):
        raise ValueError("redundancy_form must be 'mean' or 'sum'")
    if clamp:
        rel = np.maximum(rel, 0.0)
        red = np.maximum(red, 0.0)
    np.fill_diagonal(red, 0.0)
    names = list(names) if names is not None else [str(i) for i in range(P)]

    chosen = np.zeros(P, dtype=bool)
    red_sum = np.zeros(P)
    order, criteria, scores = [], [], []
    pair_sum = 0.0
    for t in range(P):
        if t == 0:
            crit = rel.copy()
        else:
            crit = rel - (red_sum / t if redundancy_form == "mean" else red_sum)
        crit = np.where(chosen, np.nan, crit)
        i = int(np.nanargmax(crit))       # first maximum: index-order tie break
        pair_sum += 2.0 * red_sum[i]
        chosen[i] = True
        red_sum += red[i]
        order.append(i)
        criteria.append(crit)
        scores.append(float(rel[order].sum() - pair_sum / (2.0 * (t + 1))))

    best_len, best = 0, 0.0
    for t, s in enumerate(scores):
        if s > best:
            best_len, best = t + 1, s
    return SelectionState(names, rel, red, order, criteria, scores, order[:best_len], redundancy_form)


def intersect_settings(selections: Mapping[str, Sequence[str]], attributes: Sequence[str] | None = None):
    """Attributes chosen under every setting, and a presence matrix.

    Returns ``(intersection, presence)`` where ``presence`` has one row per
    attribute and one boolean column per setting.
    """
    if not selections:
        raise ValueError("need at least one setting")
    if attributes is None:
        seen = []
        for chosen in selections.values():
            seen.extend(a for a in chosen if a not in seen)
        attributes = seen
    presence = pd.DataFrame({s: [a in set(chosen) for a in attributes] for s, chosen in selections.items()},
                            index=pd.Index(list(attributes), name="attribute"))
    inter = [a for a in attributes if presence.loc[a].all()]
    if not inter:
        warnings.warn("no attribute is selected under every setting", RuntimeWarning, stacklevel=2)
    return inter, presence


def write_selection_table(presence: pd.DataFrame, path) -> None:
    """Presence table with an ``all`` column for the intersection."""
    table = presence.astype(int)
    table["all"] = presence.all(axis=1).astype(int)
    table.to_csv(path)
