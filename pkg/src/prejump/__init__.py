"""Pre-jump trading-pattern analysis on intraday bar data.

The workflow runs jump detection, attribute extraction, per-stock
representation, mutual-information scoring, mRMR indicator selection and
hierarchical clustering of stocks. The public names below cover the
library use; :mod:`prejump.pipeline` and :mod:`prejump.cli` drive batch
runs.
"""

from .attributes import ATTRIBUTE_IDS, compute_attributes, compute_liquidity, compute_technical, standardize
from .clustering import cluster_stocks, detect_distinct, hierarchical_cluster, minmax_normalize, upgma
from .distances import DISTANCE_KINDS, chebychev, dtw, euclidean, pairwise
from .jumps import JumpTestConfig, detect_jumps, gumbel_threshold
from .market_data import BarPanel, SessionTemplate, resample_to_bars
from .mrmr import intersect_settings, objective, select_indicators
from .mutual_information import (corrected_mi_ts_class, corrected_mi_ts_ts, informativeness_report, mi_ts_class,
                                 mi_ts_ts, redundancy_matrix)
from .sampling import WindowSpec, build_samples
from .synthetic import JumpSpec, PrejumpPattern, generate_synthetic_universe

__version__ = "0.1.0"
