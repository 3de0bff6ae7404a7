"""Run configuration and the batch stages behind the command line.

Every stage reads its inputs from a run directory and writes its artifacts
back atomically. :func:`run_pipeline` chains all stages, handing results
over in memory, and finishes with a manifest of artifact hashes. All
randomness derives from the single config seed through a per-stage name.
"""

from __future__ import annotations

import copy
import datetime as dt
import dataclasses
import hashlib
import json
import os
import tempfile
import zlib
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd

from . import attributes as attr
from . import clustering, jumps, mrmr, sampling, synthetic
from .distances import DISTANCE_KINDS
from .market_data import BarPanel, SessionTemplate, read_records_csv, resample_to_bars
from .mutual_information import (attribute_ranks, informativeness_report, pairwise_rank_stability,
                                 redundancy_matrix)


class ConfigError(ValueError):
    """Missing or invalid configuration key (the message names the key)."""


DEFAULTS = {
    "seed": None,
    "session": None,
    "simulate": {"n_stocks": 20, "n_days": 250, "jump_rate": 0.1, "jump_size": [8.0, 14.0], "p_positive": 0.5,
                 "sigma": 0.002, "patterns": [], "start_date": "2014-01-02"},
    "jump_test": {"K": 240, "alpha": 0.01},
    "window": {"length": 48, "steady_day_gap": 5},
    "exclusions": {"preset": "default", "filters": []},
    "mi": {"distances": list(DISTANCE_KINDS), "ks": [1, 3, 5], "windows": [48, 36, 24, 12, 6],
           "n_permutations": 100},
    "mrmr": {"redundancy_form": "mean", "window": 48},
    "clustering": {"cutoff": 1.0, "mode": "sum", "depth": 2},
}
PATTERN_KEYS = {f.name for f in dataclasses.fields(synthetic.PrejumpPattern)} | {"stocks"}


def bundled_config(name: str = "planted20") -> dict:
    text = resources.files("prejump").joinpath("configs", f"{name}.json").read_text()
    return json.loads(text)


def _need(cond: bool, key: str, what: str) -> None:
    if not cond:
        raise ConfigError(f"config key '{key}' {what}")


def _int_list(v, key, lo=1):
    _need(isinstance(v, list) and v and all(isinstance(x, int) and x >= lo for x in v), key,
          f"must be a non-empty list of integers >= {lo}")
    return v


def validate_config(raw: dict) -> dict:
    """Merge ``raw`` over the defaults and check every key; returns a new dict."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    _need("seed" in raw, "seed", "is missing")
    cfg = copy.deepcopy(DEFAULTS)
    for section, value in raw.items():
        if isinstance(DEFAULTS[section], dict):
            _need(isinstance(value, dict), section, "must be an object")
            extra = sorted(set(value) - set(DEFAULTS[section]))
            if extra:
                raise ConfigError(f"unknown config key(s): {', '.join(f'{section}.{k}' for k in extra)}")
            cfg[section].update(copy.deepcopy(value))
        else:
            cfg[section] = copy.deepcopy(value)

    _need(isinstance(cfg["seed"], int) and cfg["seed"] >= 0, "seed", "must be a non-negative integer")
    if cfg["session"] is not None:
        try:
            SessionTemplate.from_dict(cfg["session"])
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"config key 'session' is invalid: {exc}") from None
    s = cfg["simulate"]
    for key in ("n_stocks", "n_days"):
        _need(isinstance(s[key], int) and s[key] >= 1, f"simulate.{key}", "must be a positive integer")
    _need(isinstance(s["jump_rate"], (int, float)) and s["jump_rate"] >= 0, "simulate.jump_rate",
          "must be a non-negative number")
    _need(isinstance(s["sigma"], (int, float)) and s["sigma"] > 0 or
          (isinstance(s["sigma"], list) and len(s["sigma"]) == 2), "simulate.sigma",
          "must be a positive number or a [low, high] pair")
    _need(isinstance(s["patterns"], list), "simulate.patterns", "must be a list")
    for i, p in enumerate(s["patterns"]):
        key = f"simulate.patterns[{i}]"
        _need(isinstance(p, dict) and "stocks" in p, key, "must be an object with a 'stocks' entry")
        extra = sorted(set(p) - PATTERN_KEYS)
        _need(not extra, f"{key}.{extra[0] if extra else ''}", "is not a pattern parameter")
        _need(p["stocks"] == "all" or (isinstance(p["stocks"], list) and all(isinstance(x, int) for x in p["stocks"])),
              f"{key}.stocks", "must be 'all' or a list of stock indices")
    j = cfg["jump_test"]
    _need(isinstance(j["K"], int) and j["K"] >= 3, "jump_test.K", "must be an integer >= 3")
    _need(isinstance(j["alpha"], (int, float)) and 0 < j["alpha"] < 1, "jump_test.alpha", "must lie in (0, 1)")
    w = cfg["window"]
    _need(isinstance(w["length"], int) and w["length"] >= 1, "window.length", "must be a positive integer")
    _need(isinstance(w["steady_day_gap"], int) and w["steady_day_gap"] >= 0, "window.steady_day_gap",
          "must be a non-negative integer")
    e = cfg["exclusions"]
    _need(e["preset"] in (*sampling.PRESETS, "none"), "exclusions.preset",
          f"must be one of {sorted(sampling.PRESETS) + ['none']}")
    _need(isinstance(e["filters"], list), "exclusions.filters", "must be a list")
    for i, f in enumerate(e["filters"]):
        try:
            sampling.ExclusionFilter.from_dict(f)
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"config key 'exclusions.filters[{i}]' is invalid: {exc}") from None
    m = cfg["mi"]
    _need(isinstance(m["distances"], list) and m["distances"] and set(m["distances"]) <= set(DISTANCE_KINDS),
          "mi.distances", f"must be a non-empty subset of {list(DISTANCE_KINDS)}")
    _int_list(m["ks"], "mi.ks")
    _int_list(m["windows"], "mi.windows")
    _need(max(m["windows"]) <= w["length"], "mi.windows", "must not exceed window.length")
    _need(isinstance(m["n_permutations"], int) and m["n_permutations"] >= 1, "mi.n_permutations",
          "must be a positive integer")
    r = cfg["mrmr"]
    _need(r["redundancy_form"] in ("mean", "sum"), "mrmr.redundancy_form", "must be 'mean' or 'sum'")
    _need(r["window"] in m["windows"], "mrmr.window", "must be one of mi.windows")
    c = cfg["clustering"]
    _need(isinstance(c["cutoff"], (int, float)), "clustering.cutoff", "must be a number")
    _need(c["mode"] in ("sum", "rss"), "clustering.mode", "must be 'sum' or 'rss'")
    _need(isinstance(c["depth"], int) and c["depth"] >= 1, "clustering.depth", "must be a positive integer")
    return cfg


def load_config(path=None) -> dict:
    """Validated config from a JSON file (the bundled planted universe when ``path`` is None)."""
    if path is None:
        return validate_config(bundled_config())
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    return validate_config(raw)


def derive_seed(seed: int, stage: str) -> int:
    """Stage seed derived from the run seed and the stage name."""
    return int(np.random.SeedSequence([int(seed), zlib.crc32(stage.encode())]).generate_state(1)[0])


# --- file helpers ---------------------------------------------------------


def atomic_write(path, writer) -> None:
    """Call ``writer(tmp_path)`` and move the result onto ``path``; nothing is left behind on failure."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, payload) -> None:
    def w(tmp):
        with open(tmp, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    atomic_write(path, w)


def write_csv(path, df: pd.DataFrame, index: bool = False) -> None:
    atomic_write(path, lambda tmp: df.to_csv(tmp, index=index, float_format="%.17g"))


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"{path} not found; run the '{stage}' stage first")
    return path


def read_universe_bars(path) -> list[BarPanel]:
    df = pd.read_csv(path, dtype={"instrument": str, "date": str}, float_precision="round_trip")
    return [BarPanel.from_frame(g) for _, g in df.groupby("instrument", sort=True)]


def write_universe_bars(panels, path) -> None:
    def w(tmp):
        with open(tmp, "w", newline="") as fh:
            for i, p in enumerate(panels):
                p.to_frame().to_csv(fh, index=False, header=i == 0, float_format="%.17g")
    atomic_write(path, w)


def read_events(path) -> dict[str, list[jumps.JumpEvent]]:
    """Jump events per instrument from ``jumps.csv`` (day indices restored from ``bars.csv`` dates)."""
    df = pd.read_csv(path, dtype={"instrument": str, "date": str}, float_precision="round_trip")
    out: dict[str, list[jumps.JumpEvent]] = {}
    for row in df.to_dict("records"):
        out.setdefault(row["instrument"], []).append(jumps.JumpEvent(
            row["instrument"], row["date"], int(row["interval"]), int(row["day"]), float(row["return"]),
            float(row["L"]), int(row["flag_sign"]), bool(row["degenerate"])))
    return out


def _events_table(events) -> pd.DataFrame:
    df = jumps.events_frame(events)
    df.insert(2, "day", [e.day_index for e in events])
    return df


# --- run context ----------------------------------------------------------


class Run:
    """A run directory plus the results already loaded or computed in this process."""

    def __init__(self, config: dict, run_dir, threads: int = 1):
        self.config = config
        self.dir = Path(run_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.threads = max(1, int(threads))
        self._cache: dict = {}
        self.written: list[str] = []

    def path(self, name: str) -> Path:
        return self.dir / name

    def note(self, *names: str) -> None:
        for n in names:
            if n not in self.written:
                self.written.append(n)

    def map(self, fn, items):
        items = list(items)
        if self.threads == 1 or len(items) < 2:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(self.threads) as pool:
            return list(pool.map(fn, items))

    @property
    def template(self) -> SessionTemplate:
        s = self.config["session"]
        return SessionTemplate() if s is None else SessionTemplate.from_dict(s)

    @property
    def panels(self) -> list[BarPanel]:
        if "panels" not in self._cache:
            self._cache["panels"] = read_universe_bars(_require(self.path("bars.csv"), "simulate"))
        return self._cache["panels"]

    @property
    def events(self) -> dict:
        if "events" not in self._cache:
            self._cache["events"] = read_events(_require(self.path("jumps.csv"), "detect-jumps"))
        return self._cache["events"]

    @property
    def matrices(self) -> list:
        if "matrices" not in self._cache:
            self._cache["matrices"] = attr.read_attribute_csv(_require(self.path("attributes.csv"), "attributes"))
        return self._cache["matrices"]

    @property
    def samples(self) -> sampling.SampleSet:
        if "samples" not in self._cache:
            self._cache["samples"] = sampling.SampleSet.from_json(_require(self.path("samples.json"), "samples"))
        return self._cache["samples"]

    @property
    def report(self) -> pd.DataFrame:
        if "report" not in self._cache:
            self._cache["report"] = pd.read_csv(_require(self.path("mi_report.csv"), "mi-report"), float_precision="round_trip")
        return self._cache["report"]

    @property
    def intersection(self) -> list[str]:
        if "intersection" not in self._cache:
            df = pd.read_csv(_require(self.path("selected_indicators.csv"), "select"))
            self._cache["intersection"] = df.loc[df["all"] == 1, "attribute"].tolist()
        return self._cache["intersection"]


# --- stages ---------------------------------------------------------------


def simulate_universe(config: dict) -> synthetic.SyntheticUniverse:
    s = config["simulate"]
    n = s["n_stocks"]
    patterns: dict[int, synthetic.PrejumpPattern] = {}
    for p in s["patterns"]:
        params = {k: v for k, v in p.items() if k != "stocks"}
        for i in range(n) if p["stocks"] == "all" else p["stocks"]:
            if not 0 <= i < n:
                raise ConfigError(f"config key 'simulate.patterns' names stock {i} outside 0..{n - 1}")
            patterns[i] = synthetic.PrejumpPattern(**params)
    size = s["jump_size"]
    spec = synthetic.JumpSpec(rate_per_day=float(s["jump_rate"]),
                              size_sigma=tuple(size) if isinstance(size, list) else float(size),
                              p_positive=float(s["p_positive"]))
    sigma = tuple(s["sigma"]) if isinstance(s["sigma"], list) else float(s["sigma"])
    return synthetic.generate_synthetic_universe(
        n, s["n_days"], spec, derive_seed(config["seed"], "simulate"),
        template=SessionTemplate() if config["session"] is None else SessionTemplate.from_dict(config["session"]),
        sigma=sigma, patterns=patterns or None, start_date=dt.date.fromisoformat(s["start_date"]))


def stage_simulate(run: Run) -> None:
    u = simulate_universe(run.config)
    write_universe_bars(u.panels, run.path("bars.csv"))
    write_csv(run.path("truth_jumps.csv"), u.jump_log())
    run._cache["panels"] = u.panels
    run.note("bars.csv", "truth_jumps.csv")


def stage_resample(run: Run, record_files) -> None:
    """Bars from per-instrument record files (instrument id = file stem)."""
    panels, log = [], {}
    for f in sorted(record_files, key=lambda p: Path(p).stem):
        f = Path(f)
        res = resample_to_bars(read_records_csv(f), run.template, f.stem)
        panels.append(BarPanel.from_bars(res.bars, run.template.intervals_per_day))
        log[f.stem] = {"bars": len(res.bars), "skipped_records": res.skipped}
    if not panels:
        raise ValueError("no record files given")
    write_universe_bars(panels, run.path("bars.csv"))
    write_json(run.path("resample_log.json"), log)
    run._cache["panels"] = panels
    run.note("bars.csv", "resample_log.json")


def stage_detect_jumps(run: Run) -> None:
    j = run.config["jump_test"]
    M = run.template.intervals_per_day
    cfg = jumps.JumpTestConfig(K=j["K"], alpha=j["alpha"], M=M)
    found = run.map(lambda p: jumps.detect_jumps(p, cfg), run.panels)
    events = {p.instrument: ev for p, ev in zip(run.panels, found)}
    flat = [e for p in run.panels for e in events[p.instrument]]
    write_csv(run.path("jumps.csv"), _events_table(flat))
    summary = jumps.jump_summary(flat)
    summary["per_instrument"] = {k: len(v) for k, v in sorted(events.items())}
    summary["threshold_L"] = jumps.critical_statistic(M * max(p.n_days for p in run.panels), j["alpha"])
    write_json(run.path("jump_summary.json"), summary)
    run._cache["events"] = events
    run.note("jumps.csv", "jump_summary.json")


def stage_attributes(run: Run) -> None:
    mats = run.map(lambda p: attr.standardize(attr.compute_attributes(p)), run.panels)
    atomic_write(run.path("attributes.csv"), lambda tmp: attr.write_attribute_csv(mats, tmp))
    run._cache["matrices"] = mats
    run.note("attributes.csv")


def _filters(config: dict):
    e = config["exclusions"]
    base = [] if e["preset"] == "none" else sampling.PRESETS[e["preset"]]()
    return base + [sampling.ExclusionFilter.from_dict(f) for f in e["filters"]]


def stage_samples(run: Run) -> None:
    w = run.config["window"]
    spec = sampling.WindowSpec(w["length"], w["steady_day_gap"])
    panels = {p.instrument: p for p in run.panels}
    mats = run.matrices
    ss = sampling.build_samples(mats, run.events, [panels[m.instrument] for m in mats], spec,
                                _filters(run.config), derive_seed(run.config["seed"], "samples"))
    if len(ss.samples) < 2:
        raise ValueError("fewer than one instrument with both pre-jump and steady samples")
    atomic_write(run.path("samples.json"), ss.to_json)
    write_csv(run.path("exclusions.csv"), ss.ledger.to_frame())
    run._cache["samples"] = ss
    run.note("samples.json", "exclusions.csv")


def stage_mi_report(run: Run) -> None:
    m = run.config["mi"]
    X, y = run.samples.arrays()
    ids = list(run.samples.attribute_ids)
    seed = derive_seed(run.config["seed"], "mi-report")

    def one(kind):
        return informativeness_report(X, y, ids, [kind], m["ks"], m["windows"], m["n_permutations"], seed)

    report = pd.concat(run.map(one, m["distances"]), ignore_index=True)
    write_csv(run.path("mi_report.csv"), report)
    table = report.pivot_table(index="attribute", columns=["distance", "k", "window"], values="corrected",
                               sort=False)
    write_csv(run.path("mi_table.csv"), table, index=True)
    ranks = attribute_ranks(report, run.config["mrmr"]["window"])
    stab = pairwise_rank_stability(ranks)
    stab["setting_a"] = [f"{d}-k{k}" for d, k in stab["setting_a"]]
    stab["setting_b"] = [f"{d}-k{k}" for d, k in stab["setting_b"]]
    write_csv(run.path("rank_stability.csv"), stab)
    run._cache["report"] = report
    run.note("mi_report.csv", "mi_table.csv", "rank_stability.csv")


def setting_name(kind: str, k: int) -> str:
    return f"{kind}-k{k}"


def stage_select(run: Run) -> None:
    m, r = run.config["mi"], run.config["mrmr"]
    ss = run.samples
    X, _ = ss.arrays()
    length = X.shape[2]
    Xw = X[:, :, length - r["window"]:]
    ids = list(ss.attribute_ids)
    rep = run.report
    rep = rep[rep["window"] == r["window"]]
    seed = derive_seed(run.config["seed"], "select")
    settings = [(kind, k) for kind in m["distances"] for k in m["ks"]]

    def one(setting):
        kind, k = setting
        return redundancy_matrix(Xw, kind, k, m["n_permutations"], seed)

    reds = run.map(one, settings)
    selections = {}
    for (kind, k), R in zip(settings, reds):
        name = setting_name(kind, k)
        rel = rep[(rep["distance"] == kind) & (rep["k"] == k)].set_index("attribute").loc[ids, "corrected"]
        state = mrmr.select_indicators(rel.to_numpy(), R, ids, redundancy_form=r["redundancy_form"])
        selections[name] = state.selected_names
        write_csv(run.path(f"redundancy_{name}.csv"), pd.DataFrame(R, index=ids, columns=ids), index=True)
        atomic_write(run.path(f"selection_{name}.json"), state.to_json)
        run.note(f"redundancy_{name}.csv", f"selection_{name}.json")
    inter, presence = mrmr.intersect_settings(selections, ids)
    atomic_write(run.path("selected_indicators.csv"), lambda tmp: mrmr.write_selection_table(presence, tmp))
    run._cache["intersection"] = inter
    run.note("selected_indicators.csv")


def stage_cluster(run: Run) -> None:
    c = run.config["clustering"]
    inter = run.intersection
    if not inter:
        raise ValueError("the selected indicator intersection is empty; nothing to cluster")
    ss = run.samples
    idx = [ss.attribute_ids.index(a) for a in inter]
    bundles = {s: sample.series[idx] for s, sample in sorted(ss.positives().items())}
    dendros, sets, inter_stocks = clustering.cluster_stocks(bundles, run.config["mi"]["distances"], c["cutoff"],
                                                            c["mode"], c["depth"])
    for kind, d in dendros.items():
        atomic_write(run.path(f"dendrogram_{kind}.json"), d.to_json)
        svg = clustering.dendrogram_svg(d, f"{kind} distance, {len(inter)} indicators")
        atomic_write(run.path(f"dendrogram_{kind}.svg"), lambda tmp, s=svg: Path(tmp).write_text(s))
        run.note(f"dendrogram_{kind}.json", f"dendrogram_{kind}.svg")
    atomic_write(run.path("distinct_stocks.csv"), lambda tmp: clustering.write_distinct_table(sets, tmp))
    write_json(run.path("distinct_summary.json"), {"per_distance": sets, "all_distances": inter_stocks,
                                                   "indicators": inter, "cutoff": c["cutoff"]})
    run._cache["distinct"] = (sets, inter_stocks)
    run.note("distinct_stocks.csv", "distinct_summary.json")


def write_manifest(run: Run) -> None:
    names = sorted(set(run.written) | {p.name for p in run.dir.iterdir()
                                        if p.is_file() and p.name != "manifest.json" and not p.name.startswith(".")})
    write_json(run.path("manifest.json"), {"config": run.config,
                                           "artifacts": {n: sha256(run.path(n)) for n in names}})


STAGES = ("simulate", "detect-jumps", "attributes", "samples", "mi-report", "select", "cluster")


def run_pipeline(config: dict, run_dir, threads: int = 1, records=None, progress=None) -> Run:
    """All stages in order; with ``records`` the bars come from record files instead of the simulator."""
    run = Run(config, run_dir, threads)
    write_json(run.path("config.json"), config)
    run.note("config.json")
    steps = [("resample", lambda: stage_resample(run, records))] if records else [("simulate", lambda: stage_simulate(run))]
    steps += [("detect-jumps", lambda: stage_detect_jumps(run)), ("attributes", lambda: stage_attributes(run)),
              ("samples", lambda: stage_samples(run)), ("mi-report", lambda: stage_mi_report(run)),
              ("select", lambda: stage_select(run)), ("cluster", lambda: stage_cluster(run))]
    for name, fn in steps:
        if progress:
            progress(name)
        fn()
    write_manifest(run)
    return run
