"""Seeded Monte Carlo sweeps over the maximum transmit power.

Seed splitting rule: trial ``t`` of power point ``p`` draws all of its
randomness, in a fixed order, from
``numpy.random.SeedSequence(master_seed, spawn_key=(p, t))``.  Spawn keys
are distinct tuples, so the derivation is injective, and every algorithm in a
trial sees the same scene, pilots, activity and noise.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .algorithm import run_distributed_vb, run_genie
from .config import ExperimentConfig
from .dictionary import build_dictionary, build_pilots
from .fusion import DetectionResult, perturb_lsfc, select_masters
from .metrics import TrialScore, aggregate, score_trial
from .scene import (allocate_power, generate_scene, sample_activity, synthesize_received,
                    with_powers)

log = logging.getLogger(__name__)

THREADS_ENV = "FLEXGFRA_THREADS"


@dataclass(frozen=True)
class ResultRecord:
    algorithm: str
    p_max_mw: float
    trials: int
    p_md: float | None
    p_md_ci_low: float | None
    p_md_ci_high: float | None
    fa_rate: float | None
    offset_accuracy: float | None
    nmse: float | None
    nmse_db: float | None
    wall_time_s: float | None
    seed: int
    fa_ci_low: float | None = None
    fa_ci_high: float | None = None
    nmse_ci_low: float | None = None
    nmse_ci_high: float | None = None
    nmse_trial_mean: float | None = None


CSV_FIELDS = [f.name for f in dataclasses.fields(ResultRecord)]
_INT_FIELDS = {"trials", "seed"}
_STR_FIELDS = {"algorithm"}


def _sig12(x):
    return None if x is None else float(f"{x:.12g}")


def trial_seed(master_seed, power_index, trial_index) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(power_index, trial_index))


def run_trial(config: ExperimentConfig, power_index, trial_index) -> dict:
    """One access attempt scored under every configured algorithm.

    Returns ``{algorithm: (TrialScore, seconds)}``.
    """
    rng = np.random.default_rng(trial_seed(config.master_seed, power_index, trial_index))
    p_max = config.p_max_sweep_mw[power_index]
    scene_cfg = dataclasses.replace(config.scene, p_max_tx_mw=p_max)
    W = config.window

    scene = generate_scene(scene_cfg, rng)
    pilots = build_pilots(scene_cfg.num_ues, W, config.pilot_length_range, rng)
    dictionary = build_dictionary(pilots)
    truth = sample_activity(scene_cfg, scene, pilots.lengths, W, rng)
    if truth.num_active:
        masters = select_masters(scene.lsfc_linear)
        truth = with_powers(truth, allocate_power(scene, masters, truth, p_max))
    signals = synthesize_received(scene, pilots, truth, rng, config.noise_scale)
    lsfc_cpu = perturb_lsfc(scene.lsfc_linear, config.lsfc_error_db, rng)

    out = {}
    for name in config.algorithms:
        start = time.perf_counter()
        if name == "genie":
            result = _genie_result(config, scene, dictionary, truth, signals.z)
        else:
            result = run_distributed_vb(dictionary, signals.z, lsfc_cpu, config.hyper,
                                        fusion=(name == "vb-fusion"),
                                        threshold=config.threshold)
        score = score_trial(result, truth, dictionary)
        out[name] = (score, time.perf_counter() - start)
    return out


def _genie_result(config, scene, dictionary, truth, z) -> DetectionResult:
    order = np.argsort(truth.active_set)
    active = truth.active_set[order]
    offsets = truth.start_offsets[order]
    rows = dictionary.row_of(active, offsets)
    prior = scene.lsfc_linear[:, active] * (truth.tx_powers_mw[order] / 1e3)
    estimates = run_genie(dictionary, z, rows, prior * config.genie_prior_scale)
    return DetectionResult(alpha_min=np.zeros(dictionary.num_ues), detected_set=active,
                           detected_offsets=offsets, detected_rows=rows,
                           channel_estimates=estimates)


def _run_point_trial(args):
    config, p, t = args
    return p, t, run_trial(config, p, t)


def resolve_threads(threads=None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1"))
    if threads < 1:
        raise ValueError("thread count must be at least 1")
    return threads


def run_experiment(config: ExperimentConfig, threads=None) -> list[ResultRecord]:
    """Full sweep; one :class:`ResultRecord` per (algorithm, power point).

    Records are ordered by algorithm (config order) then power (sweep order).
    Results do not depend on ``threads``.
    """
    threads = resolve_threads(threads)
    jobs = [(config, p, t) for p in range(len(config.p_max_sweep_mw))
            for t in range(config.trials_per_point)]
    results = {}
    if threads == 1:
        for job in jobs:
            p, t, res = _run_point_trial(job)
            results[p, t] = res
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for p, t, res in pool.map(_run_point_trial, jobs, chunksize=4):
                results[p, t] = res
    log.info("finished %d trials", len(jobs))

    records = []
    for name in config.algorithms:
        for p, p_max in enumerate(config.p_max_sweep_mw):
            per_trial = [results[p, t][name] for t in range(config.trials_per_point)]
            records.append(_make_record(name, p_max, config.master_seed,
                                        [s for s, _ in per_trial],
                                        sum(sec for _, sec in per_trial)))
    return records


def _make_record(name, p_max, seed, scores: list[TrialScore], seconds) -> ResultRecord:
    s = aggregate(scores)
    if s.nmse is None:
        nmse_db = None
    else:
        nmse_db = 10 * math.log10(s.nmse) if s.nmse > 0 else -math.inf
    p_ci = s.p_md_ci or (None, None)
    fa_ci = s.fa_ci or (None, None)
    n_ci = s.nmse_ci or (None, None)
    return ResultRecord(
        algorithm=name, p_max_mw=_sig12(p_max), trials=s.trials,
        p_md=_sig12(s.p_md), p_md_ci_low=_sig12(p_ci[0]), p_md_ci_high=_sig12(p_ci[1]),
        fa_rate=_sig12(s.fa_rate), offset_accuracy=_sig12(s.offset_accuracy),
        nmse=_sig12(s.nmse), nmse_db=_sig12(nmse_db), wall_time_s=_sig12(seconds),
        seed=int(seed), fa_ci_low=_sig12(fa_ci[0]), fa_ci_high=_sig12(fa_ci[1]),
        nmse_ci_low=_sig12(n_ci[0]), nmse_ci_high=_sig12(n_ci[1]),
        nmse_trial_mean=_sig12(s.nmse_trial_mean),
    )


def _fmt(name, value):
    if value is None:
        return ""
    if name in _INT_FIELDS or name in _STR_FIELDS:
        return str(value)
    return f"{value:.12g}"


def emit_csv(records, path, include_timing=False) -> None:
    """Write records under the fixed ``CSV_FIELDS`` header.

    ``wall_time_s`` is left empty unless ``include_timing`` is set, which keeps
    the file byte-identical across reruns of the same configuration.
    """
    if not records:
        raise ValueError("no records to write")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for rec in records:
            row = dataclasses.asdict(rec)
            if not include_timing:
                row["wall_time_s"] = None
            writer.writerow([_fmt(k, row[k]) for k in CSV_FIELDS])


def read_csv(path) -> list[ResultRecord]:
    records = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != CSV_FIELDS:
            raise ValueError(f"unexpected CSV header in {path}: {reader.fieldnames}")
        for row in reader:
            values = {}
            for k, v in row.items():
                if v == "":
                    values[k] = None
                elif k in _INT_FIELDS:
                    values[k] = int(v)
                elif k in _STR_FIELDS:
                    values[k] = v
                else:
                    values[k] = float(v)
            records.append(ResultRecord(**values))
    return records


PLOT_METRICS = ("p_md", "nmse", "nmse_db")


def emit_plotdata(records, directory) -> list[Path]:
    """Two-column ``p_max_mw value`` series, one file per algorithm and metric.

    Files are named ``<algorithm>_<metric>.dat`` and sorted by power; points
    whose metric is undefined are skipped.
    """
    if not records:
        raise ValueError("no records to write")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name in dict.fromkeys(r.algorithm for r in records):
        rows = sorted((r for r in records if r.algorithm == name), key=lambda r: r.p_max_mw)
        for metric in PLOT_METRICS:
            path = directory / f"{name}_{metric}.dat"
            with open(path, "w") as f:
                f.write(f"# algorithm={name} metric={metric}\n# p_max_mw {metric}\n")
                for r in rows:
                    value = getattr(r, metric)
                    if value is not None:
                        f.write(f"{r.p_max_mw:.12g} {value:.12g}\n")
            written.append(path)
    return written
