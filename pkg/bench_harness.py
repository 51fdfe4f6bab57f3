#!/usr/bin/env python3
"""
Desk-scale benchmarks: surrogate-vs-execution agreement, time wasted on invalid
pipelines during optimization, and the effect of the surrogate filter on the
optimizer.

Each report is a pydantic model written as JSON with a CSV twin next to it. A
report carries a `checks` map of named consistency checks; it passes when all of
them hold. Wall-clock measurements live under `timing` keys, apart from the
counts and verdicts that are reproducible from the seeds.

Usage:
    python bench_harness.py agreement --kb kb.json --out agreement.json [--n 1000]
    python bench_harness.py wasted --out wasted.json [--budget 60] [--seeds 0 1 2]
    python bench_harness.py effect --kb kb.json --out effect.json [--init 5]
"""

import argparse
import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from tqdm import tqdm

from component_pool import ComponentSpec, ExecutionLimits, FailureReason, pool_roster
from dataset_model import SCHEMA_VERSION, Dataset, extract_token
from desk_datasets import bundled_datasets
from knowledge_base import KnowledgeBase, load_kb
from optimizer import OptimizerSettings, RunResult, TrialVerdict, optimize
from pipeline_gen import random_corpus
from surrogate_engine import evaluate_token
from t_method import Invalid, execute_pipeline

logger = logging.getLogger(__name__)

TRACE_POINTS = 21


class Stats(BaseModel):
    n: int = 0
    mean: Optional[float] = None
    std: Optional[float] = None
    min: Optional[float] = None
    max: Optional[float] = None


def summarize(values: Sequence[float]) -> Stats:
    arr = np.asarray([v for v in values if v is not None], dtype=float)
    if not len(arr):
        return Stats()
    return Stats(n=len(arr), mean=float(arr.mean()), std=float(arr.std(ddof=1)) if len(arr) > 1 else 0.0,
                 min=float(arr.min()), max=float(arr.max()))


class Report(BaseModel):
    schema_version: int = SCHEMA_VERSION
    checks: Dict[str, bool] = Field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def rows(self) -> List[dict]:
        raise NotImplementedError


def write_report(report: Report, path) -> Tuple[Path, Path]:
    """JSON at `path`, CSV twin with the same stem."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.model_dump_json(indent=2) + '\n', encoding='utf-8')
    csv_path = path.with_suffix('.csv')
    pd.DataFrame(report.rows()).to_csv(csv_path, index=False)
    logger.info(f"Wrote {path} and {csv_path}")
    return path, csv_path


def _run_cells(cells: list, run: Callable, jobs: int, desc: str, progress: bool) -> list:
    """Apply `run` to every cell; results come back in cell order."""
    results: list = [None] * len(cells)
    with tqdm(total=len(cells), desc=desc, unit='run', disable=not progress) as bar:
        if jobs <= 1:
            for i, cell in enumerate(cells):
                results[i] = run(cell)
                bar.update(1)
        else:
            with ThreadPoolExecutor(max_workers=jobs) as executor:
                futures = {executor.submit(run, cell): i for i, cell in enumerate(cells)}
                for future in as_completed(futures):
                    results[futures[future]] = future.result()
                    bar.update(1)
    return results


# ---------------------------------------------------------------------------
# Agreement
# ---------------------------------------------------------------------------

class Disagreement(BaseModel):
    pipeline: List[str]
    avatar_valid: bool
    t_method_valid: bool
    reason: Optional[str] = None
    failing_component: Optional[str] = None


class AgreementTiming(BaseModel):
    token_extraction: float = 0.0
    avatar_valid: float = 0.0
    avatar_invalid: float = 0.0
    t_method_valid: float = 0.0
    t_method_invalid: float = 0.0

    @property
    def avatar_total(self) -> float:
        return self.token_extraction + self.avatar_valid + self.avatar_invalid

    @property
    def t_method_total(self) -> float:
        return self.t_method_valid + self.t_method_invalid


class DatasetAgreement(BaseModel):
    dataset: str
    n_cells: int
    n_pipelines: int
    avatar_valid: int = 0
    avatar_invalid: int = 0
    t_method_valid: int = 0
    t_method_invalid: int = 0
    agreements: int = 0
    timeout_disagreements: int = 0
    other_disagreements: int = 0
    agreement_percent: float = 0.0
    disagreements: List[Disagreement] = Field(default_factory=list)
    timing: AgreementTiming = Field(default_factory=AgreementTiming)


class AgreementReport(Report):
    seed: int
    n_pipelines: int
    max_len: int
    timeout: float
    datasets: List[DatasetAgreement] = Field(default_factory=list)

    def rows(self) -> List[dict]:
        rows = []
        for d in self.datasets:
            row = d.model_dump(exclude={'disagreements', 'timing'})
            row.update({f"time_{k}": v for k, v in d.timing.model_dump().items()})
            rows.append(row)
        return rows


def _agreement_on(d: Dataset, corpus, kb: KnowledgeBase, limits: ExecutionLimits,
                  jobs: int, progress: bool) -> DatasetAgreement:
    started = time.perf_counter()
    token = extract_token(d)
    timing = AgreementTiming(token_extraction=time.perf_counter() - started)

    surrogate = []
    for p in corpus:
        started = time.perf_counter()
        verdict = evaluate_token(p, token, kb)
        surrogate.append((verdict, time.perf_counter() - started))

    executed = _run_cells(list(corpus), lambda p: execute_pipeline(p, d, limits), jobs,
                          f"Executing on {d.name}", progress)

    row = DatasetAgreement(dataset=d.name, n_cells=d.n_cells, n_pipelines=len(corpus))
    for p, (verdict, avatar_time), outcome in zip(corpus, surrogate, executed):
        if verdict.valid:
            row.avatar_valid += 1
            timing.avatar_valid += avatar_time
        else:
            row.avatar_invalid += 1
            timing.avatar_invalid += avatar_time
        if outcome.valid:
            row.t_method_valid += 1
            timing.t_method_valid += outcome.elapsed
        else:
            row.t_method_invalid += 1
            timing.t_method_invalid += outcome.elapsed
        if verdict.valid == outcome.valid:
            row.agreements += 1
            continue
        reason = outcome.reason.value if isinstance(outcome, Invalid) else None
        failing = outcome.failing_component if isinstance(outcome, Invalid) else verdict.failing_component
        row.disagreements.append(Disagreement(pipeline=p.component_ids, avatar_valid=verdict.valid,
                                              t_method_valid=outcome.valid, reason=reason,
                                              failing_component=failing))
        if reason == FailureReason.TIMEOUT.value:
            row.timeout_disagreements += 1
        else:
            row.other_disagreements += 1
            logger.warning(f"{d.name}: surrogate says {'valid' if verdict.valid else 'invalid'}, "
                           f"execution says otherwise for {p.describe()} ({reason or 'trained'})")
    row.agreement_percent = 100.0 * row.agreements / len(corpus)
    row.timing = timing
    return row


def bench_agreement(pool: Sequence[ComponentSpec], kb: KnowledgeBase, datasets: Sequence[Dataset],
                    n_pipelines: int, max_len: int, limits: ExecutionLimits, seed: int,
                    jobs: int = 1, progress: bool = False) -> AgreementReport:
    """Judge one random corpus with both methods on every dataset."""
    if n_pipelines < 1:
        raise ValueError(f"n_pipelines must be >= 1, got {n_pipelines}")
    corpus = random_corpus(pool, n_pipelines, max_len, seed)
    rows = [_agreement_on(d, corpus, kb, limits, jobs, progress) for d in datasets]
    for row in rows:
        logger.info(f"{row.dataset}: agreement {row.agreement_percent:.1f}% "
                    f"({row.timeout_disagreements} timeout, {row.other_disagreements} other); "
                    f"surrogate {row.timing.avatar_total:.3f}s vs execution {row.timing.t_method_total:.3f}s")
    checks = {
        'counts_sum': all(r.avatar_valid + r.avatar_invalid == r.n_pipelines
                          and r.t_method_valid + r.t_method_invalid == r.n_pipelines
                          and r.agreements + r.timeout_disagreements + r.other_disagreements == r.n_pipelines
                          for r in rows),
        'no_other_disagreements': all(r.other_disagreements == 0 for r in rows),
        'surrogate_faster': all(r.timing.avatar_total < r.timing.t_method_total for r in rows),
    }
    return AgreementReport(seed=seed, n_pipelines=n_pipelines, max_len=max_len,
                           timeout=limits.timeout, datasets=rows, checks=checks)


# ---------------------------------------------------------------------------
# Wasted time
# ---------------------------------------------------------------------------

class RunSummary(BaseModel):
    dataset: str
    seed: int
    use_avatar: bool
    init_count: int
    executed_valid: int
    executed_invalid: int
    surrogate_rejected: int
    best_error: Optional[float] = None
    valid_time: float
    invalid_time: float
    wasted_percent: float


def summarize_run(result: RunResult) -> RunSummary:
    return RunSummary(
        dataset=result.dataset, seed=result.seed, use_avatar=result.use_avatar,
        init_count=result.init_count,
        executed_valid=result.count(TrialVerdict.EXECUTED_VALID),
        executed_invalid=result.count(TrialVerdict.EXECUTED_INVALID),
        surrogate_rejected=result.count(TrialVerdict.SURROGATE_REJECTED),
        best_error=result.best.error_rate if result.best else None,
        valid_time=result.time_in(TrialVerdict.EXECUTED_VALID),
        invalid_time=result.time_in(TrialVerdict.EXECUTED_INVALID),
        wasted_percent=result.wasted_percent,
    )


def wasted_consistent(s: RunSummary) -> bool:
    total = s.valid_time + s.invalid_time
    expected = 100.0 * s.invalid_time / total if total > 0 else 0.0
    return abs(s.wasted_percent - expected) <= 1e-9


class DatasetWaste(BaseModel):
    dataset: str
    runs: List[RunSummary]
    wasted: Stats


class WastedTimeReport(Report):
    budget: float
    seeds: List[int]
    datasets: List[DatasetWaste] = Field(default_factory=list)

    def rows(self) -> List[dict]:
        return [r.model_dump() for d in self.datasets for r in d.runs]


def bench_wasted_time(pool: Sequence[ComponentSpec], kb: Optional[KnowledgeBase],
                      datasets: Sequence[Dataset], budget: float, seeds: Sequence[int],
                      settings: Optional[OptimizerSettings] = None, jobs: int = 1,
                      progress: bool = False) -> WastedTimeReport:
    """Optimize without the filter and measure how much execution time went to invalid pipelines."""
    if not seeds:
        raise ValueError('at least one seed is required')
    cells = [(d, s) for d in datasets for s in seeds]
    results = _run_cells(cells, lambda c: optimize(c[0], pool, kb, budget, 1, False, c[1], settings),
                         jobs, 'Optimizing without filter', progress)
    per_dataset = []
    for d in datasets:
        runs = [summarize_run(r) for (cd, _), r in zip(cells, results) if cd is d]
        per_dataset.append(DatasetWaste(dataset=d.name, runs=runs,
                                        wasted=summarize([r.wasted_percent for r in runs])))
        logger.info(f"{d.name}: wasted {per_dataset[-1].wasted.mean:.1f}% on average")
    all_runs = [r for d in per_dataset for r in d.runs]
    checks = {
        'wasted_percent_consistent': all(wasted_consistent(r) for r in all_runs),
        'wasted_percent_in_range': all(0.0 <= r.wasted_percent <= 100.0 for r in all_runs),
    }
    return WastedTimeReport(budget=budget, seeds=list(seeds), datasets=per_dataset, checks=checks)


# ---------------------------------------------------------------------------
# Surrogate effect on the optimizer
# ---------------------------------------------------------------------------

class Trace(BaseModel):
    """Best error so far on a shared time grid; None before the first valid pipeline."""
    grid: List[float]
    best: List[Optional[float]]


class Envelope(BaseModel):
    grid: List[float]
    low: List[Optional[float]]
    mean: List[Optional[float]]
    high: List[Optional[float]]


def sample_trace(points: Sequence[Tuple[float, float]], grid: Sequence[float]) -> Trace:
    values, i, current = [], 0, None
    for t in grid:
        while i < len(points) and points[i][0] <= t:
            current = points[i][1]
            i += 1
        values.append(current)
    return Trace(grid=list(grid), best=values)


def envelope(traces: Sequence[Trace]) -> Envelope:
    grid = traces[0].grid if traces else []
    low, mean, high = [], [], []
    for k in range(len(grid)):
        present = [t.best[k] for t in traces if t.best[k] is not None]
        low.append(min(present) if present else None)
        mean.append(float(np.mean(present)) if present else None)
        high.append(max(present) if present else None)
    return Envelope(grid=list(grid), low=low, mean=mean, high=high)


def non_increasing(trace: Trace) -> bool:
    values = [v for v in trace.best if v is not None]
    return all(b <= a for a, b in zip(values, values[1:]))


class EffectRun(BaseModel):
    summary: RunSummary
    trace: Trace
    init_traces: List[Trace] = Field(default_factory=list)
    init_envelope: Optional[Envelope] = None
    init_best: List[Optional[float]] = Field(default_factory=list)


class VariantStats(BaseModel):
    use_avatar: bool
    init_count: int
    error: Stats
    executed_valid: Stats
    executed_invalid: Stats
    surrogate_rejected: Stats


class MultiInitComparison(BaseModel):
    mean_error_difference: Optional[float] = None
    min_error_difference: Optional[float] = None
    std_direction: Optional[str] = None


class DatasetEffect(BaseModel):
    dataset: str
    runs: List[EffectRun]
    variants: List[VariantStats]
    better: int = 0
    worse: int = 0
    equal: int = 0
    multi_init: Optional[MultiInitComparison] = None


class EffectReport(Report):
    budget: float
    seeds: List[int]
    init_count: int
    datasets: List[DatasetEffect] = Field(default_factory=list)

    def rows(self) -> List[dict]:
        return [r.summary.model_dump() for d in self.datasets for r in d.runs]

    def trace_rows(self) -> List[dict]:
        rows = []
        for d in self.datasets:
            for r in d.runs:
                s = r.summary
                for t, v in zip(r.trace.grid, r.trace.best):
                    rows.append({'dataset': d.dataset, 'seed': s.seed, 'use_avatar': s.use_avatar,
                                 'init_count': s.init_count, 'init_index': None, 'time': t,
                                 'best_error': v})
                for k, trace in enumerate(r.init_traces):
                    for t, v in zip(trace.grid, trace.best):
                        rows.append({'dataset': d.dataset, 'seed': s.seed, 'use_avatar': s.use_avatar,
                                     'init_count': s.init_count, 'init_index': k, 'time': t,
                                     'best_error': v})
        return rows


def write_effect_report(report: EffectReport, path) -> Tuple[Path, Path, Path]:
    json_path, csv_path = write_report(report, path)
    traces_path = json_path.with_suffix('.traces.csv')
    pd.DataFrame(report.trace_rows()).to_csv(traces_path, index=False)
    return json_path, csv_path, traces_path


def _effect_run(result: RunResult) -> EffectRun:
    grid = [float(t) for t in np.linspace(0.0, result.budget, TRACE_POINTS)]
    run = EffectRun(summary=summarize_run(result), trace=sample_trace(result.trace(), grid))
    if result.init_count > 1:
        sub_grid = [float(t) for t in np.linspace(0.0, result.budget / result.init_count, TRACE_POINTS)]
        run.init_traces = [sample_trace(result.trace(k), sub_grid) for k in range(result.init_count)]
        run.init_envelope = envelope(run.init_traces)
        run.init_best = [result.init_best(k) for k in range(result.init_count)]
    return run


def _variant_stats(runs: List[EffectRun], use_avatar: bool, init_count: int) -> VariantStats:
    chosen = [r.summary for r in runs
              if r.summary.use_avatar == use_avatar and r.summary.init_count == init_count]
    return VariantStats(use_avatar=use_avatar, init_count=init_count,
                        error=summarize([s.best_error for s in chosen]),
                        executed_valid=summarize([s.executed_valid for s in chosen]),
                        executed_invalid=summarize([s.executed_invalid for s in chosen]),
                        surrogate_rejected=summarize([s.surrogate_rejected for s in chosen]))


def _compare(with_filter: Optional[float], without: Optional[float]) -> int:
    """-1 when the filtered run found a better pipeline, 1 when worse, 0 when equal."""
    a = 1.0 if with_filter is None else with_filter
    b = 1.0 if without is None else without
    return 0 if abs(a - b) <= 1e-12 else (-1 if a < b else 1)


def bench_avatar_effect(pool: Sequence[ComponentSpec], kb: KnowledgeBase, datasets: Sequence[Dataset],
                        budget: float, seeds: Sequence[int], init_count: int = 1,
                        settings: Optional[OptimizerSettings] = None, jobs: int = 1,
                        progress: bool = False) -> EffectReport:
    """Paired runs with and without the filter at `init_count`; with init_count 5 also a
    filtered single-init run per seed for the multi-initialization comparison."""
    if not seeds:
        raise ValueError('at least one seed is required')
    variants = [(True, init_count), (False, init_count)]
    if init_count > 1:
        variants.append((True, 1))
    cells = [(d, s, v) for d in datasets for s in seeds for v in variants]
    results = _run_cells(
        cells, lambda c: optimize(c[0], pool, kb, budget, c[2][1], c[2][0], c[1], settings),
        jobs, 'Optimizing', progress)
    runs_by = {(id(d), s, v): _effect_run(r) for (d, s, v), r in zip(cells, results)}

    per_dataset = []
    for d in datasets:
        runs = [runs_by[(id(d), s, v)] for s in seeds for v in variants]
        row = DatasetEffect(dataset=d.name, runs=runs,
                            variants=[_variant_stats(runs, a, k) for a, k in variants])
        for s in seeds:
            on = runs_by[(id(d), s, (True, init_count))].summary.best_error
            off = runs_by[(id(d), s, (False, init_count))].summary.best_error
            outcome = _compare(on, off)
            row.better += int(outcome == -1)
            row.worse += int(outcome == 1)
            row.equal += int(outcome == 0)
        if init_count > 1:
            multi = _variant_stats(runs, True, init_count).error
            single = _variant_stats(runs, True, 1).error
            comparison = MultiInitComparison()
            if multi.n and single.n:
                comparison.mean_error_difference = multi.mean - single.mean
                comparison.min_error_difference = multi.min - single.min
                comparison.std_direction = ('lower' if multi.std < single.std
                                            else 'higher' if multi.std > single.std else 'equal')
                logger.info(f"{d.name}: multi-init error std is {comparison.std_direction} "
                            f"than single-init ({multi.std:.4f} vs {single.std:.4f})")
            row.multi_init = comparison
        per_dataset.append(row)

    all_runs = [r for d in per_dataset for r in d.runs]
    checks = {
        'traces_non_increasing': all(non_increasing(r.trace) and all(non_increasing(t) for t in r.init_traces)
                                     for r in all_runs),
        'best_of_inits': all(r.summary.best_error is None
                             or all(b is None or r.summary.best_error <= b for b in r.init_best)
                             for r in all_runs),
        'init_trace_count': all(len(r.init_traces) == (r.summary.init_count if r.summary.init_count > 1 else 0)
                                for r in all_runs),
        'wasted_percent_consistent': all(wasted_consistent(r.summary) for r in all_runs),
    }
    return EffectReport(budget=budget, seeds=list(seeds), init_count=init_count,
                        datasets=per_dataset, checks=checks)


def main():
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    ap = argparse.ArgumentParser(description='Run a desk-scale benchmark.')
    sub = ap.add_subparsers(dest='cmd', required=True)

    p_agree = sub.add_parser('agreement')
    p_agree.add_argument('--kb', required=True)
    p_agree.add_argument('--out', required=True)
    p_agree.add_argument('--n', type=int, default=1000)
    p_agree.add_argument('--max-len', type=int, default=6)
    p_agree.add_argument('--timeout', type=float, default=5.0)
    p_agree.add_argument('--seed', type=int, default=0)

    p_waste = sub.add_parser('wasted')
    p_waste.add_argument('--out', required=True)
    p_waste.add_argument('--budget', type=float, default=60.0)
    p_waste.add_argument('--seeds', type=int, nargs='+', default=[0, 1, 2, 3, 4])

    p_effect = sub.add_parser('effect')
    p_effect.add_argument('--kb', required=True)
    p_effect.add_argument('--out', required=True)
    p_effect.add_argument('--budget', type=float, default=60.0)
    p_effect.add_argument('--seeds', type=int, nargs='+', default=[0, 1, 2, 3, 4])
    p_effect.add_argument('--init', type=int, choices=(1, 5), default=1)

    args = ap.parse_args()
    pool, datasets = pool_roster(), bundled_datasets()
    if args.cmd == 'agreement':
        report = bench_agreement(pool, load_kb(args.kb), datasets, args.n, args.max_len,
                                 ExecutionLimits(timeout=args.timeout, seed=args.seed), args.seed,
                                 progress=True)
        write_report(report, args.out)
    elif args.cmd == 'wasted':
        report = bench_wasted_time(pool, None, datasets, args.budget, args.seeds, progress=True)
        write_report(report, args.out)
    else:
        report = bench_avatar_effect(pool, load_kb(args.kb), datasets, args.budget, args.seeds,
                                     args.init, progress=True)
        write_effect_report(report, args.out)
    raise SystemExit(0 if report.passed else 1)


if __name__ == '__main__':
    main()
