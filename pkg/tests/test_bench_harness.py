"""Tests for the desk-scale benchmarks and their reports.

The benchmarks run here on small corpora and short evaluation caps; what is
checked is the bookkeeping, not the headline numbers.
"""
import json
import os
import sys

import pandas as pd
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from bench_harness import (  # noqa: E402
    Trace,
    bench_agreement,
    bench_avatar_effect,
    bench_wasted_time,
    envelope,
    non_increasing,
    sample_trace,
    summarize,
    write_effect_report,
    write_report,
)
from component_pool import ExecutionLimits  # noqa: E402
from optimizer import OptimizerSettings  # noqa: E402

LIMITS = ExecutionLimits(timeout=30.0, seed=0)
CAPPED = OptimizerSettings(max_evaluations=3, candidates=30)


# --- helpers ---------------------------------------------------------------

def test_summarize_skips_missing_values():
    stats = summarize([1.0, None, 2.0, 3.0])
    assert (stats.n, stats.mean, stats.std, stats.min, stats.max) == (3, 2.0, 1.0, 1.0, 3.0)
    assert summarize([]).mean is None
    assert summarize([4.0]).std == 0.0


def test_trace_is_sampled_as_a_step_function():
    trace = sample_trace([(1.0, 0.5), (3.0, 0.2)], [0.0, 1.0, 2.0, 3.0, 4.0])
    assert trace.best == [None, 0.5, 0.5, 0.2, 0.2]
    assert non_increasing(trace)
    assert not non_increasing(Trace(grid=[0.0, 1.0], best=[0.2, 0.3]))


def test_envelope_ignores_traces_without_a_value_yet():
    grid = [0.0, 1.0, 2.0]
    env = envelope([Trace(grid=grid, best=[None, 0.4, 0.2]),
                    Trace(grid=grid, best=[None, None, 0.6])])
    assert env.low == [None, 0.4, 0.2]
    assert env.high == [None, 0.4, 0.6]
    assert env.mean[2] == pytest.approx(0.4)


# --- agreement -------------------------------------------------------------

@pytest.fixture(scope='module')
def agreement_report(pool, kb, desk):
    return bench_agreement(pool, kb, [desk['numeric_clean'], desk['mixed_missing_class']],
                           n_pipelines=15, max_len=6, limits=LIMITS, seed=0)


def test_agreement_report_passes_its_checks(agreement_report):
    assert agreement_report.checks == {'counts_sum': True, 'no_other_disagreements': True,
                                       'surrogate_faster': True}
    assert agreement_report.passed
    for row in agreement_report.datasets:
        assert row.n_pipelines == 15
        assert row.agreement_percent == 100.0
        assert row.disagreements == []


def test_agreement_report_is_written_as_json_and_csv(agreement_report, tmp_path):
    json_path, csv_path = write_report(agreement_report, tmp_path / 'out' / 'agreement.json')
    doc = json.loads(json_path.read_text())
    assert doc['n_pipelines'] == 15
    table = pd.read_csv(csv_path)
    assert list(table['dataset']) == ['numeric_clean', 'mixed_missing_class']
    assert 'time_token_extraction' in table.columns
    assert 'disagreements' not in table.columns


def test_agreement_needs_at_least_one_pipeline(pool, kb, desk):
    with pytest.raises(ValueError):
        bench_agreement(pool, kb, [desk['numeric_clean']], 0, 6, LIMITS, 0)


# --- wasted time -----------------------------------------------------------

def test_wasted_time_runs_unfiltered_and_stays_consistent(pool, desk):
    report = bench_wasted_time(pool, None, [desk['pathological'], desk['nominal_attrs']],
                               budget=60.0, seeds=[0, 1], settings=CAPPED)
    assert report.passed
    assert len(report.rows()) == 4
    for row in report.datasets:
        assert row.wasted.n == 2
        for run in row.runs:
            assert not run.use_avatar
            assert run.surrogate_rejected == 0
            assert run.executed_valid + run.executed_invalid <= 3


def test_wasted_time_needs_a_seed(pool, desk):
    with pytest.raises(ValueError):
        bench_wasted_time(pool, None, [desk['pathological']], 60.0, [])


# --- surrogate effect ------------------------------------------------------

def test_effect_with_five_inits_adds_a_single_init_baseline(pool, kb, desk, tmp_path):
    settings = OptimizerSettings(max_evaluations=5, candidates=30)
    report = bench_avatar_effect(pool, kb, [desk['nominal_attrs']], budget=60.0, seeds=[0],
                                 init_count=5, settings=settings)
    assert report.passed, report.checks
    row = report.datasets[0]
    assert len(row.runs) == 3
    assert row.better + row.worse + row.equal == 1
    assert [(v.use_avatar, v.init_count) for v in row.variants] == [(True, 5), (False, 5), (True, 1)]
    assert row.multi_init is not None
    five = [r for r in row.runs if r.summary.init_count == 5]
    assert all(len(r.init_traces) == 5 and len(r.init_best) == 5 for r in five)

    paths = write_effect_report(report, tmp_path / 'effect.json')
    assert [p.name for p in paths] == ['effect.json', 'effect.csv', 'effect.traces.csv']
    traces = pd.read_csv(paths[2])
    assert set(traces['init_index'].dropna().astype(int)) == set(range(5))
