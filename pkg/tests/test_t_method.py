"""Tests for execution-based validity, and its agreement with the surrogate.

Agreement is the whole point of the surrogate: on pipelines drawn the way the
benchmark draws them, "the net fires to the end" and "the chain trains a model"
must be the same statement.
"""
import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from component_pool import ExecutionLimits, FailureReason  # noqa: E402
from pipeline_gen import random_corpus  # noqa: E402
from surrogate_engine import Pipeline, evaluate_validity  # noqa: E402
from t_method import Invalid, Valid, execute_pipeline, verdict_to_json  # noqa: E402

LIMITS = ExecutionLimits(timeout=30.0, seed=0)


def test_imputing_before_whitening_trains_a_model(desk):
    d = desk['secom_like']
    verdict = execute_pipeline(Pipeline.of('replace_missing', 'independent_components', 'decision_tree'),
                               d, LIMITS)
    assert isinstance(verdict, Valid)
    predictions = verdict.model.predict(d)
    assert len(predictions) == d.n_rows
    assert set(predictions) <= {'pass', 'fail', 'review'}


def test_whitening_before_imputing_is_incompatible(desk):
    verdict = execute_pipeline(Pipeline.of('independent_components', 'replace_missing', 'decision_tree'),
                               desk['secom_like'], LIMITS)
    assert isinstance(verdict, Invalid)
    assert verdict.failing_component == 'independent_components'
    assert verdict.failing_position == 0
    assert verdict.reason == FailureReason.INCOMPATIBILITY


def test_failure_later_in_the_chain_reports_its_position(desk):
    verdict = execute_pipeline(Pipeline.of('discretize', 'pca', 'knn'), desk['numeric_clean'], LIMITS)
    assert not verdict.valid
    assert verdict.failing_component == 'pca'
    assert verdict.failing_position == 1


def test_chain_deadline_is_reported_as_timeout(desk):
    verdict = execute_pipeline(Pipeline.of('standardize', ('bagging', 1)), desk['numeric_clean'],
                               ExecutionLimits(timeout=1e-6, seed=0))
    assert isinstance(verdict, Invalid)
    assert verdict.reason == FailureReason.TIMEOUT


def test_fitted_preprocessors_are_reapplied_at_prediction(desk):
    d = desk['mixed_missing_class']
    verdict = execute_pipeline(Pipeline.of('replace_missing', 'nominal_to_binary', 'logistic'), d, LIMITS)
    assert verdict.valid
    transformed = verdict.model.transform(d)
    assert not transformed.frame[[a.name for a in transformed.feature_attributes]].isna().any().any()
    assert len(verdict.model.predict(d)) == d.n_rows


def test_verdict_json():
    doc = verdict_to_json(Invalid(failing_component='pca', failing_position=0,
                                  reason=FailureReason.TIMEOUT, message='slow', elapsed=1.0))
    assert doc == {'valid': False, 'failing_component': 'pca', 'reason': 'timeout',
                   'message': 'slow', 'elapsed': 1.0}


# --- agreement with the surrogate --------------------------------------------

def agreement(kb, pool, d, n, seed):
    mismatches = []
    for p in random_corpus(pool, n, 6, seed):
        surrogate = evaluate_validity(p, d, kb)
        executed = execute_pipeline(p, d, LIMITS)
        if surrogate.valid != executed.valid:
            mismatches.append((p.describe(), surrogate.valid, executed.valid))
        elif not executed.valid:
            assert surrogate.failing_component == executed.failing_component, p.describe()
    return mismatches


@pytest.mark.parametrize('name', ['numeric_clean', 'nominal_attrs', 'mixed_missing_class',
                                  'regression', 'pathological'])
def test_surrogate_agrees_with_execution_on_a_sample(kb, pool, desk, name):
    assert agreement(kb, pool, desk[name], 25, seed=0) == []


@pytest.mark.slow
@pytest.mark.parametrize('name', ['numeric_clean', 'secom_like', 'nominal_attrs',
                                  'mixed_missing_class', 'regression', 'pathological'])
def test_surrogate_agrees_with_execution_on_a_full_corpus(kb, pool, desk, name):
    assert agreement(kb, pool, desk[name], 1000, seed=1) == []
