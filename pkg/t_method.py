#!/usr/bin/env python3
"""
Ground-truth validity by execution: thread the dataset through every
preprocessor, train the predictor at the end, and call the pipeline valid when a
trained model comes out.

The whole chain shares one deadline of `limits.timeout` seconds. A component
that rejects its input fails with `incompatibility`; running past the deadline
fails with `timeout`.

Usage:
    python t_method.py pipeline.json data.arff [--timeout 5]
"""

import argparse
import json
import logging
import time
from typing import Any, List, Union

from pydantic import BaseModel, ConfigDict

from component_pool import (
    ExecutionLimits, Failure, FailureReason, Preprocessor, PredictiveModel,
    execute_component, pool_roster,
)
from dataset_model import Dataset, load_dataset
from learners import Deadline
from surrogate_engine import Pipeline, load_pipeline

logger = logging.getLogger(__name__)


class PipelineModel:
    """The fitted chain: preprocessors as fitted on the training data, then the model."""

    def __init__(self, pipeline: Pipeline, preprocessors: List[Preprocessor], model: PredictiveModel):
        self.pipeline = pipeline
        self.preprocessors = preprocessors
        self.model = model

    def transform(self, d: Dataset) -> Dataset:
        for step in self.preprocessors:
            d = step.apply(d)
        return d

    def predict(self, d: Dataset) -> List[Any]:
        return self.model.predict(self.transform(d))


class Valid(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    model: PipelineModel
    elapsed: float

    @property
    def valid(self) -> bool:
        return True


class Invalid(BaseModel):
    model_config = ConfigDict(frozen=True)

    failing_component: str
    failing_position: int
    reason: FailureReason
    message: str = ''
    elapsed: float

    @property
    def valid(self) -> bool:
        return False


ExecutionVerdict = Union[Valid, Invalid]


def execute_pipeline(p: Pipeline, d: Dataset, limits: ExecutionLimits) -> ExecutionVerdict:
    start = time.perf_counter()
    deadline = Deadline(limits.timeout)
    fitted: List[Preprocessor] = []
    current = d
    for position, step in enumerate(p.steps):
        remaining = deadline.remaining()
        if remaining <= 0:
            return Invalid(failing_component=step.component_id, failing_position=position,
                           reason=FailureReason.TIMEOUT,
                           message=f"deadline of {limits.timeout:g}s exceeded before this step",
                           elapsed=time.perf_counter() - start)
        outcome = execute_component(step.component, current,
                                    ExecutionLimits(timeout=remaining, seed=limits.seed),
                                    setting=step.setting)
        if isinstance(outcome, Failure):
            return Invalid(failing_component=step.component_id, failing_position=position,
                           reason=outcome.reason, message=outcome.message,
                           elapsed=time.perf_counter() - start)
        if step.component.is_predictive:
            model = PipelineModel(p, fitted, outcome.model)
            return Valid(model=model, elapsed=time.perf_counter() - start)
        fitted.append(outcome.fitted)
        current = outcome.dataset
    raise AssertionError('pipeline without a predictor passed validation')


def verdict_to_json(verdict: ExecutionVerdict) -> dict:
    if isinstance(verdict, Valid):
        return {'valid': True, 'elapsed': verdict.elapsed}
    return {'valid': False, 'failing_component': verdict.failing_component,
            'reason': verdict.reason.value, 'message': verdict.message,
            'elapsed': verdict.elapsed}


def main():
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    ap = argparse.ArgumentParser(description='Execute a pipeline and report whether it trains.')
    ap.add_argument('pipeline')
    ap.add_argument('data')
    ap.add_argument('--timeout', type=float, default=5.0)
    ap.add_argument('--seed', type=int, default=0)
    args = ap.parse_args()
    p = load_pipeline(args.pipeline, pool_roster())
    verdict = execute_pipeline(p, load_dataset(args.data),
                               ExecutionLimits(timeout=args.timeout, seed=args.seed))
    print(json.dumps(verdict_to_json(verdict), indent=2))


if __name__ == '__main__':
    main()
