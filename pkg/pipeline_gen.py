#!/usr/bin/env python3
"""
Random pipelines for the agreement benchmark.

A draw picks how many preprocessing kinds to use (uniform in 0..max_len-1),
which kinds (uniform subset, laid out in template order), a component and a
hyperparameter setting per kind, and finally a predictor or meta-predictor.

Usage:
    python pipeline_gen.py --n 20 [--max-len 6] [--seed 0]
"""

import argparse
import json
import logging
from typing import Dict, List, Sequence, Union

import numpy as np

from component_pool import TEMPLATE_ORDER, ComponentKind, ComponentSpec, pool_roster
from surrogate_engine import Pipeline, PipelineStep, dump_pipeline

logger = logging.getLogger(__name__)

Seed = Union[int, np.random.SeedSequence]


def _by_kind(pool: Sequence[ComponentSpec]) -> Dict[ComponentKind, List[ComponentSpec]]:
    groups: Dict[ComponentKind, List[ComponentSpec]] = {}
    for spec in pool:
        groups.setdefault(spec.kind, []).append(spec)
    return groups


def _step(spec: ComponentSpec, rng: np.random.Generator) -> PipelineStep:
    return PipelineStep(component=spec, setting=int(rng.integers(len(spec.hyperparams))))


def random_pipeline(pool: Sequence[ComponentSpec], max_len: int, seed: Seed) -> Pipeline:
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    predictors = [s for s in pool if s.is_predictive]
    if not predictors:
        raise ValueError('pool holds no predictor')
    rng = np.random.default_rng(seed)
    groups = _by_kind(pool)
    kinds = [k for k in TEMPLATE_ORDER if groups.get(k)]
    size = min(int(rng.integers(max_len)), len(kinds))
    chosen = sorted(rng.choice(len(kinds), size=size, replace=False)) if size else []
    steps = []
    for i in chosen:
        candidates = groups[kinds[int(i)]]
        steps.append(_step(candidates[int(rng.integers(len(candidates)))], rng))
    steps.append(_step(predictors[int(rng.integers(len(predictors)))], rng))
    return Pipeline(steps=tuple(steps))


def random_corpus(pool: Sequence[ComponentSpec], n: int, max_len: int, seed: int) -> List[Pipeline]:
    """n independent draws; draw i depends only on (seed, i)."""
    return [random_pipeline(pool, max_len, np.random.SeedSequence([seed, i])) for i in range(n)]


def main():
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    ap = argparse.ArgumentParser(description='Print random pipelines as JSON lines.')
    ap.add_argument('--n', type=int, default=10)
    ap.add_argument('--max-len', type=int, default=6)
    ap.add_argument('--seed', type=int, default=0)
    args = ap.parse_args()
    for p in random_corpus(pool_roster(), args.n, args.max_len, args.seed):
        print(json.dumps(dump_pipeline(p)))


if __name__ == '__main__':
    main()
