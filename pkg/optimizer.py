#!/usr/bin/env python3
"""
Sequential model-based pipeline composition with an optional surrogate filter.

The search space has one slot per preprocessing kind of the template (a
component of that kind, or nothing) and a final predictor slot, each paired with
a hyperparameter setting index. Every initialization first tries one uniformly
drawn configuration, before any model exists. After that each round fits a random forest on the one-hot encoding of everything tried so far,
scores a batch of fresh random candidates with it and executes the most
promising one. A share of the rounds simply executes a random candidate.

With the filter on, every proposal is first checked by firing its surrogate
pipeline; rejected configurations are logged with cost 1.0 and never executed.
With init_count = 5 the budget is cut into five sub-runs, each seeded
independently, and the best of the five is reported.

Executions are scored on a fixed stratified 70/30 split of the dataset.

Usage:
    python optimizer.py --data bundled:secom_like --kb kb.json --budget 60 [--init 5] [--no-avatar]
"""

import argparse
import json
import logging
import time
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from sklearn.ensemble import RandomForestRegressor

from component_pool import (
    TEMPLATE_ORDER, ComponentSpec, ExecutionLimits, FailureReason,
    pool_roster, witness_rows,
)
from dataset_model import (
    SCHEMA_VERSION, AttributeKind, AvatarError, Dataset, extract_token, load_dataset,
)
from desk_datasets import BUNDLED_PREFIX, load_bundled
from knowledge_base import KnowledgeBase, load_kb
from learners import Deadline
from surrogate_engine import Pipeline, PipelineStep, evaluate_token
from t_method import Invalid, execute_pipeline

logger = logging.getLogger(__name__)

SLOT_KINDS: Tuple[str, ...] = tuple(k.value for k in TEMPLATE_ORDER) + ('predictor',)
MAX_SETTINGS = 4


class PipelineExecutionError(AvatarError):
    """Executing a pipeline for scoring did not produce a model."""

    def __init__(self, verdict: Invalid):
        self.verdict = verdict
        super().__init__(f"{verdict.failing_component}: {verdict.reason.value} ({verdict.message})")


class OptimizerSettings(BaseModel):
    candidates: int = 100
    random_interleave: float = 0.3
    trial_timeout: float = 5.0
    max_evaluations: Optional[int] = None
    forest_trees: int = 10
    test_fraction: float = 0.3


# ---------------------------------------------------------------------------
# Search space
# ---------------------------------------------------------------------------

class ConfigEncoding(BaseModel):
    """Per slot: a choice (0 = absent for preprocessor slots) and a setting index."""
    model_config = ConfigDict(frozen=True)

    choices: Tuple[int, ...]
    settings: Tuple[int, ...]

    @model_validator(mode='after')
    def _shape(self):
        if len(self.choices) != len(SLOT_KINDS) or len(self.settings) != len(SLOT_KINDS):
            raise ValueError(f"expected {len(SLOT_KINDS)} slots")
        return self

    @property
    def key(self) -> Tuple[int, ...]:
        return tuple(v for pair in zip(self.choices, self.settings) for v in pair)


class SearchSpace:
    """The configuration space spanned by a pool in template order."""

    def __init__(self, pool: Sequence[ComponentSpec]):
        self.slots: List[List[ComponentSpec]] = [
            [s for s in pool if s.kind == kind] for kind in TEMPLATE_ORDER]
        self.slots.append([s for s in pool if s.is_predictive])
        if not self.slots[-1]:
            raise ValueError('pool holds no predictor')

    def _options(self, slot: int) -> int:
        # preprocessor slots have an extra "absent" choice at 0
        return len(self.slots[slot]) + (0 if slot == len(self.slots) - 1 else 1)

    def component(self, slot: int, choice: int) -> Optional[ComponentSpec]:
        if slot == len(self.slots) - 1:
            return self.slots[slot][choice]
        return self.slots[slot][choice - 1] if choice else None

    def sample(self, rng: np.random.Generator) -> ConfigEncoding:
        choices, settings = [], []
        for slot in range(len(self.slots)):
            choice = int(rng.integers(self._options(slot)))
            spec = self.component(slot, choice)
            choices.append(choice)
            settings.append(int(rng.integers(len(spec.hyperparams))) if spec else 0)
        return ConfigEncoding(choices=tuple(choices), settings=tuple(settings))

    def decode(self, config: ConfigEncoding) -> Pipeline:
        steps = []
        for slot, (choice, setting) in enumerate(zip(config.choices, config.settings)):
            spec = self.component(slot, choice)
            if spec is not None:
                steps.append(PipelineStep(component=spec, setting=setting))
        return Pipeline(steps=tuple(steps))

    def features(self, configs: Sequence[ConfigEncoding]) -> np.ndarray:
        """One-hot choice and setting per slot."""
        widths = [self._options(s) + MAX_SETTINGS for s in range(len(self.slots))]
        X = np.zeros((len(configs), sum(widths)))
        for row, config in enumerate(configs):
            offset = 0
            for slot, width in enumerate(widths):
                X[row, offset + config.choices[slot]] = 1.0
                X[row, offset + self._options(slot) + config.settings[slot]] = 1.0
                offset += width
        return X


# ---------------------------------------------------------------------------
# Trials and results
# ---------------------------------------------------------------------------

class TrialVerdict(str, Enum):
    SURROGATE_REJECTED = 'surrogate_rejected'
    EXECUTED_INVALID = 'executed_invalid'
    EXECUTED_VALID = 'executed_valid'


class TrialRecord(BaseModel):
    config: ConfigEncoding
    pipeline: List[str]
    verdict: TrialVerdict
    error_rate: Optional[float] = None
    wall_time: float
    timestamp: float
    init_index: int = 0
    failing_component: Optional[str] = None
    reason: Optional[str] = None

    @model_validator(mode='after')
    def _error_iff_valid(self):
        if (self.error_rate is not None) != (self.verdict == TrialVerdict.EXECUTED_VALID):
            raise ValueError('error_rate is set exactly for executed_valid trials')
        return self

    @property
    def executed(self) -> bool:
        return self.verdict != TrialVerdict.SURROGATE_REJECTED

    @property
    def cost(self) -> float:
        return self.error_rate if self.error_rate is not None else 1.0


class BestConfig(BaseModel):
    config: ConfigEncoding
    pipeline: List[str]
    error_rate: float


class RunResult(BaseModel):
    schema_version: int = SCHEMA_VERSION
    dataset: str
    trials: List[TrialRecord] = Field(default_factory=list)
    best: Optional[BestConfig] = None
    budget: float
    init_count: int = 1
    use_avatar: bool = True
    seed: int = 0
    init_starts: List[float] = Field(default_factory=list)
    elapsed: float = 0.0

    @model_validator(mode='after')
    def _best_is_minimum(self):
        valid = [t.error_rate for t in self.trials if t.verdict == TrialVerdict.EXECUTED_VALID]
        if not valid:
            if self.best is not None:
                raise ValueError('best is set without any executed_valid trial')
        elif self.best is None or abs(self.best.error_rate - min(valid)) > 1e-12:
            raise ValueError('best.error_rate must be the minimum over executed_valid trials')
        return self

    def count(self, verdict: TrialVerdict, init_index: Optional[int] = None) -> int:
        return sum(1 for t in self.trials if t.verdict == verdict
                   and (init_index is None or t.init_index == init_index))

    def time_in(self, verdict: TrialVerdict) -> float:
        return sum(t.wall_time for t in self.trials if t.verdict == verdict)

    @property
    def wasted_percent(self) -> float:
        """Share of execution time spent on pipelines that turned out invalid."""
        invalid = self.time_in(TrialVerdict.EXECUTED_INVALID)
        valid = self.time_in(TrialVerdict.EXECUTED_VALID)
        total = invalid + valid
        return 100.0 * invalid / total if total > 0 else 0.0

    def trace(self, init_index: Optional[int] = None) -> List[Tuple[float, float]]:
        """(time, best error so far) at every improvement; times relative to the (sub-)run start."""
        offset = self.init_starts[init_index] if init_index is not None and self.init_starts else 0.0
        points, best = [], None
        for t in sorted(self.trials, key=lambda t: t.timestamp):
            if t.verdict != TrialVerdict.EXECUTED_VALID:
                continue
            if init_index is not None and t.init_index != init_index:
                continue
            if best is None or t.error_rate < best:
                best = t.error_rate
                points.append((t.timestamp - offset, best))
        return points

    def init_best(self, init_index: int) -> Optional[float]:
        errors = [t.error_rate for t in self.trials
                  if t.init_index == init_index and t.verdict == TrialVerdict.EXECUTED_VALID]
        return min(errors) if errors else None


def save_run(result: RunResult, path) -> None:
    Path(path).write_text(result.model_dump_json(indent=2) + '\n', encoding='utf-8')


def load_run(path) -> RunResult:
    return RunResult.model_validate_json(Path(path).read_text(encoding='utf-8'))


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------

def stratified_split(d: Dataset, seed: int, test_fraction: float = 0.3) -> Tuple[List[int], List[int]]:
    """Train/test row indices, stratified by class value; missing class is its own stratum.

    Witness rows always go to train, so the train split has the characteristic
    profile of the whole dataset.
    """
    rng = np.random.default_rng(seed)
    witnesses = set(witness_rows(d))
    classes = d.class_values()
    if d.class_attribute.kind == AttributeKind.NOMINAL:
        strata = classes.fillna('\0missing').astype(str).to_numpy()
    else:
        strata = np.where(classes.isna().to_numpy(), 'missing', 'present')
    test = []
    for value in sorted(set(strata)):
        members = [i for i in np.flatnonzero(strata == value) if int(i) not in witnesses]
        wanted = int(round(test_fraction * int(np.sum(strata == value))))
        rng.shuffle(members)
        test.extend(int(i) for i in members[:min(wanted, len(members))])
    test_set = set(test)
    train = [i for i in range(d.n_rows) if i not in test_set]
    return train, sorted(test)


def error_rate(predicted: Sequence, actual: Sequence, numeric: bool, y_range: float) -> float:
    """Misclassification rate, or MAE normalized by the training target range, capped at 1."""
    if not len(actual):
        return 1.0
    if not numeric:
        return float(np.mean([p != a for p, a in zip(predicted, actual)]))
    mae = float(np.mean(np.abs(np.asarray(predicted, dtype=float) - np.asarray(actual, dtype=float))))
    if y_range <= 0:
        return 0.0 if mae == 0 else 1.0
    return min(1.0, mae / y_range)


class SplitData:
    """A dataset cut once into train and scored test rows."""

    def __init__(self, d: Dataset, seed: int, test_fraction: float = 0.3):
        train_idx, test_idx = stratified_split(d, seed, test_fraction)
        self.train = d.take(train_idx)
        test = d.take(test_idx)
        self.test = test.take(np.flatnonzero(test.class_values().notna().to_numpy()))
        self.token = extract_token(self.train)
        self.numeric = d.class_attribute.kind == AttributeKind.NUMERIC
        y = self.train.class_values().dropna()
        self.y_range = float(y.max() - y.min()) if self.numeric and len(y) else 0.0

    def score(self, p: Pipeline, limits: ExecutionLimits) -> float:
        verdict = execute_pipeline(p, self.train, limits)
        if isinstance(verdict, Invalid):
            raise PipelineExecutionError(verdict)
        predicted = verdict.model.predict(self.test)
        return error_rate(predicted, list(self.test.class_values()), self.numeric, self.y_range)


def score_pipeline(p: Pipeline, d: Dataset, split_seed: int,
                   limits: Optional[ExecutionLimits] = None) -> float:
    """Train on a stratified 70% of `d`, return the error on the other 30%."""
    limits = limits or ExecutionLimits(timeout=5.0, seed=split_seed)
    return SplitData(d, split_seed).score(p, limits)


# ---------------------------------------------------------------------------
# Optimization loop
# ---------------------------------------------------------------------------

class _Run:
    """One sub-run: init configuration, then model-guided proposals."""

    def __init__(self, space: SearchSpace, data: SplitData, kb: Optional[KnowledgeBase],
                 use_avatar: bool, settings: OptimizerSettings, seed, init_index: int,
                 clock_start: float, seen: set):
        self.space = space
        self.data = data
        self.kb = kb
        self.use_avatar = use_avatar
        self.settings = settings
        self.rng = np.random.default_rng(seed)
        self.init_index = init_index
        self.clock_start = clock_start
        self.seen = seen
        self.trials: List[TrialRecord] = []
        self.executed = 0

    def _fresh(self) -> Optional[ConfigEncoding]:
        for _ in range(max(100, self.settings.candidates)):
            config = self.space.sample(self.rng)
            if config.key not in self.seen:
                return config
        return None

    def _propose(self) -> Optional[ConfigEncoding]:
        # the forest needs at least two distinct costs to rank anything
        if len({t.cost for t in self.trials}) < 2 or self.rng.random() < self.settings.random_interleave:
            return self._fresh()
        batch = {}
        for _ in range(self.settings.candidates):
            config = self.space.sample(self.rng)
            if config.key not in self.seen:
                batch[config.key] = config
        if not batch:
            return self._fresh()
        model = RandomForestRegressor(n_estimators=self.settings.forest_trees,
                                      random_state=int(self.rng.integers(2 ** 31)), n_jobs=1)
        model.fit(self.space.features([t.config for t in self.trials]),
                  np.array([t.cost for t in self.trials]))
        candidates = [batch[k] for k in sorted(batch)]
        predicted = model.predict(self.space.features(candidates))
        # lowest predicted cost; ties go to the lexicographically smallest config
        return candidates[int(np.argmin(predicted))]

    def _record(self, config: ConfigEncoding, p: Pipeline, verdict: TrialVerdict, started: float,
                error: Optional[float] = None, failing: Optional[str] = None,
                reason: Optional[str] = None) -> TrialRecord:
        now = time.perf_counter()
        record = TrialRecord(config=config, pipeline=p.component_ids, verdict=verdict,
                             error_rate=error, wall_time=now - started,
                             timestamp=now - self.clock_start, init_index=self.init_index,
                             failing_component=failing, reason=reason)
        self.trials.append(record)
        self.seen.add(config.key)
        return record

    def step(self, limits: ExecutionLimits, initial: bool = False) -> bool:
        """Try one configuration; an initial step draws it uniformly. False once nothing unseen is left."""
        config = self._fresh() if initial else self._propose()
        if config is None:
            return False
        started = time.perf_counter()
        p = self.space.decode(config)
        if self.use_avatar:
            verdict = evaluate_token(p, self.data.token, self.kb)
            if not verdict.valid:
                self._record(config, p, TrialVerdict.SURROGATE_REJECTED, started,
                             failing=verdict.failing_component,
                             reason=','.join(verdict.failing_characteristics))
                return True
        self.executed += 1
        try:
            error = self.data.score(p, limits)
        except PipelineExecutionError as e:
            self._record(config, p, TrialVerdict.EXECUTED_INVALID, started,
                         failing=e.verdict.failing_component, reason=e.verdict.reason.value)
            return True
        except Exception as e:
            logger.warning(f"{p.describe()} trained but failed to predict: {type(e).__name__}: {e}")
            self._record(config, p, TrialVerdict.EXECUTED_INVALID, started,
                         failing=p.predictor.component_id, reason=FailureReason.INTERNAL.value)
            return True
        self._record(config, p, TrialVerdict.EXECUTED_VALID, started, error=error)
        return True


def _has_room(run: _Run, cap: Optional[int]) -> bool:
    return cap is None or run.executed < cap


def _split_evenly(total: Optional[int], parts: int) -> List[Optional[int]]:
    if total is None:
        return [None] * parts
    return [total // parts + (1 if i < total % parts else 0) for i in range(parts)]


def optimize(d: Dataset, pool: Sequence[ComponentSpec], kb: Optional[KnowledgeBase], budget: float,
             init_count: int = 1, use_avatar: bool = True, seed: int = 0,
             settings: Optional[OptimizerSettings] = None) -> RunResult:
    """Search the pool's pipelines on `d` for `budget` seconds (and at most
    settings.max_evaluations executions); return the full trial log."""
    if budget <= 0:
        raise ValueError(f"budget must be > 0, got {budget}")
    if init_count not in (1, 5):
        raise ValueError(f"init_count must be 1 or 5, got {init_count}")
    if use_avatar and kb is None:
        raise ValueError('the surrogate filter needs a knowledge base')
    settings = settings or OptimizerSettings()
    space = SearchSpace(pool)
    data = SplitData(d, seed, settings.test_fraction)
    limits = ExecutionLimits(timeout=settings.trial_timeout, seed=seed)
    clock_start = time.perf_counter()
    seen: set = set()
    starts: List[float] = []

    caps = _split_evenly(settings.max_evaluations, init_count)
    runs = [_Run(space, data, kb, use_avatar, settings, np.random.SeedSequence([seed, k]),
                 k, clock_start, seen) for k in range(init_count)]

    # initial design: one uniform configuration per initialization before any model is fitted
    overall = Deadline(budget)
    live = []
    for run, cap in zip(runs, caps):
        starts.append(time.perf_counter() - clock_start)
        live.append(not overall.expired() and _has_room(run, cap) and run.step(limits, initial=True))

    for k, (run, cap) in enumerate(zip(runs, caps)):
        deadline = Deadline(budget * (k + 1) / init_count - (time.perf_counter() - clock_start))
        while live[k] and not deadline.expired() and _has_room(run, cap):
            live[k] = run.step(limits)
        if not live[k] and _has_room(run, cap) and not overall.expired():
            logger.info(f"Init {k}: no unseen configuration left")
        logger.debug(f"Init {k}: {len(run.trials)} trials, {run.executed} executed")
    trials = sorted((t for run in runs for t in run.trials), key=lambda t: t.timestamp)

    valid = [t for t in trials if t.verdict == TrialVerdict.EXECUTED_VALID]
    best = None
    if valid:
        top = min(valid, key=lambda t: (t.error_rate, t.timestamp))
        best = BestConfig(config=top.config, pipeline=top.pipeline, error_rate=top.error_rate)
    result = RunResult(dataset=d.name, trials=trials, best=best, budget=budget,
                       init_count=init_count, use_avatar=use_avatar, seed=seed,
                       init_starts=starts, elapsed=time.perf_counter() - clock_start)
    logger.info(f"{d.name}: {len(trials)} trials, "
                f"{result.count(TrialVerdict.EXECUTED_VALID)} valid, "
                f"{result.count(TrialVerdict.EXECUTED_INVALID)} invalid, "
                f"{result.count(TrialVerdict.SURROGATE_REJECTED)} rejected; "
                f"best error {best.error_rate if best else '-'}")
    return result


def check_filter_soundness(result: RunResult, d: Dataset, pool: Sequence[ComponentSpec],
                           sample: int = 10, timeout: float = 5.0) -> List[List[str]]:
    """Execute up to `sample` surrogate-rejected configurations; return those that trained.

    Each one is a gap in the knowledge base and is logged as a warning.
    """
    space = SearchSpace(pool)
    data = SplitData(d, result.seed)
    rejected = [t for t in result.trials if t.verdict == TrialVerdict.SURROGATE_REJECTED]
    rng = np.random.default_rng(result.seed)
    if len(rejected) > sample:
        rejected = [rejected[int(i)] for i in sorted(rng.choice(len(rejected), sample, replace=False))]
    gaps = []
    for t in rejected:
        p = space.decode(t.config)
        verdict = execute_pipeline(p, data.train, ExecutionLimits(timeout=timeout, seed=result.seed))
        if verdict.valid:
            logger.warning(f"Knowledge-base gap: {p.describe()} was rejected by the surrogate "
                           f"but trains on {d.name}")
            gaps.append(p.component_ids)
    return gaps


def main():
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    ap = argparse.ArgumentParser(description='Optimize a pipeline on one dataset.')
    ap.add_argument('--data', required=True, help=f"ARFF/CSV path or {BUNDLED_PREFIX}<name>")
    ap.add_argument('--kb', required=True)
    ap.add_argument('--budget', type=float, default=60.0)
    ap.add_argument('--init', type=int, choices=(1, 5), default=1)
    ap.add_argument('--no-avatar', action='store_true')
    ap.add_argument('--seed', type=int, default=0)
    ap.add_argument('--out')
    args = ap.parse_args()
    d = load_bundled(args.data) if args.data.startswith(BUNDLED_PREFIX) else load_dataset(args.data)
    result = optimize(d, pool_roster(), load_kb(args.kb), args.budget, args.init,
                      not args.no_avatar, args.seed)
    if args.out:
        save_run(result, args.out)
    else:
        print(json.dumps(result.best.model_dump() if result.best else None, indent=2))


if __name__ == '__main__':
    main()
