#!/usr/bin/env python3
"""
Knowledge base of component capabilities and effects, and the learner that
builds it by running every component on every synthetic case.

The learner works in four stages:
  1. every capability and effect entry starts at 0;
  2. each (component, case) pair is executed;
  3. on success, every characteristic present in the case's token becomes a capability;
  4. predictors get PREDICTIVE_MODEL = 1 as their effect; preprocessors get
     token(output) - token(input) for any entry still at its default 0.

Later observations that disagree with an already-written effect are kept as
warnings, never applied. Components that fail every case keep all-zero
capabilities so the surrogate rejects any pipeline that uses them.

The JSON layout matches the published knowledge-base segment: componentId,
componentName, listOfCapabilities and listOfEffects, each a list of
{"mLComponentCapability", "value"} pairs.

Usage:
    python knowledge_base.py learn --out kb.json [--rows 16] [--seed 0]
    python knowledge_base.py show kb.json
"""

import argparse
import json
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path
from typing import ClassVar, Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field
from tqdm import tqdm

from component_pool import (
    ComponentSpec, ExecutionLimits, ExecutionOutcome,
    UnknownComponentError, execute_component, pool_roster,
)
from dataset_model import (
    CHARACTERISTICS, PREDICTIVE_MODEL, SCHEMA_VERSION, AvatarError,
    CharacteristicVector, extract_token,
)
from synthetic_datasets import SyntheticCase, generate_suite, suite_hash

logger = logging.getLogger(__name__)


class KnowledgeBaseSchemaError(AvatarError):
    """A knowledge-base document does not have the expected shape.

    `field` is the dotted path of the offending entry, for example
    components[0].listOfCapabilities[2].value.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")


class CapabilityVector(CharacteristicVector):
    """1 where the component can consume data exhibiting the characteristic."""


class EffectVector(CharacteristicVector):
    """-1 removes, +1 introduces, 0 leaves the characteristic alone."""

    ALLOWED: ClassVar[Tuple[int, ...]] = (-1, 0, 1)


class ComponentKnowledge(BaseModel):
    model_config = ConfigDict(frozen=True)

    component_id: str
    component_name: str
    capabilities: CapabilityVector
    effects: EffectVector


class Provenance(BaseModel):
    seed: Optional[int] = None
    suite_hash: Optional[str] = None
    learner_warnings: List[str] = Field(default_factory=list)


class KnowledgeBase(BaseModel):
    records: Dict[str, ComponentKnowledge] = Field(default_factory=dict)
    provenance: Provenance = Field(default_factory=Provenance)

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, component_id: str) -> bool:
        return component_id in self.records


def knowledge_for(kb: KnowledgeBase, component_id: str) -> ComponentKnowledge:
    try:
        return kb.records[component_id]
    except KeyError:
        raise UnknownComponentError(component_id) from None


# ---------------------------------------------------------------------------
# Learner
# ---------------------------------------------------------------------------

def _execute_all(pool: Sequence[ComponentSpec], suite: Sequence[SyntheticCase],
                 limits: ExecutionLimits, settings: Dict[str, int], jobs: int,
                 progress: bool) -> Dict[Tuple[int, int], ExecutionOutcome]:
    """Stage 2: every (component, case) pair. Results are keyed by position, not arrival."""
    pairs = [(i, j) for i in range(len(pool)) for j in range(len(suite))]
    outcomes: Dict[Tuple[int, int], ExecutionOutcome] = {}

    def run(pair):
        i, j = pair
        spec = pool[i]
        return pair, execute_component(spec, suite[j].dataset, limits, settings.get(spec.id, 0))

    bar = tqdm(total=len(pairs), desc='Executing components', unit='run', disable=not progress)
    with bar:
        if jobs <= 1:
            for pair in pairs:
                key, outcome = run(pair)
                outcomes[key] = outcome
                bar.update(1)
        else:
            with ThreadPoolExecutor(max_workers=jobs) as executor:
                futures = [executor.submit(run, pair) for pair in pairs]
                for future in as_completed(futures):
                    key, outcome = future.result()
                    outcomes[key] = outcome
                    bar.update(1)
    return outcomes


def learn_knowledge_base(pool: Sequence[ComponentSpec], suite: Sequence[SyntheticCase],
                         limits: ExecutionLimits, jobs: int = 1, progress: bool = False,
                         settings: Optional[Dict[str, int]] = None) -> KnowledgeBase:
    """Learn one record per pool component from executions on the synthetic suite.

    `settings` picks a hyperparameter setting per component id (default: the first).
    """
    if not pool or not suite:
        raise ValueError('learning needs a non-empty pool and suite')
    settings = settings or {}
    warnings: List[str] = []

    caps = {spec.id: {c: 0 for c in CHARACTERISTICS} for spec in pool}
    effects = {spec.id: {c: 0 for c in CHARACTERISTICS} for spec in pool}

    outcomes = _execute_all(pool, suite, limits, settings, jobs, progress)

    in_tokens = [case.token() for case in suite]
    for i, spec in enumerate(pool):
        successes = 0
        for j, case in enumerate(suite):
            outcome = outcomes[(i, j)]
            if not outcome.ok:
                continue
            successes += 1
            for c in in_tokens[j].active():
                caps[spec.id][c] = 1
            if spec.is_predictive:
                effects[spec.id][PREDICTIVE_MODEL] = 1
                continue
            out_token = extract_token(outcome.dataset)
            for c in CHARACTERISTICS:
                diff = out_token[c] - in_tokens[j][c]
                if diff not in (-1, 0, 1):
                    raise AssertionError(f"effect {diff} out of range for {spec.id}/{c}")
                if diff == 0:
                    continue
                current = effects[spec.id][c]
                if current == 0:
                    effects[spec.id][c] = diff
                elif current != diff:
                    msg = (f"{spec.id}: {c} effect {current:+d} kept, "
                           f"case {case.key} observed {diff:+d}")
                    logger.warning(msg)
                    warnings.append(msg)
        if successes == 0:
            msg = f"{spec.id}: failed on every synthetic case; all capabilities stay 0"
            logger.warning(msg)
            warnings.append(msg)

    records = {
        spec.id: ComponentKnowledge(
            component_id=spec.id,
            component_name=spec.id,
            capabilities=CapabilityVector(values=caps[spec.id]),
            effects=EffectVector(values=effects[spec.id]),
        )
        for spec in pool
    }
    provenance = Provenance(seed=limits.seed, suite_hash=suite_hash(list(suite)),
                            learner_warnings=warnings)
    logger.info(f"Learned {len(records)} component records from {len(suite)} synthetic cases")
    return KnowledgeBase(records=records, provenance=provenance)


def replay_soundness(kb: KnowledgeBase, pool: Sequence[ComponentSpec],
                     suite: Sequence[SyntheticCase], limits: ExecutionLimits) -> List[Tuple[str, str]]:
    """(component, characteristic) pairs exercised successfully but missing from the capabilities."""
    gaps = []
    for spec in pool:
        record = knowledge_for(kb, spec.id)
        for case in suite:
            if not execute_component(spec, case.dataset, limits).ok:
                continue
            for c in case.token().active():
                if record.capabilities[c] != 1:
                    gaps.append((spec.id, c))
    return sorted(set(gaps))


def audit_hyperparameters(kb: KnowledgeBase, pool: Sequence[ComponentSpec], suite: Sequence[SyntheticCase],
                          limits: ExecutionLimits, jobs: int = 1) -> List[str]:
    """Settings whose learned capability/effect signature differs from the one in `kb`.

    `kb` holds each component as learned at its first setting; every further grid
    setting is relearned on the same suite and compared with it.
    """
    problems = []
    for spec in pool:
        if spec.id not in kb.records or len(spec.hyperparams) < 2:
            continue
        base = kb.records[spec.id]
        for index in range(1, len(spec.hyperparams)):
            other = learn_knowledge_base([spec], suite, limits, jobs=jobs,
                                         settings={spec.id: index}).records[spec.id]
            if base.capabilities != other.capabilities or base.effects != other.effects:
                msg = f"{spec.id}: setting {spec.hyperparams[index]} differs from {spec.hyperparams[0]}"
                logger.warning(msg)
                problems.append(msg)
    return problems


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def _listing(vector: CharacteristicVector) -> List[dict]:
    return [{'mLComponentCapability': c, 'value': v} for c, v in vector.ordered()]


def record_to_json(record: ComponentKnowledge) -> dict:
    return {
        'componentId': record.component_id,
        'componentName': record.component_name,
        'listOfCapabilities': _listing(record.capabilities),
        'listOfEffects': _listing(record.effects),
    }


def kb_to_json(kb: KnowledgeBase) -> dict:
    return {
        'schema_version': SCHEMA_VERSION,
        'provenance': kb.provenance.model_dump(),
        'components': [record_to_json(r) for r in kb.records.values()],
    }


def save_kb(kb: KnowledgeBase, path) -> None:
    Path(path).write_text(json.dumps(kb_to_json(kb), indent=2) + '\n', encoding='utf-8')


def warnings_path_for(kb_path) -> Path:
    return Path(kb_path).with_suffix('.warnings.jsonl')


def write_warnings(kb: KnowledgeBase, kb_path) -> Path:
    path = warnings_path_for(kb_path)
    with open(path, 'w', encoding='utf-8') as f:
        for message in kb.provenance.learner_warnings:
            f.write(json.dumps({'level': 'WARNING', 'logger': __name__, 'message': message}) + '\n')
    return path


def _parse_listing(entries, field: str, allowed: Tuple[int, ...]) -> Tuple[Dict[str, int], int]:
    if not isinstance(entries, list):
        raise KnowledgeBaseSchemaError(field, 'expected a list')
    values: Dict[str, int] = {}
    for k, entry in enumerate(entries):
        where = f"{field}[{k}]"
        if not isinstance(entry, dict):
            raise KnowledgeBaseSchemaError(where, 'expected an object')
        name = entry.get('mLComponentCapability')
        if name not in CHARACTERISTICS:
            raise KnowledgeBaseSchemaError(f"{where}.mLComponentCapability",
                                           f"unknown characteristic {name!r}")
        if name in values:
            raise KnowledgeBaseSchemaError(f"{where}.mLComponentCapability",
                                           f"{name} listed twice")
        value = entry.get('value')
        if isinstance(value, bool) or not isinstance(value, int) or value not in allowed:
            raise KnowledgeBaseSchemaError(f"{where}.value", f"{value!r} is not one of {allowed}")
        values[name] = value
    absent = 0
    for c in CHARACTERISTICS:
        if c not in values:
            values[c] = 0
            absent += 1
    return values, absent


def record_from_json(raw, field: str) -> ComponentKnowledge:
    if not isinstance(raw, dict):
        raise KnowledgeBaseSchemaError(field, 'expected an object')
    component_id = raw.get('componentId')
    if not isinstance(component_id, str) or not component_id:
        raise KnowledgeBaseSchemaError(f"{field}.componentId", 'missing or not a string')
    name = raw.get('componentName', component_id)
    if not isinstance(name, str):
        raise KnowledgeBaseSchemaError(f"{field}.componentName", 'not a string')
    caps, absent_caps = _parse_listing(raw.get('listOfCapabilities', []),
                                       f"{field}.listOfCapabilities", CapabilityVector.ALLOWED)
    effects, absent_effects = _parse_listing(raw.get('listOfEffects', []),
                                             f"{field}.listOfEffects", EffectVector.ALLOWED)
    if absent_caps or absent_effects:
        logger.warning(f"{component_id}: {absent_caps} capabilities and {absent_effects} "
                       f"effects absent, read as 0")
    return ComponentKnowledge(component_id=component_id, component_name=name,
                              capabilities=CapabilityVector(values=caps),
                              effects=EffectVector(values=effects))


def kb_from_json(doc) -> KnowledgeBase:
    """Accepts a full document, a bare list of records, or a single record."""
    provenance = Provenance()
    if isinstance(doc, dict) and 'components' in doc:
        version = doc.get('schema_version', SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise KnowledgeBaseSchemaError('schema_version', f"unsupported version {version!r}")
        try:
            provenance = Provenance.model_validate(doc.get('provenance') or {})
        except ValueError as e:
            raise KnowledgeBaseSchemaError('provenance', str(e)) from None
        entries = doc['components']
        prefix = 'components'
    elif isinstance(doc, list):
        entries, prefix = doc, 'components'
    elif isinstance(doc, dict) and 'componentId' in doc:
        entries, prefix = [doc], 'components'
    else:
        raise KnowledgeBaseSchemaError('$', 'not a knowledge base document')
    if not isinstance(entries, list):
        raise KnowledgeBaseSchemaError(prefix, 'expected a list')
    records: Dict[str, ComponentKnowledge] = {}
    for i, raw in enumerate(entries):
        record = record_from_json(raw, f"{prefix}[{i}]")
        if record.component_id in records:
            raise KnowledgeBaseSchemaError(f"{prefix}[{i}].componentId",
                                           f"duplicate component {record.component_id!r}")
        records[record.component_id] = record
    return KnowledgeBase(records=records, provenance=provenance)


def load_kb(path) -> KnowledgeBase:
    text = Path(path).read_text(encoding='utf-8')
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise KnowledgeBaseSchemaError('$', f"not JSON (line {e.lineno}, column {e.colno}): {e.msg}") from None
    return kb_from_json(doc)


def merge_kb(base: KnowledgeBase, extension: KnowledgeBase) -> KnowledgeBase:
    """Union by component id; on a collision the extension's record wins."""
    if not base.records:
        return extension.model_copy(deep=True)
    records = dict(base.records)
    warnings = list(base.provenance.learner_warnings)
    for component_id, record in extension.records.items():
        if component_id in records:
            msg = f"merge: {component_id} replaced by the extension's record"
            logger.warning(msg)
            warnings.append(msg)
        records[component_id] = record
    provenance = base.provenance.model_copy(update={'learner_warnings': warnings})
    return KnowledgeBase(records=records, provenance=provenance)


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def _show(kb: KnowledgeBase) -> None:
    for record in kb.records.values():
        caps = ','.join(record.capabilities.active()) or '-'
        effects = ','.join(f"{c}{v:+d}" for c, v in record.effects.ordered() if v) or '-'
        print(f"{record.component_id}\n  can:    {caps}\n  effect: {effects}")


def main():
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    ap = argparse.ArgumentParser(description='Learn or inspect a knowledge base.')
    sub = ap.add_subparsers(dest='cmd', required=True)

    p = sub.add_parser('learn', help='learn from the synthetic suite')
    p.add_argument('--out', required=True)
    p.add_argument('--rows', type=int, default=16)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--timeout', type=float, default=30.0)

    p = sub.add_parser('show', help='print a knowledge base')
    p.add_argument('path')

    args = ap.parse_args()
    if args.cmd == 'learn':
        suite = generate_suite(args.rows, args.seed)
        kb = learn_knowledge_base(pool_roster(), suite,
                                  ExecutionLimits(timeout=args.timeout, seed=args.seed), progress=True)
        save_kb(kb, args.out)
        write_warnings(kb, args.out)
        logger.info(f"Wrote {args.out}")
    else:
        _show(load_kb(args.path))


if __name__ == '__main__':
    main()
