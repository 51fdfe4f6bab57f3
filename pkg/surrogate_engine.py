#!/usr/bin/env python3
"""
Petri-net surrogate of a pipeline, and validity evaluation by firing it.

A pipeline of n components maps to a chain of n transitions between n + 1 places
(start, inter_1 .. inter_{n-1}, end). The start place holds the token extracted
from the dataset; each transition carries its component's capability and effect
vectors from the knowledge base. Firing checks the token against the
capabilities and then adds the effects, clamped to [0, 1]. The first transition
that cannot fire makes the pipeline invalid.

Nothing here reads dataset cells after the start token is extracted.

Usage:
    python surrogate_engine.py pipeline.json data.arff kb.json
"""

import argparse
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from component_pool import (
    TEMPLATE_ORDER, ComponentSpec, get_component, pool_roster,
)
from dataset_model import (
    CHARACTERISTICS, SCHEMA_VERSION, AvatarError, CharacteristicToken, Dataset,
    extract_token, load_dataset,
)
from knowledge_base import ComponentKnowledge, KnowledgeBase, knowledge_for, load_kb

logger = logging.getLogger(__name__)


class PipelineStructureError(AvatarError):
    """A pipeline breaks the chain rules: non-empty, one predictor, and it comes last."""


# ---------------------------------------------------------------------------
# Pipelines
# ---------------------------------------------------------------------------

class PipelineStep(BaseModel):
    model_config = ConfigDict(frozen=True)

    component: ComponentSpec
    setting: int = 0

    @property
    def component_id(self) -> str:
        return self.component.id

    @property
    def hyperparams(self) -> Dict[str, Any]:
        return self.component.setting(self.setting)


class Pipeline(BaseModel):
    model_config = ConfigDict(frozen=True)

    steps: Tuple[PipelineStep, ...]

    @model_validator(mode='after')
    def _predictor_last(self):
        if not self.steps:
            raise PipelineStructureError('a pipeline needs at least one component')
        if not self.steps[-1].component.is_predictive:
            raise PipelineStructureError(
                f"last component {self.steps[-1].component_id!r} is not a predictor")
        for step in self.steps[:-1]:
            if step.component.is_predictive:
                raise PipelineStructureError(
                    f"predictor {step.component_id!r} appears before the end")
        for step in self.steps:
            if not 0 <= step.setting < len(step.component.hyperparams):
                raise PipelineStructureError(f"{step.component_id}: no setting {step.setting}")
        return self

    @classmethod
    def of(cls, *components: Union[str, Tuple[str, int]],
           pool: Optional[Sequence[ComponentSpec]] = None) -> 'Pipeline':
        """Pipeline.of('replace_missing', ('knn', 2)): ids with optional setting index."""
        steps = []
        for item in components:
            cid, setting = (item, 0) if isinstance(item, str) else item
            steps.append(PipelineStep(component=get_component(cid, pool), setting=setting))
        return cls(steps=tuple(steps))

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def component_ids(self) -> List[str]:
        return [s.component_id for s in self.steps]

    @property
    def preprocessors(self) -> Tuple[PipelineStep, ...]:
        return self.steps[:-1]

    @property
    def predictor(self) -> PipelineStep:
        return self.steps[-1]

    def follows_template(self) -> bool:
        """Preprocessor kinds in template order, each kind at most once."""
        positions = [TEMPLATE_ORDER.index(s.component.kind) for s in self.preprocessors]
        return all(a < b for a, b in zip(positions, positions[1:]))

    def describe(self) -> str:
        return ' -> '.join(self.component_ids)


def check_template_order(p: Pipeline) -> Pipeline:
    if not p.follows_template():
        raise PipelineStructureError(f"{p.describe()} does not follow the template order")
    return p


def dump_pipeline(p: Pipeline) -> dict:
    return {
        'schema_version': SCHEMA_VERSION,
        'components': [{'component_id': s.component_id, 'hyperparams': s.hyperparams}
                       for s in p.steps],
    }


def parse_pipeline(doc, pool: Optional[Sequence[ComponentSpec]] = None) -> Pipeline:
    """From a versioned document or a bare list of {component_id, hyperparams}."""
    entries = doc.get('components') if isinstance(doc, dict) else doc
    if not isinstance(entries, list):
        raise PipelineStructureError('pipeline JSON must be a list of components')
    steps = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or 'component_id' not in entry:
            raise PipelineStructureError(f"components[{i}] needs a component_id")
        spec = get_component(entry['component_id'], pool)
        hyperparams = entry.get('hyperparams')
        try:
            setting = spec.setting_index(hyperparams) if hyperparams else 0
        except ValueError as e:
            raise PipelineStructureError(f"components[{i}]: {e}") from None
        steps.append(PipelineStep(component=spec, setting=setting))
    return Pipeline(steps=tuple(steps))


def load_pipeline(path, pool: Optional[Sequence[ComponentSpec]] = None) -> Pipeline:
    return parse_pipeline(json.loads(Path(path).read_text(encoding='utf-8')), pool)


# ---------------------------------------------------------------------------
# Petri net
# ---------------------------------------------------------------------------

class Transition(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    knowledge: ComponentKnowledge


class SurrogatePipeline(BaseModel):
    """A chain net: place, transition, place, ..., transition, place."""
    model_config = ConfigDict(frozen=True)

    places: Tuple[str, ...]
    transitions: Tuple[Transition, ...]
    arcs: Tuple[Tuple[str, str], ...]
    start_token: CharacteristicToken

    def inputs_of(self, transition: str) -> List[str]:
        return [src for src, dst in self.arcs if dst == transition]

    def outputs_of(self, transition: str) -> List[str]:
        return [dst for src, dst in self.arcs if src == transition]


def _place_names(n: int) -> Tuple[str, ...]:
    return ('start',) + tuple(f"inter_{i}" for i in range(1, n)) + ('end',)


def build_net(p: Pipeline, start_token: CharacteristicToken, kb: KnowledgeBase) -> SurrogatePipeline:
    knowledge = [knowledge_for(kb, cid) for cid in p.component_ids]
    places = _place_names(len(p))
    transitions, arcs = [], []
    for i, record in enumerate(knowledge):
        name = f"t{i + 1}:{record.component_id}"
        transitions.append(Transition(name=name, knowledge=record))
        arcs.append((places[i], name))
        arcs.append((name, places[i + 1]))
    return SurrogatePipeline(places=places, transitions=tuple(transitions), arcs=tuple(arcs),
                             start_token=start_token)


def map_to_surrogate(p: Pipeline, d: Dataset, kb: KnowledgeBase) -> SurrogatePipeline:
    """Chain structure, start token from the dataset, transition logic from the KB."""
    return build_net(p, extract_token(d), kb)


# ---------------------------------------------------------------------------
# Firing
# ---------------------------------------------------------------------------

class Invalid(BaseModel):
    failing_characteristics: Tuple[str, ...]


class OutToken(BaseModel):
    token: CharacteristicToken


def _token(values: np.ndarray) -> CharacteristicToken:
    # values are clamped to {0, 1} already
    return CharacteristicToken.model_construct(
        values={c: int(v) for c, v in zip(CHARACTERISTICS, values)})


def _fire(token: np.ndarray, knowledge: ComponentKnowledge):
    blocked = (token == 1) & (knowledge.capabilities.as_array() == 0)
    if blocked.any():
        return None, tuple(c for c, b in zip(CHARACTERISTICS, blocked) if b)
    return np.clip(token + knowledge.effects.as_array(), 0, 1), ()


def fire_transition(in_token: CharacteristicToken,
                    knowledge: ComponentKnowledge) -> Union[Invalid, OutToken]:
    out, failing = _fire(in_token.as_array(), knowledge)
    if out is None:
        return Invalid(failing_characteristics=failing)
    return OutToken(token=_token(out))


class ValidityVerdict(BaseModel):
    valid: bool
    failing_component: Optional[str] = None
    failing_position: Optional[int] = None
    failing_characteristics: Tuple[str, ...] = ()
    fired_tokens: List[CharacteristicToken]

    @model_validator(mode='after')
    def _consistent(self):
        if self.valid == (self.failing_component is not None):
            raise ValueError('valid must be false exactly when a failing component is set')
        return self

    def to_json(self) -> dict:
        out: Dict[str, Any] = {'valid': self.valid}
        if not self.valid:
            out['failing_component'] = self.failing_component
            out['failing_characteristics'] = list(self.failing_characteristics)
        out['tokens'] = [dict(t.ordered()) for t in self.fired_tokens]
        return out


def _fire_chain(token: CharacteristicToken, knowledge: Sequence[ComponentKnowledge]) -> ValidityVerdict:
    current = token.as_array()
    fired = [token]
    for position, record in enumerate(knowledge):
        out, failing = _fire(current, record)
        if out is None:
            return ValidityVerdict(valid=False, failing_component=record.component_id,
                                   failing_position=position, failing_characteristics=failing,
                                   fired_tokens=fired)
        current = out
        fired.append(_token(current))
    return ValidityVerdict(valid=True, fired_tokens=fired)


def evaluate_token(p: Pipeline, token: CharacteristicToken, kb: KnowledgeBase) -> ValidityVerdict:
    """Fire the chain left to right from `token`; stop at the first transition that cannot fire."""
    return _fire_chain(token, [knowledge_for(kb, cid) for cid in p.component_ids])


def evaluate_validity(p: Pipeline, d: Dataset, kb: KnowledgeBase) -> ValidityVerdict:
    return evaluate_token(p, extract_token(d), kb)


def evaluate_net(net: SurrogatePipeline) -> ValidityVerdict:
    """Same firing rule, driven by an already mapped net."""
    return _fire_chain(net.start_token, [t.knowledge for t in net.transitions])


def main():
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    ap = argparse.ArgumentParser(description='Evaluate a pipeline with the surrogate.')
    ap.add_argument('pipeline')
    ap.add_argument('data')
    ap.add_argument('kb')
    args = ap.parse_args()
    p = load_pipeline(args.pipeline, pool_roster())
    verdict = evaluate_validity(p, load_dataset(args.data), load_kb(args.kb))
    print(json.dumps(verdict.to_json(), indent=2))


if __name__ == '__main__':
    main()
