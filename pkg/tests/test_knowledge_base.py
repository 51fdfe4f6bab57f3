"""Tests for the knowledge-base learner, its JSON layout and the reader's checks.

The learned base has to be reproducible byte for byte from the same suite, and
it has to be sound: every characteristic a component was seen to handle must be
marked as a capability, otherwise the surrogate would reject valid pipelines.
"""
import json
import logging
import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from component_pool import ExecutionLimits, UnknownComponentError, get_component  # noqa: E402
from dataset_model import (  # noqa: E402
    CHARACTERISTICS,
    EMPTY_NOMINAL_ATTRIBUTES,
    MISSING_VALUES,
    NOMINAL_ATTRIBUTES,
    NOMINAL_CLASS,
    NUMERIC_ATTRIBUTES,
    NUMERIC_CLASS,
    PREDICTIVE_MODEL,
    UNARY_ATTRIBUTES,
)
from knowledge_base import (  # noqa: E402
    CapabilityVector,
    ComponentKnowledge,
    EffectVector,
    KnowledgeBase,
    KnowledgeBaseSchemaError,
    audit_hyperparameters,
    kb_from_json,
    kb_to_json,
    knowledge_for,
    learn_knowledge_base,
    load_kb,
    merge_kb,
    record_to_json,
    replay_soundness,
    save_kb,
    warnings_path_for,
    write_warnings,
)

LIMITS = ExecutionLimits(timeout=30.0, seed=0)


def record(component_id, capabilities=(), effects=None):
    return ComponentKnowledge(
        component_id=component_id, component_name=component_id,
        capabilities=CapabilityVector.from_active(capabilities),
        effects=EffectVector.of(**(effects or {})))


# --- learned records -------------------------------------------------------

def test_em_imputer_record_matches_its_published_listing(kb):
    r = knowledge_for(kb, 'em_imputer')
    assert r.capabilities[NUMERIC_CLASS] == 1
    assert r.capabilities[MISSING_VALUES] == 1
    assert r.capabilities[NUMERIC_ATTRIBUTES] == 1
    assert r.capabilities[NOMINAL_CLASS] == 0
    assert r.capabilities[NOMINAL_ATTRIBUTES] == 0
    assert r.effects[MISSING_VALUES] == -1
    assert [c for c, v in r.effects.ordered() if v] == [MISSING_VALUES]


def test_predictors_produce_a_model_and_preprocessors_do_not(kb, pool):
    for spec in pool:
        expected = 1 if spec.is_predictive else 0
        assert knowledge_for(kb, spec.id).effects[PREDICTIVE_MODEL] == expected, spec.id


def test_capabilities_exclude_exactly_the_rejected_characteristics(kb, pool):
    for spec in pool:
        r = knowledge_for(kb, spec.id)
        for c in spec.rejects:
            assert r.capabilities[c] == 0, (spec.id, c)
        assert r.capabilities[PREDICTIVE_MODEL] == 0


def test_learned_effects_of_the_reshaping_components(kb):
    assert knowledge_for(kb, 'replace_missing').effects[MISSING_VALUES] == -1
    discretize = knowledge_for(kb, 'discretize').effects
    assert (discretize[NUMERIC_ATTRIBUTES], discretize[NOMINAL_ATTRIBUTES]) == (-1, 1)
    n2b = knowledge_for(kb, 'nominal_to_binary').effects
    assert n2b[NOMINAL_ATTRIBUTES] == -1
    assert n2b[EMPTY_NOMINAL_ATTRIBUTES] == -1
    assert n2b[MISSING_VALUES] == 0
    assert knowledge_for(kb, 'pca').effects[UNARY_ATTRIBUTES] == -1


def test_replay_finds_no_unrecorded_capability(kb, pool, suite):
    assert replay_soundness(kb, pool, suite, LIMITS) == []


def test_relearning_gives_an_identical_document(kb, pool, suite):
    again = learn_knowledge_base(pool, suite, LIMITS, jobs=4)
    assert json.dumps(kb_to_json(again)) == json.dumps(kb_to_json(kb))


def test_component_failing_every_case_keeps_zero_capabilities(suite):
    refuses_all = get_component('zero_r').model_copy(update={'rejects': frozenset(CHARACTERISTICS)})
    learned = learn_knowledge_base([refuses_all], suite, LIMITS)
    assert knowledge_for(learned, 'zero_r').capabilities.active() == []
    assert any('failed on every synthetic case' in w for w in learned.provenance.learner_warnings)


def test_empty_pool_is_refused(suite):
    with pytest.raises(ValueError):
        learn_knowledge_base([], suite, LIMITS)


def test_unknown_component_lookup(kb):
    with pytest.raises(UnknownComponentError):
        knowledge_for(kb, 'not_a_component')


# --- hyperparameter audit --------------------------------------------------

def test_laplace_settings_share_one_signature(kb, suite):
    assert audit_hyperparameters(kb, [get_component('naive_bayes')], suite, LIMITS) == []


def test_audit_reports_a_setting_that_learns_differently(kb, suite, caplog):
    tampered = knowledge_for(kb, 'naive_bayes').model_copy(update={'effects': EffectVector.zeros()})
    base = KnowledgeBase(records={'naive_bayes': tampered})
    with caplog.at_level(logging.WARNING):
        problems = audit_hyperparameters(base, [get_component('naive_bayes')], suite, LIMITS)
    assert problems == ["naive_bayes: setting {'laplace': 0.1} differs from {'laplace': 1.0}"]
    assert problems[0] in caplog.text


def test_audit_skips_single_setting_and_unlearned_components(kb, suite):
    assert audit_hyperparameters(kb, [get_component('zero_r')], suite, LIMITS) == []
    assert audit_hyperparameters(KnowledgeBase(), [get_component('knn')], suite, LIMITS) == []


# --- JSON layout -----------------------------------------------------------

def test_record_uses_the_published_field_names(kb):
    doc = record_to_json(knowledge_for(kb, 'em_imputer'))
    assert set(doc) == {'componentId', 'componentName', 'listOfCapabilities', 'listOfEffects'}
    assert len(doc['listOfCapabilities']) == len(CHARACTERISTICS)
    assert doc['listOfEffects'][0] == {'mLComponentCapability': CHARACTERISTICS[0], 'value': 0}


def test_saved_base_loads_back_unchanged(kb, tmp_path):
    path = tmp_path / 'kb.json'
    save_kb(kb, path)
    loaded = load_kb(path)
    assert loaded.records == kb.records
    assert loaded.provenance.suite_hash == kb.provenance.suite_hash


def test_warnings_go_to_a_jsonl_sidecar(tmp_path):
    kb = KnowledgeBase(records={'x': record('x')})
    kb.provenance.learner_warnings.append('x: something odd')
    path = write_warnings(kb, tmp_path / 'kb.json')
    assert path == warnings_path_for(tmp_path / 'kb.json')
    assert path.name == 'kb.warnings.jsonl'
    assert json.loads(path.read_text().splitlines()[0])['message'] == 'x: something odd'


def test_single_record_document_is_accepted(kb):
    doc = record_to_json(knowledge_for(kb, 'pca'))
    assert list(kb_from_json(doc).records) == ['pca']


def test_absent_entries_read_as_zero_with_a_warning(caplog):
    doc = {'componentId': 'partial',
           'listOfCapabilities': [{'mLComponentCapability': MISSING_VALUES, 'value': 1}],
           'listOfEffects': []}
    with caplog.at_level(logging.WARNING):
        loaded = kb_from_json(doc)
    r = loaded.records['partial']
    assert r.capabilities.active() == [MISSING_VALUES]
    assert r.effects.active() == []
    assert 'absent' in caplog.text


@pytest.mark.parametrize('listing, field', [
    ([{'mLComponentCapability': MISSING_VALUES, 'value': 2}], 'components[0].listOfCapabilities[0].value'),
    ([{'mLComponentCapability': 'SHINY', 'value': 1}],
     'components[0].listOfCapabilities[0].mLComponentCapability'),
    ([{'mLComponentCapability': MISSING_VALUES, 'value': True}], 'components[0].listOfCapabilities[0].value'),
    ('nope', 'components[0].listOfCapabilities'),
])
def test_malformed_capability_listing_names_the_field(listing, field):
    doc = {'schema_version': 1, 'components': [{'componentId': 'c', 'listOfCapabilities': listing}]}
    with pytest.raises(KnowledgeBaseSchemaError) as err:
        kb_from_json(doc)
    assert err.value.field == field


def test_effects_may_be_negative_but_capabilities_may_not():
    doc = [{'componentId': 'c',
            'listOfCapabilities': [{'mLComponentCapability': MISSING_VALUES, 'value': -1}]}]
    with pytest.raises(KnowledgeBaseSchemaError):
        kb_from_json(doc)
    doc[0]['listOfEffects'] = doc[0].pop('listOfCapabilities')
    assert kb_from_json(doc).records['c'].effects[MISSING_VALUES] == -1


def test_duplicate_component_is_refused():
    doc = [{'componentId': 'c'}, {'componentId': 'c'}]
    with pytest.raises(KnowledgeBaseSchemaError, match='duplicate'):
        kb_from_json(doc)


def test_unsupported_schema_version_is_refused():
    with pytest.raises(KnowledgeBaseSchemaError) as err:
        kb_from_json({'schema_version': 99, 'components': []})
    assert err.value.field == 'schema_version'


def test_file_that_is_not_json_is_a_schema_error(tmp_path):
    path = tmp_path / 'kb.json'
    path.write_text('{not json')
    with pytest.raises(KnowledgeBaseSchemaError) as err:
        load_kb(path)
    assert err.value.field == '$'


# --- merging ---------------------------------------------------------------

def test_merge_prefers_the_extension_and_warns(caplog):
    base = KnowledgeBase(records={'a': record('a', [MISSING_VALUES]), 'b': record('b')})
    extension = KnowledgeBase(records={'a': record('a', [NUMERIC_CLASS])})
    with caplog.at_level(logging.WARNING):
        merged = merge_kb(base, extension)
    assert set(merged.records) == {'a', 'b'}
    assert merged.records['a'].capabilities.active() == [NUMERIC_CLASS]
    assert any('replaced' in w for w in merged.provenance.learner_warnings)
    assert 'replaced' in caplog.text


def test_merge_into_an_empty_base_copies_the_extension():
    extension = KnowledgeBase(records={'a': record('a', [MISSING_VALUES])})
    assert merge_kb(KnowledgeBase(), extension).records == extension.records
