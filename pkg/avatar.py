#!/usr/bin/env python3
"""
Command-line entry point: synthetic suite, knowledge-base learning, pipeline
evaluation, optimization and the benchmarks.

Configuration is layered: built-in defaults, then avatar_config.yaml in the
working directory if present, then --config FILE (YAML, JSON or TOML), then
flags. The effective configuration is printed to stderr as one JSON object
before any work starts.

Usage:
    python avatar.py gen-synthetic --out synthetic/
    python avatar.py learn-kb --out kb.json
    python avatar.py eval --kb kb.json --data bundled:secom_like \\
        --components replace_missing independent_components decision_tree
    python avatar.py optimize --data bundled:nominal_attrs --kb kb.json --budget 60s --init 5 --out run.json
    python avatar.py bench-agreement --kb kb.json --out reports/agreement.json
    python avatar.py report --in run.json --format csv

Exit codes: 0 success, 1 operation failure (or a failed report check), 2 usage error.
"""

import argparse
import json
import logging
import re
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd
import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator

from bench_harness import (
    bench_agreement, bench_avatar_effect, bench_wasted_time, summarize_run,
    write_effect_report, write_report,
)
from component_pool import ExecutionLimits, dump_roster, load_roster, pool_roster
from dataset_model import AvatarError, Dataset, extract_token, load_dataset
from desk_datasets import BUNDLED_PREFIX, bundled_names, load_bundled, write_bundled
from knowledge_base import audit_hyperparameters, learn_knowledge_base, load_kb, save_kb, write_warnings
from optimizer import OptimizerSettings, load_run, optimize, save_run
from pipeline_gen import random_corpus
from surrogate_engine import Pipeline, dump_pipeline, evaluate_token, load_pipeline
from synthetic_datasets import generate_suite, isolation_violations, load_suite, write_suite
from t_method import execute_pipeline, verdict_to_json

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_FILE = 'avatar_config.yaml'


class ConfigError(AvatarError):
    """Configuration that cannot be read or does not validate."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

_DURATION = re.compile(r'^\s*(\d+(?:\.\d+)?)\s*([smh]?)\s*$')
_UNIT = {'': 1.0, 's': 1.0, 'm': 60.0, 'h': 3600.0}


def parse_duration(value) -> float:
    """Seconds from a number or a string such as '60s', '2m', '1.5h'."""
    if isinstance(value, bool):
        raise ValueError(f"not a duration: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    match = _DURATION.match(str(value))
    if not match:
        raise ValueError(f"not a duration: {value!r}")
    return float(match.group(1)) * _UNIT[match.group(2)]


def _duration(v):
    return None if v is None else parse_duration(v)


class SyntheticConfig(BaseModel):
    rows: int = 16


class LimitsConfig(BaseModel):
    timeout_s: float = 5.0
    learn_timeout_s: float = 30.0
    bench_timeout_s: float = 5.0

    parse_durations = field_validator('timeout_s', 'learn_timeout_s', 'bench_timeout_s',
                                       mode='before')(_duration)


class OptimizerConfig(BaseModel):
    budget_s: float = Field(60.0, gt=0)
    init_count: int = 1
    candidates: int = 100
    random_interleave: float = 0.3
    trial_timeout_s: float = Field(5.0, gt=0)
    max_evaluations: Optional[int] = None
    forest_trees: int = 10

    parse_durations = field_validator('budget_s', 'trial_timeout_s', mode='before')(_duration)

    def settings(self) -> OptimizerSettings:
        return OptimizerSettings(candidates=self.candidates, random_interleave=self.random_interleave,
                                 trial_timeout=self.trial_timeout_s,
                                 max_evaluations=self.max_evaluations,
                                 forest_trees=self.forest_trees)


class BenchConfig(BaseModel):
    n_pipelines: int = 1000
    max_len: int = 6
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4])
    datasets: List[str] = Field(default_factory=bundled_names)


class AvatarConfig(BaseModel):
    seed: int = 0
    jobs: int = 1
    log: str = 'text'
    synthetic: SyntheticConfig = Field(default_factory=SyntheticConfig)
    limits: LimitsConfig = Field(default_factory=LimitsConfig)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    bench: BenchConfig = Field(default_factory=BenchConfig)


def read_config_file(path) -> Dict[str, Any]:
    path = Path(path)
    suffix = path.suffix.lower()
    try:
        if suffix in ('.yaml', '.yml'):
            doc = yaml.safe_load(path.read_text(encoding='utf-8'))
        elif suffix == '.json':
            doc = json.loads(path.read_text(encoding='utf-8'))
        elif suffix == '.toml':
            doc = tomllib.loads(path.read_text(encoding='utf-8'))
        else:
            raise ConfigError(f"{path}: unsupported config format {suffix or '(none)'}")
    except (yaml.YAMLError, json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"{path}: {e}") from None
    except OSError as e:
        raise ConfigError(f"{path}: {e.strerror or e}") from None
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return doc


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(config_file: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None,
                default_file: str = DEFAULT_CONFIG_FILE) -> AvatarConfig:
    """Defaults < default_file (if it exists) < config_file < overrides."""
    layers: Dict[str, Any] = {}
    if default_file and Path(default_file).exists():
        layers = _merge(layers, read_config_file(default_file))
        logger.debug(f"Loaded config from {default_file}")
    if config_file:
        layers = _merge(layers, read_config_file(config_file))
    layers = _merge(layers, overrides or {})
    try:
        return AvatarConfig.model_validate(layers)
    except ValidationError as e:
        first = e.errors()[0]
        where = '.'.join(str(p) for p in first['loc'])
        raise ConfigError(f"config field {where}: {first['msg']}") from None


# ---------------------------------------------------------------------------
# Logging
# ---------------------------------------------------------------------------

_RECORD_FIELDS = set(vars(logging.LogRecord('', 0, '', 0, '', None, None))) | {'message', 'asctime'}


class JsonLinesFormatter(logging.Formatter):
    """One JSON object per record; `extra` fields are carried along."""

    def format(self, record: logging.LogRecord) -> str:
        doc = {
            'ts': self.formatTime(record),
            'level': record.levelname,
            'logger': record.name,
            'message': record.getMessage(),
        }
        for key, value in vars(record).items():
            if key not in _RECORD_FIELDS and not key.startswith('_'):
                doc[key] = value
        if record.exc_info:
            doc['exception'] = self.formatException(record.exc_info)
        return json.dumps(doc, default=str)


def setup_logging(mode: str = 'text', verbose: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.INFO
    if mode == 'json':
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(JsonLinesFormatter())
        logging.basicConfig(level=level, handlers=[handler], force=True)
    else:
        logging.basicConfig(level=level, format='%(asctime)s - %(levelname)s - %(message)s',
                            stream=sys.stderr, force=True)


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def resolve_dataset(ref: str) -> Dataset:
    """A file path, or bundled:<name> for a desk dataset."""
    if ref.startswith(BUNDLED_PREFIX):
        name = ref[len(BUNDLED_PREFIX):]
        if name not in bundled_names():
            raise ConfigError(f"no bundled dataset {name!r}; choose from {', '.join(bundled_names())}")
        return load_bundled(name)
    return load_dataset(ref)


def _datasets(refs: Optional[List[str]], cfg: AvatarConfig) -> List[Dataset]:
    if refs:
        return [resolve_dataset(r) for r in refs]
    return [resolve_dataset(n if n.startswith(BUNDLED_PREFIX) else BUNDLED_PREFIX + n)
            for n in cfg.bench.datasets]


def _pipeline(args, pool) -> Pipeline:
    if args.pipeline:
        return load_pipeline(args.pipeline, pool)
    return Pipeline.of(*args.components, pool=pool)


def _emit(doc) -> None:
    print(json.dumps(doc, indent=2))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_gen_synthetic(args, cfg: AvatarConfig, pool) -> int:
    cases = generate_suite(cfg.synthetic.rows, cfg.seed)
    for case in cases:
        violations = isolation_violations(case)
        if violations:
            logger.warning(f"{case.key}: token differs on {', '.join(violations)}")
    write_suite(cases, args.out, cfg.synthetic.rows, cfg.seed)
    return 0


def cmd_gen_datasets(args, cfg: AvatarConfig, pool) -> int:
    write_bundled(args.out)
    return 0


def cmd_dump_pool(args, cfg: AvatarConfig, pool) -> int:
    dump_roster(args.out, pool)
    logger.info(f"Wrote {len(pool)} components to {args.out}")
    return 0


def cmd_learn_kb(args, cfg: AvatarConfig, pool) -> int:
    suite = load_suite(args.suite) if args.suite else generate_suite(cfg.synthetic.rows, cfg.seed)
    limits = ExecutionLimits(timeout=cfg.limits.learn_timeout_s, seed=cfg.seed)
    kb = learn_knowledge_base(pool, suite, limits, jobs=cfg.jobs, progress=True)
    if args.audit:
        problems = audit_hyperparameters(kb, pool, suite, limits, jobs=cfg.jobs)
        kb.provenance.learner_warnings.extend(problems)
        logger.info(f"Hyperparameter audit: {len(problems)} setting(s) differ from the learned records")
    save_kb(kb, args.out)
    warnings_file = write_warnings(kb, args.out)
    logger.info(f"Wrote {len(kb)} records to {args.out} "
                f"({len(kb.provenance.learner_warnings)} warnings in {warnings_file})")
    return 0


def cmd_eval(args, cfg: AvatarConfig, pool) -> int:
    p = _pipeline(args, pool)
    d = resolve_dataset(args.data)
    verdict = evaluate_token(p, extract_token(d), load_kb(args.kb))
    doc = {'pipeline': p.component_ids, **verdict.to_json()}
    if args.t_method:
        outcome = execute_pipeline(p, d, ExecutionLimits(timeout=cfg.limits.timeout_s, seed=cfg.seed))
        doc['t_method'] = verdict_to_json(outcome)
    _emit(doc)
    return 0


def cmd_random_bench(args, cfg: AvatarConfig, pool) -> int:
    """Write a random pipeline corpus as JSON lines, with surrogate verdicts when --kb/--data are given."""
    corpus = random_corpus(pool, cfg.bench.n_pipelines, cfg.bench.max_len, cfg.seed)
    kb = load_kb(args.kb) if args.kb else None
    token = extract_token(resolve_dataset(args.data)) if args.data else None
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    valid = 0
    with open(out, 'w', encoding='utf-8') as f:
        for p in corpus:
            doc = dump_pipeline(p)
            if kb is not None and token is not None:
                verdict = evaluate_token(p, token, kb)
                doc['valid'] = verdict.valid
                doc['failing_component'] = verdict.failing_component
                valid += verdict.valid
            f.write(json.dumps(doc) + '\n')
    logger.info(f"Wrote {len(corpus)} pipelines to {out}"
                + (f" ({valid} judged valid)" if kb is not None and token is not None else ''))
    return 0


def cmd_bench_agreement(args, cfg: AvatarConfig, pool) -> int:
    report = bench_agreement(pool, load_kb(args.kb), _datasets(args.data, cfg), cfg.bench.n_pipelines,
                             cfg.bench.max_len,
                             ExecutionLimits(timeout=cfg.limits.bench_timeout_s, seed=cfg.seed),
                             cfg.seed, jobs=cfg.jobs, progress=True)
    write_report(report, args.out)
    return _report_exit(report)


def cmd_bench_wasted(args, cfg: AvatarConfig, pool) -> int:
    report = bench_wasted_time(pool, None, _datasets(args.data, cfg), cfg.optimizer.budget_s,
                               cfg.bench.seeds, cfg.optimizer.settings(), jobs=cfg.jobs, progress=True)
    write_report(report, args.out)
    return _report_exit(report)


def cmd_bench_effect(args, cfg: AvatarConfig, pool) -> int:
    report = bench_avatar_effect(pool, load_kb(args.kb), _datasets(args.data, cfg), cfg.optimizer.budget_s,
                                 cfg.bench.seeds, cfg.optimizer.init_count, cfg.optimizer.settings(),
                                 jobs=cfg.jobs, progress=True)
    write_effect_report(report, args.out)
    return _report_exit(report)


def _report_exit(report) -> int:
    failed = [name for name, ok in report.checks.items() if not ok]
    if failed:
        logger.error(f"Report checks failed: {', '.join(failed)}")
        return 1
    return 0


def cmd_optimize(args, cfg: AvatarConfig, pool) -> int:
    use_avatar = args.avatar == 'on'
    if use_avatar and not args.kb:
        raise ConfigError('--avatar on needs --kb')
    kb = load_kb(args.kb) if args.kb else None
    result = optimize(resolve_dataset(args.data), pool, kb, cfg.optimizer.budget_s,
                      cfg.optimizer.init_count, use_avatar, cfg.seed, cfg.optimizer.settings())
    if args.out:
        save_run(result, args.out)
        logger.info(f"Wrote {len(result.trials)} trials to {args.out}")
    _emit(result.best.model_dump() if result.best else None)
    return 0


def cmd_report(args, cfg: AvatarConfig, pool) -> int:
    result = load_run(args.input)
    if args.format == 'json':
        doc = summarize_run(result).model_dump()
        doc['best'] = result.best.model_dump() if result.best else None
        doc['trace'] = [{'time': t, 'best_error': e} for t, e in result.trace()]
        _emit(doc)
        return 0
    rows = [{'init_index': t.init_index, 'timestamp': t.timestamp, 'wall_time': t.wall_time,
             'verdict': t.verdict.value, 'error_rate': t.error_rate,
             'pipeline': ' -> '.join(t.pipeline), 'failing_component': t.failing_component,
             'reason': t.reason} for t in result.trials]
    pd.DataFrame(rows).to_csv(sys.stdout, index=False)
    return 0


COMMANDS = {
    'gen-synthetic': cmd_gen_synthetic,
    'gen-datasets': cmd_gen_datasets,
    'dump-pool': cmd_dump_pool,
    'learn-kb': cmd_learn_kb,
    'eval': cmd_eval,
    'random-bench': cmd_random_bench,
    'bench-agreement': cmd_bench_agreement,
    'bench-wasted': cmd_bench_wasted,
    'bench-effect': cmd_bench_effect,
    'optimize': cmd_optimize,
    'report': cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog='avatar', description='Pipeline validity surrogate toolkit')
    ap.add_argument('--seed', type=int, help='random seed (default: from config, 0)')
    ap.add_argument('--config', help='YAML, JSON or TOML config file')
    ap.add_argument('--log', choices=('json', 'text'), help='log format on stderr')
    ap.add_argument('--jobs', type=int, help='worker threads for executions')
    ap.add_argument('--pool', help='pool.json restricting the component roster')
    ap.add_argument('--verbose', '-v', action='store_true')
    sub = ap.add_subparsers(dest='cmd', required=True)

    p = sub.add_parser('gen-synthetic', help='write the synthetic characteristic suite')
    p.add_argument('--out', required=True)
    p.add_argument('--rows', type=int)

    p = sub.add_parser('gen-datasets', help='write the bundled desk datasets as ARFF')
    p.add_argument('--out', required=True)

    p = sub.add_parser('dump-pool', help='write the component roster')
    p.add_argument('--out', required=True)

    p = sub.add_parser('learn-kb', help='learn the knowledge base from the synthetic suite')
    p.add_argument('--out', required=True)
    p.add_argument('--suite', help='directory written by gen-synthetic (default: generate in memory)')
    p.add_argument('--rows', type=int)
    p.add_argument('--audit', action='store_true',
                   help='relearn every other hyperparameter setting and warn where its record differs')

    p = sub.add_parser('eval', help='judge one pipeline with the surrogate')
    p.add_argument('--kb', required=True)
    p.add_argument('--data', required=True, help=f"ARFF/CSV path or {BUNDLED_PREFIX}<name>")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument('--pipeline', help='pipeline JSON file')
    group.add_argument('--components', nargs='+', help='component ids, predictor last')
    p.add_argument('--t-method', action='store_true', help='also execute the pipeline')

    p = sub.add_parser('random-bench', help='write a random pipeline corpus')
    p.add_argument('--out', required=True)
    p.add_argument('--n', type=int)
    p.add_argument('--max-len', type=int)
    p.add_argument('--kb')
    p.add_argument('--data')

    p = sub.add_parser('bench-agreement', help='surrogate vs execution over a random corpus')
    p.add_argument('--kb', required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--data', nargs='+')
    p.add_argument('--n', type=int)
    p.add_argument('--max-len', type=int)
    p.add_argument('--timeout')

    p = sub.add_parser('bench-wasted', help='time spent on invalid pipelines without the filter')
    p.add_argument('--out', required=True)
    p.add_argument('--data', nargs='+')
    p.add_argument('--budget')
    p.add_argument('--seeds', type=int, nargs='+')
    p.add_argument('--max-evaluations', type=int)

    p = sub.add_parser('bench-effect', help='optimizer with vs without the filter')
    p.add_argument('--kb', required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--data', nargs='+')
    p.add_argument('--budget')
    p.add_argument('--seeds', type=int, nargs='+')
    p.add_argument('--init', type=int, choices=(1, 5))
    p.add_argument('--max-evaluations', type=int)

    p = sub.add_parser('optimize', help='optimize a pipeline on one dataset')
    p.add_argument('--data', required=True)
    p.add_argument('--kb')
    p.add_argument('--budget')
    p.add_argument('--init', type=int, choices=(1, 5))
    p.add_argument('--avatar', choices=('on', 'off'), default='on')
    p.add_argument('--max-evaluations', type=int)
    p.add_argument('--out')

    p = sub.add_parser('report', help='summarize a run.json')
    p.add_argument('--in', dest='input', required=True)
    p.add_argument('--format', choices=('json', 'csv'), default='json')
    return ap


def flag_overrides(args) -> Dict[str, Any]:
    """Config-shaped dict of the flags that were given."""
    flags = {
        ('seed',): args.seed,
        ('jobs',): args.jobs,
        ('log',): args.log,
        ('synthetic', 'rows'): getattr(args, 'rows', None),
        ('limits', 'bench_timeout_s'): getattr(args, 'timeout', None),
        ('optimizer', 'budget_s'): getattr(args, 'budget', None),
        ('optimizer', 'init_count'): getattr(args, 'init', None),
        ('optimizer', 'max_evaluations'): getattr(args, 'max_evaluations', None),
        ('bench', 'n_pipelines'): getattr(args, 'n', None),
        ('bench', 'max_len'): getattr(args, 'max_len', None),
        ('bench', 'seeds'): getattr(args, 'seeds', None),
    }
    out: Dict[str, Any] = {}
    for path, value in flags.items():
        if value is None:
            continue
        node = out
        for key in path[:-1]:
            node = node.setdefault(key, {})
        node[path[-1]] = value
    return out


def main(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        cfg = load_config(args.config, flag_overrides(args))
    except ConfigError as e:
        setup_logging('text', args.verbose)
        logger.error(str(e))
        return 1
    setup_logging(cfg.log, args.verbose)
    print(json.dumps({'command': args.cmd, 'config': cfg.model_dump()}), file=sys.stderr)

    try:
        pool = load_roster(args.pool) if args.pool else pool_roster()
        return COMMANDS[args.cmd](args, cfg, pool)
    except (AvatarError, OSError, ValueError) as e:
        logger.error(f"{args.cmd} failed: {e}")
        return 1


if __name__ == '__main__':
    sys.exit(main())
