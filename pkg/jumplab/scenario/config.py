"""
Scenario documents: parsing, defaults, validation with key-path diagnostics, and canonical
serialisation.

A document is a YAML mapping with the top-level blocks scenario, operator, simulation,
experiment, run and validation. Every problem found is reported at once as a ConfigError
whose problems are (key path, message) pairs.
"""

import copy
import hashlib
import logging
from dataclasses import dataclass

import yaml

from jumplab.errors import ConfigError
from jumplab.handlers import SCHEMAS
from jumplab.handlers.base import REQUIRED
from jumplab.scenario.assembly import build_operator, build_sim_params

logger = logging.getLogger(__name__)

NUMBER = 'number'
INTEGER = 'integer'
STRING = 'string'
BOOLEAN = 'boolean'
MAPPING = 'mapping'
SEQUENCE = 'sequence'
ANY = 'any'

# block -> key -> (expected form, default)
LAYOUT = {
    'scenario': {
        'id': (STRING, REQUIRED),
        'description': (STRING, ''),
    },
    'operator': {
        'dimension': (INTEGER, REQUIRED),
        'diffusion': (MAPPING, {'name': 'identity', 'params': {}}),
        'drift': (MAPPING, {'name': 'zero-drift', 'params': {}}),
        'kernel': (MAPPING, {'name': 'zero', 'params': {}}),
        'lambda1': (NUMBER, 1.0),
        'lambda2': (NUMBER, 0.0),
        'K': (NUMBER, 0.0),
        'k': (NUMBER, None),
        'beta': (NUMBER, None),
    },
    'simulation': {
        'dt': (NUMBER, 1e-3),
        'delta': (NUMBER, 0.05),
        'horizon': (NUMBER, 1.0),
        'safety': (NUMBER, 1.0),
        'dt_ratio': (NUMBER, 1.0),
        'meyer_rate_cap': (NUMBER, 1e7),
    },
    'experiment': {
        'estimator': (STRING, REQUIRED),
        'params': (MAPPING, {}),
    },
    'run': {
        'n_paths': (INTEGER, REQUIRED),
        'seed': (INTEGER, 20240601),
        'confidence': (NUMBER, 0.99),
        'block_size': (INTEGER, 1000),
        'workers': (INTEGER, None),
        'strict': (BOOLEAN, False),
        'output': (STRING, None),
    },
    'validation': {
        'enabled': (BOOLEAN, True),
        'points': (INTEGER, 256),
        'box': (NUMBER, 1.0),
        'directions': (INTEGER, 64),
        'kernel_mass': (BOOLEAN, True),
        'seed': (INTEGER, 0),
        'expect': (SEQUENCE, []),
    },
}

NAMED = ('diffusion', 'drift', 'kernel')
EXPECT_KEYS = {'label': (STRING, REQUIRED), 'field': (STRING, 'value'), 'min': (NUMBER, None),
               'max': (NUMBER, None)}


def _form_of(value):
    if value is None:
        return None
    if isinstance(value, bool):
        return BOOLEAN
    if isinstance(value, int):
        return INTEGER
    if isinstance(value, float):
        return NUMBER
    if isinstance(value, str):
        return STRING
    if isinstance(value, dict):
        return MAPPING
    if isinstance(value, list):
        return SEQUENCE
    return type(value).__name__


def _matches(value, form):
    if value is None or form == ANY:
        return True
    actual = _form_of(value)
    return actual == form or (form == NUMBER and actual == INTEGER)


def _fill(block, layout, path, problems):
    """Defaulted copy of block; unknown keys, missing keys and wrong forms go to problems."""
    if not isinstance(block, dict):
        problems.append((path, "expected a mapping"))
        return {}
    out = {}
    for key in sorted(set(block) - set(layout), key=str):
        problems.append((f"{path}.{key}", "unknown key"))
    for key, (form, default) in layout.items():
        if block.get(key) is None:
            if default is REQUIRED:
                problems.append((f"{path}.{key}", f"missing required {form}"))
                continue
            out[key] = copy.deepcopy(default)
            continue
        value = block[key]
        if not _matches(value, form):
            problems.append((f"{path}.{key}", f"expected {form}, got {_form_of(value)}"))
            continue
        out[key] = float(value) if form == NUMBER and value is not None else value
    return out


def _fill_experiment_params(params, schema, problems):
    out = {}
    for key in sorted(set(params) - set(schema), key=str):
        problems.append((f"experiment.params.{key}", "unknown parameter"))
    for key, default in schema.items():
        if key not in params:
            if default is REQUIRED:
                problems.append((f"experiment.params.{key}", "missing required parameter"))
            else:
                out[key] = copy.deepcopy(default)
            continue
        value = params[key]
        expected = _form_of(default) if default is not REQUIRED else None
        if expected is not None and not _matches(value, expected):
            problems.append((f"experiment.params.{key}", f"expected {expected}, got {_form_of(value)}"))
            continue
        out[key] = float(value) if expected == NUMBER else value
    return out


@dataclass(frozen=True)
class ScenarioConfig:
    """A fully defaulted and validated scenario document."""
    document: dict

    @property
    def id(self):
        return self.document['scenario']['id']

    @property
    def estimator(self):
        return self.document['experiment']['estimator']

    @property
    def strict(self):
        return self.document['run']['strict']

    def as_dict(self):
        return copy.deepcopy(self.document)

    def canonical_text(self):
        return serialize_config(self)

    def params_hash(self):
        """Short digest of everything that determines the estimate."""
        relevant = {k: self.document[k] for k in ('operator', 'simulation', 'experiment')}
        relevant['run'] = {k: self.document['run'][k] for k in ('n_paths', 'seed', 'confidence', 'block_size')}
        text = yaml.safe_dump(relevant, sort_keys=True)
        return hashlib.sha256(text.encode('utf-8')).hexdigest()[:12]


def validate_document(raw):
    """Defaulted, validated document tree or ConfigError listing every problem."""
    problems = []
    if not isinstance(raw, dict):
        raise ConfigError([('', "scenario document must be a mapping")])
    for key in sorted(set(raw) - set(LAYOUT), key=str):
        problems.append((str(key), "unknown key"))
    doc = {name: _fill(raw.get(name, {}), layout, name, problems) for name, layout in LAYOUT.items()}

    # 1. named operator parts
    op = doc['operator']
    for part in NAMED:
        if part not in op:
            continue
        spec = op[part] or {}
        for key in sorted(set(spec) - {'name', 'params'}, key=str):
            problems.append((f"operator.{part}.{key}", "unknown key"))
        if not isinstance(spec.get('name'), str):
            problems.append((f"operator.{part}.name", "missing required string"))
        params = spec.get('params', {})
        if params is None:
            params = {}
        if not isinstance(params, dict):
            problems.append((f"operator.{part}.params", "expected mapping"))
        op[part] = {'name': spec.get('name'), 'params': params if isinstance(params, dict) else {}}

    # 2. run block
    run = doc['run']
    if 'n_paths' in run and run['n_paths'] <= 0:
        problems.append(('run.n_paths', "must be a positive integer"))
    if run.get('block_size', 1) <= 0:
        problems.append(('run.block_size', "must be a positive integer"))
    if run.get('workers') is not None and run['workers'] <= 0:
        problems.append(('run.workers', "must be a positive integer"))
    if 'confidence' in run and not 0.0 < run['confidence'] < 1.0:
        problems.append(('run.confidence', "must lie in (0, 1)"))
    if op.get('dimension') is not None and op['dimension'] <= 0:
        problems.append(('operator.dimension', "must be a positive integer"))

    # 3. experiment parameters against the estimator's schema
    exp = doc['experiment']
    if 'estimator' in exp:
        if exp['estimator'] not in SCHEMAS:
            problems.append(('experiment.estimator', "unknown estimator"))
        else:
            exp['params'] = _fill_experiment_params(exp.get('params') or {}, SCHEMAS[exp['estimator']], problems)

    # 4. expectations
    checks = []
    for i, item in enumerate(doc['validation'].get('expect', [])):
        checks.append(_fill(item, EXPECT_KEYS, f"validation.expect.{i}", problems))
    doc['validation']['expect'] = checks

    if problems:
        raise ConfigError(problems)

    # 5. names and numeric preconditions, checked by building the objects
    for build, block in ((build_sim_params, doc['simulation']), (build_operator, doc['operator'])):
        try:
            build(block)
        except ConfigError as exc:
            problems.extend(exc.problems)
    if problems:
        raise ConfigError(problems)
    return doc


def parse_config(text):
    """ScenarioConfig from YAML text."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([('', f"not a valid YAML document: {exc}")]) from exc
    config = ScenarioConfig(validate_document(raw))
    logger.debug("parsed scenario %s (%s)", config.id, config.estimator)
    return config


def load_config(path):
    with open(path, 'r', encoding='utf-8') as handle:
        return parse_config(handle.read())


def serialize_config(config):
    """Canonical YAML text: fully defaulted, keys sorted."""
    return yaml.safe_dump(config.document, sort_keys=True, default_flow_style=False, allow_unicode=True)
