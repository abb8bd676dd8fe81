"""
Shared plumbing for the experiment handlers.

Every handler module exposes `handler(event, context)`. The event is a validated scenario
document; the response is a status dict whose body is a JSON document with one row per
reported quantity.
"""

import json
import logging
from dataclasses import dataclass

import numpy as np

from jumplab.errors import (
    ConfigError,
    FitError,
    GeometryError,
    InputError,
    JumpLabError,
    PreconditionError,
)
from jumplab.payoffs import domain_from_params, make_payoff
from jumplab.scenario.assembly import build_operator, build_plan, build_sim_params

logger = logging.getLogger(__name__)


class Required:
    def __repr__(self):
        return 'REQUIRED'


REQUIRED = Required()

CLIENT_ERRORS = (ConfigError, InputError, GeometryError, PreconditionError, FitError)


@dataclass
class Job:
    op: object
    params: object
    plan: object
    settings: dict
    n_paths: int
    context: object = None


def estimate_row(label, est, **detail):
    return {
        'label': label,
        'value': est.value,
        'stderr': est.stderr,
        'ci_low': est.low,
        'ci_high': est.high,
        'n': est.n,
        'flags': ';'.join(est.flags),
        'detail': {**est.extras, **detail},
    }


def value_row(label, value, n=None, flags=(), **detail):
    return {
        'label': label,
        'value': value,
        'stderr': None,
        'ci_low': None,
        'ci_high': None,
        'n': n,
        'flags': ';'.join(flags),
        'detail': detail,
    }


def point(value, name):
    x = np.asarray(value, dtype=float)
    if x.ndim != 1 or not np.all(np.isfinite(x)):
        raise InputError(f"{name} must be a finite vector")
    return x


def domain(spec, name='domain'):
    if not isinstance(spec, dict):
        raise InputError(f"{name} must be a mapping with shape, center and radius or side")
    try:
        return domain_from_params(dict(spec))
    except KeyError as exc:
        raise InputError(f"{name} is missing {exc}") from exc


def payoff(spec):
    if not isinstance(spec, dict) or 'name' not in spec:
        raise InputError("payoff must be a mapping with name and params")
    try:
        return make_payoff(spec['name'], spec.get('params'))
    except KeyError as exc:
        raise InputError(f"payoff '{spec['name']}' is missing {exc}") from exc


def payoff_list(specs):
    out = []
    for spec in specs:
        made = payoff(spec)
        out.extend(made if isinstance(made, list) else [made])
    return out


def _response(status, body):
    return {
        'statusCode': status,
        'headers': {'Content-Type': 'application/json'},
        'body': json.dumps(body, default=str),
    }


def respond(experiments, event, context):
    """Assemble the scenario, run the named experiment and wrap the outcome."""
    experiment = event.get('experiment', {})
    name = experiment.get('estimator')
    scenario_id = event.get('scenario', {}).get('id')
    if name not in experiments:
        return _response(400, {'error': f"unknown estimator '{name}'", 'type': 'ConfigError'})

    try:
        # 1. assemble operator, step parameters and sampling plan
        op = build_operator(event['operator'])
        params = build_sim_params(event['simulation'])
        plan = build_plan(event['run'], context)
        job = Job(op, params, plan, dict(experiment.get('params', {})), event['run']['n_paths'], context)

        # 2. run
        logger.info("scenario %s: running %s with %d paths", scenario_id, name, job.n_paths)
        rows = experiments[name](job)

        return _response(200, {'estimator': name, 'rows': rows})

    except CLIENT_ERRORS as e:
        logger.error("scenario %s: %s rejected: %s", scenario_id, name, e)
        return _response(400, {'error': str(e), 'type': type(e).__name__, 'witness': e.witness})

    except JumpLabError as e:
        logger.error("scenario %s: %s failed: %s", scenario_id, name, e)
        return _response(500, {'error': str(e), 'type': type(e).__name__, 'witness': e.witness})

    except Exception as e:
        logger.exception("scenario %s: unexpected failure in %s", scenario_id, name)
        return _response(500, {'error': str(e), 'type': type(e).__name__})
