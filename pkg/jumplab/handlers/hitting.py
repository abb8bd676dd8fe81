# Handlers for hitting and tube experiments

from jumplab.errors import InputError
from jumplab.estimators.hitting import hit_profile
from jumplab.estimators.support import AnchorPath, tube_profile
from jumplab.handlers.base import REQUIRED, domain, estimate_row, point, respond

SCHEMAS = {
    'hit_probability': {'x0': REQUIRED, 'ambient': REQUIRED, 'targets': REQUIRED},
    'tube_probability': {'anchor': REQUIRED, 'eps': REQUIRED, 't0': REQUIRED},
}


def run_hit_probability(job):
    s = job.settings
    targets = [domain(t, 'target') for t in s['targets']]
    estimates = hit_profile(job.op, point(s['x0'], 'x0'), targets, domain(s['ambient'], 'ambient'),
                            job.n_paths, job.params, job.plan)
    return [
        estimate_row(f"hit_probability:target={i}", est, target=t.describe())
        for i, (t, est) in enumerate(zip(targets, estimates))
    ]


def run_tube_probability(job):
    s = job.settings
    if not isinstance(s['anchor'], dict) or {'times', 'points'} - set(s['anchor']):
        raise InputError("anchor must be a mapping with times and points")
    anchor = AnchorPath(tuple(s['anchor']['times']), tuple(tuple(p) for p in s['anchor']['points']))
    eps = s['eps'] if isinstance(s['eps'], list) else [s['eps']]
    estimates = tube_profile(job.op, anchor, eps, float(s['t0']), job.n_paths, job.params, job.plan)
    return [estimate_row(f"tube_probability:eps={e}", est) for e, est in zip(eps, estimates)]


EXPERIMENTS = {
    'hit_probability': run_hit_probability,
    'tube_probability': run_tube_probability,
}


def handler(event, context):
    """
    Hit-before-exit probabilities and tube probabilities
    """
    return respond(EXPERIMENTS, event, context)
