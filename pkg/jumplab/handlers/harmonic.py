# Handlers for harmonic-function and exit-distribution experiments

import numpy as np

from jumplab.estimators.harmonic import (
    exit_distribution_comparability,
    harmonic_estimate,
    harmonic_estimates,
    occupation_exit_distribution,
)
from jumplab.handlers.base import REQUIRED, domain, estimate_row, payoff_list, point, respond
from jumplab.payoffs import DomainIndicator

SCHEMAS = {
    'harmonic_estimate': {'x': REQUIRED, 'domain': REQUIRED, 'payoffs': REQUIRED},
    'occupation_exit_distribution': {
        'x': REQUIRED, 'domain': REQUIRED, 'target': REQUIRED, 'nodes': 32, 'smooth': True, 'direct': False,
    },
    'exit_distribution_comparability': {'x0': REQUIRED, 'r': REQUIRED, 'target': REQUIRED, 'points': REQUIRED},
}


def run_harmonic_estimate(job):
    s = job.settings
    payoffs = payoff_list(s['payoffs'])
    x, dom = point(s['x'], 'x'), domain(s['domain'])
    if len(payoffs) == 1:
        return [estimate_row('harmonic_estimate', harmonic_estimate(job.op, payoffs[0], x, dom,
                                                                     job.n_paths, job.params, job.plan))]
    estimates = harmonic_estimates(job.op, payoffs, x, dom, job.n_paths, job.params, job.plan)
    return [
        estimate_row(f"harmonic_estimate:payoff={i}", est, payoff=f.describe())
        for i, (f, est) in enumerate(zip(payoffs, estimates))
    ]


def run_occupation_exit_distribution(job):
    s = job.settings
    x, dom, target = point(s['x'], 'x'), domain(s['domain']), domain(s['target'], 'target')
    est = occupation_exit_distribution(job.op, x, dom, target, job.n_paths, job.params, job.plan,
                                       int(s['nodes']), s['smooth'])
    rows = [estimate_row('occupation_exit_distribution', est)]
    if s['direct']:
        direct = harmonic_estimate(job.op, DomainIndicator(target), x, dom, job.n_paths, job.params,
                                   job.plan.shifted(1))
        rows.append(estimate_row('direct_count', direct, overlaps=est.overlaps(direct)))
    return rows


def run_exit_distribution_comparability(job):
    s = job.settings
    points = np.atleast_2d(np.asarray(s['points'], dtype=float))
    base, ratios = exit_distribution_comparability(
        job.op, point(s['x0'], 'x0'), float(s['r']), domain(s['target'], 'target'), points,
        job.n_paths, job.params, job.plan,
    )
    rows = [estimate_row('exit_distribution:x0', base)]
    for i, row in enumerate(ratios):
        rows.append(estimate_row(f"exit_distribution:point={i}", row['estimate'], point=row['point']))
        if row['ratio'] is not None:
            rows.append(estimate_row(f"ratio:point={i}", row['ratio'], point=row['point']))
    return rows


EXPERIMENTS = {
    'harmonic_estimate': run_harmonic_estimate,
    'occupation_exit_distribution': run_occupation_exit_distribution,
    'exit_distribution_comparability': run_exit_distribution_comparability,
}


def handler(event, context):
    """
    Harmonic functions through exit distributions
    """
    return respond(EXPERIMENTS, event, context)
