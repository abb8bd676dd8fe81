# Handlers for Harnack and Holder experiments

from jumplab.estimators.regularity import harnack_ratio, holder_fit
from jumplab.handlers.base import REQUIRED, estimate_row, payoff, payoff_list, point, respond, value_row

SCHEMAS = {
    'harnack_ratio': {'z0': REQUIRED, 'R': REQUIRED, 'resolution': 3, 'payoffs': REQUIRED, 'seed_sets': 1},
    'holder_fit': {'z0': REQUIRED, 'R': REQUIRED, 'separations': REQUIRED, 'payoff': REQUIRED},
}


def run_harnack_ratio(job):
    s = job.settings
    payoffs = payoff_list(s['payoffs'])
    z0 = point(s['z0'], 'z0')
    rows = []
    for k in range(int(s['seed_sets'])):
        # seed sets are disjoint blocks of streams
        plan = job.plan.shifted(10_000 * k)
        result = harnack_ratio(job.op, payoffs, z0, float(s['R']), int(s['resolution']),
                               job.n_paths, job.params, plan)
        rows.append(value_row(f"harnack_ratio:set={k}", result.ratio, n=job.n_paths,
                              grid_points=len(result.grid), per_payoff=result.per_payoff, **result.as_row()))
    if len(rows) > 1:
        values = [row['value'] for row in rows]
        rows.append(value_row('harnack_ratio:spread', max(values) / min(values) - 1.0))
    return rows


def run_holder_fit(job):
    s = job.settings
    result = holder_fit(job.op, payoff(s['payoff']), point(s['z0'], 'z0'), float(s['R']), s['separations'],
                        job.n_paths, job.params, job.plan)
    rows = [
        estimate_row(f"difference:s={sep}", est, usable=i in result.usable)
        for i, (sep, est) in enumerate(zip(result.separations, result.differences))
    ]
    detail = result.as_row()
    detail.pop('flags')
    exponent = result.fit.exponent if result.fit is not None else None
    rows.append(value_row('holder_exponent', exponent, flags=result.flags, **detail))
    return rows


EXPERIMENTS = {
    'harnack_ratio': run_harnack_ratio,
    'holder_fit': run_holder_fit,
}


def handler(event, context):
    """
    Harnack ratios and Holder exponents of harmonic functions
    """
    return respond(EXPERIMENTS, event, context)
