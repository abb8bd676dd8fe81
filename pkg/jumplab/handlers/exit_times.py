# Handlers for exit-time experiments

from jumplab.errors import InputError
from jumplab.estimators.calibration import interval_coverage
from jumplab.estimators.exit_times import exit_moment, exit_moment_scaling, exit_tail, krylov_functional
from jumplab.estimators.harmonic import harmonic_estimate
from jumplab.estimators.refinement import refinement_check
from jumplab.handlers.base import REQUIRED, domain, estimate_row, payoff, point, respond, value_row

SCHEMAS = {
    'exit_moment': {
        'x0': REQUIRED, 'domain': REQUIRED, 'p': 1.0,
        'refine': False, 'refine_dt_factor': 4.0, 'refine_delta_factor': 2.0,
    },
    'exit_tail': {'x0': REQUIRED, 'domain': REQUIRED, 't': REQUIRED},
    'exit_moment_scaling': {'center': REQUIRED, 'radii': REQUIRED, 'p': 1.0, 'scale_steps': True},
    'krylov_functional': {'x': REQUIRED, 'domain': REQUIRED, 'payoff': REQUIRED},
    'calibration': {
        'x0': REQUIRED, 'domain': REQUIRED, 'truth': REQUIRED, 'repetitions': 200,
        'statistic': 'exit_moment', 'p': 1.0, 'payoff': None,
    },
}


def run_exit_moment(job):
    s = job.settings
    x0, dom = point(s['x0'], 'x0'), domain(s['domain'])
    est = exit_moment(job.op, x0, dom, s['p'], job.n_paths, job.params, job.plan)
    rows = [estimate_row('exit_moment', est)]
    if s['refine']:
        check = refinement_check(
            lambda params: exit_moment(job.op, x0, dom, s['p'], job.n_paths, params, job.plan),
            job.params, s['refine_dt_factor'], s['refine_delta_factor'],
        )
        rows.append(estimate_row('exit_moment:refined', check.fine))
        rows.append(value_row('refinement', check.relative_change, flags=() if check.consistent else ('inconsistent',),
                              **check.as_row()))
    return rows


def run_exit_tail(job):
    s = job.settings
    x0, dom = point(s['x0'], 'x0'), domain(s['domain'])
    times = s['t'] if isinstance(s['t'], list) else [s['t']]
    rows = []
    for t in times:
        est = exit_tail(job.op, x0, dom, float(t), job.n_paths, job.params, job.plan)
        rows.append(estimate_row(f"exit_tail:t={t}", est))
    return rows


def run_exit_moment_scaling(job):
    s = job.settings
    result = exit_moment_scaling(job.op, point(s['center'], 'center'), s['radii'], s['p'],
                                 job.n_paths, job.params, job.plan, s['scale_steps'])
    rows = [estimate_row(f"exit_moment:r={r}", est) for r, est in zip(result.radii, result.estimates)]
    rows.append(value_row('scaling_exponent', result.fit.exponent, **result.fit.as_row()))
    return rows


def run_krylov_functional(job):
    s = job.settings
    est = krylov_functional(job.op, payoff(s['payoff']), point(s['x'], 'x'), domain(s['domain']),
                            job.n_paths, job.params, job.plan)
    return [estimate_row('krylov_functional', est)]


def run_calibration(job):
    s = job.settings
    x0, dom = point(s['x0'], 'x0'), domain(s['domain'])
    if s['statistic'] == 'exit_moment':
        def run(plan):
            return exit_moment(job.op, x0, dom, s['p'], job.n_paths, job.params, plan)
    elif s['statistic'] == 'harmonic_estimate':
        f = payoff(s['payoff'] or {'name': 'coordinate', 'params': {'index': 1}})

        def run(plan):
            return harmonic_estimate(job.op, f, x0, dom, job.n_paths, job.params, plan)
    else:
        raise InputError(f"unknown calibration statistic '{s['statistic']}'")
    result = interval_coverage(run, float(s['truth']), int(s['repetitions']), job.plan)
    return [value_row('coverage', result.covered, n=result.repetitions, **result.as_row())]


EXPERIMENTS = {
    'exit_moment': run_exit_moment,
    'exit_tail': run_exit_tail,
    'exit_moment_scaling': run_exit_moment_scaling,
    'krylov_functional': run_krylov_functional,
    'calibration': run_calibration,
}


def handler(event, context):
    """
    Exit-time moments, tails, radius scaling and occupation functionals
    """
    return respond(EXPERIMENTS, event, context)
