# Handlers for kernel-level experiments: Levy system, Meyer overlay, comparability

from jumplab.errors import ConfigError, InputError
from jumplab.estimators.levy_system import levy_system_statistic
from jumplab.estimators.meyer import meyer_equivalence
from jumplab.handlers.base import REQUIRED, domain, estimate_row, point, respond, value_row
from jumplab.jump_kernels import comparability_profile, make_kernel
from jumplab.rng import RngStream

SCHEMAS = {
    'levy_system_statistic': {'x0': REQUIRED, 'source': REQUIRED, 'target': REQUIRED, 't0': REQUIRED,
                              'nodes': 32},
    'meyer_equivalence': {'x0': REQUIRED, 'kernel': REQUIRED},
    'comparability_profile': {'x0': REQUIRED, 'radii': REQUIRED, 'samples': 100_000, 'r_out': 2.0,
                              'z_from': 'annulus'},
}


def run_levy_system_statistic(job):
    s = job.settings
    est = levy_system_statistic(job.op, point(s['x0'], 'x0'), domain(s['source'], 'source'),
                                domain(s['target'], 'target'), float(s['t0']), job.n_paths,
                                job.params, job.plan, int(s['nodes']))
    return [estimate_row('levy_system_statistic', est)]


def run_meyer_equivalence(job):
    s = job.settings
    spec = s['kernel']
    if not isinstance(spec, dict) or 'name' not in spec:
        raise InputError("kernel must be a mapping with name and params")
    try:
        full = make_kernel(spec['name'], spec.get('params'), job.op.dimension)
    except ConfigError as exc:
        raise ConfigError([(f"experiment.params.kernel.{p}", msg) for p, msg in exc.problems]) from exc
    result = meyer_equivalence(job.op, full, point(s['x0'], 'x0'), job.n_paths, job.params, job.plan)
    return [
        value_row(f"ks_pvalue:x_{row['coordinate']}", row.pop('pvalue'), n=row.pop('n'), **row)
        for row in result.as_rows()
    ]


def run_comparability_profile(job):
    s = job.settings
    rng = RngStream(job.plan.master_seed, job.plan.offset).generator()
    results, fit = comparability_profile(job.op.kernel, point(s['x0'], 'x0'), s['radii'], int(s['samples']),
                                         rng, float(s['r_out']), s['z_from'])
    rows = [value_row(f"k_r:r={res.r}", res.ratio, n=res.samples, **res.as_row()) for res in results]
    if fit is not None:
        # k_r ~ k r^(-beta)
        rows.append(value_row('beta', -fit.exponent, k=fit.prefactor, **fit.as_row()))
    return rows


EXPERIMENTS = {
    'levy_system_statistic': run_levy_system_statistic,
    'meyer_equivalence': run_meyer_equivalence,
    'comparability_profile': run_comparability_profile,
}


def handler(event, context):
    """
    Levy-system consistency, Meyer overlay law check and kernel comparability
    """
    return respond(EXPERIMENTS, event, context)
