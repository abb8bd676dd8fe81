# Handler for the Harnack blow-up experiment

from jumplab.estimators.counterexample import counterexample_ratio
from jumplab.estimators.estimate import ratio_estimate
from jumplab.handlers.base import estimate_row, respond, value_row

SCHEMAS = {
    'counterexample_ratio': {'m_list': [4, 8], 'direct_ms': [4], 'direct_paths': None, 'smooth': True},
}


def run_counterexample_ratio(job):
    s = job.settings
    result = counterexample_ratio(s['m_list'], job.n_paths, job.params, job.plan, op=job.op,
                                  direct_ms=tuple(s['direct_ms']), direct_paths=s['direct_paths'],
                                  smooth=s['smooth'])
    rows = []
    for row in result.rows + result.direct:
        tag = f"m={row.m}:{row.method}"
        rows.append(estimate_row(f"u_x:{tag}", row.numerator))
        rows.append(estimate_row(f"u_y:{tag}", row.denominator))
        if row.excluded:
            rows.append(value_row(f"ratio:{tag}", None, flags=('excluded',), diagnostic=row.diagnostic))
        else:
            rows.append(estimate_row(f"ratio:{tag}", row.ratio, predicted=row.predicted))

    for row in result.direct:
        twin = result.ratio(row.m, 'occupation')
        if twin is not None and row.ratio is not None:
            rows.append(value_row(f"agreement:m={row.m}", twin.overlaps(row.ratio),
                                  occupation=twin.value, direct=row.ratio.value))

    kept = [row for row in result.rows if not row.excluded]
    if len(kept) >= 2:
        growth = ratio_estimate(kept[-1].ratio, kept[0].ratio)
        rows.append(estimate_row(f"growth:m={kept[-1].m}/m={kept[0].m}", growth,
                                 predicted=kept[-1].predicted / kept[0].predicted))
    return rows


EXPERIMENTS = {'counterexample_ratio': run_counterexample_ratio}


def handler(event, context):
    """
    Ratios u_m(x_m) / u_m(y_0) for the counterexample kernel
    """
    return respond(EXPERIMENTS, event, context)
