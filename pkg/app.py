#!/usr/bin/env python3
import argparse
import logging
import os
import sys

from jumplab import __version__
from jumplab.errors import ConfigError, InputError
from jumplab.handlers import SCHEMAS
from jumplab.jump_kernels import KERNELS
from jumplab.operator_model import DIFFUSIONS, DRIFTS
from jumplab.payoffs import PAYOFFS
from jumplab.scenario.assembly import RunContext
from jumplab.scenario.config import load_config, serialize_config
from jumplab.scenario.runner import EXIT_CONFIG, EXIT_OK, output_dir, run_all, run_scenario

logger = logging.getLogger('jumplab')


def configure_logging():
    logging.basicConfig(
        level=os.environ.get('JUMPLAB_LOG_LEVEL', 'INFO').upper(),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )


def build_parser():
    parser = argparse.ArgumentParser(prog='jumplab', description='Monte Carlo laboratory for jump diffusions')
    parser.add_argument('--version', action='version', version=f"jumplab {__version__}")
    sub = parser.add_subparsers(dest='command', required=True)

    def add_run_options(p):
        p.add_argument('--threads', type=int, default=None, help='worker processes (default: available cores)')
        p.add_argument('--strict', action='store_true', help='uncertified estimates or failed validators fail the run')
        p.add_argument('--out', default=None, help='output directory (default: run.output, then $JUMPLAB_OUTPUT_DIR, then ./reports)')
        p.add_argument('--timing', action='store_true', help='record wall time (reports are then not reproducible)')
        p.add_argument('--dump-paths', type=int, default=0, metavar='K', help='write the first K path skeletons')

    run = sub.add_parser('run', help='run one scenario file')
    run.add_argument('config')
    add_run_options(run)

    validate = sub.add_parser('validate', help='parse and validate a scenario file')
    validate.add_argument('config')

    run_dir = sub.add_parser('run-all', help='run every scenario file in a directory')
    run_dir.add_argument('directory')
    add_run_options(run_dir)

    sub.add_parser('list-builtins', help='list diffusions, drifts, kernels, payoffs and estimators')
    return parser


def context_from(args):
    return RunContext(workers=args.threads or 0, strict=args.strict, timing=args.timing, dump_paths=args.dump_paths)


def main(argv=None):
    configure_logging()
    args = build_parser().parse_args(argv)

    if args.command == 'list-builtins':
        for title, names in (('diffusions', DIFFUSIONS), ('drifts', DRIFTS), ('kernels', KERNELS),
                             ('payoffs', PAYOFFS), ('estimators', sorted(SCHEMAS))):
            print(f"{title}: {', '.join(names)}")
        return EXIT_OK

    try:
        if args.command == 'validate':
            config = load_config(args.config)
            print(serialize_config(config), end='')
            logger.info("%s: valid scenario '%s'", args.config, config.id)
            return EXIT_OK

        context = context_from(args)
        if args.command == 'run':
            config = load_config(args.config)
            report = run_scenario(config, context, output_dir(config, args.out))
            print(report.summary(), end='')
            return report.exit_code

        reports = run_all(args.directory, context, args.out)
        for report in reports:
            print(f"{report.scenario_id}: {report.status} (exit {report.exit_code})")
        return max((r.exit_code for r in reports), default=EXIT_OK)

    except ConfigError as e:
        for path, message in e.problems:
            print(f"config error: {message} at {path}" if path else f"config error: {message}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == '__main__':
    sys.exit(main())
