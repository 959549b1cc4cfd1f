import os
import sys
import json
import logging
import argparse
from dataclasses import replace

from cmctorus import cache, pipeline
from cmctorus.config import RunConfig
from cmctorus.exceptions import ConfigError, InternalError
from cmctorus.report import error_record
from cmctorus.utils import ensure_directory

MODES = ['profile', 'surface', 'solve', 'match', 'certify', 'export', 'selftest', 'help']
ERROR_FILENAME = "error.json"
TESTS_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "tests")


def build_parser():
    parser = argparse.ArgumentParser(description='Almost constant mean curvature tori from bent unduloids.')
    parser.add_argument('--mode', choices=MODES, help='Choose the mode of operation')

    parser.add_argument('--config', type=str, help='JSON run configuration; flags below override it')
    parser.add_argument('--a', type=float, help='Neck size in (0, 1/2]')
    parser.add_argument('--n', type=int, help='Number of unduloid periods closing up into a torus')
    parser.add_argument('--eps', type=float, help='Bending curvature of an open bend (instead of --n)')
    parser.add_argument('--A', type=float, help='Amplitude A of H = 1 + A|X|^-gamma')
    parser.add_argument('--gamma', type=float, help='Decay exponent gamma in (0, 2)')
    parser.add_argument('--n_t', type=int, help='Grid points per period in t')
    parser.add_argument('--n_theta', type=int, help='Grid points in theta, a power of two')
    parser.add_argument('--tol', type=float, help='Fixed point tolerance in the weighted norm')
    parser.add_argument('--anderson', type=int, help='Anderson acceleration depth 0..3')
    parser.add_argument('--r0', type=float, help='Tube parameter of the embedding certificate')
    parser.add_argument('--format', choices=['obj', 'ply'], help='Mesh format')
    parser.add_argument('--output_dir', type=str, help='Directory for report, trace, solution and mesh')
    parser.add_argument('--solution', type=str, help='Saved solution for "certify" and "export"')
    parser.add_argument('--silent', action='store_true', default=False, help='Surpress output')
    parser.add_argument('--monitor_perf', action='store_true', default=False, help='Log stage times to the perf logger')
    return parser


def load_config(args):
    config = RunConfig.from_json(args.config) if args.config else RunConfig()
    overrides = dict(a=args.a, n=args.n, eps=args.eps, A=args.A, gamma=args.gamma, n_t=args.n_t,
                     n_theta=args.n_theta, tol_fp=args.tol, anderson_depth=args.anderson, r0=args.r0,
                     mesh_format=args.format, output_dir=args.output_dir)
    config = config.with_overrides(**overrides)
    if args.mode == 'match':
        config = config.with_overrides(auto_match=True, a=None) if config.a is None else config
        if config.a is not None:
            raise ConfigError("'match' solves for the neck size; drop --a")
    if args.mode in ('certify', 'export'):
        if args.solution is None:
            raise ConfigError(f"'{args.mode}' mode requires --solution")
        config = solution_config(config, args.solution)
    return config.validate()


def solution_config(config, solution_path):
    """The grid settings of a saved solution, echoed into the run configuration."""
    solution = cache.load_solution(solution_path)
    closed = solution["n"] is not None
    return replace(config, a=solution["a"], auto_match=False, n=solution["n"],
                   eps=None if closed else solution["eps"], n_t=solution["n_t"], n_theta=solution["n_theta"])


def selftest():
    import pytest
    return pytest.main(["-q", TESTS_DIR])


def dispatch(args, config):
    verbose = not args.silent
    if args.mode == 'profile':
        return pipeline.run_profile(config, verbose, args.monitor_perf)
    elif args.mode == 'surface':
        return pipeline.run_surface(config, verbose, args.monitor_perf)
    elif args.mode == 'solve':
        return pipeline.run_solve(config, verbose, args.monitor_perf)
    elif args.mode == 'match':
        return pipeline.run_match(config, verbose, args.monitor_perf)
    elif args.mode in ('certify', 'export'):
        run = pipeline.run_certify if args.mode == 'certify' else pipeline.run_export
        return run(config, args.solution, verbose, args.monitor_perf)


def main(argv=None):
    """
    Parse argv, run the selected mode and return the exit status.

    Failures write {"error", "message"} to error.json in the output directory
    and to stderr, and return 1.
    """
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.mode is None or args.mode == 'help':
        parser.print_help()
        return 0
    if args.mode == 'selftest':
        return int(selftest())

    output_dir = args.output_dir or "."
    try:
        config = load_config(args)
        output_dir = config.output_dir
        report = dispatch(args, config)
    except InternalError as e:
        return _fail(e, output_dir)
    except Exception as e:
        logging.error(f"Unexpected failure: {e}")
        return _fail(e, output_dir)

    if not args.silent:
        print(json.dumps(report["diagnostics"], indent=2, sort_keys=True, default=str))
    return 0


def _fail(error, output_dir):
    record = error_record(error)
    try:
        with open(os.path.join(ensure_directory(output_dir), ERROR_FILENAME), "w") as file:
            json.dump(record, file)
    except OSError as e:
        logging.error(f"Cannot write error record: {e}")
    print(json.dumps(record), file=sys.stderr)
    return 1
