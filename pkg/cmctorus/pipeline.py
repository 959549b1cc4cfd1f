import os, time
import logging

import numpy as np

from cmctorus import cache, embedcert, geometry, matching, mesh_utils, profile, reduction
from cmctorus.exceptions import DomainError, InternalError
from cmctorus.geometry import TorusGrid
from cmctorus.jacobi import assemble_limit
from cmctorus.report import TraceWriter, new_report, write_report
from cmctorus.status import Status, StatusUpdater
from cmctorus.utils import ensure_directory, sha256_file

perf_logger = logging.getLogger("cmctorus.perf")

REPORT_FILENAME = "report.json"
TRACE_FILENAME = "trace.jsonl"
SOLUTION_FILENAME = "solution.npz"
MESH_BASENAME = "surface"


class Run:
    """
    One CLI run: a status file, a report and timed stages.

    Each stage reports "Took ... s" when verbose and a perf record when
    monitor_performance is set. Failures are written to status.json as
    named (InternalError) or unnamed failures and re-raised.
    """

    def __init__(self, mode, config, verbose=True, monitor_performance=False):
        self.config = config
        self.directory = ensure_directory(config.output_dir)
        self.verbose = verbose
        self.monitor_performance = monitor_performance
        self.report = new_report(mode, config)
        self.status_updater = StatusUpdater(self.directory)
        self.status_updater.set_status_started()
        self.started = time.time()

    def path(self, filename):
        return os.path.join(self.directory, filename)

    def stage(self, status, function, *args, **kwargs):
        sttime = time.time()
        self.status_updater.set_status(status)
        if(self.verbose): print(self.status_updater.get_status().value)
        try:
            result = function(*args, **kwargs)
        except InternalError as e:
            self.status_updater.set_status_named_failure(e.args[0])
            raise
        except Exception as e:
            self.status_updater.set_status_unnamed_failure(str(e))
            raise
        duration = time.time() - sttime
        if(self.verbose): print(f"Took {duration:.2f} s\n")
        if(self.monitor_performance): perf_logger.info(f"({status.value}) {duration}")
        return result

    def finish(self):
        self.report["wall_clock_s"] = time.time() - self.started
        path = self.stage(Status.REPORT, write_report, self.report, self.path(REPORT_FILENAME))
        self.status_updater.set_status_completed()
        return path


def _profile(run, a=None):
    config = run.config
    tbl, digest = cache.cached_profile(config.a if a is None else a, config.n_t)
    run.report["provenance"][f"profile_a={tbl.a}"] = digest
    return tbl


def _grid(config, tbl):
    if config.n is not None:
        return TorusGrid.for_n(tbl, config.n, config.n_theta)
    return TorusGrid(tbl=tbl, n_theta=config.n_theta, eps=config.eps or 0.0)


def _profile_diagnostics(tbl):
    out = {"a": tbl.a, "gamma": tbl.gamma, "tau": tbl.tau, "h": tbl.h, "n_t": tbl.n_t,
           "conformality": float(np.max(np.abs(tbl.x ** 2 - tbl.xp ** 2 - tbl.zp ** 2))),
           "conservation": profile.conservation_residual(tbl),
           "min_w1": float(np.min(tbl.w1)),
           "area": profile.unduloid_area(tbl.a), "volume": profile.unduloid_volume(tbl.a)}
    if tbl.a < 0.5:
        out["tau_ode"], out["h_ode"] = profile.period_from_ode(tbl.a)
    return out


def run_profile(config, verbose=True, monitor_performance=False):
    """
    Tabulate the profile at config.a and report its constants and invariants.

    Example:
        run_profile(RunConfig(a=0.5))
        Result: report with tau = pi and h = pi/2
    """
    run = Run("profile", config, verbose, monitor_performance)
    tbl = run.stage(Status.PROFILE, _profile, run)
    run.report["diagnostics"]["profile"] = _profile_diagnostics(tbl)
    run.finish()
    return run.report


def _surface_diagnostics(grid, jet):
    mc = geometry.mean_curvature(jet).values
    energies = matching.area_volume(grid, jet)
    return {"eps": grid.eps, "n": grid.n, "mean_curvature_defect": float(np.max(np.abs(mc - 1.0))),
            "mean_curvature_mean": float(np.mean(mc)), "area": energies.area, "volume": energies.volume,
            "normal_triple_max": embedcert.normal_triple_bound(grid, jet)}


def _export(run, grid, positions):
    mesh = mesh_utils.build_mesh(grid, positions)
    path = run.path(f"{MESH_BASENAME}.{run.config.mesh_format}")
    mesh_utils.export_mesh(mesh, path, run.config.mesh_format)
    return {"path": path, "vertices": len(mesh.vertices), "faces": len(mesh.faces),
            "euler_characteristic": int(mesh.euler_characteristic()), "closed": mesh.is_closed(),
            "sha256": sha256_file(path)}


def run_surface(config, verbose=True, monitor_performance=False):
    """Build X_{eps,a}, report mean-curvature statistics and export the mesh of a closed torus."""
    run = Run("surface", config, verbose, monitor_performance)
    tbl = run.stage(Status.PROFILE, _profile, run)
    grid = _grid(config, tbl)
    jet = run.stage(Status.SURFACE, geometry.build_jet, grid)
    run.report["diagnostics"]["surface"] = _surface_diagnostics(grid, jet)
    if grid.n is not None:
        run.report["diagnostics"]["mesh"] = run.stage(Status.EXPORT, _export, run, grid, jet.X)
    run.finish()
    return run.report


def run_solve(config, verbose=True, monitor_performance=False):
    """Fixed point at the configured (n or eps, a); writes the iteration trace and the solution."""
    run = Run("solve", config, verbose, monitor_performance)
    tbl = run.stage(Status.PROFILE, _profile, run)
    grid = _grid(config, tbl)
    jet = run.stage(Status.SURFACE, geometry.build_jet, grid)
    operator = run.stage(Status.OPERATOR, assemble_limit, tbl, config.n_theta)
    with TraceWriter(run.path(TRACE_FILENAME)) as trace:
        result = run.stage(Status.REDUCTION, reduction.fixed_point, grid, config.curvature(),
                           config.fixed_point_options(trace), jet, operator)
    cache.save_solution(run.path(SOLUTION_FILENAME), grid, result.phi, result.summary())
    run.report["diagnostics"]["reduction"] = result.summary()
    run.report["diagnostics"]["trace"] = result.trace
    run.finish()
    return run.report


def run_match(config, verbose=True, monitor_performance=False):
    """Find a_n, certify the matched surface and export its mesh."""
    if not config.auto_match:
        raise DomainError("Matching needs auto_match")
    run = Run("match", config, verbose, monitor_performance)
    H = config.curvature()
    match = run.stage(Status.MATCHING, matching.match_neck, config.n, H, config.match_options())
    tbl = _profile(run, match.a_n)
    grid = TorusGrid.for_n(tbl, config.n, config.n_theta)
    jet = geometry.build_jet(grid)
    certificate = run.stage(Status.CERTIFY, embedcert.certify, grid, match.reduction, config.r0, jet)
    run.report["diagnostics"]["match"] = match.summary()
    run.report["diagnostics"]["match"].update({"gamma": H.gamma, "A": H.A,
                                                "grid": [config.n_t, config.n_theta]})
    run.report["diagnostics"]["reduction"] = match.reduction.summary()
    run.report["diagnostics"]["certificate"] = certificate.to_dict()
    cache.save_solution(run.path(SOLUTION_FILENAME), grid, match.reduction.phi, match.reduction.summary())
    surface = geometry.jet_perturbed(jet, match.reduction.phi, check=False)
    run.report["diagnostics"]["mesh"] = run.stage(Status.EXPORT, _export, run, grid, surface.X)
    run.finish()
    return run.report


def _load(solution_path):
    solution = cache.load_solution(solution_path)
    tbl, digest = cache.cached_profile(solution["a"], solution["n_t"], solution["rtol"])
    if solution["n"] is not None:
        grid = TorusGrid.for_n(tbl, solution["n"], solution["n_theta"])
    else:
        grid = TorusGrid(tbl=tbl, n_theta=solution["n_theta"], eps=solution["eps"])
    return solution, grid, digest


def run_certify(config, solution_path, verbose=True, monitor_performance=False):
    """Re-run the embedding certificate on a saved solution."""
    run = Run("certify", config, verbose, monitor_performance)
    solution, grid, digest = run.stage(Status.PROFILE, _load, solution_path)
    run.report["provenance"][f"profile_a={grid.tbl.a}"] = digest
    run.report["provenance"]["solution"] = sha256_file(solution_path)
    certificate = run.stage(Status.CERTIFY, embedcert.certify, grid, solution["phi"], config.r0)
    run.report["diagnostics"]["certificate"] = certificate.to_dict()
    run.finish()
    return run.report


def run_export(config, solution_path, verbose=True, monitor_performance=False):
    """Mesh of Y = X + phi N from a saved solution."""
    run = Run("export", config, verbose, monitor_performance)
    solution, grid, digest = run.stage(Status.PROFILE, _load, solution_path)
    run.report["provenance"][f"profile_a={grid.tbl.a}"] = digest
    run.report["provenance"]["solution"] = sha256_file(solution_path)
    jet = geometry.jet_perturbed(geometry.build_jet(grid), solution["phi"])
    run.report["diagnostics"]["mesh"] = run.stage(Status.EXPORT, _export, run, grid, jet.X)
    run.finish()
    return run.report
