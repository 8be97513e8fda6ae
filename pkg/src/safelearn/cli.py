"""Command-line front end: run the bundled or user-provided experiments,
compute cost bounds, export region polygons, fit models, and audit logs.

Exit codes: 0 success (learned / explored / audit passed), 2 learning
impossible, 64 malformed configuration, 1 anything else.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import (conic, geometry, harness, linear_onestep, linear_twostep,
               nonlinear_onestep)
from .harness import ExperimentConfig

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_IMPOSSIBLE = 2
EXIT_BAD_CONFIG = 64


class ConfigError(Exception):
    pass


def resolve_config(spec: str) -> ExperimentConfig:
    """Load a config from a path, or from the bundled examples by name."""
    path = Path(spec)
    if not path.exists():
        bundled = resources.files("safelearn") / "configs" / f"{spec}.yaml"
        if bundled.is_file():
            return _parse_config(bundled.read_text(), source=f"bundled:{spec}")
        raise ConfigError(f"config {spec!r} is neither a file nor a bundled example")
    return _parse_config(path.read_text(), source=str(path))


def _parse_config(text: str, source: str) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f" at line {mark.line + 1}" if mark else ""
        raise ConfigError(f"{source}: YAML error{line}: {exc}") from exc
    try:
        return ExperimentConfig.from_dict(data)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def _settings(args) -> conic.SolveSettings | None:
    if args.feas_tol is None and args.gap_tol is None:
        return None
    return conic.SolveSettings(feas_tol=args.feas_tol, gap_tol=args.gap_tol)


def _apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "epsilon", None) is not None:
        config.epsilon = args.epsilon
    if getattr(args, "seed", None) is not None:
        config.seeds = {**config.seeds, "exploration": args.seed}
    if getattr(args, "directions", None) is not None:
        config.snapshot = {**config.snapshot, "directions": args.directions}
    if getattr(args, "steps", None) is not None:
        config.steps = args.steps
    return config


def _expect_mode(config: ExperimentConfig, mode: str) -> None:
    if config.mode != mode:
        raise ConfigError(
            f"config {config.name!r} has mode {config.mode!r}; this subcommand needs {mode!r}")


def _print_bounds_rows(config: ExperimentConfig, online_cost: float | None,
                       settings) -> None:
    S = config.safety_polyhedron()
    A_star = np.asarray(config.true_system["A"], dtype=float)
    c = config.cost_vector()
    if config.mode == "linear1":
        offline = linear_onestep.offline_cost_bound(S, config.matrix_prior(), c,
                                                    settings)
        lower = linear_onestep.cost_lower_bound(S, A_star, c, config.n)
    else:
        offline = linear_twostep.two_step_offline_bound(S, config.ellipsoid_prior(),
                                                        c, settings)
        lower = linear_twostep.two_step_lower_bound(S, A_star, c, 2)
    print(f"offline upper bound : {offline: .4f}")
    if online_cost is not None:
        print(f"realized online cost: {online_cost: .4f}")
    print(f"lower bound         : {lower: .4f}")


def cmd_learn(args, mode: str) -> int:
    config = _apply_overrides(resolve_config(args.config), args)
    _expect_mode(config, mode)
    settings = _settings(args)
    log = harness.run(config, snapshots=not args.no_snapshots, settings=settings)
    outdir = Path(args.out) if args.out else Path(f"runlog-{config.name}")
    harness.write_runlog(log, outdir)
    result = log.outcome.get("result")
    if mode == "nonlinear1":
        print(f"result: explored {len(log.steps)} safe points")
        print(f"total cost: {log.total_cost: .4f}")
    else:
        print(f"result: {result} ({len(log.steps)} measurements)")
        if result == "learned":
            print(f"online cost: {log.total_cost: .4f}")
            try:
                _print_bounds_rows(config, log.total_cost, settings)
            except linear_onestep.InfeasibleRegionError:
                print("bounds unavailable: true safe region is empty")
    print(f"log: {outdir}")
    if result == "impossible":
        return EXIT_IMPOSSIBLE
    return EXIT_OK


def cmd_bounds(args) -> int:
    config = resolve_config(args.config)
    if config.mode not in ("linear1", "linear2"):
        raise ConfigError("bounds are defined for linear1 and linear2 configs")
    online = None
    if args.log:
        log = harness.read_runlog(Path(args.log))
        if log.outcome.get("result") == "learned":
            online = log.total_cost
    _print_bounds_rows(config, online, _settings(args))
    return EXIT_OK


def cmd_region(args) -> int:
    config = _apply_overrides(resolve_config(args.config), args)
    if args.gamma is not None:
        if config.uncertainty.get("kind") != "nonlinear":
            raise ConfigError("--gamma applies to nonlinear configs only")
        config.uncertainty = {**config.uncertainty, "gamma": args.gamma}
    dims = tuple(int(v) for v in args.dims.split(","))
    if len(dims) != 2:
        raise ConfigError("--dims must name two coordinates, e.g. 0,1")
    K = args.directions or config.snapshot_directions()
    S = config.safety_polyhedron()
    step = args.step

    if step > 0:
        if not args.log:
            raise ConfigError("--log is required for steps beyond 0")
        log = harness.read_runlog(Path(args.log))
        if len(log.steps) < step:
            raise ConfigError(f"log has only {len(log.steps)} steps")
        prefix = log.steps[:step]
    else:
        prefix = []

    if config.mode == "linear1":
        data = linear_onestep.MeasurementSet(
            (rec.query, rec.observations[0]) for rec in prefix)
        region = linear_onestep.onestep_lifted(S, config.matrix_prior(), data)
        polygon = geometry.project2d(region, dims, K)
    elif config.mode == "nonlinear1":
        data = linear_onestep.MeasurementSet(
            ((rec.query, rec.observations[0]) for rec in prefix),
            enforce_independence=False)
        polygon = nonlinear_onestep.region_polygon(
            S, config.nonlinear_prior(), data, dims, K, _settings(args))
    else:
        polygon = _twostep_region(config, S, prefix, dims, K, _settings(args))

    if args.out and args.out != "-":
        geometry.polygon_to_csv(polygon, args.out)
        print(f"region polygon written to {args.out}")
    else:
        geometry.polygon_to_csv(polygon, sys.stdout)
    return EXIT_OK


def _twostep_region(config, S, prefix, dims, K, settings) -> geometry.Polygon2D:
    import cvxpy as cp

    data = linear_twostep.TwoStepData(
        [(rec.query, rec.observations[0], rec.observations[1]) for rec in prefix])
    prog = linear_twostep.build_twostep_sdp(S, config.ellipsoid_prior(), data,
                                            np.zeros(config.n))
    x = prog.variables["x"]
    direction = cp.Parameter(config.n, name="direction")
    prog.minimize(direction @ x)
    angles = 2.0 * np.pi * np.arange(K) / K
    dirs2 = np.column_stack([np.cos(angles), np.sin(angles)])
    supports = np.empty(K)
    i, j = dims
    for k, d2 in enumerate(dirs2):
        d = np.zeros(config.n)
        d[i], d[j] = d2
        direction.value = -d
        sol = conic.solve(prog, settings)
        if sol.status != conic.SolveStatus.OPTIMAL:
            raise conic.ConicError(f"two-step support solve: {sol.status.name}")
        supports[k] = -sol.objective_value
    return geometry.polygon_from_supports(dirs2, supports)


def cmd_fit(args) -> int:
    config = resolve_config(args.config)
    _expect_mode(config, "nonlinear1")
    U = config.nonlinear_prior()
    S = config.safety_polyhedron()
    sys_ = config.system()
    log = harness.read_runlog(Path(args.data))
    if len(log.steps) < args.train_count:
        raise ConfigError(f"log has {len(log.steps)} steps; "
                          f"--train-count {args.train_count} requested")
    data = linear_onestep.MeasurementSet(
        ((rec.query, rec.observations[0]) for rec in log.steps[:args.train_count]),
        enforce_independence=False)

    model_ls = nonlinear_onestep.fit_least_squares(data)
    model_sos, cert = nonlinear_onestep.fit_sos_constrained(data, S, U,
                                                            _settings(args))
    nonlinear_onestep.validate_sos_certificate(model_sos, cert, S, U.gamma)

    outdir = Path(args.out) if args.out else Path(f"fit-{config.name}")
    outdir.mkdir(parents=True, exist_ok=True)
    nonlinear_onestep.write_model(model_ls, outdir / "model_ls.txt")
    nonlinear_onestep.write_model(model_sos, outdir / "model_sos.txt")

    rng = np.random.default_rng(int(config.seeds.get("test_points", 0)))
    test = harness.sample_in_polyhedron(S, args.test_count, rng)
    oracle = lambda z: harness.observe(sys_, z, 1)
    rmse_ls = nonlinear_onestep.rmse(model_ls, oracle, test)
    rmse_sos = nonlinear_onestep.rmse(model_sos, oracle, test)
    print(f"RMSE unconstrained   : {rmse_ls:.4f}")
    print(f"RMSE SOS-constrained : {rmse_sos:.4f}")
    print(f"models: {outdir}")
    return EXIT_OK


def cmd_audit(args) -> int:
    config = resolve_config(args.config)
    S = config.safety_polyhedron()
    log = harness.read_runlog(Path(args.log))
    report = harness.audit(log, S, tol=args.tol)
    print(f"states checked: {report.states_checked}")
    print(f"worst margin  : {report.worst_margin:.3e}")
    if report.passed:
        print("audit: PASS")
        return EXIT_OK
    print(f"audit: FAIL ({len(report.violations)} violations)")
    return EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="safelearn",
        description="Safe learning of dynamical systems via conic optimization.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, steps=False):
        p.add_argument("--config", required=True,
                       help="path to a YAML config, or a bundled name "
                            "(example-3-4, example-4-2, example-5-2, example-impossible)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--epsilon", type=float, help="override blending epsilon")
        p.add_argument("--seed", type=int, help="override exploration seed")
        p.add_argument("--directions", type=int, help="snapshot directions")
        p.add_argument("--feas-tol", type=float, dest="feas_tol")
        p.add_argument("--gap-tol", type=float, dest="gap_tol")
        p.add_argument("--no-snapshots", action="store_true",
                       help="skip region/uncertainty polygons")
        if steps:
            p.add_argument("--steps", type=int, help="exploration steps")

    common(sub.add_parser("learn1", help="one-step safe learning (linear)"))
    common(sub.add_parser("learn2", help="two-step safe learning (linear)"))
    common(sub.add_parser("learnN", help="safe exploration (nonlinear)"), steps=True)

    p = sub.add_parser("bounds", help="offline upper bound and A*-informed lower bound")
    p.add_argument("--config", required=True)
    p.add_argument("--log", help="run log directory for the realized online cost")
    p.add_argument("--feas-tol", type=float, dest="feas_tol")
    p.add_argument("--gap-tol", type=float, dest="gap_tol")

    p = sub.add_parser("region", help="export a safe-region projection polygon")
    p.add_argument("--config", required=True)
    p.add_argument("--step", type=int, default=0)
    p.add_argument("--dims", default="0,1")
    p.add_argument("--directions", type=int)
    p.add_argument("--gamma", type=float, help="override the nonlinearity bound")
    p.add_argument("--log", help="run log directory (required for step > 0)")
    p.add_argument("--out", help="CSV path ('-' for stdout)")
    p.add_argument("--feas-tol", type=float, dest="feas_tol")
    p.add_argument("--gap-tol", type=float, dest="gap_tol")

    p = sub.add_parser("fit", help="fit unconstrained and SOS-constrained models")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True, help="run log directory with measurements")
    p.add_argument("--out", help="output directory for model files")
    p.add_argument("--train-count", type=int, default=8)
    p.add_argument("--test-count", type=int, default=1000)
    p.add_argument("--feas-tol", type=float, dest="feas_tol")
    p.add_argument("--gap-tol", type=float, dest="gap_tol")

    p = sub.add_parser("audit", help="recheck every logged state against S")
    p.add_argument("--config", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--tol", type=float, default=1e-6)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "learn1":
            return cmd_learn(args, "linear1")
        if args.command == "learn2":
            return cmd_learn(args, "linear2")
        if args.command == "learnN":
            return cmd_learn(args, "nonlinear1")
        if args.command == "bounds":
            return cmd_bounds(args)
        if args.command == "region":
            return cmd_region(args)
        if args.command == "fit":
            return cmd_fit(args)
        if args.command == "audit":
            return cmd_audit(args)
        parser.error(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
