"""Config-driven experiment harness: run, compare, verify.

Configs are YAML with the blocks problem / graph / algorithm (or a list
under ``algorithms`` for compare) / run, plus an optional ``init`` block for
the starting iterate.  Every resolved value, including "auto" stepsizes and
round counts, is echoed into a per-run manifest so outputs are exactly
replayable.  Trace CSVs use a fixed schema with 17-significant-digit floats
and LF line endings, so identical configs produce byte-identical files.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import verify as verify_mod
from .algorithms import ALGORITHMS, DivergenceError, Trace, run
from .graph import (WEIGHT_BUILDERS, MixingMatrix, Topology, accelerated_matrix,
                    acceleration_momentum, build_topology, recommended_T)
from .metrics import fit_linear_rate, max_stepsize, theoretical_contraction
from .problem import BilinearQuadratic, make_bilinear_quadratic

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4
EXIT_PRECONDITION = 5
EXIT_CHECK_FAILED = 6

CSV_HEADER = "iter,comm_rounds,residual,consensus_error,tracking_error,xi_norm_sq,lyapunov"

INIT_KINDS = ("normal", "zeros")


class ConfigError(ValueError):
    """Configuration file failed to parse or validate."""


# ---------------------------------------------------------------------------
# config model


@dataclass(frozen=True)
class ProblemConfig:
    type: str
    n: int
    p: int
    d: int
    mu: float
    seed: int
    zero_sum_centers: bool


@dataclass(frozen=True)
class GraphConfig:
    topology: str
    n: int
    weight_scheme: str
    edge_probability: float | None
    seed: int | None


@dataclass(frozen=True)
class AlgorithmConfig:
    name: str
    gamma: float | str          # positive float or "auto"
    T: int | str | None         # positive int or "auto"; adogt only


@dataclass(frozen=True)
class InitConfig:
    kind: str
    seed: int | None            # defaults to problem.seed + 1 at resolution
    scale: float


@dataclass(frozen=True)
class RunConfig:
    max_iters: int
    tol: float
    record_every: int
    record_states: bool | None  # None = unset; verify resolves it to True
    out_dir: str


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemConfig
    graph: GraphConfig
    algorithms: tuple[AlgorithmConfig, ...]
    run: RunConfig
    init: InitConfig


def _require_mapping(raw, name):
    if not isinstance(raw, dict):
        raise ConfigError(f"{name} block must be a mapping, got {type(raw).__name__}")
    return raw


def _known_keys(raw: dict, allowed, block: str):
    unknown = set(raw) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {block} block")


def _as_int(value, key, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{key} must be >= {minimum}, got {value}")
    return value


def _as_float(value, key):
    if isinstance(value, bool):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            pass
    raise ConfigError(f"{key} must be a number, got {value!r}")


def _as_bool(value, key):
    if not isinstance(value, bool):
        raise ConfigError(f"{key} must be a boolean, got {value!r}")
    return value


def _parse_problem(raw) -> ProblemConfig:
    raw = _require_mapping(raw, "problem")
    _known_keys(raw, ("type", "n", "p", "d", "mu", "seed", "zero_sum_centers"), "problem")
    for key in ("type", "n", "p", "d", "mu", "seed"):
        if key not in raw:
            raise ConfigError(f"problem block is missing {key!r}")
    if raw["type"] != "bilinear_quadratic":
        raise ConfigError(f"unknown problem type {raw['type']!r}")
    mu = _as_float(raw["mu"], "problem.mu")
    if mu <= 0.0:
        raise ConfigError(f"problem.mu must be positive, got {mu}")
    return ProblemConfig(type=raw["type"],
                         n=_as_int(raw["n"], "problem.n", minimum=1),
                         p=_as_int(raw["p"], "problem.p", minimum=1),
                         d=_as_int(raw["d"], "problem.d", minimum=1),
                         mu=mu,
                         seed=_as_int(raw["seed"], "problem.seed", minimum=0),
                         zero_sum_centers=_as_bool(raw.get("zero_sum_centers", True),
                                                   "problem.zero_sum_centers"))


def _parse_graph(raw) -> GraphConfig:
    raw = _require_mapping(raw, "graph")
    _known_keys(raw, ("topology", "n", "weight_scheme", "edge_probability", "seed"), "graph")
    for key in ("topology", "n"):
        if key not in raw:
            raise ConfigError(f"graph block is missing {key!r}")
    scheme = raw.get("weight_scheme", "metropolis")
    if scheme not in WEIGHT_BUILDERS:
        raise ConfigError(f"unknown weight_scheme {scheme!r}, "
                          f"expected one of {sorted(WEIGHT_BUILDERS)}")
    edge_p = raw.get("edge_probability")
    if edge_p is not None:
        edge_p = _as_float(edge_p, "graph.edge_probability")
    seed = raw.get("seed")
    if seed is not None:
        seed = _as_int(seed, "graph.seed", minimum=0)
    return GraphConfig(topology=raw["topology"],
                       n=_as_int(raw["n"], "graph.n", minimum=1),
                       weight_scheme=scheme, edge_probability=edge_p, seed=seed)


def _parse_algorithm(raw, block="algorithm") -> AlgorithmConfig:
    raw = _require_mapping(raw, block)
    _known_keys(raw, ("name", "gamma", "T"), block)
    name = raw.get("name")
    if name not in ALGORITHMS:
        raise ConfigError(f"{block}.name must be one of {ALGORITHMS}, got {name!r}")
    gamma = raw.get("gamma")
    if gamma != "auto":
        gamma = _as_float(gamma, f"{block}.gamma")
        if gamma <= 0.0:
            raise ConfigError(f"{block}.gamma must be positive or 'auto', got {gamma}")
    T = raw.get("T")
    if name == "adogt":
        if T is None:
            raise ConfigError("adogt requires T (a positive integer or 'auto')")
        if T != "auto":
            T = _as_int(T, f"{block}.T", minimum=1)
    elif T is not None:
        raise ConfigError(f"{block}.T only applies to adogt")
    return AlgorithmConfig(name=name, gamma=gamma, T=T)


def _parse_init(raw) -> InitConfig:
    if raw is None:
        return InitConfig(kind="normal", seed=None, scale=1.0)
    raw = _require_mapping(raw, "init")
    _known_keys(raw, ("kind", "seed", "scale"), "init")
    kind = raw.get("kind", "normal")
    if kind not in INIT_KINDS:
        raise ConfigError(f"init.kind must be one of {INIT_KINDS}, got {kind!r}")
    seed = raw.get("seed")
    if seed is not None:
        seed = _as_int(seed, "init.seed", minimum=0)
    scale = _as_float(raw.get("scale", 1.0), "init.scale")
    if scale <= 0.0:
        raise ConfigError(f"init.scale must be positive, got {scale}")
    return InitConfig(kind=kind, seed=seed, scale=scale)


def _parse_run(raw) -> RunConfig:
    if raw is None:
        raw = {}
    raw = _require_mapping(raw, "run")
    _known_keys(raw, ("max_iters", "tol", "record_every", "record_states", "out_dir"), "run")
    tol = _as_float(raw.get("tol", 1e-10), "run.tol")
    if tol < 0.0 or np.isnan(tol):
        raise ConfigError(f"run.tol must be nonnegative, got {tol}")
    record_states = raw.get("record_states")
    if record_states is not None:
        record_states = _as_bool(record_states, "run.record_states")
    return RunConfig(max_iters=_as_int(raw.get("max_iters", 10_000), "run.max_iters", minimum=1),
                     tol=tol,
                     record_every=_as_int(raw.get("record_every", 1),
                                          "run.record_every", minimum=1),
                     record_states=record_states,
                     out_dir=str(raw.get("out_dir", "out")))


def load_config(path) -> ExperimentConfig:
    """Parse and validate a YAML experiment config."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    raw = _require_mapping(raw, "config")
    _known_keys(raw, ("problem", "graph", "algorithm", "algorithms", "run", "init"), "config")
    for key in ("problem", "graph"):
        if key not in raw:
            raise ConfigError(f"config is missing the {key!r} block")
    if "algorithm" in raw and "algorithms" in raw:
        raise ConfigError("config must use either 'algorithm' or 'algorithms', not both")
    if "algorithm" in raw:
        algorithms = (_parse_algorithm(raw["algorithm"]),)
    elif "algorithms" in raw:
        entries = raw["algorithms"]
        if not isinstance(entries, list) or not entries:
            raise ConfigError("'algorithms' must be a non-empty list")
        algorithms = tuple(_parse_algorithm(entry, f"algorithms[{i}]")
                           for i, entry in enumerate(entries))
    else:
        raise ConfigError("config needs an 'algorithm' or 'algorithms' block")

    config = ExperimentConfig(problem=_parse_problem(raw["problem"]),
                              graph=_parse_graph(raw["graph"]),
                              algorithms=algorithms,
                              run=_parse_run(raw.get("run")),
                              init=_parse_init(raw.get("init")))
    if config.problem.n != config.graph.n:
        raise ConfigError(f"problem.n ({config.problem.n}) must equal "
                          f"graph.n ({config.graph.n})")
    return config


# ---------------------------------------------------------------------------
# resolution


@dataclass(frozen=True)
class ResolvedAlgorithm:
    label: str                  # unique output name (duplicates get a suffix)
    name: str
    gamma: float
    gamma_source: str           # "config" or "auto"
    T: int | None
    T_source: str | None
    eta: float | None
    rho_effective: float


@dataclass(frozen=True)
class ResolvedExperiment:
    config: ExperimentConfig
    problem: BilinearQuadratic
    topology: Topology
    W: MixingMatrix
    L: float
    kappa: float
    z0: np.ndarray
    init_seed: int | None
    algorithms: tuple[ResolvedAlgorithm, ...]
    record_states: bool


def _make_z0(init: InitConfig, problem, default_seed: int):
    dims = (problem.n, problem.p + problem.d)
    if init.kind == "zeros":
        return np.zeros(dims), None
    seed = init.seed if init.seed is not None else default_seed
    rng = np.random.default_rng(seed)
    return init.scale * rng.standard_normal(dims), seed


def resolve_experiment(config: ExperimentConfig,
                       record_states: bool | None = None) -> ResolvedExperiment:
    """Build problem/graph objects and resolve every "auto" placeholder."""
    pc = config.problem
    problem = make_bilinear_quadratic(pc.n, pc.p, pc.d, pc.mu, pc.seed,
                                      zero_sum_centers=pc.zero_sum_centers)
    gc = config.graph
    try:
        topology = build_topology(gc.topology, gc.n, seed=gc.seed,
                                  edge_probability=gc.edge_probability)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    W = WEIGHT_BUILDERS[gc.weight_scheme](topology)
    L = problem.smoothness_constant()

    resolved = []
    labels = {}
    for algo in config.algorithms:
        T = T_source = eta = None
        rho_eff = W.rho
        if algo.name == "adogt":
            T_source = "auto" if algo.T == "auto" else "config"
            T = recommended_T(W.rho) if algo.T == "auto" else algo.T
            eta = acceleration_momentum(W.rho)
            rho_eff = accelerated_matrix(W, T).rho
        gamma_source = "auto" if algo.gamma == "auto" else "config"
        if algo.gamma == "auto":
            if rho_eff >= 1.0:
                raise ConfigError(
                    f"gamma: auto needs a contracting mixing matrix, but "
                    f"{algo.name} with T={T} has rho {rho_eff:.4g} >= 1 on this "
                    f"graph; increase T or set T: auto")
            gamma = max_stepsize(L, rho_eff)
        else:
            gamma = algo.gamma
        count = labels.get(algo.name, 0) + 1
        labels[algo.name] = count
        label = algo.name if count == 1 else f"{algo.name}-{count}"
        resolved.append(ResolvedAlgorithm(label=label, name=algo.name, gamma=gamma,
                                          gamma_source=gamma_source, T=T,
                                          T_source=T_source, eta=eta,
                                          rho_effective=rho_eff))

    if record_states is None:
        record_states = bool(config.run.record_states)
    z0, init_seed = _make_z0(config.init, problem, default_seed=pc.seed + 1)
    return ResolvedExperiment(config=config, problem=problem, topology=topology,
                              W=W, L=L, kappa=L / pc.mu, z0=z0, init_seed=init_seed,
                              algorithms=tuple(resolved),
                              record_states=record_states)


# ---------------------------------------------------------------------------
# output files


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_trace_csv(path: Path, trace: Trace) -> None:
    lines = [CSV_HEADER]
    for rec in trace.records:
        lines.append(",".join([
            str(rec.iteration), str(rec.comm_rounds), _fmt(rec.residual),
            _fmt(rec.consensus_error), _fmt(rec.tracking_error),
            _fmt(rec.xi_norm_sq), _fmt(rec.lyapunov)]))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _manifest_lines(exp: ResolvedExperiment, algo: ResolvedAlgorithm,
                    trace: Trace) -> list[str]:
    pc, gc, rc, ic = (exp.config.problem, exp.config.graph, exp.config.run,
                      exp.config.init)
    final = trace.records[-1]
    try:
        contraction = theoretical_contraction(algo.gamma, pc.mu, algo.rho_effective)
        stepsize_bound = max_stepsize(exp.L, algo.rho_effective)
    except ValueError:
        # Off-design accelerated matrix (rho >= 1): no guarantees attach.
        contraction = stepsize_bound = None
    items = [
        ("problem.type", pc.type), ("problem.n", pc.n), ("problem.p", pc.p),
        ("problem.d", pc.d), ("problem.mu", pc.mu), ("problem.seed", pc.seed),
        ("problem.zero_sum_centers", pc.zero_sum_centers),
        ("graph.topology", gc.topology), ("graph.n", gc.n),
        ("graph.weight_scheme", gc.weight_scheme),
        ("graph.edge_probability", gc.edge_probability),
        ("graph.seed", gc.seed), ("graph.rho_w", exp.W.rho),
        ("init.kind", ic.kind), ("init.seed", exp.init_seed),
        ("init.scale", ic.scale),
        ("algorithm.name", algo.name),
        ("algorithm.gamma", algo.gamma),
        ("algorithm.gamma_source", algo.gamma_source),
        ("algorithm.T", algo.T), ("algorithm.T_source", algo.T_source),
        ("algorithm.eta", algo.eta),
        ("algorithm.rho_effective", algo.rho_effective),
        ("derived.smoothness_L", exp.L), ("derived.kappa", exp.kappa),
        ("derived.max_stepsize", stepsize_bound),
        ("derived.theoretical_contraction", contraction),
        ("run.max_iters", rc.max_iters), ("run.tol", rc.tol),
        ("run.record_every", rc.record_every),
        ("run.record_states", exp.record_states),
        ("result.reason", trace.reason),
        ("result.iterations", trace.iterations),
        ("result.comm_rounds", trace.comm_rounds),
        ("result.final_residual", final.residual),
        ("result.final_consensus_error", final.consensus_error),
    ]
    if trace.z_star is None:
        items.append(("note.lyapunov", "saddle point unknown; residual, xi_norm_sq "
                                       "and lyapunov columns are empty"))
    elif algo.rho_effective >= 1.0:
        items.append(("note.lyapunov", "rho_effective >= 1 (T too small for this "
                                       "graph); lyapunov column is empty"))
    return [f"{key} = {_fmt(value) or 'none'}" for key, value in items]


def write_manifest(path: Path, exp: ResolvedExperiment, algo: ResolvedAlgorithm,
                   trace: Trace) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(_manifest_lines(exp, algo, trace)) + "\n")


def _run_algorithm(exp: ResolvedExperiment, algo: ResolvedAlgorithm) -> Trace:
    rc = exp.config.run
    return run(algo.name, exp.problem, exp.W, algo.gamma, exp.z0,
               max_iters=rc.max_iters, tol=rc.tol, record_every=rc.record_every,
               T=algo.T, record_states=exp.record_states)


def _summary_line(label: str, trace: Trace) -> str:
    final = trace.records[-1]
    res = "n/a" if final.residual is None else f"{final.residual:.6g}"
    return (f"{label}: {trace.reason} after {trace.iterations} iterations "
            f"(comm_rounds={trace.comm_rounds}, final_residual={res})")


# ---------------------------------------------------------------------------
# commands


def run_command(config_path, out_dir=None) -> int:
    """Execute a single-algorithm config; writes trace CSV and manifest."""
    config = load_config(config_path)
    if len(config.algorithms) != 1:
        raise ConfigError("'run' needs exactly one algorithm; use 'compare' for several")
    exp = resolve_experiment(config)
    out = Path(out_dir) if out_dir is not None else Path(config.run.out_dir)
    algo = exp.algorithms[0]
    trace = _run_algorithm(exp, algo)
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(out / f"{algo.label}.csv", trace)
    write_manifest(out / f"{algo.label}.manifest.txt", exp, algo, trace)
    print(_summary_line(algo.label, trace))
    return EXIT_OK


def _fitted_rate_cell(trace: Trace) -> str:
    series = [(rec.iteration, rec.residual) for rec in trace.records
              if rec.residual is not None]
    try:
        report = fit_linear_rate(series)
    except ValueError:
        return "n/a"
    return f"{report.fitted_rate:.6g}"


def compare_command(config_path, out_dir=None) -> int:
    """Run every algorithm in the config on the shared problem and graph."""
    config = load_config(config_path)
    exp = resolve_experiment(config)
    out = Path(out_dir) if out_dir is not None else Path(config.run.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rows = [("algorithm", "final_residual", "final_consensus_error",
             "iters_to_tol", "comm_rounds", "fitted_rate")]
    for algo in exp.algorithms:
        try:
            trace = _run_algorithm(exp, algo)
        except DivergenceError as exc:
            rows.append((algo.label, "diverged", "diverged",
                         f"diverged@{exc.iteration}", "n/a", "n/a"))
            print(f"{algo.label}: diverged at iteration {exc.iteration}")
            continue
        write_trace_csv(out / f"{algo.label}.csv", trace)
        write_manifest(out / f"{algo.label}.manifest.txt", exp, algo, trace)
        final = trace.records[-1]
        iters = (str(trace.iterations) if trace.reason == "tol_reached"
                 else "not_reached")
        rows.append((algo.label, _fmt(final.residual),
                     _fmt(final.consensus_error), iters,
                     str(trace.comm_rounds), _fitted_rate_cell(trace)))
        print(_summary_line(algo.label, trace))

    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    table = "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
                      for row in rows)
    with open(out / "comparison.txt", "w", newline="\n") as fh:
        fh.write(table + "\n")
    print(table)
    return EXIT_OK


def verify_command(config_path, out_dir=None) -> int:
    """Run dogt with full state recording and evaluate all theory checks."""
    config = load_config(config_path)
    if len(config.algorithms) != 1 or config.algorithms[0].name != "dogt":
        raise ConfigError("'verify' runs the dogt algorithm; set algorithm.name: dogt")
    if config.run.record_states is False:
        raise ConfigError("'verify' needs record_states: true (or leave it unset)")
    exp = resolve_experiment(config, record_states=True)
    if not exp.problem.smoothness_certified:
        raise ConfigError("verification requires a certified smoothness constant; "
                          "this problem only has a sampled estimate")
    if config.run.record_states is None:
        print("record_states: resolved to true (required for verification)")

    out = Path(out_dir) if out_dir is not None else Path(config.run.out_dir)
    algo = exp.algorithms[0]
    trace = _run_algorithm(exp, algo)
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(out / f"{algo.label}.csv", trace)
    write_manifest(out / f"{algo.label}.manifest.txt", exp, algo, trace)
    print(_summary_line(algo.label, trace))

    reports = verify_mod.run_all_checks(trace)
    summary = verify_mod.summary_text(reports)
    with open(out / "checks.txt", "w", newline="\n") as fh:
        fh.write(summary)
    with open(out / "check_margins.csv", "w", newline="\n") as fh:
        fh.write("\n".join(verify_mod.margins_csv_rows(reports)) + "\n")
    print(summary, end="")

    if any(rep.status == "failed" for rep in reports):
        return EXIT_CHECK_FAILED
    if any(rep.status == "precondition_violated" for rep in reports):
        return EXIT_PRECONDITION
    return EXIT_OK


COMMANDS = {"run": run_command, "compare": compare_command, "verify": verify_command}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="netsaddle",
        description="Decentralized saddle-point optimization benchmark harness.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (("run", "run one algorithm and emit its trace"),
                      ("compare", "run several algorithms on a shared setup"),
                      ("verify", "check the convergence theory along a dogt run")):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", required=True, help="path to the YAML config")
        p.add_argument("--out", default=None, help="override run.out_dir")
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args.config, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
