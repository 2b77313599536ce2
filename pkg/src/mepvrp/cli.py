"""Command-line front end: ``mepvrp solve | bench | evolve``.

Exit codes: 0 success, 1 usage error, 2 input error (unreadable file, bad
instance, bad config), 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .evolved import REGISTRY, RegistryError, build_operator, hybrid_select_parents
from .formats import read_instance
from .generate import VARIANTS, generate_instance
from .hgs import SolveError, SolveParams, solve
from .instance import InstanceError, ProblemData
from .local_search import EducateParams
from .metrics import BenchReport, BenchRow
from .rng import derive_seed

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(EXIT_USAGE, f"{self.prog}: {message}")


# -- config ---------------------------------------------------------------------

SOLVE_KEYS = {
    "population_min", "population_max", "elite_fraction", "max_iterations", "max_seconds",
    "no_improvement", "restart_after", "restart_fraction", "penalty_window", "target_feasible",
    "initial_penalties", "k_neighbors", "max_rounds", "seed", "operator", "operator_params",
}
BENCH_KEYS = SOLVE_KEYS | {"seeds", "operators", "jobs", "variants", "n", "count", "instances"}
EVOLVE_KEYS = {
    "generations", "offspring_per_gen", "survivors", "seeds", "mode", "generator", "instances",
    "eval", "knowledge", "record", "jobs",
}
GENERATOR_KEYS = {
    "lattice": {"type", "operator", "lattice"},
    "scripted": {"type", "replies", "exhaust"},
    "http": {"type", "endpoint", "model", "temperature", "retries", "key_env", "adapter", "timeout"},
}
INSTANCE_KEYS = {"variant", "n", "count", "seed", "paths"}
EVAL_KEYS = {"max_iterations", "population_min", "population_max", "seed", "timeout", "exchange_timeout"}


def load_config(path: str | None, allowed: set[str], where: str = "") -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(EXIT_INPUT, f"cannot read config {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise CliError(EXIT_INPUT, f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise CliError(EXIT_INPUT, f"config {path} must be a JSON object")
    check_keys(doc, allowed, where)
    return doc


def check_keys(doc: dict, allowed: set[str], where: str = "") -> None:
    for key in doc:
        if key not in allowed:
            raise CliError(EXIT_INPUT, f"unknown config key {where + key!r}")


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"0,1,5"`` or ``"0-4"`` (inclusive) or a mix of both."""
    seeds: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part:
                lo, hi = part.split("-", 1)
                seeds.extend(range(int(lo), int(hi) + 1))
            elif part:
                seeds.append(int(part))
    except ValueError:
        raise CliError(EXIT_USAGE, f"bad seed list {text!r}") from None
    if not seeds:
        raise CliError(EXIT_USAGE, "empty seed list")
    return tuple(seeds)


# -- operators ------------------------------------------------------------------

OPERATOR_CHOICES = ("baseline", "hybrid", "pyvrp-plus", "registry:<name>")


def operator_bindings(spec: str, params: dict | None = None) -> dict:
    """SolveParams overrides for an operator name.

    ``pyvrp-plus`` binds every plug-point that has an evolved implementation;
    only parent selection has one, the other plug-points keep their
    baselines.
    """
    if spec == "baseline":
        return {}
    if spec in ("hybrid", "pyvrp-plus"):
        return {"select_parents": hybrid_select_parents}
    if spec.startswith("registry:"):
        name = spec.split(":", 1)[1]
        try:
            return {"select_parents": build_operator(name, params or {})}
        except RegistryError as exc:
            raise CliError(EXIT_INPUT, str(exc)) from None
    raise CliError(EXIT_USAGE, f"unknown operator {spec!r}; choose from {', '.join(OPERATOR_CHOICES)}")


def solve_params(cfg: dict, args: argparse.Namespace) -> tuple[SolveParams, str]:
    """Merge config-file values with command-line flags (flags win)."""
    merged = dict(cfg)
    for key in ("max_iterations", "max_seconds", "population_min", "population_max", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    operator = getattr(args, "operator", None) or merged.pop("operator", "baseline")
    merged.pop("operator", None)
    op_params = merged.pop("operator_params", None)
    educate = EducateParams(
        k_neighbors=merged.pop("k_neighbors", EducateParams.k_neighbors),
        max_rounds=merged.pop("max_rounds", EducateParams.max_rounds),
    )
    for key in BENCH_KEYS - SOLVE_KEYS:
        merged.pop(key, None)
    if "initial_penalties" in merged and merged["initial_penalties"] is not None:
        merged["initial_penalties"] = tuple(merged["initial_penalties"])
    if merged.get("max_iterations") is None and merged.get("max_seconds") is None and merged.get("no_improvement") is None:
        merged["max_iterations"] = 1000
    try:
        params = SolveParams(educate=educate, **merged, **operator_bindings(operator, op_params))
    except (TypeError, ValueError) as exc:
        raise CliError(EXIT_INPUT, f"bad solver settings: {exc}") from None
    return params, operator


# -- instances --------------------------------------------------------------------


def infer_variant(data: ProblemData) -> str:
    if data.has_clusters:
        return "GVRP"
    if data.has_prizes or not all(data.required[c] for c in data.client_ids):
        return "PCVRPTW"
    if data.num_depots > 1:
        return "MDVRPTW"
    if data.backhaul_mode == "strict":
        return "VRPB"
    if data.backhaul_mode == "mixed":
        return "VRPMB"
    if data.open_routes:
        return "OVRP"
    if data.is_timed:
        return "VRPTW"
    if data.num_vehicles == 1 and all(vt.capacity == 0 for vt in data.vehicle_types):
        return "TSP"
    return "CVRP"


def load_instance(path: str) -> ProblemData:
    if not Path(path).is_file():
        raise CliError(EXIT_INPUT, f"cannot read instance file {path}: no such file")
    try:
        return read_instance(path)
    except InstanceError as exc:
        raise CliError(EXIT_INPUT, f"{path}: {exc}") from None
    except (OSError, UnicodeDecodeError) as exc:
        raise CliError(EXIT_INPUT, f"cannot read instance file {path}: {exc}") from None


def instance_dir(path: str) -> list[ProblemData]:
    folder = Path(path)
    if not folder.is_dir():
        raise CliError(EXIT_INPUT, f"instance directory {path} does not exist")
    files = sorted(p for p in folder.iterdir() if p.suffix.lower() in (".vrp", ".txt", ".json"))
    return [load_instance(str(p)) for p in files]


def _parse_variants(text: str) -> list[str]:
    variants = [v.strip().upper() for v in text.split(",") if v.strip()]
    for v in variants:
        if v not in VARIANTS:
            raise CliError(EXIT_USAGE, f"unknown variant {v!r}; choose from {', '.join(VARIANTS)}")
    return variants


# -- solve ----------------------------------------------------------------------------


def cmd_solve(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, SOLVE_KEYS)
    if args.instance:
        data = load_instance(args.instance)
        if args.variant and infer_variant(data) != args.variant.upper():
            print(
                f"note: {args.instance} looks like {infer_variant(data)}, not {args.variant.upper()}",
                file=sys.stderr,
            )
    elif args.variant:
        variant = _parse_variants(args.variant)[0]
        data = generate_instance(variant=variant, n=args.n, seed=args.instance_seed)
    else:
        raise CliError(EXIT_USAGE, "give an instance file or --variant to generate one")
    params, operator = solve_params(cfg, args)
    try:
        result = solve(data, params)
    except SolveError as exc:
        raise CliError(EXIT_INPUT if exc.kind == "invalid-instance" else EXIT_RUNTIME, str(exc)) from None
    print(
        f"{data.name or 'instance'} operator={operator} cost={result.cost} "
        f"feasible={'yes' if result.feasible else 'no'} routes={result.best.num_routes()} "
        f"iterations={result.iterations}"
    )
    print(f"wall_seconds={result.seconds:.2f}")
    if args.output:
        doc = {"instance": data.name, "cost": result.cost, "feasible": result.feasible, "solution": result.best.to_dict()}
        Path(args.output).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    if args.trace:
        Path(args.trace).write_text(result.trace_lines(), encoding="utf-8")
    return EXIT_OK


# -- bench ----------------------------------------------------------------------------


def _bench_job(job: tuple) -> tuple:
    data, operator, op_params, base, seed, key = job
    overrides = operator_bindings(operator, op_params)
    params = replace(base, seed=seed, **overrides)
    started = time.perf_counter()
    result = solve(data, params)
    return key, result.cost, result.feasible, time.perf_counter() - started


def run_bench(
    instances: list[ProblemData],
    operators: list[str],
    seeds: tuple[int, ...],
    base: SolveParams,
    jobs: int = 1,
    op_params: dict | None = None,
) -> BenchReport:
    """Solve every instance with every operator and seed; the first operator is the reference."""
    if not instances:
        raise CliError(EXIT_INPUT, "empty-instance-set: no instances to benchmark")
    work = []
    for i, data in enumerate(instances):
        for operator in operators:
            for seed in seeds:
                run_seed = derive_seed(seed, i)
                work.append((data, operator, op_params, base, run_seed, (i, operator, seed)))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_bench_job, work))
    else:
        results = [_bench_job(job) for job in work]

    by_key = {key: (cost, feas, secs) for key, cost, feas, secs in results}
    per_instance = []
    for key, cost, feas, secs in results:
        i, operator, seed = key
        per_instance.append(
            {
                "instance": instances[i].name,
                "variant": infer_variant(instances[i]),
                "operator": operator,
                "seed": seed,
                "cost": cost,
                "feasible": feas,
                "seconds": round(secs, 3),
            }
        )

    reference = operators[0]
    variants: dict[str, list[int]] = {}
    for i, data in enumerate(instances):
        variants.setdefault(infer_variant(data), []).append(i)
    compared = operators[1:] or operators[:1]
    rows = []
    for variant, idxs in variants.items():
        def mean(op, field):
            vals = [by_key[(i, op, s)][field] for i in idxs for s in seeds]
            return sum(vals) / len(vals)

        for operator in compared:
            rows.append(
                BenchRow(
                    variant=variant,
                    operator=operator,
                    baseline_cost=mean(reference, 0),
                    candidate_cost=mean(operator, 0),
                    baseline_seconds=mean(reference, 2),
                    candidate_seconds=mean(operator, 2),
                )
            )
    stamp = {
        "reference": reference,
        "operators": list(operators),
        "seeds": list(seeds),
        "instances": [d.name for d in instances],
        "max_iterations": base.max_iterations,
        "max_seconds": base.max_seconds,
        "population": [base.population_min, base.population_max],
    }
    return BenchReport(rows, stamp, per_instance)


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, BENCH_KEYS)
    seeds = parse_seeds(args.seeds) if args.seeds else tuple(cfg.get("seeds", (0,)))
    operators = args.operators or cfg.get("operators") or ["baseline", "hybrid"]
    for op in operators:
        operator_bindings(op, cfg.get("operator_params"))
    base, _ = solve_params(cfg, argparse.Namespace(**{**vars(args), "operator": "baseline"}))
    source = args.instances or cfg.get("instances")
    if source:
        instances = instance_dir(source)
    else:
        variants = _parse_variants(args.variant or ",".join(cfg.get("variants", ["CVRP"])))
        n = args.n if args.n is not None else cfg.get("n", 50)
        count = args.count if args.count is not None else cfg.get("count", 3)
        instances = [generate_instance(variant=v, n=n, seed=k) for v in variants for k in range(count)]
    jobs = args.jobs or cfg.get("jobs", 1)
    try:
        report = run_bench(instances, operators, seeds, base, jobs, cfg.get("operator_params"))
    except SolveError as exc:
        raise CliError(EXIT_INPUT if exc.kind == "invalid-instance" else EXIT_RUNTIME, str(exc)) from None
    if args.format == "csv":
        sys.stdout.write(report.to_csv())
    elif args.format == "json":
        sys.stdout.write(report.to_json() + "\n")
    else:
        sys.stdout.write(report.to_table())
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    if args.per_instance:
        Path(args.per_instance).write_text(report.per_instance_csv(), encoding="utf-8")
    return EXIT_OK


# -- evolve ---------------------------------------------------------------------------


def build_generator(doc: dict):
    from .mep.generators import HttpGenerator, LatticeGenerator, ScriptedGenerator

    kind = doc.get("type", "lattice")
    if kind not in GENERATOR_KEYS:
        raise CliError(EXIT_INPUT, f"unknown generator type {kind!r}")
    check_keys(doc, GENERATOR_KEYS[kind], "generator.")
    opts = {k: v for k, v in doc.items() if k != "type"}
    if kind == "lattice":
        if "operator" in opts and opts["operator"] not in REGISTRY:
            raise CliError(EXIT_INPUT, f"generator.operator: unknown registry operator {opts['operator']!r}")
        return LatticeGenerator(**opts)
    if kind == "scripted":
        return ScriptedGenerator(opts.get("replies", []), exhaust=opts.get("exhaust", False))
    if "endpoint" not in opts:
        raise CliError(EXIT_INPUT, "generator.endpoint is required for the http generator")
    return HttpGenerator(**opts)


def cmd_evolve(args: argparse.Namespace) -> int:
    from .mep import EvalConfig, EvolutionAborted, EvolveConfig, KnowledgeBase, evolve

    cfg = load_config(args.config, EVOLVE_KEYS)
    generator = build_generator(cfg.get("generator", {"type": "lattice"}))
    inst_doc = cfg.get("instances", {})
    check_keys(inst_doc, INSTANCE_KEYS, "instances.")
    if "paths" in inst_doc:
        instances = [load_instance(p) for p in inst_doc["paths"]]
    else:
        variant = _parse_variants(inst_doc.get("variant", "TSP"))[0]
        n, count, seed0 = inst_doc.get("n", 100), inst_doc.get("count", 10), inst_doc.get("seed", 0)
        instances = [generate_instance(variant=variant, n=n, seed=seed0 + k) for k in range(count)]
    eval_doc = cfg.get("eval", {})
    check_keys(eval_doc, EVAL_KEYS, "eval.")
    mode = args.ablation or cfg.get("mode", "full")
    mode = {"noinit": "noInit", "full": "full", "reactive": "reactive"}.get(mode.lower(), mode)
    seeds = parse_seeds(args.seeds) if args.seeds else tuple(cfg.get("seeds", (0,)))
    record = args.record or cfg.get("record") or "runs/evolve.jsonl"
    try:
        knowledge = KnowledgeBase.load(cfg["knowledge"]) if "knowledge" in cfg else None
        config = EvolveConfig(
            generator=generator,
            instances=instances,
            generations=cfg.get("generations", 10),
            offspring_per_gen=cfg.get("offspring_per_gen", 10),
            survivors=cfg.get("survivors", 5),
            seeds=seeds,
            mode=mode,
            eval=EvalConfig(**eval_doc),
            knowledge=knowledge,
            record_path=record,
            jobs=args.jobs or cfg.get("jobs", 1),
        )
    except (TypeError, ValueError, OSError) as exc:
        raise CliError(EXIT_INPUT, f"bad evolve config: {exc}") from None

    try:
        best, run_record = evolve(config)
    except EvolutionAborted as exc:
        print(f"generator-unavailable: {exc}; partial record at {record}", file=sys.stderr)
        return EXIT_RUNTIME
    for run in run_record.runs:
        for gen, fitness in enumerate(run.best_series[1:], 1):
            print(f"seed {run.seed} generation {gen} best_fitness {fitness:.2f}")
    print(f"best {best.id} fitness {best.fitness:.2f} record {record}")
    return EXIT_OK


# -- entry point --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mepvrp", description="Hybrid genetic search for vehicle routing with evolvable operators")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def solver_flags(p):
        p.add_argument("--config", help="JSON file with solver settings")
        p.add_argument("--max-iterations", dest="max_iterations", type=int)
        p.add_argument("--max-seconds", dest="max_seconds", type=float)
        p.add_argument("--population-min", dest="population_min", type=int)
        p.add_argument("--population-max", dest="population_max", type=int)

    p = sub.add_parser("solve", help="solve one instance")
    p.add_argument("instance", nargs="?", help="VRPLIB or JSON instance file")
    p.add_argument("--variant", help="expected variant; without a file, generate one of this variant")
    p.add_argument("--n", type=int, default=50, help="clients when generating (default 50)")
    p.add_argument("--instance-seed", dest="instance_seed", type=int, default=0)
    p.add_argument("--seed", type=int)
    p.add_argument("--operator", help=f"parent selection: {', '.join(OPERATOR_CHOICES)}")
    p.add_argument("--output", help="write the solution as JSON here")
    p.add_argument("--trace", help="write the per-iteration trace (JSON lines) here")
    solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="compare operators over an instance set")
    p.add_argument("--instances", help="directory of instance files")
    p.add_argument("--variant", help="comma-separated variants to generate")
    p.add_argument("--n", type=int)
    p.add_argument("--count", type=int, help="generated instances per variant")
    p.add_argument("--operator", dest="operators", action="append",
                   help="repeatable; the first one is the reference")
    p.add_argument("--seeds", help="e.g. 0,1,2 or 0-4")
    p.add_argument("--jobs", type=int)
    p.add_argument("--format", choices=("table", "csv", "json"), default="table")
    p.add_argument("--csv", help="also write the summary CSV here")
    p.add_argument("--per-instance", dest="per_instance", help="write per-run CSV here")
    solver_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("evolve", help="evolve parent selectors")
    p.add_argument("--config", help="JSON evolve config")
    p.add_argument("--ablation", choices=("full", "noinit", "reactive"))
    p.add_argument("--seeds")
    p.add_argument("--jobs", type=int)
    p.add_argument("--record", help="JSON-lines run record path")
    p.set_defaults(func=cmd_evolve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except KeyboardInterrupt:
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
