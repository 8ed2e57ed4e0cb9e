"""Command-line front end.

Subcommands: ``explain`` one input, ``bench`` a paired run, ``gen-workload``
a synthetic clustered stream, and ``memory inspect``/``memory persist`` for
the rule store. Models are addressed as ``builtin:<kind>`` (with
``--model-params`` JSON) or ``server:<cmd | host:port>``.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from . import bench
from .anchors import SearchConfig, trace_to_jsonl
from .data import ingest_csv
from .engine import ExplainParams, MemoizedExplainer
from .errors import ConfigError, ExplainerError
from .memory import MemoryStore
from .models import ExternalModelClient, make_builtin


_PARAM_DEFAULTS = {
    "tau_p": 0.95,
    "tau_p_mid": 0.8,
    "tau_sim": 0.6,
    "delta": 0.6,
    "seed": 42,
    "batch": 100,
    "budget": 100_000,
    "epsilon": 0.05,
    "coverage_samples": 10_000,
    "similarity": "inverse",
    "insert_on_hit": False,
}


def _add_param_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path,
                        help="JSON file of parameters; explicit flags override it")
    parser.add_argument("--tau-p", type=float)
    parser.add_argument("--tau-p-mid", type=float)
    parser.add_argument("--tau-sim", type=float)
    parser.add_argument("--delta", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--batch", type=int)
    parser.add_argument("--budget", type=int)
    parser.add_argument("--epsilon", type=float)
    parser.add_argument("--coverage-samples", type=int)
    parser.add_argument("--similarity", choices=["inverse", "exp"])
    parser.add_argument("--insert-on-hit", action="store_true", default=None)


def _add_data_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--workload", type=Path, help="clustered workload JSON")
    parser.add_argument("--csv", type=Path, help="dataset CSV with a header row")
    parser.add_argument("--schema", type=Path, help="schema config JSON for --csv")
    parser.add_argument("--model", help="builtin:<kind> or server:<cmd | host:port>")
    parser.add_argument("--model-params", default="{}", help="JSON params for builtin models")


def _params_from(args: argparse.Namespace) -> ExplainParams:
    values = dict(_PARAM_DEFAULTS)
    if args.config:
        file_values = json.loads(Path(args.config).read_text())
        unknown = set(file_values) - set(values)
        if unknown:
            raise ConfigError(f"unknown parameter(s) in {args.config}: {sorted(unknown)}")
        values.update(file_values)
    for key in values:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return ExplainParams(
        tau_p=values["tau_p"],
        tau_p_mid=values["tau_p_mid"],
        tau_sim=values["tau_sim"],
        delta=values["delta"],
        seed=values["seed"],
        search=SearchConfig(
            batch=values["batch"],
            budget=values["budget"],
            epsilon=values["epsilon"],
            coverage_samples=values["coverage_samples"],
        ),
        similarity=values["similarity"],
        insert_on_hit=bool(values["insert_on_hit"]),
    )


def _parse_model(spec: str, params_json: str, arity: int | None):
    if spec.startswith("builtin:"):
        return make_builtin(spec[len("builtin:"):], json.loads(params_json))
    if spec.startswith("server:"):
        rest = spec[len("server:"):]
        if re.fullmatch(r"[\w.\-]+:\d+", rest):
            host, port = rest.rsplit(":", 1)
            return ExternalModelClient(address=(host, int(port)), arity=arity)
        return ExternalModelClient(command=rest, arity=arity)
    raise ConfigError(f"model spec must start with builtin: or server:, got {spec!r}")


def _load_problem(args: argparse.Namespace):
    """Resolve (schema, instances, distribution, oracle) from the data flags."""
    if args.workload:
        payload = json.loads(Path(args.workload).read_text())
        workload = bench.ClusteredWorkload.from_dict(payload)
        oracle = workload.oracle
        if args.model:
            oracle = _parse_model(args.model, args.model_params, workload.schema.arity)
        return workload.schema, workload.instances, workload.distribution, oracle
    if not args.csv or not args.schema:
        raise ConfigError("either --workload or both --csv and --schema are required")
    schema_config = json.loads(Path(args.schema).read_text())
    ingested = ingest_csv(args.csv, schema_config)
    if not args.model:
        raise ConfigError("--model is required with --csv")
    oracle = _parse_model(args.model, args.model_params, ingested.schema.arity)
    return ingested.schema, ingested.instances, ingested.distribution, oracle


def _cmd_explain(args: argparse.Namespace) -> int:
    schema, instances, distribution, oracle = _load_problem(args)
    params = _params_from(args)
    store = None
    if args.memory:
        explainer_probe = MemoizedExplainer(oracle, schema, distribution, params=params)
        store = MemoryStore.load(
            args.memory, explainer_probe.embedder,
            schema_hash=schema.hash(), similarity=args.similarity,
        )
    explainer = MemoizedExplainer(oracle, schema, distribution, params=params, store=store)
    if args.instance:
        x = tuple(int(v) for v in args.instance.split(","))
    else:
        x = instances[args.index]
    report = explainer.explain(x)
    json.dump(report.to_dict(), sys.stdout, indent=2)
    print()
    if args.trace:
        Path(args.trace).write_text(trace_to_jsonl(report.trace) + "\n")
    if args.save_memory:
        explainer.store.persist(args.save_memory)
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    schema, instances, distribution, oracle = _load_problem(args)
    params = _params_from(args)
    if args.limit:
        instances = instances[: args.limit]
    summary = bench.run_paired_benchmark(schema, instances, oracle, distribution, params)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bench.write_summary_json(summary, out_dir / "summary.json")
    bench.write_per_input_csv(summary, out_dir / "per_input.csv")
    print(
        f"speedup {summary.speedup:.2f}x  query speedup {summary.query_speedup:.2f}x  "
        f"sampling reduction {summary.sampling_reduction:.0%}  hit rate {summary.hit_rate:.0%}"
    )
    print(f"wrote {out_dir / 'summary.json'} and {out_dir / 'per_input.csv'}")
    return 0


def _cmd_gen_workload(args: argparse.Namespace) -> int:
    workload = bench.generate_clustered_workload(
        args.clusters, args.per_cluster, args.features, args.cardinality, args.noise, args.seed
    )
    Path(args.out).write_text(json.dumps(workload.to_dict()) + "\n")
    print(f"wrote {len(workload.instances)} instances to {args.out}")
    return 0


def _cmd_memory(args: argparse.Namespace) -> int:
    if args.memory_cmd == "inspect":
        store = MemoryStore.load(args.path)
        lengths = [len(e.mid_rule) for e in store.entries]
        info = {
            "dim": store.dim,
            "schema_hash": store.schema_hash,
            "count": len(store),
            "rule_length_min": min(lengths) if lengths else None,
            "rule_length_max": max(lengths) if lengths else None,
        }
        json.dump(info, sys.stdout, indent=2)
        print()
        return 0
    # persist: run an explanation stream and save the resulting store
    schema, instances, distribution, oracle = _load_problem(args)
    params = _params_from(args)
    explainer = MemoizedExplainer(oracle, schema, distribution, params=params)
    if args.limit:
        instances = instances[: args.limit]
    result = explainer.explain_stream(instances)
    explainer.store.persist(args.out)
    print(
        f"explained {len(result.reports)} inputs "
        f"(hit rate {result.hit_rate:.0%}), stored {len(explainer.store)} rules in {args.out}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anchormem")
    sub = parser.add_subparsers(dest="command", required=True)

    p_explain = sub.add_parser("explain", help="explain one input")
    _add_data_flags(p_explain)
    _add_param_flags(p_explain)
    p_explain.add_argument("--index", type=int, default=0, help="dataset row to explain")
    p_explain.add_argument("--instance", help="comma-separated feature codes")
    p_explain.add_argument("--trace", type=Path, help="write the search trace as JSON lines")
    p_explain.add_argument("--memory", type=Path, help="load a persisted store first")
    p_explain.add_argument("--save-memory", type=Path, help="persist the store afterwards")
    p_explain.set_defaults(func=_cmd_explain)

    p_bench = sub.add_parser("bench", help="paired baseline/memoized run")
    _add_data_flags(p_bench)
    _add_param_flags(p_bench)
    p_bench.add_argument("--limit", type=int, help="only use the first N instances")
    p_bench.add_argument("--out-dir", default="bench_out")
    p_bench.set_defaults(func=_cmd_bench)

    p_gen = sub.add_parser("gen-workload", help="generate a clustered synthetic stream")
    p_gen.add_argument("--clusters", type=int, default=10)
    p_gen.add_argument("--per-cluster", type=int, default=50)
    p_gen.add_argument("--features", type=int, default=6)
    p_gen.add_argument("--cardinality", type=int, default=4)
    p_gen.add_argument("--noise", type=float, default=0.05)
    p_gen.add_argument("--seed", type=int, default=42)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=_cmd_gen_workload)

    p_mem = sub.add_parser("memory", help="inspect or build a persisted store")
    mem_sub = p_mem.add_subparsers(dest="memory_cmd", required=True)
    p_inspect = mem_sub.add_parser("inspect")
    p_inspect.add_argument("path", type=Path)
    p_inspect.set_defaults(func=_cmd_memory)
    p_persist = mem_sub.add_parser("persist")
    _add_data_flags(p_persist)
    _add_param_flags(p_persist)
    p_persist.add_argument("--limit", type=int)
    p_persist.add_argument("--out", required=True)
    p_persist.set_defaults(func=_cmd_memory)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ExplainerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
