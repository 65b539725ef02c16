"""CLI entry point for coded-gossip."""

import copy
import sys
from functools import wraps
from pathlib import Path
from typing import Callable

import click

from . import __version__, capacity, coding, config, engine, flooding, linalg, render
from .errors import ConfigError, GossipError, SimulationTimeout
from .field import FieldSpec, field_from_order
from .netmodel import NetworkModel, build_model
from .sources import JointSource, build_source
from .streams import Stream, map_trials


def _load_config_file(ctx, param, value):
    """Click callback that loads the YAML config file into ctx.meta.

    Runs eagerly so the file is read before any subcommand resolves its
    configuration. --set overrides are applied on top later.
    """
    if value is None:
        return
    try:
        ctx.meta["config_file"] = config.load_config_file(value)
    except ConfigError as e:
        raise click.BadParameter(str(e))


def _print_schema(ctx, param, value):
    if not value or ctx.resilient_parsing:
        return
    click.echo(config.schema_text(), nl=False)
    ctx.exit(0)


class Run:
    """Resolved configuration plus the global flags, shared by every subcommand."""

    def __init__(self, cfg: dict, verbose: bool, no_color: bool, output_format: str):
        self.cfg = cfg
        self.verbose = verbose
        self.no_color = no_color
        self.format = output_format
        self.hash = config.config_hash(cfg)
        self.seed = int(cfg["seed"])
        self.threads = config.thread_count(cfg)

    @property
    def output_dir(self) -> Path:
        return Path(self.cfg["output_dir"])

    def progress(self, message: str) -> None:
        if self.verbose:
            sys.stderr.write(f"{message}\n")

    def warn(self, message: str) -> None:
        sys.stderr.write(f"Warning: {message}\n")

    def csv(self, name: str, columns, rows) -> Path:
        path = render.write_csv(self.output_dir / name, columns, rows, self.hash, self.seed)
        self.progress(f"Wrote {path}")
        return path

    def json(self, name: str, data: dict) -> Path:
        path = render.write_json(self.output_dir / name, data, self.hash, self.seed)
        self.progress(f"Wrote {path}")
        return path

    def show(self, title: str, data: dict) -> None:
        if self.format == "json":
            render.render_json(data)
        else:
            render.render_summary_table(title, data, no_color=self.no_color)


def _resolve_run(ctx: click.Context, extra_overrides=()) -> Run:
    root = ctx.find_root()
    overrides = list(root.meta.get("overrides", ())) + list(extra_overrides)
    cfg = config.resolve(root.meta.get("config_file"), overrides)
    return Run(
        cfg,
        verbose=root.meta.get("verbose", False),
        no_color=root.meta.get("no_color", False),
        output_format=root.meta.get("format", "table"),
    )


def _handle_errors(fn: Callable) -> Callable:
    """Map library exceptions to exit codes, as every subcommand does."""

    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            fn(*args, **kwargs)
        except GossipError as e:
            sys.stderr.write(f"Error: {e}\n")
            sys.exit(e.exit_code)
        except KeyboardInterrupt:
            sys.stderr.write("\nInterrupted by user.\n")
            sys.exit(130)
        except Exception as e:
            sys.stderr.write(f"Error: {e}\n")
            sys.exit(1)

    return wrapper


# ---------------------------------------------------------------------------
# Building domain objects from the config tree
# ---------------------------------------------------------------------------


def _field(cfg: dict) -> FieldSpec:
    section = cfg["field"]
    modulus = section.get("modulus")
    try:
        return FieldSpec(
            p=int(section["p"]),
            m=int(section["m"]),
            modulus=tuple(modulus) if modulus is not None else None,
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"field: {e}")


def _model(cfg: dict) -> NetworkModel:
    return build_model(cfg["model"])


def _source(cfg: dict, n: int) -> JointSource:
    return build_source(cfg["source"], n)


def _experiment(cfg: dict, model: NetworkModel, source: JointSource) -> engine.ExperimentSpec:
    coding_cfg, exp = cfg["coding"], cfg["experiment"]
    try:
        return engine.ExperimentSpec(
            model=model,
            source=source,
            placement=engine.parse_placement(cfg.get("placement"), source.k, model.n),
            field=_field(cfg),
            l=int(coding_cfg["l"]),
            s=float(coding_cfg["s"]),
            delta=float(coding_cfg["delta"]),
            epsilon=float(coding_cfg["epsilon"]),
            stop_rule=str(exp["stop_rule"]),
            node=int(exp["node"]),
            max_rounds=int(exp["max_rounds"]),
            trials=int(exp["trials"]),
            seed=int(cfg["seed"]),
            decode_rule=str(coding_cfg["decode_rule"]),
            check_consistency=bool(coding_cfg["check_consistency"]),
            trace_nodes=tuple(int(v) for v in exp.get("trace_nodes") or ()),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"experiment: {e}")


def _flood_params(run: Run, model: NetworkModel, q: int, stream: Stream) -> flooding.FloodParams:
    flood_cfg = run.cfg["flood"]
    trials = int(flood_cfg["trials"])
    if trials < flooding.MIN_FLOOD_TRIALS:
        run.warn(
            f"flood.trials={trials} is below {flooding.MIN_FLOOD_TRIALS}; "
            "the fitted tail may be too short"
        )
    run.progress(
        f"Estimating flooding parameters: q={q}, {trials} trials per start"
    )
    params = flooding.estimate_flood_params(
        model,
        q=q,
        trials=trials,
        max_rounds=int(flood_cfg["max_rounds"]),
        stream=stream,
        max_starts=flood_cfg["max_starts"],
        alpha_cap=float(flood_cfg["alpha_cap"]),
        min_tail_count=int(flood_cfg["min_tail_count"]),
        threads=run.threads,
    )
    if params.insufficient_tail:
        run.warn(
            f"Fewer than {flooding.MIN_TAIL_POINTS} tail points; alpha set to the cap "
            f"{params.alpha}"
        )
    return params


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


@click.group()
@click.option(
    "--config-file",
    type=click.Path(exists=False),
    default=None,
    is_eager=True,
    expose_value=False,
    callback=_load_config_file,
    help="Path to YAML config file. --set overrides config file values.",
)
@click.option(
    "--set",
    "overrides",
    multiple=True,
    metavar="KEY.PATH=VALUE",
    help="Override one config value (repeatable); the value is parsed as YAML",
)
@click.option(
    "--format",
    "-f",
    "output_format",
    type=click.Choice(["table", "json"], case_sensitive=False),
    default="table",
    help="Summary output format",
)
@click.option("--verbose", "-v", is_flag=True, help="Print progress to stderr")
@click.option("--no-color", is_flag=True, help="Disable colored output")
@click.option(
    "--schema",
    is_flag=True,
    is_eager=True,
    expose_value=False,
    callback=_print_schema,
    help="Print the default configuration and CSV columns, then exit",
)
@click.version_option(version=__version__)
@click.pass_context
def main(ctx, overrides, output_format, verbose, no_color):
    """Simulate and verify network-coded gossip with correlated data."""
    ctx.meta["overrides"] = overrides
    ctx.meta["format"] = output_format.lower()
    ctx.meta["verbose"] = verbose
    ctx.meta["no_color"] = no_color


@main.command("schema")
def schema_command():
    """Print the default configuration and CSV columns."""
    click.echo(config.schema_text(), nl=False)


def flood_estimate_impl(run: Run) -> dict:
    model = _model(run.cfg)
    spec = _field(run.cfg)
    root = Stream(run.seed)
    params = _flood_params(run, model, spec.q, root)

    run.csv(
        "flood_tail.csv",
        ["k", "t", "count", "probability"],
        [(pt.k, pt.t, pt.count, pt.probability) for pt in params.tail],
    )
    summary = params.to_dict()
    summary["below_min_trials"] = params.trials < flooding.MIN_FLOOD_TRIALS
    check_trials = int(run.cfg["flood"]["check_trials"])
    if check_trials > 0:
        run.progress(f"Checking (T, alpha) on {check_trials} held-out trials per start")
        check = flooding.check_flood_params(
            params,
            model,
            check_trials,
            root.aux(1),
            max_rounds=int(run.cfg["flood"]["max_rounds"]),
            threads=run.threads,
        )
        summary["held_out_passed"] = check.passed
        summary["held_out_violations"] = len(check.violations)
        if not check.passed:
            run.warn(f"{len(check.violations)} tail points exceed q^(-alpha k) on held-out trials")
    run.json("flood_params.json", summary)
    return summary


@main.command("flood-estimate")
@click.option("--q", "q", type=int, default=None, help="Field size for the fault rate 1/q")
@click.option("--trials", type=int, default=None, help="Trials per start node")
@click.option("--max-rounds", type=int, default=None, help="Round cap per flood")
@click.pass_context
@_handle_errors
def flood_estimate(ctx, q, trials, max_rounds):
    """Estimate the flooding time T and throughput alpha of the model."""
    extra = []
    if q is not None:
        spec = field_from_order(q)
        extra += [f"field.p={spec.p}", f"field.m={spec.m}", "field.modulus=null"]
    if trials is not None:
        extra.append(f"flood.trials={trials}")
    if max_rounds is not None:
        extra.append(f"flood.max_rounds={max_rounds}")
    run = _resolve_run(ctx, extra)
    summary = flood_estimate_impl(run)
    run.show("Flooding parameters", summary)


def gossip_run_impl(run: Run) -> dict:
    model = _model(run.cfg)
    source = _source(run.cfg, model.n)
    spec = _experiment(run.cfg, model, source)
    layout = spec.layout()
    run.progress(f"{layout!r}, thresholds {spec.thresholds(layout)}")

    exp = run.cfg["experiment"]
    kind = str(exp["bound"])
    if kind not in engine.BOUNDS:
        raise ConfigError(
            f"Unknown bound: {kind}. Valid options are: {', '.join(engine.BOUNDS)}"
        )
    bound, params = None, None
    if kind != "none":
        if exp.get("T") is not None and exp.get("alpha") is not None:
            params = flooding.FloodParams(
                T=int(exp["T"]), alpha=float(exp["alpha"]), q=spec.field.q, trials=0
            )
        else:
            params = _flood_params(run, model, spec.field.q, Stream(run.seed).aux(0))
        cap_cfg = run.cfg["capacity"]
        cap = None
        if kind == "theorem5":
            cap = capacity.capacity_vector(cap_cfg["demands"], source.k)
        bound = engine.experiment_bound(
            spec,
            kind,
            params,
            layout,
            cap=cap,
            delta_inner=cap_cfg["delta_inner"],
            delta_outer=cap_cfg["delta_outer"],
        )

    run.progress(f"Running {spec.trials} trials on {run.threads} thread(s)")
    summary = engine.stopping_time_distribution(spec, bound=bound, threads=run.threads)

    n = model.n
    run.csv(
        "decode_times.csv",
        ["trial", "stop_time"] + [f"node_{v}" for v in range(n)],
        [
            [i, r.stop_time] + list(r.decode_rounds)
            for i, r in enumerate(summary.results)
        ],
    )
    data = summary.to_dict()
    data["blocks"] = layout.dim
    if params is not None:
        data["flood"] = {"T": params.T, "alpha": render.format_float(params.alpha)}
    data["bound"] = render.format_float(bound)
    run.json("summary.json", data)
    if summary.timeouts == summary.trials:
        raise SimulationTimeout(
            f"All {summary.trials} trials hit max_rounds={spec.max_rounds}",
            rounds=spec.max_rounds,
            partial=data,
        )
    if summary.timeouts:
        run.warn(f"{summary.timeouts} of {summary.trials} trials hit max_rounds")
    return data


@main.command("gossip-run")
@click.option("--trials", type=int, default=None, help="Number of trials")
@click.pass_context
@_handle_errors
def gossip_run(ctx, trials):
    """Run algebraic gossip trials and summarize decode times."""
    extra = [f"experiment.trials={trials}"] if trials is not None else []
    run = _resolve_run(ctx, extra)
    data = gossip_run_impl(run)
    run.show("Stopping times", {k: v for k, v in data.items() if k != "node_quantiles"})


def capacity_scan_impl(run: Run) -> dict:
    model = _model(run.cfg)
    cap_cfg = run.cfg["capacity"]
    demand = capacity.build_demand(cap_cfg, model.n)
    trials = int(cap_cfg["trials"])
    max_rounds = int(cap_cfg["max_rounds"])
    max_den = int(cap_cfg["max_denominator"])
    root = Stream(run.seed)
    run.progress(f"Scanning {trials} trials for demands {capacity.format_demands(demand)}")

    def one(i: int):
        try:
            t, paths, _ = capacity.first_feasible_time(
                model, demand, max_rounds, root.child(i), max_den
            )
            return t, paths
        except SimulationTimeout:
            return None, []

    outcomes = map_trials(one, trials, run.threads)
    run.csv(
        "feasible_times.csv",
        ["trial", "first_feasible_time", "paths"],
        [(i, t, len(paths)) for i, (t, paths) in enumerate(outcomes)],
    )
    if cap_cfg.get("dump_paths"):
        text = "".join(
            f"# trial {i}\n" + capacity.format_paths(paths)
            for i, (t, paths) in enumerate(outcomes)
            if t is not None
        )
        render.write_text(run.output_dir / "paths.txt", text, run.hash, run.seed)

    times = [t if t is not None else max_rounds + 1 for t, _ in outcomes]
    timeouts = sum(1 for t, _ in outcomes if t is None)
    data = {
        "trials": trials,
        "timeouts": timeouts,
        "demands": [str(c) for c in demand.demands],
        "median": engine.empirical_quantile(times, 0.5),
        "quantile_0.9": engine.empirical_quantile(times, 0.9),
    }
    run.json("capacity_summary.json", data)
    if timeouts == trials:
        raise SimulationTimeout(
            f"No trial was feasible within {max_rounds} rounds", rounds=max_rounds, partial=data
        )
    if timeouts:
        run.warn(f"{timeouts} of {trials} trials were not feasible within {max_rounds} rounds")
    return data


@main.command("capacity-scan")
@click.option("--trials", type=int, default=None, help="Number of trials")
@click.pass_context
@_handle_errors
def capacity_scan(ctx, trials):
    """Measure the first round at which the demanded capacities become feasible."""
    extra = [f"capacity.trials={trials}"] if trials is not None else []
    run = _resolve_run(ctx, extra)
    data = capacity_scan_impl(run)
    run.show("First feasible time", data)


def lemma4_verify_impl(run: Run) -> list:
    section = run.cfg["lemma4"]
    rows = []
    for q in section["q_values"]:
        spec = field_from_order(int(q))
        for ambient in section["ambient"]:
            for h in section["h"]:
                if not 0 <= int(h) < int(ambient):
                    continue
                run.progress(f"Checking q={q} ambient={ambient} h={h}")
                result = linalg.verify_lemma4(
                    spec, int(ambient), int(h), strict=bool(section["strict"])
                )
                rows.append(
                    {
                        "q": spec.q,
                        "ambient": int(ambient),
                        "h": int(h),
                        "witnesses": len(result.witnesses),
                        "subspaces": result.subspaces_checked,
                        "verified": result.verified,
                    }
                )
                if result.counterexample is not None:
                    run.progress(f"  counterexample basis: {result.counterexample.tolist()}")
    run.csv(
        "lemma4.csv",
        ["q", "ambient", "h", "witnesses", "subspaces", "verified"],
        [
            (r["q"], r["ambient"], r["h"], r["witnesses"], r["subspaces"],
             str(r["verified"]).lower())
            for r in rows
        ],
    )
    return rows


@main.command("lemma4-verify")
@click.option("--strict", is_flag=True, help="Leave the zero vector out of the witnesses")
@click.pass_context
@_handle_errors
def lemma4_verify(ctx, strict):
    """Exhaustively check the q^h + 1 witness construction over small fields."""
    extra = ["lemma4.strict=true"] if strict else []
    run = _resolve_run(ctx, extra)
    rows = lemma4_verify_impl(run)
    if run.format == "json":
        render.render_json({"checks": rows})
    else:
        render.render_lemma4_table(rows, no_color=run.no_color)
    if not all(r["verified"] for r in rows):
        sys.exit(1)


def oracle_curve_impl(run: Run) -> dict:
    model_n = int(run.cfg["model"]["n"])
    source = _source(run.cfg, model_n)
    spec = _field(run.cfg)
    section, coding_cfg = run.cfg["oracle"], run.cfg["coding"]
    message = int(section["message"])
    if not 0 <= message < source.k:
        raise ConfigError(f"oracle.message {message} is outside [0, {source.k})")
    node = section.get("node")
    if node is not None:
        node = int(node)
        if not 0 <= node < model_n:
            raise ConfigError(f"oracle.node {node} is outside [0, {model_n})")
        if source.side_alphabets[node] == 1:
            node = None
    block_length = section.get("l")
    curve = coding.oracle_error_curve(
        source,
        message,
        node,
        int(block_length if block_length is not None else coding_cfg["l"]),
        spec,
        float(coding_cfg["s"]),
        float(coding_cfg["delta"]),
        int(section["trials"]),
        Stream(run.seed),
        threads=run.threads,
    )
    run.csv(
        "oracle_curve.csv",
        ["equations", "errors", "trials", "rate"],
        [(p.equations, p.errors, p.trials, p.rate) for p in curve],
    )
    data = {f"rate_{p.equations}": p.rate for p in curve}
    run.json("oracle_summary.json", data)
    return data


@main.command("oracle-curve")
@click.pass_context
@_handle_errors
def oracle_curve(ctx):
    """MAP decoding error against the number of independent equations (small l)."""
    run = _resolve_run(ctx)
    data = oracle_curve_impl(run)
    run.show("Decoding error by equations received", data)


_SWEEPABLE = {
    "flood-estimate": flood_estimate_impl,
    "gossip-run": gossip_run_impl,
    "capacity-scan": capacity_scan_impl,
    "oracle-curve": oracle_curve_impl,
}


@main.command("sweep")
@click.option("--key", default=None, help="Dotted config key to vary (default: sweep.key)")
@click.option(
    "--values", default=None, help="YAML list of values (default: sweep.values)"
)
@click.option(
    "--command",
    "command_name",
    type=click.Choice(sorted(_SWEEPABLE)),
    default=None,
    help="Subcommand to run per value (default: sweep.command)",
)
@click.pass_context
@_handle_errors
def sweep(ctx, key, values, command_name):
    """Run a subcommand once per value of one config key."""
    extra = []
    if key is not None:
        extra.append(f"sweep.key={key}")
    if values is not None:
        extra.append(f"sweep.values={values}")
    if command_name is not None:
        extra.append(f"sweep.command={command_name}")
    base = _resolve_run(ctx, extra)
    section = base.cfg["sweep"]
    name = str(section["command"])
    if name not in _SWEEPABLE:
        raise ConfigError(
            f"sweep.command must be one of {', '.join(sorted(_SWEEPABLE))}, got '{name}'"
        )
    sweep_key, sweep_values = str(section["key"]), section["values"]
    if not isinstance(sweep_values, list) or not sweep_values:
        raise ConfigError("sweep.values must be a nonempty list")
    config.get(base.cfg, sweep_key)

    combined = []
    for value in sweep_values:
        label = f"{sweep_key}={value}"
        base.progress(f"Sweep point {label}")
        cfg = copy.deepcopy(base.cfg)
        config.set_path(cfg, sweep_key.split("."), value)
        cfg["output_dir"] = str(base.output_dir / label)
        point = Run(cfg, base.verbose, base.no_color, base.format)
        try:
            summary = _SWEEPABLE[name](point)
        except SimulationTimeout as e:
            # the point's files are written; keep sweeping
            base.warn(f"{label}: {e}")
            summary = e.partial if isinstance(e.partial, dict) else {"error": str(e)}
        combined.append({"value": value, "summary": summary})
    data = {"key": sweep_key, "command": name, "points": combined}
    base.json("sweep_summary.json", data)
    if base.format == "json":
        render.render_json(data)
    else:
        for point in combined:
            render.render_summary_table(
                f"{sweep_key} = {point['value']}",
                {k: v for k, v in point["summary"].items() if k != "node_quantiles"},
                no_color=base.no_color,
            )


if __name__ == "__main__":
    main()
