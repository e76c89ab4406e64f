"""The ``adw`` command line.

Stateful subcommands (identity, workflow, fip ingest, analytics) operate on
a data directory (``--data``, default ``./adw-data``) that persists the
ledger, event log and registries between invocations.  ``bench`` and
``fip gen`` are self-contained.

Exit codes: 0 success, 1 operation error, 2 usage error.
"""

from __future__ import annotations

import json
import sys
from datetime import date
from pathlib import Path

import click

from .errors import AdwError

DATA_OPTION = click.option(
    "--data", "data_dir", default="./adw-data", show_default=True,
    type=click.Path(path_type=Path), help="State directory.")


def _load_network(data_dir: Path):
    from .network import Network
    state = data_dir / "state.json"
    if not state.exists():
        raise AdwError(f"no network state in {data_dir}; run `adw init` first")
    return Network.load(data_dir)


def _emit(ctx, payload: dict, text: str | None = None):
    if ctx.obj.get("json") or text is None:
        click.echo(json.dumps(payload, indent=2, sort_keys=True, default=str))
    else:
        click.echo(text)


def _fail(exc: AdwError):
    click.echo(f"error: {exc.code}: {exc.message}", err=True)
    sys.exit(1)


@click.group()
@click.option("--json", "json_output", is_flag=True,
              help="Machine-readable output.")
@click.pass_context
def main(ctx, json_output):
    """Agribusiness digital wallet platform."""
    ctx.ensure_object(dict)
    ctx.obj["json"] = json_output


# -- init / demo -------------------------------------------------------------------

@main.command()
@DATA_OPTION
@click.option("--config", "config_path", type=click.Path(path_type=Path),
              default=None, help="JSON or YAML network config.")
@click.option("--seed", default=1, show_default=True)
@click.option("--demo/--no-demo", default=True, show_default=True,
              help="Seed a demo corpus (farms, bookings, events).")
@click.option("--farms", default=30, show_default=True)
@click.option("--events", default=20000, show_default=True)
@click.pass_context
def init(ctx, data_dir: Path, config_path, seed, demo, farms, events):
    """Create (and optionally demo-seed) a network state directory."""
    from .network import Network, NetworkConfig
    try:
        config = NetworkConfig.from_file(config_path) if config_path else None
        network = Network(config, data_dir=data_dir)
        summary = {"data_dir": str(data_dir), "demo": demo}
        if demo:
            seeded = network.seed_demo(seed=seed, n_farms=farms, n_events=events)
            summary.update({
                "farms_booked": len(seeded["instances"]),
                "events_ingested": len(seeded["corpus"].events),
                "tractors": sorted(network.tractors),
                "boundaries_detected": seeded["boundaries_detected"],
                "cluster_demo_date": seeded["trio"]["date"],
                "utilization_demo": seeded["utilization"]["tractor_id"],
            })
        else:
            network.seed_users()
            from .workflow import load_default_definition
            network.engine.register_workflow(load_default_definition(),
                                             network.token_for("root"))
        network.save()
        network.save_secret()
        _emit(ctx, summary, f"initialized network state in {data_dir}")
    except AdwError as exc:
        _fail(exc)


# -- identity ------------------------------------------------------------------------

@main.group()
def identity():
    """Organizations, users and tokens."""


@identity.command()
@DATA_OPTION
@click.option("--org", required=True)
@click.option("--user", "user_id", required=True)
@click.option("--roles", required=True,
              help="Comma-separated role names (e.g. agent,supervisor).")
@click.pass_context
def enroll(ctx, data_dir: Path, org, user_id, roles):
    """Enroll a user into an organization."""
    try:
        network = _load_network(data_dir)
        credential = network.enroll(org, user_id,
                                    {r.strip() for r in roles.split(",") if r.strip()})
        network.save()
        payload = {"user_id": credential.user_id, "org_id": credential.org_id,
                   "roles": sorted(credential.roles),
                   "enrollment_secret": credential.enrollment_secret.hex()}
        _emit(ctx, payload,
              f"enrolled {user_id} in {org} with roles {sorted(credential.roles)}\n"
              f"enrollment secret: {credential.enrollment_secret.hex()}")
    except AdwError as exc:
        _fail(exc)


@identity.command()
@DATA_OPTION
@click.option("--user", "user_id", required=True)
@click.option("--ttl", default=3600.0, show_default=True)
@click.pass_context
def token(ctx, data_dir: Path, user_id, ttl):
    """Issue a bearer token for a user."""
    from .identity import token_to_string
    try:
        network = _load_network(data_dir)
        auth = network.token_for(user_id, ttl_seconds=ttl)
        _emit(ctx, {"token": token_to_string(auth),
                    "roles": sorted(auth.roles)}, token_to_string(auth))
    except AdwError as exc:
        _fail(exc)


# -- workflow ------------------------------------------------------------------------

@main.group()
def workflow():
    """Bookings and workflow actions."""


@workflow.command("register")
@DATA_OPTION
@click.option("--file", "definition_file", required=True,
              type=click.Path(path_type=Path, exists=True),
              help="Workflow definition JSON.")
@click.option("--user", "user_id", default="root", show_default=True)
@click.pass_context
def workflow_register(ctx, data_dir: Path, definition_file: Path, user_id):
    """Register a workflow definition from a JSON file."""
    from .workflow import WorkflowDefinition
    try:
        network = _load_network(data_dir)
        definition = WorkflowDefinition.from_dict(
            json.loads(definition_file.read_text()))
        workflow_id, version = network.engine.register_workflow(
            definition, network.token_for(user_id))
        network.save()
        _emit(ctx, {"workflow_id": workflow_id, "version": version},
              f"registered {workflow_id} v{version}")
    except AdwError as exc:
        _fail(exc)


@workflow.command("book")
@DATA_OPTION
@click.option("--user", "user_id", default="agent1", show_default=True)
@click.option("--farm", "farm_id", required=True)
@click.option("--payload", "payload_json", required=True,
              help="Booking payload as JSON.")
@click.pass_context
def workflow_book(ctx, data_dir: Path, user_id, farm_id, payload_json):
    """Create a booking (runs the first workflow step)."""
    try:
        network = _load_network(data_dir)
        token = network.token_for(user_id)
        instance = network.engine.instantiate("booking", farm_id,
                                              json.loads(payload_json), token)
        network.save()
        _emit(ctx, instance.to_dict(),
              f"{instance.instance_id} ACTIVE at step {instance.current_step_index}")
    except AdwError as exc:
        _fail(exc)


@workflow.command("action")
@DATA_OPTION
@click.option("--user", "user_id", required=True)
@click.option("--instance", "instance_id", required=True)
@click.option("--action", "action_name", required=True)
@click.option("--payload", "payload_json", default="{}", show_default=True)
@click.pass_context
def workflow_action(ctx, data_dir: Path, user_id, instance_id, action_name,
                    payload_json):
    """Execute the next workflow action on an instance."""
    try:
        network = _load_network(data_dir)
        token = network.token_for(user_id)
        instance = network.engine.execute_action(instance_id, action_name, token,
                                                 json.loads(payload_json))
        network.save()
        _emit(ctx, instance.to_dict(),
              f"{instance.instance_id} -> {instance.status.value} "
              f"(step {instance.current_step_index})")
    except AdwError as exc:
        _fail(exc)


@workflow.command("show")
@DATA_OPTION
@click.argument("instance_id")
@click.pass_context
def workflow_show(ctx, data_dir: Path, instance_id):
    """Show an instance with its audit trail."""
    try:
        network = _load_network(data_dir)
        instance = network.engine.instance(instance_id)
        _emit(ctx, instance.to_dict(), json.dumps(instance.to_dict(), indent=2))
    except AdwError as exc:
        _fail(exc)


# -- fip -----------------------------------------------------------------------------

@main.group()
def fip():
    """Farm information pipeline."""


@fip.command("gen")
@click.option("--farms", default=100, show_default=True)
@click.option("--events", default=100_000, show_default=True)
@click.option("--seed", default=1, show_default=True)
@click.option("--out", "out_path", default="events.jsonl", show_default=True,
              type=click.Path(path_type=Path))
@click.pass_context
def fip_gen(ctx, farms, events, seed, out_path: Path):
    """Generate a synthetic tractor event corpus as JSON Lines."""
    from .corpus import generate_corpus, write_events_jsonl
    corpus = generate_corpus(farms, events, seed=seed)
    count = write_events_jsonl(corpus.events, out_path)
    _emit(ctx, {"out": str(out_path), "events": count,
                "farms": len(corpus.farms), "tractors": len(corpus.tractors)},
          f"wrote {count} events to {out_path}")


@fip.command("ingest")
@DATA_OPTION
@click.option("--file", "events_file", required=True,
              type=click.Path(path_type=Path, exists=True))
@click.option("--user", "user_id", default="soe1", show_default=True)
@click.option("--batch-size", default=1000, show_default=True)
@click.pass_context
def fip_ingest(ctx, data_dir: Path, events_file: Path, user_id, batch_size):
    """Ingest a JSON Lines event file through the pipeline."""
    try:
        network = _load_network(data_dir)
        token = network.token_for(user_id)
        accepted = rejected = batches = 0
        batch: list[dict] = []
        with events_file.open() as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                batch.append(json.loads(line))
                if len(batch) >= batch_size:
                    receipt = network.fip.ingest(batch, token)
                    accepted += receipt.accepted
                    rejected += len(receipt.rejected)
                    batches += 1
                    batch = []
        if batch:
            receipt = network.fip.ingest(batch, token)
            accepted += receipt.accepted
            rejected += len(receipt.rejected)
            batches += 1
        network.save()
        _emit(ctx, {"accepted": accepted, "rejected": rejected,
                    "batches": batches},
              f"ingested {accepted} events ({rejected} rejected, "
              f"{batches} anchored batches)")
    except AdwError as exc:
        _fail(exc)


# -- analytics ------------------------------------------------------------------------

@main.group()
def analytics():
    """Boundaries, clustering, assignment, utilization."""


@analytics.command("boundary")
@DATA_OPTION
@click.option("--farm", "farm_id", required=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None,
              help="Write the GeoJSON feature here.")
@click.option("--plot", is_flag=True, help="Also render a PNG next to the output.")
@click.pass_context
def analytics_boundary(ctx, data_dir: Path, farm_id, out_path, plot):
    """Detect (or fetch) a farm boundary as GeoJSON."""
    from .geo import BoundaryPolygon, boundary_geojson
    try:
        network = _load_network(data_dir)
        if network.engine.farm(farm_id) is None:
            from .errors import UnknownFarm
            raise UnknownFarm(farm_id)
        result = network.boundaries.get(farm_id) or \
            network.detect_farm_boundary(farm_id)
        if not isinstance(result, BoundaryPolygon):
            from .errors import UnknownFarm
            click.echo(f"error: UNDETECTABLE: {result.reason}", err=True)
            sys.exit(1)
        feature = boundary_geojson(farm_id, result)
        if out_path:
            Path(out_path).write_text(json.dumps(feature, indent=2))
        if plot:
            from .report import render_boundary_figure
            png = Path(out_path or f"{farm_id}_boundary.geojson") \
                .with_suffix(".png")
            points = None
            traces = network.farm_traces.get(farm_id)
            if traces:
                points = [p for t in traces for p in t.points]
            render_boundary_figure(farm_id, result, png, points)
        network.save()
        _emit(ctx, feature,
              f"{farm_id}: {result.area_ha:.2f} ha ({result.method})"
              + (f" -> {out_path}" if out_path else ""))
    except AdwError as exc:
        _fail(exc)


@analytics.command("plan")
@DATA_OPTION
@click.option("--date", "date_str", default=None,
              help="Plan for bookings scheduled on this date (ISO).")
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None)
@click.pass_context
def analytics_plan(ctx, data_dir: Path, date_str, out_path):
    """Cluster open bookings and assign tractors."""
    try:
        network = _load_network(data_dir)
        on_date = date.fromisoformat(date_str) if date_str else None
        clusters, assignment = network.assignment_plan(on_date)
        payload = {"clusters": clusters.to_dict(),
                   "assignment": assignment.to_dict()}
        if out_path:
            Path(out_path).write_text(json.dumps(payload, indent=2))
        _emit(ctx, payload,
              f"{len(clusters.clusters)} clusters, "
              f"{len(assignment.assignments)} assignments, "
              f"total cost {assignment.total_cost:.2f}")
    except AdwError as exc:
        _fail(exc)


@analytics.command("utilization")
@DATA_OPTION
@click.option("--tractor", "tractor_id", required=True)
@click.option("--from", "from_str", required=True)
@click.option("--to", "to_str", required=True)
@click.pass_context
def analytics_utilization(ctx, data_dir: Path, tractor_id, from_str, to_str):
    """Utilization report for a tractor over a period."""
    try:
        network = _load_network(data_dir)
        report = network.utilization(tractor_id, date.fromisoformat(from_str),
                                     date.fromisoformat(to_str))
        _emit(ctx, report.to_dict(),
              f"{tractor_id}: {report.farms_served} farms, "
              f"{report.farms_per_day:.1f} farms/day, "
              f"revenue {report.revenue:.2f}")
    except AdwError as exc:
        _fail(exc)


# -- bench ----------------------------------------------------------------------------

@main.command()
@click.option("--rates", default="20:200:20", show_default=True,
              help="start:stop:step or comma-separated list.")
@click.option("--block-sizes", default="10,30,50,70", show_default=True)
@click.option("--timeout-ms", default=500, show_default=True)
@click.option("--clients", default=25, show_default=True)
@click.option("--txs-per-rate", default=1000, show_default=True)
@click.option("--seed", default=1, show_default=True)
@click.option("--out", "out_path", default="bench.csv", show_default=True,
              type=click.Path(path_type=Path))
@click.option("--summary-json", "summary_path", default=None,
              type=click.Path(path_type=Path),
              help="Also write a per-curve summary JSON.")
@click.option("--figures/--no-figures", default=True, show_default=True,
              help="Render throughput/latency PNGs beside the CSV.")
@click.option("--run-id", default=None, help="Run id for the summary registry.")
@click.option("--runs-dir", default=None, type=click.Path(path_type=Path),
              help="Directory where summaries are registered for the gateway.")
@click.pass_context
def bench(ctx, rates, block_sizes, timeout_ms, clients, txs_per_rate, seed,
          out_path: Path, summary_path, figures, run_id, runs_dir):
    """Sweep send rates and block sizes; export CSV (+ figures)."""
    from .bench import (CostModel, WorkloadSpec, export_csv, run_benchmark,
                        summarize, write_summary)
    try:
        if ":" in rates:
            start, stop, step = (int(x) for x in rates.split(":"))
            send_rates = tuple(range(start, stop + 1, step))
        else:
            send_rates = tuple(int(x) for x in rates.split(","))
        sizes = tuple(int(x) for x in block_sizes.split(","))
        spec = WorkloadSpec(send_rates=send_rates, block_sizes=sizes,
                            block_timeout_ms=timeout_ms, clients=clients,
                            txs_per_rate=txs_per_rate)
        cost_model = CostModel()
        metrics = run_benchmark(spec, cost_model, seed=seed)
        export_csv(metrics, out_path)
        written = [str(out_path)]
        if figures:
            from .report import render_bench_figures
            written += [str(p) for p in render_bench_figures(metrics, out_path)]
        summary = summarize(metrics, spec, cost_model, seed, run_id=run_id)
        if summary_path:
            write_summary(summary, summary_path)
            written.append(str(summary_path))
        if runs_dir:
            runs_dir = Path(runs_dir)
            runs_dir.mkdir(parents=True, exist_ok=True)
            registry_path = runs_dir / f"{summary['run_id']}.json"
            write_summary(summary, registry_path)
            written.append(str(registry_path))
        _emit(ctx, {"written": written, "rows": len(metrics),
                    "curves": summary["curves"]},
              "wrote " + ", ".join(written))
    except (AdwError, ValueError) as exc:
        if isinstance(exc, AdwError):
            _fail(exc)
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


# -- serve ----------------------------------------------------------------------------

@main.command()
@DATA_OPTION
@click.option("--config", "config_path", type=click.Path(path_type=Path),
              default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=None, type=int)
@click.option("--demo-seed", default=None, type=int,
              help="Serve an in-memory demo network instead of loading state.")
def serve(data_dir: Path, config_path, host, port, demo_seed):
    """Run the HTTP gateway."""
    from .gateway import serve as run_server
    from .network import Network, NetworkConfig
    try:
        if demo_seed is not None:
            config = NetworkConfig.from_file(config_path) if config_path else None
            network = Network(config)
            network.seed_demo(seed=demo_seed)
        else:
            network = _load_network(data_dir)
        click.echo(f"gateway listening on http://{host}:{port or network.config.port}")
        run_server(network, host=host, port=port)
    except AdwError as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
