"""Command-line entry point.

Every artifact-producing subcommand works inside a run directory
(runs/<run_id>/) and records a manifest with the config hash, seed, provider
identity, and timestamps. Run ids default to a hash of the resolved semantic
settings, so identical configurations land in the same directory and
reproduce byte-identical artifacts.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import click

from . import kb as kbmod
from . import metrics as metricsmod
from . import reporting, retrieval, training
from .embedders import HashingEmbedder, HTTPEmbedder
from .generate import generate_batch, generate_one_to_one
from .prompts import ONE_TO_ONE, TEMPLATE_IDS
from .providers import HTTPCompletionProvider, MockProvider, SamplingParams

ENV_PROVIDER_URL = "SQG_PROVIDER_URL"
ENV_PROVIDER_TOKEN = "SQG_PROVIDER_TOKEN"
ENV_EMBED_URL = "SQG_EMBED_URL"


class ConfigError(Exception):
    pass


def _utcnow() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        config = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("config file must hold a JSON object")
    return config


def _cfg(config: dict, dotted: str, flag_value, default=None):
    """Resolve one setting: explicit flag wins, then config, then default."""
    if flag_value is not None:
        return flag_value
    node = config
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            return default
        node = node[part]
    return node


def _config_hash(settings: dict) -> str:
    canonical = json.dumps(settings, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _fail(command: str, exc: Exception, code: int) -> None:
    report = {"error": {"command": command, "type": type(exc).__name__, "message": str(exc)}}
    click.echo(json.dumps(report, ensure_ascii=False), err=True)
    sys.exit(code)


def _require_path(command: str, label: str, value: str | None) -> Path:
    if not value:
        _fail(command, ConfigError(f"missing required setting: {label}"), 2)
    path = Path(value)
    if not path.exists():
        _fail(command, ConfigError(f"{label} does not exist: {value}"), 2)
    return path


def _build_provider(config: dict, provider_type: str | None, url: str | None,
                    token: str | None, script: str | None, env: dict):
    ptype = _cfg(config, "provider.type", provider_type, "mock")
    if ptype == "mock":
        script = _cfg(config, "provider.script", script)
        if not script:
            raise ConfigError("mock provider requires a script path")
        script_path = Path(script)
        if not script_path.exists():
            raise ConfigError(f"mock provider script not found: {script}")
        return MockProvider.from_script(script_path)
    if ptype == "http":
        url = _cfg(config, "provider.url", url) or env.get(ENV_PROVIDER_URL)
        token = _cfg(config, "provider.token", token) or env.get(ENV_PROVIDER_TOKEN)
        if not url:
            raise ConfigError(f"http provider requires a URL (flag, config, or {ENV_PROVIDER_URL})")
        return HTTPCompletionProvider(url, token=token)
    raise ConfigError(f"unknown provider type: {ptype!r}")


def _build_embedder(config: dict, embedder_type: str | None, url: str | None,
                    dim: int | None, env: dict):
    etype = _cfg(config, "embedder.type", embedder_type, "hash")
    if etype == "hash":
        return HashingEmbedder(dim=_cfg(config, "embedder.dim", dim, 64))
    if etype == "http":
        url = _cfg(config, "embedder.url", url) or env.get(ENV_EMBED_URL)
        if not url:
            raise ConfigError(f"http embedder requires a URL (flag, config, or {ENV_EMBED_URL})")
        return HTTPEmbedder(url)
    raise ConfigError(f"unknown embedder type: {etype!r}")


def _update_manifest(run_dir: Path, run_id: str, command: str, section: dict) -> None:
    manifest_path = run_dir / "manifest.json"
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    else:
        manifest = {"run_id": run_id, "created_at": _utcnow(), "commands": {}}
    manifest["commands"][command] = section
    manifest_path.write_text(
        json.dumps(manifest, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )


@click.group()
@click.option("--config", "config_path", type=str, default=None, help="JSON config file; flags override it.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None) -> None:
    """Similar-question generation toolkit."""
    ctx.ensure_object(dict)
    try:
        ctx.obj["config"] = _load_config(config_path)
    except ConfigError as exc:
        _fail("config", exc, 2)


@main.command()
@click.option("--input", "input_path", type=str, default=None, help="Raw QA records (jsonl or csv).")
@click.option("--format", "fmt", type=click.Choice(["jsonl", "csv"]), default=None)
@click.option("--out", "out_path", type=str, default=None, help="Canonical KB JSONL to write.")
@click.option("--name", type=str, default=None, help="KB name stored in metadata.")
@click.pass_context
def ingest(ctx, input_path, fmt, out_path, name):
    """Ingest raw QA pairs into a validated knowledge base."""
    config = ctx.obj["config"]
    src = _require_path("ingest", "input", _cfg(config, "paths.input", input_path))
    fmt = _cfg(config, "ingest.format", fmt, "jsonl")
    out = _cfg(config, "paths.kb", out_path)
    if not out:
        _fail("ingest", ConfigError("missing required setting: out"), 2)
    try:
        kb = kbmod.ingest_qa_pairs(src, fmt=fmt)
        if name:
            kb.meta.name = name
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        kbmod.save_kb(kb, out)
    except Exception as exc:
        _fail("ingest", exc, 1)
    total_q = sum(len(p.questions) for p in kb.pairs)
    click.echo(f"ingested {len(kb.pairs)} pair(s), {total_q} question(s) -> {out}")


@main.command("build-train")
@click.option("--kb", "kb_path", type=str, default=None)
@click.option("--paradigm", type=click.Choice(list(TEMPLATE_IDS)), default=None)
@click.option("--targets", "targets_per_sample", type=int, default=None, help="Targets per batch sample.")
@click.option("--samples-per-pair", type=str, default=None, help="Integer or 'all' (one_to_one only).")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_path", type=str, default=None, help="Fine-tune JSONL to write.")
@click.pass_context
def build_train(ctx, kb_path, paradigm, targets_per_sample, samples_per_pair, seed, out_path):
    """Construct and export fine-tuning samples."""
    config = ctx.obj["config"]
    kb_file = _require_path("build-train", "kb", _cfg(config, "paths.kb", kb_path))
    paradigm = _cfg(config, "train.paradigm", paradigm)
    if paradigm not in TEMPLATE_IDS:
        _fail("build-train", ConfigError(f"paradigm must be one of {TEMPLATE_IDS}"), 2)
    targets = _cfg(config, "train.targets_per_sample", targets_per_sample,
                   training.DEFAULT_TARGETS_PER_SAMPLE)
    spp_raw = _cfg(config, "train.samples_per_pair", samples_per_pair,
                   training.DEFAULT_SAMPLES_PER_PAIR)
    if isinstance(spp_raw, str):
        if spp_raw == "all":
            spp = None
        else:
            try:
                spp = int(spp_raw)
            except ValueError:
                _fail("build-train", ConfigError(f"samples-per-pair must be an int or 'all', got {spp_raw!r}"), 2)
    else:
        spp = spp_raw
    seed = _cfg(config, "seed", seed, 0)
    out = _cfg(config, "train.out", out_path)
    if not out:
        _fail("build-train", ConfigError("missing required setting: out"), 2)
    try:
        kb = kbmod.load_kb(kb_file)
        samples = training.build_training_samples(
            kb, paradigm, targets_per_sample=targets, samples_per_pair=spp, seed=seed
        )
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        training.export_finetune_jsonl(samples, out)
    except Exception as exc:
        _fail("build-train", exc, 1)
    click.echo(f"wrote {len(samples)} training sample(s) -> {out}")


@main.command()
@click.option("--kb", "kb_path", type=str, default=None)
@click.option("--mode", type=click.Choice(list(TEMPLATE_IDS)), default=None)
@click.option("--n", "n_questions", type=int, default=None, help="Unique questions per pair.")
@click.option("--k", "k_per_call", type=int, default=None, help="Questions requested per call.")
@click.option("--seed", type=int, default=None)
@click.option("--temperature", type=float, default=None)
@click.option("--top-k", "top_k", type=int, default=None)
@click.option("--max-tokens", type=int, default=None)
@click.option("--pair-id", "pair_ids", multiple=True, help="Limit generation to these pairs.")
@click.option("--provider", "provider_type", type=click.Choice(["mock", "http"]), default=None)
@click.option("--provider-url", type=str, default=None)
@click.option("--provider-token", type=str, default=None)
@click.option("--script", type=str, default=None, help="Mock provider script (JSONL).")
@click.option("--runs", "runs_dir", type=str, default=None, help="Runs root directory.")
@click.option("--run-id", type=str, default=None)
@click.option("--out-kb", type=str, default=None, help="Also write the KB with candidates attached.")
@click.pass_context
def generate(ctx, kb_path, mode, n_questions, k_per_call, seed, temperature, top_k,
             max_tokens, pair_ids, provider_type, provider_url, provider_token, script,
             runs_dir, run_id, out_kb):
    """Generate candidate questions for every pair via a completion provider."""
    config = ctx.obj["config"]
    kb_file = _require_path("generate", "kb", _cfg(config, "paths.kb", kb_path))
    mode = _cfg(config, "generate.mode", mode, "intention_enhanced")
    if mode not in TEMPLATE_IDS:
        _fail("generate", ConfigError(f"mode must be one of {TEMPLATE_IDS}"), 2)
    n = _cfg(config, "generate.n", n_questions, 20)
    k = _cfg(config, "generate.k_per_call", k_per_call, 20)
    seed = _cfg(config, "seed", seed, 0)
    temperature = _cfg(config, "sampling.temperature", temperature, 0.9)
    top_k = _cfg(config, "sampling.top_k", top_k, 5)
    max_tokens = _cfg(config, "sampling.max_tokens", max_tokens, 512)
    runs_root = Path(_cfg(config, "paths.runs", runs_dir, "runs"))
    if n < 1 or k < 1:
        _fail("generate", ConfigError("--n and --k must be >= 1"), 2)

    try:
        provider = _build_provider(config, provider_type, provider_url, provider_token,
                                   script, dict(os.environ))
    except ConfigError as exc:
        _fail("generate", exc, 2)

    settings = {
        "command": "generate",
        "mode": mode,
        "n": n,
        "k_per_call": k,
        "seed": seed,
        "sampling": {"temperature": temperature, "top_k": top_k, "max_tokens": max_tokens},
        "provider": provider.provider_id,
        "pair_ids": sorted(pair_ids),
    }
    config_hash = _config_hash(settings)
    run_id = _cfg(config, "run_id", run_id, f"run-{config_hash[:12]}")
    run_dir = runs_root / run_id
    started = _utcnow()

    try:
        kb = kbmod.load_kb(kb_file)
        params = SamplingParams(temperature=temperature, top_k=top_k,
                                max_tokens=max_tokens, seed=seed)
        targets = [kb.pair(pid) for pid in pair_ids] if pair_ids else kb.pairs
        run_dir.mkdir(parents=True, exist_ok=True)
        batches = []
        for pair in targets:
            if mode == ONE_TO_ONE:
                batch = generate_one_to_one(provider, pair.source_question, n,
                                            params=params, pair_id=pair.pair_id)
            else:
                batch = generate_batch(provider, pair, n, mode, k_per_call=k, params=params)
            batches.append(batch)
        with (run_dir / "batches.jsonl").open("w", encoding="utf-8", newline="\n") as fh:
            for batch in batches:
                record = {"run_id": run_id, **batch.to_record()}
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")
        if out_kb:
            expanded = kb
            for batch in batches:
                expanded = kbmod.attach_generated(expanded, batch.pair_id, batch)
            kbmod.save_kb(expanded, out_kb)
    except Exception as exc:
        _fail("generate", exc, 1)

    _update_manifest(run_dir, run_id, "generate", {
        "config_hash": config_hash,
        "seed": seed,
        "provider": provider.provider_id,
        "started_at": started,
        "completed_at": _utcnow(),
        "artifacts": ["batches.jsonl"],
        "settings": settings,
    })
    total = sum(len(b.questions) for b in batches)
    underfilled = sum(1 for b in batches if b.underfilled)
    click.echo(
        f"run {run_id}: {total} question(s) across {len(batches)} pair(s)"
        + (f", {underfilled} underfilled" if underfilled else "")
    )


@main.command()
@click.option("--kb", "kb_path", type=str, default=None)
@click.option("--run", "run_dir", type=str, default=None, help="Run directory with batches.jsonl.")
@click.option("--counts", type=str, default=None, help="Comma-separated generation counts.")
@click.option("--embedder", "embedder_type", type=click.Choice(["hash", "http"]), default=None)
@click.option("--embed-url", type=str, default=None)
@click.option("--dim", type=int, default=None, help="Hash embedder dimension.")
@click.pass_context
def evaluate(ctx, kb_path, run_dir, counts, embedder_type, embed_url, dim):
    """Score a generation run and write metrics.json plus the metric curve CSV."""
    config = ctx.obj["config"]
    kb_file = _require_path("evaluate", "kb", _cfg(config, "paths.kb", kb_path))
    run_path = _require_path("evaluate", "run", _cfg(config, "paths.run", run_dir))
    batches_path = run_path / "batches.jsonl"
    if not batches_path.exists():
        _fail("evaluate", ConfigError(f"no batches.jsonl under {run_path}"), 2)
    counts_raw = _cfg(config, "evaluate.counts", counts, "10,20,30,40,50,60,70,80,90,100")
    if isinstance(counts_raw, str):
        try:
            count_list = [int(c) for c in counts_raw.split(",") if c.strip()]
        except ValueError:
            _fail("evaluate", ConfigError(f"bad counts: {counts_raw!r}"), 2)
    else:
        count_list = [int(c) for c in counts_raw]
    if not count_list or any(c < 1 for c in count_list):
        _fail("evaluate", ConfigError("counts must be positive integers"), 2)

    try:
        embedder = _build_embedder(config, embedder_type, embed_url, dim, dict(os.environ))
    except ConfigError as exc:
        _fail("evaluate", exc, 2)

    started = _utcnow()
    try:
        kb = kbmod.load_kb(kb_file)
        generated: dict[str, list[str]] = {}
        run_id = run_path.name
        seed = None
        with batches_path.open("r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                run_id = record.get("run_id", run_id)
                seed = record.get("sampling", {}).get("seed", seed)
                generated.setdefault(record["pair_id"], []).extend(record["questions"])
        references = {pid: list(kb.pair(pid).questions) for pid in generated}
        reports = metricsmod.evaluate_run(generated, references, embedder, count_list)
        for report in reports:
            report.metadata["run_id"] = run_id
            if seed is not None:
                report.metadata["seed"] = seed
        reporting.write_metrics_json(reports, run_path / "metrics.json", run_id)
        reporting.write_curve_csv(reports, run_path / "curve.csv", run_id)
    except Exception as exc:
        _fail("evaluate", exc, 1)

    settings = {"command": "evaluate", "counts": count_list, "embedder": embedder.embedder_id}
    _update_manifest(run_path, run_id, "evaluate", {
        "config_hash": _config_hash(settings),
        "seed": seed,
        "embedder": embedder.embedder_id,
        "started_at": started,
        "completed_at": _utcnow(),
        "artifacts": ["metrics.json", "curve.csv"],
        "settings": settings,
    })
    click.echo(f"evaluated {len(generated)} pair(s) at counts {count_list} -> {run_path}")


@main.command()
@click.option("--kb", "kb_path", type=str, default=None)
@click.option("--queries", "queries_path", type=str, default=None, help="Labeled queries JSONL.")
@click.option("--conditions", type=str, default=None, help="Comma-separated index conditions.")
@click.option("--embedder", "embedder_type", type=click.Choice(["hash", "http"]), default=None)
@click.option("--embed-url", type=str, default=None)
@click.option("--dim", type=int, default=None)
@click.option("--runs", "runs_dir", type=str, default=None)
@click.option("--run-id", type=str, default=None)
@click.pass_context
def simulate(ctx, kb_path, queries_path, conditions, embedder_type, embed_url, dim,
             runs_dir, run_id):
    """Measure retrieval top-1 accuracy across knowledge-base expansion conditions."""
    config = ctx.obj["config"]
    kb_file = _require_path("simulate", "kb", _cfg(config, "paths.kb", kb_path))
    queries_file = _require_path("simulate", "queries", _cfg(config, "paths.queries", queries_path))
    conditions_raw = _cfg(config, "simulate.conditions", conditions, "none,accepted_only,all")
    condition_list = [c.strip() for c in conditions_raw.split(",") if c.strip()] \
        if isinstance(conditions_raw, str) else list(conditions_raw)
    for c in condition_list:
        if c not in retrieval.INCLUDE_MODES:
            _fail("simulate", ConfigError(f"unknown condition {c!r}"), 2)
    runs_root = Path(_cfg(config, "paths.runs", runs_dir, "runs"))

    try:
        embedder = _build_embedder(config, embedder_type, embed_url, dim, dict(os.environ))
    except ConfigError as exc:
        _fail("simulate", exc, 2)

    settings = {"command": "simulate", "conditions": condition_list,
                "embedder": embedder.embedder_id}
    config_hash = _config_hash(settings)
    run_id = _cfg(config, "run_id", run_id, f"sim-{config_hash[:12]}")
    run_dir = runs_root / run_id
    started = _utcnow()

    try:
        kb = kbmod.load_kb(kb_file)
        queries = retrieval.load_queries(queries_file)
        result = retrieval.run_experiment(kb, embedder, queries, condition_list)
        run_dir.mkdir(parents=True, exist_ok=True)
        retrieval.write_accuracy_csv(result, run_dir / "accuracy.csv", run_id=run_id)
        (run_dir / "simulate.json").write_text(
            json.dumps(
                {"run_id": run_id, "manifest": "manifest.json",
                 "rows": result.rows, "per_pair": result.per_pair},
                ensure_ascii=False, indent=2,
            ) + "\n",
            encoding="utf-8",
        )
    except Exception as exc:
        _fail("simulate", exc, 1)

    _update_manifest(run_dir, run_id, "simulate", {
        "config_hash": config_hash,
        "seed": None,
        "embedder": embedder.embedder_id,
        "started_at": started,
        "completed_at": _utcnow(),
        "artifacts": ["accuracy.csv", "simulate.json"],
        "settings": settings,
    })
    for row in result.rows:
        click.echo(f"{row['condition']}: top-1 accuracy {row['top1_accuracy']:.3f} "
                   f"over {row['n_queries']} query(ies)")


@main.command("review-serve")
@click.option("--kb", "kb_path", type=str, default=None)
@click.option("--runs", "runs_dir", type=str, default=None)
@click.option("--host", type=str, default="127.0.0.1")
@click.option("--port", type=int, default=8321)
@click.pass_context
def review_serve(ctx, kb_path, runs_dir, host, port):
    """Serve the expert-review REST API over a runs directory."""
    config = ctx.obj["config"]
    kb_file = _require_path("review-serve", "kb", _cfg(config, "paths.kb", kb_path))
    runs_root = _require_path("review-serve", "runs", _cfg(config, "paths.runs", runs_dir))
    try:
        import uvicorn

        from .review import ReviewStore
        from .review_api import create_app

        store = ReviewStore(runs_root, kb=kbmod.load_kb(kb_file))
        app = create_app(store)
    except Exception as exc:
        _fail("review-serve", exc, 1)
    click.echo(f"review service on http://{host}:{port} (runs: {runs_root})")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.option("--run", "run_dir", type=str, default=None, help="Run directory with metrics.json.")
@click.option("--label", type=str, default=None, help="Row label; defaults to the run id.")
@click.pass_context
def report(ctx, run_dir, label):
    """Render the metrics table and refresh the curve CSV for a run."""
    config = ctx.obj["config"]
    run_path = _require_path("report", "run", _cfg(config, "paths.run", run_dir))
    metrics_path = run_path / "metrics.json"
    if not metrics_path.exists():
        _fail("report", ConfigError(f"no metrics.json under {run_path}"), 2)
    try:
        payload = reporting.load_metrics_json(metrics_path)
        run_id = payload.get("run_id", run_path.name)
        reports = [
            metricsmod.MetricsReport(
                precision=r["precision"],
                recall=r["recall"],
                f1=r["f1"],
                distinct_1=r["distinct_1"],
                distinct_2=r["distinct_2"],
                distinct_avg=r["distinct_avg"],
                generated_count=r["generated_count"],
                acceptance_ratio=r.get("acceptance_ratio"),
                metadata=r.get("metadata", {}),
            )
            for r in payload.get("reports", [])
        ]
        base = label or run_id
        rows = [(f"{base}@n={r.generated_count}", r) for r in reports]
        table = reporting.render_metrics_table(rows)
        (run_path / "report.txt").write_text(table, encoding="utf-8")
        (run_path / "report.json").write_text(
            json.dumps(
                {"run_id": run_id, "manifest": "manifest.json",
                 "rows": [dict(label=lbl, **r.to_record()) for lbl, r in rows]},
                ensure_ascii=False, indent=2,
            ) + "\n",
            encoding="utf-8",
        )
        if not (run_path / "curve.csv").exists():
            reporting.write_curve_csv(reports, run_path / "curve.csv", run_id)
    except Exception as exc:
        _fail("report", exc, 1)
    click.echo(table, nl=False)


if __name__ == "__main__":
    main()
