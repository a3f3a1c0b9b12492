"""Command line interface.

Subcommands: synth, train, eval, ingest, extract, rewrite, serve. Errors exit
nonzero with a machine-readable JSON object on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .engine import Engine, EngineConfig
from .flows import read_flow_log, read_labels, serialize_flow_record
from .report import write_report
from .rewriter import read_rules, rewrite
from .synth import CorpusSpec, default_spec, generate
from .tokenizer import prepare_flow


def _fail(code: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": code, "message": message}) + "\n")
    return 2


def _load_config(path: str | None) -> EngineConfig:
    if path:
        return EngineConfig.load(path)
    return EngineConfig()


def _load_corpus(engine: Engine, flows_path: str, labels_path: str | None) -> int:
    with open(flows_path, encoding="utf-8") as handle:
        flows = [prepare_flow(f, engine.config.tokenizer) for f in read_flow_log(handle)]
    truths = {}
    if labels_path:
        with open(labels_path, encoding="utf-8") as handle:
            for label in read_labels(handle):
                truths[label.flow_id] = label
    engine.load_corpus(flows, truths)
    return len(flows)


def cmd_synth(args) -> int:
    if args.spec:
        spec = CorpusSpec.from_json(json.loads(Path(args.spec).read_text(encoding="utf-8")))
    else:
        spec = default_spec(seed=args.seed)
    flow_lines, label_lines = generate(spec)
    Path(args.flows).write_text("\n".join(flow_lines) + "\n", encoding="utf-8")
    Path(args.labels).write_text("\n".join(label_lines) + "\n", encoding="utf-8")
    print(json.dumps({"flows": len(flow_lines), "flows_file": args.flows,
                      "labels_file": args.labels}))
    return 0


def cmd_train(args) -> int:
    engine = Engine(_load_config(args.config))
    n = _load_corpus(engine, args.flows, args.labels)
    trained = engine.train()
    out = {"flows": n, "classifiers": trained}
    if args.models:
        out["written"] = engine.save_models(args.models)
    print(json.dumps(out, indent=1))
    return 0


def cmd_eval(args) -> int:
    engine = Engine(_load_config(args.config))
    n = _load_corpus(engine, args.flows, args.labels)
    metrics = engine.evaluate(args.kfold)
    result = {"flows": n, "kfold": args.kfold, "metrics": metrics}
    if args.out:
        result["report"] = write_report(metrics, args.out)
    print(json.dumps(result, indent=1))
    return 0


def cmd_ingest(args) -> int:
    engine = Engine(_load_config(args.config))
    if args.models:
        engine.load_models(args.models)
    elif args.train_flows:
        _load_corpus(engine, args.train_flows, args.train_labels)
        engine.train()
    results = []
    with open(args.file, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            prediction, outcome = engine.ingest_line(line)
            row = prediction.to_json()
            row["outcome"] = {"decision": outcome.decision.value,
                              "applied_rules": outcome.applied_rules}
            results.append(row)
    print(json.dumps({"ingested": len(results), "results": results}, indent=1))
    return 0


def cmd_extract(args) -> int:
    engine = Engine(_load_config(args.config))
    if args.models:
        engine.load_models(args.models)
    elif args.train_flows:
        _load_corpus(engine, args.train_flows, args.train_labels)
        engine.train()
    rows = []
    with open(args.file, encoding="utf-8") as handle:
        for flow in read_flow_log(handle):
            prepare_flow(flow, engine.config.tokenizer)
            prediction = engine.registry.classify_flow(flow)
            rows.append(prediction.to_json())
    print(json.dumps({"results": rows}, indent=1))
    return 0


def cmd_rewrite(args) -> int:
    engine = Engine(_load_config(args.config))
    if args.models:
        engine.load_models(args.models)
    elif args.train_flows:
        _load_corpus(engine, args.train_flows, args.train_labels)
        engine.train()
    with open(args.rules, encoding="utf-8") as handle:
        rules = read_rules(handle)
    out_lines = []
    summary = {"pass": 0, "blocked": 0, "modified": 0}
    with open(args.file, encoding="utf-8") as handle:
        for flow in read_flow_log(handle):
            prepare_flow(flow, engine.config.tokenizer)
            prediction = engine.registry.classify_flow(flow)
            outcome = rewrite(flow, prediction, rules)
            summary[outcome.decision.value] += 1
            if outcome.decision.value == "blocked":
                continue
            emitted = outcome.modified_flow if outcome.modified_flow is not None else flow
            out_lines.append(serialize_flow_record(emitted))
    if args.out:
        Path(args.out).write_text("\n".join(out_lines) + ("\n" if out_lines else ""),
                                  encoding="utf-8")
    print(json.dumps({"summary": summary, "out": args.out}))
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    config = _load_config(args.config)
    engine = Engine(config)
    if args.models:
        engine.load_models(args.models)
    if args.flows:
        _load_corpus(engine, args.flows, args.labels)
        if not args.models:
            engine.train()
    serve(config, host=args.host, port=args.port, engine=engine, ui_dir=args.ui)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="leakwatch",
                                     description="PII leak detection and control engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a labeled synthetic corpus")
    p.add_argument("--spec", help="corpus spec JSON (defaults to the built-in corpus)")
    p.add_argument("--seed", type=int, default=1276)
    p.add_argument("--flows", default="flows.jsonl")
    p.add_argument("--labels", default="labels.jsonl")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train classifiers from a labeled corpus")
    p.add_argument("flows")
    p.add_argument("labels")
    p.add_argument("--config")
    p.add_argument("--models", help="directory to write the model bundle")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="k-fold evaluation with optional report output")
    p.add_argument("flows")
    p.add_argument("labels")
    p.add_argument("--kfold", type=int, default=10)
    p.add_argument("--config")
    p.add_argument("--out", help="directory for metrics.csv/json and figures")
    p.set_defaults(func=cmd_eval)

    for name, func, help_text in (
        ("ingest", cmd_ingest, "classify a flow log and apply rules"),
        ("extract", cmd_extract, "classify + extract leaking key/value pairs"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("file")
        p.add_argument("--config")
        p.add_argument("--models", help="model bundle directory")
        p.add_argument("--train-flows", help="train ad hoc from this corpus instead")
        p.add_argument("--train-labels")
        p.set_defaults(func=func)

    p = sub.add_parser("rewrite", help="apply rewrite rules to a flow log")
    p.add_argument("file")
    p.add_argument("--rules", required=True)
    p.add_argument("--out", help="write surviving flows here")
    p.add_argument("--config")
    p.add_argument("--models")
    p.add_argument("--train-flows")
    p.add_argument("--train-labels")
    p.set_defaults(func=cmd_rewrite)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config")
    p.add_argument("--models")
    p.add_argument("--flows", help="labeled corpus to train on at startup")
    p.add_argument("--labels")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--ui", help="directory with the built web UI to serve at /")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        return _fail("file_not_found", str(exc))
    except (ValueError, KeyError) as exc:
        return _fail("invalid_input", str(exc))


if __name__ == "__main__":
    sys.exit(main())
