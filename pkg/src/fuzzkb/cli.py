"""Command-line harness: bootstrap, integrate, evaluate, compare, synth.

Exit codes: 0 success, 1 usage error, 2 data/parse error, 3 config invariant
violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import statistics
import sys
import tempfile
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .bootstrap import bootstrap_sources
from .core import SchemaError, accuracy, check_compatible, correct_count, dumps_kb, loads_kb
from .data import DataFormatError, DatasetFormat, impute_policy, load_dataset, schema_path_for
from .evolution import ConfigError, EvolutionConfig, integrate, run_baseline_ga

log = logging.getLogger("fuzzkb")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CONFIG = 0, 1, 2, 3

RUN_COLUMNS = ["t", "best_fitness", "best_accuracy", "best_complexity", "best_rule_count",
               "mean_fitness"]
MF_COLUMNS = ["feature", "linguistic_value", "left", "apex", "right", "half_width"]
COMPARE_COLUMNS = ["seed", "method", "final_accuracy", "final_fitness",
                   "generations_to_reach_target"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# file helpers


def write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_json(path: Path, doc) -> None:
    write_atomic(path, json.dumps(doc, indent=1) + "\n")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from None


# --------------------------------------------------------------------------
# shared pieces


def _load(fmt, path, *, schema=None, num_linguistic=3, margin=0.0, impute="keep_missing"):
    options = {"num_linguistic": num_linguistic, "margin": margin}
    if schema:
        options["schema"] = schema
    return impute_policy(load_dataset(fmt, path, options), impute)


def _load_from_manifest(manifest: dict):
    data = _load(manifest["format"], manifest["data"], schema=manifest.get("schema_file"),
                 num_linguistic=manifest["num_linguistic"], margin=manifest["margin"],
                 impute=manifest.get("impute", "keep_missing"))
    base = Path(manifest["_dir"])
    sources = [loads_kb((base / name).read_text()) for name in manifest["sources"]]
    for kb in sources:
        check_compatible(kb, data)
    return sources, data


def _read_manifest(path) -> dict:
    manifest = read_json(path)
    manifest["_dir"] = str(Path(path).resolve().parent)
    for key in ("format", "data", "sources", "num_linguistic", "margin"):
        if key not in manifest:
            raise DataFormatError(f"manifest {path} lacks {key!r}")
    return manifest


def _config(args) -> EvolutionConfig:
    values = read_json(args.config) if args.config else {}
    if not isinstance(values, dict):
        raise ConfigError("config", "must be a flat JSON object")
    cfg = EvolutionConfig.from_dict(values)
    for name in ("mu", "subpops", "generations", "alpha", "p_mf_mutation", "tvm_degree",
                 "p_insert", "p_delete", "max_rules", "seed"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    if getattr(args, "lambda_range", None) is not None:
        cfg.lambda_range = tuple(args.lambda_range)
    return cfg.validate()


def _fmt(x: float) -> str:
    return repr(float(x))


# --------------------------------------------------------------------------
# commands


def cmd_bootstrap(args) -> int:
    data = _load(args.format, args.data, schema=args.schema, num_linguistic=args.linguistic,
                 margin=args.margin, impute=args.impute)
    if args.sources < 1:
        raise UsageError("--sources must be >= 1")
    sources = bootstrap_sources(data, args.sources, args.seed)
    out = Path(args.out)
    names = []
    for i, kb in enumerate(sources):
        name = f"source_{i}.json"
        write_atomic(out / name, dumps_kb(kb) + "\n")
        names.append(name)
    schema_file = args.schema
    if DatasetFormat.parse(args.format) is DatasetFormat.GENERIC and not schema_file:
        schema_file = str(schema_path_for(args.data))
    manifest = {
        "format": DatasetFormat.parse(args.format).value,
        "data": str(Path(args.data).resolve()),
        "schema_file": str(Path(schema_file).resolve()) if schema_file else None,
        "seed": args.seed,
        "num_linguistic": args.linguistic,
        "margin": args.margin,
        "impute": args.impute,
        "sources": names,
        "source_rule_counts": [len(kb.rules) for kb in sources],
        "features": [f.name for f in data.features],
        "classes": list(data.classes),
        "bounds": {f.name: [f.lower, f.upper] for f in data.features if f.is_numeric},
    }
    write_json(out / "manifest.json", manifest)
    log.info("wrote %d sources with %s rules to %s", len(sources),
             manifest["source_rule_counts"], out)
    return EXIT_OK


def mf_plot_rows(kb):
    for f, part in zip(kb.numeric_features, kb.partitions):
        for j, m in enumerate(part):
            yield [f.name, j, _fmt(m.center - m.half_width), _fmt(m.center),
                   _fmt(m.center + m.half_width), _fmt(m.half_width)]


def cmd_integrate(args) -> int:
    cfg = _config(args)
    manifest = _read_manifest(args.manifest)
    sources, data = _load_from_manifest(manifest)
    out = Path(args.out)

    def progress(s):
        if s.generation % 50 == 0 or s.generation == cfg.generations:
            log.info("t=%d best_fitness=%.6f accuracy=%.4f rules=%d", s.generation,
                     s.best_fitness, s.best_accuracy, s.best_rule_count)

    result = integrate(sources, data, cfg, on_generation=progress)
    rows = [[s.generation, _fmt(s.best_fitness), _fmt(s.best_accuracy),
             _fmt(s.best_complexity), s.best_rule_count, _fmt(s.mean_fitness)]
            for s in result.history]
    write_atomic(out / "run.csv", csv_text(RUN_COLUMNS, rows))
    write_atomic(out / "best_kb.json", dumps_kb(result.best) + "\n")
    write_atomic(out / "mf_plot.csv", csv_text(MF_COLUMNS, mf_plot_rows(result.best)))
    write_json(out / "run_meta.json", {
        "version": __version__,
        "manifest": str(Path(args.manifest).resolve()),
        "dataset": manifest["format"],
        "config": cfg.to_dict(),
        "source_rule_counts": [len(kb.rules) for kb in sources],
        "final": {"accuracy": result.best_report.accuracy,
                  "complexity": result.best_report.complexity,
                  "fitness": result.best_report.fitness,
                  "rule_count": len(result.best.rules)},
    })
    return EXIT_OK


def cmd_evaluate(args) -> int:
    data = _load(args.format, args.data, schema=args.schema)
    try:
        kb = loads_kb(Path(args.kb).read_text())
    except OSError as exc:
        raise DataFormatError(str(exc)) from None
    check_compatible(kb, data)
    matched = correct_count(kb.compiled, data)
    print(json.dumps({"accuracy": accuracy(kb, data), "matched": matched, "total": len(data)}))
    return EXIT_OK


def generations_to_target(history, target: float) -> Optional[int]:
    for s in history:
        if s.best_fitness >= target:
            return s.generation
    return None


def cmd_compare(args) -> int:
    cfg = _config(args)
    sources, data = _load_from_manifest(_read_manifest(args.manifest))
    runs = []
    for seed in args.seeds:
        cfg.seed = seed
        nes = integrate(sources, data, cfg)
        ga = run_baseline_ga(sources, data, cfg)
        runs.append((seed, nes, ga))
        log.info("seed %d: nes %.4f ga %.4f", seed, nes.best_report.fitness, ga.best_report.fitness)
    target = args.target
    if target is None:
        target = statistics.median(ga.best_report.fitness for _, _, ga in runs)
    rows = []
    for seed, nes, ga in runs:
        for method, res in (("nes", nes), ("ga", ga)):
            reached = generations_to_target(res.history, target)
            rows.append([seed, method, _fmt(res.best_report.accuracy),
                         _fmt(res.best_report.fitness), "" if reached is None else reached])
    write_atomic(Path(args.out) / "comparison.csv", csv_text(COMPARE_COLUMNS, rows))
    write_json(Path(args.out) / "comparison_meta.json",
               {"target": target, "seeds": list(args.seeds), "config": cfg.to_dict()})
    return EXIT_OK


def synth_dataset(rows: int, features: int, classes: int, seed: int, separation: float = 6.0):
    """Gaussian blobs, one per class, centres spaced ``separation`` apart on the diagonal."""
    if classes < 2 or rows < classes or features < 1:
        raise UsageError("need rows >= classes >= 2 and features >= 1")
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(rows) % classes)
    x = rng.standard_normal((rows, features)) + separation * labels[:, None]
    return np.round(x, 6), labels


def cmd_synth(args) -> int:
    x, labels = synth_dataset(args.rows, args.features, args.classes, args.seed, args.separation)
    names = [f"x{i}" for i in range(args.features)]
    classes = [f"c{k}" for k in range(args.classes)]
    body = "".join(",".join([*(repr(float(v)) for v in row), classes[c]]) + "\n"
                   for row, c in zip(x, labels))
    out = Path(args.out)
    write_atomic(out, body)
    write_json(schema_path_for(out), {
        "features": [{"name": n, "kind": "numeric"} for n in names],
        "class_column": args.features,
        "classes": classes,
        "header": False,
    })
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _add_config_flags(p):
    p.add_argument("--config", help="flat JSON file of EvolutionConfig fields")
    p.add_argument("--mu", type=int)
    p.add_argument("--subpops", type=int)
    p.add_argument("--generations", "-T", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--p-mf-mutation", dest="p_mf_mutation", type=float)
    p.add_argument("--tvm-degree", dest="tvm_degree", type=float)
    p.add_argument("--p-insert", dest="p_insert", type=float)
    p.add_argument("--p-delete", dest="p_delete", type=float)
    p.add_argument("--lambda-range", dest="lambda_range", type=float, nargs=2)
    p.add_argument("--max-rules", dest="max_rules", type=int)


def build_parser() -> argparse.ArgumentParser:
    formats = [f.value for f in DatasetFormat]
    parser = _Parser(prog="fuzzkb", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-q", "--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("bootstrap", help="induce P source rule sets from a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--format", required=True, choices=formats)
    p.add_argument("--schema", help="schema sidecar for generic CSV")
    p.add_argument("--sources", "-P", type=int, default=3)
    p.add_argument("--linguistic", "-L", type=int, default=3)
    p.add_argument("--margin", type=float, default=0.0)
    p.add_argument("--impute", choices=["keep_missing", "mean_impute"], default="keep_missing")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("integrate", help="evolve one knowledge base from the sources")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("evaluate", help="accuracy of a knowledge base on a dataset")
    p.add_argument("--kb", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--format", required=True, choices=formats)
    p.add_argument("--schema")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="strategy vs baseline GA over several seeds")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seeds", type=int, nargs="+", required=True)
    p.add_argument("--target", type=float,
                   help="fitness level to reach (default: median GA final fitness)")
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", help="write a separable Gaussian-cluster dataset")
    p.add_argument("--rows", type=int, default=300)
    p.add_argument("--features", type=int, default=4)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--separation", type=float, default=6.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV path; the sidecar goes next to it")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"fuzzkb: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"fuzzkb: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, SchemaError, OSError, ValueError) as exc:
        print(f"fuzzkb: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
