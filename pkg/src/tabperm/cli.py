"""Command-line entry point: ``tabperm {sweep,aggregate,refine,probe,embed-dump}``.

Exit codes: 0 success, 1 internal error, 2 usage/config error, 3 provider error.
Failures print one JSON object to stderr and write no artifact files.
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import sys
from pathlib import Path

import yaml

from . import report
from .cache import EmbeddingCache
from .config import RunConfig
from .datasets import load_fixture, synthetic_corpus
from .embed import embed_cells
from .errors import (ConfigError, EmptyInputError, ProviderError, SchemaVersionError,
                     StructuralError, TabPermError)
from .refine import (RefinerConfig, RefinerParams, alignment_score, evaluate_loss, extract_smps,
                     refine, train_refiner)
from .sweep import (REPORT_SCHEMA, SweepReport, aggregate, platonic_heatmap, retrieval_probe,
                    summarize)
from .table import read_table

logger = logging.getLogger("tabperm")

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_PROVIDER = 0, 1, 2, 3


def load_tables(cfg: RunConfig):
    tables = []
    for path in cfg["input.paths"]:
        try:
            tables.append(read_table(path, cfg["input.format"], delimiter=cfg["input.delimiter"],
                                     row_header_column=cfg["input.row_header_column"]))
        except OSError as exc:
            raise ConfigError(f"cannot read input {path}: {exc}") from exc
    for name in cfg["input.fixtures"]:
        try:
            tables.append(load_fixture(name, cfg["input.row_header_column"]))
        except KeyError:
            raise ConfigError(f"unknown fixture {name!r}") from None
    syn = cfg["input.synthetic"]
    if syn["count"]:
        tables += synthetic_corpus(syn["count"], tuple(syn["n_range"]), tuple(syn["m_range"]), syn["seed"])
    if not tables:
        raise ConfigError("no input tables: set input.paths, input.fixtures or input.synthetic.count")
    seen: dict[str, int] = {}
    out = []
    for t in tables:
        base = t.name or "table"
        k = seen.get(base, 0)
        seen[base] = k + 1
        name = base if k == 0 else f"{base}-{k}"
        out.append(t if name == t.name else _renamed(t, name))
    return out


def _renamed(table, name):
    from dataclasses import replace
    return replace(table, name=name)


def _provider(cfg):
    cache = EmbeddingCache(cfg["cache.dir"]) if cfg["provider.kind"] == "remote-api" else None
    return cfg.provider(cache)


def cmd_sweep(cfg: RunConfig) -> dict[str, str]:
    provider = _provider(cfg)
    files = {}
    stamp = cfg["output.svg_timestamp"]
    rb, ca = cfg["sweep.row_slice_b"], cfg["sweep.col_slice_a"]
    for table in load_tables(cfg):
        hm = platonic_heatmap(table, provider, cfg["embed.mode"], cfg["sweep.seed"],
                              fmt=cfg["embed.format"], repeats=cfg["sweep.repeats"],
                              max_workers=cfg["sweep.max_workers"], table_id=table.name)
        rep = summarize(hm, rb, ca)
        tid = table.name
        timing = cfg["output.timing"]
        files[f"{tid}.heatmap.csv"] = report.heatmap_csv(hm)
        files[f"{tid}.heatmap.json"] = report.dumps_json(hm.to_json(timing=timing))
        files[f"{tid}.report.json"] = report.dumps_json(rep.to_json(timing=timing))
        files[f"{tid}.heatmap.svg"] = report.heatmap_svg(hm, f"{tid}: H[a,b]", timestamp=stamp)
        files[f"{tid}.slices.svg"] = report.slices_svg(hm, f"{tid}: restoration slices",
                                                       timestamp=stamp, row_slice_b=rb, col_slice_a=ca)
    return files


def cmd_aggregate(cfg: RunConfig, patterns) -> dict[str, str]:
    paths = sorted({p for pat in patterns for p in glob.glob(pat)})
    if not paths:
        raise ConfigError(f"no report files match {list(patterns)}")
    docs, bad = [], []
    for p in paths:
        try:
            obj = json.loads(Path(p).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read report {p}: {exc}") from exc
        (docs if obj.get("schema") == REPORT_SCHEMA else bad).append((p, obj))
    if bad:
        found = sorted({str(o.get("schema")) for _, o in bad})
        raise SchemaVersionError(f"expected schema {REPORT_SCHEMA}, found {found} in {[p for p, _ in bad]}",
                                 files=[p for p, _ in bad])
    groups: dict[tuple, list] = {}
    for _, obj in docs:
        rep = SweepReport.from_json(obj)
        key = (rep.provenance.get("provider_id", ""), rep.provenance.get("mode", ""))
        groups.setdefault(key, []).append(rep)
    summaries = [aggregate(reps, {"provider_id": k[0], "mode": k[1]}) for k, reps in sorted(groups.items())]
    doc = {"schema": "platonic-summary/1", "groups": [s.to_json() for s in summaries],
           "reports": [Path(p).name for p, _ in docs]}
    return {"summary.json": report.dumps_json(doc), "summary.csv": report.summary_csv(summaries)}


def cmd_refine(cfg: RunConfig) -> dict[str, str]:
    provider = _provider(cfg)
    rc = RefinerConfig(**cfg["refine"])
    files = {}
    for table in load_tables(cfg):
        base = embed_cells(table, provider, cfg["embed.mode"], cfg["embed.format"], include_headers=True)
        smps = extract_smps(table)
        init = RefinerParams.initialize(base.d, rc)
        params, trace = train_refiner(base, smps, rc, params=init)
        summary = {
            "schema": "refiner-run/1",
            "table_id": table.name,
            "provider_id": provider.provider_id,
            "mode": cfg["embed.mode"],
            "epochs": rc.epochs,
            "loss_initial": evaluate_loss(init, base, smps, rc.negatives, rc.temperature, rc.seed),
            "loss_final": evaluate_loss(params, base, smps, rc.negatives, rc.temperature, rc.seed),
            "alignment_before": alignment_score(refine(base, init), smps, seed=rc.seed),
            "alignment_after": alignment_score(refine(base, params), smps, seed=rc.seed),
            "params_fingerprint": params.fingerprint(),
        }
        files[f"{table.name}.params.json"] = report.dumps_json(params.to_json())
        files[f"{table.name}.refine.json"] = report.dumps_json(summary)
        if trace:
            files[f"{table.name}.loss.csv"] = report.loss_csv(trace)
    return files


def cmd_probe(cfg: RunConfig) -> dict[str, str]:
    tables = load_tables(cfg)
    stats = retrieval_probe(tables, _provider(cfg), k=min(cfg["probe.k"], len(tables) - 1),
                            seed=cfg["sweep.seed"], mode=cfg["embed.mode"], fmt=cfg["embed.format"])
    doc = stats.to_json()
    doc["tables"] = [t.name for t in tables]
    return {"probe.json": report.dumps_json(doc)}


def cmd_embed_dump(cfg: RunConfig) -> dict[str, str]:
    provider = _provider(cfg)
    files = {}
    for table in load_tables(cfg):
        mat = embed_cells(table, provider, cfg["embed.mode"], cfg["embed.format"],
                          include_headers=cfg["embed.include_headers"])
        doc = mat.to_json()
        doc["schema"] = "platonic-embeddings/1"
        doc["table_id"] = table.name
        doc["projection"] = {"method": "pca-2d", "note": "2-D PCA used in place of t-SNE"}
        files[f"{table.name}.embeddings.json"] = report.dumps_json(doc)
        proj = report.pca_2d(mat.rows)
        lines = ["row,col,kind,x,y\n"]
        lines += [f"{c.row},{c.col},{c.kind},{x!r},{y!r}\n" for c, (x, y) in zip(mat.index, proj.tolist())]
        files[f"{table.name}.pca.csv"] = "".join(lines)
    return files


COMMANDS = {"sweep": cmd_sweep, "refine": cmd_refine, "probe": cmd_probe, "embed-dump": cmd_embed_dump}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tabperm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("sweep", "aggregate", "refine", "probe", "embed-dump"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML run config")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory (output.dir)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key, value parsed as YAML")
        if name == "aggregate":
            p.add_argument("reports", nargs="+", help="report JSON files or glob patterns")
            continue
        p.add_argument("--input", action="append", default=None, help="table file (repeatable)")
        p.add_argument("--fixture", action="append", default=None, help="bundled fixture name")
        p.add_argument("--provider", help="provider.kind")
        p.add_argument("--mode", help="embed.mode")
        if name == "sweep":
            p.add_argument("--row-slice-b", type=int)
            p.add_argument("--col-slice-a", type=int)
    return parser


def _overrides(args) -> dict:
    out = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = yaml.safe_load(value)
    if args.seed is not None:
        out["refine.seed" if args.command == "refine" else "sweep.seed"] = args.seed
    if args.out:
        out["output.dir"] = args.out
    for flag, key in (("input", "input.paths"), ("fixture", "input.fixtures"),
                      ("provider", "provider.kind"), ("mode", "embed.mode"),
                      ("row_slice_b", "sweep.row_slice_b"), ("col_slice_a", "sweep.col_slice_a")):
        value = getattr(args, flag, None)
        if value is not None:
            out[key] = value
    return out


def _fail(code: int, exc: BaseException) -> int:
    diag = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    cell = getattr(exc, "cell", None)
    if cell is not None:
        diag["cell"] = str(cell)
    files = getattr(exc, "files", None)
    if files:
        diag["files"] = files
    print(json.dumps(diag), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = RunConfig.load(args.config, _overrides(args)).validate()
        if args.command == "aggregate":
            files = cmd_aggregate(cfg, args.reports)
        else:
            files = COMMANDS[args.command](cfg)
        written = report.write_artifacts(cfg["output.dir"], files)
        for path in written:
            logger.info("wrote %s", path)
        return EXIT_OK
    except (ConfigError, SchemaVersionError, StructuralError, EmptyInputError) as exc:
        return _fail(EXIT_USAGE, exc)
    except ProviderError as exc:
        return _fail(EXIT_PROVIDER, exc)
    except TabPermError as exc:
        return _fail(EXIT_INTERNAL, exc)
    except Exception as exc:  # noqa: BLE001
        logger.debug("internal error", exc_info=True)
        return _fail(EXIT_INTERNAL, exc)


if __name__ == "__main__":
    sys.exit(main())
