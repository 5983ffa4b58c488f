"""Command-line entry point: ``reasontopo analyze | batch | render | oracle | fetch-embeddings``."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .chain import View, chain_from_dict, parse_chain
from .embedding import (CACHE_ENV, ENDPOINT_ENV, TOKEN_ENV, EmbeddedChain, EmbeddingSet, attach,
                        embeddings_from_array, fetch_embeddings, load_embeddings, save_embeddings,
                        select_embedded_view, EmbeddingSource)
from .errors import ConfigError, ReasonTopoError
from .metrics import InfinitePolicy
from .persistence import diagram_from_json, diagram_to_csv, diagram_to_json
from .pipeline import AnalysisConfig, analyze

logger = logging.getLogger("reasontopo")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_PARTIAL, EXIT_ORACLE = 0, 1, 2, 3, 4, 5
DEFAULT_VARIABLES = ("acc", "token", "time", "h0", "h1")


@dataclass
class RunConfig:
    chain: str | None = None
    batch: str | None = None
    embeddings: str | None = None
    embeddings_dir: str | None = None
    endpoint: str | None = None
    token: str | None = None
    cache_dir: str | None = None
    fixture: str | None = None
    scheme: str = "auto"
    d_pe: int | None = None
    scale: float = 1.0
    normalize: bool = False
    metric: str = "euclidean"
    w_sem: float = 0.5
    w_struct: float = 0.5
    eps_max: float | None = None
    max_dim: int = 1
    dims: list | None = None
    min_persistence: float = 0.0
    infinite_policy: str = "exclude"
    view: str = "full_graph"
    variables: list = field(default_factory=lambda: list(DEFAULT_VARIABLES))
    out: str = "run"
    formats: list = field(default_factory=lambda: ["json", "csv", "svg"])
    jobs: int = 1
    diagram: str | None = None
    cloud: str | None = None
    seed: int = 0
    cases: int = 500
    n: int | None = None
    texts: str | None = None
    batch_size: int = 32

    def analysis(self) -> AnalysisConfig:
        return AnalysisConfig(
            scheme=self.scheme, d_pe=self.d_pe, scale=self.scale, normalize=self.normalize,
            metric=self.metric, weights=(self.w_sem, self.w_struct), eps_max=self.eps_max,
            max_dim=self.max_dim, dims=tuple(self.dims) if self.dims is not None else None,
            min_persistence=self.min_persistence, infinite_policy=self.infinite_policy,
        ).validate()

    def public(self) -> dict:
        """Config as recorded in the manifest (secrets removed)."""
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out.pop("token")
        out.pop("out")
        out.pop("cache_dir")
        out.pop("jobs")
        return out


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name, value):
    kind = _FIELD_TYPES[name]
    if value is None:
        return None
    try:
        if "list" in kind:
            return value if isinstance(value, list) else [v.strip() for v in str(value).split(",") if v.strip()]
        if kind.startswith("bool"):
            return value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes", "on")
        if kind.startswith("int"):
            return int(value)
        if kind.startswith("float"):
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value {value!r} for {name}") from None
    return value


def resolve_config(cli_values: dict, config_path=None, environ=None) -> RunConfig:
    """Merge sources, highest precedence first: CLI, config file, environment, defaults."""
    environ = os.environ if environ is None else environ
    merged: dict = {}
    env_map = {"endpoint": ENDPOINT_ENV, "token": TOKEN_ENV, "cache_dir": CACHE_ENV}
    for name in _FIELD_TYPES:
        var = env_map.get(name, f"REASONTOPO_{name.upper()}")
        if var in environ:
            merged[name] = _coerce(name, environ[var])
    if config_path:
        try:
            data = json.loads(Path(config_path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {config_path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {config_path} is not valid JSON: {exc}") from None
        unknown = set(data) - set(_FIELD_TYPES)
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        merged.update({k: _coerce(k, v) for k, v in data.items()})
    merged.update({k: _coerce(k, v) for k, v in cli_values.items() if v is not None})
    if merged.get("dims") is not None:
        try:
            merged["dims"] = [int(d) for d in merged["dims"]]
        except ValueError:
            raise ConfigError(f"dims must be integers, got {merged['dims']}") from None
    return RunConfig(**merged)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class RunDir:
    """Output directory whose manifest records inputs, config and outputs."""

    def __init__(self, root, command, config: RunConfig):
        self.root = Path(root)
        self.command = command
        self.config = config
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}

    def add_input(self, path):
        if path and Path(path).is_file():
            self.inputs[str(path)] = _sha256(path)

    def write(self, rel, text: str):
        p = self.root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        data = text.encode("utf-8")
        p.write_bytes(data)
        self.outputs[str(rel)] = hashlib.sha256(data).hexdigest()
        return p

    def finish(self, extra=None):
        manifest = {
            "command": self.command,
            "config": self.config.public(),
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": dict(sorted(self.outputs.items())),
            "versions": {"reasontopo": __version__, "numpy": np.__version__,
                         "python": platform.python_version()},
        }
        if extra:
            manifest.update(extra)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load_vectors(entry_value, base: Path) -> EmbeddingSet:
    if isinstance(entry_value, list):
        return embeddings_from_array(entry_value, EmbeddingSource.FILE) if entry_value else \
            EmbeddingSet(np.zeros((0, 0), np.float32))
    path = Path(entry_value)
    if not path.is_absolute():
        path = base / path
    return load_embeddings(path)


def _resolve_embeddings(cfg: RunConfig, chain, inline=None, base=Path("."), chain_id=None) -> EmbeddingSet:
    if inline is not None:
        return _load_vectors(inline, base)
    if cfg.embeddings and cfg.batch is None:
        return load_embeddings(cfg.embeddings)
    if cfg.embeddings_dir and chain_id is not None:
        for suffix in (".json", ".bin"):
            p = Path(cfg.embeddings_dir) / f"{chain_id}{suffix}"
            if p.exists():
                return load_embeddings(p)
    if cfg.endpoint:
        return fetch_embeddings(cfg.endpoint, chain.texts, cache_dir=cfg.cache_dir, token=cfg.token,
                                batch_size=cfg.batch_size)
    raise ReasonTopoError(f"no embeddings for chain {chain_id or ''}: give --embeddings, "
                          f"--embeddings-dir, --endpoint, or inline vectors".replace("  ", " "))


def _module_of(exc) -> str:
    tb = traceback.extract_tb(exc.__traceback__)
    for frame in reversed(tb):
        p = Path(frame.filename)
        if p.parent.name == "reasontopo" and p.stem != "cli":
            return p.stem
    return "cli"


def _fail(exc) -> int:
    code = getattr(exc, "exit_code", EXIT_DATA)
    print(f"error [{_module_of(exc)}]: {exc}", file=sys.stderr)
    return code


def _write_analysis(run: RunDir, result, formats, prefix=""):
    from .reporting import render_barcode, render_diagram

    if "json" in formats:
        run.write(f"{prefix}report.json", result.report.to_json() + "\n")
        run.write(f"{prefix}diagram.json", diagram_to_json(result.diagram) + "\n")
    if "csv" in formats:
        run.write(f"{prefix}diagram.csv", diagram_to_csv(result.diagram))
    if "svg" in formats and result.diagram.bars:
        run.write(f"{prefix}barcode.svg", render_barcode(result.diagram))
        run.write(f"{prefix}diagram.svg", render_diagram(result.diagram))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_analyze(cfg: RunConfig) -> int:
    acfg = cfg.analysis()
    run = RunDir(cfg.out, "analyze", cfg)
    if cfg.fixture:
        if cfg.fixture != "weekend":
            raise ConfigError(f"unknown fixture {cfg.fixture!r}; available: weekend")
        from .oracle import load_weekend_fixture

        ec, _, _, _ = load_weekend_fixture(cfg.embeddings)
    else:
        if not cfg.chain:
            raise ConfigError("analyze needs --chain or --fixture")
        try:
            text = Path(cfg.chain).read_bytes()
        except FileNotFoundError:
            raise ReasonTopoError(f"chain file not found: {cfg.chain}") from None
        run.add_input(cfg.chain)
        chain = parse_chain(text)
        emb = _resolve_embeddings(cfg, chain)
        run.add_input(cfg.embeddings)
        ec = attach(chain, emb)
    ec = select_embedded_view(ec, cfg.view)
    result = analyze(ec, acfg)
    _write_analysis(run, result, cfg.formats)
    run.finish()
    flat = result.report.flat()
    print(" ".join(f"{k}={flat[k]}" for k in sorted(flat) if k.startswith("h") and not k.endswith("reason")))
    return EXIT_OK


def _analyze_job(args):
    ec, acfg = args
    try:
        return analyze(ec, acfg).report, None
    except ReasonTopoError as exc:
        return None, f"[{_module_of(exc)}] {exc}"


def cmd_batch(cfg: RunConfig) -> int:
    from .reporting import (BatchRecord, aggregate_batch, aggregate_to_csv, aggregate_to_json, correlate,
                            render_heatmap)
    from .encoding import resolve_scheme

    if not cfg.batch:
        raise ConfigError("batch needs --batch")
    acfg = cfg.analysis()
    view = View(cfg.view)
    run = RunDir(cfg.out, "batch", cfg)
    try:
        raw = json.loads(Path(cfg.batch).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ReasonTopoError(f"batch file not found: {cfg.batch}") from None
    except json.JSONDecodeError as exc:
        raise ReasonTopoError(f"batch file is not valid JSON: {exc}") from None
    if not isinstance(raw, list):
        raise ReasonTopoError("batch file must be a JSON array of chain objects")
    run.add_input(cfg.batch)
    base = Path(cfg.batch).parent

    failures, skipped, jobs = [], [], []
    for idx, entry in enumerate(raw):
        cid = str(entry.get("id", f"chain-{idx:04d}")) if isinstance(entry, dict) else f"chain-{idx:04d}"
        try:
            if not isinstance(entry, dict):
                raise ReasonTopoError("entry is not a JSON object")
            entry = dict(entry)
            inline = entry.pop("embeddings", None)
            tokens = entry.pop("token_count", None)
            wall = entry.pop("wall_time", None)
            chain = chain_from_dict(entry)
            if chain.outcome is None:
                raise ReasonTopoError(f"label {chain.label!r} is not correct/incorrect")
            ec = attach(chain, _resolve_embeddings(cfg, chain, inline, base, cid))
            method = str(entry.get("method") or resolve_scheme(chain.paradigm, cfg.scheme).value)
            meta = {"id": cid, "dataset": str(entry.get("dataset", "default")), "method": method,
                    "outcome": chain.outcome, "token_count": tokens, "wall_time": wall}
            views = [View.FULL_GRAPH, View.FINAL_PATH] if view is View.FULL_GRAPH else [View.FINAL_PATH]
            for v in views:
                if v is View.FINAL_PATH and chain.final_path is None:
                    if view is View.FINAL_PATH:
                        skipped.append({"id": cid, "reason": "no final_path annotation"})
                    continue
                jobs.append((meta, v, select_embedded_view(ec, v)))
        except ReasonTopoError as exc:
            failures.append({"id": cid, "index": idx, "error": f"[{_module_of(exc)}] {exc}"})

    args = [(ec, acfg) for _, _, ec in jobs]
    if cfg.jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_analyze_job, args))
    else:
        results = [_analyze_job(a) for a in args]

    records = {View.FULL_GRAPH: [], View.FINAL_PATH: []}
    for (meta, v, _), (report, err) in zip(jobs, results):
        if err:
            failures.append({"id": meta["id"], "view": v.value, "error": err})
            continue
        run.write(f"reports/{v.value}/{meta['id']}.json", report.to_json() + "\n")
        records[v].append(BatchRecord(meta["id"], meta["method"], meta["dataset"], meta["outcome"], report,
                                      meta["token_count"], meta["wall_time"]))

    notes = {}
    for v, recs in records.items():
        if not recs:
            continue
        rows = aggregate_batch(recs)
        run.write(f"aggregate_{v.value}.csv", aggregate_to_csv(rows))
        run.write(f"aggregate_{v.value}.json", aggregate_to_json(rows))
        if len(recs) >= 2:
            cm = correlate(recs, cfg.variables)
            run.write(f"correlation_{v.value}.csv", cm.to_csv())
            run.write(f"correlation_{v.value}.json", _json(cm.to_dict()))
            run.write(f"correlation_{v.value}.svg", render_heatmap(cm))
        else:
            notes[v.value] = "fewer than two records; correlation skipped"
    run.write("failures.json", _json({"failures": failures, "skipped": skipped, "notes": notes}))
    run.finish()
    n_ok = len(records[View.FULL_GRAPH]) + len(records[View.FINAL_PATH])
    print(f"batch: {n_ok} analyses, {len(failures)} failures, {len(skipped)} skipped")
    for f in failures:
        print(f"  failed {f['id']}: {f['error']}", file=sys.stderr)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_render(cfg: RunConfig) -> int:
    from .reporting import pca_project, render_barcode, render_diagram, render_projection

    if not cfg.diagram and not cfg.cloud:
        raise ConfigError("render needs --diagram and/or --cloud")
    run = RunDir(cfg.out, "render", cfg)
    if cfg.diagram:
        try:
            diag = diagram_from_json(Path(cfg.diagram).read_text())
        except FileNotFoundError:
            raise ReasonTopoError(f"diagram file not found: {cfg.diagram}") from None
        except (ValueError, KeyError) as exc:
            raise ReasonTopoError(f"diagram file is malformed: {exc}") from None
        run.add_input(cfg.diagram)
        run.write("barcode.svg", render_barcode(diag))
        run.write("diagram.svg", render_diagram(diag))
    if cfg.cloud:
        pts = load_embeddings(cfg.cloud).vectors
        run.add_input(cfg.cloud)
        proj3 = pca_project(pts, 3)
        proj2 = pca_project(proj3.points, 2)
        run.write("projection.json", _json({"points_3d": proj3.points.round(12).tolist(),
                                            "points_2d": proj2.points.round(12).tolist(),
                                            "explained_variance_ratio": proj3.explained_variance_ratio
                                            .round(12).tolist()}))
        run.write("projection.svg", render_projection(proj2))
    run.finish()
    return EXIT_OK


def cmd_oracle(cfg: RunConfig) -> int:
    from .oracle import run_oracle_suite

    if cfg.cases < 1:
        raise ConfigError("--cases must be at least 1")
    report = run_oracle_suite(cfg.seed, cfg.cases, n=cfg.n, workers=cfg.jobs)
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_ORACLE


def cmd_fetch(cfg: RunConfig) -> int:
    if cfg.chain:
        texts = parse_chain(Path(cfg.chain).read_bytes()).texts
    elif cfg.texts:
        texts = json.loads(Path(cfg.texts).read_text(encoding="utf-8"))
    else:
        raise ConfigError("fetch-embeddings needs --chain or --texts")
    if not cfg.endpoint:
        raise ConfigError(f"no endpoint: pass --endpoint or set {ENDPOINT_ENV}")
    emb = fetch_embeddings(cfg.endpoint, texts, cache_dir=cfg.cache_dir, token=cfg.token,
                           batch_size=cfg.batch_size)
    target = Path(cfg.embeddings or Path(cfg.out) / "embeddings.json")
    target.parent.mkdir(parents=True, exist_ok=True)
    save_embeddings(emb, target)
    print(f"wrote {emb.n} x {emb.dimension} vectors to {target}")
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "batch": cmd_batch, "render": cmd_render, "oracle": cmd_oracle,
            "fetch-embeddings": cmd_fetch}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _add_common(p):
    p.add_argument("--config", help="JSON file with RunConfig fields")
    p.add_argument("--out", help="output run directory (default: ./run)")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_embedding(p):
    p.add_argument("--embeddings", help="embedding file (JSON rows or flat binary)")
    p.add_argument("--endpoint", help=f"embedding service URL (env {ENDPOINT_ENV})")
    p.add_argument("--token", help=f"embedding service token (env {TOKEN_ENV})")
    p.add_argument("--cache-dir", dest="cache_dir", help=f"embedding cache (env {CACHE_ENV})")
    p.add_argument("--batch-size", dest="batch_size", type=int, help="max texts per service request")


def _add_analysis(p):
    p.add_argument("--scheme", choices=["auto", "cot", "tot", "got"], help="positional encoding scheme")
    p.add_argument("--d-pe", "--d", dest="d_pe", type=int,
                   help="encoding width d (lanes of the positional/Laplacian encoding)")
    p.add_argument("--scale", type=float, help="multiplier on the positional encoding (default 1.0)")
    p.add_argument("--normalize", action="store_true", default=None, help="L2-normalize semantic vectors")
    p.add_argument("--metric", choices=["euclidean", "cosine", "combined"], help="distance metric")
    p.add_argument("--w-sem", dest="w_sem", type=float, help="combined metric: semantic (cosine) weight")
    p.add_argument("--w-struct", dest="w_struct", type=float,
                   help="combined metric: structural (euclidean) weight")
    p.add_argument("--eps-max", "--epsilon", "--ε", dest="eps_max", type=float,
                   help="filtration cap ε (default: largest pairwise distance)")
    p.add_argument("--max-dim", dest="max_dim", type=int,
                   help="highest homology dimension k (default 1; 0 needs --dims 0)")
    p.add_argument("--dims", help="comma-separated homology dimensions to report")
    p.add_argument("--min-persistence", dest="min_persistence", type=float,
                   help="bars must outlive this to be counted in n_k")
    p.add_argument("--infinite-policy", dest="infinite_policy", choices=[p.value for p in InfinitePolicy],
                   help="infinite bars in lifetime/entropy statistics")
    p.add_argument("--view", choices=["full-graph", "final-path", "full_graph", "final_path"],
                   help="analyse all steps or only the recorded final path")
    p.add_argument("--formats", help="comma-separated outputs among json,csv,svg")
    p.add_argument("--jobs", type=int, help="parallel workers")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="reasontopo", description="Persistent homology of reasoning traces.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="analyse one chain")
    _add_common(p)
    _add_embedding(p)
    _add_analysis(p)
    p.add_argument("--chain", help="chain document (JSON)")
    p.add_argument("--fixture", help="bundled fixture name instead of --chain (weekend)")

    p = sub.add_parser("batch", help="analyse a batch of labelled chains")
    _add_common(p)
    _add_embedding(p)
    _add_analysis(p)
    p.add_argument("--batch", help="JSON array of chain objects")
    p.add_argument("--embeddings-dir", dest="embeddings_dir", help="directory of <id>.json|.bin vectors")
    p.add_argument("--variables", help="comma-separated correlation variables (default acc,token,time,h0,h1)")

    p = sub.add_parser("render", help="render a saved diagram and/or project a cloud")
    _add_common(p)
    p.add_argument("--diagram", help="diagram JSON")
    p.add_argument("--cloud", help="point/embedding file to PCA-project")

    p = sub.add_parser("oracle", help="cross-check persistence against brute-force Betti numbers")
    _add_common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--cases", type=int)
    p.add_argument("--n", type=int, help="force every cloud to n points (at most 12)")
    p.add_argument("--jobs", type=int)

    p = sub.add_parser("fetch-embeddings", help="embed chain steps through the service")
    _add_common(p)
    _add_embedding(p)
    p.add_argument("--chain")
    p.add_argument("--texts", help="JSON array of strings")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    values = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    if values.get("view"):
        values["view"] = values["view"].replace("-", "_")
    try:
        cfg = resolve_config(values, args.config)
        if cfg.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        return COMMANDS[args.command](cfg)
    except ReasonTopoError as exc:
        return _fail(exc)


if __name__ == "__main__":
    sys.exit(main())
