"""Command-line entry point: ``likeddr <command> [flags]``.

Every artifact-producing command writes a JSON manifest beside its output
(``<output>.manifest.json``, or ``manifest.json`` inside an output
directory). Settings resolve as flags > ``--config`` file > defaults.

Exit codes: 0 ok, 1 internal error, 2 usage/input error, 3 divergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DivergenceError, InputError, LikeDDRError

log = logging.getLogger("likeddr")

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_DIVERGENCE = 0, 1, 2, 3

# Built-in defaults per command; flags default to None so that the config
# file can fill anything not given on the command line.
DEFAULTS = {
    "common": {"seed": 0, "threads": 1, "deterministic": True},
    "corpus": {"min_user_likes": 50, "min_entity_likes": 800, "iterative": False},
    "synth": {"users": 50_000, "entities": 2_000, "topics": 20, "signal_topics": 4,
              "signal_strength": 2.0, "labeled_fraction": 0.1, "likes_mean": 30.0,
              "likes_sd": 0.6, "min_likes": 10, "topic_leak": 0.02, "include_mixtures": False},
    "ddr-simulate": {"users": 200, "k_min": 1e-4, "k_max": 0.25, "ladder": "geometric"},
    "ddr-score": {"ladder": "geometric"},
    "embed": {"method": None, "dim": 100, "window": 20, "negative": 10, "epochs": None,
              "batch_size": 50, "learning_rate": None},
    "correlate": {"threshold": 0.05, "fdr": False, "top": None},
    "train": {"model": "svr", "folds": 10},
    "sweep": {"kind": "datasize", "methods": "SVD,LDA,AE,U-CBOW,U-SG,U-GLOVE,P-DM,P-DBOW",
              "user_counts": None, "dims": "50,100,300,500", "dim": 100, "model": "svr",
              "folds": 10, "window": 20, "negative": 10, "epochs": None, "method_epochs": None},
    "report": {},
}

_CORPUS_COMMANDS = ("filter", "embed", "correlate", "train", "sweep", "report")


# -- helpers ---------------------------------------------------------------

def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def read_config_file(path):
    """key=value lines; '#' comments and blank lines ignored. Keys use - or _."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{n}: expected key=value")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


def _coerce(value, like):
    if not isinstance(value, str) or isinstance(like, str):
        return value
    if like is None:
        for kind in (int, float):
            try:
                return kind(value)
            except ValueError:
                pass
        return value
    if isinstance(like, bool):
        low = value.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {value!r}")
    try:
        return type(like)(value)
    except ValueError:
        raise ConfigError(f"cannot read {value!r} as {type(like).__name__}") from None


def resolve(args):
    """Merge defaults, config file and explicit flags into one dict."""
    defaults = dict(DEFAULTS["common"])
    if args.command in _CORPUS_COMMANDS:
        defaults.update(DEFAULTS["corpus"])
    defaults.update({k.replace("-", "_"): v for k, v in DEFAULTS.get(args.command, {}).items()})
    cfg = dict(defaults)
    if getattr(args, "config", None):
        for k, v in read_config_file(args.config).items():
            if k not in defaults and k not in vars(args):
                raise ConfigError(f"{args.config}: unknown key {k!r} for {args.command}")
            cfg[k] = _coerce(v, defaults.get(k, ""))
    for k, v in vars(args).items():
        if k in ("command", "config", "func", "verbose"):
            continue
        if v is not None:
            cfg[k] = v
        else:
            cfg.setdefault(k, None)
    return cfg


def write_manifest(path, command, cfg, inputs, started):
    doc = {
        "command": command,
        "config": {k: v for k, v in sorted(cfg.items())},
        "inputs": {str(p): sha256_file(p) for p in inputs if p and Path(p).is_file()},
        "seed": cfg.get("seed"),
        "version": __version__,
        "duration_seconds": round(time.time() - started, 3),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _manifest_for(out):
    out = Path(out)
    return out / "manifest.json" if out.is_dir() else out.with_name(out.name + ".manifest.json")


def _need(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) in (None, "")]
    if missing:
        raise ConfigError("missing required setting(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _require_file(path, what):
    if path is None or not Path(path).is_file():
        raise InputError(f"{what} file not found: {path}")


def _set_threads(cfg):
    if cfg.get("threads", 1) < 1:
        raise ConfigError("--threads must be >= 1")
    try:
        import numba
        numba.set_num_threads(min(int(cfg["threads"]), numba.config.NUMBA_NUM_THREADS))
    except (ImportError, ValueError):
        pass


def _load_corpus(cfg):
    from .corpus import load_corpus
    _require_file(cfg.get("pairs"), "pairs")
    return load_corpus(cfg["pairs"], cfg["min_user_likes"], cfg["min_entity_likes"], cfg["iterative"])


def _load_labels(cfg):
    from .discounting import read_ddr_table
    _require_file(cfg.get("labels"), "labels")
    return read_ddr_table(cfg["labels"])


def _embed_options(cfg):
    opts = {"window": cfg["window"], "negative_samples": cfg["negative"],
            "deterministic": cfg["deterministic"], "threads": cfg["threads"]}
    for key in ("epochs", "learning_rate", "batch_size"):
        if cfg.get(key) is not None:
            opts[key] = cfg[key]
    return opts


def _int_list(text):
    try:
        return [int(float(x)) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of integers, got {text!r}") from None


def _method_epochs(text):
    """"U-CBOW=20,P-DM=20" -> {"U-CBOW": {"epochs": 20}, ...}"""
    from .embeddings import canonical_method
    out = {}
    for item in str(text or "").split(","):
        if not item.strip():
            continue
        name, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--method-epochs expects METHOD=N pairs, got {item!r}")
        out[canonical_method(name)] = {"epochs": _int_list(value)[0]}
    return out


def _model_spec(cfg):
    from .predict import ModelSpec
    return ModelSpec(kind=cfg["model"])


# -- commands --------------------------------------------------------------

def cmd_synth(cfg):
    import math

    from .synthgen import SynthConfig, generate, write_outputs
    _need(cfg, "out")
    sc = SynthConfig(num_users=cfg["users"], num_entities=cfg["entities"], num_topics=cfg["topics"],
                     num_signal_topics=cfg["signal_topics"], signal_strength=cfg["signal_strength"],
                     labeled_fraction=cfg["labeled_fraction"], likes_log_mean=math.log(cfg["likes_mean"]),
                     likes_log_sd=cfg["likes_sd"], min_likes=cfg["min_likes"],
                     topic_leak=cfg["topic_leak"], seed=cfg["seed"])
    corpus, labels, truth = generate(sc)
    write_outputs(cfg["out"], sc, corpus, labels, truth, cfg["include_mixtures"])
    print(f"{corpus.num_users} users, {corpus.num_entities} entities, {corpus.num_pairs} pairs, "
          f"{len(labels)} labeled -> {cfg['out']}")
    return Path(cfg["out"]), []


def cmd_ddr_simulate(cfg):
    from .discounting import default_protocol, simulate_responses, write_ddr_table, write_questionnaires
    _need(cfg, "out")
    if not 0 < cfg["k_min"] <= cfg["k_max"]:
        raise ConfigError("need 0 < --k-min <= --k-max")
    protocol = default_protocol(cfg["ladder"])
    rng = np.random.default_rng(cfg["seed"])
    logk = rng.uniform(np.log10(cfg["k_min"]), np.log10(cfg["k_max"]), size=cfg["users"])
    qs = [simulate_responses(protocol, 10.0 ** lk, f"s{i:05d}") for i, lk in enumerate(logk)]
    write_questionnaires(cfg["out"], qs)
    if cfg.get("truth_out"):
        write_ddr_table(cfg["truth_out"], {q.user_id: float(lk) for q, lk in zip(qs, logk)})
    print(f"{len(qs)} simulated questionnaires -> {cfg['out']}")
    return Path(cfg["out"]), []


def cmd_ddr_score(cfg):
    from .discounting import default_protocol, read_questionnaires, score_questionnaire, write_ddr_table
    _need(cfg, "questionnaires", "out")
    _require_file(cfg["questionnaires"], "questionnaire")
    protocol = default_protocol(cfg["ladder"])
    qs = read_questionnaires(cfg["questionnaires"], protocol)
    if not qs:
        raise InputError(f"{cfg['questionnaires']}: no questionnaires")
    table = {q.user_id: score_questionnaire(protocol, q).ddr for q in qs}
    write_ddr_table(cfg["out"], table)
    print(f"scored {len(table)} users -> {cfg['out']}")
    return Path(cfg["out"]), [cfg["questionnaires"]]


def cmd_filter(cfg):
    from .corpus import degree_distribution, write_snapshot
    _need(cfg, "pairs", "out")
    corpus = _load_corpus(cfg)
    write_snapshot(cfg["out"], corpus)
    users, ents = degree_distribution(corpus)
    hist_path = Path(cfg["out"]).with_suffix(".degrees.tsv")
    with open(hist_path, "w", encoding="utf-8") as fh:
        fh.write("kind\tlo\thi\tcount\n")
        for kind, h in (("user", users), ("entity", ents)):
            for lo, hi, c in h.rows():
                fh.write(f"{kind}\t{lo}\t{hi}\t{c}\n")
    print(f"{corpus.num_users} users, {corpus.num_entities} entities, {corpus.num_pairs} pairs -> {cfg['out']}")
    return Path(cfg["out"]), [cfg["pairs"]]


def cmd_embed(cfg):
    from .embeddings import EmbeddingConfig, train_embedding, write_embedding
    _need(cfg, "pairs", "method", "out")
    config = EmbeddingConfig(cfg["method"], dim=cfg["dim"], rng_seed=cfg["seed"], **_embed_options(cfg))
    corpus = _load_corpus(cfg)
    emb, like_vectors = train_embedding(corpus, config)
    write_embedding(cfg["out"], emb.matrix, emb.ids)
    if cfg.get("entity_out") and like_vectors is not None:
        write_embedding(cfg["entity_out"], like_vectors.matrix, like_vectors.ids)
    cfg["loss_history"] = emb.loss_history
    print(f"{emb.method}: {emb.matrix.shape[0]}x{emb.matrix.shape[1]}, probe loss "
          f"{emb.loss_history[0]:.4g} -> {emb.loss_history[-1]:.4g} -> {cfg['out']}")
    return Path(cfg["out"]), [cfg["pairs"]]


def cmd_correlate(cfg):
    from .analysis import correlate_entities, correlate_topics, write_report
    from .corpus import align_labels
    from .embeddings import load_user_embedding
    _need(cfg, "pairs", "labels", "out")
    corpus = _load_corpus(cfg)
    labels = _load_labels(cfg)
    inputs = [cfg["pairs"], cfg["labels"]]
    if cfg.get("topics"):
        _require_file(cfg["topics"], "topic proportion")
        emb = load_user_embedding(cfg["topics"])
        ids = [corpus.user_ids[u] for u in align_labels(corpus, labels)]
        report = correlate_topics(emb.rows_for(ids), [labels[u] for u in ids],
                                  [f"topic{t}" for t in range(emb.dim)], cfg["threshold"], cfg["fdr"])
        inputs.append(cfg["topics"])
    else:
        report = correlate_entities(corpus, labels, cfg["threshold"], cfg["fdr"])
    write_report(cfg["out"], report, cfg.get("top"))
    print(f"{len(report.significant())} of {len(report.records)} features significant "
          f"({report.num_significant_positive} +, {report.num_significant_negative} -) -> {cfg['out']}")
    return Path(cfg["out"]), inputs


def cmd_train(cfg):
    from .embeddings import load_user_embedding
    from .predict import SweepRow, build_features, cross_validate, write_results
    _need(cfg, "pairs", "labels", "out")
    corpus = _load_corpus(cfg)
    labels = _load_labels(cfg)
    inputs = [cfg["pairs"], cfg["labels"]]
    if cfg.get("embedding"):
        _require_file(cfg["embedding"], "embedding")
        emb = load_user_embedding(cfg["embedding"])
        fm = build_features(emb, corpus, labels)
        name, dim = Path(cfg["embedding"]).stem, emb.dim
        inputs.append(cfg["embedding"])
    else:
        fm = build_features("baseline", corpus, labels)
        name, dim = "baseline", corpus.num_entities
    res = cross_validate(fm.X, fm.y, _model_spec(cfg), cfg["folds"], cfg["seed"])
    write_results(cfg["out"], [SweepRow(name, dim, corpus.num_users, res)])
    print(f"{name}: mean r {res.mean_r:.4f} (pooled {res.pooled_r:.4f}, "
          f"{len(res.skipped)} skipped folds) -> {cfg['out']}")
    return Path(cfg["out"]), inputs


def cmd_sweep(cfg):
    from .predict import sweep_datasize, sweep_featuresize, write_plot_csv, write_results
    _need(cfg, "pairs", "labels", "out")
    corpus = _load_corpus(cfg)
    labels = _load_labels(cfg)
    methods = [m.strip() for m in cfg["methods"].split(",") if m.strip()]
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    opts = _embed_options(cfg)
    progress = lambda row: log.info("%s dim=%s users=%s mean r=%.4f", row.method, row.dim, row.users,  # noqa: E731
                                    row.result.mean_r)
    if cfg["kind"] == "datasize":
        counts = _int_list(cfg["user_counts"]) if cfg.get("user_counts") else [corpus.num_users]
        rows = sweep_datasize(corpus, labels, methods, counts, _model_spec(cfg), cfg["dim"],
                              cfg["folds"], cfg["seed"], opts, progress,
                              _method_epochs(cfg.get("method_epochs")))
        x = "users"
    elif cfg["kind"] == "featuresize":
        rows = sweep_featuresize(corpus, labels, methods, _int_list(cfg["dims"]), _model_spec(cfg),
                                 cfg["folds"], cfg["seed"], opts, progress,
                                 _method_epochs(cfg.get("method_epochs")))
        x = "dim"
    else:
        raise ConfigError(f"unknown sweep kind {cfg['kind']!r}; use datasize or featuresize")
    write_results(out / "results.tsv", rows)
    write_plot_csv(out / f"sweep_{cfg['kind']}.csv", rows, x)
    print(f"{len(rows)} sweep cells -> {out}")
    return out, [cfg["pairs"], cfg["labels"]]


def cmd_report(cfg):
    import csv

    from .plotting import plot_degrees, plot_sweep
    _need(cfg, "inputs", "out")
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    csvs = []
    for item in cfg["inputs"]:
        p = Path(item)
        if p.is_dir():
            csvs.extend(sorted(p.glob("sweep_*.csv")))
        elif p.is_file():
            csvs.append(p)
        else:
            raise InputError(f"report input not found: {item}")
    if not csvs and not cfg.get("pairs"):
        raise InputError("no sweep CSV files found")
    inputs = []
    summary = []
    for path in csvs:
        series = {}
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["x", "series", "y"]:
                raise InputError(f"{path}: expected header x,series,y")
            for row in reader:
                series.setdefault(row["series"], []).append((float(row["x"]), float(row["y"])))
        series = {k: sorted(v) for k, v in series.items()}
        xlabel = "embedding dimension" if "featuresize" in path.stem else "users"
        plot_sweep(series, out / f"{path.stem}.svg", xlabel, path.stem.replace("_", " "))
        for name, pts in sorted(series.items()):
            summary.append((path.stem, name, pts[-1][0], max(y for _, y in pts)))
        inputs.append(path)
    if cfg.get("pairs"):
        from .corpus import degree_distribution
        corpus = _load_corpus(cfg)
        plot_degrees(*degree_distribution(corpus), out / "degrees.svg")
        inputs.append(cfg["pairs"])
    with open(out / "summary.tsv", "w", encoding="utf-8") as fh:
        fh.write("sweep\tseries\tlast_x\tbest_mean_r\n")
        for sweep, name, x, best in summary:
            fh.write(f"{sweep}\t{name}\t{x:g}\t{best!r}\n")
    print(f"report for {len(csvs)} sweep(s) -> {out}")
    return out, inputs


SUBPARSERS = {}

COMMANDS = {
    "synth": cmd_synth, "ddr-simulate": cmd_ddr_simulate, "ddr-score": cmd_ddr_score,
    "filter": cmd_filter, "embed": cmd_embed, "correlate": cmd_correlate, "train": cmd_train,
    "sweep": cmd_sweep, "report": cmd_report,
}


# -- argument parsing ------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="likeddr", description="Like embeddings for delay-discounting prediction.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        SUBPARSERS[name] = sp
        sp.add_argument("--config", help="key=value file; flags override it")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int)
        sp.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=None)
        sp.add_argument("-v", "--verbose", action="store_true")
        if name in _CORPUS_COMMANDS:
            sp.add_argument("--pairs", help="pairs TSV or filtered snapshot")
            sp.add_argument("--min-user-likes", type=int)
            sp.add_argument("--min-entity-likes", type=int)
            sp.add_argument("--iterative", action=argparse.BooleanOptionalAction, default=None)
        return sp

    sp = add("synth", "generate a synthetic corpus with planted DDR topics")
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--users", type=int)
    sp.add_argument("--entities", type=int)
    sp.add_argument("--topics", type=int)
    sp.add_argument("--signal-topics", type=int)
    sp.add_argument("--signal-strength", type=float)
    sp.add_argument("--labeled-fraction", type=float)
    sp.add_argument("--likes-mean", type=float, help="median likes per user")
    sp.add_argument("--likes-sd", type=float, help="log-scale sd of likes per user")
    sp.add_argument("--min-likes", type=int)
    sp.add_argument("--topic-leak", type=float)
    sp.add_argument("--include-mixtures", action=argparse.BooleanOptionalAction, default=None)

    sp = add("ddr-simulate", "simulate questionnaire answers for log-uniform k")
    sp.add_argument("--out")
    sp.add_argument("--truth-out", help="also write the true mean log10 k per user")
    sp.add_argument("--users", type=int)
    sp.add_argument("--k-min", type=float)
    sp.add_argument("--k-max", type=float)
    sp.add_argument("--ladder", choices=["geometric", "linear"])

    sp = add("ddr-score", "score questionnaires into a DDR label table")
    sp.add_argument("--questionnaires")
    sp.add_argument("--out")
    sp.add_argument("--ladder", choices=["geometric", "linear"])

    sp = add("filter", "filter a pairs file and write a corpus snapshot")
    sp.add_argument("--out")

    sp = add("embed", "train a user embedding")
    sp.add_argument("--out")
    sp.add_argument("--entity-out", help="also write per-entity vectors when the method has them")
    sp.add_argument("--method")
    sp.add_argument("--dim", type=int)
    sp.add_argument("--window", type=int)
    sp.add_argument("--negative", type=int)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--batch-size", type=int)
    sp.add_argument("--learning-rate", type=float)

    sp = add("correlate", "screen entities (or topic weights) against DDR")
    sp.add_argument("--labels")
    sp.add_argument("--out")
    sp.add_argument("--topics", help="embedding file whose columns are screened instead of entities")
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--fdr", action=argparse.BooleanOptionalAction, default=None)
    sp.add_argument("--top", type=int)

    sp = add("train", "cross-validate DDR prediction from an embedding or raw likes")
    sp.add_argument("--labels")
    sp.add_argument("--embedding", help="user embedding file; omit for the raw-likes baseline")
    sp.add_argument("--model", choices=["svr", "lasso"])
    sp.add_argument("--folds", type=int)
    sp.add_argument("--out")

    sp = add("sweep", "data-size or feature-size sweep over embedding methods")
    sp.add_argument("--labels")
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--kind", choices=["datasize", "featuresize"])
    sp.add_argument("--methods")
    sp.add_argument("--user-counts", help="comma-separated total user counts")
    sp.add_argument("--dims", help="comma-separated embedding sizes")
    sp.add_argument("--dim", type=int)
    sp.add_argument("--model", choices=["svr", "lasso"])
    sp.add_argument("--folds", type=int)
    sp.add_argument("--window", type=int)
    sp.add_argument("--negative", type=int)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--method-epochs", help="per-method epoch overrides, e.g. P-DBOW=20,P-DM=20")

    sp = add("report", "render sweep CSVs as SVG charts")
    sp.add_argument("inputs", nargs="*", help="sweep output directories or CSV files")
    sp.add_argument("--out", help="output directory")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    warnings.filterwarnings("ignore", message="The TBB threading layer")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.time()
    try:
        cfg = resolve(args)
        _set_threads(cfg)
        out, inputs = COMMANDS[args.command](cfg)
        write_manifest(_manifest_for(out), args.command, cfg, inputs, started)
    except DivergenceError as exc:
        print(f"likeddr: error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (LikeDDRError, FileNotFoundError, IsADirectoryError) as exc:
        if isinstance(exc, ConfigError):
            print(SUBPARSERS[args.command].format_usage(), end="", file=sys.stderr)
        print(f"likeddr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"likeddr: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
