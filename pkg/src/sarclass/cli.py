"""``sarclass`` command line."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence, TextIO

from . import __version__
from .baselines import default_matcher
from .classifiers import ClassifierSpec, load_model, save_model
from .classifiers.model import DEFAULTS, KINDS
from .corpus import (Dataset, Task, apply_filters, ingest_git_log, load_dataset, parse_csv,
                     parse_jsonl, save_dataset, stratified_sample)
from .errors import DataError
from .pipeline import FeatureConfig, classify_message, train_on_dataset
from .preprocess import PreprocessConfig, load_stopwords

log = logging.getLogger("sarclass")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    """Everything needed to replay a run; embedded in every report."""

    task: str | None = None
    classifier: str = "lr"
    params: dict = field(default_factory=dict)
    one_vs_all: bool | None = None
    seed: int = 42
    k: int = 10
    batch: int = 100
    ngram_min: int = 1
    ngram_max: int = 2
    top_k: int | None = None
    select: bool = True
    normalize: bool = True
    lemmatize: bool = True
    min_token_len: int = 1
    stopwords: str | None = None
    data: str | None = None

    def spec(self) -> ClassifierSpec:
        return ClassifierSpec(self.classifier, dict(self.params), self.seed, self.one_vs_all)

    def features(self) -> FeatureConfig:
        return FeatureConfig(self.ngram_min, self.ngram_max, self.top_k, self.select,
                             self.normalize)

    def preprocess(self) -> PreprocessConfig:
        base = PreprocessConfig()
        words = load_stopwords(self.stopwords) if self.stopwords else base.stopwords
        return PreprocessConfig(words, self.lemmatize, self.min_token_len)

    def resolved(self) -> dict:
        d = asdict(self)
        d["params"] = self.spec().resolved()
        return d


# flag dest -> hyperparameter name, per classifier kind
_HYPER_FLAGS = {
    "l2": "l2", "learning_rate": "learning_rate", "epochs": "epochs", "tol": "tol",
    "accelerated": "accelerated", "n_trees": "n_trees", "max_features": "max_features",
    "bootstrap": "bootstrap", "min_leaf": "min_leaf", "max_depth": "max_depth",
    "n_rounds": "n_rounds",
}
_CONFIG_KEYS = {f.name for f in fields(RunConfig)}


def _max_features(text: str):
    return text if text in ("sqrt", "all") else int(text)


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _add_run_flags(p: argparse.ArgumentParser, data: bool = True) -> None:
    g = p.add_argument_group("run")
    g.add_argument("--config", help="JSON file with any of these settings")
    if data:
        g.add_argument("--data", help="labeled dataset (.jsonl or .csv)")
    g.add_argument("--task", choices=[t.value for t in Task])
    g.add_argument("--classifier", choices=KINDS)
    g.add_argument("--seed", type=int)
    g.add_argument("--k", type=int, help="cross-validation folds (default 10)")
    g.add_argument("--one-vs-all", type=_bool, help="force or forbid the one-vs-all wrapper")
    h = p.add_argument_group("hyperparameters")
    h.add_argument("--l2", type=float, help=f"lr (default {DEFAULTS['lr']['l2']})")
    h.add_argument("--learning-rate", type=float, help="lr (0.1) or gbm (0.1) step size")
    h.add_argument("--epochs", type=int, help="lr (500) or perceptron (10) passes")
    h.add_argument("--tol", type=float, help="lr gradient-norm stop (1e-6)")
    h.add_argument("--accelerated", type=_bool, help="lr Nesterov momentum (true)")
    h.add_argument("--n-trees", type=int, help="rf (100)")
    h.add_argument("--max-features", type=_max_features, help="rf: sqrt, all or a count")
    h.add_argument("--bootstrap", type=_bool, help="rf (true)")
    h.add_argument("--min-leaf", type=int, help="rf (1)")
    h.add_argument("--max-depth", type=int, help="rf (unlimited) or gbm (3)")
    h.add_argument("--n-rounds", type=int, help="gbm (100)")
    f = p.add_argument_group("features")
    f.add_argument("--ngram-min", type=int)
    f.add_argument("--ngram-max", type=int)
    f.add_argument("--top-k", type=int,
                   help="Fisher-score features kept (default: every positive score, max 5000)")
    f.add_argument("--select", type=_bool, help="apply Fisher selection (true)")
    f.add_argument("--normalize", type=_bool, help="L2-normalize vectors (true)")
    f.add_argument("--lemmatize", type=_bool)
    f.add_argument("--min-token-len", type=int)
    f.add_argument("--stopwords", help="stopword file, one word per line")


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    """Defaults, then the ``--config`` file, then explicit flags."""
    merged: dict[str, Any] = {}
    params: dict[str, Any] = {}
    cfg_path = getattr(ns, "config", None)
    if cfg_path:
        try:
            raw = json.loads(Path(cfg_path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise DataError(f"config file not found: {cfg_path}") from None
        except json.JSONDecodeError as e:
            raise DataError(f"config file {cfg_path}: {e}") from None
        if not isinstance(raw, dict):
            raise DataError(f"config file {cfg_path} must hold a JSON object")
        raw = raw.get("config", raw)  # a saved report can be replayed directly
        for key, value in raw.items():
            if key == "params":
                params.update(value or {})
            elif key in _HYPER_FLAGS:
                params[_HYPER_FLAGS[key]] = value
            elif key in _CONFIG_KEYS:
                merged[key] = value
            else:
                raise UsageError(f"unknown config key {key!r}")
    given = vars(ns)
    for key in _CONFIG_KEYS - {"params"}:
        if given.get(key) is not None:
            merged[key] = given[key]
    kind = merged.get("classifier", "lr")
    if kind not in KINDS:
        raise UsageError(f"unknown classifier {kind!r}")
    cli_params = {_HYPER_FLAGS[k]: v for k, v in given.items()
                  if k in _HYPER_FLAGS and v is not None}
    params.update(cli_params)
    # the config may carry resolved params of another kind; keep only the ones this kind knows
    merged["params"] = {k: v for k, v in params.items() if k in DEFAULTS[kind]}
    dropped = sorted(set(cli_params) - set(DEFAULTS[kind]))
    if dropped:
        flags = ", ".join("--" + d.replace("_", "-") for d in dropped)
        raise UsageError(f"{kind} does not take {flags}")
    try:
        cfg = RunConfig(**merged)
        cfg.spec()
        cfg.features()
    except (TypeError, ValueError) as e:
        raise UsageError(str(e)) from None
    return cfg


def _load_labeled(cfg: RunConfig) -> Dataset:
    if not cfg.data:
        raise UsageError("--data is required")
    d = load_dataset(cfg.data)
    if d.task is None:
        raise DataError(f"{cfg.data}: dataset carries no labels")
    if cfg.task and cfg.task != d.task.value:
        raise UsageError(f"--task {cfg.task} does not match the {d.task.value} dataset")
    if any(lab is None for lab in d.labels):
        raise DataError(f"{cfg.data}: every commit needs a label")
    return d


def _write(text: str, path: str | None, out: TextIO) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        out.write(text)


# subcommands


def cmd_prepare(ns, out, stdin) -> int:
    if ns.input == "-":
        buf = getattr(stdin, "buffer", None)
        raw = buf.read() if buf is not None else stdin.read().encode("utf-8")
    else:
        raw = Path(ns.input).read_bytes()
    fmt = ns.format or {".csv": "csv", ".log": "gitlog"}.get(Path(ns.input).suffix, "jsonl")
    if fmt == "gitlog":
        d = ingest_git_log(raw)
    else:
        text = raw.decode("utf-8")
        d = parse_csv(text) if fmt == "csv" else parse_jsonl(text)
    if ns.task and d.task is not None and d.task.value != ns.task:
        raise UsageError(f"--task {ns.task} does not match the {d.task.value} input")
    outcome = apply_filters(d, ns.min_chars)
    kept = outcome.kept
    if ns.per_class is not None:
        kept = stratified_sample(kept, ns.per_class, ns.seed)
    save_dataset(kept, ns.output)
    report = {**outcome.report(), "written": len(kept), "output": ns.output}
    _write(json.dumps(report, sort_keys=True, indent=2) + "\n", ns.rejections, out)
    return EXIT_OK


def cmd_train(ns, out) -> int:
    from .eval import dumps, feature_report

    cfg = resolve_config(ns)
    d = _load_labeled(cfg)
    model = train_on_dataset(d, cfg.spec(), cfg.features(), cfg.preprocess())
    save_model(model, ns.output)
    if ns.features_out:
        _write(dumps({"config": cfg.resolved(), **feature_report(model, ns.top_n)}),
               ns.features_out, out)
    out.write(json.dumps({"model": ns.output, "model_id": model.checksum,
                          "labels": [lab.value for lab in model.labels],
                          "n_features": model.n_features}) + "\n")
    return EXIT_OK


def cmd_evaluate(ns, out) -> int:
    from .eval import cross_validate

    cfg = resolve_config(ns)
    d = _load_labeled(cfg)
    rep = cross_validate(d, cfg.spec(), cfg.k, cfg.seed, cfg.features(), cfg.preprocess(),
                         cfg.resolved(), ns.workers)
    if ns.output:
        _write(rep.to_json(), ns.output, out)
    out.write(rep.to_json() if ns.json else rep.to_text())
    return EXIT_OK


def cmd_compare(ns, out) -> int:
    from .eval import compare

    cfg = resolve_config(ns)
    d = _load_labeled(cfg)
    rep = compare(d, cfg.spec(), cfg.k, cfg.seed, cfg.features(), cfg.preprocess(),
                  config=cfg.resolved(), workers=ns.workers)
    if ns.output:
        _write(rep.to_json(), ns.output, out)
    out.write(rep.to_json() if ns.json else rep.to_text())
    return EXIT_OK


def cmd_curve(ns, out) -> int:
    from .eval import learning_curve, mann_whitney_u

    cfg = resolve_config(ns)
    if ns.batch is not None:
        cfg.batch = ns.batch
    d = _load_labeled(cfg)
    curve = learning_curve(d, cfg.spec(), cfg.batch, cfg.k, cfg.seed, cfg.features(),
                           cfg.preprocess(), cfg.resolved())
    _write(curve.to_csv(), ns.output, out)
    if ns.summary:
        f = [m.f_measure for _, m in curve.points]
        half = len(f) // 2
        summary = {"config": cfg.resolved(), "points": curve.to_dict()["points"]}
        if half >= 1:
            mw = mann_whitney_u(f[:half], f[half:])
            summary["mann_whitney"] = {"u": mw.u, "p": mw.p, "method": mw.method}
        Path(ns.summary).write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n",
                                    encoding="utf-8")
    return EXIT_OK


def _messages(ns, stdin: TextIO):
    if ns.message is not None:
        yield ns.message
        return
    fh = stdin if ns.input in (None, "-") else open(ns.input, encoding="utf-8")
    try:
        for line in fh:
            line = line.rstrip("\r\n")
            if line.strip():
                yield line
    finally:
        if fh is not stdin:
            fh.close()


def cmd_classify(ns, out, stdin) -> int:
    if ns.server:
        return _classify_remote(ns, out, stdin)
    if not ns.model:
        raise UsageError("classify needs --model or --server")
    model = load_model(ns.model)
    if ns.task and model.task is not None and model.task.value != ns.task:
        raise UsageError(f"--task {ns.task} does not match the {model.task.value} model")
    matcher = default_matcher()
    for msg in _messages(ns, stdin):
        out.write(json.dumps(classify_message(model, msg, matcher), sort_keys=True) + "\n")
    return EXIT_OK


def _classify_remote(ns, out, stdin) -> int:
    import httpx

    url = ns.server.rstrip("/") + "/v1/classify"
    task = ns.task or "binary"
    with httpx.Client(timeout=ns.timeout) as client:
        for msg in _messages(ns, stdin):
            try:
                r = client.post(url, json={"message": msg, "task": task})
            except httpx.HTTPError as e:
                raise DataError(f"server unreachable: {e}") from None
            if r.status_code != 200:
                raise DataError(f"server answered {r.status_code}: {r.text}")
            out.write(json.dumps(r.json(), sort_keys=True) + "\n")
    return EXIT_OK


def cmd_patterns(ns, out, stdin) -> int:
    matcher = default_matcher()
    for msg in _messages(ns, stdin):
        hits = matcher.match_sar(msg)
        rec = {"sar": bool(hits), "matches": [p.text for p in hits]}
        if ns.category:
            rec["category"] = matcher.match_category(msg).to_dict()
        out.write(json.dumps(rec, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_synth(ns, out) -> int:
    from .synthetic import binary_corpus, multiclass_corpus

    if ns.task == "binary":
        n = ns.per_class or 1000
        d = binary_corpus(n, n, ns.seed)
    else:
        d = multiclass_corpus(ns.per_class or 300, ns.seed)
    save_dataset(d, ns.output)
    out.write(json.dumps({"output": ns.output, "size": len(d)}) + "\n")
    return EXIT_OK


def cmd_serve(ns, out) -> int:
    from .service import serve

    serve(ns.model, ns.multiclass_model, ns.port, ns.host)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sarclass", description="Classify refactoring commit messages.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("prepare", help="load, filter and sample a corpus")
    s.add_argument("--input", required=True, help="input file, or - for stdin")
    s.add_argument("--format", choices=["jsonl", "csv", "gitlog"])
    s.add_argument("--task", choices=[t.value for t in Task])
    s.add_argument("--output", required=True)
    s.add_argument("--rejections", help="write the filter report here instead of stdout")
    s.add_argument("--min-chars", type=int, default=7)
    s.add_argument("--per-class", type=int, help="stratified sample size per class")
    s.add_argument("--seed", type=int, default=42)

    s = sub.add_parser("train", help="fit a model on a whole dataset")
    _add_run_flags(s)
    s.add_argument("--output", required=True, help="model file to write")
    s.add_argument("--features-out", help="write top n-grams per label as JSON")
    s.add_argument("--top-n", type=int, default=20)

    for name, text in (("evaluate", "k-fold cross-validation"),
                       ("compare", "model vs keyword and random baselines")):
        s = sub.add_parser(name, help=text)
        _add_run_flags(s)
        s.add_argument("--output", help="write the JSON report here")
        s.add_argument("--json", action="store_true", help="print JSON instead of a table")
        s.add_argument("--workers", type=int, default=1, help="folds evaluated in parallel")

    s = sub.add_parser("curve", help="learning curve as CSV")
    _add_run_flags(s)
    s.add_argument("--batch", type=int, help="training-size step (default 100)")
    s.add_argument("--output", help="CSV path (default stdout)")
    s.add_argument("--summary", help="write points and a Mann-Whitney check as JSON")

    s = sub.add_parser("classify", help="label messages with a trained model")
    s.add_argument("--model")
    s.add_argument("--task", choices=[t.value for t in Task])
    s.add_argument("--message")
    s.add_argument("--input", help="one message per line; '-' or omitted reads stdin")
    s.add_argument("--server", help="base URL of a running service to query instead")
    s.add_argument("--timeout", type=float, default=30.0)

    s = sub.add_parser("patterns", help="keyword baseline, no model needed")
    s.add_argument("--message")
    s.add_argument("--input")
    s.add_argument("--category", action="store_true", help="also report the quality category")

    s = sub.add_parser("synth", help="write a seeded synthetic corpus")
    s.add_argument("--task", choices=[t.value for t in Task], default="binary")
    s.add_argument("--per-class", type=int)
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--output", required=True)

    s = sub.add_parser("serve", help="run the HTTP service")
    s.add_argument("--model", required=True, help="binary model file")
    s.add_argument("--multiclass-model")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    return p


def run(argv: Sequence[str] | None = None, stdout: TextIO | None = None,
        stdin: TextIO | None = None) -> int:
    out = stdout or sys.stdout
    inp = stdin or sys.stdin
    try:
        ns = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        cmd = ns.command
        if cmd == "prepare":
            return cmd_prepare(ns, out, inp)
        if cmd in ("classify", "patterns"):
            if cmd == "patterns" and ns.message is None and ns.input is None and inp.isatty():
                raise UsageError("patterns needs --message or --input")
            handler = cmd_classify if cmd == "classify" else cmd_patterns
            return handler(ns, out, inp)
        return {"train": cmd_train, "evaluate": cmd_evaluate,
                "compare": cmd_compare, "curve": cmd_curve, "synth": cmd_synth,
                "serve": cmd_serve}[cmd](ns, out)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError, UnicodeDecodeError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
