"""``epgf`` command line: data preparation, training, serving, generation, scoring.

Precedence for every option is: command-line flag, then ``--config`` file,
then built-in default. The config file holds ``key = value`` lines whose
keys are the long flag names without dashes (``segment-len = 20``).

Exit codes: 0 success, 2 usage/config, 3 data, 4 model/transport.
Each run writes one JSON manifest line to stderr (and to ``--manifest``).
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import signal
import sys
import tempfile
import threading
import time
from importlib.metadata import PackageNotFoundError, version as pkg_version
from pathlib import Path

from .bioscore import ScorerConfig, bioscore
from .core import GenerationConfig, ScoreScope, affix
from .errors import ConfigError, EmptySequence, EPGFError
from . import datasets, engine, evaluation, remote
from .model import NgramModel, train_ngram

log = logging.getLogger("epgf")

DEFAULT_SEED = 42

EXIT_USAGE, EXIT_DATA, EXIT_MODEL = 2, 3, 4


def _version() -> str:
    try:
        return pkg_version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


@contextlib.contextmanager
def atomic_open(path, mode: str = "w"):
    """Write to a temp file beside ``path`` and rename into place on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, mode) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


@contextlib.contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with atomic_open(path) as fh:
            yield fh


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _gen_options(p: argparse.ArgumentParser) -> None:
    d = GenerationConfig()
    src = p.add_mutually_exclusive_group()
    src.add_argument("--model", help="n-gram model file")
    src.add_argument("--endpoint", help=f"logits server URL (default: ${remote.ENDPOINT_ENV})")
    p.add_argument("--tag", help="superfamily condition tag")
    p.add_argument("--num", type=int, default=d.num_candidates, help="candidates per round (N)")
    p.add_argument("--segment-len", type=int, default=d.segment_len, help="segment length in tokens (L)")
    p.add_argument("--tau0", type=float, default=d.tau0)
    p.add_argument("--tau-final", type=float, default=d.tau_final)
    p.add_argument("--gamma", type=float, default=d.gamma, help="tau decay factor")
    p.add_argument("--floor", type=float, default=d.score_floor, help="minimum acceptable BioScore")
    p.add_argument("--max-residues", type=int, default=d.max_residues)
    p.add_argument("--fallback-rounds", type=int, default=d.fallback_rounds)
    p.add_argument("--score-scope", choices=[s.value for s in ScoreScope], default=d.score_scope.value)
    p.add_argument("--length-normalize", action="store_true", help="rank candidates by per-token log-probability")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--count", type=int, default=1, help="number of sequences to emit")
    p.add_argument("--workers", type=int, default=1, help="concurrent generations")
    p.add_argument("--baseline", action="store_true", help="plain ancestral sampling (ablation arm)")
    p.add_argument("--scorer-config", help="scorer JSON config")
    p.add_argument("--trace-out", help="JSONL trace, one line per sequence")
    p.add_argument("--out", help="FASTA output (default: stdout)")
    p.add_argument("--id-prefix", default=None, help="FASTA id prefix (default: epgf or baseline)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="epgf", description=__doc__.split("\n\n")[0])
    parser.add_argument("--config", help="key = value defaults file")
    parser.add_argument("--manifest", help="also write the run manifest here")
    parser.add_argument("--replay", metavar="MANIFEST", help="re-run the command recorded in a manifest")
    parser.add_argument("--log-level", default="WARNING")
    parser.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("prepare-data", help="filter FASTA to the pretraining corpus")
    p.add_argument("--fasta", required=True)
    p.add_argument("--max-len", type=int, default=512, help="keep lengths strictly below this")
    p.add_argument("--affix", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--out", help="one sequence per line (default: stdout)")

    p = sub.add_parser("make-instructions", help="two-task instruction records as JSONL")
    p.add_argument("--annotations", required=True, help="TSV of residues-or-id <TAB> tag")
    p.add_argument("--fasta", help="FASTA for resolving ids in the annotations")
    p.add_argument("--max-len", type=int, default=256)
    p.add_argument("--split", type=float, default=0.9, help="train fraction")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)

    p = sub.add_parser("train", help="train the n-gram baseline")
    p.add_argument("--corpus", required=True, help="FASTA, or one (optionally affixed) sequence per line")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--tags", help="TSV of record id <TAB> tag; default reads tag=... from FASTA headers")
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="serve a model over HTTP")
    p.add_argument("--model", required=True)
    p.add_argument("--bind", default="127.0.0.1:8080")

    p = sub.add_parser("generate", help="generate sequences")
    _gen_options(p)

    p = sub.add_parser("score", help="BioScore every FASTA record, one JSON object per line")
    p.add_argument("--fasta", required=True)
    p.add_argument("--tag")
    p.add_argument("--scorer-config")
    p.add_argument("--out")

    p = sub.add_parser("evaluate", help="two-arm BioScore comparison")
    p.add_argument("--arm-a", required=True)
    p.add_argument("--arm-b", required=True)
    p.add_argument("--label-a", default="EPGF")
    p.add_argument("--label-b", default="baseline")
    p.add_argument("--reference")
    p.add_argument("--tag")
    p.add_argument("--scorer-config")
    p.add_argument("--report", help="JSON report path (default: stdout)")
    p.add_argument("--table", help="plain-text table path")
    return parser


def read_config(path) -> dict[str, str]:
    out = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{n}: expected 'key = value'")
        out[key.strip().lstrip("-")] = value.strip()
    return out


def _apply_config(parser: argparse.ArgumentParser, command: str, cfg: dict[str, str]) -> None:
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[command]
    by_dest = {}
    for action in sub._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                by_dest[opt[2:]] = action
    defaults = {}
    for key, value in cfg.items():
        action = by_dest.get(key)
        if action is None or key == "help":
            raise ConfigError(f"config key {key!r} is not an option of {command}")
        if isinstance(action, (argparse._StoreTrueAction, argparse.BooleanOptionalAction)):
            defaults[action.dest] = value.lower() in ("1", "true", "yes", "on")
        else:
            try:
                v = action.type(value) if action.type else value
            except ValueError:
                raise ConfigError(f"config key {key!r}: bad value {value!r}") from None
            if action.choices and v not in action.choices:
                raise ConfigError(f"config key {key!r}: {v!r} not in {list(action.choices)}")
            defaults[action.dest] = v
        if action.required:
            action.required = False
    sub.set_defaults(**defaults)


def _scorer(path) -> ScorerConfig:
    return ScorerConfig.from_file(path) if path else ScorerConfig.default()


def _load_corpus(path, tags_path=None):
    path = Path(path)
    text_head = path.open().read(1)
    if text_head == ">":
        records = list(datasets.parse_fasta(path))
        if tags_path:
            tag_of = dict(line.rstrip("\n").split("\t", 1) for line in open(tags_path)
                          if line.strip() and not line.startswith("#"))
            return [(r.residues, tag_of.get(r.id) or None) for r in records]
        return list(datasets.tagged_corpus(records))
    out = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if line:
            out.append((datasets.strip_affix(line) if line.startswith("Seq=<") else line, None))
    return out


# -- subcommands ---------------------------------------------------------------

def cmd_prepare_data(args, run):
    kept, stats = datasets.filter_pretraining(datasets.parse_fasta(args.fasta), args.max_len)
    with _output(args.out) as fh:
        for rec in kept:
            fh.write((affix(rec.residues) if args.affix else rec.residues) + "\n")
    run["stats"] = stats.to_dict()
    run["inputs"], run["outputs"] = [args.fasta], [args.out]


def cmd_make_instructions(args, run):
    stats = datasets.InstructionStats()
    pairs = datasets.read_annotations(args.annotations, args.fasta)
    records = list(datasets.build_instruction_records(pairs, args.max_len, stats))
    train, test = datasets.split_train_test(records, args.split, args.seed)
    for path, part in ((args.out_train, train), (args.out_test, test)):
        with atomic_open(path) as fh:
            for rec in part:
                fh.write(rec.to_json() + "\n")
    run["stats"] = {**stats.to_dict(), "train": len(train), "test": len(test)}
    run["inputs"] = [p for p in (args.annotations, args.fasta) if p]
    run["outputs"] = [args.out_train, args.out_test]


def cmd_train(args, run):
    corpus = _load_corpus(args.corpus, args.tags)
    model = train_ngram(corpus, order=args.order, alpha=args.alpha)
    with atomic_open(args.out) as fh:
        fh.write(model.dumps())
    run["stats"] = {"sequences": len(corpus), "contexts": len(model.counts), "model_id": model.model_id}
    run["inputs"], run["outputs"] = [args.corpus], [args.out]


def cmd_serve(args, run):
    model = NgramModel.load(args.model)
    handle = remote.serve(model, args.bind)
    print(f"serving {model.model_id} at {handle.url}", file=sys.stderr, flush=True)
    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())
    stop.wait()
    handle.shutdown()
    run["inputs"] = [args.model]


def _source(args):
    if args.model:
        return NgramModel.load(args.model)
    return remote.RemoteModel(args.endpoint)


def cmd_generate(args, run):
    model = _source(args)
    scorer = _scorer(args.scorer_config)
    cfg = GenerationConfig(
        num_candidates=args.num, segment_len=args.segment_len, tau0=args.tau0, tau_final=args.tau_final,
        gamma=args.gamma, score_floor=args.floor, max_residues=args.max_residues, seed=args.seed,
        fallback_rounds=args.fallback_rounds, score_scope=args.score_scope, length_normalize=args.length_normalize,
    )
    if args.tag is not None:
        model.alphabet.condition_id(args.tag)
    if args.count < 1 or args.workers < 1:
        raise ConfigError("--count and --workers must be positive")
    prefix = args.id_prefix or ("baseline" if args.baseline else "epgf")

    def one(i):
        seed = engine.sequence_seed(args.seed, i)
        if args.baseline:
            return engine.baseline_generate(model, cfg, args.tag, seed=seed), None, seed
        seq, trace = engine.generate(model, scorer, cfg, args.tag, seed=seed)
        return seq, trace, seed

    if args.workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(args.workers) as pool:
            results = list(pool.map(one, range(args.count)))
    else:
        results = [one(i) for i in range(args.count)]

    records = []
    for i, (seq, trace, seed) in enumerate(results):
        text = str(seq)
        try:
            score = f"{bioscore(seq, args.tag, scorer).overall:.6f}"
        except EmptySequence:
            score = "NA"
        stop = trace.stop_reason if trace else ("EOS" if seq.terminated else "MaxLength")
        records.append((f"{prefix}_{i:04d} tag={args.tag or '-'} bioscore={score} stop={stop} seed={seed}", text))
    with _output(args.out) as fh:
        datasets.write_fasta(records, fh)
    if args.trace_out:
        with atomic_open(args.trace_out) as fh:
            for _, trace, _ in results:
                if trace is not None:
                    fh.write(trace.dumps() + "\n")
    run["seed"] = args.seed
    run["inputs"] = [args.model or args.endpoint or os.environ.get(remote.ENDPOINT_ENV)]
    run["outputs"] = [p for p in (args.out, args.trace_out) if p]


def cmd_score(args, run):
    scorer = _scorer(args.scorer_config)
    n = 0
    with _output(args.out) as fh:
        for rec in datasets.parse_fasta(args.fasta):
            rep = bioscore(rec.residues, args.tag, scorer)
            fh.write(json.dumps({"id": rec.id, **rep.to_dict()}) + "\n")
            n += 1
    run["stats"] = {"scored": n}
    run["inputs"], run["outputs"] = [args.fasta], [args.out]


def cmd_evaluate(args, run):
    scorer = _scorer(args.scorer_config)
    arm_a = [r.residues for r in datasets.parse_fasta(args.arm_a)]
    arm_b = [r.residues for r in datasets.parse_fasta(args.arm_b)]
    ref = [r.residues for r in datasets.parse_fasta(args.reference)] if args.reference else None
    rep = evaluation.ablation_report(arm_a, arm_b, scorer, args.tag, (args.label_a, args.label_b), ref)
    with _output(args.report) as fh:
        fh.write(rep.dumps() + "\n")
    if args.table:
        with atomic_open(args.table) as fh:
            fh.write(rep.table())
    run["stats"] = {"relative_delta": rep.relative_delta}
    run["inputs"] = [p for p in (args.arm_a, args.arm_b, args.reference) if p]
    run["outputs"] = [p for p in (args.report, args.table) if p]


COMMANDS = {
    "prepare-data": cmd_prepare_data,
    "make-instructions": cmd_make_instructions,
    "train": cmd_train,
    "serve": cmd_serve,
    "generate": cmd_generate,
    "score": cmd_score,
    "evaluate": cmd_evaluate,
}


def _parse(argv: list[str]):
    parser = build_parser()
    pre, _ = parser.parse_known_args(argv)
    if pre.config and pre.command:
        _apply_config(parser, pre.command, read_config(pre.config))
    return parser, parser.parse_args(argv)


def dispatch(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser, args = _parse(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except EPGFError as exc:
        print(f"epgf: error: {exc}", file=sys.stderr)
        return exc.exit_code
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.replay:
        manifest = json.loads(Path(args.replay).read_text())
        return dispatch(manifest["argv"])
    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    resolved = {k: v for k, v in vars(args).items() if k not in ("replay",)}
    run = {"subcommand": args.command, "argv": argv, "config": resolved, "seed": resolved.get("seed"),
           "inputs": [], "outputs": [], "version": _version()}
    t0 = time.perf_counter()
    try:
        COMMANDS[args.command](args, run)
        code = 0
    except EPGFError as exc:
        print(f"epgf: error: {exc}", file=sys.stderr)
        code = exc.exit_code
    except (OSError, UnicodeDecodeError) as exc:
        print(f"epgf: error: {exc}", file=sys.stderr)
        code = EXIT_DATA
    except ValueError as exc:
        print(f"epgf: error: {exc}", file=sys.stderr)
        code = EXIT_DATA
    run["wall_clock_s"] = round(time.perf_counter() - t0, 6)
    run["exit_code"] = code
    line = json.dumps(run, default=str, sort_keys=True)
    print(line, file=sys.stderr)
    if args.manifest:
        with atomic_open(args.manifest) as fh:
            fh.write(line + "\n")
    return code


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
