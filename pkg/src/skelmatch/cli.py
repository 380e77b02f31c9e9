"""``skelmatch`` command line.

Exit codes: 0 success, 1 partial success, 2 I/O or unknown name,
3 shape/validation, 4 solver failure.
"""

import argparse
import json
import os
import sys

from . import __version__
from .dataset import Dataset, write_manifest
from .episodes import (EpisodeSpec, evaluate_protocol1, evaluate_protocol2, reduced_training_report,
                       report_to_json, summary_csv)
from .errors import (ConfigError, SamplingError, ShapeError, SkeletonParseError, SolverError,
                     TensorFormatError)
from .matching import KINDS, MatchStrategy, match
from .ot import EXACT_LIMIT, SolverOptions
from .pyramid import build_pyramid, load_pyramid_dir
from .skeleton import label_from_id, load_sequence, sequence_features
from .splits import builtin_splits, load_split
from .tensorio import read_tensor, write_tensor

EXIT_OK, EXIT_PARTIAL, EXIT_IO, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2, 3, 4

SEQUENCE_EXTS = (".skeleton", ".json")


def _err(msg):
    print(f"skelmatch: error: {msg}", file=sys.stderr)


def exit_code(exc):
    if isinstance(exc, SolverError):
        return EXIT_SOLVER
    if isinstance(exc, (ShapeError, ConfigError, SamplingError, ValueError)):
        return EXIT_INVALID
    return EXIT_IO


def _collect_inputs(paths):
    files = []
    for p in paths:
        if os.path.isdir(p):
            for root, _, names in os.walk(p):
                files.extend(os.path.join(root, n) for n in names if n.endswith(SEQUENCE_EXTS))
        else:
            files.append(p)
    return sorted(files)


def cmd_convert(args):
    os.makedirs(args.out, exist_ok=True)
    entries, failed = [], 0
    for path in _collect_inputs(args.inputs):
        try:
            seq = load_sequence(path)
            fmap = sequence_features(seq, args.frames, not args.no_center, args.bodies)
            sid = seq.source_id or os.path.splitext(os.path.basename(path))[0]
            name = sid + ".stsk"
            write_tensor(fmap, os.path.join(args.out, name), args.dtype)
        except (OSError, SkeletonParseError, ShapeError, ValueError) as exc:
            failed += 1
            _err(f"{path}: {exc}")
            continue
        label = seq.label if seq.label is not None else label_from_id(sid)
        entries.append({"id": sid, "label": label, "path": name})
    write_manifest(entries, os.path.join(args.out, "manifest.json"))
    print(f"converted {len(entries)} of {len(entries) + failed} inputs")
    if failed:
        return EXIT_PARTIAL if entries else EXIT_IO
    return EXIT_OK


def load_pyramid(path, frames=32):
    """A pyramid from a sequence file, a scale-1 ``.stsk`` map or a pyramid directory."""
    if os.path.isdir(path):
        return load_pyramid_dir(path)
    if path.endswith(".stsk"):
        return build_pyramid(read_tensor(path))
    return build_pyramid(sequence_features(load_sequence(path), frames))


def _solver_options(args):
    return SolverOptions(args.solver or "auto", 0.05 if args.epsilon is None else args.epsilon,
                         exact_limit=args.exact_limit or EXACT_LIMIT)


def cmd_match(args):
    a = load_pyramid(args.a, args.frames or 32)
    b = load_pyramid(args.b, args.frames or 32)
    strategy = MatchStrategy(args.strategy or "MC", _solver_options(args), args.inner_normalization)
    score = match(a, b, strategy)
    print(score.to_json(indent=2, sort_keys=True))
    return EXIT_OK


def cmd_eval(args):
    from .config import load_config

    overrides = {
        "manifest": args.manifest, "split": args.split, "protocol": args.protocol,
        "episodes": args.episodes, "n_way": args.n_way, "n_query": args.n_query, "strategy": args.strategy, "solver": args.solver,
        "epsilon": args.epsilon, "exact_limit": args.exact_limit, "frames": args.frames, "seed": args.seed, "out": args.out,
        "workers": args.workers, "shuffle_labels": True if args.shuffle_labels else None,
    }
    cfg = load_config(args.config, overrides).validate()
    try:
        split = load_split(cfg.split)
    except KeyError as exc:
        _err(exc.args[0])
        return EXIT_IO
    dataset = Dataset.from_manifest(cfg.manifest, frames=cfg.frames)
    strategy = cfg.match_strategy()
    if cfg.protocol == 1:
        spec = EpisodeSpec(cfg.n_way, 1, cfg.n_query, cfg.seed)
        report = evaluate_protocol1(dataset, split, spec, strategy, cfg.episodes,
                                    cfg.shuffle_labels, cfg.workers)
    else:
        if not split.exemplar_ids:
            raise ConfigError(f"split: {split.name!r} has no exemplars for protocol 2", "config-invalid")
        report = evaluate_protocol2(dataset, split, strategy, cfg.workers)
    report["config"] = cfg.to_dict()
    os.makedirs(cfg.out, exist_ok=True)
    stem = f"report_p{cfg.protocol}_{cfg.strategy}"
    with open(os.path.join(cfg.out, stem + ".json"), "w") as f:
        f.write(report_to_json(report))
    with open(os.path.join(cfg.out, stem + ".csv"), "w") as f:
        f.write(summary_csv([report]))
    ci = f" +/- {report['ci95']:.4f}" if "ci95" in report else ""
    n = report.get("n_episodes", report.get("n_queries"))
    unit = "episodes" if cfg.protocol == 1 else "queries"
    print(f"protocol {cfg.protocol} {cfg.strategy} {split.name}: accuracy {report['accuracy']:.4f}{ci} over {n} {unit}")
    return EXIT_OK


def cmd_splits(args):
    if args.name is None:
        for s in builtin_splits():
            print(s.name)
        return EXIT_OK
    try:
        split = load_split(args.name)
    except KeyError as exc:
        _err(exc.args[0])
        return EXIT_IO
    if args.reduced:
        counts = [int(x) for x in args.reduced.split(",")]
        doc = [s.to_dict() for s in reduced_training_report(split, counts, args.seed or 0)]
    else:
        doc = split.to_dict()
    text = json.dumps(doc, indent=2)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_synth(args):
    from .synthetic import write_synthetic

    manifest, split = write_synthetic(
        args.out, n_classes=args.classes, per_class=args.per_class, C=args.channels,
        T=args.frames or 32, sigma=args.sigma, seed=args.seed or 0,
    )
    print(f"wrote {manifest} and {split}")
    return EXIT_OK


def _common(p, strategy=True):
    if strategy:
        p.add_argument("--strategy", choices=KINDS)
        p.add_argument("--solver", choices=("exact", "sinkhorn", "auto"))
        p.add_argument("--epsilon", type=float)
        p.add_argument("--exact-limit", type=int, help="largest P*Q solved exactly under --solver auto/exact")
    p.add_argument("--frames", type=int)
    p.add_argument("--seed", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="skelmatch", description="Multi-scale skeleton matching by optimal transport.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="sequences to .stsk tensors plus a manifest")
    p.add_argument("inputs", nargs="*")
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=32)
    p.add_argument("--bodies", choices=("primary", "both"), default="primary")
    p.add_argument("--no-center", action="store_true")
    p.add_argument("--dtype", choices=("float32", "float64"), default="float32")
    p.set_defaults(fn=cmd_convert)

    p = sub.add_parser("match", help="score two sequences")
    p.add_argument("a")
    p.add_argument("b")
    _common(p)
    p.add_argument("--inner-normalization", action="store_true")
    p.set_defaults(fn=cmd_match)

    p = sub.add_parser("eval", help="run protocol 1 or 2")
    p.add_argument("--config")
    p.add_argument("--manifest")
    p.add_argument("--split")
    p.add_argument("--protocol", type=int, choices=(1, 2))
    p.add_argument("--episodes", type=int)
    p.add_argument("--n-way", type=int)
    p.add_argument("--n-query", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--shuffle-labels", action="store_true")
    p.add_argument("--out")
    _common(p)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("splits", help="print a built-in split as JSON")
    p.add_argument("name", nargs="?")
    p.add_argument("--reduced", help="comma-separated training-class counts")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_splits)

    p = sub.add_parser("synth", help="write a synthetic clustered dataset")
    p.add_argument("out")
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--per-class", type=int, default=16)
    p.add_argument("--channels", type=int, default=16)
    p.add_argument("--sigma", type=float, default=0.15)
    _common(p, strategy=False)
    p.set_defaults(fn=cmd_synth)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (OSError, SkeletonParseError, TensorFormatError) as exc:
        _err(str(exc))
        return EXIT_IO
    except (ShapeError, ConfigError, SamplingError, SolverError, ValueError) as exc:
        code = getattr(exc, "code", None)
        _err(f"{exc} [{code}]" if code else str(exc))
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
