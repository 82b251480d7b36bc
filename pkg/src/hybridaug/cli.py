"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 I/O
error. Randomized subcommands echo the effective seed on stderr.
"""

from __future__ import annotations

import argparse
import contextlib
import functools
import json
import os
import socket
import sys
from pathlib import Path

from .corpus import TABLE_ORDER, load_manifest
from .errors import DataError, HybridAugError
from .imageio import load_gray, save_gray
from .lossplot import plot_loss
from .metrics import (
    PredictionSet,
    SummaryStat,
    confusion,
    report,
    t_test_one_sample,
    t_test_two_sample,
)
from .phantom import PhantomConfig, generate_corpus
from .sampler import Strategy, materialize_offline, plan_offline
from .seeding import derived_rng
from .stream import serve
from .synthesis import (
    EligibilityReport,
    QCConfig,
    eligibility_report,
    extract_manifest_templates,
    load_template_store,
    save_template_store,
)
from .tradaug import TradAugConfig, apply_traditional

THREADS_ENV = "HYBRIDAUG_THREADS"


class UsageError(HybridAugError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip() != ""]


def _default_threads() -> int:
    return int(os.environ.get(THREADS_ENV, "1"))


def _echo_seed(args) -> None:
    print(f"seed: {args.seed}", file=sys.stderr)


def _write_text(out: str | None, text: str) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def build_parser() -> _Parser:
    parser = _Parser(prog="hybridaug", description=__doc__)
    parser.add_argument("--config", help="JSON file providing flag defaults")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def common(p, seed=True, out=False, threads=False):
        if seed:
            p.add_argument("--seed", type=int, default=0)
        if out:
            p.add_argument("--out", required=True)
        if threads:
            p.add_argument("--threads", type=int, default=_default_threads())

    p = sub.add_parser("gen-phantom", help="generate a synthetic phantom corpus")
    common(p, out=True)
    p.add_argument("--per-target", type=int, default=100)
    p.add_argument("--nt", type=int, default=500)
    p.add_argument("--image-size", type=int, default=160)
    p.add_argument("--nt-thoraxless", type=float, default=0.59)
    p.add_argument("--eccentric-fraction", type=float, default=0.05)
    p.add_argument("--eccentric-value", type=float, default=0.85)
    p.add_argument("--noise", type=float, default=6.0)
    p.add_argument("--blob-phase-jitter", type=float, default=0.12)
    p.add_argument(
        "--blob-contrast",
        default="95,95",
        help="LO,HI range for per-image blob contrast",
    )
    p.add_argument("--frames-per-patient", type=int, default=4)
    p.add_argument("--split", default="phantom")

    p = sub.add_parser("stats", help="eligibility audit / arithmetic")
    p.add_argument("--manifest")
    p.add_argument("--root")
    p.add_argument("--totals", type=_int_list, help="per-class totals, table order")
    p.add_argument("--eligible", type=_int_list, help="per-class eligible counts")
    p.add_argument("--overall-total", type=int)
    p.add_argument("--overall-eligible", type=int)
    p.add_argument("--max-eccentricity", type=float, default=0.75)
    p.add_argument("--min-area", type=int, default=64)
    p.add_argument("--out")

    p = sub.add_parser("extract", help="extract donor/acceptor template store")
    common(p, seed=False, out=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--root")
    p.add_argument("--max-eccentricity", type=float, default=0.75)
    p.add_argument("--min-area", type=int, default=64)
    p.add_argument("--allow-out-of-bounds", action="store_true")

    p = sub.add_parser("plan", help="offline dataset plan (table-style TSV)")
    p.add_argument("--donors", type=_int_list, required=True)
    p.add_argument("--originals", type=_int_list, required=True)
    p.add_argument("--fraction", type=float, default=0.9)
    p.add_argument("--classes", default=",".join(TABLE_ORDER))
    p.add_argument("--out")

    p = sub.add_parser("synth-offline", help="materialize an offline hybrid dataset")
    common(p, out=True)
    p.add_argument("--store", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--originals", type=_int_list, required=True)
    p.add_argument("--fraction", type=float, default=0.9)
    p.add_argument("--classes", default=",".join(TABLE_ORDER))

    p = sub.add_parser("serve", help="stream online-augmented batches")
    common(p, threads=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--store", required=True)
    p.add_argument(
        "--strategy",
        default=Strategy.CUT_PASTE_BALANCED.value,
        choices=[s.value for s in Strategy],
    )
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--image-size", type=int, default=80)
    p.add_argument("--aug-config", help="TradAugConfig JSON file")
    p.add_argument("--sink", help="output file, or - for stdout")
    p.add_argument("--listen", help="host:port to serve one TCP consumer")

    p = sub.add_parser("augment", help="traditional augmentation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--image")
    p.add_argument("--manifest")
    p.add_argument("--root")
    p.add_argument("--out")
    p.add_argument("--aug-config", help="TradAugConfig JSON file")
    p.add_argument("--dump-config", action="store_true")

    p = sub.add_parser("evaluate", help="score a predictions CSV")
    common(p, seed=False, out=True)
    p.add_argument("--preds", required=True)

    p = sub.add_parser("ttest", help="two-tailed t-test from summary stats")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument(
        "--two-sample",
        nargs=6,
        type=float,
        metavar=("M1", "SD1", "N1", "M2", "SD2", "N2"),
    )
    group.add_argument(
        "--one-sample", nargs=4, type=float, metavar=("MEAN", "SD", "N", "MU")
    )

    p = sub.add_parser("plot-loss", help="render a loss CSV as SVG")
    p.add_argument("csv")
    p.add_argument("svg")

    parser.subcommand_parsers = {
        name: sp for name, sp in sub.choices.items()
    }
    return parser


def cmd_gen_phantom(args) -> int:
    _echo_seed(args)
    contrast = tuple(float(v) for v in args.blob_contrast.split(","))
    if len(contrast) != 2:
        raise DataError("--blob-contrast expects LO,HI")
    config = PhantomConfig.with_counts(
        args.per_target,
        args.nt,
        image_size=args.image_size,
        nt_thoraxless_fraction=args.nt_thoraxless,
        eccentric_fraction=args.eccentric_fraction,
        eccentricity_when_eccentric=args.eccentric_value,
        noise_level=args.noise,
        blob_phase_jitter=args.blob_phase_jitter,
        blob_contrast_range=contrast,
        frames_per_patient=args.frames_per_patient,
        split_tag=args.split,
        seed=args.seed,
    )
    manifest, truths = generate_corpus(config, args.out)
    eligible = sum(1 for t in truths if t.eligible)
    print(f"wrote {len(manifest)} records to {args.out} ({eligible} eligible)")
    return 0


def _qc_from(args) -> QCConfig:
    return QCConfig(
        max_eccentricity=args.max_eccentricity,
        min_area=args.min_area,
        require_circle_in_bounds=not getattr(args, "allow_out_of_bounds", False),
    )


def cmd_stats(args) -> int:
    if args.manifest:
        manifest = load_manifest(args.manifest)
        rep = eligibility_report(manifest, _qc_from(args), root=args.root)
    elif args.totals and args.eligible:
        if len(args.totals) != len(TABLE_ORDER) or len(args.eligible) != len(TABLE_ORDER):
            raise DataError(
                f"--totals/--eligible need {len(TABLE_ORDER)} comma-separated values"
            )
        per_class = {
            lbl: (t, e) for lbl, t, e in zip(TABLE_ORDER, args.totals, args.eligible)
        }
        overall = None
        if args.overall_total is not None and args.overall_eligible is not None:
            overall = (args.overall_total, args.overall_eligible)
        rep = EligibilityReport.from_counts(per_class, overall)
    else:
        raise UsageError("stats needs --manifest or --totals/--eligible")
    _write_text(args.out, rep.to_tsv())
    return 0


def cmd_extract(args) -> int:
    manifest = load_manifest(args.manifest)
    pool, rep = extract_manifest_templates(manifest, _qc_from(args), root=args.root)
    save_template_store(args.out, pool.donors, pool.acceptors)
    sys.stderr.write(rep.to_tsv())
    print(f"stored {len(pool.donors)} donors and {len(pool.acceptors)} acceptors")
    return 0


def _plan_rows(args) -> list[tuple[str, int, int]]:
    classes = [c.strip() for c in args.classes.split(",") if c.strip()]
    if len(args.donors) != len(classes) or len(args.originals) != len(classes):
        raise DataError(
            f"--donors and --originals must each have {len(classes)} values"
        )
    return list(zip(classes, args.donors, args.originals))


def cmd_plan(args) -> int:
    plan = plan_offline(_plan_rows(args), args.fraction)
    _write_text(args.out, plan.to_tsv())
    return 0


def cmd_synth_offline(args) -> int:
    _echo_seed(args)
    pool = load_template_store(args.store)
    classes = [c.strip() for c in args.classes.split(",") if c.strip()]
    if len(args.originals) != len(classes):
        raise DataError(f"--originals must have {len(classes)} values")
    rows = [
        (lbl, len(pool.donors_with_label(lbl)), originals)
        for lbl, originals in zip(classes, args.originals)
    ]
    plan = plan_offline(rows, args.fraction)
    originals = load_manifest(args.manifest)
    dataset = materialize_offline(plan, pool, originals, args.seed, args.out)
    print(f"materialized {len(dataset.manifest)} records into {args.out}")
    return 0


@contextlib.contextmanager
def _open_sink(args):
    if args.listen:
        host, _, port = args.listen.rpartition(":")
        server = socket.create_server((host or "127.0.0.1", int(port)))
        try:
            conn, _ = server.accept()
            with conn, conn.makefile("wb") as fh:
                yield fh
        finally:
            server.close()
    elif args.sink is None or args.sink == "-":
        yield sys.stdout.buffer
    else:
        with open(args.sink, "wb") as fh:
            yield fh


def cmd_serve(args) -> int:
    _echo_seed(args)
    manifest = load_manifest(args.manifest)
    pool = load_template_store(args.store)
    eligibility = {rec.id: rec.id in pool.donors_by_id for rec in manifest}
    cfg = (
        TradAugConfig.from_json(Path(args.aug_config).read_text())
        if args.aug_config
        else TradAugConfig()
    )

    @functools.lru_cache(maxsize=4096)
    def _cached(path: str):
        return load_gray(path)

    with _open_sink(args) as sink:
        frames = serve(
            manifest,
            pool,
            lambda rec: _cached(rec.path),
            eligibility,
            Strategy.parse(args.strategy),
            args.seed,
            args.epochs,
            sink,
            batch_size=args.batch_size,
            image_size=args.image_size,
            tradaug_cfg=cfg,
            threads=args.threads,
        )
    print(f"wrote {frames} frames", file=sys.stderr)
    return 0


def cmd_augment(args) -> int:
    cfg = (
        TradAugConfig.from_json(Path(args.aug_config).read_text())
        if args.aug_config
        else TradAugConfig()
    )
    if args.dump_config:
        print(cfg.to_json())
        return 0
    _echo_seed(args)
    if not args.out:
        raise UsageError("augment needs --out")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    jobs: list[tuple[str, Path]] = []
    if args.image:
        jobs.append((Path(args.image).stem, Path(args.image)))
    elif args.manifest:
        manifest = load_manifest(args.manifest)
        for rec in manifest:
            path = Path(args.root, rec.path) if args.root else Path(rec.path)
            jobs.append((rec.id, path))
    else:
        raise UsageError("augment needs --image or --manifest")

    for i, (name, path) in enumerate(jobs):
        rng = derived_rng(args.seed, "augment", i)
        img = load_gray(path)
        augmented, rec = apply_traditional(img, cfg, rng)
        save_gray(out / f"{name}_aug.png", augmented)
        (out / f"{name}_aug.json").write_text(
            json.dumps(rec.__dict__, sort_keys=True) + "\n"
        )
    print(f"augmented {len(jobs)} image(s) into {out}")
    return 0


def cmd_evaluate(args) -> int:
    preds = PredictionSet.from_csv(args.preds)
    rep = report(confusion(preds))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(rep.to_json() + "\n")
    (out / "report.txt").write_text(rep.to_text())
    rep.confusion.to_csv(out / "confusion.csv")
    print(f"accuracy={rep.accuracy:.2f} macro_f1={rep.macro_f1:.2f}")
    return 0


def cmd_ttest(args) -> int:
    if args.two_sample:
        m1, s1, n1, m2, s2, n2 = args.two_sample
        p = t_test_two_sample(
            SummaryStat(m1, s1, int(n1)), SummaryStat(m2, s2, int(n2))
        )
    else:
        m, s, n, mu = args.one_sample
        p = t_test_one_sample(SummaryStat(m, s, int(n)), mu)
    print(f"p={p:.4f}")
    return 0


def cmd_plot_loss(args) -> int:
    plot_loss(args.csv, args.svg)
    return 0


_COMMANDS = {
    "gen-phantom": cmd_gen_phantom,
    "stats": cmd_stats,
    "extract": cmd_extract,
    "plan": cmd_plan,
    "synth-offline": cmd_synth_offline,
    "serve": cmd_serve,
    "augment": cmd_augment,
    "evaluate": cmd_evaluate,
    "ttest": cmd_ttest,
    "plot-loss": cmd_plot_loss,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)

    # --config provides defaults for any later flag.
    if "--config" in argv:
        idx = argv.index("--config")
        if idx + 1 >= len(argv):
            raise UsageError("--config needs a path")
        cfg_path = argv[idx + 1]
        try:
            overrides = json.loads(Path(cfg_path).read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"{cfg_path}: invalid JSON: {exc.msg}") from None
        if not isinstance(overrides, dict):
            raise DataError(f"{cfg_path}: config must be a JSON object")
        defaults = {key.replace("-", "_"): value for key, value in overrides.items()}
        parser.set_defaults(**defaults)
        for sp in parser.subcommand_parsers.values():
            known = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: v for k, v in defaults.items() if k in known})

    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help(sys.stderr)
        return 1
    return _COMMANDS[args.command](args)


def main(argv: list[str] | None = None) -> int:
    try:
        return run(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except HybridAugError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
