"""Command-line entry point.

Subcommands: gen-data, train, eval, ablate, profile, pr-curve. Failures exit
nonzero with a single ``error category=... message=...`` line on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..datamodel import RunConfig, load_config
from ..errors import SalRefineError
from ..metrics import max_f_beta, read_pr_csv, write_pr_csv
from .logs import kv, setup_logging

log = logging.getLogger("salrefine.cli")


def _config(path):
    return load_config(path) if path else RunConfig()


def cmd_gen_data(args):
    from ..synth import generate_dataset, write_dataset

    cfg = _config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    samples = generate_dataset(cfg, seed=seed)
    manifest = write_dataset(samples, args.out, flow_range=cfg.flow_range)
    log.info(kv(event="dataset_written", root=args.out, sequences=len(manifest.sequences), frames=len(samples)))


def cmd_train(args):
    from .train import train

    ckpt = train(_config(args.config), args.data, out=args.out)
    print(kv(epochs=ckpt.epoch, final_loss=repr(ckpt.loss_history[-1]) if ckpt.loss_history else "nan",
             checkpoint=args.out))


def cmd_eval(args):
    from .evaluate import evaluate

    config = load_config(args.config) if args.config else None
    rep = evaluate(args.ckpt, args.data, report_dir=args.report, config=config)
    print(kv(f_beta_max=repr(rep.f_beta_max), s_measure=repr(rep.s_measure), mae=repr(rep.mae)))


def cmd_ablate(args):
    from .ablate import ablate

    rows = ablate(_config(args.config), args.data, report_dir=args.report, log_every=0)
    for r in rows:
        print(kv(name=r.name, f_beta_max=repr(r.f_beta_max), s_measure=repr(r.s_measure), mae=repr(r.mae)))


def cmd_profile(args):
    from .profile import profile

    report = profile(args.ckpt, n_frames=args.frames)
    for c, share in report["shares"].items():
        print(kv(component=c, seconds_per_frame=f"{report['seconds_per_frame'][c]:.6f}", share=f"{share:.4f}"))
    if args.json:
        Path(args.json).write_text(json.dumps(report, indent=2) + "\n")


def cmd_pr_curve(args):
    pr = read_pr_csv(Path(args.report) / "pr_curve.csv")
    write_pr_csv(pr, args.out)
    print(kv(points=len(pr), f_beta_max=repr(max_f_beta(pr)), out=args.out))


def build_parser():
    p = argparse.ArgumentParser(prog="salrefine", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic video dataset")
    g.add_argument("--config")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a model")
    t.add_argument("--config")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--report", required=True)
    e.add_argument("--config", help="optional config checked against the checkpoint architecture")
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("ablate", help="run the ablation ladder")
    a.add_argument("--config")
    a.add_argument("--data", required=True)
    a.add_argument("--report", required=True)
    a.set_defaults(func=cmd_ablate)

    pf = sub.add_parser("profile", help="per-component runtime")
    pf.add_argument("--ckpt", required=True)
    pf.add_argument("--frames", type=int, default=32)
    pf.add_argument("--json")
    pf.set_defaults(func=cmd_profile)

    pr = sub.add_parser("pr-curve", help="export the aggregate PR curve of a report")
    pr.add_argument("--report", required=True)
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=cmd_pr_curve)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    setup_logging(logging.DEBUG if args.verbose else logging.INFO)
    try:
        args.func(args)
    except SalRefineError as exc:
        print(f"error {kv(category=exc.category, message=str(exc))}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error {kv(category=type(exc).__name__.lower(), message=str(exc))}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
