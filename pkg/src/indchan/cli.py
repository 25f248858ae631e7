"""Command-line entry point.

    indchan simulate --scheme adaptive --channel bsc:0.11 --n 10000 --trials 20
    indchan verify lemma4
    indchan convexity --n 200 --trials 1000
    indchan figure bsc_compare
    indchan bsc-curve --step 0.005
    indchan snr-eff clip:1 --power 1 --noise 0.1

Options may also come from a ``key=value`` file given with ``--config``;
flags on the command line win.  Exit status: 0 pass, 2 bound violation,
1 usage error.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import bounds, harness
from .channels import ChannelSpecError

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def read_config(path) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="indchan", description="Universal coding experiments")
    p.add_argument("--config", help="key=value file with default options")
    p.add_argument("--output", "-o", help="write CSV here instead of stdout")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="fixed-rate or adaptive Monte-Carlo sweep")
    for name, f in harness.ExperimentSpec.__dataclass_fields__.items():
        s.add_argument(f"--{name.replace('_', '-')}", dest=name, default=None)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--summary", action="store_true", help="print only the summary")

    v = sub.add_parser("verify", help="run a bound verification suite")
    v.add_argument("suite", choices=sorted(harness.SUITES))
    v.add_argument("--seed", type=int, default=None)

    c = sub.add_parser("convexity", help="check the deviation-from-convexity bounds")
    c.add_argument("--n", type=int, default=None)
    c.add_argument("--p", default=None, help="comma-separated subset counts")
    c.add_argument("--prior", default=None)
    c.add_argument("--trials", type=int, default=None)
    c.add_argument("--seed", type=int, default=None)

    f = sub.add_parser("figure", help="emit figure data")
    f.add_argument("which", choices=["continuous_lb", "bsc_compare"])
    f.add_argument("--set", dest="parameter_set", type=int, default=None, choices=[1, 2])
    f.add_argument("--points", type=int, default=None)

    b = sub.add_parser("bsc-curve", help="BSC capacity vs Gaussian-input rate")
    b.add_argument("--step", type=float, default=None)

    e = sub.add_parser("snr-eff", help="effective SNR of a named nonlinearity")
    e.add_argument("func", help="identity, zero, square, sign or clip:c")
    e.add_argument("--power", type=float, default=None)
    e.add_argument("--noise", type=float, default=None)
    return p


def _merge(args: argparse.Namespace, config: dict, keys, defaults: dict) -> dict:
    out = {}
    for k in keys:
        val = getattr(args, k, None)
        if val is None and k in config:
            val = config[k]
        if val is None:
            val = defaults.get(k)
        if val is not None:
            out[k] = val
    return out


def _emit(rows, comments, args, out):
    if args.output:
        with open(args.output, "w") as fh:
            harness.write_csv(rows, fh, comments)
    else:
        harness.write_csv(rows, out, comments)


def run(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        config = read_config(args.config) if args.config else {}
        return _dispatch(args, config, out)
    except UsageError as exc:
        print(f"indchan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ChannelSpecError as exc:
        print(f"indchan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"indchan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _dispatch(args, config, out) -> int:
    echo = [f"command={args.command}"] + [f"{k}={v}" for k, v in sorted(config.items())]
    if args.command == "simulate":
        keys = list(harness.ExperimentSpec.__dataclass_fields__)
        spec = harness.ExperimentSpec.from_mapping(_merge(args, config, keys, {}))
        workers = int(args.workers if args.workers != 1 else config.get("workers", 1))
        res = harness.run_sweep(spec, workers=workers)
        summary = res.summary()
        comments = spec.comments() + [f"{k}={v}" for k, v in summary.items()]
        rows = [summary] if args.summary else res.rows
        _emit(rows, comments, args, out)
        return EXIT_OK

    if args.command == "verify":
        kw = {}
        seed = args.seed if args.seed is not None else config.get("seed")
        if seed is not None and args.suite != "lemma3":
            kw["seed"] = int(seed)
        rep = harness.verify_bounds(args.suite, **kw)
        _emit(rep.rows, echo + [f"suite={rep.suite}", f"passed={rep.passed}"], args, out)
        return EXIT_OK if rep.passed else EXIT_VIOLATION

    if args.command == "convexity":
        kw = _merge(args, config, ["n", "p", "prior", "trials", "seed"],
                    {"n": 200, "p": "2,3,4", "prior": "binary", "trials": 1000, "seed": 0})
        ps = tuple(int(v) for v in str(kw["p"]).split(","))
        rep = harness.convexity_check(int(kw["n"]), ps, kw["prior"], int(kw["trials"]),
                                      int(kw["seed"]))
        summary = {"kind": rep.kind, "n": rep.n, "trials": rep.trials,
                   "violations": rep.violations, "max_excess": rep.max_excess,
                   "mean_deviation": rep.mean_deviation,
                   "step_sequence_deviation": harness.step_sequence_deviation(int(kw["n"]))}
        _emit([summary], echo, args, out)
        return EXIT_OK if rep.passed else EXIT_VIOLATION

    if args.command == "figure":
        kw = _merge(args, config, ["parameter_set", "points"], {"parameter_set": 1, "points": 201})
        rows = harness.figure_data(args.which, int(kw["parameter_set"]), int(kw["points"]))
        _emit(rows, echo + [f"figure={args.which}", f"set={kw['parameter_set']}"], args, out)
        return EXIT_OK

    if args.command == "bsc-curve":
        step = float(_merge(args, config, ["step"], {"step": 0.005})["step"])
        eps = np.round(np.arange(0.0, 0.5 + step / 2, step), 12)
        C, R = bounds.bsc_comparison(eps)
        rows = [{"eps": float(e), "C": float(c), "R": float(r),
                 "ok": int(r <= c + 1e-9 and r >= 2 / np.pi * c - 1e-9)}
                for e, c, r in zip(eps, C, R)]
        _emit(rows, echo + [f"step={step}"], args, out)
        return EXIT_OK if all(r["ok"] for r in rows) else EXIT_VIOLATION

    if args.command == "snr-eff":
        kw = _merge(args, config, ["power", "noise"], {"power": 1.0, "noise": 0.1})
        res = bounds.effective_snr(args.func, float(kw["power"]), float(kw["noise"]))
        row = {"func": args.func, "power": float(kw["power"]), "noise": float(kw["noise"]),
               "gamma": res.gamma, "p_eff": res.p_eff, "n_eff": res.n_eff,
               "snr": res.snr, "rho": res.rho}
        _emit([row], echo, args, out)
        return EXIT_OK
    raise UsageError(f"unknown command {args.command}")


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
