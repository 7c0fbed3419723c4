"""``mimolab`` command-line front end.

Subcommands
-----------
fig1       rate versus N in the simplified model (closed form, deteq, Monte Carlo)
dimension  antennas needed to reach a target rate, per Rician factor
sweep      multicell geometric sweep averaged over UE drops
compare    deterministic equivalent versus Monte Carlo at one point
point      per-UE deterministic-equivalent report at one point

Ranges are written ``a,b,c`` (explicit list), ``a:b`` or ``a:b:step``.  For
antenna counts ``a:b`` doubles from ``a`` up to ``b``; for other axes it
steps by 1.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from collections import defaultdict

import numpy as np

from . import experiments as ex
from .errors import ConfigError, MimolabError
from .report import reports_to_csv, reports_to_json
from .scenario import ScenarioConfig, load_config

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_REGIME, EXIT_IO = 0, 1, 2, 3, 4


def parse_values(text: str, doubling: bool = False, integer: bool = False):
    """Parse ``a,b,c`` / ``a:b`` / ``a:b:step`` into a strictly increasing list."""
    cast = int if integer else float
    try:
        if ":" in text:
            parts = [float(x) for x in text.split(":")]
            if len(parts) not in (2, 3):
                raise ValueError
            lo, hi = parts[0], parts[1]
            out = []
            if len(parts) == 2 and doubling:
                if lo <= 0:
                    raise ValueError
                v = lo
                while v <= hi * (1 + 1e-12):
                    out.append(cast(v))
                    v *= 2
            else:
                step = parts[2] if len(parts) == 3 else 1.0
                if step <= 0:
                    raise ValueError
                n = int(math.floor((hi - lo) / step + 1e-9)) + 1
                out = [cast(round(lo + i * step, 12)) for i in range(n)]
        else:
            out = [cast(float(x)) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse value list {text!r}") from None
    if not out or any(b <= a for a, b in zip(out, out[1:])):
        raise ConfigError(f"value list {text!r} must be non-empty and strictly increasing")
    return out


def _schemes(text):
    out = tuple(s.strip().upper().replace("-", "") for s in text.split(",") if s.strip())
    bad = [s for s in out if s not in ("MRC", "SMMSE", "MRT", "RZF")]
    if bad or not out:
        raise ConfigError(f"unknown scheme(s) {bad or text!r}")
    return out


def _base_config(args, mode="simplified") -> ScenarioConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        mode = getattr(args, "mode", None) or mode
        cfg = ScenarioConfig.geometric() if mode == "geometric" else ScenarioConfig()
    over = {}
    for name in ("L", "K", "N", "alpha"):
        v = getattr(args, name, None)
        if v is not None:
            over[name] = v
    if getattr(args, "mode", None) and args.mode != cfg.mode:
        raise ConfigError(f"--mode {args.mode} conflicts with the config file mode {cfg.mode}")
    if args.seed is not None:
        over["rng_seed"] = args.seed
    return cfg.replace(**over) if over else cfg


def _seed(args, cfg):
    return cfg.rng_seed if args.seed is None else args.seed


def _format_rows(rows, fmt):
    if fmt == "json":
        return json.dumps(rows, indent=2, default=_json_default) + "\n"
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v)
                    for k, v in r.items()})
    return buf.getvalue()


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o))


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
        return
    with open(out, "w", newline="") as fh:
        fh.write(text)


def _summary(rows, rate_keys):
    """Per-scheme average of each rate column, one line per scheme."""
    acc = defaultdict(lambda: defaultdict(list))
    for r in rows:
        for key in rate_keys:
            v = r.get(key)
            if v is not None and not (isinstance(v, float) and math.isnan(v)):
                acc[r["scheme"]][key].append(v)
    lines = []
    for scheme, cols in acc.items():
        parts = [f"{k}={np.mean(v):.4f}" for k, v in cols.items()]
        lines.append(f"{scheme}: average SE [bit/s/Hz] " + " ".join(parts))
    return "\n".join(lines)


def cmd_fig1(args):
    cfg = _base_config(args, mode="simplified")
    kappas = parse_values(args.kappa)
    Ns = parse_values(args.n, doubling=True, integer=True)
    rows = ex.fig1_simplified_sweep(cfg, kappas, Ns, _schemes(args.schemes), args.samples,
                                    _seed(args, cfg))
    return rows, ("rate_closedform", "rate_deteq", "rate_mc")


def cmd_dimension(args):
    cfg = _base_config(args, mode="simplified")
    rows = ex.dimensioning(cfg, args.target_rate, parse_values(args.kappa_grid),
                           alpha=args.alpha, scheme=_schemes(args.scheme)[0])
    return rows, ()


def cmd_sweep(args):
    cfg = _base_config(args, mode="geometric")
    rows = ex.multicell_sweep(cfg, parse_values(args.kappa), parse_values(args.n, doubling=True,
                              integer=True), _schemes(args.schemes), args.drops, args.samples,
                              _seed(args, cfg))
    return rows, ("rate_deteq", "rate_mc")


def cmd_compare(args):
    cfg = _base_config(args, mode="simplified")
    if args.kappa is not None:
        cfg = cfg.replace(kappa=float(args.kappa))
    rows = ex.compare_deteq_mc(cfg, args.samples, _seed(args, cfg), _schemes(args.schemes))
    return rows, ("rate_deteq", "rate_mc")


def cmd_point(args):
    cfg = _base_config(args, mode="simplified")
    if args.kappa is not None:
        cfg = cfg.replace(kappa=float(args.kappa))
    reports = ex.single_point(cfg, _seed(args, cfg), _schemes(args.schemes))
    if args.format == "json":
        text = reports_to_json(reports)
    else:
        text = reports_to_csv(reports)
    _emit(text if text.endswith("\n") else text + "\n", args.out)
    rows = [{"scheme": r.scheme, "rate_deteq": r.mean_rate} for r in reports]
    return rows, None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mimolab", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, samples=10_000):
        p.add_argument("--config", help="scenario JSON file")
        p.add_argument("--seed", type=int, default=None, help="master RNG seed (u64)")
        p.add_argument("--samples", type=int, default=samples, help="Monte Carlo realizations")
        p.add_argument("--out", help="output path (stdout if omitted)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--L", type=int)
        p.add_argument("--K", type=int)
        p.add_argument("--alpha", type=float)

    p = sub.add_parser("fig1", help="rate versus N, simplified model")
    common(p)
    p.add_argument("--kappa", default="0,4")
    p.add_argument("--n", default="32:512")
    p.add_argument("--schemes", default="MRC,SMMSE")
    p.set_defaults(func=cmd_fig1)

    p = sub.add_parser("dimension", help="antennas needed for a target rate")
    common(p, samples=0)
    p.add_argument("--target-rate", type=float, default=2.0)
    p.add_argument("--kappa-grid", default="0:10")
    p.add_argument("--scheme", default="MRC")
    p.set_defaults(func=cmd_dimension)

    p = sub.add_parser("sweep", help="multicell geometric sweep")
    common(p, samples=0)
    p.add_argument("--kappa", default="0.5,4")
    p.add_argument("--n", default="16:256")
    p.add_argument("--drops", type=int, default=10)
    p.add_argument("--schemes", default="MRT,RZF")
    p.set_defaults(func=cmd_sweep)

    for name, func, hlp in (("compare", cmd_compare, "deteq versus Monte Carlo"),
                            ("point", cmd_point, "per-UE deteq report")):
        p = sub.add_parser(name, help=hlp)
        common(p)
        p.add_argument("--N", type=int)
        p.add_argument("--kappa", type=float)
        p.add_argument("--mode", choices=("simplified", "geometric"))
        p.add_argument("--schemes", default="MRC,SMMSE,MRT,RZF")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.samples < 0:
            raise ConfigError("--samples must be >= 0")
        rows, rate_keys = args.func(args)
        if rate_keys is not None:
            _emit(_format_rows(rows, args.format), args.out)
        if rows and "scheme" in rows[0] and rate_keys != ():
            print(_summary(rows, rate_keys or ("rate_deteq",)), file=sys.stderr)
    except OSError as e:
        print(f"mimolab: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except MimolabError as e:
        kind = {EXIT_CONFIG: "configuration error", EXIT_REGIME: "numerical regime error"}
        print(f"mimolab: {kind.get(e.exit_code, 'error')}: {e}", file=sys.stderr)
        return e.exit_code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
