"""Command-line front end: ``python3 -m scidma <subcommand> ...``.

Every subcommand accepts ``--config FILE`` with ``key = value`` lines whose
keys are the long option names (dashes or underscores); flags given on the
command line take precedence.
"""

from __future__ import annotations

import argparse
import sys

from ..analysis.capacity import (TABLE_ROWS, capacity_gap, rows_to_csv, shannon_limit, sum_rate,
                                 sweep_users, threshold_table)
from ..analysis.density_evolution import threshold
from ..analysis.exit_chart import exit_curves, write_exit_csv
from ..code_construction import (CODES, couple, coupling_parts, lift, make_regular_protograph,
                                 named_code_parts, write_alist)
from .config import ConfigError, SimConfig, parse_config_text, read_parts


def _int_list(s: str) -> list[int]:
    return [int(x) for x in s.replace(",", " ").split()]


def _float_list(s: str) -> list[float]:
    return [float(x) for x in s.replace(",", " ").split()]


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _code_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--code", choices=sorted(CODES), help="named ensemble (c1 = (3,6) W=3, c2 = (3,4) W=2)")
    p.add_argument("--dv", type=int, help="variable degree of a regular ensemble (with --dc)")
    p.add_argument("--dc", type=int, help="check degree of a regular ensemble (with --dv)")
    p.add_argument("--parts-file", help="custom component matrices, blank-line separated")


def _parts(args, parser):
    if args.parts_file:
        return read_parts(args.parts_file)
    if args.dv is not None or args.dc is not None:
        if args.dv is None or args.dc is None:
            parser.error("--dv and --dc must be given together")
        return coupling_parts(args.dv, args.dc)
    return named_code_parts(args.code or "c1")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scidma", description="SC-LDPC coded IDMA workbench")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="key = value file supplying option defaults")
        p.add_argument("--csv", "--out", dest="csv", help="write results to this path instead of stdout")
        return p

    p = add("threshold", "density-evolution decoding threshold")
    _code_args(p)
    p.add_argument("--users", type=int, default=8)
    p.add_argument("--dr", type=int, default=4)
    p.add_argument("--L", type=int, default=100)
    p.add_argument("--uncoupled", action="store_true", help="threshold of the underlying block ensemble")
    p.add_argument("--table", action="store_true", help="all rows of the reference threshold table")
    p.add_argument("--lo", type=float, default=-5.0)
    p.add_argument("--hi", type=float, default=20.0)
    p.add_argument("--max-iters", type=int, default=10_000)
    p.add_argument("--phi-model", choices=["chung", "exact"], default="chung")

    p = add("exit", "EXIT curves and DE trajectories")
    p.add_argument("--dv", type=int, default=3)
    p.add_argument("--dc", type=int, default=6)
    p.add_argument("--users", type=int, default=8)
    p.add_argument("--dr", type=int, default=4)
    p.add_argument("--gamma", type=float, required=False)
    p.add_argument("--L", type=int, default=100, help="length of the coupled chain for its trajectory (0: none)")
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--iters", type=int, default=200)

    p = add("ber", "Monte Carlo BER simulation")
    p.add_argument("--code", choices=sorted(CODES))
    p.add_argument("--parts-file")
    p.add_argument("--L", type=int)
    p.add_argument("--Z", type=int)
    p.add_argument("--dr", type=int, dest="d_r")
    p.add_argument("--users", type=int, dest="n_users")
    p.add_argument("--channel", choices=["awgn", "rayleigh"])
    p.add_argument("--gammas", type=_float_list, help="comma-separated SNR points in dB")
    p.add_argument("--Wd", type=int, dest="W_d", help="window length in positions (0: full-span BP)")
    p.add_argument("--Imax", type=int, dest="I_max")
    p.add_argument("--freeze", choices=["hard", "keep"],
                   help="positions leaving the window: pinned hard decisions or last messages")
    p.add_argument("--interleaver", choices=["subblock", "full"])
    p.add_argument("--allow-full-windowed", action="store_const", const=True)
    p.add_argument("--max-frames", type=int)
    p.add_argument("--max-errors", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lift-seed", type=int)
    p.add_argument("--encode", action="store_const", const=True, help="transmit real codewords")
    p.add_argument("--compare-interleavers", action="store_true")

    p = add("sweep-users", "threshold gap to GMAC capacity over the number of users")
    _code_args(p)
    p.add_argument("--dr", type=_int_list, default=[10])
    p.add_argument("--users", type=_int_list, default=[8, 16, 24, 32, 40, 48, 56, 64])
    p.add_argument("--L", type=int, default=100)

    p = add("construct", "lift a coupled code and print its parity-check matrix (alist)")
    _code_args(p)
    p.add_argument("--L", type=int, default=20)
    p.add_argument("--Z", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--style", choices=["random", "circulant"], default="random")
    return ap


def _apply_config_defaults(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    """Pre-scan ``--config`` and install its values as subparser defaults."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config or not known.command:
        return
    values = parse_config_text(open(known.config).read())
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sp = subparsers.choices.get(known.command)
    if sp is None:
        return
    actions = {}
    for a in sp._actions:
        for opt in a.option_strings:
            actions[opt.lstrip("-").replace("-", "_")] = a
        actions.setdefault(a.dest, a)
    defaults = {}
    for key, raw in values.items():
        a = actions.get(key.replace("-", "_"))
        if a is None:
            raise ConfigError(f"unknown key {key!r} for '{known.command}'")
        if a.type is not None:
            val = a.type(raw)
        elif a.const is not None or isinstance(a, argparse._StoreTrueAction):
            val = raw.strip().lower() in ("1", "true", "yes", "on")
        else:
            val = raw
        defaults[a.dest] = val
    sp.set_defaults(**defaults)


def _cmd_threshold(args, parser) -> int:
    kw = dict(max_iters=args.max_iters, phi_model=args.phi_model)
    if args.table:
        rows = threshold_table(args.users, args.L, TABLE_ROWS, args.lo, args.hi, **kw)
        _emit(rows_to_csv(rows, header_comment=f"N = {args.users}, L = {args.L}"), args.csv)
        return 0
    parts = _parts(args, parser)
    cp = couple(parts, args.L)
    proto = cp.uncoupled if args.uncoupled else cp
    th = threshold(proto, args.users, args.dr, lo_db=args.lo, hi_db=args.hi, **kw)
    r = sum_rate(cp.asymptotic_rate, args.users, args.dr)
    if th is None:
        text = f"threshold: none below {args.hi:g} dB\n"
    else:
        text = (f"threshold: {th:.2f} dB  (R_sum = {r:.4g}, Shannon limit {shannon_limit(r):.2f} dB, "
                f"gap {capacity_gap(r, th):.2f} dB)\n")
    _emit(text, args.csv)
    return 0


def _cmd_exit(args, parser) -> int:
    if args.gamma is None:
        parser.error("exit requires --gamma")
    coupled = couple(coupling_parts(args.dv, args.dc), args.L) if args.L else None
    curves = exit_curves(args.dv, args.dc, args.users, args.dr, args.gamma, args.points, coupled, args.iters)
    _emit(write_exit_csv(curves), args.csv)
    return 0


def _cmd_ber(args, parser) -> int:
    from .ber import run_ber, run_interleaver_comparison

    if not args.gammas:
        parser.error("ber requires --gammas (or 'gammas' in the config file)")
    fields = {f for f in SimConfig.__dataclass_fields__}
    over = {k: v for k, v in vars(args).items() if k in fields and v is not None}
    if args.encode:
        over["all_zero"] = False
    try:
        cfg = SimConfig().with_overrides(**over)
        if args.compare_interleavers:
            results = run_interleaver_comparison(cfg.validate(), progress=_progress)
            _emit("".join(r.to_csv() for r in results.values()), args.csv)
        else:
            _emit(run_ber(cfg.validate(), progress=_progress).to_csv(), args.csv)
    except ConfigError as exc:
        parser.error(str(exc))
    return 0


def _progress(point) -> None:
    print(f"gamma {point.gamma_db:.2f} dB: BER {point.ber:.3e} ({point.errors} errors, "
          f"{point.frames} frames, {point.seconds:.1f}s)", file=sys.stderr)


def _cmd_sweep(args, parser) -> int:
    rows = sweep_users(_parts(args, parser), args.dr, args.users, args.L)
    _emit(rows_to_csv(rows), args.csv)
    return 0


def _cmd_construct(args, parser) -> int:
    cp = couple(_parts(args, parser), args.L)
    pc = lift(cp, args.Z, seed=args.seed, style=args.style)
    _emit(write_alist(pc), args.csv)
    return 0


COMMANDS = {"threshold": _cmd_threshold, "exit": _cmd_exit, "ber": _cmd_ber,
            "sweep-users": _cmd_sweep, "construct": _cmd_construct}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config_defaults(parser, argv)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"scidma: error: {exc}", file=sys.stderr)
        return 2
    args = parser.parse_args(argv)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    try:
        return COMMANDS[args.command](args, sub)
    except BrokenPipeError:
        sys.stderr.close()
        return 0
    except ValueError as exc:
        sub.error(str(exc))
        return 2  # not reached
