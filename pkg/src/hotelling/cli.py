"""Command-line front end.

Exit codes: 0 success, 1 usage or input error, 2 verification failed,
3 an internal oracle disagreed with the exact engine.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import line_failure as lf
from .core import (DELTA, UNIT, Segment, classic_equilibrium, el_check, validate)
from .dynamics import br_dynamics, is_nash, scan
from .errors import HotellingError, NoEquilibrium
from .player_failure import pf_nonexistence_probe, pf_payoffs_exact, pf_payoffs_montecarlo
from .variants import Classic, LineFailure, PlayerFailure, make_variant

EXIT_OK, EXIT_USAGE, EXIT_UNVERIFIED, EXIT_MISMATCH = 0, 1, 2, 3

QUADRATURE_TOL = 1e-10
ENUMERATION_TOL = 1e-12
MC_SIGMAS = 4.0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.12g}"


def num(v):
    """JSON-safe number rounded to 12 significant digits."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return int(v)
    return float(f"{float(v):.12g}")


def nums(vs) -> list:
    return [num(v) for v in vs]


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def json_text(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


# -- shared argument handling -------------------------------------------------

def _add_game_args(p, variants=("classic", "lf", "pf")):
    p.add_argument("--variant", choices=variants, default=variants[0])
    p.add_argument("--r", type=float, help="failure probability")
    p.add_argument("--segment", type=float, nargs=2, metavar=("A", "B"),
                   help="segment for the classic game (default 0 1)")


def _add_config_args(p):
    p.add_argument("--positions", type=float, nargs="+")
    p.add_argument("--config", help='JSON file {"segment": [a, b], "positions": [...]}')
    p.add_argument("--max-stack", type=int, default=2, choices=(2, 3),
                   help="servers allowed on one coordinate (3 only for stacked crash analysis)")


def _add_output_args(p, formats=("json", "csv"), default="json"):
    p.add_argument("--format", choices=formats, default=default)
    p.add_argument("--out", help="write to this file instead of stdout")


def _segment(args) -> Segment:
    return Segment(*args.segment) if getattr(args, "segment", None) else UNIT


def _variant(args, segment: Segment | None = None):
    if args.variant != "classic" and args.r is None:
        raise UsageError(f"--variant {args.variant} needs --r")
    return make_variant(args.variant, args.r, segment or _segment(args))


def _game(args):
    """Configuration and variant; a configuration file's segment wins over the default."""
    cfg = _load_config(args, _segment(args))
    return _variant(args, cfg.segment), cfg


def _load_config(args, segment: Segment):
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
        try:
            seg = Segment(*doc.get("segment", [0.0, 1.0]))
            positions = [float(x) for x in doc["positions"]]
        except (KeyError, TypeError) as exc:
            raise UsageError(f"bad configuration file: {exc}") from exc
        if args.segment and seg != segment:
            raise UsageError("--segment disagrees with the configuration file")
        return validate(positions, seg, max_stack=args.max_stack)
    if not args.positions:
        raise UsageError("give --positions or --config")
    return validate(args.positions, segment, max_stack=args.max_stack)


def _require_seed(args):
    if args.seed is None:
        raise UsageError("stochastic commands need an explicit --seed")


# -- commands ------------------------------------------------------------------

def cmd_payoff(args) -> tuple[str, int]:
    """Exact payoffs, optionally next to oracle estimates and their deltas."""
    variant, cfg = _game(args)
    exact = np.asarray(variant.payoffs_array(cfg.array), dtype=float)
    columns = {"position": cfg.array, "payoff": exact}
    status = EXIT_OK

    if args.quadrature:
        if not isinstance(variant, LineFailure):
            raise UsageError("--quadrature applies to --variant lf")
        quad = lf.lf_payoffs_quadrature(cfg, variant.r)
        columns["quadrature"] = quad
        columns["quadrature_delta"] = quad - exact
        if np.max(np.abs(quad - exact)) > QUADRATURE_TOL:
            status = EXIT_MISMATCH
    if args.enumerate:
        if not isinstance(variant, PlayerFailure):
            raise UsageError("--enumerate applies to --variant pf")
        enum = pf_payoffs_exact(cfg, variant.r, method="enumerate")
        columns["enumerate"] = enum
        columns["enumerate_delta"] = enum - exact
        if np.max(np.abs(enum - exact)) > ENUMERATION_TOL:
            status = EXIT_MISMATCH
    if args.montecarlo:
        _require_seed(args)
        if isinstance(variant, LineFailure):
            mean, se = lf.lf_payoffs_montecarlo(cfg, variant.r, args.samples, args.seed)
        elif isinstance(variant, PlayerFailure):
            mean, se = pf_payoffs_montecarlo(cfg, variant.r, args.samples, args.seed)
        else:
            raise UsageError("--montecarlo applies to --variant lf or pf")
        columns["montecarlo"] = mean
        columns["montecarlo_se"] = se
        columns["montecarlo_delta"] = mean - exact
        if np.any(np.abs(mean - exact) > MC_SIGMAS * se + 1e-12):
            status = EXIT_MISMATCH

    if args.format == "csv":
        names = list(columns)
        rows = [[i] + [columns[c][i] for c in names] for i in range(cfg.n)]
        return csv_text(["server"] + names, rows), status
    doc = {"variant": variant.name, "r": None if args.r is None else num(args.r),
           "segment": cfg.segment.as_list()}
    doc.update({("positions" if c == "position" else "payoffs" if c == "payoff" else c): nums(v)
                for c, v in columns.items()})
    return json_text(doc), status


def cmd_verify(args) -> tuple[str, int]:
    """Equilibrium verdict from deviation search, cross-checked by closed-form conditions."""
    variant, cfg = _game(args)
    report = is_nash(cfg, variant, args.delta)
    doc = {"variant": variant.name, "positions": nums(cfg.positions), "verdict": report.verdict,
           "witnesses": [{"player": w.player, "kind": w.deviation.kind,
                          "deviation": num(w.deviation.position), "gain": num(w.gain)}
                         for w in report.witnesses]}
    status = EXIT_OK if report.verdict else EXIT_UNVERIFIED
    conditions = None
    if cfg.n >= 2 and isinstance(variant, Classic):
        conditions = el_check(cfg, delta=args.delta)
    elif cfg.n >= 2 and isinstance(variant, LineFailure) and 0 < variant.r < 1:
        conditions = lf.lf_condition_check(cfg, variant.r, args.delta)
    if conditions is not None:
        doc["conditions"] = conditions.conditions
        doc["violations"] = conditions.violations
        if conditions.verdict != report.verdict:
            status = EXIT_MISMATCH
    if args.format == "csv":
        rows = [[w["player"], w["kind"], w["deviation"], w["gain"]] for w in doc["witnesses"]]
        text = f"# verdict={fmt(report.verdict)}\n" + csv_text(["player", "kind", "deviation", "gain"], rows)
        return text, status
    return json_text(doc), status


def cmd_construct(args) -> tuple[str, int]:
    """Build a known equilibrium; the output is a configuration file."""
    if args.variant == "classic":
        cfg = classic_equilibrium(args.n, _segment(args), args.family_param)
    else:
        if args.r is None:
            raise UsageError("--variant lf needs --r")
        cfg = lf.lf_equilibrium(args.n, args.r, args.family_param)
    if args.format == "csv":
        return csv_text(["server", "position"], list(enumerate(cfg.positions))), EXIT_OK
    # full precision so the file round-trips through verify unchanged
    return json.dumps(cfg.to_json()) + "\n", EXIT_OK


def cmd_dynamics(args) -> tuple[str, int]:
    if args.positions or args.config:
        variant, cfg = _game(args)
    else:
        variant = _variant(args)
        if args.n is None:
            raise UsageError("give --positions, --config or --n with --seed")
        _require_seed(args)
        rng = np.random.default_rng(args.seed)
        a, b = variant.bounds
        cfg = validate(np.sort(rng.uniform(a, b, size=args.n)), variant.segment)
    trace = br_dynamics(cfg, variant, args.order, args.max_iters, args.quantum, args.delta)
    return trace.to_jsonl(), EXIT_OK


def cmd_sweep(args) -> tuple[str, int]:
    """Line-failure equilibrium hinterlands as r varies, next to their classic limits."""
    if not 0 < args.r_min <= args.r_max < 1:
        raise UsageError("need 0 < --r-min <= --r-max < 1")
    n = args.n
    rs = np.linspace(args.r_min, args.r_max, args.steps)
    if n >= 6:
        c_lo, c_hi, _ = lf.lf_family_interval(n, 0.0)
        rows = []
        for r in rs:
            lo, hi, closed = lf.lf_family_interval(n, r)
            rows.append([r, lo, hi, closed, c_lo, c_hi])
        header = ["r", "family_lo", "family_hi", "hi_included", "classic_lo", "classic_hi"]
        return csv_text(header, rows), EXIT_OK
    if n == 3:
        raise NoEquilibrium("three servers have no equilibrium")
    classic = classic_equilibrium(n)
    header = (["r", "hinterland"] + [f"x{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)]
              + ["classic_hinterland"])
    if n == 5:
        header += ["condition_residual", "misexpanded_root", "misexpanded_root_residual", "misexpanded_root_fails"]
    rows = []
    for r in rs:
        cfg = lf.lf_equilibrium(n, r)
        pay = lf.lf_payoffs(cfg, r)
        row = [r, cfg.positions[0], *cfg.positions, *pay, classic.positions[0]]
        if n == 5:
            x = cfg.positions[0]
            wrong = lf.misexpanded_five_server_root(r)
            bad = lf.five_server_condition_residual(wrong, r)
            row += [lf.five_server_condition_residual(x, r), wrong, bad, abs(bad) > 1e-9]
        rows.append(row)
    return csv_text(header, rows), EXIT_OK


INF = "inf"


def _grid_count(variant, n: int, resolution: int, known=()) -> int | str:
    res = scan(n, variant, resolution, symmetric=False)
    eq = res.equilibria()
    if res.configs.shape[0] > 1 and eq.shape[0] == res.configs.shape[0]:
        return INF  # every position is an equilibrium
    found = {tuple(np.round(row, 9)) for row in eq.tolist()}
    found |= {tuple(np.round(c, 9)) for c in known}
    return len(found)


def equilibrium_count(kind: str, n: int, r: float = 0.5, resolution: int = 12) -> int | str:
    """Number of pure equilibria: 0, 1 or ``"inf"``.

    Families with a non-degenerate hinterland interval count as infinite;
    otherwise constructors (verified by deviation search) are merged with an
    exhaustive grid scan.
    """
    if kind == "pf":
        return _grid_count(PlayerFailure(r), n, resolution)
    variant = Classic() if kind == "classic" else LineFailure(r)
    if n >= 6:
        lo, hi, _ = lf.lf_family_interval(n, 0.0 if kind == "classic" else r)
        return INF if hi > lo else 0
    try:
        cfg = classic_equilibrium(n) if kind == "classic" else lf.lf_equilibrium(n, r)
        known = [cfg.positions] if is_nash(cfg, variant) else []
    except NoEquilibrium:
        known = []
    return _grid_count(variant, n, resolution, known)


def cmd_table1(args) -> tuple[str, int]:
    rows = [[n, equilibrium_count("pf", n, args.r, args.resolution),
             equilibrium_count("lf", n, args.r, args.resolution),
             equilibrium_count("classic", n, args.r, args.resolution)] for n in range(1, 7)]
    return csv_text(["n", "server_crashes", "line_disconnect", "no_faults"], rows), EXIT_OK


def cmd_appendixA(args) -> tuple[str, int]:
    """Deviation tables for the 4-server line-failure equilibrium."""
    x = lf.four_server_hinterland(args.r)
    if args.y is not None:
        ys = list(args.y)
    else:
        k = args.points
        ys = list(np.linspace(0.0, x, k, endpoint=False)) + list(x + (0.5 - x) * np.arange(1, k + 1) / (k + 1))
    header = ["y", "scenario"] + list(lf.ScenarioTable.COLUMNS)
    rows = []
    status = EXIT_OK
    for y in ys:
        table = lf.lf_appendix_tables(args.r, y)
        for row in table.rows:
            rows.append([y, row.label, row.lo, row.hi, row.prob, row.incumbent, row.deviator])
        rows.append([y, "expected", None, None, 1.0, table.expected_incumbent, table.expected_deviator])
        if table.difference < -1e-12:
            status = EXIT_MISMATCH
    return csv_text(header, rows), status


def cmd_probe(args) -> tuple[str, int]:
    report = pf_nonexistence_probe(args.n, args.r, args.resolution, args.delta)
    return report.to_json(args.max_witnesses) + "\n", EXIT_OK


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hotelling", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("payoff", help="expected payoffs of a configuration")
    _add_game_args(p)
    _add_config_args(p)
    p.add_argument("--quadrature", action="store_true")
    p.add_argument("--montecarlo", action="store_true")
    p.add_argument("--enumerate", action="store_true")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int)
    _add_output_args(p)
    p.set_defaults(func=cmd_payoff)

    p = sub.add_parser("verify", help="check whether a configuration is an equilibrium")
    _add_game_args(p)
    _add_config_args(p)
    p.add_argument("--delta", type=float, default=DELTA)
    _add_output_args(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("construct", help="build a known equilibrium")
    _add_game_args(p, ("classic", "lf"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--family-param", type=float)
    _add_output_args(p)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("dynamics", help="best-response dynamics as JSON lines")
    _add_game_args(p)
    _add_config_args(p)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--order", choices=("round_robin", "largest_gain"), default="round_robin")
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--quantum", type=float, default=1e-6)
    p.add_argument("--delta", type=float, default=DELTA)
    p.add_argument("--out")
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("sweep", help="line-failure equilibria across r (CSV)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r-min", type=float, default=0.05)
    p.add_argument("--r-max", type=float, default=0.95)
    p.add_argument("--steps", type=int, default=19)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("table1", help="equilibrium counts per variant (CSV)")
    p.add_argument("--r", type=float, default=0.5)
    p.add_argument("--resolution", type=int, default=12)
    p.add_argument("--out")
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("appendixA", help="4-server deviation tables (CSV)")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--y", type=float, nargs="+")
    p.add_argument("--points", type=int, default=50, help="sweep size per region when --y is absent")
    p.add_argument("--out")
    p.set_defaults(func=cmd_appendixA)

    p = sub.add_parser("probe", help="grid scan for crash-game equilibria (JSON)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--resolution", type=int, default=50)
    p.add_argument("--max-witnesses", type=int, default=20)
    p.add_argument("--delta", type=float, default=DELTA)
    p.add_argument("--out")
    p.set_defaults(func=cmd_probe)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text, status = args.func(args)
    except (UsageError, HotellingError, ValueError, OSError) as exc:
        print(f"hotelling {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
