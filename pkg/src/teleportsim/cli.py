"""Command-line front end.

    teleportsim <subcommand> [flags]

Reports go to --out (or stdout) as JSON or CSV; a one-line summary goes to
stdout (stderr when the report itself is on stdout). Exit codes: 0 success,
1 configuration error or memory budget exceeded, 2 failing acceptance check.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from . import acceptance
from .core import make_rng, random_state
from .cvteleport import (DEFAULT_MEMORY_BUDGET, Grid1D, MemoryBudgetError, ResolutionError, cv_crossed_swap,
                         cv_teleport_oneway, gaussian)
from .lonogo import Statistics, certify_no_perfect, discrimination_success, evolve_bell, identity_scheme, single_scheme
from .bellkit import BELL_ORDER
from .teleport import bbcjpw_teleport, cavity_swap, cavity_teleport, crossed_swap_qubits

SUBCOMMANDS = ("teleport-qubit", "swap-qubit", "bell-analyze", "lo-optimize", "cavity-teleport",
               "cavity-swap", "cv-teleport", "cv-swap", "verify")


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int, default=1)
    common.add_argument("--mode", choices=("enumerate", "sample"), default="enumerate")
    common.add_argument("--out", default=None, help="report path (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    p = _Parser(prog="teleportsim", description="Teleportation, swap and Bell-analysis simulations.")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    sub.add_parser("teleport-qubit", parents=[common], help="one-way qubit teleportation through a singlet") \
        .add_argument("--strategy", choices=("interaction", "ancilla"), default="interaction")
    sub.add_parser("swap-qubit", parents=[common], help="two-way qubit swap by crossed nonlocal measurements")
    b = sub.add_parser("bell-analyze", parents=[common], help="two-of-four linear Bell analyzer")
    b.add_argument("--statistics", choices=[s.value for s in Statistics], default="boson")
    lo = sub.add_parser("lo-optimize", parents=[common], help="search linear analyzers, certify the 1/2 bound")
    lo.add_argument("--statistics", choices=[s.value for s in Statistics], default="boson")
    lo.add_argument("--modes", type=int, default=6)
    lo.add_argument("--restarts", type=int, default=200)
    for name in ("cavity-teleport", "cavity-swap"):
        cp = sub.add_parser(name, parents=[common], help="atom-cavity pipeline")
        cp.add_argument("--readout", choices=("atoms", "direct"), default="atoms")
        if name == "cavity-teleport":
            cp.add_argument("--gate-error", type=float, default=0.0)
    cv = sub.add_parser("cv-teleport", parents=[common], help="continuous-variable one-way teleportation")
    cv.add_argument("--grid", type=int, default=256)
    cv.add_argument("--range", type=float, default=12.0, help="grid covers [-range, range)")
    cv.add_argument("--squeezing", type=float, default=3.0)
    cs = sub.add_parser("cv-swap", parents=[common], help="continuous-variable crossed swap")
    cs.add_argument("--grid", type=int, default=48)
    cs.add_argument("--range", type=float, default=7.0)
    cs.add_argument("--memory-budget", type=float, default=DEFAULT_MEMORY_BUDGET / 2**20, help="MiB")
    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--only", default=None, help="comma-separated criterion numbers")
    return p


# --- output ---------------------------------------------------------------------

def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, set, frozenset)):
        items = [_plain(x) for x in v]
        return sorted(items, key=repr) if isinstance(v, (set, frozenset)) else items
    if hasattr(v, "item"):
        return v.item()
    if isinstance(v, str) or v is None or isinstance(v, (bool, int, float)):
        return v
    return str(v)


def _num(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return json.dumps(v) if isinstance(v, (list, dict)) else str(v)


def to_json(report: dict) -> str:
    # repr of a float round-trips, so equal values give identical bytes
    return json.dumps(_plain(report), ensure_ascii=False, sort_keys=False) + "\n"


def to_csv(rows: list[dict], config: dict) -> str:
    cols: list[str] = []
    for r in rows:
        cols += [k for k in r if k not in cols]
    cfg = {f"config.{k}": v for k, v in config.items()}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols + list(cfg))
    for r in rows:
        w.writerow([_num(_plain(r.get(c, ""))) for c in cols] + [_num(_plain(v)) for v in cfg.values()])
    return buf.getvalue()


def _teleport_output(rep, config):
    d = rep.to_dict()
    d["config"] = {**config, **d["config"]}
    return d, d["branches"], f"{rep.protocol}: {len(rep.branches)} branches, mean_fidelity {rep.mean_fidelity:.17g}"


# --- subcommands -------------------------------------------------------------------

def _mode(args) -> str:
    return "enumerate" if args.mode == "enumerate" else f"sample:{args.seed}"


def _payload(labels, seed):
    return random_state(tuple(labels), make_rng(seed))


def cmd_teleport_qubit(args, config):
    rep = bbcjpw_teleport(_payload(["in"], args.seed), "in", args.strategy, _mode(args), args.trials)
    return _teleport_output(rep, config)


def cmd_swap_qubit(args, config):
    rep = crossed_swap_qubits(_payload(["q1", "q2"], args.seed), mode=_mode(args), trials=args.trials)
    return _teleport_output(rep, config)


def cmd_cavity_teleport(args, config):
    rep = cavity_teleport(_payload(["atom"], args.seed), "atom", args.gate_error, _mode(args), args.trials,
                          args.readout)
    return _teleport_output(rep, config)


def cmd_cavity_swap(args, config):
    rep = cavity_swap(_payload(["atom1", "atom2"], args.seed), mode=_mode(args), trials=args.trials,
                      readout=args.readout)
    return _teleport_output(rep, config)


def cmd_bell_analyze(args, config):
    st = Statistics(args.statistics)
    ev = identity_scheme() if st is Statistics.DISTINGUISHABLE else single_scheme()
    rep = discrimination_success(ev, st)
    rows = []
    for kind in BELL_ORDER:
        for pat, amp in evolve_bell(ev, st, kind).items():
            if abs(amp) > 1e-15:
                rows.append({"bell_state": str(kind), "pattern": sorted(pat) if isinstance(pat, frozenset) else list(pat),
                             "re": float(amp.real), "im": float(amp.imag), "probability": float(abs(amp) ** 2)})
    d = {"statistics": st.value, "success": rep.success,
         "per_state": {str(k): v for k, v in rep.per_state.items()},
         "partition": [{"pattern": sorted(p) if isinstance(p, frozenset) else list(p), "states": sorted(map(str, s))}
                       for p, s in sorted(rep.partition.items(), key=lambda kv: sorted(kv[0]))],
         "amplitudes": rows, "config": config}
    return d, rows, f"bell-analyze {st.value}: success {rep.success:.17g}"


def cmd_lo_optimize(args, config):
    cert = certify_no_perfect(args.statistics, args.modes, args.restarts, args.seed)
    d = {**cert, "config": config}
    return d, [cert], f"lo-optimize {cert['statistics']}: max_success {cert['max_success']:.17g} over {args.restarts} restarts"


def cmd_cv_teleport(args, config):
    g = Grid1D.symmetric(args.grid, args.range)
    rep = cv_teleport_oneway(gaussian(g, "in"), args.squeezing, _mode(args), args.trials)
    return _teleport_output(rep, config)


def cmd_cv_swap(args, config):
    g = Grid1D.symmetric(args.grid, args.range)
    rep = cv_crossed_swap(gaussian(g, "q1", 2.0), gaussian(g, "q2", -2.0), _mode(args), args.trials,
                          memory_budget=int(args.memory_budget * 2**20))
    return _teleport_output(rep, config)


COMMANDS = {"teleport-qubit": cmd_teleport_qubit, "swap-qubit": cmd_swap_qubit, "bell-analyze": cmd_bell_analyze,
            "lo-optimize": cmd_lo_optimize, "cavity-teleport": cmd_cavity_teleport,
            "cavity-swap": cmd_cavity_swap, "cv-teleport": cmd_cv_teleport, "cv-swap": cmd_cv_swap}


def _verify(args) -> int:
    numbers = None
    if args.only:
        try:
            numbers = {int(x) for x in args.only.split(",")}
        except ValueError:
            raise ConfigError(f"--only expects comma-separated integers, got {args.only!r}") from None
        if not numbers <= set(range(1, 12)):
            raise ConfigError("criteria are numbered 1 to 11")
        if 11 in numbers:
            numbers |= {chk.number for chk in acceptance.CHECKS}
    results = acceptance.run_all(numbers, echo=lambda line: print(line, flush=True))
    failed = [r.number for r in results if not r.passed]
    print(f"verify: {len(results) - len(failed)}/{len(results)} criteria passed"
          + (f"; failing: {failed}" if failed else ""))
    return 2 if failed else 0


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.subcommand == "verify":
            return _verify(args)
        if args.trials < 1:
            raise ConfigError("--trials must be >= 1")
        config = {k: v for k, v in vars(args).items() if k not in ("out",)}
        report, rows, summary = COMMANDS[args.subcommand](args, config)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except MemoryBudgetError as e:
        print(f"error: memory budget exceeded: {e}", file=sys.stderr)
        return 1
    except (ResolutionError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    text = to_json(report) if args.format == "json" else to_csv(rows, config)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        print(summary)
    else:
        sys.stdout.write(text)
        print(summary, file=sys.stderr)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
