"""Command line: ``cosm run`` replays a scenario, ``cosm repl`` pokes a live app."""

from __future__ import annotations

import argparse
import cmd
import sys

from ..adl import load_adl
from ..ecampus import HIGH, LOW, build_fixture
from ..errors import CosmError
from ..literals import parse_literal
from ..metrics import CostModel
from ..runtime import launch
from . import report as rep
from .engines import compare, default_joinpoints, run_cosm, run_daop, run_repeats
from .scenario import MODES, load_scenario


def _thresholds(text):
    try:
        hi, lo = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected HI,LO integers, e.g. 70,30") from None
    if not lo < hi:
        raise argparse.ArgumentTypeError("LO must be below HI")
    return hi, lo


def _fixture(args):
    high, low = args.thresholds or (HIGH, LOW)
    doc = load_adl(args.adl) if args.adl else None
    return build_fixture(high, low, doc)


def cmd_run(args) -> int:
    fixture = _fixture(args)
    scenario = load_scenario(args.scenario, fixture.entities)
    cost = CostModel.load(args.cost_model) if args.cost_model else CostModel()
    mode = args.mode or scenario.mode
    repeat = args.repeat if args.repeat is not None else scenario.repeat
    seed = args.seed if args.seed is not None else scenario.seed
    joinpoints = default_joinpoints(fixture.high, fixture.low)

    comparison = None
    if repeat > 1:
        reports = run_repeats(scenario, mode, repeat, seed, fixture, cost, joinpoints,
                              jitter_ms=args.jitter)
    elif mode == "both":
        comparison = compare(scenario, fixture, joinpoints, cost)
        reports = {"cosm": comparison.cosm, "daop": comparison.daop}
    elif mode == "cosm":
        reports = {"cosm": run_cosm(scenario, fixture, cost)}
    else:
        reports = {"daop": run_daop(scenario, joinpoints, cost, fixture.entities)}

    sys.stdout.write(rep.table(reports, comparison))
    if args.out:
        rep.write_csv(args.out, reports, comparison)
        if not args.no_figures:
            for path in rep.render_figures(reports, args.out, comparison):
                print(f"wrote {path}")
        print(f"wrote {args.out}")
    return 0


class Repl(cmd.Cmd):
    intro = "sense <Entity> <value> | report | quit"
    prompt = "cosm> "

    def __init__(self, runtime, stdout=None):
        super().__init__(stdout=stdout)
        self.rt = runtime
        self.use_rawinput = False

    def say(self, text):
        self.stdout.write(text + "\n")

    def do_sense(self, line):
        parts = line.split(None, 1)
        if len(parts) != 2:
            self.say("usage: sense <Entity> <value>")
            return
        try:
            events = self.rt.sense(parts[0], parse_literal(parts[1]))
            result = self.rt.dispatch()
        except CosmError as err:
            self.say(f"error: {err}")
            return
        self.say(f"events={len(events)} deliveries={result.deliveries} "
                 f"unhandled={result.unhandled} plans={len(result.records)}")
        for record in result.records:
            self.say(f"  plan {record.plan_id}: " + ", ".join(
                f"{type(a).__name__}({', '.join(map(str, vars(a).values()))})"
                for a in record.actions))

    def do_report(self, line):
        app = self.rt.app
        self.say("active layers: " + ", ".join(f"{c}.{l}" for c, l in sorted(app.graph.active_layers())))
        self.say("context: " + ", ".join(f"{k}={v}" for k, v in self.rt.context.snapshot().items()))
        self.say(f"work-units: {app.metrics.total()} {app.metrics.by_phase()}")
        self.say(f"plans executed: {len(self.rt.adaptation.log)}, "
                 f"failures: {len(self.rt.adaptation.failures)}")

    def do_quit(self, line):
        return True

    do_EOF = do_quit

    def default(self, line):
        self.say(f"unknown command: {line}")

    def emptyline(self):
        pass


def cmd_repl(args) -> int:
    fixture = _fixture(args)
    rt = launch(fixture.doc, fixture.factories, fixture.entities)
    Repl(rt).cmdloop()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cosm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="replay a scenario and report costs")
    run.add_argument("--adl", help="COCA-ADL file (default: the shipped eCampus fixture)")
    run.add_argument("--scenario", required=True, help="scenario file")
    run.add_argument("--mode", choices=MODES, help="engine(s); overrides @mode")
    run.add_argument("--repeat", type=int, help="number of runs; overrides @repeat")
    run.add_argument("--seed", type=int, help="seed for timing jitter; overrides @seed")
    run.add_argument("--jitter", type=int, default=5, metavar="MS",
                     help="max timestamp jitter per event when repeating (default 5)")
    run.add_argument("--cost-model", help="JSON file of unit charges")
    run.add_argument("--out", help="CSV report path; figures are written beside it")
    run.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    run.add_argument("--thresholds", type=_thresholds, help="battery thresholds HI,LO")
    run.set_defaults(func=cmd_run)

    repl = sub.add_parser("repl", help="interactive sensing against the eCampus app")
    repl.add_argument("--adl", help="COCA-ADL file (default: the shipped eCampus fixture)")
    repl.add_argument("--thresholds", type=_thresholds, help="battery thresholds HI,LO")
    repl.set_defaults(func=cmd_repl)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "repeat", None) is not None and args.repeat < 1:
        print("error: --repeat must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (CosmError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
