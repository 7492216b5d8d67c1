"""Command-line interface: ``bpmncheck check|explore|generate|bench``."""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import benchgen
from .ctl import CtlSyntaxError, UnknownAtom, check_ctl, parse_ctl
from .explorer import DEFAULT_MAX_MILLIS, DEFAULT_MAX_STATES, explore
from .groove import export_gps
from .hot import generate_rules
from .model import ERROR, BpmnError, load_bpmn, to_xml, validate_model
from .properties import (
    UnknownElementId,
    Verdict,
    annotation_propositions,
    builtin_propositions,
    check_no_dead_activities,
    check_option_to_complete,
    check_proper_completion,
    check_safeness,
    label_states,
    load_propositions,
)
from .rules import dump_rules
from .state import canonical_key, state_to_json

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_ERROR = 2
EXIT_TRUNCATED = 3


class UsageError(Exception):
    pass


def exit_code(verdicts, truncated: bool) -> int:
    if truncated:
        return EXIT_TRUNCATED
    return EXIT_OK if all(v.holds for v in verdicts) else EXIT_VIOLATION


def _default_threads():
    try:
        return max(1, int(os.environ.get("BPMN_VERIFY_THREADS", "1")))
    except ValueError:
        return 1


def _load_checked(path):
    model = load_bpmn(path)
    diags = validate_model(model)
    for d in diags:
        print(d, file=sys.stderr)
    errors = [d for d in diags if d.severity == ERROR]
    if errors:
        raise UsageError(f"{path}: model has {len(errors)} validation error(s)")
    return model


def _explore(args, model):
    ruleset = generate_rules(model)
    for d in ruleset.diagnostics:
        print(d, file=sys.stderr)
    lts = explore(ruleset, args.max_states, args.max_millis, threads=args.threads)
    return ruleset, lts


def _report(model, ruleset, lts, verdicts):
    counts = model.counts()
    return {
        "model": {"nodes": counts["nodes"], "flows": counts["flows"]},
        "rules": {"count": len(ruleset.rules)},
        "lts": lts.stats(),
        "verdicts": [v.to_dict() for v in verdicts],
    }


def _annotated(witness, ruleset):
    rules = ruleset.by_name()
    nodes = ruleset.model.nodes
    out = []
    for name in witness:
        r = rules.get(name)
        if r is not None and r.source_node in nodes:
            out.append(f"{name} [{nodes[r.source_node].name or r.source_node}]")
        else:
            out.append(name)
    return out


def _print_human(report, verdicts, ruleset):
    lts = report["lts"]
    print(
        f"model: {report['model']['nodes']} nodes, {report['model']['flows']} flows; "
        f"{report['rules']['count']} rules; "
        f"{lts['states']} states, {lts['transitions']} transitions"
        + (" (truncated)" if lts["truncated"] else "")
    )
    for v in verdicts:
        status = "inconclusive" if v.details.get("inconclusive") else ("holds" if v.holds else "VIOLATED")
        print(f"{v.name}: {status}")
        if v.details.get("deadActivities"):
            print(f"  dead activities: {', '.join(v.details['deadActivities'])}")
        if v.witness is not None and not v.holds:
            print("  witness:")
            for step in _annotated(v.witness, ruleset):
                print(f"    {step}")


def cmd_check(args):
    model = _load_checked(args.model)
    ruleset, lts = _explore(args, model)
    props = builtin_propositions(model) + annotation_propositions(model)
    if args.props:
        props += load_propositions(args.props, model)
    formulas = [(text, parse_ctl(text)) for text in args.ctl]
    labeling = label_states(lts, props)
    verdicts = []
    everything = not (args.safeness or args.soundness or args.ctl)
    if args.safeness or everything:
        verdicts.append(check_safeness(lts, labeling))
    if args.soundness or everything:
        verdicts.append(check_option_to_complete(lts, labeling))
        verdicts.append(check_proper_completion(lts))
        verdicts.append(check_no_dead_activities(lts))
    for text, f in formulas:
        res = check_ctl(lts, labeling, f)
        w = res.witness
        verdicts.append(Verdict(text, res.holds, w.rules if w else None))
    if lts.truncated:
        for v in verdicts:
            v.details["inconclusive"] = True
    report = _report(model, ruleset, lts, verdicts)
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        _print_human(report, verdicts, ruleset)
    return exit_code(verdicts, lts.truncated)


def cmd_explore(args):
    model = _load_checked(args.model)
    ruleset, lts = _explore(args, model)
    if args.dump_rules:
        dump_rules(ruleset.rules, args.dump_rules)
    if args.dump_states:
        os.makedirs(args.dump_states, exist_ok=True)
        for i, s in enumerate(lts.states):
            with open(os.path.join(args.dump_states, f"state_{i}.json"), "w") as fh:
                fh.write(state_to_json(s, indent=2))
        with open(os.path.join(args.dump_states, "transitions.json"), "w") as fh:
            json.dump(
                {
                    "keys": [canonical_key(s).hex() for s in lts.states],
                    "transitions": [list(t) for t in lts.transitions],
                },
                fh,
            )
    if args.json:
        print(json.dumps(_report(model, ruleset, lts, []), indent=2))
    else:
        st = lts.stats()
        print(f"states={st['states']} transitions={st['transitions']} truncated={st['truncated']} timeMs={st['timeMs']}")
    return EXIT_TRUNCATED if lts.truncated else EXIT_OK


def cmd_generate(args):
    model = _load_checked(args.model)
    ruleset = generate_rules(model)
    paths = export_gps(ruleset, args.out)
    print(f"wrote {len(paths)} files to {args.out}")
    return EXIT_OK


def _write_model(model, out):
    with open(out, "w") as fh:
        fh.write(to_xml(model))


def cmd_bench(args):
    family = args.family
    sizes = args.n if family == "parallel" else args.k
    if not sizes:
        raise UsageError(f"bench {family} needs {'--n' if family == 'parallel' else '--k'}")
    gen = benchgen.gen_parallel if family == "parallel" else benchgen.gen_blocks
    if args.out:
        if len(sizes) != 1:
            raise UsageError("--out takes exactly one model size")
        _write_model(gen(sizes[0]), args.out)
    if args.emit_table:
        if family == "parallel":
            print("n,flowNodes,gateways,rules,states,transitions,timeMs")
            for n in sizes:
                model = gen(n)
                c = model.counts()
                ruleset = generate_rules(model)
                lts = explore(ruleset, args.max_states, args.max_millis, threads=args.threads)
                print(
                    f"{n},{c['nodes']},{c['gateways']},{len(ruleset.rules)},"
                    f"{lts.state_count},{lts.transition_count},{lts.time_ms:.1f}"
                )
        else:
            print("k,gateways,flowNodes,sequenceFlows,total")
            for k in sizes:
                c = benchgen.block_counts(k)
                print(f"{k},{c['gateways']},{c['flowNodes']},{c['sequenceFlows']},{c['total']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bpmncheck", description="Model checking for BPMN process models.")
    sub = parser.add_subparsers(dest="command", required=True)

    limits = argparse.ArgumentParser(add_help=False)
    limits.add_argument("--max-states", type=int, default=DEFAULT_MAX_STATES)
    limits.add_argument("--max-millis", type=float, default=DEFAULT_MAX_MILLIS)
    limits.add_argument("--threads", type=int, default=_default_threads())

    p = sub.add_parser("check", parents=[limits], help="explore a model and check properties")
    p.add_argument("model")
    p.add_argument("--safeness", action="store_true")
    p.add_argument("--soundness", action="store_true", help="option to complete, proper completion, no dead activities")
    p.add_argument("--props", help="propositions JSON file")
    p.add_argument("--ctl", action="append", default=[], metavar="FORMULA")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("explore", parents=[limits], help="build the state space and print statistics")
    p.add_argument("model")
    p.add_argument("--json", action="store_true")
    p.add_argument("--dump-states", metavar="DIR")
    p.add_argument("--dump-rules", metavar="FILE")
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("generate", help="export the rule system as a Groove grammar")
    p.add_argument("model")
    p.add_argument("--out", required=True, metavar="DIR.gps")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bench", parents=[limits], help="generate benchmark models")
    p.add_argument("family", choices=["parallel", "blocks"])
    p.add_argument("--n", type=int, nargs="+", help="branch counts (parallel)")
    p.add_argument("--k", type=int, nargs="+", help="block counts (blocks)")
    p.add_argument("--out", help="write the generated model as BPMN XML")
    p.add_argument("--emit-table", action="store_true", help="print a CSV summary")
    p.set_defaults(func=cmd_bench)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        return args.func(args)
    except (UsageError, BpmnError, CtlSyntaxError, UnknownAtom, UnknownElementId, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
