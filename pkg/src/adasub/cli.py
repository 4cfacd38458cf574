"""Command-line front end.

Exit codes: 0 success, 1 a check failed, 2 usage or parse error,
3 instance too large for an exact routine.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .constraints import IndependenceSystem, Knapsack
from .errors import (
    AdasubError,
    GenerationExhausted,
    ParseError,
    TooLargeToEnumerate,
    TooLargeToVerify,
    ValidationError,
)
from .evaluation import MAX_EXACT_RUNS, eval_exact, eval_mc, optimal_value, ratio_report
from .generator import CONSTRAINT_KINDS, Profile, generate_instance
from .instance import load_instance
from .policies import POLICY_KINDS, SamplingParams, make_policy
from .utilities import certify

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CAPACITY = 0, 1, 2, 3


def _fmt(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, bool):
        return "pass" if x else "FAIL"
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def render_table(header: list[str], rows: list[list]) -> str:
    cells = [header] + [[_fmt(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    return "\n".join(lines) + "\n"


def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _params(args, constraint) -> SamplingParams | None:
    given = {k: getattr(args, k) for k in ("delta0", "delta1", "delta2") if getattr(args, k) is not None}
    if not given:
        return None
    if isinstance(constraint, Knapsack):
        return SamplingParams.knapsack(**given)
    given.pop("delta2", None)
    return SamplingParams.ksystem(**given)


def cmd_verify(args, out) -> int:
    inst = load_instance(args.instance)
    report = certify(inst.utility, inst.prior)
    required = {"nonnegative", "adaptive-submodular"} | set(inst.certified or [])
    checks = [
        ("nonnegative", report.nonnegative),
        ("adaptive-submodular", report.adaptive),
        ("pointwise-submodular", report.pointwise),
    ]
    ok = True
    out.write(f"instance {inst.id}: n={inst.n} states={inst.n_states} support={inst.prior.size}\n")
    for name, violation in checks:
        tag = "required" if name in required else "info"
        if violation is None:
            out.write(f"  {name:<22} pass ({tag})\n")
        else:
            out.write(f"  {name:<22} VIOLATION ({tag}): {violation.describe()}\n")
            ok &= name not in required
    if report.monotone:
        out.write(f"  {'monotonicity':<22} monotone\n")
        ok &= "non-monotone" not in required
    else:
        out.write(f"  {'monotonicity':<22} non-monotone: {report.negative_marginal.describe()}\n")
        ok &= "monotone" not in required
    out.write("result: " + ("pass" if ok else "FAIL") + "\n")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_run(args, out) -> int:
    inst = load_instance(args.instance)
    params = _params(args, inst.constraint)
    policy = make_policy(args.policy, inst.model, inst.constraint, params)
    mode = args.mode
    if mode is None:
        try:
            runs = len(policy.branches()) * inst.prior.size
            mode = "exact" if runs <= MAX_EXACT_RUNS else "mc"
        except TooLargeToEnumerate:
            mode = "mc"
        if mode == "mc":
            print("warning: exact evaluation exceeds caps; falling back to Monte Carlo", file=sys.stderr)
    if mode == "exact":
        res = eval_exact(policy)
    else:
        res = eval_mc(policy, args.trials, args.seed)
    rows = [["instance", inst.id], ["policy", args.policy], ["mode", res.mode], ["value", res.value]]
    if res.mode == "exact":
        rows.append(["branches", res.branches])
    else:
        rows += [["trials", res.trials], ["std-error", res.std_error], ["seed", args.seed]]
    out.write(render_table(["field", "value"], rows))
    if args.out:
        _write_json(args.out, {"instance-id": inst.id, "policy": args.policy, "mode": res.mode,
                               "value": res.value, "std-error": res.std_error, "trials": res.trials,
                               "branches": res.branches, "seed": args.seed if res.mode != "exact" else None})
    return EXIT_OK


def _default_kind(constraint) -> str:
    return "sad" if isinstance(constraint, Knapsack) else "sag"


def cmd_ratio(args, out) -> int:
    reports = []
    for path in args.instance:
        inst = load_instance(path)
        kind = args.policy or _default_kind(inst.constraint)
        reports.append(ratio_report(inst, kind, _params(args, inst.constraint)))
    header = ["instance-id", "policy", "value", "opt", "ratio", "bound", "pass"]
    rows = [[r.instance_id, r.policy, r.value, r.opt, r.ratio, r.bound, r.passed] for r in reports]
    out.write(render_table(header, rows))
    if args.out:
        _write_json(args.out, [r.as_dict() for r in reports])
    return EXIT_FAIL if any(r.passed is False for r in reports) else EXIT_OK


def _tri(value: str) -> bool | None:
    return {"yes": True, "no": False, "any": None}[value]


def cmd_generate(args, out) -> int:
    profile = Profile(nonmonotone=_tri(args.nonmonotone), pointwise=_tri(args.pointwise))
    inst = generate_instance(args.seed, args.n, args.states, profile, args.constraint, args.max_attempts)
    text = inst.dumps()
    summary = f"generated {inst.id} after {inst.meta['attempts']} attempts; certified: {', '.join(inst.certified)}\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        out.write(summary)
    else:
        out.write(text)
        sys.stderr.write(summary)
    return EXIT_OK


def cmd_optimal(args, out) -> int:
    inst = load_instance(args.instance)
    res = optimal_value(inst.model, inst.constraint)
    first = res.tree.get(())
    rows = [["instance", inst.id], ["opt", res.value], ["tree-states", res.states],
            ["first-action", "stop" if first is None else first]]
    out.write(render_table(["field", "value"], rows))
    if args.out:
        tree = [{"observation": [list(p) for p in key], "action": act}
                for key, act in sorted(res.tree.items())]
        _write_json(args.out, {"instance-id": inst.id, "opt": res.value, "tree": tree})
    return EXIT_OK


def _add_deltas(p):
    p.add_argument("--delta0", type=float)
    p.add_argument("--delta1", type=float)
    p.add_argument("--delta2", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adasub", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the submodularity and monotonicity checkers")
    p.add_argument("--instance", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("run", help="evaluate a policy")
    p.add_argument("--instance", required=True)
    p.add_argument("--policy", choices=POLICY_KINDS, required=True)
    _add_deltas(p)
    p.add_argument("--mode", choices=("exact", "mc"))
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ratio", help="policy value against the optimal adaptive policy")
    p.add_argument("--instance", required=True, nargs="+")
    p.add_argument("--policy", choices=POLICY_KINDS)
    _add_deltas(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ratio)

    p = sub.add_parser("generate", help="draw a certified random instance")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--states", type=int, default=2)
    p.add_argument("--nonmonotone", choices=("yes", "no", "any"), default="yes")
    p.add_argument("--pointwise", choices=("yes", "no", "any"), default="any")
    p.add_argument("--constraint", choices=CONSTRAINT_KINDS, default="knapsack")
    p.add_argument("--max-attempts", type=int, default=10**6)
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("optimal", help="solve for the optimal adaptive policy")
    p.add_argument("--instance", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_optimal)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, out)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TooLargeToEnumerate, TooLargeToVerify) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except GenerationExhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except AdasubError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
