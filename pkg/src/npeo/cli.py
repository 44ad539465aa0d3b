"""Command line front end: calibrate, evaluate, simulate, oracle, curves."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from importlib import resources

from .core import NpEoConfig, load_dataset, report_from_scores, stratified_split
from .eo_calibrator import calibrate_mp, calibrate_op
from .errors import NpEoError
from .harness import METHODS, load_spec, run_repetitions
from .learners import LogisticModel, fit_logistic, load_score_table, score_cells
from .oracle import bayes_oracle, feasibility_curves, load_model, np_eo_oracle, np_oracle

_SPEC_PRESETS = {"benchmark": "benchmark.spec"}
_MODEL_PRESETS = {"demo": "demo.model"}


def _preset_path(stack, name, table):
    if name not in table:
        raise NpEoError(f"unknown preset {name!r}; choose from {sorted(table)}")
    source = resources.files("npeo").joinpath("presets", table[name])
    return stack.enter_context(resources.as_file(source))


def _add_config_args(parser, with_defaults=True):
    default = (lambda v: v) if with_defaults else (lambda v: None)
    parser.add_argument("--alpha", type=float, default=default(0.1))
    parser.add_argument("--delta", type=float, default=default(0.1))
    parser.add_argument("--epsilon", type=float, default=default(0.1))
    parser.add_argument("--gamma", type=float, default=default(0.1))
    parser.add_argument("--eta", type=float, default=None,
                        help="type I slack for the mp method; default 0.05*alpha")
    parser.add_argument("--half-delta", action="store_true",
                        help="split delta across the two per-group order rules")
    parser.add_argument("--seed", type=int, default=default(0))
    parser.add_argument("--split-fraction", type=float, default=default(0.5))


def _config_from_args(args) -> NpEoConfig:
    return NpEoConfig(
        alpha=args.alpha,
        delta=args.delta,
        epsilon=args.epsilon,
        gamma=args.gamma,
        eta=args.eta,
        split_fraction=args.split_fraction,
        seed=args.seed,
        use_half_delta=args.half_delta,
    )


def _print_pairs(pairs):
    for key, value in pairs:
        print(f"{key}\t{value}")


def _print_table(header, rows):
    print("\t".join(header))
    for row in rows:
        print("\t".join(str(v) for v in row))


def _write_json(path, payload):
    if path is None:
        return
    text = json.dumps(payload, indent=2)
    if path == "-":
        print(text)
    else:
        with open(path, "w") as handle:
            handle.write(text + "\n")


def _fmt(value, digits=6):
    return f"{value:.{digits}g}"


def _report_pairs(report):
    return [
        ("r0", _fmt(report.r0)),
        ("r1", _fmt(report.r1)),
        ("r0_a", _fmt(report.r0_a)),
        ("r0_b", _fmt(report.r0_b)),
        ("r1_a", _fmt(report.r1_a)),
        ("r1_b", _fmt(report.r1_b)),
        ("l1", _fmt(report.l1)),
        ("p_a_0", _fmt(report.p_a_0)),
        ("p_a_1", _fmt(report.p_a_1)),
    ]


def _report_payload(report):
    return {
        "r0": report.r0, "r1": report.r1,
        "r0_a": report.r0_a, "r0_b": report.r0_b,
        "r1_a": report.r1_a, "r1_b": report.r1_b,
        "l1": report.l1, "p_a_0": report.p_a_0, "p_a_1": report.p_a_1,
    }


def _cmd_calibrate(args):
    config = _config_from_args(args)
    model = None
    if args.scores is not None:
        scores = load_score_table(args.scores).to_group_scores()
    else:
        data = load_dataset(args.data)
        split = stratified_split(data, config.split_fraction, config.seed)
        model = fit_logistic(split.train, args.iterations, args.step)
        scores = score_cells(model, split.left_out)
    calibrate = calibrate_mp if args.method == "mp" else calibrate_op
    clf = calibrate(scores, config, model.score_batch if model else None)
    pairs = [
        ("method", args.method),
        ("threshold_a", repr(clf.threshold_a)),
        ("threshold_b", repr(clf.threshold_b)),
        ("order_a", clf.order_a),
        ("order_b", clf.order_b),
        ("pivot_a", repr(clf.pivot_a)),
        ("pivot_b", repr(clf.pivot_b)),
        ("n0_a", scores.n0_a),
        ("n0_b", scores.n0_b),
        ("n1_a", scores.n1_a),
        ("n1_b", scores.n1_b),
    ]
    _print_pairs(pairs)
    payload = {
        "method": args.method,
        "threshold_a": clf.threshold_a,
        "threshold_b": clf.threshold_b,
        "order_a": clf.order_a,
        "order_b": clf.order_b,
        "pivot_a": clf.pivot_a,
        "pivot_b": clf.pivot_b,
    }
    if model is not None:
        payload["weights"] = list(model.weights)
    if args.classifier is not None:
        if model is None:
            raise NpEoError("--classifier output needs --data (a fitted scorer)")
        with open(args.classifier, "w") as handle:
            json.dump(payload, handle, indent=2)
            handle.write("\n")
    _write_json(args.json, payload)
    return 0


def _cmd_evaluate(args):
    import numpy as np

    if args.scores is not None:
        if args.threshold_a is None or args.threshold_b is None:
            raise NpEoError("evaluating a score file needs --threshold-a and --threshold-b")
        table = load_score_table(args.scores)
        from .core import GroupThresholdClassifier

        clf = GroupThresholdClassifier(None, args.threshold_a, args.threshold_b)
        report = report_from_scores(clf, table.scores, table.group_codes, table.labels)
    else:
        if args.classifier is None:
            raise NpEoError("evaluating a dataset needs --classifier")
        with open(args.classifier) as handle:
            payload = json.load(handle)
        model = LogisticModel(np.asarray(payload["weights"], dtype=float))
        from .core import GroupThresholdClassifier

        clf = GroupThresholdClassifier(
            model.score_batch, payload["threshold_a"], payload["threshold_b"]
        )
        data = load_dataset(args.data)
        scores = model.score_batch(data.features, data.group_codes)
        report = report_from_scores(clf, scores, data.group_codes, data.labels)
    _print_pairs(_report_pairs(report))
    _write_json(args.json, _report_payload(report))
    return 0


def _cmd_simulate(args):
    import contextlib

    with contextlib.ExitStack() as stack:
        if args.spec is not None:
            spec_path = args.spec
        else:
            spec_path = _preset_path(stack, args.preset, _SPEC_PRESETS)
        spec = load_spec(spec_path)
    overrides = {}
    if args.reps is not None:
        overrides["reps"] = args.reps
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    config_overrides = {}
    for name in ("alpha", "delta", "epsilon", "gamma", "eta"):
        value = getattr(args, name)
        if value is not None:
            config_overrides[name] = value
    if args.half_delta:
        config_overrides["use_half_delta"] = True
    if args.split_fraction is not None:
        config_overrides["split_fraction"] = args.split_fraction
    if config_overrides:
        overrides["config"] = dataclasses.replace(spec.config, **config_overrides)
    if overrides:
        spec = dataclasses.replace(spec, **overrides)
    methods = tuple(args.method) if args.method else METHODS
    report = run_repetitions(spec, methods)
    header = (
        "method", "reps", "failures",
        "avg_r0", "sem_r0", "avg_r1", "sem_r1", "avg_l1", "sem_l1",
        "np_violation", "np_violation_se", "eo_violation", "eo_violation_se",
    )
    rows = []
    payload = {"seconds": report.seconds, "methods": {}}
    for method in methods:
        s = report.methods[method]
        rows.append((
            s.name, s.reps, s.failures,
            _fmt(s.avg_r0), _fmt(s.sem_r0), _fmt(s.avg_r1), _fmt(s.sem_r1),
            _fmt(s.avg_l1), _fmt(s.sem_l1),
            _fmt(s.np_violation_rate), _fmt(s.np_violation_se),
            _fmt(s.eo_violation_rate), _fmt(s.eo_violation_se),
        ))
        payload["methods"][method] = {
            "reps": s.reps, "failures": s.failures,
            "avg_r0": s.avg_r0, "sem_r0": s.sem_r0,
            "avg_r1": s.avg_r1, "sem_r1": s.sem_r1,
            "avg_l1": s.avg_l1, "sem_l1": s.sem_l1,
            "np_violation": s.np_violation_rate,
            "np_violation_se": s.np_violation_se,
            "eo_violation": s.eo_violation_rate,
            "eo_violation_se": s.eo_violation_se,
        }
    _print_table(header, rows)
    _write_json(args.json, payload)
    return 0


def _cmd_oracle(args):
    import contextlib

    with contextlib.ExitStack() as stack:
        if args.model is not None:
            model_path = args.model
        else:
            model_path = _preset_path(stack, args.preset, _MODEL_PRESETS)
        model = load_model(model_path)
    solutions = [
        ("bayes", bayes_oracle(model)),
        ("np", np_oracle(model, args.alpha)),
        ("np-eo", np_eo_oracle(model, args.alpha, args.epsilon)),
    ]
    header = ("solver", "threshold_a", "threshold_b", "r0", "r1", "r1_a", "r1_b", "l1")
    rows = []
    payload = {}
    for name, sol in solutions:
        rep = sol.report
        rows.append((
            name, _fmt(sol.threshold_a), _fmt(sol.threshold_b),
            _fmt(rep.r0), _fmt(rep.r1), _fmt(rep.r1_a), _fmt(rep.r1_b), _fmt(rep.l1),
        ))
        payload[name] = {
            "threshold_a": sol.threshold_a,
            "threshold_b": sol.threshold_b,
            **_report_payload(rep),
        }
    _print_table(header, rows)
    _write_json(args.json, payload)
    return 0


def _cmd_curves(args):
    import contextlib

    with contextlib.ExitStack() as stack:
        if args.model is not None:
            model_path = args.model
        else:
            model_path = _preset_path(stack, args.preset, _MODEL_PRESETS)
        model = load_model(model_path)
    curves = feasibility_curves(model, args.alpha, args.epsilon, args.grid)
    lines = ["curve,c_a,c_b"]
    for name, locus in (("np", curves.np_locus), ("eo", curves.eo_locus)):
        for c_a, c_b in locus:
            lines.append(f"{name},{float(c_a)!r},{float(c_b)!r}")
    text = "\n".join(lines) + "\n"
    if args.out is None or args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as handle:
            handle.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="npeo",
        description="Per-group threshold calibration with type I and "
                    "disparity guarantees.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    cal = sub.add_parser("calibrate", help="pick per-group thresholds from scores or data")
    src = cal.add_mutually_exclusive_group(required=True)
    src.add_argument("--scores", help="score file: id,group,label,score")
    src.add_argument("--data", help="sample file: id,group,label,f1..fd")
    cal.add_argument("--method", choices=("op", "mp"), default="op")
    cal.add_argument("--iterations", type=int, default=500)
    cal.add_argument("--step", type=float, default=0.1)
    cal.add_argument("--classifier", help="write fitted scorer + thresholds as JSON")
    cal.add_argument("--json", help="write a JSON summary here ('-' for stdout)")
    _add_config_args(cal)
    cal.set_defaults(func=_cmd_calibrate)

    ev = sub.add_parser("evaluate", help="error report for thresholds on a file")
    src = ev.add_mutually_exclusive_group(required=True)
    src.add_argument("--scores", help="score file: id,group,label,score")
    src.add_argument("--data", help="sample file: id,group,label,f1..fd")
    ev.add_argument("--threshold-a", type=float)
    ev.add_argument("--threshold-b", type=float)
    ev.add_argument("--classifier", help="classifier JSON written by calibrate")
    ev.add_argument("--json", help="write a JSON summary here ('-' for stdout)")
    ev.set_defaults(func=_cmd_evaluate)

    sim = sub.add_parser("simulate", help="repetition study from a spec file")
    src = sim.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec", help="simulation spec file")
    src.add_argument("--preset", choices=sorted(_SPEC_PRESETS), help="bundled spec")
    sim.add_argument("--reps", type=int, default=None, help="override repetition count")
    sim.add_argument("--method", action="append", choices=METHODS,
                     help="restrict to these methods (repeatable)")
    sim.add_argument("--json", help="write a JSON summary here ('-' for stdout)")
    _add_config_args(sim, with_defaults=False)
    sim.set_defaults(func=_cmd_simulate)

    orc = sub.add_parser("oracle", help="population thresholds for a Gaussian model")
    src = orc.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="model description file")
    src.add_argument("--preset", choices=sorted(_MODEL_PRESETS), help="bundled model")
    orc.add_argument("--alpha", type=float, default=0.1)
    orc.add_argument("--epsilon", type=float, default=0.1)
    orc.add_argument("--json", help="write a JSON summary here ('-' for stdout)")
    orc.set_defaults(func=_cmd_oracle)

    cur = sub.add_parser("curves", help="write the two binding loci as CSV")
    src = cur.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="model description file")
    src.add_argument("--preset", choices=sorted(_MODEL_PRESETS), help="bundled model")
    cur.add_argument("--alpha", type=float, default=0.1)
    cur.add_argument("--epsilon", type=float, default=0.1)
    cur.add_argument("--grid", type=int, default=200)
    cur.add_argument("--out", help="output CSV path ('-' for stdout)")
    cur.set_defaults(func=_cmd_curves)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NpEoError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
