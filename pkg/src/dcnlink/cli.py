"""Command-line front end.

Machine-first output: JSON or CSV on stdout, diagnostics on stderr.
Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 infeasible result under --strict.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import berstats, datasets, explorer, optics, rules as rules_mod
from .errors import ConfigError, DataError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INFEASIBLE = 3


class _Parser(argparse.ArgumentParser):
    # Usage problems are exit code 1, not argparse's default 2.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _diag(message: str) -> None:
    print(message, file=sys.stderr)


def _emit(args, payload: dict) -> None:
    if getattr(args, "human", False):
        for line in _human_lines(payload):
            print(line)
    else:
        print(json.dumps(payload))


def _human_lines(payload: dict, indent: str = ""):
    for key, value in payload.items():
        if isinstance(value, dict):
            yield f"{indent}{key}:"
            yield from _human_lines(value, indent + "  ")
        elif isinstance(value, list):
            yield f"{indent}{key}:"
            for item in value:
                if isinstance(item, dict):
                    yield f"{indent}  -"
                    yield from _human_lines(item, indent + "    ")
                else:
                    yield f"{indent}  {item}"
        else:
            yield f"{indent}{key} = {value}"


def _figure_dir(args) -> Path | None:
    if getattr(args, "figures", None) is None:
        return None
    path = Path(args.figures)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_rules(args) -> rules_mod.ThresholdRuleSet:
    if args.rules:
        return rules_mod.load_rules(args.rules)
    return rules_mod.ThresholdRuleSet()


def _load_library(args) -> optics.ComponentLibrary:
    if args.library:
        return optics.load_library(args.library)
    return explorer.default_library()


def _tolerance(args, rules: rules_mod.ThresholdRuleSet) -> float:
    if args.tolerance_log10 is not None:
        return args.tolerance_log10
    return rules.ber_tolerance_log10


def _dataset(args) -> datasets.Dataset:
    if args.table:
        return datasets.BUILTIN_TABLES[args.table]()
    return datasets.load_csv(args.csv)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_ber(args) -> int:
    rules = _load_rules(args)
    tolerance = _tolerance(args, rules)
    samples = berstats.read_samples(args.samples)
    fit, q, ber = berstats.estimate_ber(samples, tol=args.tol, max_iter=args.max_iter)
    decision = rules_mod.label_from_ber(ber.log10, tolerance)
    _emit(
        args,
        {
            "mu0": fit.mu0,
            "mu1": fit.mu1,
            "sigma0": fit.sigma0,
            "sigma1": fit.sigma1,
            "w0": fit.w0,
            "w1": fit.w1,
            "iterations": fit.iterations,
            "q": q,
            "ber": ber.prob,
            "ber_log10": ber.log10,
            "tolerance_log10": tolerance,
            "decision": decision.value,
        },
    )
    figdir = _figure_dir(args)
    if figdir is not None:
        from . import plots

        target = figdir / "mixture.png"
        plots.save_mixture_figure(samples, fit, target)
        _diag(f"wrote {target}")
    return EXIT_OK


def cmd_learn(args) -> int:
    rules = _load_rules(args)
    tolerance = _tolerance(args, rules)
    ds = _dataset(args)
    samples = datasets.to_labeled(ds, [args.feature], tolerance)
    stump = rules_mod.learn_stump(samples, args.feature)

    confusion = {"pass_pass": 0, "pass_fail": 0, "fail_pass": 0, "fail_fail": 0}
    for s in samples:
        predicted = stump.predict(s.features[args.feature])
        confusion[f"{predicted.value}_{s.label.value}"] += 1

    reference = None
    if args.table == "table1" and args.feature == "rx":
        reference = datasets.TABLE1_REFERENCE_SPLIT
    elif args.table == "table2" and args.feature == "preamp":
        reference = datasets.TABLE2_REFERENCE_SPLIT

    payload = {"stump": stump.to_json(), "confusion": confusion}
    if reference is not None:
        payload["reference"] = reference
    _emit(args, payload)

    figdir = _figure_dir(args)
    if figdir is not None:
        from . import plots

        target = figdir / "stump.png"
        plots.save_stump_figure(samples, stump, target)
        _diag(f"wrote {target}")
    return EXIT_OK


def cmd_classify(args) -> int:
    rules = _load_rules(args)
    library = _load_library(args)
    left = optics.parse_sequence(args.left)
    amp_requested = args.right is not None or args.amp_gain is not None
    amp = None
    if amp_requested:
        gain = args.amp_gain
        if gain is None:
            spec = library.get(optics.ComponentKind.AMPLIFIER)
            if spec is None:
                raise ConfigError("amplified design needs --amp-gain or a library amplifier entry")
            gain = spec.effect_db(args.wavelength)
        amp = optics.ComponentSpec(
            optics.ComponentKind.AMPLIFIER, {args.wavelength: gain}
        )
    right = optics.parse_sequence(args.right) if args.right is not None else ()
    design = optics.LinkDesign(
        left=left,
        amplifier=amp,
        right=right,
        launch_dbm=args.launch,
        wavelength_nm=args.wavelength,
    )
    trace, verdict = explorer.evaluate_design(design, library, rules)
    pre = optics.preamp_power(trace)
    _emit(
        args,
        {
            "trace": [{"stage": label, "power_dbm": power} for label, power in trace.stages],
            "preamp_dbm": pre,
            "rx_dbm": optics.rx_power(trace),
            "margins": dict(verdict.margins),
            "failed_rules": list(verdict.failed_rules),
            "decision": verdict.decision.value,
        },
    )
    figdir = _figure_dir(args)
    if figdir is not None:
        from . import plots

        target = figdir / "trace.png"
        plots.save_trace_figure(trace, rules, target)
        _diag(f"wrote {target}")
    if args.strict and verdict.decision is rules_mod.PassFail.FAIL:
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_explore(args) -> int:
    rules = _load_rules(args)
    library = _load_library(args)
    space = explorer.load_design_space(args.space)
    results = explorer.explore(space, library, rules)
    if args.limit is not None:
        results = results[: args.limit]
    explorer.results_to_csv(results, sys.stdout)
    figdir = _figure_dir(args)
    if figdir is not None:
        from . import plots

        target = figdir / "explore.png"
        plots.save_explore_figure(results, target)
        _diag(f"wrote {target}")
    if args.strict and not results:
        _diag("no feasible design in the space")
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_calibrate(args) -> int:
    ds = _dataset(args)
    if args.wavelength is not None:
        wavelengths = [args.wavelength]
    else:
        wavelengths = sorted(
            {r.wavelength_nm for r in ds if not r.has_amplifier and r.wavelength_nm is not None}
        )
        if not wavelengths:
            raise DataError("dataset has no passive records with a wavelength")
    calibrations = [explorer.calibrate_losses(ds, wl) for wl in wavelengths]
    _emit(
        args,
        {
            "calibrations": [
                {
                    "wavelength_nm": c.wavelength_nm,
                    "launch_dbm": c.launch_dbm,
                    "loss_s_db": c.loss_s_db,
                    "loss_m_db": c.loss_m_db,
                    "residual_rms_db": c.residual_rms_db,
                    "residuals": [
                        {"scenario": s, "residual_db": r} for s, r in c.residuals
                    ],
                }
                for c in calibrations
            ]
        },
    )
    if args.write_library:
        library = {
            optics.ComponentKind.POWER_SPLIT: optics.ComponentSpec(
                optics.ComponentKind.POWER_SPLIT,
                {c.wavelength_nm: c.loss_s_db for c in calibrations},
            ),
            optics.ComponentKind.WAVELENGTH_MUX: optics.ComponentSpec(
                optics.ComponentKind.WAVELENGTH_MUX,
                {c.wavelength_nm: c.loss_m_db for c in calibrations},
            ),
        }
        optics.save_library(library, args.write_library)
        _diag(f"wrote {args.write_library}")
    figdir = _figure_dir(args)
    if figdir is not None:
        from . import plots

        for c in calibrations:
            target = figdir / f"calibration_{c.wavelength_nm:g}.png"
            plots.save_calibration_figure(c, target)
            _diag(f"wrote {target}")
    return EXIT_OK


def cmd_tables(args) -> int:
    if args.table is None:
        print("name,records")
        for name, factory in datasets.BUILTIN_TABLES.items():
            print(f"{name},{len(factory())}")
        return EXIT_OK
    sys.stdout.write(datasets.dataset_to_csv_text(datasets.BUILTIN_TABLES[args.table]()))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--rules", metavar="FILE", help="rules config file (JSON)")
    common.add_argument("--library", metavar="FILE", help="component library file (JSON)")
    common.add_argument(
        "--tolerance-log10",
        type=float,
        default=None,
        metavar="R",
        help="log10 of the tolerable BER (default -12)",
    )
    common.add_argument("--human", action="store_true", help="key = value output instead of JSON")
    common.add_argument("--figures", metavar="DIR", help="also render figures into DIR")

    parser = _Parser(prog="dcnlink", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ber", parents=[common], help="estimate BER from an amplitude samples file")
    p.add_argument("samples", help="text or CSV samples file")
    p.add_argument("--tol", type=float, default=1e-9, help="EM convergence tolerance")
    p.add_argument("--max-iter", type=int, default=500, help="EM iteration budget")
    p.set_defaults(func=cmd_ber)

    p = sub.add_parser("learn", parents=[common], help="learn a threshold stump from measurements")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--table", choices=sorted(datasets.BUILTIN_TABLES), help="built-in table")
    src.add_argument("--csv", metavar="FILE", help="measurement CSV file")
    p.add_argument("--feature", required=True, choices=sorted(datasets.FEATURE_FIELDS))
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("classify", parents=[common], help="propagate one design and apply the floors")
    p.add_argument("--left", required=True, help="left chain letters ('' or '-' for empty)")
    p.add_argument("--right", default=None, help="right chain letters; implies an amplifier")
    p.add_argument("--amp-gain", type=float, default=None, help="amplifier gain in dB")
    p.add_argument("--launch", type=float, required=True, help="launch power in dBm")
    p.add_argument("--wavelength", type=float, default=1510.0, help="wavelength in nm")
    p.add_argument("--strict", action="store_true", help="exit 3 when the design fails")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("explore", parents=[common], help="rank all feasible designs in a space")
    p.add_argument("--space", required=True, metavar="FILE", help="design-space JSON file")
    p.add_argument("--limit", type=int, default=None, help="truncate the ranked list")
    p.add_argument("--strict", action="store_true", help="exit 3 when nothing is feasible")
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("calibrate", parents=[common], help="fit component losses to measurements")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--table", choices=sorted(datasets.BUILTIN_TABLES), help="built-in table")
    src.add_argument("--csv", metavar="FILE", help="measurement CSV file")
    p.add_argument("--wavelength", type=float, default=None, help="calibrate one wavelength only")
    p.add_argument("--write-library", metavar="FILE", help="write the fitted library as JSON")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("tables", parents=[common], help="dump the built-in measurement tables")
    p.add_argument("--table", choices=sorted(datasets.BUILTIN_TABLES), default=None)
    p.set_defaults(func=cmd_tables)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse --help exits 0, usage errors exit 1
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        _diag(f"error: {exc}")
        return EXIT_USAGE
    except DataError as exc:
        _diag(f"error: {exc}")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
