"""Command-line entry point.

Subcommands:

    gkflow flow run <cfg>                 run a configured flow, with or
                                          without surgery, and write artifacts
    gkflow verify algebra --samples N --seed S
                                          fuzz the structure conditions of the
                                          speed and print a JSON summary
    gkflow surgery demo <cfg>             one surgery on the initial shape of
                                          the config, report and profiles out
    gkflow print-defaults                 print the default config

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 verdict
failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .algebra import (PrincipalSpectrum, ShapeOperator, check_pinching_inequality,
                      check_structure_conditions, eval_derivatives,
                      eval_second_variation, eval_speed,
                      finite_difference_second_variation,
                      finite_difference_speed_gradient, sample_spectra)
from .config import default_config, dumps_config, load_config
from .engine import run
from .errors import (ConfigError, GkflowError, MonotonicityViolated,
                     NeckTooShort, NoNeckAtThreshold)
from .monitors import MonitorTape, assert_estimates, verdicts_to_json
from .profile import geometry, save_profile
from .surgery import (detect_necks, events_to_jsonl, standard_surgery,
                      surgically_modified_run)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VERDICT = 4


def _fail(msg: str, code: int) -> int:
    print(f"gkflow: {msg}", file=sys.stderr)
    return code


def _ensure_dir(path: str):
    os.makedirs(path, exist_ok=True)


def _render_flow_figures(out_dir: str, tapes, curves):
    """Monitor time series and profile snapshots as PNG, next to the CSVs."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(2, 2, figsize=(10, 7))
    for k, tape in enumerate(tapes):
        if not tape.rows:
            continue
        t = tape.column("t")
        axes[0, 0].plot(t, tape.column("max_G"), label=f"segment {k}")
        axes[0, 0].plot(t, tape.column("min_G"), ls="--")
        axes[0, 1].plot(t, tape.column("max_H_over_G"))
        axes[1, 0].plot(t, tape.column("min_lambda1_over_G"))
        axes[1, 1].plot(t, tape.column("min_inscribed_times_G"))
    axes[0, 0].set_title("max G (solid), min G (dashed)")
    axes[0, 1].set_title("max H/G")
    axes[1, 0].set_title("min lambda_1/G")
    axes[1, 1].set_title("min inscribed radius * G")
    for ax in axes.flat:
        ax.set_xlabel("t")
        ax.grid(True, alpha=0.3)
    if len(tapes) > 1:
        axes[0, 0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "monitors.png"), dpi=110)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(8, 4))
    for label, c in curves:
        ax.plot(c.z, c.r, label=label)
    ax.set_xlabel("z")
    ax.set_ylabel("r")
    ax.set_ylim(bottom=0.0)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "profiles.png"), dpi=110)
    plt.close(fig)


def _render_surgery_figure(out_dir: str, pre, components):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(pre.z, pre.r, color="0.6", label="before")
    for k, comp in enumerate(components):
        ax.plot(comp.z, comp.r, label=f"component {k}")
    ax.set_xlabel("z")
    ax.set_ylabel("r")
    ax.set_ylim(bottom=0.0)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "surgery.png"), dpi=110)
    plt.close(fig)


def _write_flow_artifacts(out_dir, cfg, tapes, events, reports, finals):
    _ensure_dir(out_dir)
    with open(os.path.join(out_dir, "config.toml"), "w") as f:
        f.write(dumps_config(cfg))
    for k, tape in enumerate(tapes):
        tape.to_csv(os.path.join(out_dir, f"monitors_{k:02d}.csv"))
    with open(os.path.join(out_dir, "events.jsonl"), "w") as f:
        f.write(events_to_jsonl(events))
    for k, rep in enumerate(reports):
        with open(os.path.join(out_dir, f"surgery_{k:02d}.json"), "w") as f:
            f.write(rep.to_json())
    curves = []
    for k, state in enumerate(finals):
        save_profile(state.curve, os.path.join(out_dir, f"final_{k:02d}.csv"))
        header = {"t": state.t, "step_count": state.step_count,
                  "status": state.status.kind, "reason": state.status.reason}
        with open(os.path.join(out_dir, f"final_{k:02d}.json"), "w") as f:
            json.dump(header, f, indent=2, sort_keys=True)
        curves.append((f"final {k} (t={state.t:.4f})", state.curve))
    return curves


def cmd_flow_run(cfg_path: str) -> int:
    try:
        cfg = load_config(cfg_path)
        initial = cfg.build_initial()
    except (ConfigError, ValueError, OSError) as exc:
        return _fail(str(exc), EXIT_CONFIG)

    verdict_code = EXIT_OK
    if cfg.surgery:
        try:
            finals, events, reports, tapes = surgically_modified_run(
                initial, cfg.step, cfg.surgery_params, cfg.t_max,
                kappa=cfg.kappa, monitor_stride=cfg.monitor_stride,
                mu_stride=cfg.monitor_mu_stride)
        except MonotonicityViolated as exc:
            rep = getattr(exc, "report", None)
            if rep is not None:
                _ensure_dir(cfg.out_dir)
                with open(os.path.join(cfg.out_dir, "surgery_failed.json"),
                          "w") as f:
                    f.write(rep.to_json())
            return _fail(str(exc), EXIT_VERDICT)
        except (NoNeckAtThreshold, NeckTooShort, GkflowError) as exc:
            partial = getattr(exc, "partial", None)
            if partial is not None:
                finals, events, reports, tapes = partial
                _write_flow_artifacts(cfg.out_dir, cfg, tapes, events,
                                      reports, finals)
            return _fail(str(exc), EXIT_NUMERICAL)
    else:
        tape = MonitorTape(n=cfg.n, kappa=cfg.kappa, sigma=cfg.monitor_sigma,
                           stride=cfg.monitor_stride,
                           mu_stride=cfg.monitor_mu_stride)
        try:
            state, tape = run(initial, cfg.step, cfg.t_max, kappa=cfg.kappa,
                              monitor=tape)
        except GkflowError as exc:
            return _fail(str(exc), EXIT_NUMERICAL)
        finals, tapes, reports = [state], [tape], []
        events = [{"event": state.status.kind, "t": state.t,
                   "steps": state.step_count}]
        if state.status.kind == "failed":
            events[-1]["reason"] = state.status.reason

    curves = _write_flow_artifacts(cfg.out_dir, cfg, tapes, events, reports,
                                   finals)

    verdicts = []
    for tape in tapes:
        if tape.rows:
            verdicts.extend(assert_estimates(tape, cfg.tolerances))
    terminal = [ev for ev in events if ev["event"] == "extinct"]
    extinction_time = max((ev["t"] for ev in terminal), default=None)
    summary = {
        "status": [st.status.kind for st in finals],
        "events": [{k: v for k, v in ev.items() if k != "neck"}
                   for ev in events],
        "extinction_time": extinction_time,
        "surgeries": len(reports),
        "seed": cfg.seed,
    }
    with open(os.path.join(cfg.out_dir, "verdicts.json"), "w") as f:
        f.write(verdicts_to_json(verdicts, extra=summary))
    _render_flow_figures(cfg.out_dir, tapes, [("initial", initial)] + curves)

    failed = any(ev["event"] == "failed" for ev in events)
    if failed:
        reason = next(ev.get("reason") for ev in events
                      if ev["event"] == "failed")
        return _fail(f"flow failed: {reason}", EXIT_NUMERICAL)
    if any(v.evaluated and not v.passed for v in verdicts):
        bad = [v.name for v in verdicts if v.evaluated and not v.passed]
        verdict_code = _fail("verdicts failed: " + ", ".join(sorted(set(bad))),
                             EXIT_VERDICT)
    else:
        print(json.dumps(summary, sort_keys=True))
    return verdict_code


def cmd_verify_algebra(samples: int, seed: int) -> int:
    if samples < 1:
        return _fail("--samples must be at least 1", EXIT_CONFIG)
    rng = np.random.default_rng(seed)
    grid = [(n, kappa) for n in range(3, 9) for kappa in (0.0, 0.1, 1.0)]
    per = max(1, samples // len(grid))
    failures = []
    checked = {"pinching": 0, "structure": 0, "gradient": 0,
               "second_variation": 0}

    def record(kind, s, detail):
        failures.append({"suite": kind, "n": s.n, "kappa": s.kappa,
                         "lambdas": [float(x) for x in s.lambdas],
                         "detail": detail})

    deep_budget = min(samples, 60)
    for n, kappa in grid:
        spectra = sample_spectra(n, kappa, per, int(rng.integers(2**31)))
        for s in spectra:
            lhs, rhs, holds = check_pinching_inequality(s)
            checked["pinching"] += 1
            if not holds:
                record("pinching", s, {"lhs": lhs, "rhs": rhs})
        # the expensive suites run on a fixed-size prefix per grid cell
        for s in spectra[:max(1, deep_budget // len(grid))]:
            rep = check_structure_conditions(s, trials=4,
                                             seed=int(rng.integers(2**31)))
            checked["structure"] += 1
            if not rep.all_pass:
                record("structure", s, {"failures": [list(map(str, f))
                                                     for f in rep.failures]})
            grad = eval_derivatives(s).eigen_gradient
            fd = finite_difference_speed_gradient(s)
            checked["gradient"] += 1
            err = float(np.max(np.abs(grad - fd)) / max(1.0, eval_speed(s)))
            if err > 1e-5:
                record("gradient", s, {"fd_error": err})
            h = ShapeOperator(s.n, np.diag(s.lambdas))
            M = rng.standard_normal((s.n, s.n))
            A = 0.5 * (M + M.T)
            v = eval_second_variation(h, A, kappa)
            vfd = finite_difference_second_variation(h, A, kappa)
            checked["second_variation"] += 1
            if v > 1e-10 or abs(v - vfd) > 1e-6 * max(1.0, abs(v)):
                record("second_variation", s,
                       {"value": v, "finite_difference": vfd})

    summary = {"samples": samples, "seed": seed, "checked": checked,
               "failures": failures, "passed": not failures}
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK if not failures else EXIT_VERDICT


def cmd_surgery_demo(cfg_path: str) -> int:
    try:
        cfg = load_config(cfg_path)
        initial = cfg.build_initial()
    except (ConfigError, ValueError, OSError) as exc:
        return _fail(str(exc), EXIT_CONFIG)
    p = cfg.surgery_params
    necks = detect_necks(initial, p)
    if not necks:
        return _fail("initial shape has no detectable neck", EXIT_CONFIG)
    neck = max(necks, key=lambda nk: nk.length)
    _ensure_dir(cfg.out_dir)
    save_profile(initial, os.path.join(cfg.out_dir, "pre.csv"))
    try:
        components, report = standard_surgery(initial, neck, p,
                                              kappa=cfg.kappa)
    except MonotonicityViolated as exc:
        rep = getattr(exc, "report", None)
        if rep is not None:
            with open(os.path.join(cfg.out_dir, "surgery_report.json"),
                      "w") as f:
                f.write(rep.to_json())
        return _fail(str(exc), EXIT_VERDICT)
    except GkflowError as exc:
        return _fail(str(exc), EXIT_NUMERICAL)
    for k, comp in enumerate(components):
        save_profile(comp, os.path.join(cfg.out_dir, f"post_{k}.csv"))
    with open(os.path.join(cfg.out_dir, "surgery_report.json"), "w") as f:
        f.write(report.to_json())
    _render_surgery_figure(cfg.out_dir, initial, components)
    print(json.dumps({"passed": report.passed, "z_scale": report.z_scale,
                      "neck": neck.as_dict(),
                      "verdicts": report.verdicts}, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="gkflow",
                                  description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="command", required=True)

    flow = sub.add_parser("flow", help="flow runs")
    flow_sub = flow.add_subparsers(dest="flow_command", required=True)
    flow_run = flow_sub.add_parser("run", help="run a configured flow")
    flow_run.add_argument("config", help="path to a TOML run config")

    verify = sub.add_parser("verify", help="verification suites")
    verify_sub = verify.add_subparsers(dest="verify_command", required=True)
    algebra = verify_sub.add_parser("algebra",
                                    help="fuzz the speed structure conditions")
    algebra.add_argument("--samples", type=int, default=1000)
    algebra.add_argument("--seed", type=int, default=0)

    surgery = sub.add_parser("surgery", help="surgery tools")
    surgery_sub = surgery.add_subparsers(dest="surgery_command", required=True)
    demo = surgery_sub.add_parser("demo",
                                  help="one surgery on the configured shape")
    demo.add_argument("config", help="path to a TOML run config")

    sub.add_parser("print-defaults", help="print the default config")
    return top


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "flow":
        return cmd_flow_run(args.config)
    if args.command == "verify":
        return cmd_verify_algebra(args.samples, args.seed)
    if args.command == "surgery":
        return cmd_surgery_demo(args.config)
    if args.command == "print-defaults":
        print(dumps_config(default_config()), end="")
        return EXIT_OK
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
