"""``qrs`` command line: ``curves``, ``simulate`` and ``verify``.

Every command reads an optional JSON config (``--config``); flags given on the
command line override the matching config fields.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from ..errors import ConfigurationError, QRSError
from . import curves
from .config import ExperimentConfig, load_config
from .simulate import simulate
from .suites import InfeasibleError, verify_theorems

FIGURES = (3, 5, 6, 7, 8, 9)
# x variable of each figure, and the variable its series range over
_AXES = {3: ("epsilon", None), 5: ("M", "epsilon"), 6: ("N", "M"), 7: ("M", "N"), 8: ("N", "M"), 9: ("M", "N")}
_GRID_KW = {3: "epsilon_grid", 5: "M_grid"}
_SERIES_KW = {5: "epsilon_list"}


def curve_points(cfg: ExperimentConfig) -> list[curves.CurvePoint]:
    """Figure data for ``cfg.fig`` with the sweep applied.

    Emitter keyword overrides come from ``cfg.options["fig<N>"]``.
    """
    if cfg.fig not in FIGURES:
        raise QRSError(f"--fig must be one of {FIGURES}")
    opts = dict(cfg.options.get(f"fig{cfg.fig}", {}))
    sw = cfg.sweep
    if sw is not None:
        x_var, series_var = _AXES[cfg.fig]
        vals = list(sw.values)
        if sw.variable == x_var:
            opts[_GRID_KW.get(cfg.fig, "grid")] = vals
        elif sw.variable == series_var:
            opts[_SERIES_KW.get(cfg.fig, "series")] = vals
        elif sw.variable == "s_tilde" and cfg.fig in (8, 9):
            out = []
            for s in vals:
                for p in _emit(cfg.fig, {**opts, "s_tilde": s}):
                    out.append(curves.CurvePoint(f"s_tilde={s:g};{p.series}", p.x, p.y))
            return out
        else:
            raise QRSError(f"figure {cfg.fig} cannot sweep {sw.variable!r}")
    return _emit(cfg.fig, opts)


def _emit(fig, opts):
    try:
        return curves.emit_figure(fig, opts)
    except TypeError as exc:
        raise ConfigurationError(f"bad options for figure {fig}: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qrs", description="Quantum remote sensing simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="JSON experiment config")
        p.add_argument("--seed", type=int, help="64-bit root seed (default: config value or 0)")

    p = sub.add_parser("curves", help="emit figure data as CSV")
    common(p)
    p.add_argument("--fig", type=int, choices=FIGURES)
    p.add_argument("--out", help="output CSV path ('-' for stdout)")

    p = sub.add_parser("simulate", help="run the protocol and write transcripts")
    common(p)
    p.add_argument("--out", help="output directory")
    p.add_argument("--M", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--engine", choices=("rounds", "batch"))
    p.add_argument("--abort-policy", dest="abort_policy", choices=("skip", "retry", "halt"))

    p = sub.add_parser("verify", help="Monte-Carlo checks of the four theorems")
    common(p)
    p.add_argument("--out", help="write the JSON report here as well as to stdout")
    p.add_argument("--trials", type=int)
    p.add_argument("--suites", help="comma-separated suite names")
    p.add_argument("--time-budget", dest="time_budget", type=float)
    return ap


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig(command=args.command)
    over = {k: getattr(args, k, None) for k in ("seed", "fig", "M", "trials", "engine", "abort_policy",
                                                "time_budget")}
    over["command"] = args.command
    over["output_path"] = getattr(args, "out", None)
    cfg = cfg.with_overrides(**over)
    if getattr(args, "suites", None):
        cfg = cfg.with_overrides(options={**cfg.options, "suites": args.suites.split(",")})
    return cfg


def _write_text(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    warnings.simplefilter("default", RuntimeWarning)
    try:
        cfg = resolve_config(args)
        if cfg.command == "curves":
            out = cfg.output_path or (f"fig{cfg.fig}.csv" if cfg.fig else None)
            _write_text(curves.curves_csv(curve_points(cfg)), out)
            return 0
        if cfg.command == "simulate":
            paths = simulate(cfg)
            for name, p in paths.items():
                print(f"{name}: {p}", file=sys.stderr)
            return 0
        report = verify_theorems(cfg)
        text = json.dumps(report, sort_keys=True, indent=2) + "\n"
        _write_text(text, None)
        if cfg.output_path:
            _write_text(text, cfg.output_path)
        for s in report["suites"]:
            print(f"{'PASS' if s['passed'] else 'FAIL'} {s['name']}", file=sys.stderr)
        return 0 if report["passed"] else 1
    except InfeasibleError as exc:
        print(f"qrs: refused: {exc}", file=sys.stderr)
        return 3
    except (QRSError, ValueError, OSError) as exc:
        print(f"qrs: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
