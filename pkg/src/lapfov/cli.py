"""Command-line entry point.

Subcommands: run, depth-eval, mrc-compare, heatmap-build, serve. All outputs
land under --out; report figures (PNG) are rendered next to the delimited
outputs unless --no-figures is given. Exit codes: 0 success, 1 configuration
error, 2 runtime invariant violation.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError, InvariantViolation, LapfovError


def _settings_block(cfg) -> str:
    g = cfg.gains
    vg = cfg.viewgen
    ls = cfg.loss
    lines = [
        "settings:",
        f"  ks: {list(g.ks)}",
        f"  kr: {list(g.kr)}",
        f"  k_theta: {g.k_theta}",
        f"  k_d: {g.k_d}",
        f"  viewgen.w1: {vg.w1}",
        f"  viewgen.w2: {vg.w2}",
        f"  viewgen.percentile: {vg.percentile}",
        f"  viewgen.depth_interval: {list(vg.depth_interval)}",
        f"  loss.alpha: {ls.alpha}",
        f"  loss.mu: {ls.mu}",
        f"  loss.lambda: {ls.lam}",
        f"  loss.scales: {list(ls.scales)}",
        f"  loss.d_min: {ls.d_min}",
        f"  loss.d_max: {ls.d_max}",
        f"  dt: {cfg.dt}",
        f"  duration: {cfg.duration}",
        f"  mrc: {cfg.mrc}",
        f"  seed: {cfg.seed}",
        f"  perception.mode: {cfg.perception.mode}",
    ]
    return "\n".join(lines) + "\n"


def _cmd_run(args) -> int:
    from .config import load_scenario
    from .scenario import run

    cfg = load_scenario(args.config, seed_override=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trace = run(cfg)
    trace.to_csv(out / "trace.csv")
    (out / "summary.txt").write_text(trace.summary_text() + _settings_block(cfg))
    if not args.no_figures:
        from .report import plot_trace

        plot_trace(trace, out / "trace.png")
    print(trace.summary_text(), end="")
    return 0


def _cmd_depth_eval(args) -> int:
    from .config import load_depth_eval
    from .scenario import depth_eval, depth_eval_text

    cfg = load_depth_eval(args.config, seed_override=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = depth_eval(cfg)
    text = depth_eval_text(rows)
    (out / "depth_eval.txt").write_text(text)
    if not args.no_figures:
        from .report import plot_depth_eval

        plot_depth_eval(rows, out / "depth_eval.png")
    print(text, end="")
    return 0


def _cmd_mrc_compare(args) -> int:
    from .config import load_scenario
    from .scenario import run

    cfg = load_scenario(args.config, seed_override=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trace_off = run(replace(cfg, mrc=False, name=cfg.name + "-mrc-off"))
    trace_on = run(replace(cfg, mrc=True, name=cfg.name + "-mrc-on"))
    trace_off.to_csv(out / "trace_mrc_off.csv")
    trace_on.to_csv(out / "trace_mrc_on.csv")
    peak_off = trace_off.summary()["peak_misorientation_deg"]
    peak_on = trace_on.summary()["peak_misorientation_deg"]
    text = (
        f"scenario: {cfg.name}\n"
        f"peak_misorientation_mrc_off_deg: {peak_off}\n"
        f"peak_misorientation_mrc_on_deg: {peak_on}\n"
        f"max_rcm_error_mm: "
        f"{max(trace_off.summary()['max_rcm_error_mm'], trace_on.summary()['max_rcm_error_mm'])}\n"
    )
    (out / "mrc_compare.txt").write_text(text + _settings_block(cfg))
    if not args.no_figures:
        from .report import plot_misorientation_compare

        plot_misorientation_compare(trace_off, trace_on, out / "mrc_compare.png")
    print(text, end="")
    return 0


def _cmd_heatmap_build(args) -> int:
    from .images import save_pnm
    from .viewgen import build_heatmap, load_tracked_points

    try:
        width, height = (int(x) for x in args.size.lower().split("x"))
    except ValueError as exc:
        raise ConfigError(f"bad --size {args.size!r}, expected WxH") from exc
    points_path = Path(args.points)
    if not points_path.is_file():
        raise ConfigError(f"points file not found: {points_path}")
    points = load_tracked_points(points_path)
    heatmap = build_heatmap(points, (width, height), sigma=args.sigma)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    heatmap.save(out / "heatmap.hmap")
    save_pnm(out / "heatmap.pgm", heatmap.to_image())
    if not args.no_figures:
        from .report import plot_heatmap

        plot_heatmap(heatmap, out / "heatmap.png", points=points)
    print(f"heatmap {width}x{height} from {len(points)} points "
          f"(sigma {args.sigma}) -> {out}")
    return 0


def _cmd_serve(args) -> int:
    from .config import load_scenario
    from .service import SimService

    import time

    cfg = load_scenario(args.config, seed_override=args.seed)
    service = SimService(cfg, host=args.host, port=args.port)
    service.start()
    print(f"listening on {args.host}:{service.port}", flush=True)
    try:
        while True:
            time.sleep(0.2)
    except KeyboardInterrupt:
        pass
    finally:
        service.stop()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lapfov",
        description="Automated laparoscope field-of-view control simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario, write trace CSV + summary + figures")
    run_p.add_argument("--config", required=True, help="scenario YAML file")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--seed", type=int, default=None, help="seed override")
    run_p.add_argument("--no-figures", action="store_true", help="skip PNG reports")
    run_p.set_defaults(func=_cmd_run)

    de_p = sub.add_parser("depth-eval", help="depth-estimation sweep report")
    de_p.add_argument("--config", required=True)
    de_p.add_argument("--out", required=True)
    de_p.add_argument("--seed", type=int, default=None)
    de_p.add_argument("--no-figures", action="store_true")
    de_p.set_defaults(func=_cmd_depth_eval)

    mrc_p = sub.add_parser("mrc-compare", help="paired MRC off/on runs + misorientation summary")
    mrc_p.add_argument("--config", required=True)
    mrc_p.add_argument("--out", required=True)
    mrc_p.add_argument("--seed", type=int, default=None)
    mrc_p.add_argument("--no-figures", action="store_true")
    mrc_p.set_defaults(func=_cmd_mrc_compare)

    hm_p = sub.add_parser("heatmap-build", help="build a heatmap from tracked points")
    hm_p.add_argument("--points", required=True, help="text file, one 'u v' per line")
    hm_p.add_argument("--size", required=True, help="WxH, e.g. 320x240")
    hm_p.add_argument("--sigma", type=float, default=0.0, help="Gaussian sigma in px")
    hm_p.add_argument("--out", required=True)
    hm_p.add_argument("--no-figures", action="store_true")
    hm_p.set_defaults(func=_cmd_heatmap_build)

    serve_p = sub.add_parser("serve", help="start the live session service")
    serve_p.add_argument("--config", required=True)
    serve_p.add_argument("--port", type=int, default=8765, help="0 for ephemeral")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--seed", type=int, default=None)
    serve_p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2
    except LapfovError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
