"""catchkit command line.

Subcommands: augment (run, dedup), regs (check), ems (calc, tension,
waveform), bob (simulate), engine (run), replay.

Exit codes: 0 success; 2 usage errors (argparse). `regs check` maps its
verdict to the exit code (0 keep, 1 release, 2 no rule, 3 invalid input);
every other subcommand exits 1 on a domain/file error. A JSON file passed
via --config supplies defaults for any flag (command line still wins).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from datetime import date
from pathlib import Path

import numpy as np

from catchkit import augment, bobproto, ems, engine as engine_mod, regulations, replay as replay_mod, report
from catchkit.clock import RealClock, VirtualClock
from catchkit.images import load_png, save_png
from catchkit.vision import BlobDetector, SceneSpec, SidecarDetector, render_frame


def _fail(message: str, code: int = 1) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _require(args, *specs: str) -> int | None:
    """Usage check for flags that may also come from --config.

    Each spec is "flag" or "flag:dest" when the namespace name differs.
    """
    missing = []
    for spec in specs:
        flag, _, dest = spec.partition(":")
        dest = dest or flag.replace("-", "_")
        if getattr(args, dest, None) is None:
            missing.append(f"--{flag}")
    if missing:
        print(f"error: missing required arguments: {', '.join(missing)}",
              file=sys.stderr)
        return 2
    return None


def _host_port(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    return host or "127.0.0.1", int(port)


# ---------------------------------------------------------------------------
# augment
# ---------------------------------------------------------------------------

def cmd_augment_run(args) -> int:
    if (code := _require(args, "in:in_dir", "out:out_dir")) is not None:
        return code
    src = Path(args.in_dir)
    dst = Path(args.out_dir)
    paths = sorted(src.glob("*.png"))
    if not paths:
        return _fail(f"no PNG files in {src}")
    dst.mkdir(parents=True, exist_ok=True)

    contrast_range = None
    if args.contrast:
        lo, _, hi = args.contrast.partition(":")
        contrast_range = (float(lo), float(hi))
    blur_kernel = None
    if args.blur:
        length, _, angle_deg = args.blur.partition(":")
        blur_kernel = augment.BlurKernel.box(int(length),
                                             math.radians(float(angle_deg or 0)))

    rng = np.random.default_rng(args.seed)
    for path in paths:
        img = load_png(path)
        if args.fisheye:
            center = ((img.width - 1) / 2.0, (img.height - 1) / 2.0)
            img = augment.fisheye_transform(
                img, augment.FisheyeParams(args.fisheye, center))
        if contrast_range:
            factor = float(rng.uniform(*contrast_range))
            img = augment.contrast_adjust(img, factor)
        if args.noise:
            img = augment.scatter_noise(img, args.noise,
                                        seed=int(rng.integers(0, 2**63)))
        if blur_kernel:
            img = augment.motion_blur(img, blur_kernel)
        save_png(img, dst / path.name)
    print(f"augmented {len(paths)} images -> {dst}")
    return 0


def cmd_augment_dedup(args) -> int:
    if (code := _require(args, "in:in_dir", "manifest")) is not None:
        return code
    src = Path(args.in_dir)
    paths = sorted(src.glob("*.png"))
    if not paths:
        return _fail(f"no PNG files in {src}")
    corpus = [load_png(p) for p in paths]
    cfg = augment.DedupConfig(patch_size=args.patch,
                              ssd_threshold=args.ssd_thresh,
                              ssim_threshold=args.ssim_thresh)
    try:
        kept, drops = augment.dedup_detailed(corpus, cfg)
    except ValueError as e:
        return _fail(str(e))
    manifest = {
        "config": {"patch_size": cfg.patch_size,
                   "ssd_threshold": cfg.ssd_threshold,
                   "ssim_threshold": cfg.ssim_threshold},
        "kept": [paths[i].name for i in kept],
        "dropped": [
            {"file": paths[d["index"]].name,
             "duplicate_of": paths[d["duplicate_of"]].name,
             "patch_mse": d["patch_mse"], "ssim": d["ssim"]}
            for d in drops
        ],
    }
    Path(args.manifest).write_text(json.dumps(manifest, indent=2) + "\n")
    reduction = 100.0 * (1.0 - len(kept) / len(corpus))
    print(f"kept {len(kept)}/{len(corpus)} images ({reduction:.1f}% reduction), "
          f"manifest -> {args.manifest}")
    return 0


# ---------------------------------------------------------------------------
# regs
# ---------------------------------------------------------------------------

def cmd_regs_check(args) -> int:
    if (code := _require(args, "file", "species", "date")) is not None:
        return code
    try:
        regs = regulations.load_regulations(args.file)
        when = date.fromisoformat(args.date)
        ctx = regulations.CatchContext(
            species=args.species, date=when,
            length_cm=args.length_cm, bag_count_today=args.bag)
    except (OSError, ValueError) as e:
        return _fail(str(e), code=3)
    verdict = regulations.evaluate(ctx, regs)
    reasons = ",".join(r.value for r in verdict.reasons)
    print(verdict.decision.value + (f" {reasons}" if reasons else ""))
    if verdict.decision is regulations.Decision.KEEP_ALLOWED:
        return 0
    if verdict.decision is regulations.Decision.MUST_RELEASE:
        return 1
    return 2


# ---------------------------------------------------------------------------
# ems
# ---------------------------------------------------------------------------

def cmd_ems_calc(args) -> int:
    if (code := _require(args, "current", "resistance")) is not None:
        return code
    try:
        volts = ems.required_voltage(args.current, args.resistance)
    except ValueError as e:
        return _fail(str(e))
    print(f"{volts:.6g} V")
    return 0


def cmd_ems_tension(args) -> int:
    if (code := _require(args, "current", "mass-g")) is not None:
        return code
    cal = ems.DEFAULT_CALIBRATION
    if args.cal:
        try:
            triples = json.loads(Path(args.cal).read_text())
            cal = ems.TensionCalibration(points=tuple(
                (float(c), float(m), float(t)) for c, m, t in triples))
        except (OSError, ValueError, TypeError) as e:
            return _fail(f"bad calibration file: {e}")
    try:
        tension = ems.holding_tension(args.current, args.mass_g, cal)
    except ValueError as e:
        return _fail(str(e))
    print(f"{tension:.6g} N")
    return 0


def cmd_ems_waveform(args) -> int:
    if (code := _require(args, "csv")) is not None:
        return code
    params = ems.ElectricalParams(drive_freq_hz=args.freq,
                                  primary_voltage_v=args.primary,
                                  turns_ratio=args.ratio)
    try:
        wave = ems.drive_waveform(params, args.duration, args.rate)
    except ValueError as e:
        return _fail(str(e))
    report.waveform_report(wave, args.rate, args.csv, args.plot)
    where = f"{args.csv}" + (f" and {args.plot}" if args.plot else "")
    print(f"{len(wave)} samples ({ems.transition_count(wave)} transitions) -> {where}")
    return 0


# ---------------------------------------------------------------------------
# bob / engine / replay
# ---------------------------------------------------------------------------

def _frame_source(args):
    if args.frames:
        return bobproto.DirectoryFrameSource(args.frames)
    from catchkit.images import png_bytes

    scene = SceneSpec.load(args.scene) if args.scene else SceneSpec(objects=())
    w, h = (int(v) for v in args.size.split("x"))
    return bobproto.StaticFrameSource([png_bytes(render_frame(scene, w, h))])


def cmd_bob_simulate(args) -> int:
    host, port = _host_port(args.listen)
    try:
        source = _frame_source(args)
    except (OSError, ValueError) as e:
        return _fail(str(e))
    listener, accept = engine_mod.serve_bob_tcp(host, port)
    print(f"bob listening on {host}:{listener.getsockname()[1]}", flush=True)
    channel = accept()
    clock = VirtualClock() if args.clock == "virtual" else RealClock()
    config = bobproto.SimulatorConfig(fps=args.fps, frame_source=source)
    battery = bobproto.BatteryModel(capacity_mah=args.capacity_mah)
    sim = bobproto.BobSimulator(config, battery, channel, clock)
    trace = sim.run(duration_s=args.duration)
    print(f"session over: {len(trace)} events, "
          f"{battery.consumed_mah:.2f} mAh consumed")
    channel.close()
    listener.close()
    return 0


def cmd_engine_run(args) -> int:
    if (code := _require(args, "bob", "regs", "log")) is not None:
        return code
    try:
        regs = regulations.load_regulations(args.regs)
    except (OSError, ValueError) as e:
        return _fail(str(e))
    if args.detector.startswith("sidecar:"):
        try:
            detector = SidecarDetector.load(args.detector.split(":", 1)[1])
        except (OSError, ValueError) as e:
            return _fail(f"bad sidecar file: {e}")
    elif args.detector == "blob":
        detector = BlobDetector(species=args.blob_species)
    else:
        return _fail(f"unknown detector {args.detector!r} (use blob or sidecar:FILE)")
    if args.scene:
        try:
            provider = engine_mod.SceneDepthProvider(SceneSpec.load(args.scene))
        except (OSError, ValueError) as e:
            return _fail(f"bad scene file: {e}")
    else:
        provider = engine_mod.ConstantDepthProvider(args.depth_m)

    host, port = _host_port(args.bob)
    try:
        channel = engine_mod.connect_tcp(host, port)
    except OSError as e:
        return _fail(f"cannot reach bob at {host}:{port}: {e}")
    config = engine_mod.EngineConfig(
        auto_release=args.auto_release == "on",
        camera=engine_mod.CameraIntrinsics(args.focal, (args.cx, args.cy)),
    )
    ui_listen = _host_port(args.ui_listen) if args.ui_listen else None
    eng = engine_mod.SessionEngine(channel, regs, detector, provider,
                                   args.log, config, ui_listen)
    if eng.ui is not None:
        print(f"ui bridge on ws://{ui_listen[0]}:{eng.ui.port}", flush=True)
    try:
        eng.run(duration_s=args.duration)
    finally:
        eng.close()
    print(f"engine done: log -> {args.log}")
    return 0


def cmd_replay(args) -> int:
    if (code := _require(args, "trace", "log")) is not None:
        return code
    try:
        state, records, effects = replay_mod.replay(args.trace, args.log)
    except (OSError, replay_mod.TraceFormatError) as e:
        return _fail(str(e))
    print(f"replayed {args.trace}: {len(records)} records -> {args.log}")
    if args.report:
        paths = report.session_report(records, args.report)
        print(f"report -> {paths['csv']} and {paths['png']}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> tuple[argparse.ArgumentParser, list[argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="catchkit",
        description="simulated camera-bob fishing stack",
    )
    parser.add_argument("--config", help="JSON file of flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)
    leaves: list[argparse.ArgumentParser] = []

    def leaf(parent, name, func, **kw):
        p = parent.add_parser(name, **kw)
        p.set_defaults(func=func)
        leaves.append(p)
        return p

    p_augment = sub.add_parser("augment", help="image metrics and transforms")
    augment_sub = p_augment.add_subparsers(dest="subcommand", required=True)
    p = leaf(augment_sub, "run", cmd_augment_run, help="apply augmentations to a directory")
    p.add_argument("--in", dest="in_dir")
    p.add_argument("--out", dest="out_dir")
    p.add_argument("--fisheye", type=float, help="equidistant focal length in px")
    p.add_argument("--contrast", help="LO:HI random contrast factor range")
    p.add_argument("--noise", type=float, help="gaussian sigma in 8-bit levels")
    p.add_argument("--blur", help="LEN:ANGLE_DEG box motion blur")
    p.add_argument("--seed", type=int, default=0)

    p = leaf(augment_sub, "dedup", cmd_augment_dedup, help="drop near-duplicate images")
    p.add_argument("--in", dest="in_dir")
    p.add_argument("--patch", type=int, default=16)
    p.add_argument("--ssd-thresh", type=float, default=300.0)
    p.add_argument("--ssim-thresh", type=float, default=0.9)
    p.add_argument("--manifest")

    p_regs = sub.add_parser("regs", help="regulation checks")
    regs_sub = p_regs.add_subparsers(dest="subcommand", required=True)
    p = leaf(regs_sub, "check", cmd_regs_check, help="evaluate one catch")
    p.add_argument("--file")
    p.add_argument("--species")
    p.add_argument("--length-cm", type=float, default=None)
    p.add_argument("--date", help="YYYY-MM-DD")
    p.add_argument("--bag", type=int, default=0)

    p_ems = sub.add_parser("ems", help="lure electrical model")
    ems_sub = p_ems.add_subparsers(dest="subcommand", required=True)
    p = leaf(ems_sub, "calc", cmd_ems_calc, help="required voltage via Ohm's law")
    p.add_argument("--current", type=float, help="amperes")
    p.add_argument("--resistance", type=float, help="ohms")

    p = leaf(ems_sub, "tension", cmd_ems_tension, help="holding tension from calibration")
    p.add_argument("--current", type=float, help="amperes")
    p.add_argument("--mass-g", type=float)
    p.add_argument("--cal", help="JSON list of [current_a, mass_g, tension_n]")

    p = leaf(ems_sub, "waveform", cmd_ems_waveform, help="drive trace to CSV/PNG")
    p.add_argument("--duration", type=float, default=0.01, help="seconds")
    p.add_argument("--rate", type=float, default=100_000.0, help="samples/s")
    p.add_argument("--freq", type=float, default=1000.0)
    p.add_argument("--primary", type=float, default=5.0)
    p.add_argument("--ratio", type=float, default=98.4)
    p.add_argument("--csv")
    p.add_argument("--plot")

    p_bob = sub.add_parser("bob", help="device simulator")
    bob_sub = p_bob.add_subparsers(dest="subcommand", required=True)
    p = leaf(bob_sub, "simulate", cmd_bob_simulate, help="serve one engine connection")
    p.add_argument("--listen", default="127.0.0.1:0", help="HOST:PORT")
    p.add_argument("--frames", help="directory of PNG frames")
    p.add_argument("--scene", help="scene JSON for synthetic frames")
    p.add_argument("--size", default="320x240", help="synthetic frame WxH")
    p.add_argument("--fps", type=float, default=24.0)
    p.add_argument("--clock", choices=("virtual", "real"), default="real")
    p.add_argument("--capacity-mah", type=float, default=2600.0)
    p.add_argument("--duration", type=float, default=3600.0, help="seconds")

    p_engine = sub.add_parser("engine", help="session engine")
    engine_sub = p_engine.add_subparsers(dest="subcommand", required=True)
    p = leaf(engine_sub, "run", cmd_engine_run, help="connect to a bob and run the session")
    p.add_argument("--bob", help="HOST:PORT")
    p.add_argument("--regs")
    p.add_argument("--log")
    p.add_argument("--ui-listen", help="HOST:PORT for the WebSocket bridge")
    p.add_argument("--auto-release", choices=("on", "off"), default="off")
    p.add_argument("--detector", default="blob", help="blob or sidecar:FILE")
    p.add_argument("--blob-species", default="perch")
    p.add_argument("--scene", help="scene JSON for synthetic depth")
    p.add_argument("--depth-m", type=float, default=1.0)
    p.add_argument("--focal", type=float, default=800.0)
    p.add_argument("--cx", type=float, default=160.0)
    p.add_argument("--cy", type=float, default=120.0)
    p.add_argument("--duration", type=float, default=None, help="seconds (default: until bye)")

    p = leaf(sub, "replay", cmd_replay, help="re-run a recorded event trace")
    p.add_argument("--trace")
    p.add_argument("--log")
    p.add_argument("--report", help="directory for summary.csv + catches.png")

    return parser, leaves


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, leaves = build_parser()

    # --config supplies defaults; explicit flags still override
    config_path = None
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            config_path = argv[i + 1]
        elif token.startswith("--config="):
            config_path = token.split("=", 1)[1]
    if config_path:
        try:
            overrides = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            print(f"error: bad config file: {e}", file=sys.stderr)
            return 1
        if not isinstance(overrides, dict):
            print("error: config root must be an object", file=sys.stderr)
            return 1
        clean = {k.replace("-", "_"): v for k, v in overrides.items()
                 if k not in ("func", "command", "subcommand", "config")}
        for p in leaves:
            p.set_defaults(**clean)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
