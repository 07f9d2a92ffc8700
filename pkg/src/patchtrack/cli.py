"""Command-line entry point: ``patchtrack {track,eval,synth,sweep,rerun}``.

Exit codes: 0 ok, 2 input parse error, 3 invalid configuration, 4 gt/result
frame ranges do not match.

Every command writes a JSON manifest holding the full configuration and the
input/output paths; ``patchtrack rerun MANIFEST`` replays it.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Optional, Sequence

from . import __version__
from .metrics import EmptyGroundTruth, evaluate_many, report_json
from .mot_io import Mode, ParseError, SequenceData, parse_mot_file, read_mot_file, write_results, write_sequence
from .synth import ScenarioConfig, crossing_fixture, generate
from .tracker import ConfigError, TrackerConfig, run_tracker

log = logging.getLogger("patchtrack")

EXIT_OK, EXIT_PARSE, EXIT_CONFIG, EXIT_MISMATCH = 0, 2, 3, 4

SWEEP_HEADER = ["cost", "patch_iou", "patching", "hota", "deta", "assa", "mota", "idf1"]

# flag name -> TrackerConfig field
TRACKER_FLAGS = {
    "tau_high": float,
    "tau_low": float,
    "match_gate": float,
    "cost": str,
    "patch_iou": str,
    "patch_min": float,
    "tau_trust": float,
    "pseudo_ttl": int,
    "min_hits": int,
    "max_age": int,
}
_FIELD = {"cost": "cost_kind", "patch_iou": "patch_iou_kind"}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _add_tracker_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file with tracker settings; flags override it")
    for name, typ in TRACKER_FLAGS.items():
        kw: dict[str, Any] = {"type": typ, "default": None}
        if name == "cost":
            kw["choices"] = ["area", "height"]
        if name == "patch_iou":
            kw["choices"] = ["iou", "giou", "diou", "ciou"]
        p.add_argument("--" + name.replace("_", "-"), **kw)
    p.add_argument("--seed", type=int, default=0, help="recorded in the manifest; tracking is deterministic")


def tracker_config_from_args(args: argparse.Namespace) -> TrackerConfig:
    data: dict[str, Any] = {}
    if getattr(args, "config", None):
        try:
            data.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {args.config}: {exc}", EXIT_CONFIG) from None
        if not isinstance(data, dict):
            raise CliError("tracker config must be a JSON object", EXIT_CONFIG)
    for name in TRACKER_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            data[_FIELD.get(name, name)] = value
    try:
        return TrackerConfig.from_dict(data)
    except (ConfigError, ValueError) as exc:
        raise CliError(f"invalid tracker config: {exc}", EXIT_CONFIG) from None


def _read(path: Path, mode: Mode) -> SequenceData:
    try:
        return read_mot_file(path, mode)
    except ParseError as exc:
        raise CliError(f"{path}: {exc}", EXIT_PARSE) from None
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_PARSE) from None


def _write_manifest(path: Path, command: str, config: dict, inputs: dict, outputs: dict, seed: Optional[int]) -> None:
    manifest = {
        "command": command,
        "config": config,
        "inputs": {k: str(Path(v).resolve()) for k, v in inputs.items()},
        "outputs": {k: str(Path(v).resolve()) for k, v in outputs.items()},
        "seed": seed,
        "version": __version__,
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def track_text(dets: SequenceData, cfg: TrackerConfig) -> str:
    return write_results(run_tracker(dets.frames, cfg))


def do_track(det_path: Path, out_path: Path, cfg: TrackerConfig, seed: int = 0) -> None:
    dets = _read(det_path, Mode.DET)
    text = track_text(dets, cfg)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(text, encoding="utf-8", newline="\n")
    _write_manifest(_manifest_path(out_path), "track", cfg.to_dict(), {"det": det_path}, {"result": out_path}, seed)
    log.info("tracked %d frames into %s", dets.frame_count, out_path)


def _check_range(gt: SequenceData, res: SequenceData) -> None:
    if res.frame_count > gt.frame_count:
        raise CliError(
            f"result covers frames up to {res.frame_count} but ground truth ends at {gt.frame_count}",
            EXIT_MISMATCH,
        )


def eval_json(gt: SequenceData, res: SequenceData, name: str) -> dict:
    _check_range(gt, res)
    try:
        return report_json(evaluate_many({name: (gt, res)}))
    except EmptyGroundTruth as exc:
        raise CliError(str(exc), EXIT_MISMATCH) from None


def do_eval(gt_path: Path, res_path: Path, out_path: Optional[Path] = None) -> dict:
    gt = _read(gt_path, Mode.GT)
    res = _read(res_path, Mode.GT)
    report = eval_json(gt, res, res_path.stem)
    text = json.dumps(report, indent=2) + "\n"
    sys.stdout.write(text)
    out_path = out_path or res_path.with_name(res_path.name + ".metrics.json")
    out_path.write_text(text, encoding="utf-8")
    _write_manifest(_manifest_path(out_path), "eval", {}, {"gt": gt_path, "result": res_path}, {"report": out_path}, None)
    return report


def do_synth(scenario: Optional[ScenarioConfig], out_dir: Path, fixture: bool = False) -> None:
    if fixture:
        gt, dets = crossing_fixture()
        config: dict = {"crossing_fixture": True}
        seed = None
    else:
        assert scenario is not None
        try:
            gt, dets = generate(scenario)
        except ValueError as exc:
            raise CliError(f"invalid scenario: {exc}", EXIT_CONFIG) from None
        config = scenario.to_dict()
        seed = scenario.seed
    out_dir.mkdir(parents=True, exist_ok=True)
    gt_file, det_file = out_dir / "gt.txt", out_dir / "det.txt"
    gt_file.write_text(write_sequence(gt), encoding="utf-8", newline="\n")
    det_file.write_text(write_sequence(dets), encoding="utf-8", newline="\n")
    _write_manifest(out_dir / "manifest.json", "synth", config, {}, {"gt": gt_file, "det": det_file}, seed)


def _sweep_row(job: tuple[SequenceData, SequenceData, dict]) -> list[str]:
    gt, dets, cfg_dict = job
    cfg = TrackerConfig.from_dict(cfg_dict)
    # round-trip through the file format so rows equal track + eval runs
    res = parse_mot_file(track_text(dets, cfg), Mode.GT)
    combined = eval_json(gt, res, "sweep")["COMBINED"]
    patching = "on" if cfg.patching_enabled else "off"
    return [cfg.cost_kind.value, cfg.patch_iou_kind.value, patching] + [
        f"{combined[k]:.2f}" for k in ("hota", "deta", "assa", "mota", "idf1")
    ]


def sweep_configs(base: TrackerConfig, costs: Sequence[str], patch_ious: Sequence[str],
                  patching: Sequence[str]) -> list[TrackerConfig]:
    configs = []
    for cost, kind, onoff in sorted(itertools.product(costs, patch_ious, patching)):
        d = base.to_dict()
        d["cost_kind"], d["patch_iou_kind"] = cost, kind
        if onoff == "off":
            d["patch_min"] = 2.0
        elif d["patch_min"] > 1.0:
            d["patch_min"] = TrackerConfig().patch_min
        try:
            configs.append(TrackerConfig.from_dict(d))
        except ConfigError as exc:
            raise CliError(f"invalid sweep cell: {exc}", EXIT_CONFIG) from None
    return configs


def do_sweep(gt_path: Path, det_path: Path, out_path: Optional[Path], configs: Sequence[TrackerConfig],
             jobs: int = 1, seed: int = 0) -> str:
    gt = _read(gt_path, Mode.GT)
    dets = _read(det_path, Mode.DET)
    work = [(gt, dets, c.to_dict()) for c in configs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_row, work))
    else:
        rows = [_sweep_row(w) for w in work]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    writer.writerows(rows)
    text = buf.getvalue()
    if out_path is None:
        sys.stdout.write(text)
    else:
        out_path.write_text(text, encoding="utf-8", newline="\n")
        _write_manifest(
            _manifest_path(out_path), "sweep", {"grid": [c.to_dict() for c in configs]},
            {"gt": gt_path, "det": det_path}, {"csv": out_path}, seed,
        )
    return text


def do_rerun(manifest_path: Path, out_dir: Optional[Path] = None) -> None:
    try:
        m = json.loads(manifest_path.read_text(encoding="utf-8"))
        command = m["command"]
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise CliError(f"unreadable manifest {manifest_path}: {exc}", EXIT_CONFIG) from None

    def out(key: str) -> Path:
        p = Path(m["outputs"][key])
        return out_dir / p.name if out_dir else p

    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    try:
        if command == "track":
            do_track(Path(m["inputs"]["det"]), out("result"), TrackerConfig.from_dict(m["config"]), m.get("seed") or 0)
        elif command == "eval":
            do_eval(Path(m["inputs"]["gt"]), Path(m["inputs"]["result"]), out("report"))
        elif command == "synth":
            target = out("gt").parent
            if m["config"].get("crossing_fixture"):
                do_synth(None, target, fixture=True)
            else:
                do_synth(ScenarioConfig.from_dict(m["config"]), target)
        elif command == "sweep":
            configs = [TrackerConfig.from_dict(c) for c in m["config"]["grid"]]
            do_sweep(Path(m["inputs"]["gt"]), Path(m["inputs"]["det"]), out("csv"), configs, seed=m.get("seed") or 0)
        else:
            raise CliError(f"unknown command in manifest: {command}", EXIT_CONFIG)
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, CliError):
            raise
        raise CliError(f"invalid manifest config: {exc}", EXIT_CONFIG) from None


def _split(s: str) -> list[str]:
    return [t.strip().lower() for t in s.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="patchtrack", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="track a MOT detection file")
    p.add_argument("det", type=Path)
    p.add_argument("-o", "--out", type=Path, required=True)
    _add_tracker_flags(p)

    p = sub.add_parser("eval", help="score a result file against ground truth")
    p.add_argument("gt", type=Path)
    p.add_argument("res", type=Path)
    p.add_argument("-o", "--out", type=Path, help="report path (default: RES.metrics.json)")

    p = sub.add_parser("synth", help="generate a synthetic scenario")
    p.add_argument("scenario", type=Path, nargs="?", help="ScenarioConfig JSON")
    p.add_argument("-o", "--out-dir", type=Path, required=True)
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--crossing-fixture", action="store_true", help="write the fixed two-target crossing fixture")

    p = sub.add_parser("sweep", help="ablation grid over cost / patch score / patching")
    p.add_argument("gt", type=Path)
    p.add_argument("det", type=Path)
    p.add_argument("-o", "--out", type=Path, help="CSV path (default: stdout)")
    p.add_argument("--costs", default="area,height")
    p.add_argument("--patch-ious", default="ciou")
    p.add_argument("--patching", default="on,off")
    p.add_argument("--jobs", type=int, default=1)
    _add_tracker_flags(p)

    p = sub.add_parser("rerun", help="replay a run from its manifest")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out-dir", type=Path, help="write outputs here instead of the recorded paths")
    return parser


def _run(args: argparse.Namespace) -> None:
    if args.command == "track":
        do_track(args.det, args.out, tracker_config_from_args(args), args.seed)
    elif args.command == "eval":
        do_eval(args.gt, args.res, args.out)
    elif args.command == "synth":
        if args.crossing_fixture:
            do_synth(None, args.out_dir, fixture=True)
            return
        if args.scenario is None:
            raise CliError("synth needs a scenario JSON or --crossing-fixture", EXIT_CONFIG)
        try:
            data = json.loads(args.scenario.read_text(encoding="utf-8"))
            if args.seed is not None:
                data["seed"] = args.seed
            scenario = ScenarioConfig.from_dict(data)
        except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
            raise CliError(f"invalid scenario config: {exc}", EXIT_CONFIG) from None
        do_synth(scenario, args.out_dir)
    elif args.command == "sweep":
        base = tracker_config_from_args(args)
        costs, kinds, patching = _split(args.costs), _split(args.patch_ious), _split(args.patching)
        bad = (set(costs) - {"area", "height"}) | (set(kinds) - {"iou", "giou", "diou", "ciou"}) | (set(patching) - {"on", "off"})
        if bad or not (costs and kinds and patching):
            raise CliError(f"invalid sweep grid values: {sorted(bad) or 'empty grid'}", EXIT_CONFIG)
        do_sweep(args.gt, args.det, args.out, sweep_configs(base, costs, kinds, patching), args.jobs, args.seed)
    elif args.command == "rerun":
        do_rerun(args.manifest, args.out_dir)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        _run(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
