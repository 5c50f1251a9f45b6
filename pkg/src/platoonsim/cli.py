"""``platoonsim`` command line: run, sweep, baseline, snapshot, plot.

Exit codes: 0 success (``run``: every robot arrived), 1 error of any kind,
2 ``run`` timed out.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import enum
import hashlib
import io
import json
import os
import re
import sys
from pathlib import Path

from . import __version__, svg
from .control import RobotParams
from .crowd import CrowdParams, Scenario
from .engine import SimParams, TrialConfig, run_trial
from .experiments import (AggregateRow, BaselineRow, SweepSpec, TrialRecord, crowd_baseline,
                          group_records, run_trials)

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

EXIT_OK, EXIT_ERROR, EXIT_TIMEOUT = 0, 1, 2
OUT_ENV = "PLATOONSIM_OUT"

PARAM_SECTIONS = {"robot": RobotParams, "crowd": CrowdParams, "sim": SimParams}
TRIAL_KEYS = ("scenario", "strategy", "density", "n_robots", "formation", "seed",
              "spacing", "spacing_is_gap", "start_gap", "allow_any_formation")
SWEEP_KEYS = ("scenario", "strategies", "densities", "n_robots", "formations", "seeds",
              "allow_any_formation")


class ConfigError(Exception):
    def __init__(self, path, line, message):
        self.path, self.line, self.message = path, line, message
        where = f"{path}:{line}" if line else str(path)
        super().__init__(f"{where}: {message}")


# --- config documents ----------------------------------------------------

class ConfigDoc:
    """A parsed TOML config with line lookup for diagnostics."""

    _header = re.compile(r"^\s*\[\s*([A-Za-z0-9_.\-]+)\s*\]")
    _key = re.compile(r"^\s*([A-Za-z0-9_\-]+)\s*=")

    def __init__(self, path):
        self.path = Path(path)
        try:
            self.text = self.path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(path, None, f"cannot read config: {exc.strerror or exc}") from None
        try:
            self.data = tomllib.loads(self.text)
        except tomllib.TOMLDecodeError as exc:
            m = re.search(r"line (\d+)", str(exc))
            raise ConfigError(path, int(m.group(1)) if m else None, f"invalid TOML: {exc}") from None

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()

    def line_of(self, section: str, key: str | None = None) -> int | None:
        current = None
        for n, line in enumerate(self.text.splitlines(), 1):
            m = self._header.match(line)
            if m:
                current = m.group(1)
                if key is None and current == section:
                    return n
                continue
            m = self._key.match(line)
            if m and current == section and m.group(1) == key:
                return n
        return None

    def error(self, section, key, message) -> ConfigError:
        line = self.line_of(section, key) or self.line_of(section)
        field = f"{section}.{key}" if key else f"[{section}]"
        return ConfigError(self.path, line, f"{field}: {message}")

    def check_sections(self, allowed) -> None:
        for name, value in self.data.items():
            if name not in allowed:
                raise self.error(name, None, f"unknown section (expected one of {', '.join(allowed)})")
            if not isinstance(value, dict):
                raise ConfigError(self.path, self.line_of_top(name), f"{name}: expected a [{name}] table")

    def line_of_top(self, key):
        for n, line in enumerate(self.text.splitlines(), 1):
            if self._header.match(line):
                return None
            m = self._key.match(line)
            if m and m.group(1) == key:
                return n
        return None

    def section(self, name) -> dict:
        return self.data.get(name, {})


def _coerce(doc: ConfigDoc, section: str, key: str, value, like):
    """Check ``value`` against the type of the default ``like``."""
    if isinstance(like, enum.Enum):
        choices = [m.value for m in type(like)]
        if value not in choices:
            raise doc.error(section, key, f"expected one of {', '.join(choices)}, got {value!r}")
        return value
    if isinstance(like, bool):
        ok = isinstance(value, bool)
    elif isinstance(like, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(like, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(like, str):
        ok = isinstance(value, str)
    else:
        ok = True
    if not ok:
        raise doc.error(section, key, f"expected {type(like).__name__}, got {value!r}")
    return value


def _build(doc: ConfigDoc, section: str, cls, allowed=None, extra=None):
    values = dict(doc.section(section))
    defaults = {f.name: f.default for f in dataclasses.fields(cls)
                if f.default is not dataclasses.MISSING}
    allowed = allowed or tuple(defaults)
    kw = {}
    for key, value in values.items():
        if key not in allowed:
            raise doc.error(section, key, f"unknown field (known: {', '.join(allowed)})")
        kw[key] = _coerce(doc, section, key, value, defaults.get(key))
    try:
        return cls(**kw, **(extra or {}))
    except (TypeError, ValueError) as exc:
        key = next((k for k in values if k in str(exc)), None)
        raise doc.error(section, key, str(exc)) from None


def _params(doc: ConfigDoc) -> dict:
    return {name: _build(doc, name, cls) for name, cls in PARAM_SECTIONS.items()}


def load_trial_config(path, seed: int | None = None) -> tuple[TrialConfig, ConfigDoc]:
    doc = ConfigDoc(path)
    doc.check_sections(("trial", *PARAM_SECTIONS))
    extra = _params(doc)
    if seed is not None:
        doc.data.setdefault("trial", {})["seed"] = seed
    return _build(doc, "trial", TrialConfig, TRIAL_KEYS, extra), doc


def _seed_list(doc, value) -> list[int]:
    if isinstance(value, int) and not isinstance(value, bool):
        if value < 1:
            raise doc.error("sweep", "seeds", "seed count must be positive")
        return list(range(value))
    if isinstance(value, list) and all(isinstance(s, int) and not isinstance(s, bool) for s in value):
        return value
    raise doc.error("sweep", "seeds", "expected a list of integers or a seed count")


def load_sweep_spec(path) -> tuple[SweepSpec, ConfigDoc]:
    doc = ConfigDoc(path)
    doc.check_sections(("sweep", *PARAM_SECTIONS))
    sw = dict(doc.section("sweep"))
    if not sw:
        raise ConfigError(doc.path, None, "missing [sweep] section")
    for key in sw:
        if key not in SWEEP_KEYS:
            raise doc.error("sweep", key, f"unknown field (known: {', '.join(SWEEP_KEYS)})")
    if "scenario" not in sw:
        raise doc.error("sweep", None, "scenario is required")
    for key in ("strategies", "densities"):
        if key not in sw:
            raise doc.error("sweep", None, f"{key} is required")
    for key in ("strategies", "densities", "n_robots", "formations"):
        if key in sw and not isinstance(sw[key], list):
            raise doc.error("sweep", key, "expected a list")
    if "densities" in sw:
        for v in sw["densities"]:
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise doc.error("sweep", "densities", f"expected numbers, got {v!r}")
        sw["densities"] = [float(v) for v in sw["densities"]]
    if "seeds" in sw:
        sw["seeds"] = _seed_list(doc, sw["seeds"])
    try:
        spec = SweepSpec(**sw, **_params(doc))
    except (TypeError, ValueError) as exc:
        key = next((k for k in sw if k in str(exc)), None)
        raise doc.error("sweep", key, str(exc)) from None
    return spec, doc


def load_params(path) -> dict:
    """Only the [crowd] and [sim] sections (baseline runs)."""
    doc = ConfigDoc(path)
    doc.check_sections(("crowd", "sim", "robot", "trial", "sweep"))
    return {"crowd": _build(doc, "crowd", CrowdParams), "sim": _build(doc, "sim", SimParams)}


# --- serialization -------------------------------------------------------

def to_plain(obj):
    """Dataclasses and enums to JSON-ready values."""
    if dataclasses.is_dataclass(obj):
        return {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    return obj


def dumps(obj) -> str:
    # json writes floats with repr(), i.e. the shortest round-trip decimal.
    return json.dumps(obj, sort_keys=False, allow_nan=False, separators=(", ", ": "))


def csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: Path, columns, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([csv_cell(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")


def trace_header(config: TrialConfig) -> dict:
    env = config.env
    return {
        "config": to_plain(config),
        "dt": config.sim.dt,
        "robot_ids": list(range(1, config.n_robots + 1)),
        "robot_radius": config.robot.radius,
        "comfort_radius": config.crowd.comfort_radius,
        "width": env.width,
        "height": env.height,
        "goal_x_min": env.goal_x_min,
    }


def read_trace(path) -> tuple[dict, list[dict]]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty trace")
    header = json.loads(lines[0])
    if "robot_radius" not in header:
        raise ValueError(f"{path}: first line is not a trace header")
    return header, [json.loads(ln) for ln in lines[1:]]


# --- commands ------------------------------------------------------------

def _outdir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or "platoonsim-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    config, _ = load_trial_config(args.config, args.seed)
    out = _outdir(args)
    result = run_trial(config, trace=args.trace)
    record = TrialRecord(config, result=result.to_dict()).to_dict()
    (out / "result.json").write_text(dumps(record) + "\n", encoding="utf-8")
    if args.trace:
        with open(out / "trace.jsonl", "w", encoding="utf-8") as fh:
            fh.write(dumps(trace_header(config)) + "\n")
            for row in result.trace:
                fh.write(dumps(row) + "\n")
    status = "timeout" if result.timeout else f"time_to_goal {result.time_to_goal} s"
    print(f"{status}, {result.interceptions} interceptions -> {out / 'result.json'}")
    return EXIT_TIMEOUT if result.timeout else EXIT_OK


def cmd_sweep(args) -> int:
    spec, doc = load_sweep_spec(args.spec)
    out = _outdir(args)
    records = run_trials(spec.configs(), args.jobs)
    rows = group_records(records)
    with open(out / "trials.jsonl", "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps(rec.to_dict()) + "\n")
    write_csv(out / "aggregate.csv", AggregateRow.COLUMNS, [r.as_row() for r in rows])
    manifest = {
        "config_path": str(doc.path),
        "output_dir": str(out),
        "version": __version__,
        "config_sha256": doc.sha256,
        "seeds": list(spec.seeds),
        "config": doc.text,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    failed = sum(1 for r in records if r.error is not None)
    print(f"{len(records)} trials ({failed} failed), {len(rows)} configurations -> {out}")
    for rec in records:
        if rec.error is not None:
            print(f"  seed {rec.config.seed} {rec.key}: {rec.error}", file=sys.stderr)
    return EXIT_ERROR if failed == len(records) else EXIT_OK


def cmd_baseline(args) -> int:
    scenario = Scenario(args.scenario)
    if scenario is Scenario.PASSIVE:
        raise ValueError("the passive crowd has no flow direction; use counter_flow or perpendicular_flow")
    if not args.densities:
        raise ValueError("at least one density is required")
    if not args.seeds:
        raise ValueError("at least one seed is required")
    params = load_params(args.config) if args.config else {}
    out = _outdir(args)
    rows = crowd_baseline(scenario, args.densities, args.seeds, duration=args.duration,
                          jobs=args.jobs, **params)
    write_csv(out / "baseline.csv", BaselineRow.COLUMNS, [r.as_row() for r in rows])
    pts = [(r.density, r.median, r.q1, r.q3) for r in rows]
    (out / "baseline.svg").write_text(
        svg.line_plot({scenario.value: pts}, "crowd density", "mean flow velocity [m/s]",
                      title="Crowd flow without robots", zero_line=True), encoding="utf-8")
    for r in rows:
        print(f"rho={r.density:g} n={r.n_agents} median flow {r.median:.3f} m/s")
    return EXIT_OK


def snapshot_view(header: dict, rows: list[dict], region: str) -> tuple:
    w, h, gx = header["width"], header["height"], header["goal_x_min"]
    if region == "crowd":
        return (0.0, 0.0, gx, h)
    xs = [x for x, _ in rows[0]["robots"]]
    return (min(min(xs), 0.0) - 0.5, -0.5, w + 0.5, h + 0.5)


def cmd_snapshot(args) -> int:
    header, rows = read_trace(args.trace)
    if args.time is not None:
        k = int(round(args.time / header["dt"]))
    else:
        k = args.k
    if not 0 <= k < len(rows):
        raise ValueError(f"step {k} outside the trace (0..{len(rows) - 1})")
    row = rows[k]
    if row["k"] != k:
        raise ValueError(f"trace row {k} has k={row['k']}")
    text = svg.snapshot(row, header, snapshot_view(header, rows, args.region))
    target = Path(args.svg) if args.svg else _outdir(args) / f"snapshot_{k}.svg"
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8")
    print(f"-> {target}")
    return EXIT_OK


PLOT_METRICS = {
    "time": ("time_median", "time_q1", "time_q3", "time to goal [s]"),
    "interceptions": ("interceptions_median", "interceptions_q1", "interceptions_q3",
                      "comfort-zone interceptions"),
}


def cmd_plot(args) -> int:
    with open(args.aggregate, encoding="utf-8", newline="") as fh:
        table = list(csv.DictReader(fh))
    if not table:
        raise ValueError(f"{args.aggregate}: no rows")
    med, lo, hi, ylabel = PLOT_METRICS[args.metric]
    key_cols = [c for c in ("scenario", "strategy", "formation", "n_robots", "density") if c != args.x]
    varying = [c for c in key_cols if len({r[c] for r in table}) > 1]
    if "strategy" not in varying:
        varying.insert(0, "strategy")

    def num(s):
        return float(s) if s != "" else None

    series: dict[str, list] = {}
    for r in table:
        label = " ".join(r[c] if c in ("strategy", "scenario", "formation") else f"{c}={r[c]}"
                         for c in varying)
        series.setdefault(label, []).append((float(r[args.x]), num(r[med]), num(r[lo]), num(r[hi])))
    xlabel = "crowd density" if args.x == "density" else "number of robots"
    text = svg.line_plot(series, xlabel, ylabel, title=args.title or "")
    target = Path(args.svg) if args.svg else _outdir(args) / f"{args.metric}.svg"
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8")
    print(f"-> {target}")
    return EXIT_OK


# --- argument parsing ----------------------------------------------------

class _Parser(argparse.ArgumentParser):
    # Usage errors exit 1; 2 is reserved for a timed-out run.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def parse_seeds(tokens) -> list[int]:
    """``0 1 5`` or ranges ``0:10`` (end exclusive)."""
    seeds = []
    for tok in tokens:
        if ":" in tok:
            a, b = tok.split(":", 1)
            seeds.extend(range(int(a), int(b)))
        else:
            seeds.append(int(tok))
    return seeds


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="platoonsim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def out_flag(sp):
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./platoonsim-out)")

    sp = sub.add_parser("run", help="run one trial")
    sp.add_argument("config", help="TOML config with [trial], [robot], [crowd], [sim]")
    sp.add_argument("--seed", type=int, help="override trial.seed")
    sp.add_argument("--trace", action="store_true", help="also write trace.jsonl")
    out_flag(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="run a strategy x density sweep")
    sp.add_argument("spec", help="TOML file with a [sweep] section")
    sp.add_argument("--jobs", type=int, default=1)
    out_flag(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("baseline", help="crowd-only flow velocity versus density")
    sp.add_argument("scenario", choices=[s.value for s in Scenario])
    sp.add_argument("--densities", type=float, nargs="*", default=[0.1, 0.2, 0.3, 0.4, 0.5])
    sp.add_argument("--seeds", nargs="*", default=["0:10"], help="seeds or a:b ranges")
    sp.add_argument("--duration", type=float, default=300.0, help="simulated seconds")
    sp.add_argument("--config", help="TOML file; its [crowd] and [sim] sections are used")
    sp.add_argument("--jobs", type=int, default=1)
    out_flag(sp)
    sp.set_defaults(func=cmd_baseline)

    sp = sub.add_parser("snapshot", help="render one trace step as SVG")
    sp.add_argument("trace")
    when = sp.add_mutually_exclusive_group()
    when.add_argument("--k", type=int, default=0, help="step index")
    when.add_argument("--time", type=float, help="simulated time in seconds")
    sp.add_argument("--region", choices=["full", "crowd"], default="full",
                    help="'crowd' shows only the crowd region left of the goal")
    sp.add_argument("--svg", help="output file (default <out>/snapshot_<k>.svg)")
    out_flag(sp)
    sp.set_defaults(func=cmd_snapshot)

    sp = sub.add_parser("plot", help="plot aggregate.csv medians with quartile whiskers")
    sp.add_argument("aggregate")
    sp.add_argument("--metric", choices=sorted(PLOT_METRICS), default="time")
    sp.add_argument("--x", choices=["density", "n_robots"], default="density")
    sp.add_argument("--title")
    sp.add_argument("--svg", help="output file (default <out>/<metric>.svg)")
    out_flag(sp)
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("platoonsim: error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_ERROR
    try:
        if hasattr(args, "seeds"):
            args.seeds = parse_seeds(args.seeds)
        return args.func(args)
    except ConfigError as exc:
        print(f"platoonsim: config error: {exc}", file=sys.stderr)
    except (OSError, ValueError, KeyError) as exc:
        print(f"platoonsim: error: {exc}", file=sys.stderr)
    except Exception as exc:  # any simulation failure maps to exit 1
        print(f"platoonsim: error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
