"""Run configuration, repeated-trial suites, reports and comparison.

A report is a JSON document with three top-level keys:

``body``
    Everything that is a deterministic function of the configuration:
    config echo and hash, per-trial records, aggregates, tool version.
``body_sha256``
    SHA-256 of the canonical serialisation of ``body``.
``meta``
    Timestamp, worker count, kernel backend and wall-clock timings. Never
    hashed, never compared.

Trial ``i`` uses seed ``base_seed + i``. Aggregates are mean, sample
standard deviation (0 for a single value), min and max over the trials that
completed, skipping metrics that do not apply (``null``).
"""

from __future__ import annotations

import configparser
import csv
import datetime as _dt
import hashlib
import io
import json
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__, kernels
from .errors import ConfigError, IncompatibleTasks, ReportError
from .jigsaw import parse_code
from .pipeline import FUNCTIONS, PipelineConfig
from .sensing import dump_pgm
from .tasks import DEFAULT_CLEARANCE_MM, DEFAULT_CODES, DEFAULT_MAX_ACTIONS, TASK_KINDS, TaskSpec, run_task
from .world import HardwareProfile, apply_overrides, builtin_profile, load_profile

DEFAULT_REPEATS = 10
SEED_LIMIT = 2 ** 64

METRICS = ("score", "mean_iou", "ap", "success_rate", "grasp_time_s", "planned_duration_s",
           "area_rate", "completion", "stacking_flag", "actions_used")
RATIO_METRICS = ("score", "mean_iou", "ap", "success_rate", "area_rate", "completion")
TIME_METRICS = ("grasp_time_s", "planned_duration_s")
VISION_METRICS = ("mean_iou", "ap")

_SECTIONS = {
    "task": {"kind", "code", "clearance", "max_actions"},
    "profile": {"name", "file"},  # plus arm.* / camera.* / gripper.* overrides
    "pipeline": set(FUNCTIONS),  # plus param.* entries
    "harness": {"repeats", "base_seed", "output", "jobs"},
}


@dataclass(frozen=True)
class RunConfig:
    task: TaskSpec
    profile: HardwareProfile
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    repeats: int = DEFAULT_REPEATS
    base_seed: int = 0
    output_path: str | None = None
    jobs: int = 1
    profile_source: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.repeats < 1:
            raise ConfigError("repeats must be at least 1")
        if not (0 <= self.base_seed and self.base_seed + self.repeats <= SEED_LIMIT):
            raise ConfigError("base_seed must be a non-negative 64-bit integer")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        self.pipeline.validate(self.task.kind)

    def with_overrides(self, **kw) -> "RunConfig":
        values = {f: getattr(self, f) for f in ("task", "profile", "pipeline", "repeats", "base_seed",
                                                "output_path", "jobs", "profile_source")}
        values.update({k: v for k, v in kw.items() if v is not None})
        return RunConfig(**values)

    def echo(self) -> dict:
        """The configuration as recorded in reports (excludes output path and worker count)."""
        return {
            "task": self.task.to_dict(),
            "profile": self.profile.to_dict(),
            "profile_source": dict(self.profile_source),
            "pipeline": self.pipeline.to_dict(),
            "repeats": self.repeats,
            "base_seed": self.base_seed,
        }


def _int(section: str, key: str, raw: str) -> int:
    try:
        return int(raw.strip(), 0)
    except ValueError:
        raise ConfigError(f"[{section}] {key} must be an integer, got {raw!r}") from None


def _float(section: str, key: str, raw: str) -> float:
    try:
        return float(raw.strip())
    except ValueError:
        raise ConfigError(f"[{section}] {key} must be a number, got {raw!r}") from None


def _param(raw: str):
    raw = raw.strip()
    for conv in (int, float):
        try:
            return conv(raw)
        except ValueError:
            pass
    return raw


def parse_config(text: str, base_dir: str | Path = ".") -> RunConfig:
    """Parse the INI-style run configuration. Unknown sections or keys are errors."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    unknown = set(cp.sections()) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    sec = {s: dict(cp[s]) if cp.has_section(s) else {} for s in _SECTIONS}

    t = sec["task"]
    for key in t:
        if key not in _SECTIONS["task"]:
            raise ConfigError(f"unknown [task] key {key!r}")
    if "kind" not in t:
        raise ConfigError("[task] kind is required")
    kind = t["kind"].strip()
    if kind not in TASK_KINDS:
        raise ConfigError(f"unknown task kind {kind!r}; expected one of {TASK_KINDS}")
    try:
        code = parse_code(t.get("code", DEFAULT_CODES[kind]).strip())
    except ValueError as exc:
        raise ConfigError(f"[task] code: {exc}") from exc
    task = TaskSpec(kind, code,
                    _float("task", "clearance", t["clearance"]) if "clearance" in t else DEFAULT_CLEARANCE_MM,
                    _int("task", "max_actions", t["max_actions"]) if "max_actions" in t else DEFAULT_MAX_ACTIONS)

    p = sec["profile"]
    overrides = {}
    for key, raw in p.items():
        if key in _SECTIONS["profile"]:
            continue
        if key.split(".", 1)[0] not in ("arm", "camera", "gripper"):
            raise ConfigError(f"unknown [profile] key {key!r}")
        overrides[key] = raw
    if "name" in p and "file" in p:
        raise ConfigError("[profile] takes either name or file, not both")
    if "file" in p:
        path = Path(p["file"].strip())
        if not path.is_absolute():
            path = Path(base_dir) / path
        profile = load_profile(path)
        source = {"file": p["file"].strip()}
    else:
        name = p.get("name", "ideal").strip()
        profile = builtin_profile(name)
        source = {"name": name}
    if overrides:
        profile = apply_overrides(profile, overrides)
        source["overrides"] = dict(sorted(overrides.items()))

    pl = sec["pipeline"]
    stages, params = {}, {}
    for key, raw in pl.items():
        if key in _SECTIONS["pipeline"]:
            stages[key] = raw.strip() or None
        elif key.startswith("param.") and len(key) > 6:
            params[key[6:]] = _param(raw)
        else:
            raise ConfigError(f"unknown [pipeline] key {key!r}")
    pipeline = PipelineConfig(**stages, params=params)

    h = sec["harness"]
    for key in h:
        if key not in _SECTIONS["harness"]:
            raise ConfigError(f"unknown [harness] key {key!r}")
    return RunConfig(
        task=task,
        profile=profile,
        pipeline=pipeline,
        repeats=_int("harness", "repeats", h["repeats"]) if "repeats" in h else DEFAULT_REPEATS,
        base_seed=_int("harness", "base_seed", h["base_seed"]) if "base_seed" in h else 0,
        output_path=h.get("output", "").strip() or None,
        jobs=_int("harness", "jobs", h["jobs"]) if "jobs" in h else 1,
        profile_source=source,
    )


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, Path(path).parent)


# --------------------------------------------------------------------------
# running


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def sha256_of(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def _metric_values(record: dict) -> dict:
    r = record["result"]
    out = {m: r[m] for m in METRICS if m != "stacking_flag"}
    out["stacking_flag"] = 1.0 if r["stacking_flag"] else 0.0
    return out


def aggregate(records: list[dict]) -> dict:
    """Mean, sample std, min and max per metric over completed trials."""
    ok = [_metric_values(r) for r in records if r["status"] == "ok"]
    agg = {}
    for m in METRICS:
        vals = [float(v[m]) for v in ok if v[m] is not None]
        if not vals:
            agg[m] = None
            continue
        agg[m] = {
            "mean": statistics.fmean(vals),
            "std": statistics.stdev(vals) if len(vals) > 1 else 0.0,
            "min": min(vals),
            "max": max(vals),
            "n": len(vals),
        }
    return agg


def _run_one(config: RunConfig, index: int, dump_dir: Path | None):
    seed = config.base_seed + index
    hook = None
    if dump_dir is not None:
        def hook(rnd, obs):
            dump_pgm(obs, dump_dir / f"trial{index:03d}_round{rnd}.pgm")
    t0 = time.perf_counter()
    try:
        result, timings = run_task(config.task, config.profile, config.pipeline, seed, hook)
    except Exception as exc:  # recorded; remaining trials continue
        partial = getattr(exc, "partial", None)
        record = {"trial_index": index, "seed": seed, "status": "error",
                  "error": f"{type(exc).__name__}: {exc}", "partial": partial}
        return record, {"trial_index": index, "wall_s": time.perf_counter() - t0}
    record = {"trial_index": index, "seed": seed, "status": "ok", "result": result.to_dict()}
    wall = {"trial_index": index, "wall_s": time.perf_counter() - t0, **timings.as_dict()}
    return record, wall


def run_suite(config: RunConfig, jobs: int | None = None, dump_dir: str | Path | None = None) -> dict:
    """Run ``config.repeats`` trials and build the report document."""
    jobs = jobs or config.jobs
    dump = Path(dump_dir) if dump_dir is not None else None
    if dump is not None:
        dump.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    indices = range(config.repeats)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(lambda i: _run_one(config, i, dump), indices))
    else:
        outputs = [_run_one(config, i, dump) for i in indices]
    records = [rec for rec, _ in outputs]
    walls = [w for _, w in outputs]
    echo = config.echo()
    body = {
        "tool": {"name": "jigsawbench", "version": __version__},
        "config": echo,
        "config_hash": sha256_of(echo),
        "trials": records,
        "aggregates": aggregate(records),
        "failed_trials": sum(1 for r in records if r["status"] != "ok"),
    }
    return {
        "body": body,
        "body_sha256": sha256_of(body),
        "meta": {
            "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "jobs": jobs,
            "kernel_backend": kernels.BACKEND,
            "total_wall_s": time.perf_counter() - t0,
            "trial_wall_clock": walls,
        },
    }


def report_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial_index", "seed", "status", *METRICS])
    for rec in report["body"]["trials"]:
        if rec["status"] == "ok":
            vals = _metric_values(rec)
            w.writerow([rec["trial_index"], rec["seed"], "ok", *("" if vals[m] is None else vals[m] for m in METRICS)])
        else:
            w.writerow([rec["trial_index"], rec["seed"], "error", *([""] * len(METRICS))])
    return buf.getvalue()


def write_report(report: dict, path: str | Path) -> tuple[Path, Path]:
    """Write the JSON report and a CSV of per-trial metrics next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")
    csv_path = path.with_suffix(".csv")
    csv_path.write_text(report_csv(report), encoding="utf-8")
    return path, csv_path


def check_report(report: dict) -> None:
    """Raise ``ReportError`` unless hash and aggregates match the embedded records."""
    try:
        body = report["body"]
        if sha256_of(body) != report["body_sha256"]:
            raise ReportError("report body hash mismatch")
        if aggregate(body["trials"]) != body["aggregates"]:
            raise ReportError("stored aggregates differ from those recomputed from the trials")
        if sha256_of(body["config"]) != body["config_hash"]:
            raise ReportError("config hash mismatch")
    except (KeyError, TypeError) as exc:
        raise ReportError(f"malformed report: {exc!r}") from exc


def load_report(path: str | Path) -> dict:
    try:
        report = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ReportError(f"cannot read report {path}: {exc}") from exc
    check_report(report)
    return report


# --------------------------------------------------------------------------
# comparison


def report_label(report: dict) -> str:
    cfg = report["body"]["config"]
    return cfg["profile"]["name"]


def compare(reports: list[dict], threshold: float = 0.05, labels: list[str] | None = None) -> dict:
    """Per-metric comparison of each report against the first.

    Ratio metrics are flagged when their means differ by more than
    ``threshold`` in absolute terms (0.05 = 5 percentage points); time
    metrics when the relative difference exceeds ``threshold``.
    """
    if len(reports) < 2:
        raise ValueError("compare needs at least two reports")
    kinds = {r["body"]["config"]["task"]["kind"] for r in reports}
    if len(kinds) != 1:
        raise IncompatibleTasks(f"reports cover different task kinds: {sorted(kinds)}")
    labels = labels or [report_label(r) for r in reports]
    base = reports[0]["body"]["aggregates"]
    rows = []
    for m in RATIO_METRICS + TIME_METRICS:
        stats = [r["body"]["aggregates"].get(m) for r in reports]
        if any(s is None for s in stats):
            continue
        ref = base[m]["mean"]
        row = {"metric": m, "type": "ratio" if m in RATIO_METRICS else "time",
               "values": [{"mean": s["mean"], "std": s["std"]} for s in stats], "deltas": []}
        for s in stats[1:]:
            delta = s["mean"] - ref
            rel = delta / abs(ref) if ref != 0 else (0.0 if delta == 0 else float("inf"))
            measure = abs(delta) if m in RATIO_METRICS else abs(rel)
            row["deltas"].append({"delta": delta, "relative_pct": rel * 100.0,
                                  "flagged": bool(measure > threshold + 1e-12)})
        rows.append(row)
    return {"task": kinds.pop(), "labels": labels, "threshold": threshold, "rows": rows}


def format_comparison(cmp: dict) -> str:
    labels = cmp["labels"]
    head = ["metric"] + labels + [f"delta {lab}" for lab in labels[1:]]
    lines = [f"task: {cmp['task']}  threshold: {cmp['threshold']:g}", "\t".join(head)]
    for row in cmp["rows"]:
        cells = [row["metric"]] + [f"{v['mean']:.4f}±{v['std']:.4f}" for v in row["values"]]
        for d in row["deltas"]:
            cells.append(f"{d['delta']:+.4f} ({d['relative_pct']:+.1f}%){' FLAG' if d['flagged'] else ''}")
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"
