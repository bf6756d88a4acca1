"""Experiment pipeline: load, preprocess, cluster, attack, report."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Sequence

from fairdegrade.attack import AttackOutcome, AttackStatus, run_attack
from fairdegrade.clustering import Pool, pam_kmedian
from fairdegrade.dataset import Metric, load_csv, minmax_scale, subsample
from fairdegrade.errors import ConfigError, DataError, FairDegradeError, StagnationError
from fairdegrade.fairness import balance

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DESK_SUBSAMPLE = 2000
BUILTIN_PREFIX = "builtin:"

EXIT_OK = 0
EXIT_BUDGET = 2
EXIT_DATA = 3
EXIT_CONFIG = 4
EXIT_STAGNATION = 5


def builtin_path(name: str) -> Path:
    """Path of a bundled fixture CSV (``four_points`` or ``segregated``)."""
    ref = resources.files("fairdegrade") / "data" / f"{name}.csv"
    if not ref.is_file():
        raise DataError(f"no bundled fixture named {name!r}")
    return Path(str(ref))


def resolve_data_path(data: str) -> Path:
    if data.startswith(BUILTIN_PREFIX):
        return builtin_path(data[len(BUILTIN_PREFIX):])
    return Path(data)


@dataclass(frozen=True)
class RunConfig:
    data: str
    features: tuple[str, ...]
    group: str
    k: int
    epsilon: int | None = None  # None: 10 * n after subsampling
    metric: str = Metric.EUCLIDEAN.value
    scale: bool = False
    subsample: int | None = None  # None: min(n, DESK_SUBSAMPLE) unless full
    full: bool = False
    seed: int = 0
    name: str | None = None
    batch_doubling: bool = False
    timing: bool = False
    delimiter: str = ","

    def validate(self) -> None:
        if self.k < 2:
            raise ConfigError(f"k must be at least 2, got {self.k}")
        if self.epsilon is not None and self.epsilon < 0:
            raise ConfigError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.subsample is not None and self.subsample < 1:
            raise ConfigError(f"subsample must be positive, got {self.subsample}")
        if not self.features:
            raise ConfigError("at least one feature column is required")
        try:
            Metric(self.metric)
        except ValueError:
            raise ConfigError(f"unknown metric {self.metric!r}") from None

    @property
    def dataset_name(self) -> str:
        if self.name:
            return self.name
        if self.data.startswith(BUILTIN_PREFIX):
            return self.data[len(BUILTIN_PREFIX):]
        return Path(self.data).stem

    @classmethod
    def from_mapping(cls, raw: dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        raw = dict(raw)
        feats = raw.get("features", ())
        if isinstance(feats, str):
            feats = [c.strip() for c in feats.split(",") if c.strip()]
        raw["features"] = tuple(feats)
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


@dataclass
class ReportRow:
    dataset: str
    k: int
    pre_balance: float | None = None
    post_balance: float | None = None
    percent_decrease: float | str = "-"
    cost_fraction: float | None = None
    status: str = "error"
    wall_time_s: float | None = None
    seed: int = 0
    error: str = ""


@dataclass
class ExperimentResult:
    config: RunConfig
    row: ReportRow
    outcome: AttackOutcome | None = None
    n: int = 0
    epsilon: int = 0
    subsample: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return {
            AttackStatus.SUCCESS.value: EXIT_OK,
            AttackStatus.ALREADY_MINIMAL.value: EXIT_OK,
            AttackStatus.BUDGET_EXHAUSTED.value: EXIT_BUDGET,
        }.get(self.row.status, self.extra.get("exit_code", EXIT_DATA))

    def to_json_dict(self) -> dict[str, Any]:
        cfg = asdict(self.config)
        cfg["features"] = list(self.config.features)
        cfg["epsilon"] = self.epsilon
        cfg["subsample"] = self.subsample
        out: dict[str, Any] = {"schema_version": SCHEMA_VERSION, "config": cfg}
        out.update(asdict(self.row))
        out["n"] = self.n
        if self.outcome is not None:
            out["cost"] = self.outcome.cost
            out["iterations"] = self.outcome.iterations
            out["initial_centers"] = self.outcome.initial_centers.to_lists()
            out["adv_centers"] = self.outcome.adv_centers.to_lists()
            out["per_center_counts"] = list(self.outcome.adversarial_set.per_center_counts)
        else:
            out["cost"] = None
            out["iterations"] = None
            out["initial_centers"] = []
            out["adv_centers"] = []
            out["per_center_counts"] = []
        return out


def percent_decrease(pre: float, post: float) -> float | str:
    if pre > 0:
        return 100.0 * (pre - post) / pre
    return "-"


def run_experiment(cfg: RunConfig) -> ExperimentResult:
    """Run the full protocol for one configuration; errors propagate."""
    cfg.validate()
    metric = Metric(cfg.metric)
    ds, pg = load_csv(resolve_data_path(cfg.data), cfg.features, cfg.group, cfg.delimiter)

    size = cfg.subsample
    if size is None and not cfg.full:
        size = min(ds.n, DESK_SUBSAMPLE)
    if size is not None:
        if size > ds.n:
            raise ConfigError(f"subsample {size} exceeds the {ds.n} usable rows")
        if size < ds.n:
            ds, pg = subsample(ds, pg, size, cfg.seed)
    if cfg.scale:
        ds = minmax_scale(ds)
    epsilon = 10 * ds.n if cfg.epsilon is None else cfg.epsilon

    started = time.perf_counter()
    pool = Pool(ds.points, metric)
    mu0 = pam_kmedian(pool, cfg.k, seed=cfg.seed)
    pre = balance(ds, pg, mu0, metric).value
    outcome = run_attack(
        ds, cfg.k, pg, epsilon, metric, cfg.seed,
        batch_doubling=cfg.batch_doubling, initial_centers=mu0,
    )
    elapsed = time.perf_counter() - started
    assert outcome.pre_balance == pre

    row = ReportRow(
        dataset=cfg.dataset_name,
        k=cfg.k,
        pre_balance=pre,
        post_balance=outcome.post_balance,
        percent_decrease=percent_decrease(pre, outcome.post_balance),
        cost_fraction=outcome.cost / ds.n,
        status=outcome.status.value,
        wall_time_s=round(elapsed, 3) if cfg.timing else None,
        seed=cfg.seed,
    )
    log.info("%s k=%d: %s, balance %.4f -> %.4f, |X'|=%d", row.dataset, cfg.k, row.status,
             pre, outcome.post_balance, outcome.cost)
    return ExperimentResult(cfg, row, outcome, n=ds.n, epsilon=epsilon, subsample=size)


def error_exit_code(exc: BaseException) -> int:
    if isinstance(exc, StagnationError):
        return EXIT_STAGNATION
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    return EXIT_DATA


def run_grid(cfgs: Sequence[RunConfig]) -> list[ExperimentResult]:
    """Run configurations in order; a failing row is recorded and the grid continues."""
    if not cfgs:
        raise ConfigError("grid needs at least one configuration")
    results = []
    for cfg in cfgs:
        try:
            results.append(run_experiment(cfg))
        except (FairDegradeError, OSError) as exc:
            log.warning("%s k=%d failed: %s", cfg.dataset_name, cfg.k, exc)
            row = ReportRow(dataset=cfg.dataset_name, k=cfg.k, seed=cfg.seed,
                            error=f"{type(exc).__name__}: {exc}")
            results.append(ExperimentResult(cfg, row, extra={"exit_code": error_exit_code(exc)}))
    return results


def expand_grid(grid_doc: dict[str, Any]) -> list[RunConfig]:
    """Expand ``{"defaults": {...}, "runs": [{..., "k": [2, 3, 4]}]}`` into configs."""
    if not isinstance(grid_doc, dict) or not isinstance(grid_doc.get("runs"), list):
        raise ConfigError("grid file must be an object with a 'runs' list")
    defaults = grid_doc.get("defaults", {})
    cfgs = []
    for run in grid_doc["runs"]:
        merged = {**defaults, **run}
        ks = merged.pop("k", None)
        if ks is None:
            raise ConfigError(f"run {run} has no k")
        for k in ks if isinstance(ks, list) else [ks]:
            cfgs.append(RunConfig.from_mapping({**merged, "k": int(k)}))
    return cfgs


# --- serialisation ----------------------------------------------------------

ROW_FIELDS = [f.name for f in fields(ReportRow)]


def _csv_cell(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: Iterable[ReportRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(ROW_FIELDS)
    for row in rows:
        d = asdict(row)
        writer.writerow([_csv_cell(d[name]) for name in ROW_FIELDS])
    return buf.getvalue()


def to_json(results: Sequence[ExperimentResult]) -> str:
    if len(results) == 1:
        payload: Any = results[0].to_json_dict()
    else:
        payload = {"schema_version": SCHEMA_VERSION, "runs": [r.to_json_dict() for r in results]}
    return json.dumps(payload, indent=2) + "\n"


def format_table(rows: Iterable[ReportRow]) -> str:
    """Human-readable summary with four decimals."""

    def num(v):
        return "-" if v is None or isinstance(v, str) else f"{v:.4f}"

    lines = [f"{'dataset':<14}{'k':>3}  {'pre':>8}{'post':>8}{'%dec':>10}{'|X|/n':>9}  status"]
    for r in rows:
        pct = r.percent_decrease if isinstance(r.percent_decrease, str) else f"{r.percent_decrease:.2f}"
        lines.append(
            f"{r.dataset:<14}{r.k:>3}  {num(r.pre_balance):>8}{num(r.post_balance):>8}"
            f"{pct:>10}{num(r.cost_fraction):>9}  {r.status}{'  ' + r.error if r.error else ''}"
        )
    return "\n".join(lines)
