"""h-sweeps over a scene: records, rate fits, CSV and image artifacts."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .agmon import curve_agmon_distance, solve_agmon
from .eigensolve import assemble, eigenpairs_near
from .errors import ConfigError, DegenerateCluster, ForbidLabError
from .fitting import RateFit, fit_rate
from .geometry import Region, Scene, TorusDomain, forbidden_mask, scene_from_dict, TWO_BUMP
from .nodal import (count_sign_changes, extract_nodal_set, log_restriction_norm, region_weights,
                    restrict_to_curve, restriction_norms)
from .render import render_field
from .trace import build_trace, count_strip_zeros, strip_log_max

log = logging.getLogger(__name__)

EXIT_OK, EXIT_ACCEPT, EXIT_CONFIG = 0, 1, 2


@dataclass
class SweepRecord:
    h: float
    n: int
    E_h: float
    drift: float
    residual: float
    norm_H: float
    log_norm_H: float
    dn_norm_H: float
    norm_MH: float
    nodal_count: int
    uncertain: bool
    strip_zeros: int | None
    tau: float
    log_max: float | None
    d_E: float
    timings: dict = field(default_factory=dict, compare=False)

    CSV_FIELDS = ("h", "n", "E_h", "drift", "residual", "norm_H", "log_norm_H", "dn_norm_H", "norm_MH",
                  "nodal_count", "uncertain", "strip_zeros", "tau", "log_max", "d_E")


@dataclass
class Stage:
    name: str
    ok: bool
    acceptance: bool = False
    error: str | None = None
    detail: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    kind: str = "torus"
    scene: dict = field(default_factory=lambda: dict(TWO_BUMP))
    h: list = field(default_factory=list)
    n: int | None = None
    curve: str = "H"
    region: dict | None = None
    tau: float | str = "auto"
    images: bool = True
    revolution: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict, base: Path | None = None) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        cfg = cls(**d)
        if isinstance(cfg.scene, str):
            if cfg.scene == "two_bump":
                cfg.scene = dict(TWO_BUMP)
            else:
                p = Path(cfg.scene) if base is None else base / cfg.scene
                try:
                    cfg.scene = json.loads(p.read_text())
                except (OSError, json.JSONDecodeError) as exc:
                    raise ConfigError(f"cannot read scene {p}: {exc}") from exc
        if cfg.kind not in ("torus", "revolution"):
            raise ConfigError(f"unknown experiment kind {cfg.kind!r}")
        try:
            cfg.h = [float(v) for v in cfg.h]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad h list: {exc}") from exc
        if any(v <= 0 for v in cfg.h) or len(set(cfg.h)) != len(cfg.h):
            raise ConfigError("h values must be positive and unique")
        if not (cfg.tau == "auto" or isinstance(cfg.tau, (int, float))):
            raise ConfigError("tau must be 'auto' or a number")
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(d, path.parent)


def default_n(h: float) -> int:
    return 256 if h >= 0.04 else 384


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def records_csv(records, columns=None) -> str:
    columns = columns or SweepRecord.CSV_FIELDS
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in records:
        d = asdict(r) if not isinstance(r, dict) else r
        w.writerow([_fmt(d[c]) for c in columns])
    return buf.getvalue()


def scene_region(scene: Scene, curve_name: str, spec: dict | None):
    if spec is not None:
        from .geometry import region_from_spec
        return region_from_spec(spec, scene.domain.L)
    return Region.inside(scene.curve(curve_name), scene.domain.L)


def scene_d_E(scene: Scene, curve_name: str = "H", n: int | None = None) -> float:
    dom = scene.domain if n is None else TorusDomain(scene.domain.L, n)
    data = forbidden_mask(scene.potential, scene.energy, dom)
    field_ = solve_agmon(data, scene.potential, dom)
    return curve_agmon_distance(field_, scene.curve(curve_name))


def sweep_record(scene: Scene, h: float, n: int, curve_name="H", region=None, tau="auto", d_E=float("nan")):
    """Eigensolve at one h and measure everything on the curve."""
    t0 = time.perf_counter()
    dom = TorusDomain(scene.domain.L, n)
    op = assemble(dom, scene.potential, h, scene.energy)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateCluster)
        pair = eigenpairs_near(op, scene.energy, 1)[0]
    t1 = time.perf_counter()
    curve = scene.curve(curve_name)
    s = restrict_to_curve(pair, curve)
    a, b = restriction_norms(s)
    region = region if region is not None else Region.inside(curve, dom.L)
    w = region_weights(dom, region)
    mass = math.sqrt(float(np.sum(w * pair.phi ** 2)) * dom.cell_area)
    cnt = count_sign_changes(s)
    t2 = time.perf_counter()
    zeros = log_max = None
    used_tau = float("nan")
    try:
        tr = build_trace(s)
        used_tau = 0.5 * tr.tau_adm if tau == "auto" else float(tau)
        zeros = count_strip_zeros(tr, used_tau)
        log_max = strip_log_max(tr, used_tau)
    except ForbidLabError as exc:
        log.warning("h=%.4f trace stage failed: %s", h, exc)
    t3 = time.perf_counter()
    rec = SweepRecord(h, n, pair.E_h, pair.drift, pair.residual, a, log_restriction_norm(s), b, mass,
                      cnt.count, cnt.uncertain, zeros, used_tau, log_max, d_E,
                      {"eigensolve": t1 - t0, "curve": t2 - t1, "trace": t3 - t2})
    return rec, pair


def fit_records(records, quantity: str = "norm_H", prefactor_power: float = 0.0) -> RateFit:
    """Rate fit of a record column; ``norm_H`` uses the log-scale accumulator."""
    hs = [r.h for r in records]
    if quantity == "norm_H":
        return fit_rate(hs, log_q=[r.log_norm_H for r in records], prefactor_power=prefactor_power)
    vals = [getattr(r, quantity) for r in records]
    return fit_rate(hs, q=vals, prefactor_power=prefactor_power)


def _sweep_task(args):
    try:
        return sweep_record(*args)
    except ForbidLabError as exc:
        return f"{type(exc).__name__}: {exc}"


def _run_torus(cfg: ExperimentConfig, out: Path, stages: list, jobs: int = 1):
    scene = scene_from_dict(cfg.scene)
    records = []
    if not cfg.h:
        return records
    region = scene_region(scene, cfg.curve, cfg.region)
    try:
        d_E = scene_d_E(scene, cfg.curve)
        stages.append(Stage("agmon", True, detail={"d_E": d_E}))
    except ForbidLabError as exc:
        d_E = float("nan")
        stages.append(Stage("agmon", False, True, f"{type(exc).__name__}: {exc}"))
    hs = sorted(cfg.h, reverse=True)
    tasks = [(scene, h, cfg.n or default_n(h), cfg.curve, region, cfg.tau, d_E) for h in hs]
    if jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sweep_task, tasks))
    else:
        results = [_sweep_task(t) for t in tasks]
    for h, res in zip(hs, results):
        name = f"h={h:g}"
        if isinstance(res, str):
            stages.append(Stage(f"eigensolve {name}", False, True, res))
            continue
        rec, pair = res
        records.append(rec)
        stages.append(Stage(f"eigensolve {name}", rec.residual <= 1e-8, True, detail={"residual": rec.residual}))
        stages.append(Stage(f"positive trace {name}", rec.norm_H > 0, True))
        ok = rec.strip_zeros is not None and rec.nodal_count <= rec.strip_zeros
        stages.append(Stage(f"count dominance {name}", ok, True,
                            detail={"real": rec.nodal_count, "strip": rec.strip_zeros}))
        if cfg.images:
            tag = f"{h:.4f}".replace(".", "p")
            render_field(pair.phi, out / f"field_h{tag}.ppm")
            render_field(pair.phi, out / f"field_h{tag}.svg", pair.domain, extract_nodal_set(pair))
    if len(records) >= 3:
        fit = fit_records(records)
        stages.append(Stage("rate fit", math.isfinite(fit.beta), False, detail=asdict(fit)))
    return records


def _run_revolution(cfg: ExperimentConfig, out: Path, stages: list):
    from .revolution import profile_from_spec, revolution_sweep

    rc = dict(cfg.revolution)
    prof = profile_from_spec(rc.get("profile", "cos"), float(rc.get("delta", 0.05)), float(rc.get("amp", 0.6)))
    ms = [int(m) for m in rc.get("m", [10, 20, 40])]
    rows = revolution_sweep(prof, rc.get("V", "gauss:10,0,40"), float(rc.get("E0", 5.0)), ms,
                            float(rc.get("r0", 0.1)), str(rc.get("convention", "1")), float(rc.get("tau", 0.2)))
    for row in rows:
        stages.append(Stage(f"latitude count m={row.m}", row.count == 2 * row.m, True,
                            detail={"count": row.count}))
        stages.append(Stage(f"strip count m={row.m}", row.strip_count == 2 * row.m, True,
                            detail={"count": row.strip_count}))
    return rows


REVOLUTION_FIELDS = ("m", "h", "E_h", "r0", "count", "strip_count", "decay_rate", "agmon")


def run_experiment(config, out_dir, jobs: int = 1) -> tuple[list, list[Stage], int]:
    """Run a sweep and write ``sweep.csv``, images, ``report.json`` and ``timings.json``.

    Returns (records, stages, exit code).  Configuration errors give exit
    code 2 without running anything.  ``jobs > 1`` runs the per-h solves in
    worker processes; rows are still written in decreasing-h order.
    """
    out = Path(out_dir)
    try:
        cfg = config if isinstance(config, ExperimentConfig) else (
            ExperimentConfig.from_dict(config) if isinstance(config, dict) else ExperimentConfig.load(config))
        if cfg.kind == "torus":
            scene_from_dict(cfg.scene)
    except ConfigError as exc:
        return [], [Stage("config", False, True, str(exc))], EXIT_CONFIG
    out.mkdir(parents=True, exist_ok=True)
    stages: list[Stage] = []
    if cfg.kind == "torus":
        records = _run_torus(cfg, out, stages, jobs)
        (out / "sweep.csv").write_text(records_csv(records))
        timings = {repr(r.h): r.timings for r in records}
    else:
        records = _run_revolution(cfg, out, stages)
        (out / "revolution.csv").write_text(records_csv(records, REVOLUTION_FIELDS))
        timings = {}
    report = {"stages": [asdict(s) for s in stages],
              "failed": [s.name for s in stages if s.acceptance and not s.ok]}
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True, default=float) + "\n")
    (out / "timings.json").write_text(json.dumps(timings, indent=2, sort_keys=True) + "\n")
    code = EXIT_ACCEPT if report["failed"] else EXIT_OK
    return records, stages, code
