"""Command-line front end.

    geosep gen          phantom images, spectrum image, per-annulus energy CSV
    geosep separate     point/curve components, metrics JSON, panel figure
    geosep coherence    coherence reports, cluster CSVs and overlay figures
    geosep decay-study  separation plus coherence across scales, slope summary
    geosep oracle       exact tiny-instance sweeps of the recovery bound

Settings come from built-in defaults, then an optional JSON file (--config)
whose keys mirror the long flags, then the flags themselves.

Exit status: 0 clean, 1 output failure, 2 invalid configuration,
3 degraded (some subband solve did not converge), 4 bound violations.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import zlib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import report
from .coherence import DEFAULT_EPS, coherence_report
from .frames import frame_pair
from .grid import Field, GridError, GridSpec, annulus_energy, fft2
from .oracle import self_test, sweep_noise, sweep_recovery_bound
from .phantoms import (CurveConfig, Phantom, PhantomError, PointConfig, add_noise, circle_config, curve_from_csv,
                       curve_spectrum, default_points, match_energies, point_spectrum, segment_config,
                       segment_spectrum)
from .separator import SolverConfig, log2_slope, separate_full, separation_metrics
from .subband import decompose

log = logging.getLogger("geosep")

EXIT_CLEAN = 0
EXIT_OUTPUT = 1
EXIT_CONFIG = 2
EXIT_DEGRADED = 3
EXIT_VIOLATION = 4

CURVE_KINDS = ("circle", "segment", "none")
DECAY_COLUMNS = ("j", "r_j", "mu_c1", "mu_c2", "delta1_rel", "delta2_rel", "bound")
ENERGY_COLUMNS = ("j", "E_P", "E_C", "ratio")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    grid: int = 256
    scales: list[int] | None = None
    points: list[tuple[float, float]] | None = field(default_factory=lambda: list(default_points().points))
    curve: str = "circle"
    rho: float = 0.125
    noise: float = 0.0
    seed: int = 0
    epsilon: float = DEFAULT_EPS
    tol: float = 1e-7
    max_iter: int = 5000
    out: str = "geosep-out"
    # command-specific knobs
    samples: int = 16
    count: int = 200
    noisy_count: int = 100
    self_test: bool = False
    subband_images: bool = False

    def validate(self) -> GridSpec:
        """Check every setting against the module preconditions; return the grid."""
        try:
            grid = GridSpec(int(self.grid))
        except GridError as exc:
            raise ConfigError(str(exc)) from exc
        if self.scales is not None:
            if not self.scales:
                raise ConfigError("scale range is empty")
            bad = [j for j in self.scales if not grid.j_min <= j <= grid.j_max]
            if bad:
                raise ConfigError(f"scales {bad} outside [{grid.j_min}, {grid.j_max}] for N={grid.size}")
        if self.points is not None:
            try:
                PointConfig(tuple(tuple(p) for p in self.points))
            except (PhantomError, TypeError, ValueError) as exc:
                raise ConfigError(f"points: {exc}") from exc
        kind = self.curve
        if kind.startswith("csv:"):
            if not Path(kind[4:]).is_file():
                raise ConfigError(f"curve file {kind[4:]} not found")
        elif kind not in CURVE_KINDS:
            raise ConfigError(f"curve must be circle, segment, none or csv:PATH, got {kind!r}")
        if not 0.0 < self.rho < 0.25:
            raise ConfigError(f"rho must lie in (0, 1/4), got {self.rho}")
        if self.noise < 0:
            raise ConfigError("noise level must be non-negative")
        if not 0.0 < self.epsilon < 1.0 / 32.0:
            raise ConfigError(f"epsilon must lie in (0, 1/32), got {self.epsilon}")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.max_iter < 1:
            raise ConfigError("max-iter must be positive")
        if self.samples < 0 or self.count < 0 or self.noisy_count < 0:
            raise ConfigError("sample and instance counts must be non-negative")
        if self.points is None and kind == "none":
            raise ConfigError("nothing to synthesise: no points and no curve")
        return grid

    def scale_list(self, grid: GridSpec) -> list[int]:
        return list(self.scales) if self.scales is not None else list(grid.scales)

    def solver(self) -> SolverConfig:
        return SolverConfig(max_iterations=self.max_iter, relative_gap_tol=self.tol)


def substream(seed: int, name: str) -> int:
    """Independent integer seed for the named consumer of randomness."""
    return int(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]).generate_state(1)[0])


# --------------------------------------------------------------------------
# parsing


def parse_scales(text) -> list[int] | None:
    """'3:7' (inclusive), '3,4,5', '5', a list, or None / 'all'."""
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [int(j) for j in text]
    text = str(text).strip()
    if text in ("", "all"):
        return None
    try:
        if ":" in text:
            lo, hi = text.split(":", 1)
            return list(range(int(lo), int(hi) + 1))
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse scales {text!r}") from exc


def parse_points(text):
    """'x1,x2;x1,x2;...', a list of pairs, or 'none'."""
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [tuple(float(c) for c in p) for p in text]
    text = str(text).strip()
    if text.lower() in ("", "none"):
        return None
    try:
        return [tuple(float(c) for c in item.split(",")) for item in text.split(";") if item.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse points {text!r}") from exc


_PARSERS = {"scales": parse_scales, "points": parse_points}


def _normalise(key: str, value):
    key = key.replace("-", "_")
    if key in _PARSERS:
        return key, _PARSERS[key](value)
    return key, value


def load_config(path: str | Path | None, overrides: dict) -> RunConfig:
    """Defaults, then the JSON file, then explicit flag values."""
    cfg = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    layers = []
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        layers.append(doc)
    layers.append(overrides)
    for layer in layers:
        for raw_key, value in layer.items():
            if raw_key in ("schema_version", "config"):
                continue
            key, value = _normalise(raw_key, value)
            if key not in known:
                raise ConfigError(f"unknown setting {raw_key!r}")
            setattr(cfg, key, value)
    return cfg


# --------------------------------------------------------------------------
# scenes


@dataclass
class Scene:
    grid: GridSpec
    point: Phantom | None
    curve: Phantom | None
    point_cfg: PointConfig | None
    curve_cfg: CurveConfig | None
    clean: Phantom
    observed: Phantom
    factor: float


def _nodes(grid: GridSpec) -> int:
    return max(4096, 8 * 2**grid.j_max)


def build_scene(cfg: RunConfig, grid: GridSpec) -> Scene:
    """Point and curve phantoms, energy-matched, plus the noisy observation."""
    pcfg = PointConfig(tuple(tuple(p) for p in cfg.points)) if cfg.points is not None else None
    point = point_spectrum(pcfg, grid) if pcfg is not None else None
    ccfg: CurveConfig | None = None
    curve = None
    if cfg.curve == "circle":
        ccfg = circle_config(nodes=_nodes(grid))
        curve = curve_spectrum(ccfg, grid)
    elif cfg.curve == "segment":
        ccfg = segment_config(cfg.rho, center=(0.0, 0.0), nodes=_nodes(grid))
        curve = segment_spectrum(cfg.rho, grid)
    elif cfg.curve.startswith("csv:"):
        ccfg = curve_from_csv(cfg.curve[4:])
        curve = curve_spectrum(ccfg, grid)
    factor = 1.0
    if point is not None and curve is not None:
        point, curve, factor = match_energies(point, curve)
    parts = [p for p in (point, curve) if p is not None]
    clean = parts[0] if len(parts) == 1 else parts[0] + parts[1]
    observed = add_noise(clean, cfg.noise, substream(cfg.seed, "noise"))
    return Scene(grid, point, curve, pcfg, ccfg, clean, observed, factor)


def _zero_or(p: Phantom | None, grid: GridSpec) -> Field:
    return p.field if p is not None else Field.zeros(grid)


def _slope_entry(js, values) -> float | str:
    s = log2_slope(js, values) if len(list(js)) >= 2 else None
    return s if s is not None else "not-available"


def _manifest(cfg: RunConfig, command: str, extra: dict | None = None) -> dict:
    doc = {"schema_version": report.SCHEMA_VERSION, "command": command, "config": asdict(cfg)}
    doc.update(extra or {})
    return doc


# --------------------------------------------------------------------------
# commands


def cmd_gen(cfg: RunConfig) -> int:
    grid = cfg.validate()
    out = report.ensure_dir(cfg.out)
    scene = build_scene(cfg, grid)
    report.write_image(out / "field", scene.observed.field.values, description="observed field")
    report.write_image(out / "spectrum", report.log_magnitude(scene.observed.spectrum.values),
                       description="centred log10(1 + |DFT|) of the observed field")
    rows = []
    for j in grid.scales:
        ep = annulus_energy(scene.point.spectrum, j) if scene.point is not None else 0.0
        ec = annulus_energy(scene.curve.spectrum, j) if scene.curve is not None else 0.0
        rows.append((j, ep, ec, ep / ec if ec > 0 else None))
    report.write_csv(out / "energy.csv", ENERGY_COLUMNS, rows)
    report.write_json(out / "gen.json", _manifest(cfg, "gen", {"energy_match_factor": scene.factor}))
    log.info("gen: wrote %s", out)
    return EXIT_CLEAN


def cmd_separate(cfg: RunConfig) -> int:
    grid = cfg.validate()
    out = report.ensure_dir(cfg.out)
    scene = build_scene(cfg, grid)
    pair = frame_pair(grid)
    scales = cfg.scale_list(grid)
    t0 = time.perf_counter()
    res = separate_full(scene.observed.field, pair, cfg.solver(), scales=scales)
    elapsed = time.perf_counter() - t0
    metrics = separation_metrics(res, decompose(_zero_or(scene.point, grid)), decompose(_zero_or(scene.curve, grid)))
    peak = max(float(np.abs(res.P.values).max()), float(np.abs(res.C.values).max()), 1e-300)
    report.write_image(out / "point_part", np.abs(res.P.values), 0.0, peak,
                       description="|point part|, shared stretch with curve_part")
    report.write_image(out / "curve_part", np.abs(res.C.values), 0.0, peak,
                       description="|curve part|, shared stretch with point_part")
    if cfg.subband_images:
        for s in res.subbands:
            lim = max(float(np.abs(s.W.values).max()), float(np.abs(s.C.values).max()), 1e-300)
            report.write_image(out / f"W_{s.j}", s.W.values, -lim, lim, description=f"wavelet part of subband {s.j}")
            report.write_image(out / f"C_{s.j}", s.C.values, -lim, lim, description=f"curvelet part of subband {s.j}")
    report.separation_figure(out / "separation.png", scene.observed.field.values, res.P.values, res.C.values,
                             title=f"N={grid.size}, scales {scales[0]}..{scales[-1]}")
    f_norm = scene.observed.field.norm()
    degraded = res.degraded
    doc = _manifest(cfg, "separate", {
        "status": "degraded" if degraded else "clean",
        "degraded_scales": degraded,
        "subbands": [s.as_dict() for s in res.subbands],
        "ratios": {str(j): r for j, r in metrics.ratios.items()},
        "skipped_scales": metrics.skipped,
        "log2_slope": metrics.slope if metrics.slope is not None else "not-available",
        "curve_part_rel_norm": res.C.norm() / f_norm if f_norm > 0 else None,
        "point_part_rel_norm": res.P.norm() / f_norm if f_norm > 0 else None,
        "curve_to_point_peak": float(np.abs(res.C.values).max()) / max(float(np.abs(res.P.values).max()), 1e-300),
        "seconds": elapsed,
    })
    report.write_json(out / "separation.json", doc)
    for s in res.subbands:
        if not s.converged:
            log.warning("scale %d degraded: %d iterations, relative change %.2e", s.j, s.iterations, s.relative_gap)
    return EXIT_DEGRADED if degraded else EXIT_CLEAN


def _cluster_rows(cluster, frame) -> list[tuple]:
    rows = []
    for r in cluster.as_rows(frame):
        rows.append((frame.kind, r["j"], r.get("l", 0), r["k1"], r["k2"], r["x1"], r["x2"]))
    return rows


def cmd_coherence(cfg: RunConfig) -> int:
    grid = cfg.validate()
    out = report.ensure_dir(cfg.out)
    scene = build_scene(cfg, grid)
    pair = frame_pair(grid)
    reports = []
    for j in cfg.scale_list(grid):
        rep, S1, S2 = coherence_report(scene.point_cfg, scene.curve_cfg, scene.point.field if scene.point else None,
                                       scene.curve.field if scene.curve else None, j, pair, cfg.epsilon,
                                       samples=cfg.samples, seed=substream(cfg.seed, f"kappa-{j}"))
        d = rep.as_dict()
        d["bound_applicable"] = rep.kappa_upper < 0.5
        d["delta1_rel"] = rep.delta1 / rep.f_norm if rep.f_norm > 0 else None
        d["delta2_rel"] = rep.delta2 / rep.f_norm if rep.f_norm > 0 else None
        reports.append(d)
        rows = _cluster_rows(S1, pair.wavelets) + _cluster_rows(S2, pair.curvelets)
        report.write_csv(out / f"clusters_{j}.csv", ("frame", "j", "l", "k1", "k2", "x1", "x2"), rows)
        pc = np.array([(r[5], r[6]) for r in rows if r[0] == "wavelet"]).reshape(-1, 2)
        cc = np.array([(r[5], r[6]) for r in rows if r[0] == "curvelet"]).reshape(-1, 2)
        report.overlay_figure(out / f"overlay_{j}.png", scene.clean.field.values, pc, cc,
                              title=f"tube clusters around subband {j}")
        log.info("coherence j=%d: mu_c %.3g / %.3g, kappa in [%.3g, %.3g]", j, rep.mu_c_forward,
                 rep.mu_c_reverse, rep.kappa_lower, rep.kappa_upper)
    js = [r["j"] for r in reports]
    report.write_json(out / "coherence.json", _manifest(cfg, "coherence", {
        "reports": reports,
        "slopes": {
            "mu_c_forward": _slope_entry(js, [r["mu_c_forward"] for r in reports]),
            "mu_c_reverse": _slope_entry(js, [r["mu_c_reverse"] for r in reports]),
        },
    }))
    return EXIT_CLEAN


def cmd_decay_study(cfg: RunConfig) -> int:
    grid = cfg.validate()
    out = report.ensure_dir(cfg.out)
    scene = build_scene(cfg, grid)
    pair = frame_pair(grid)
    scales = cfg.scale_list(grid)
    res = separate_full(scene.observed.field, pair, cfg.solver(), scales=scales)
    P = _zero_or(scene.point, grid)
    C = _zero_or(scene.curve, grid)
    metrics = separation_metrics(res, decompose(P), decompose(C))
    rows = []
    for j in scales:
        rep, _, _ = coherence_report(scene.point_cfg, scene.curve_cfg, P, C, j, pair, cfg.epsilon, samples=0)
        fn = rep.f_norm
        b = rep.bound
        rows.append((j, metrics.ratios.get(j), rep.mu_c_forward, rep.mu_c_reverse,
                     rep.delta1 / fn if fn > 0 else None, rep.delta2 / fn if fn > 0 else None,
                     float(b)))
    report.write_csv(out / "decay.csv", DECAY_COLUMNS, rows)
    series = {name: [r[i] for r in rows] for i, name in enumerate(DECAY_COLUMNS) if i > 0 and name != "bound"}
    slopes = {}
    for name, vals in series.items():
        pairs = [(j, v) for j, v in zip(scales, vals) if v is not None]
        slopes[name] = _slope_entry([p[0] for p in pairs], [p[1] for p in pairs])
    report.decay_figure(out / "decay.png", scales, series, title=f"decay across scales, N={grid.size}")
    degraded = res.degraded
    report.write_json(out / "decay.json", _manifest(cfg, "decay-study", {
        "status": "degraded" if degraded else "clean",
        "degraded_scales": degraded,
        "columns": list(DECAY_COLUMNS),
        "slopes": slopes,
        "subbands": [s.as_dict() for s in res.subbands],
    }))
    return EXIT_DEGRADED if degraded else EXIT_CLEAN


def cmd_oracle(cfg: RunConfig) -> int:
    out = report.ensure_dir(cfg.out)
    clean = sweep_recovery_bound(cfg.count, substream(cfg.seed, "recovery-bound"))
    noisy = sweep_noise(cfg.noisy_count, substream(cfg.seed, "noise-bound"))
    lines = [f"clean bound: {clean.line()}", f"noise bound: {noisy.line()}"]
    doc = {"clean": clean.as_dict(), "noisy": noisy.as_dict()}
    ok = clean.violations == 0 and noisy.violations == 0
    if cfg.self_test:
        honest, shrunk = self_test(max(cfg.count, 1), substream(cfg.seed, "self-test"))
        detected = honest.violations == 0 and shrunk.violations > 0
        lines.append(f"self-test, true bound: {honest.line()}")
        lines.append(f"self-test, bound x0.5: {shrunk.line()} -> "
                     + ("violations detected" if detected else "NOT detected"))
        doc["self_test"] = {"honest": honest.as_dict(), "shrunk": shrunk.as_dict(), "detected": detected}
        ok = ok and detected
    doc["status"] = "pass" if ok else "fail"
    report.write_json(out / "oracle.json", _manifest(cfg, "oracle", doc))
    for line in lines:
        print(line)
    return EXIT_CLEAN if ok else EXIT_VIOLATION


COMMANDS = {
    "gen": cmd_gen,
    "separate": cmd_separate,
    "coherence": cmd_coherence,
    "decay-study": cmd_decay_study,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # every default is None so that unset flags do not override the config file
    common.add_argument("--config", help="JSON file whose keys mirror the long flags")
    common.add_argument("--grid", type=int, help="grid size N (power of two, >= 64)")
    common.add_argument("--scales", help="scale range, e.g. 3:7 or 4,5,6")
    common.add_argument("--points", help="point singularities 'x1,x2;x1,x2' in [0,1)^2, or 'none'")
    common.add_argument("--curve", help="circle | segment | none | csv:PATH")
    common.add_argument("--rho", type=float, help="segment half-length, in (0, 1/4)")
    common.add_argument("--noise", type=float, help="noise l2 norm relative to the clean field")
    common.add_argument("--seed", type=int)
    common.add_argument("--epsilon", type=float, help="tube exponent, in (0, 1/32)")
    common.add_argument("--tol", type=float, help="relative objective change for stopping")
    common.add_argument("--max-iter", dest="max_iter", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--log-level", default="INFO")

    p = argparse.ArgumentParser(prog="geosep", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("gen", parents=[common], help="synthesise phantoms")
    sp = sub.add_parser("separate", parents=[common], help="separate points from curves")
    sp.add_argument("--subband-images", dest="subband_images", action="store_true", default=None)
    cp = sub.add_parser("coherence", parents=[common], help="coherence and cluster reports")
    cp.add_argument("--samples", type=int, help="sampling rounds for the kappa lower bound (0 skips)")
    sub.add_parser("decay-study", parents=[common], help="separation and coherence across scales")
    op = sub.add_parser("oracle", parents=[common], help="exact checks of the recovery bound")
    op.add_argument("--count", type=int, help="clean instances")
    op.add_argument("--noisy-count", dest="noisy_count", type=int, help="noisy instances")
    op.add_argument("--self-test", dest="self_test", action="store_true", default=None,
                    help="also check that a bound shrunk by half is caught")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s")
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("command", "config", "log_level")}
    try:
        cfg = load_config(args.config, flags)
        cfg.validate() if args.command != "oracle" else None
        return COMMANDS[args.command](cfg)
    except (ConfigError, PhantomError, GridError) as exc:
        print(f"geosep: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except report.OutputError as exc:
        print(f"geosep: {exc}", file=sys.stderr)
        return EXIT_OUTPUT


if __name__ == "__main__":
    sys.exit(main())
