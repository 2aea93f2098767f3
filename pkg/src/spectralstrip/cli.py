"""Command-line front end.

Subcommands: spectrum, shoot, transform, strip, verify, sweep.  Inputs come
from flags or a JSON config file (flags override the file).  Reports are
deterministic JSON; plot data goes to CSV.  Exit status: 0 when every verdict
passes, 1 on numerical failure (diagnostic in the report when --out is
given), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import kernels
from .darboux import shoot_ground_state, darboux_transform, trace_identity_residual
from .errors import ParameterError, SpectralStripError
from .lattice import (
    load_potential,
    make_uniform_grid,
    random_potential,
    square_well,
)
from .report import build_report, emit_plot_data, write_report
from .spectral import (
    ground_energy,
    lt_moment,
    negative_spectrum,
    potential_moment,
    spectrum_to_dict,
)
from .stripping import (
    LT_CONSTANT,
    half_moment_bounds,
    strip_all,
    trace_to_dict,
    verify_theorem1,
)

PROFILES = {
    "fast": (-12.0, 12.0, 6001),   # h = 4e-3
    "fine": (-15.0, 15.0, 60001),  # h = 5e-4
}

COMMANDS = ("spectrum", "shoot", "transform", "strip", "verify", "sweep")


@dataclass
class ExperimentConfig:
    command: str
    grid: tuple | None = None
    profile: str = "fast"
    well: dict | None = None
    random: dict | None = None
    potential_path: str | None = None
    cluster_tol: float | None = None
    deg_tol: float | None = None
    cutoff: float = 1e-10
    depths: list = field(default_factory=list)
    metric: str = "lt_ratio"
    out: str | None = None
    csv: str | None = None

    def validate(self):
        if self.command not in COMMANDS:
            raise ParameterError(f"unknown command {self.command!r}")
        sources = [s for s in (self.well, self.random, self.potential_path) if s]
        if self.command == "sweep":
            if self.well is None:
                raise ParameterError("sweep requires --well a=...,dim=... as the family")
            if not self.depths:
                raise ParameterError("sweep requires --depths")
        elif len(sources) != 1:
            raise ParameterError("exactly one potential source (--well, --random, --potential) is required")
        for name in ("cluster_tol", "deg_tol", "cutoff"):
            v = getattr(self, name)
            if v is not None and v <= 0.0:
                raise ParameterError(f"{name} must be positive, got {v}")
        if self.profile not in PROFILES:
            raise ParameterError(f"unknown profile {self.profile!r}")


def _parse_kv_tokens(tokens, keys, what):
    """Accept 'k=v' tokens in any order or one positional comma list."""
    joined = ",".join(tokens)
    vals = {}
    if "=" in joined:
        for part in joined.split(","):
            if not part:
                continue
            if "=" not in part:
                raise ParameterError(f"{what}: cannot mix key=value and positional forms ({part!r})")
            k, v = part.split("=", 1)
            k = k.strip()
            if k not in keys:
                raise ParameterError(f"{what}: unknown key {k!r} (expected {list(keys)})")
            vals[k] = float(v)
    else:
        parts = [p for p in joined.split(",") if p]
        if len(parts) > len(keys):
            raise ParameterError(f"{what}: too many values (expected {list(keys)})")
        for k, v in zip(keys, parts):
            vals[k] = float(v)
    return vals


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spectralstrip", description=__doc__)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--grid", help="x_min,x_max,n (overrides --profile); "
                   "use --grid=-15,15,60001 for negative bounds")
    p.add_argument("--profile", choices=sorted(PROFILES), default=None,
                   help="fast: h=4e-3 on [-12,12]; fine: h=5e-4 on [-15,15]")
    p.add_argument("--well", nargs="+", metavar="depth,a,dim",
                   help="square well: positional depth,a,dim or key=value tokens")
    p.add_argument("--random", nargs="+", metavar="seed,dim,a,strength",
                   help="seeded random potential: positional or key=value tokens")
    p.add_argument("--potential", help="path to a potential JSON file")
    p.add_argument("--cluster-tol", type=float, default=None)
    p.add_argument("--deg-tol", type=float, default=None)
    p.add_argument("--cutoff", type=float, default=None, help="stripping cutoff threshold")
    p.add_argument("--depths", help="comma list of well depths for sweep")
    p.add_argument("--metric", default=None, choices=["lt_ratio"])
    p.add_argument("--out", help="JSON report path")
    p.add_argument("--csv", help="CSV plot-data path")
    p.add_argument("--config", help="JSON config file; flags override its fields")
    return p


def parse_config(argv) -> ExperimentConfig:
    args = _build_parser().parse_args(argv)
    base = {}
    if args.config:
        try:
            with open(args.config) as fh:
                base = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ParameterError(f"cannot read config file {args.config!r}: {exc}") from exc

    cfg = ExperimentConfig(command=args.command)
    cfg.grid = tuple(base["grid"]) if "grid" in base else None
    cfg.profile = base.get("profile", "fast")
    cfg.well = base.get("well")
    cfg.random = base.get("random")
    cfg.potential_path = base.get("potential")
    cfg.cluster_tol = base.get("cluster_tol")
    cfg.deg_tol = base.get("deg_tol")
    cfg.cutoff = base.get("cutoff", 1e-10)
    cfg.depths = list(base.get("depths", []))
    cfg.metric = base.get("metric", "lt_ratio")
    cfg.out = base.get("out")
    cfg.csv = base.get("csv")

    if args.grid:
        parts = args.grid.split(",")
        if len(parts) != 3:
            raise ParameterError(f"--grid needs x_min,x_max,n, got {args.grid!r}")
        cfg.grid = (float(parts[0]), float(parts[1]), int(parts[2]))
    if args.profile:
        cfg.profile = args.profile
    if args.well:
        cfg.well = _parse_kv_tokens(args.well, ("depth", "a", "dim"), "--well")
    if args.random:
        cfg.random = _parse_kv_tokens(args.random, ("seed", "dim", "a", "strength"), "--random")
    if args.potential:
        cfg.potential_path = args.potential
    if args.cluster_tol is not None:
        cfg.cluster_tol = args.cluster_tol
    if args.deg_tol is not None:
        cfg.deg_tol = args.deg_tol
    if args.cutoff is not None:
        cfg.cutoff = args.cutoff
    if args.depths:
        cfg.depths = [float(d) for d in args.depths.split(",") if d]
    if args.metric:
        cfg.metric = args.metric
    if args.out:
        cfg.out = args.out
    if args.csv:
        cfg.csv = args.csv

    cfg.validate()
    return cfg


def _make_grid(cfg: ExperimentConfig):
    if cfg.grid is not None:
        return make_uniform_grid(*cfg.grid)
    return make_uniform_grid(*PROFILES[cfg.profile])


def _make_potential(cfg: ExperimentConfig, depth_override=None):
    grid = _make_grid(cfg)
    if cfg.potential_path:
        return load_potential(cfg.potential_path)
    if cfg.well is not None:
        w = dict(cfg.well)
        if depth_override is not None:
            w["depth"] = depth_override
        if "depth" not in w:
            raise ParameterError("--well needs a depth (or --depths for sweep)")
        return square_well(w["depth"], w.get("a", 1.0), int(w.get("dim", 1)), grid)
    r = cfg.random
    return random_potential(int(r["seed"]), int(r.get("dim", 1)), r.get("a", 1.0),
                            r.get("strength", 1.0), grid)


def _config_dict(cfg: ExperimentConfig) -> dict:
    grid = cfg.grid if cfg.grid is not None else PROFILES[cfg.profile]
    return {
        "command": cfg.command,
        "grid": list(grid),
        "profile": cfg.profile,
        "well": cfg.well,
        "random": cfg.random,
        "potential": cfg.potential_path,
        "cluster_tol": cfg.cluster_tol,
        "deg_tol": cfg.deg_tol,
        "cutoff": cfg.cutoff,
        "depths": cfg.depths,
        "metric": cfg.metric,
        "backend": kernels.BACKEND,
    }


def _shoot(cfg: ExperimentConfig):
    V = _make_potential(cfg)
    lam_est = ground_energy(V)
    if lam_est is None:
        raise SpectralStripError("potential has no bound state to shoot")
    gs = shoot_ground_state(V, (0.9 * lam_est, 1.1 * lam_est), degeneracy_tol=cfg.deg_tol)
    return V, gs


def run(cfg: ExperimentConfig) -> int:
    """Execute the configured command; returns the exit status."""
    body: dict = {}
    passed = True
    csv_payload = None
    csv_kind = None

    if cfg.command == "spectrum":
        V = _make_potential(cfg)
        s = negative_spectrum(V, cluster_tol=cfg.cluster_tol)
        body = {"spectrum": spectrum_to_dict(s), "marginal_floor": s.marginal_floor}
        csv_payload, csv_kind = s, "spectrum"

    elif cfg.command == "shoot":
        V, gs = _shoot(cfg)
        body = {
            "lambda1": gs.lambda1,
            "K": gs.K,
            "edge_eigenvalues": [float(v) for v in gs.edge_eigenvalues],
            "edge_x": float(V.grid.nodes[gs.edge_index]),
        }
        csv_payload, csv_kind = gs.F, "braid"

    elif cfg.command == "transform":
        V, gs = _shoot(cfg)
        W = darboux_transform(V, gs)
        residual = trace_identity_residual(V, W, gs)
        scale = potential_moment(V, 2)
        passed = abs(residual) <= 1e-4 * scale
        body = {
            "lambda1": gs.lambda1,
            "K": gs.K,
            "identity_residual": residual,
            "moment_before": scale,
            "moment_after": potential_moment(W, 2),
            "identity_pass": bool(passed),
        }
        csv_payload, csv_kind = W, "potential"

    elif cfg.command == "strip":
        V = _make_potential(cfg)
        trace = strip_all(V, cutoff_threshold=cfg.cutoff, degeneracy_tol=cfg.deg_tol)
        passed = trace.deficit <= trace.total_error + 1e-6
        body = {"trace": trace_to_dict(trace), "ledger_pass": bool(passed)}
        csv_payload, csv_kind = trace, "trace"

    elif cfg.command == "verify":
        V = _make_potential(cfg)
        t1 = verify_theorem1(V, cluster_tol=cfg.cluster_tol)
        hm = half_moment_bounds(V, cluster_tol=cfg.cluster_tol)
        passed = t1["pass"] and hm["pass"]
        body = {"theorem1": t1, "half_moment": hm}

    elif cfg.command == "sweep":
        rows = _run_sweep(cfg)
        ratios = [r["ratio"] for r in rows]
        monotone = all(b > a for a, b in zip(ratios, ratios[1:]))
        passed = all(r["pass"] for r in rows)
        body = {"rows": rows, "metric": cfg.metric, "monotone_increasing": monotone}
        csv_payload, csv_kind = rows, "sweep"

    report = build_report(cfg.command, _config_dict(cfg), body, passed)
    if cfg.out:
        write_report(report, cfg.out)
    else:
        json.dump(report, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    if cfg.csv and csv_payload is not None:
        emit_plot_data(csv_payload, csv_kind, cfg.csv)
    return 0 if passed else 1


def _sweep_point(cfg: ExperimentConfig, depth: float) -> dict:
    V = _make_potential(cfg, depth_override=depth)
    s = negative_spectrum(V, cluster_tol=cfg.cluster_tol)
    lhs = lt_moment(s, 1.5) if not s.is_empty else 0.0
    rhs = LT_CONSTANT * potential_moment(V, 2)
    return {
        "depth": depth,
        "lhs": lhs,
        "rhs": rhs,
        "ratio": lhs / rhs if rhs > 0 else 0.0,
        "pass": bool(lhs - rhs <= 1e-6 * max(1.0, rhs)),
    }


def _run_sweep(cfg: ExperimentConfig) -> list:
    depths = cfg.depths
    n_threads = int(os.environ.get("SPECTRALSTRIP_THREADS", "1") or "1")
    if n_threads > 1 and len(depths) > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            return list(pool.map(lambda d: _sweep_point(cfg, d), depths))
    return [_sweep_point(cfg, d) for d in depths]


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except ParameterError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(cfg)
    except ParameterError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except SpectralStripError as exc:
        diagnostic = {"schema_version": 1, "command": cfg.command,
                      "config": _config_dict(cfg), "error": str(exc), "pass": False}
        if cfg.out:
            write_report(diagnostic, cfg.out)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
