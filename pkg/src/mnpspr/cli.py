"""Batch command-line front end.

Runs spectra, identity checks, plasmon/localization scans, scattering
sweeps and sphere-oracle checks from a JSON config, writing CSV/JSON
artifacts with a provenance header.  Artifacts are deterministic for a
fixed config and seed: bodies are byte-identical across runs except for
the timestamp header line.

Exit codes: 0 success, 1 config validation error, 2 numerical-accuracy
failure (guard or tolerance breach).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .mie import SphereMode, exact_sphere_potential, mode_tangent_field
from .plasmon import PlasmonMode, localization_scan
from .potentials import (
    AssemblyAccuracyError,
    MaterialConfig,
    NearBoundaryError,
    RegularizationError,
    ResonanceError,
    offboundary_eval,
    scalar_operators,
)
from .quadrature import default_polar_order
from .scatter import resonance_sweep
from .spectral import (
    calderon_residual,
    mnp_spectra,
    np_spectrum,
    scalar_calderon_residual,
)
from .surface import (
    ResolutionError,
    ShCoeffs,
    StarShapeError,
    SurfaceGrid,
    TangentField,
    build_surface,
    radius_from_json,
    random_band_limited,
)

COMMANDS = ("spectrum", "calderon", "plasmon", "decay", "scatter", "mie-check")


class ConfigError(ValueError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


@dataclass
class RunConfig:
    """Validated batch-run configuration."""

    command: str
    raw: dict
    surface: dict = None
    L: int = None
    materials: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        command = data.get("command")
        if command not in COMMANDS:
            raise ConfigError(f"unknown or missing command {command!r}", "command")
        cfg = cls(command=command, raw=data)
        if command != "mie-check":
            if "surface" not in data:
                raise ConfigError("missing surface specification", "surface")
            cfg.surface = data["surface"]
            if "L" not in data:
                raise ConfigError("missing truncation degree L", "L")
            cfg.L = int(data["L"])
            if not (1 <= cfg.L <= 60):
                raise ConfigError("L out of the documented range [1, 60]", "L")
        cfg.materials = data.get("materials", {})
        if "omega" in cfg.materials and cfg.materials["omega"] <= 0:
            raise ConfigError("omega must be positive", "materials.omega")
        if "delta" in cfg.materials and cfg.materials["delta"] < 0:
            raise ConfigError("delta must be nonnegative", "materials.delta")
        cfg.params = {
            k: v
            for k, v in data.items()
            if k not in ("command", "surface", "L", "materials", "output")
        }
        return cfg

    def build_grid(self) -> SurfaceGrid:
        spec = self.surface
        if "sphere" in spec:
            radius = ShCoeffs.constant(float(spec["sphere"]))
        elif "radius" in spec:
            radius = radius_from_json(spec)
        else:
            raise ConfigError("surface needs 'radius' entries or 'sphere'", "surface")
        L_quad = int(spec.get("L_quad", self.L))
        return build_surface(radius, max(L_quad, self.L))


def config_hash(data) -> str:
    return hashlib.sha256(
        json.dumps(data, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()[:16]


def report_version_and_provenance(cfg=None, tol=None, seed=0, threads=None, L_quad=None):
    """Provenance lines embedded in every artifact header."""
    import scipy

    lines = [
        f"mnpspr {__version__}",
        f"numpy {np.__version__}, scipy {scipy.__version__}",
        "quadrature: rotated-polar-gl "
        + (f"(n_polar={default_polar_order(L_quad)})" if L_quad else "(n_polar=L+18)"),
        f"L_quad: {L_quad if L_quad is not None else 'n/a'}",
        f"tolerance: {tol if tol is not None else 'default'}",
        f"seed: {seed}",
        f"threads: {threads if threads is not None else 'default'}",
    ]
    if cfg is not None:
        lines.append(f"config_hash: {config_hash(cfg)}")
    return lines


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.12e}"
    if isinstance(x, complex):
        return f"{x.real:.12e}{x.imag:+.12e}j"
    return str(x)


def write_csv(path, header_lines, columns, rows):
    with open(path, "w", newline="") as fh:
        fh.write(f"# timestamp: {time.strftime('%Y-%m-%dT%H:%M:%S')}\n")
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_json(path, header_lines, payload):
    out = {"provenance": header_lines, "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S")}
    out.update(payload)
    with open(path, "w") as fh:
        json.dump(out, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _materials(cfg, default_tau=0.5):
    m = cfg.materials
    return MaterialConfig.negative_preset(
        float(m.get("tau", default_tau)),
        float(m.get("omega", 1.0)),
        float(m.get("delta", 0.05)),
    )


def _shell_points(spec):
    """Deterministic spiral point cloud from {count, radius} entries."""
    pts = []
    for entry in spec:
        n, rad = int(entry["count"]), float(entry["radius"])
        k = np.arange(n) + 0.5
        th = np.arccos(1.0 - 2.0 * k / n)
        ph = np.pi * (1.0 + np.sqrt(5.0)) * k
        pts.append(
            rad
            * np.stack(
                [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1
            )
        )
    return np.vstack(pts)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_spectrum(cfg, outdir, header, rng, tol):
    grid = cfg.build_grid()
    ops = scalar_operators(grid, cfg.L)
    nps = np_spectrum(ops["S"], ops["Kstar"])
    curl, grad = mnp_spectra(nps, ops["S"], grid)
    rows = []
    for tag, st in (("Kstar", nps), ("M_curl", curl), ("Mstar_grad", grad)):
        for j, lam, mult in st.eigenvalue_table():
            rows.append((tag, j, lam, mult))
    write_csv(
        os.path.join(outdir, "spectrum.csv"),
        header,
        ["operator", "j", "lambda", "multiplicity_cluster"],
        rows,
    )
    write_json(
        os.path.join(outdir, "spectrum.json"),
        header,
        {"sets": [nps.to_json_dict(), curl.to_json_dict(), grad.to_json_dict()]},
    )
    return 0


def cmd_calderon(cfg, outdir, header, rng, tol):
    grid = cfg.build_grid()
    ops = scalar_operators(grid, cfg.L)
    n_tests = int(cfg.params.get("n_tests", 10))
    rows = []
    worst = 0.0
    for i in range(n_tests):
        t = TangentField.from_potentials(
            V=random_band_limited(rng, max(cfg.L - 3, 1), 2.5), L=cfg.L, flavor="curl"
        )
        r = calderon_residual("curl", t, ops, grid)
        rows.append(("curl", i, r))
        t2 = TangentField.from_potentials(
            X=random_band_limited(rng, max(cfg.L - 3, 1), 2.5), L=cfg.L, flavor="div"
        )
        r2 = calderon_residual("grad", t2, ops, grid)
        rows.append(("grad", i, r2))
        worst = max(worst, r, r2)
    scal = scalar_calderon_residual(ops)
    write_csv(
        os.path.join(outdir, "calderon.csv"),
        header,
        ["identity", "test", "residual"],
        rows,
    )
    write_json(
        os.path.join(outdir, "calderon.json"),
        header,
        {"worst_residual": worst, "scalar_residual": scal, "tolerance": tol},
    )
    if tol is not None and worst > tol:
        raise AssemblyAccuracyError(
            f"commutation residual {worst:.3e} exceeds tolerance {tol:.3e}"
        )
    return 0


def cmd_plasmon(cfg, outdir, header, rng, tol):
    grid = cfg.build_grid()
    omega = float(cfg.materials.get("omega", 1.0))
    spec = cfg.params.get("mode")
    if not spec:
        raise ConfigError("plasmon needs a 'mode' entry", "mode")
    if "l" in spec:
        mode = PlasmonMode.from_sphere(
            int(spec["l"]), int(spec["n"]), int(spec["m"]),
            float(spec.get("radius", 1.0)), omega,
            float(cfg.materials.get("delta", 0.05)),
        )
    else:
        ops = scalar_operators(grid, cfg.L)
        curl, _ = mnp_spectra(np_spectrum(ops["S"], ops["Kstar"]), ops["S"], grid)
        mode = PlasmonMode.from_eigenmode(
            int(spec["index"]), curl, omega, float(cfg.materials.get("delta", 0.05))
        )
    points = _shell_points(cfg.params.get("points", [{"count": 20, "radius": 2.0}]))
    from .plasmon import plasmon_field
    from .surface import tubular_distance

    rows = []
    for p_id, x in enumerate(points):
        E, H = plasmon_field(mode, x, grid)
        rows.append(
            (
                str(mode.index if mode.index is not None else mode.sphere),
                mode.lam,
                mode.tau,
                p_id,
                tubular_distance(x, grid),
                float(np.linalg.norm(E)),
                float(np.linalg.norm(H)),
            )
        )
    write_csv(
        os.path.join(outdir, "plasmon.csv"),
        header,
        ["mode", "lambda", "tau", "point", "dist", "abs_E", "abs_H"],
        rows,
    )
    return 0


def cmd_decay(cfg, outdir, header, rng, tol):
    grid = cfg.build_grid()
    omega = float(cfg.materials.get("omega", 1.0))
    ops = scalar_operators(grid, cfg.L)
    curl, _ = mnp_spectra(np_spectrum(ops["S"], ops["Kstar"]), ops["S"], grid)
    modes = [PlasmonMode.from_eigenmode(j, curl, omega) for j in range(len(curl))]
    points = _shell_points(
        cfg.params.get(
            "points", [{"count": 40, "radius": 3.0}, {"count": 10, "radius": 0.25}]
        )
    )
    eps = float(cfg.params.get("eps", 0.5))
    report = localization_scan(modes, points, eps, grid)
    write_csv(
        os.path.join(outdir, "decay.csv"),
        header,
        ["mode", "lambda", "tau", "point", "dist", "abs_E", "abs_H"],
        report.csv_rows(),
    )
    write_json(os.path.join(outdir, "decay.json"), header, report.to_json_dict())
    return 0


def cmd_scatter(cfg, outdir, header, rng, tol):
    grid = cfg.build_grid()
    omega = float(cfg.materials.get("omega", 1.0))
    tau_list = cfg.params.get("tau_list", [0.5])
    delta_list = cfg.params.get("delta_list", [0.1, 0.05, 0.025])
    order = int(cfg.params.get("order", 2))
    src = cfg.params.get("source", {"s": [0.0, 0.0, 6.0], "p": [1.0, 0.0, 0.0]})
    rows = resonance_sweep(
        grid, tau_list, delta_list, omega, order,
        np.asarray(src["s"], dtype=float), np.asarray(src["p"], dtype=float),
    )
    write_csv(
        os.path.join(outdir, "scatter.csv"),
        header,
        ["tau", "delta", "indicator", "solution_norm", "condition"],
        rows,
    )
    return 0


def cmd_mie_check(cfg, outdir, header, rng, tol):
    n_max = int(cfg.params.get("n_max", 5))
    k = float(cfg.params.get("k", 1.0))
    radius = float(cfg.params.get("radius", 1.0))
    L_quad = int(cfg.params.get("L_quad", 16))
    grid = build_surface(ShCoeffs.constant(radius), L_quad)
    tol = 1e-6 if tol is None else tol
    rows = []
    worst = 0.0
    for l in (1, 2):
        for which in ("curlS", "curlcurlS"):
            for side, rfac in (("exterior", 2.0), ("interior", 0.5)):
                err = 0.0
                for n in range(1, n_max + 1):
                    mode = SphereMode(l, n, min(1, n), radius)
                    x = rfac * radius * np.array([0.6, 0.64, 0.48])
                    dens = mode_tangent_field(mode, min(L_quad, n_max + 7))
                    num = offboundary_eval(dens, k, x, which + "_vec", grid)
                    ex = exact_sphere_potential(mode, k, x, which)
                    err = max(err, float(np.max(np.abs(num - ex)) / np.max(np.abs(ex))))
                rows.append((l, which, side, err, err <= tol))
                worst = max(worst, err)
    n_pass = sum(1 for r in rows if r[4])
    write_csv(
        os.path.join(outdir, "mie_check.csv"),
        header,
        ["family", "kind", "side", "max_rel_err", "pass"],
        rows,
    )
    write_json(
        os.path.join(outdir, "mie_check.json"),
        header,
        {
            "report": f"{n_pass}/8 exact-formula oracles pass <= {tol:g}",
            "worst": worst,
            "n_max": n_max,
        },
    )
    if n_pass != 8:
        raise AssemblyAccuracyError(
            f"only {n_pass}/8 oracle comparisons met {tol:g} (worst {worst:.3e})"
        )
    return 0


_HANDLERS = {
    "spectrum": cmd_spectrum,
    "calderon": cmd_calderon,
    "plasmon": cmd_plasmon,
    "decay": cmd_decay,
    "scatter": cmd_scatter,
    "mie-check": cmd_mie_check,
}


def run(config, outdir=".", tol=None, seed=0, threads=None) -> int:
    """Execute a validated config; returns the process exit status."""
    try:
        cfg = RunConfig.from_dict(config)
    except (ConfigError, StarShapeError, ResolutionError) as exc:
        _emit_error(outdir, 1, exc)
        return 1
    header = report_version_and_provenance(
        config, tol, seed, threads, L_quad=cfg.L if cfg.L else None
    )
    rng = np.random.default_rng(seed)
    try:
        return _HANDLERS[cfg.command](cfg, outdir, header, rng, tol)
    except (ConfigError, StarShapeError, ResolutionError, KeyError) as exc:
        _emit_error(outdir, 1, exc)
        return 1
    except (
        AssemblyAccuracyError,
        NearBoundaryError,
        RegularizationError,
        ResonanceError,
    ) as exc:
        _emit_error(outdir, 2, exc)
        return 2


def _emit_error(outdir, code, exc):
    payload = {
        "error": {
            "code": code,
            "type": type(exc).__name__,
            "message": str(exc),
            "field": getattr(exc, "field", None),
        }
    }
    sys.stderr.write(json.dumps(payload) + "\n")
    try:
        with open(os.path.join(outdir, "error.json"), "w") as fh:
            json.dump(payload, fh, indent=1)
    except OSError:
        pass


def _apply_threads(threads):
    if threads is None:
        threads = os.environ.get("MNP_THREADS")
    if threads is None:
        return None
    threads = int(threads)
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(threads)
    except ImportError:
        os.environ["OMP_NUM_THREADS"] = str(threads)
    return threads


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mnpspr", description="boundary-operator spectra and plasmon scans"
    )
    parser.add_argument("--config", required=True, help="JSON config path")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--tol", type=float, default=None, help="tolerance override")
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    threads = _apply_threads(args.threads)
    try:
        with open(args.config) as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        _emit_error(args.out, 1, ConfigError(f"cannot read config: {exc}"))
        return 1
    os.makedirs(args.out, exist_ok=True)
    return run(config, args.out, args.tol, args.seed, threads)


if __name__ == "__main__":
    sys.exit(main())
