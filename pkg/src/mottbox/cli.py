"""Command-line entry point: run one experiment described by a JSON config.

Usage: mottbox <config.json> [--seed U64] [--out-dir PATH] [--threads N]

The config names one experiment (bell, scatter, track, isotropy, render) plus
its parameters; outputs are CSV/JSON/PPM files and a one-line summary on
stdout.  Identical config and seed give byte-identical output files.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import bell, chamber, mott, render
from .numerics import RngStream, unit

logger = logging.getLogger(__name__)

EXPERIMENTS = ("bell", "scatter", "track", "isotropy", "render")


class ConfigError(Exception):
    """Invalid or incomplete run configuration."""


def _need(config: dict, key: str):
    if key not in config:
        raise ConfigError(f"missing required key '{key}'")
    return config[key]


def _number(config: dict, key: str, default=None) -> float:
    value = config.get(key, default)
    if value is None:
        raise ConfigError(f"missing required key '{key}'")
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"key '{key}' must be a number, got {config[key]!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"key '{key}' must be finite, got {value}")
    return value


def _integer(config: dict, key: str, default=None) -> int:
    value = config.get(key, default)
    if value is None:
        raise ConfigError(f"missing required key '{key}'")
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(f"key '{key}' must be an integer, got {config[key]!r}")
    return value


def _direction(config: dict, key: str) -> np.ndarray:
    value = _need(config, key)
    try:
        v = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"key '{key}' must be a 3-vector, got {value!r}") from None
    if v.shape != (3,):
        raise ConfigError(f"key '{key}' must be a 3-vector, got {value!r}")
    try:
        return unit(v)
    except ValueError as exc:
        raise ConfigError(f"key '{key}': {exc}") from None


def _domain(builder, *args, **kwargs):
    # module preconditions surface as config errors, before any computation
    try:
        return builder(*args, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_lines(path: Path, lines) -> None:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _run_bell(config: dict, out_dir: Path) -> str:
    n = _integer(config, "n_trials")
    if n < 1:
        raise ConfigError(f"key 'n_trials' must be positive, got {n}")
    seed = _integer(config, "seed")
    a = _domain(bell.ApparatusSetting, _direction(config, "a"))
    b = _domain(bell.ApparatusSetting, _direction(config, "b"))
    c = _domain(bell.ApparatusSetting, _direction(config, "c")) if "c" in config else None
    rng = RngStream(seed)
    stream_ids = itertools.count(1)
    rows = []

    def correlation(x: bell.ApparatusSetting, y: bell.ApparatusSetting):
        est = bell.correlation_mc(x, y, n, rng.substream(next(stream_ids)))
        rows.append((x, y, est))
        return est

    if c is None:
        est = correlation(a, b)
        summary = f"E={est.mean:.4f}±{est.std_error:.4f}"
    else:
        result = bell.bell_test(a, b, c, correlation)
        summary = (
            f"bell lhs={result.lhs:.4f} rhs={result.rhs:.4f} "
            f"violated={'true' if result.violated else 'false'}"
        )
    lines = ["ax,ay,az,bx,by,bz,mean,std_error,n"]
    for x, y, est in rows:
        ox, oy = x.orientation, y.orientation
        lines.append(
            ",".join(
                [_fmt(ox[0]), _fmt(ox[1]), _fmt(ox[2]), _fmt(oy[0]), _fmt(oy[1]), _fmt(oy[2]),
                 _fmt(est.mean), _fmt(est.std_error), str(est.n_trials)]
            )
        )
    _write_lines(out_dir / config.get("output", "bell.csv"), lines)
    return summary


def _build_context(config: dict) -> mott.ScatteringContext:
    k = _number(config, "k")
    if k <= 0.0:
        raise ConfigError(f"key 'k' must be positive, got {k}")
    delta_e = _number(config, "delta_e", 0.0)
    return _domain(mott.ScatteringContext.from_wavenumber, k, delta_e)


def _run_scatter(config: dict, out_dir: Path) -> str:
    ctx = _build_context(config)
    if "position" in config:
        position = np.asarray(_need(config, "position"), dtype=float)
    else:
        position = np.array([0.0, 0.0, _number(config, "distance")])
    obstacle = _domain(
        mott.Obstacle,
        position=position,
        width=_number(config, "s"),
        g0=_number(config, "g0"),
        g1=_number(config, "g1"),
        delta_e=_number(config, "delta_e", 0.0),
    )
    n_theta = _integer(config, "n_theta", 181)
    if n_theta < 2:
        raise ConfigError(f"key 'n_theta' must be >= 2, got {n_theta}")
    mott.quadrature_convergence_check(ctx, obstacle)
    thetas = np.linspace(0.0, math.pi, n_theta)
    table0 = mott.angular_table(ctx, obstacle, 0, thetas)
    table1 = mott.angular_table(ctx, obstacle, 1, thetas)
    lines = ["theta,re_I0,im_I0,re_I1,im_I1,q"]
    for i, theta in enumerate(thetas):
        q = mott.transferred_momentum(ctx.k, theta)
        i0, i1 = table0.values[i], table1.values[i]
        lines.append(
            ",".join([_fmt(theta), _fmt(i0.real), _fmt(i0.imag), _fmt(i1.real), _fmt(i1.imag), _fmt(q)])
        )
    _write_lines(out_dir / config.get("output", "angular.csv"), lines)
    c2 = mott.normalization_c2(ctx, obstacle)
    total = mott.flux_total(ctx, obstacle)
    return f"|C|^2={c2:.6f} flux_total={total:.6f} flux_free={mott.flux_free(ctx):.6f}"


def _gas_species(config: dict) -> chamber.AtomSpecies:
    return _domain(
        chamber.AtomSpecies,
        width=_number(config, "width"),
        g0=_number(config, "g0"),
        g1=_number(config, "g1"),
        delta_e=_number(config, "delta_e", 0.0),
    )


def _track_lines(tracks) -> list[str]:
    lines = ["dx,dy,dz,N,flux_ratio"]
    for direction, n, ratio in tracks:
        lines.append(
            ",".join([_fmt(direction[0]), _fmt(direction[1]), _fmt(direction[2]), str(n), _fmt(ratio)])
        )
    return lines


def _check_flux_quadrature(ctx: mott.ScatteringContext, gas: chamber.GasConfiguration) -> None:
    if gas.n_atoms and (gas.atoms[0].g0 > 0.0 or gas.atoms[0].g1 > 0.0):
        mott.quadrature_convergence_check(ctx, gas.atoms[0])


def _run_track(config: dict, out_dir: Path) -> str:
    ctx = _build_context(config)
    if "gas_file" in config:
        try:
            gas = chamber.load_configuration(config["gas_file"])
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"cannot load gas_file {config['gas_file']!r}: {exc}") from None
    else:
        species = _gas_species(config)
        density = _number(config, "density")
        if density < 0.0:
            raise ConfigError(f"key 'density' must be non-negative, got {density}")
        rng = RngStream(_integer(config, "seed"))
        gas = _domain(
            chamber.sample_gas,
            density,
            _number(config, "inner_radius"),
            _number(config, "chamber_radius"),
            species,
            rng,
        )
    _check_flux_quadrature(ctx, gas)
    chamber.save_configuration(gas, out_dir / config.get("gas_output", "gas.json"))
    track = chamber.select_track(gas, ctx) if gas.n_atoms else None
    if track is None:
        _write_lines(out_dir / config.get("output", "track.csv"), _track_lines([]))
        return "no track (empty configuration)"
    off_chain = chamber.off_chain_c2_product(gas, ctx, track.chain)
    logger.info("off-chain |C|^2 product: %r over %d atoms", off_chain, gas.n_atoms - track.chain.n)
    _write_lines(
        out_dir / config.get("output", "track.csv"),
        _track_lines([(track.direction, track.chain.n, track.flux_ratio)]),
    )
    return f"track N={track.chain.n} flux_ratio={track.flux_ratio:.4f}"


def _run_isotropy(config: dict, out_dir: Path) -> str:
    ctx = _build_context(config)
    species = _gas_species(config)
    n_configs = _integer(config, "n_configs")
    density = _number(config, "density")
    rng = RngStream(_integer(config, "seed"))
    probe = _domain(species.at, [0.0, 0.0, _number(config, "inner_radius")])
    if probe.g0 > 0.0 or probe.g1 > 0.0:
        mott.quadrature_convergence_check(ctx, probe)
    result = _domain(
        chamber.isotropy_experiment,
        n_configs,
        density,
        _number(config, "inner_radius"),
        _number(config, "chamber_radius"),
        species,
        ctx,
        rng,
    )
    lines = ["bin,count"]
    lines.extend(f"{i},{count}" for i, count in enumerate(result.counts))
    _write_lines(out_dir / config.get("output", "isotropy.csv"), lines)
    tracks = zip(result.directions, result.chain_lengths, result.flux_ratios)
    _write_lines(out_dir / config.get("tracks_output", "tracks.csv"), _track_lines(tracks))
    return f"isotropy n={n_configs} chi2={result.chi_square:.2f} p={result.p_value:.4f}"


def _run_render(config: dict, out_dir: Path) -> str:
    ctx = _build_context(config)
    plane_cfg = _need(config, "plane")
    if not isinstance(plane_cfg, dict):
        raise ConfigError("key 'plane' must be an object")
    plane = _domain(
        render.PlaneSpec,
        origin=np.asarray(plane_cfg.get("origin", [0.0, 0.0, 0.0]), dtype=float),
        u_axis=_direction(plane_cfg, "u_axis"),
        v_axis=_direction(plane_cfg, "v_axis"),
        half_extent=_number(plane_cfg, "half_extent"),
        resolution=_integer(plane_cfg, "resolution"),
    )
    scale = _number(config, "modulus_scale")
    if scale <= 0.0:
        raise ConfigError(f"key 'modulus_scale' must be positive, got {scale}")
    obstacle = None
    if "obstacle" in config:
        ob = config["obstacle"]
        if not isinstance(ob, dict):
            raise ConfigError("key 'obstacle' must be an object")
        obstacle = _domain(
            mott.Obstacle,
            position=np.asarray(_need(ob, "position"), dtype=float),
            width=_number(ob, "width"),
            g0=_number(ob, "g0"),
            g1=_number(ob, "g1"),
            delta_e=_number(ob, "delta_e", ctx.delta_e),
        )

    def field(point):
        return mott.wave_field(ctx, obstacle, point)

    grid = render.sample_plane(field, plane)
    image = render.colorize(grid, scale)
    out_path = out_dir / config.get("output", "field.ppm")
    render.write_ppm(image, out_path)
    if "grid_csv" in config:
        render.write_grid_csv(grid, plane, out_dir / config["grid_csv"])
    return f"render wrote {out_path.name} {image.width}x{image.height}"


_RUNNERS = {
    "bell": _run_bell,
    "scatter": _run_scatter,
    "track": _run_track,
    "isotropy": _run_isotropy,
    "render": _run_render,
}


def run(config: dict, out_dir: Path) -> str:
    """Dispatch one experiment config; returns the summary line."""
    experiment = _need(config, "experiment")
    if experiment not in _RUNNERS:
        raise ConfigError(
            f"unknown experiment {experiment!r}; valid names: {', '.join(EXPERIMENTS)}"
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    return _RUNNERS[experiment](config, out_dir)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mottbox",
        description="Deterministic hidden-variable simulations: EPR correlations and cloud-chamber tracks.",
    )
    parser.add_argument("config", help="JSON experiment configuration file")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out-dir", default=".", help="directory for output files")
    parser.add_argument(
        "--threads",
        type=int,
        default=1,
        help="cap on worker threads; results never depend on it (current build runs sequentially)",
    )
    args = parser.parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {args.threads}")
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                config = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config!r}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config!r} is not valid JSON: {exc}") from None
        if not isinstance(config, dict):
            raise ConfigError("config must be a JSON object")
        if args.seed is not None:
            config["seed"] = args.seed
        summary = run(config, Path(args.out_dir))
    except ConfigError as exc:
        print(f"mottbox: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - surface runtime failures as exit 1
        print(f"mottbox: runtime error: {exc}", file=sys.stderr)
        return 1
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
