"""Command-line front end.

Usage::

    wignerdecay COMMAND [--config FILE] [--set section.key=value ...]
                [--output DIR] [--threads N] [command flags]

Exit status: 0 on success, 1 for configuration errors, 2 for numerical
failures.  Every CSV starts with ``#`` comment lines holding the full
configuration, so identical configs give identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import optimize_core, optimize_fidelity, qfi_phase, write_modulus_csv
from .config import ConfigError, RunConfig, apply_overrides, config_from_dict
from .dynamics import IntegrationError, evolve
from .hilbert import DensityMatrix, DimensionError, InvalidStateError, load_density, save_density
from .sweep import SweepSpec, preset, run_sweep, scaling_run
from .wigner import negativity_series, wigner_map

COMMANDS = ("simulate", "wigner", "negativity", "core-state", "fidelity", "qfi", "sweep", "scaling")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wignerdecay", description="Negative Wigner states from a decaying qubit coupling.")
    p.add_argument("command", help=f"one of: {', '.join(COMMANDS)}")
    p.add_argument("--config", help="strict JSON config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE")
    p.add_argument("--output", help="output directory (default: $WIGNERDECAY_OUTPUT or ./output)")
    p.add_argument("--threads", type=int, help="worker budget for optimizers and sweeps")
    p.add_argument("--variant", choices=("fock01", "fock24"))
    p.add_argument("--dephased", action="store_true", default=None)
    p.add_argument("--state", help="oscillator density-matrix JSON to analyze instead of a fresh run")
    p.add_argument("--times", help="comma-separated Wigner snapshot times")
    p.add_argument("--preset", choices=("coupling", "omega0", "temperature", "decay"))
    p.add_argument("--ancillas", type=int)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def load_config(args) -> RunConfig:
    """Config file (or defaults) plus ``--set`` overrides and dedicated flags."""
    doc: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file {str(path)!r} does not exist")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(doc, dict):
            raise ConfigError("config: expected a JSON object")
    sets = list(args.overrides)
    flag_map = {
        "threads": args.threads,
        "variant": args.variant,
        "dephased": args.dephased,
        "state": args.state,
        "preset": args.preset,
        "ancillas": args.ancillas,
    }
    for key, value in flag_map.items():
        if value is not None:
            sets.append(f"options.{key}={json.dumps(value)}")
    if args.times:
        try:
            times = [float(t) for t in args.times.split(",") if t.strip()]
        except ValueError:
            raise ConfigError(f"--times: could not parse {args.times!r}") from None
        sets.append(f"options.times={json.dumps(times)}")
    if args.output:
        sets.append(f"output_dir={json.dumps(args.output)}")
    return config_from_dict(apply_overrides(doc, sets))


def provenance(cfg: RunConfig, command: str) -> str:
    # The output location is not an input of the computation; leaving it out
    # keeps files from identical configs byte-identical.
    config = {k: v for k, v in cfg.to_dict().items() if k != "output_dir"}
    doc = {"package": "wignerdecay", "version": __version__, "command": command, "config": config}
    return json.dumps(doc, sort_keys=True)


def _optimal_state(cfg: RunConfig):
    ev = evolve(None, cfg.model, cfg.profile, cfg.bath, cfg.time)
    series = negativity_series(ev, cfg.phase_grid)
    return ev, series


def _input_state(cfg: RunConfig) -> DensityMatrix:
    if cfg.options.state:
        return load_density(cfg.options.state)
    ev, series = _optimal_state(cfg)
    return ev.state(series.index_star)


def _write_json(path: Path, doc: dict) -> Path:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _json_default(o):
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def cmd_simulate(cfg: RunConfig, out: Path) -> list[Path]:
    ev = evolve(None, cfg.model, cfg.profile, cfg.bath, cfg.time)
    path = out / "evolution.csv"
    ev.write_csv(path, provenance(cfg, "simulate"))
    return [path, *ev.write_state_json(out / "states", every=cfg.options.state_every)]


def cmd_wigner(cfg: RunConfig, out: Path) -> list[Path]:
    ev = evolve(None, cfg.model, cfg.profile, cfg.bath, cfg.time)
    times = cfg.options.times
    if not times:
        times = (negativity_series(ev, cfg.phase_grid).t_star,)
    paths = []
    for t in times:
        i = int(np.argmin(np.abs(ev.times - t)))
        wm = wigner_map(ev.reduced[i], cfg.phase_grid)
        path = out / f"wigner_t{ev.times[i]:.4f}.csv"
        wm.write_csv(path, provenance(cfg, "wigner") + f"\nt = {ev.times[i]:.10g}")
        paths.append(path)
    return paths


def cmd_negativity(cfg: RunConfig, out: Path) -> list[Path]:
    ev, series = _optimal_state(cfg)
    path = out / "negativity.csv"
    series.write_csv(path, provenance(cfg, "negativity"))
    state_path = out / "rho_star.json"
    save_density(ev.state(series.index_star), state_path)
    return [path, state_path]


def cmd_core_state(cfg: RunConfig, out: Path) -> list[Path]:
    rho = _input_state(cfg)
    core = optimize_core(rho, workers=cfg.options.threads)
    js = _write_json(out / "core_state.json", {"provenance": json.loads(provenance(cfg, "core-state")), **core.to_dict()})
    csv_path = out / "core_modulus.csv"
    write_modulus_csv(core.core, csv_path, header=provenance(cfg, "core-state"))
    return [js, csv_path]


def cmd_fidelity(cfg: RunConfig, out: Path) -> list[Path]:
    rho = _input_state(cfg)
    res = optimize_fidelity(rho, cfg.options.variant, cfg.options.dephased, workers=cfg.options.threads)
    name = f"fidelity_{cfg.options.variant}{'_dephased' if cfg.options.dephased else ''}.json"
    return [_write_json(out / name, {"provenance": json.loads(provenance(cfg, "fidelity")), **res.to_dict()})]


def cmd_qfi(cfg: RunConfig, out: Path) -> list[Path]:
    res = qfi_phase(_input_state(cfg))
    return [_write_json(out / "qfi.json", {"provenance": json.loads(provenance(cfg, "qfi")), **res.to_dict()})]


def cmd_sweep(cfg: RunConfig, out: Path) -> list[Path]:
    base = dict(profile=cfg.profile, bath=cfg.bath, time=cfg.time, grid=cfg.grid, metric=cfg.options.metric)
    if cfg.options.axes:
        spec = SweepSpec(model=cfg.model, axes=cfg.options.axes, **base)
    else:
        spec = preset(cfg.options.preset, cfg.model, **{k: v for k, v in base.items() if k != "profile"})
        if cfg.options.preset != "decay":
            spec = replace(spec, profile=cfg.profile)
        elif cfg.profile.kind != "instant":
            spec = replace(spec, profile=replace(spec.profile, kind=cfg.profile.kind))
    result = run_sweep(spec, workers=cfg.options.threads)
    return list(result.write(out / "sweep", provenance(cfg, "sweep")))


def cmd_scaling(cfg: RunConfig, out: Path) -> list[Path]:
    n = cfg.options.ancillas
    model = cfg.model
    if n == 3 and model.fock_dim < 25:
        model = model.with_(fock_dim=30)
    grid = cfg.grid if n == cfg.model.n_ancillas else None
    res = scaling_run(n, model, cfg.profile, cfg.bath, cfg.time, grid, workers=cfg.options.threads)
    js = _write_json(
        out / f"scaling_{n}.json",
        {"provenance": json.loads(provenance(cfg, "scaling")), "n_ancillas": n, **res.to_dict()},
    )
    csv_path = out / f"scaling_{n}_core_modulus.csv"
    write_modulus_csv(res.core.core, csv_path, n_max=12, header=provenance(cfg, "scaling"))
    return [js, csv_path]


HANDLERS = {
    "simulate": cmd_simulate,
    "wigner": cmd_wigner,
    "negativity": cmd_negativity,
    "core-state": cmd_core_state,
    "fidelity": cmd_fidelity,
    "qfi": cmd_qfi,
    "sweep": cmd_sweep,
    "scaling": cmd_scaling,
}


def run_command(name: str, cfg: RunConfig) -> list[Path]:
    """Run ``name`` with ``cfg`` and return the files written."""
    if name not in HANDLERS:
        raise ConfigError(f"unknown command {name!r}; choose from {', '.join(COMMANDS)}")
    out = cfg.resolved_output()
    out.mkdir(parents=True, exist_ok=True)
    return HANDLERS[name](cfg, out)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args)
        if args.command not in HANDLERS:
            raise ConfigError(f"unknown command {args.command!r}; choose from {', '.join(COMMANDS)}")
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            paths = run_command(args.command, cfg)
    except (ConfigError, InvalidStateError, FileNotFoundError) as exc:
        print(f"wignerdecay: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, DimensionError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"wignerdecay: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
