"""Command-line front end: config ingestion, job orchestration, serialization.

Exit codes: 0 success, 1 failed validation check, 2 config error, 3 numeric
failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys as _sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import MalformedGrid, ParameterError, PolaritonError
from .model import PulseSchedule, SystemParams, derived_quantities, validate_params
from .peaks import grid_peak_report, load_grid
from .propagator import build_matrix, decompose
from .signals import Axis, SpectrumGrid, linear_absorption, pump_probe, pump_probe_slices, twod_signal
from .validate import run_suite
from .vibrations import VibKernel, kernel_from_params


class ConfigError(ValueError):
    """Bad job configuration; maps to exit code 2."""


_TOP_KEYS = {"system", "kernel", "grids", "t_wait", "stokes_orders", "output", "workers"}
_KERNEL_KEYS = {"tail_eps", "m_max"}
_GRID_KEYS = {"start", "stop", "count"}
_GRID_SECTIONS = {"absorption", "omega1", "omega3", "pump_probe"}
_OUTPUT_KEYS = {"directory", "formats"}
_FORMATS = {"csv", "json"}


@dataclass
class JobSpec:
    mode: str
    params: SystemParams
    kernel: VibKernel
    grids: dict[str, Axis]
    t_list: list[float]
    stokes_orders: tuple[int, ...]
    out_dir: Path
    formats: tuple[str, ...]
    workers: int
    config_echo: dict = field(default_factory=dict)


def _reject_unknown(section: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _axis(section: dict, name: str, offset: float) -> Axis:
    _reject_unknown(section, _GRID_KEYS, f"grids.{name}")
    missing = sorted(_GRID_KEYS - set(section))
    if missing:
        raise ConfigError(f"grids.{name} missing key(s): {', '.join(missing)}")
    try:
        return Axis(float(section["start"]), float(section["stop"]),
                    int(section["count"]), offset, name)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"grids.{name}: {exc}") from exc


def _resolve_workers(value) -> int:
    workers = int(value)
    if workers < 0:
        raise ConfigError("workers must be >= 0")
    if workers == 0:
        workers = int(os.environ.get("POLARITON2DCS_WORKERS", "1"))
    return max(workers, 1)


def build_jobspec(mode: str, config: dict, out_override: str | None = None,
                  formats_override: str | None = None, workers_override: int | None = None,
                  t_list_override: str | None = None) -> JobSpec:
    if not isinstance(config, dict):
        raise ConfigError("config root must be a JSON object")
    _reject_unknown(config, _TOP_KEYS, "config")
    if "system" not in config:
        raise ConfigError("config needs a 'system' section")
    try:
        params = validate_params(config["system"])
    except ParameterError as exc:
        raise ConfigError(f"system section invalid: {exc}") from exc

    kernel_cfg = config.get("kernel", {})
    _reject_unknown(kernel_cfg, _KERNEL_KEYS, "kernel")
    if "m_max" in kernel_cfg and kernel_cfg["m_max"] is not None:
        kernel = kernel_from_params(params, m_max=int(kernel_cfg["m_max"]))
    else:
        kernel = kernel_from_params(params, tail_eps=float(kernel_cfg.get("tail_eps", 1e-10)))

    grids_cfg = config.get("grids", {})
    _reject_unknown(grids_cfg, _GRID_SECTIONS, "grids")
    grids = {name: _axis(sec, name, params.axis_offset) for name, sec in grids_cfg.items()}

    required = {"absorption": ("absorption",), "twod": ("omega1", "omega3"),
                "pump-probe": ("pump_probe",)}.get(mode, ())
    for name in required:
        if name not in grids:
            raise ConfigError(f"mode '{mode}' needs grids.{name}")

    if t_list_override is not None:
        try:
            t_list = [float(tok) for tok in t_list_override.split(",") if tok.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad --t-list: {exc}") from exc
    else:
        raw_t = config.get("t_wait", 0.0)
        t_list = [float(t) for t in raw_t] if isinstance(raw_t, (list, tuple)) else [float(raw_t)]
    if mode in ("twod", "pump-probe", "slices"):
        if not t_list:
            raise ConfigError(f"mode '{mode}' needs at least one waiting time")
        for t in t_list:
            try:
                PulseSchedule(t1=0.0, t2=0.0, t3=t)  # delays must be ordered and finite
            except ParameterError as exc:
                raise ConfigError(f"bad waiting time {t}: {exc}") from exc

    orders = tuple(int(m) for m in config.get("stokes_orders", (1, 2)))
    if any(m < 1 for m in orders):
        raise ConfigError("stokes_orders must be >= 1")

    out_cfg = config.get("output", {})
    _reject_unknown(out_cfg, _OUTPUT_KEYS, "output")
    out_dir = Path(out_override or out_cfg.get("directory", "."))
    if formats_override is not None:
        formats = tuple(tok.strip() for tok in formats_override.split(",") if tok.strip())
    else:
        formats = tuple(out_cfg.get("formats", ("csv",)))
    bad = set(formats) - _FORMATS
    if bad or not formats:
        raise ConfigError(f"formats must be a nonempty subset of {sorted(_FORMATS)}")

    workers = _resolve_workers(workers_override if workers_override is not None
                               else config.get("workers", 0))
    return JobSpec(mode=mode, params=params, kernel=kernel, grids=grids,
                   t_list=t_list, stokes_orders=orders, out_dir=out_dir,
                   formats=formats, workers=workers, config_echo=config)


# ---------------------------------------------------------------------------
# serialization


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def params_hash(spec: JobSpec) -> str:
    payload = {
        "system": {k: getattr(spec.params, k) for k in (
            "n_molecules", "g", "delta_x", "delta_c", "gamma_x", "gamma_c",
            "omega_v", "gamma_v", "lambda_hr", "omega_ref", "dipole", "phase")},
        "kernel": {"m_max": spec.kernel.m_max, "tail_eps": spec.kernel.tail_eps},
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _meta_lines(grid: SpectrumGrid) -> list[str]:
    lines = [f"# signal={grid.signal}"]
    if grid.t_wait is not None:
        lines.append(f"# t_wait={_fmt(grid.t_wait)}")
    for key in sorted(grid.metadata):
        lines.append(f"# {key}={grid.metadata[key]}")
    return lines


def write_csv(path: Path, grid: SpectrumGrid) -> None:
    lines = _meta_lines(grid)
    if grid.axis2 is None:
        lines.append("omega,value")
        for omega, val in zip(grid.axis1.values(), grid.values):
            lines.append(f"{_fmt(omega)},{_fmt(val.real)}")
    else:
        lines.append("omega1,omega3,re,im")
        om1 = grid.axis1.values()
        om3 = grid.axis2.values()
        for u, w1 in enumerate(om1):
            for t, w3 in enumerate(om3):
                val = grid.values[u, t]
                lines.append(f"{_fmt(w1)},{_fmt(w3)},{_fmt(val.real)},{_fmt(val.imag)}")
    path.write_text("\n".join(lines) + "\n")


def _axis_record(axis: Axis | None) -> dict | None:
    if axis is None:
        return None
    return {"start": axis.start, "stop": axis.stop, "count": axis.count,
            "offset": axis.offset, "label": axis.label}


def write_json_grid(path: Path, grid: SpectrumGrid) -> None:
    doc = {
        "signal": grid.signal,
        "axis1": _axis_record(grid.axis1),
        "axis2": _axis_record(grid.axis2),
        "t_wait": grid.t_wait,
        "values_re": np.real(grid.values).tolist(),
        "values_im": np.imag(grid.values).tolist(),
        "metadata": grid.metadata,
    }
    path.write_text(json.dumps(doc, sort_keys=True) + "\n")


def _write_grid(spec: JobSpec, grid: SpectrumGrid, stem: str, written: list[str]) -> None:
    grid.metadata["params_hash"] = params_hash(spec)
    grid.metadata["code_version"] = __version__
    for fmt in spec.formats:
        name = f"{stem}.{fmt}"
        path = spec.out_dir / name
        if fmt == "csv":
            write_csv(path, grid)
        else:
            write_json_grid(path, grid)
        written.append(name)


def write_manifest(spec: JobSpec, written: list[str], wall_time: float,
                   extra: dict | None = None) -> Path:
    manifest = {
        "mode": spec.mode,
        "config": spec.config_echo,
        "params_hash": params_hash(spec),
        "code_version": __version__,
        "wall_time_s": wall_time,
        "workers": spec.workers,
        "truncation": {"m_max": spec.kernel.m_max, "tail_eps": spec.kernel.tail_eps},
        "unit_bridge_rad_per_cm_fs": 1.8836515673088532e-4,
        "outputs": written,
        "created_unix": time.time(),
    }
    if extra:
        manifest.update(extra)
    path = spec.out_dir / "manifest.json"
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)
    return path


# ---------------------------------------------------------------------------
# job execution


def _t_stem(t_wait: float) -> str:
    return f"{t_wait:g}".replace("-", "m").replace(".", "p")


def run_job(spec: JobSpec) -> list[str]:
    """Compute the requested spectra and write data files plus the manifest."""
    start = time.perf_counter()
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    dec = decompose(build_matrix(spec.params))
    written: list[str] = []
    extra: dict = {}

    if spec.mode == "absorption":
        grid = linear_absorption(spec.params, dec, spec.kernel,
                                 spec.grids["absorption"], workers=spec.workers)
        _write_grid(spec, grid, "absorption", written)
    elif spec.mode == "twod":
        for t_wait in spec.t_list:
            grid = twod_signal(spec.params, dec, spec.kernel, spec.grids["omega1"],
                               spec.grids["omega3"], t_wait, workers=spec.workers)
            _write_grid(spec, grid, f"twod_T{_t_stem(t_wait)}fs", written)
    elif spec.mode == "pump-probe":
        for t_wait in spec.t_list:
            grid = pump_probe(spec.params, dec, spec.kernel,
                              spec.grids["pump_probe"], t_wait, workers=spec.workers)
            _write_grid(spec, grid, f"pump_probe_T{_t_stem(t_wait)}fs", written)
    elif spec.mode == "slices":
        report = pump_probe_slices(spec.params, dec, spec.kernel,
                                   spec.t_list, spec.stokes_orders)
        doc = {
            "t_list": report.t_list.tolist(),
            "upper_polariton": _trace_record(report.upper_polariton),
            "stokes": {str(m): _trace_record(tr) for m, tr in report.stokes.items()},
        }
        (spec.out_dir / "slices.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        written.append("slices.json")
    elif spec.mode == "eig":
        doc = _eig_record(spec)
        (spec.out_dir / "eig.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        written.append("eig.json")
    elif spec.mode == "validate":
        results = run_suite()
        for res in results:
            print(res.line())
        extra["oracle_results"] = [
            {"name": r.name, "max_err": r.max_err, "tol": r.tol, "passed": r.passed}
            for r in results
        ]
        (spec.out_dir / "validate.json").write_text(
            json.dumps(extra["oracle_results"], indent=2) + "\n")
        written.append("validate.json")
        if not all(r.passed for r in results):
            write_manifest(spec, written, time.perf_counter() - start, extra)
            raise _ValidationFailed()
    else:
        raise ConfigError(f"unknown mode '{spec.mode}'")

    write_manifest(spec, written, time.perf_counter() - start, extra)
    return written


class _ValidationFailed(Exception):
    pass


def _trace_record(trace) -> dict:
    return {
        "omega_abs": trace.omega_abs,
        "formula": trace.formula.tolist(),
        "exact": trace.exact.tolist(),
        "fitted_scale": trace.fitted_scale,
        "residual": trace.residual,
    }


def _eig_record(spec: JobSpec) -> dict:
    dec = decompose(build_matrix(spec.params))
    derived = derived_quantities(spec.params)
    offset = spec.params.axis_offset
    return {
        "labels": list(dec.labels),
        "decay_rates": [mu.real for mu in dec.eigenvalues],
        "frequencies_rotating": [mu.imag for mu in dec.eigenvalues],
        "frequencies_absolute": [mu.imag + offset for mu in dec.eigenvalues],
        "rabi_splitting": derived.rabi_splitting,
        "bright_absolute": list(derived.bright_absolute),
        "polaron_shift": derived.polaron_shift,
        "params_hash": params_hash(spec),
    }


# ---------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polariton-2dcs",
        description="Linear, two-dimensional and pump-probe spectra of vibronic cavity polaritons.",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in ("absorption", "twod", "pump-probe", "slices", "eig", "validate"):
        p = sub.add_parser(mode)
        p.add_argument("--config", required=(mode != "validate"),
                       help="JSON job configuration")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--format", default=None, help="comma-separated subset of csv,json")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (0 = POLARITON2DCS_WORKERS or 1)")
        p.add_argument("--t-list", default=None, help="comma-separated waiting times in fs")
    peaks_p = sub.add_parser("peaks")
    peaks_p.add_argument("grid_file", help="CSV or JSON grid produced by this tool")
    peaks_p.add_argument("--report", default=None, help="write the peak list to this JSON file")
    peaks_p.add_argument("--min-height", type=float, default=0.01,
                         help="discard peaks below this fraction of the maximum")
    return parser


def _run_peaks(args) -> int:
    try:
        grid = load_grid(args.grid_file)
    except MalformedGrid as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return 2
    report = grid_peak_report(grid, min_rel_height=args.min_height)
    text = json.dumps(report, indent=2)
    if args.report:
        try:
            Path(args.report).write_text(text + "\n")
        except OSError as exc:
            print(f"i/o error: {exc}", file=_sys.stderr)
            return 4
    print(text)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.mode == "peaks":
        return _run_peaks(args)

    config: dict = {}
    if args.config is not None:
        try:
            config = json.loads(Path(args.config).read_text())
        except OSError as exc:
            print(f"config error: cannot read {args.config}: {exc}", file=_sys.stderr)
            return 2
        except json.JSONDecodeError as exc:
            print(f"config error: {args.config} is not valid JSON: {exc}", file=_sys.stderr)
            return 2
    elif args.mode == "validate":
        config = {"system": {
            "n_molecules": 10, "g": 1800.0 / 10 ** 0.5, "gamma_x": 1.0, "gamma_c": 0.9,
            "omega_v": 1200.0, "gamma_v": 20.0, "lambda_hr": 1.0, "omega_ref": 16113.0,
        }}

    try:
        spec = build_jobspec(args.mode, config, out_override=args.out,
                             formats_override=args.format, workers_override=args.workers,
                             t_list_override=args.t_list)
    except (ConfigError, ParameterError, ValueError) as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return 2

    try:
        run_job(spec)
    except _ValidationFailed:
        print("validation suite failed", file=_sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return 2
    except PolaritonError as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=_sys.stderr)
        return 3
    except (OSError, NotADirectoryError) as exc:
        print(f"i/o error: {exc}", file=_sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
