"""Command-line scenario runner.

Every computing subcommand resolves a configuration document (from
``--config``, a built-in scenario, or flags), validates it, and writes a
CSV table plus a JSON sidecar into the output directory.  The sidecar is
itself a valid configuration: feeding it back through ``--config``
reproduces the CSV byte for byte.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 acceptance failure.  The worker thread count is read from the
``QDCAVITY_THREADS`` environment variable.
"""

from __future__ import annotations

import argparse
import contextlib
import copy
import csv
import io
import json
import os
import sys
import tempfile
import warnings
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, config
from .analytic import BlochParams, spectrum_closed_form
from .correlations import convolve_irf, g1, g1_until_decayed, g2, g2_zero, spectrum
from .detection import make_field, sweep_detuning, sweep_filter, sweep_lo, sweep_power
from .errors import (
    ConfigError,
    DomainError,
    InvalidCutoffError,
    InvalidFilterError,
    InvalidParamsError,
    QDCavityError,
)
from .hilbert import CompositeSpace
from .hom import ExtrapolationWarning, HomConfig, g2_cross, g2_parallel, visibility
from .lindblad import choose_cutoff, solve
from .mcwf import MOMENT_NAMES, TrajectoryConfig, g2_zero_from_moments, moment_operators, run_trajectories
from .params import TWO_PI, SystemParams

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_ACCEPTANCE = 4

THREADS_ENV = "QDCAVITY_THREADS"
LOCK_NAME = ".qdcavity.lock"
_UMASK = os.umask(0o022)
os.umask(_UMASK)
DEFAULT_RABI_RATIO = 0.1
CONFIG_ERRORS = (ConfigError, InvalidParamsError, InvalidFilterError, InvalidCutoffError)

DEFAULT_GRIDS = {
    "lo": {"start": -12.0, "stop": 12.0, "num": 481},
    "detuning": {"start": -60.0, "stop": 60.0, "num": 241},
    "power": {"start": 0.01, "stop": 3.0, "num": 30, "spacing": "log"},
    "filter": {"start": 0.0, "stop": 1.0, "num": 101},
}


def worker_threads() -> int | None:
    """Thread count from ``QDCAVITY_THREADS``, or None when unset."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


# ---------------------------------------------------------------- output files


def csv_text(columns: dict) -> str:
    """CSV with one header row and LF endings.

    Floats use their shortest round-trip representation and complex
    columns are split into ``_re`` and ``_im``.
    """
    names, data = [], []
    for name, values in columns.items():
        arr = np.asarray(values)
        if np.iscomplexobj(arr):
            names += [f"{name}_re", f"{name}_im"]
            data += [arr.real, arr.imag]
        else:
            names.append(name)
            data.append(arr)
    lengths = {len(d) for d in data}
    if len(lengths) != 1:
        raise ValueError(f"columns differ in length: {sorted(lengths)}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in zip(*data):
        writer.writerow([_cell(x) for x in row])
    return buf.getvalue()


def _cell(x) -> str:
    if isinstance(x, (str, np.str_)):
        return str(x)
    return repr(float(x))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if np.isfinite(value) else None
    return obj


def atomic_write(path: Path, data: str):
    """Write ``data`` to ``path`` through a temporary file and a rename."""
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        os.chmod(tmp, 0o666 & ~_UMASK)
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


@contextlib.contextmanager
def output_lock(directory: Path):
    """Hold exclusive ownership of ``directory`` for one run."""
    directory.mkdir(parents=True, exist_ok=True)
    lock = directory / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(f"{directory} is in use by another run (remove {lock} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(lock)


def svg_text(columns: dict, title: str) -> str | None:
    """Line plot of every numeric column against the first, or None without matplotlib."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return None
    names = list(columns)
    x = np.asarray(columns[names[0]])
    if x.dtype.kind not in "fiu":
        return None
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in names[1:]:
        y = np.asarray(columns[name])
        if y.dtype.kind in "fiu" and name != "n_max":
            ax.plot(x, y, label=name)
    ax.set_xlabel(names[0])
    ax.set_title(title)
    ax.legend()
    buf = io.StringIO()
    with matplotlib.rc_context({"svg.hashsalt": "qdcavity"}):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


# ------------------------------------------------------------------- runners


def _derived(p: SystemParams) -> dict:
    return {
        "cooperativity": p.cooperativity,
        "purcell_factor": p.purcell_factor,
        "critical_photon_number": p.critical_photon_number,
        "gamma_par_enh_GHz": p.gamma_par_enh / TWO_PI,
        "rabi_frequency_GHz": p.rabi_frequency / TWO_PI,
        "rabi_ratio": p.rabi_ratio,
    }


def _cutoff(doc: dict, p: SystemParams) -> int:
    num = doc["numerics"]
    n = num["n_max"] if num["n_max"] is not None else choose_cutoff(p, tail_tol=num["tail_tol"])
    num["n_max"] = int(n)
    return int(n)


def _steady(doc: dict, p: SystemParams):
    n = _cutoff(doc, p)
    L, rho = solve(p, n)
    residual = float(np.linalg.norm(L.generator @ rho.vec()))
    return n, L, rho, {"steady_state": residual}


def _field(p: SystemParams, scen: dict):
    kind = scen["field"]
    extra = None
    if kind == "SL":
        extra = scen["e_lo_ratio"] * p.a_in
    elif kind == "filtered":
        extra = scen["t_f"]
    return make_field(kind, p, extra)


def run_g2(doc: dict, p: SystemParams):
    scen = doc["scenario"]
    n, L, rho, residuals = _steady(doc, p)
    taus = np.linspace(0.0, scen["tau_max"], scen["n_tau"])
    trace = g2(L, rho, _field(p, scen), taus)
    cols = {"tau_ns": taus, "g2": trace.values}
    if scen.get("irf_sigma_ps"):
        cols["g2_irf"] = convolve_irf(trace, scen["irf_sigma_ps"] / 1000).values
    results = {"g2_zero": trace.values[0], "flux": trace.flux}
    return cols, {"n_max": n, "residuals": residuals, "results": results}


def run_sweep(doc: dict, p: SystemParams):
    scen = doc["scenario"]
    which = scen["sweep"]
    axis = config.grid_values(scen["grid"])
    workers = worker_threads()
    n_max = doc["numerics"]["n_max"]
    if which in ("lo", "filter"):
        n = _cutoff(doc, p)
        res = sweep_lo(p, axis, n) if which == "lo" else sweep_filter(p, axis, n)
    else:
        kind = scen["field"]
        if which == "power" and kind == "SL":
            raise ConfigError("scenario: the SL field is not supported in power sweeps")
        extra = scen.get("t_f") if kind == "filtered" else None
        if kind == "SL":
            extra = scen["e_lo_ratio"] * p.a_in
        if which == "detuning":
            res = sweep_detuning(p, TWO_PI * axis, kind, n_max, extra, workers)
        else:
            res = sweep_power(p, axis, kind, n_max, extra, workers)
    cols = res.columns()
    if which == "detuning":
        cols = {"detuning_GHz": axis, **{k: v for k, v in cols.items() if k != "detuning"}}
    return cols, {"n_max": doc["numerics"]["n_max"], "residuals": {},
                  "results": {"points": len(axis)}}


def run_spectrum(doc: dict, p: SystemParams):
    scen = doc["scenario"]
    n, L, rho, residuals = _steady(doc, p)
    trace = g1_until_decayed(L, rho, _field(p, scen), dt=scen["dt"])
    omega_max = TWO_PI * scen["omega_max_ghz"] if "omega_max_ghz" in scen else None
    spec = spectrum(trace, omega_max=omega_max)
    cols = {"omega_2pi_GHz": spec.omegas / TWO_PI, "density": spec.density}
    residuals["g1_window"] = spec.meta["residual"]
    results = {
        "coherent_weight": spec.coherent_weight,
        "total_weight": spec.total_weight(),
        "tau_max_ns": spec.meta["tau_max"],
        "density_unit": "1/(rad/ns)",
    }
    if scen["compare_closed_form"]:
        try:
            closed = spectrum_closed_form(BlochParams.from_system(p), spec.omegas)
        except DomainError as exc:
            results["closed_form"] = f"unavailable: {exc}"
        else:
            cols["density_closed_form"] = closed.density
            results["closed_form_coherent_weight"] = closed.coherent_weight
            peak = float(np.max(closed.density))
            results["max_abs_gap_over_peak"] = float(np.max(np.abs(spec.density - closed.density))) / peak
    return cols, {"n_max": n, "residuals": residuals, "results": results}


def run_hom(doc: dict, p: SystemParams):
    scen = doc["scenario"]
    n, L, rho, residuals = _steady(doc, p)
    fld = _field(p, scen)
    taus = np.linspace(0.0, scen["tau_max"], scen["n_tau"])
    t2 = g2(L, rho, fld, taus)
    t1 = g1(L, rho, fld, taus)
    cfg = HomConfig(scen["R_A"], 1 - scen["R_A"], scen["R_B"], 1 - scen["R_B"],
                    scen["delta_t_ns"], scen["V0"])
    step = taus[1] - taus[0]
    half = int(round(scen["tau_window"] / step))
    grid = step * np.arange(-half, half + 1)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ExtrapolationWarning)
        cross = g2_cross(t2, cfg, grid)
        par = g2_parallel(t2, t1, cfg, grid)
    c, q = cross.values, par.values
    with np.errstate(divide="ignore", invalid="ignore"):
        vis = np.where(c > 0, (c - q) / c, np.nan)
    results = {
        "visibility_at_zero": visibility(cross, par, 0.0),
        "extrapolated": any(issubclass(w.category, ExtrapolationWarning) for w in caught),
    }
    cols = {"tau_ns": grid, "g2_cross": c, "g2_parallel": q, "visibility": vis}
    return cols, {"n_max": n, "residuals": residuals, "results": results}


def run_traj(doc: dict, p: SystemParams):
    scen = doc["scenario"]
    n, _, rho, residuals = _steady(doc, p)
    space = CompositeSpace(n)
    cfg = TrajectoryConfig(scen["n_traj"], scen["t_end"], scen["dt_max"],
                           doc["numerics"]["seed"], scen["burn_in"])
    est = run_trajectories(p, space, cfg, worker_threads())
    names, mean, err, exact = [], [], [], []
    for name, op in zip(MOMENT_NAMES, moment_operators(space)):
        names.append(name)
        mean.append(est.mean(name))
        err.append(est.stderr(name))
        exact.append(rho.expect(op))
    for kind in ("reflected", "transmitted"):
        fld = make_field(kind, p)
        value, sd = g2_zero_from_moments(est, fld)
        names.append(f"g2_zero_{kind}")
        mean.append(complex(value))
        err.append(complex(sd))
        exact.append(complex(g2_zero(fld, rho)))
    cols = {
        "quantity": names,
        "trajectory": np.array(mean),
        "stderr": np.array(err),
        "master_equation": np.array(exact),
    }
    results = {"eigen_propagator": est.meta["eigen_propagator"], "n_traj": scen["n_traj"]}
    return cols, {"n_max": n, "residuals": residuals, "results": results}


RUNNERS = {"g2": run_g2, "sweep": run_sweep, "spectrum": run_spectrum, "hom": run_hom,
           "traj": run_traj}


def execute(doc: dict, stem: str) -> list[Path]:
    """Run a validated document and write its files; returns the written paths."""
    doc = copy.deepcopy(doc)
    doc.pop("provenance", None)
    out = Path(doc["output"]["directory"])
    with output_lock(out):
        p = config.build_params(doc)
        cols, info = RUNNERS[doc["scenario"]["kind"]](doc, p)
        table = csv_text(cols)
        files = [out / f"{stem}.csv", out / f"{stem}.json"]
        plot = None
        if "svg" in doc["output"]["formats"]:
            plot = svg_text(cols, stem)
            if plot is None:
                print("svg output skipped: matplotlib unavailable or no numeric axis",
                      file=sys.stderr)
            else:
                files.append(out / f"{stem}.svg")
        sidecar = dict(doc)
        sidecar["provenance"] = _jsonable({
            "tool": "qdcavity",
            "version": __version__,
            "stem": stem,
            "seed": doc["numerics"]["seed"],
            "n_max": info["n_max"],
            "params_GHz": p.to_ghz(),
            "derived": _derived(p),
            "residuals": info["residuals"],
            "results": info["results"],
            "columns": list(table.split("\n", 1)[0].split(",")),
        })
        atomic_write(files[0], table)
        atomic_write(files[1], json.dumps(sidecar, indent=2) + "\n")
        if plot is not None:
            atomic_write(files[2], plot)
    return files


# ----------------------------------------------------------------- documents


def _formats(text: str) -> list[str]:
    items = [x.strip() for x in text.split(",") if x.strip()]
    if not items:
        raise ConfigError("--format needs at least one of csv, svg")
    return items


def build_document(args, kind: str, settings: dict, raw: dict | None = None) -> dict:
    """Merge a base document with command-line overrides and validate it."""
    if raw is None and getattr(args, "config", None):
        raw = config.read(args.config)
    if raw is None:
        raw = {"params": {"preset": "symmetric", "rabi_ratio": DEFAULT_RABI_RATIO},
               "scenario": {"kind": kind}}
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    raw = copy.deepcopy(raw)
    scenario = raw.setdefault("scenario", {})
    if not isinstance(scenario, dict):
        raise ConfigError("scenario: must be a mapping")
    if kind is not None and scenario.setdefault("kind", kind) != kind:
        raise ConfigError(f"scenario: configuration describes a {scenario['kind']!r} run, not {kind!r}")
    scenario.update({k: v for k, v in settings.items() if v is not None})
    params = raw.setdefault("params", {})
    if args.preset:
        params["preset"] = args.preset
    if args.rabi_ratio is not None:
        params.pop("a_in", None)
        params["rabi_ratio"] = args.rabi_ratio
    if args.seed is not None:
        raw.setdefault("numerics", {})["seed"] = args.seed
    if args.out:
        raw.setdefault("output", {})["directory"] = args.out
    if args.format:
        raw.setdefault("output", {})["formats"] = _formats(args.format)
    return config.validate(raw)


def _report(files: list[Path]) -> int:
    for f in files:
        print(f)
    return EXIT_OK


def cmd_g2(args) -> int:
    doc = build_document(args, "g2", {
        "field": args.field, "e_lo_ratio": args.e_lo_ratio, "t_f": args.t_f,
        "tau_max": args.tau_max, "n_tau": args.n_tau, "irf_sigma_ps": args.irf_ps,
    })
    return _report(execute(doc, "g2"))


def cmd_sweep(args) -> int:
    raw = config.read(args.config) if args.config else None
    which = args.which or ((raw or {}).get("scenario") or {}).get("sweep")
    if which is None:
        raise ConfigError("sweep: name the swept quantity (lo, detuning, power, filter)")
    grid = dict(DEFAULT_GRIDS[which])
    if raw and isinstance(raw.get("scenario"), dict) and raw["scenario"].get("sweep") == which:
        grid = dict(raw["scenario"].get("grid", grid))
    for key, value in (("start", args.start), ("stop", args.stop), ("num", args.num)):
        if value is not None:
            grid[key] = value
    if args.log:
        grid["spacing"] = "log"
    doc = build_document(args, "sweep", {
        "sweep": which, "grid": grid, "field": args.field, "e_lo_ratio": args.e_lo_ratio,
        "t_f": args.t_f,
    }, raw)
    return _report(execute(doc, f"sweep_{which}"))


def cmd_spectrum(args) -> int:
    doc = build_document(args, "spectrum", {
        "field": args.field, "e_lo_ratio": args.e_lo_ratio, "t_f": args.t_f, "dt": args.dt,
        "omega_max_ghz": args.omega_max_ghz,
        "compare_closed_form": True if args.compare_closed_form else None,
    })
    return _report(execute(doc, "spectrum"))


def cmd_hom(args) -> int:
    doc = build_document(args, "hom", {
        "field": args.field, "e_lo_ratio": args.e_lo_ratio, "t_f": args.t_f,
        "delta_t_ns": args.delta_t, "V0": args.v0, "R_A": args.r_a, "R_B": args.r_b,
        "tau_max": args.tau_max, "n_tau": args.n_tau, "tau_window": args.tau_window,
    })
    return _report(execute(doc, "hom"))


def cmd_traj(args) -> int:
    doc = build_document(args, "traj", {
        "n_traj": args.n_traj, "t_end": args.t_end, "dt_max": args.dt_max,
    })
    return _report(execute(doc, "traj"))


def scenario_names() -> list[str]:
    folder = resources.files("qdcavity").joinpath("scenarios")
    return sorted(f.name[:-5] for f in folder.iterdir() if f.name.endswith(".json"))


def load_scenario(name: str) -> dict:
    """Raw document of a built-in scenario."""
    if name not in scenario_names():
        raise ConfigError(f"unknown scenario {name!r}; available: {', '.join(scenario_names())}")
    text = resources.files("qdcavity").joinpath("scenarios", f"{name}.json").read_text("utf-8")
    return json.loads(text)


def cmd_scenario(args) -> int:
    if args.list or not args.name:
        for name in scenario_names():
            print(name)
        return EXIT_OK
    raw = load_scenario(args.name)
    doc = build_document(args, None, {}, raw)
    return _report(execute(doc, args.name))


def cmd_validate(args) -> int:
    from .acceptance import CHECKS

    if args.only:
        try:
            numbers = [int(x) for x in args.only.split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"--only expects comma-separated criterion numbers, got {args.only!r}") from None
        unknown = [k for k in numbers if k not in CHECKS]
        if unknown:
            raise ConfigError(f"unknown criteria {unknown}; choose from {sorted(CHECKS)}")
    else:
        numbers = sorted(CHECKS)
    passed = True
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for k in numbers:
            result = CHECKS[k]()
            print(result.line(), flush=True)
            passed &= result.passed
    return EXIT_OK if passed else EXIT_ACCEPTANCE


# -------------------------------------------------------------------- parser


def _common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", metavar="PATH", help="JSON or YAML configuration or sidecar")
    parser.add_argument("--preset", metavar="NAME", help="parameter preset (symmetric, device, ...)")
    parser.add_argument("--out", metavar="DIR", help="output directory")
    parser.add_argument("--seed", type=int, metavar="N", help="random seed")
    parser.add_argument("--format", metavar="LIST", help="csv or csv,svg")
    parser.add_argument("--rabi-ratio", type=float, metavar="X",
                        help="drive strength as Omega / enhanced emitter decay rate")


def _field_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--field", choices=config.FIELD_KINDS, help="detected field")
    parser.add_argument("--e-lo-ratio", type=float, help="LO amplitude over a_in (SL field)")
    parser.add_argument("--t-f", type=float, help="filter transmission (filtered field)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdcavity", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("g2", help="second-order correlation versus delay")
    _common(p)
    _field_flags(p)
    p.add_argument("--tau-max", type=float, help="largest delay in ns")
    p.add_argument("--n-tau", type=int, help="number of delay samples")
    p.add_argument("--irf-ps", type=float, help="Gaussian detector response width in ps")
    p.set_defaults(handler=cmd_g2)

    p = sub.add_parser("sweep", help="g2(0) along one parameter axis")
    p.add_argument("which", nargs="?", choices=sorted(DEFAULT_GRIDS))
    _common(p)
    _field_flags(p)
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p.add_argument("--num", type=int)
    p.add_argument("--log", action="store_true", help="geometric spacing")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("spectrum", help="incoherent emission spectrum")
    _common(p)
    _field_flags(p)
    p.add_argument("--dt", type=float, help="delay step of the g1 trace in ns")
    p.add_argument("--omega-max-ghz", type=float, help="half-width of the frequency grid (GHz)")
    p.add_argument("--compare-closed-form", action="store_true",
                   help="add the two-level closed form as a second column")
    p.set_defaults(handler=cmd_spectrum)

    p = sub.add_parser("hom", help="two-photon interference correlations")
    _common(p)
    _field_flags(p)
    p.add_argument("--delta-t", type=float, help="interferometer delay in ns")
    p.add_argument("--v0", type=float, help="wave-packet overlap")
    p.add_argument("--r-a", type=float, help="reflectance of the first splitter")
    p.add_argument("--r-b", type=float, help="reflectance of the second splitter")
    p.add_argument("--tau-max", type=float, help="largest sampled delay in ns")
    p.add_argument("--n-tau", type=int, help="number of delay samples")
    p.add_argument("--tau-window", type=float, help="half-width of the output window in ns")
    p.set_defaults(handler=cmd_hom)

    p = sub.add_parser("traj", help="quantum trajectory estimates of stationary moments")
    _common(p)
    p.add_argument("--n-traj", type=int)
    p.add_argument("--t-end", type=float)
    p.add_argument("--dt-max", type=float)
    p.set_defaults(handler=cmd_traj)

    p = sub.add_parser("scenario", help="run a built-in scenario by name")
    p.add_argument("name", nargs="?")
    p.add_argument("--list", action="store_true", help="list built-in scenarios")
    _common(p)
    p.set_defaults(handler=cmd_scenario)

    p = sub.add_parser("validate", help="run the acceptance checks")
    p.add_argument("--only", metavar="LIST", help="comma-separated criterion numbers")
    p.set_defaults(handler=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QDCavityError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
