"""Command line runner.

``perfhom run <config> [--output-dir DIR] [--emit-fields NAME,...]`` reads one
INI-style config, runs the named experiment, and writes deterministic outputs
(CSV tables, a JSON summary, optional plain-text field dumps and PNG figures)
into the output directory. Exit codes: 0 success, 2 config error, 3 validation
failure, 4 solver failure, 5 verdict gap-zone.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
from pathlib import Path

import numpy as np
import scipy.fft

from . import __version__
from .experiments import (
    RadiusRegime,
    VerdictGapError,
    delta_localization_sweep,
    iterated_limit_dirichlet,
    iterated_limit_neumann,
    nonlocal_critical_sweep,
)
from .geometry import (
    DomainMask,
    GeometryError,
    HoleShape,
    PerforationSpec,
    build_annulus_mask,
    build_oscillating_mask,
    build_periodic_mask,
    example2_strips_spec,
    mask_to_text,
    OSCILLATING_OMEGA_HI,
    OSCILLATING_OMEGA_LO,
)
from .grid import field_from_function, field_to_text, l2_norm, make_grid
from .homogenize import epsilon_sweep
from .kernels import KernelError, KernelSpec, Profile, RescaleMode, sample, validate_kernel
from .localref import CellGeometry, HoleBC, homogenized_coefficients
from .nonlocal_op import BoundaryCondition, NonlocalOperator, covering_lower_bound
from .solvers import SolverError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_SOLVER = 4
EXIT_VERDICT_GAP = 5

KINDS = (
    "validate-kernel",
    "solve",
    "eigen",
    "covering",
    "epsilon-sweep",
    "delta-sweep",
    "nonlocal-critical",
    "iterated-limits",
    "cell-coefficients",
)

# allowed keys per section; unknown sections or keys are config errors
SCHEMA = {
    "experiment": {
        "kind",
        "rhs",
        "bc",
        "tol",
        "seed",
        "epsilons",
        "deltas",
        "h_over_eps",
        "layer_width",
        "c0",
        "gamma",
        "table",
        "compute_eigenvalue",
    },
    "geometry": {
        "example",
        "omega_lo",
        "omega_hi",
        "cell_lengths",
        "epsilon",
        "gamma",
        "radius_factor",
        "box_lo",
        "box_hi",
        "r_inner",
        "r_outer",
        "spacing",
        "margin",
        "interior_holes_only",
        "hole_radius",
        "cell_spacing",
        "box_size",
        "dim",
        "nodes_per_axis",
    },
    "kernel": {"profile", "delta", "mode"},
    "solver": {"method", "max_iterations", "threads"},
    "output": {"write_fields", "figures"},
}

EXAMPLES = (
    "none",
    "periodic-balls",
    "periodic-box",
    "example1-annulus",
    "example2-strips",
    "oscillating",
)


class ConfigError(ValueError):
    """The config file is missing, malformed, or holds an unsupported value."""


def _floats(text: str) -> tuple[float, ...]:
    toks = text.replace(",", " ").split()
    if not toks:
        raise ConfigError(f"expected at least one number, got {text!r}")
    return tuple(float(t) for t in toks)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


class RunConfig:
    """Parsed and validated view of one config file."""

    def __init__(self, path: Path):
        self.path = path
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        self.raw_text = path.read_text()
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(self.raw_text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config: {exc}") from exc
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]")
            for key in parser[section]:
                if key not in SCHEMA[section]:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
        self._parser = parser
        if not parser.has_option("experiment", "kind"):
            raise ConfigError("missing required key 'kind' in section [experiment]")
        self.kind = parser.get("experiment", "kind").strip()
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; choose one of {KINDS}")

    def get(self, section: str, key: str, default=None, convert=None):
        if not self._parser.has_option(section, key):
            return default
        raw = self._parser.get(section, key).strip()
        if convert is None:
            return raw
        try:
            return convert(raw)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for [{section}] {key} = {raw!r}: {exc}") from exc

    # typed accessors with defaults shared across kinds
    @property
    def rhs_name(self) -> str:
        name = self.get("experiment", "rhs", "one")
        if name not in ("one", "sine"):
            raise ConfigError(f"unknown rhs {name!r}; choose 'one' or 'sine'")
        return name

    @property
    def bc(self) -> BoundaryCondition:
        raw = self.get("experiment", "bc", "dirichlet_holes")
        try:
            return BoundaryCondition(raw)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def tol(self) -> float:
        return self.get("experiment", "tol", 1e-8, float)

    @property
    def seed(self) -> int:
        return self.get("experiment", "seed", 1234, int)

    @property
    def kernel_spec(self) -> KernelSpec:
        profile = self.get("kernel", "profile", "bump")
        delta = self.get("kernel", "delta", 0.5, float)
        mode = self.get("kernel", "mode", "mass1")
        try:
            return KernelSpec(self.geometry_dim, Profile(profile), delta=delta, mode=RescaleMode(mode))
        except (ValueError, KernelError) as exc:
            raise ConfigError(f"bad kernel: {exc}") from exc

    @property
    def geometry_dim(self) -> int:
        example = self.example
        if example == "oscillating":
            return 2
        if self.kind == "iterated-limits":
            return self.get("geometry", "dim", 3, int)
        return len(self.omega_lo)

    @property
    def example(self) -> str:
        ex = self.get("geometry", "example", "none")
        if ex not in EXAMPLES:
            raise ConfigError(f"unknown geometry example {ex!r}; choose one of {EXAMPLES}")
        return ex

    @property
    def omega_lo(self) -> tuple[float, ...]:
        return self.get("geometry", "omega_lo", (0.0, 0.0), _floats)

    @property
    def omega_hi(self) -> tuple[float, ...]:
        return self.get("geometry", "omega_hi", (1.0, 1.0), _floats)

    @property
    def spacing(self) -> float:
        return self.get("geometry", "spacing", 1.0 / 32.0, float)

    @property
    def method(self) -> str:
        m = self.get("solver", "method", "auto")
        if m not in ("auto", "fft", "direct"):
            raise ConfigError(f"unknown solver method {m!r}")
        return m

    @property
    def threads(self) -> int:
        t = self.get("solver", "threads", 1, int)
        if t < 1:
            raise ConfigError("threads must be >= 1")
        return t

    @property
    def figures(self) -> bool:
        return self.get("output", "figures", True, _bool)

    @property
    def write_fields(self) -> list[str]:
        raw = self.get("output", "write_fields", "")
        return [t for t in raw.replace(",", " ").split() if t]


def _rhs_callable(name: str, lo, hi):
    if name == "one":
        return 1.0

    lo = tuple(lo)
    hi = tuple(hi)

    def sine(*xs):
        out = np.ones_like(xs[0])
        for i, x in enumerate(xs):
            out = out * np.sin(np.pi * (x - lo[i]) / (hi[i] - lo[i]))
        return out

    return sine


def build_mask(cfg: RunConfig) -> DomainMask:
    """Geometry dispatch for the single-domain kinds."""
    example = cfg.example
    margin_default = cfg.kernel_spec.support_radius if cfg.kind != "delta-sweep" else (
        max(cfg.get("experiment", "deltas", (0.4, 0.2, 0.1), _floats))
    )
    margin = cfg.get("geometry", "margin", margin_default, float)
    align = "faces" if cfg.kind == "delta-sweep" else "centers"
    h = cfg.spacing
    if example == "example1-annulus":
        r_inner = cfg.get("geometry", "r_inner", 3.0, float)
        r_outer = cfg.get("geometry", "r_outer", 6.0, float)
        box = r_outer + margin
        grid = make_grid((-box, -box), (box, box), h, margin=0.0, align=align)
        return build_annulus_mask(grid, r_inner, r_outer)
    if example == "oscillating":
        grid = make_grid(OSCILLATING_OMEGA_LO, OSCILLATING_OMEGA_HI, h, margin=margin, align=align)
        return build_oscillating_mask(cfg.get("geometry", "epsilon", 0.25, float), grid)
    if example == "example2-strips":
        spec = example2_strips_spec(cfg.get("geometry", "epsilon", 0.25, float))
    else:
        lo, hi = cfg.omega_lo, cfg.omega_hi
        common = dict(
            omega_lo=lo,
            omega_hi=hi,
            cell_lengths=cfg.get("geometry", "cell_lengths", (1.0,) * len(lo), _floats),
            epsilon=cfg.get("geometry", "epsilon", 0.25, float),
            gamma=cfg.get("geometry", "gamma", 1.0, float),
            interior_holes_only=cfg.get("geometry", "interior_holes_only", False, _bool),
        )
        if example == "none":
            spec = PerforationSpec(hole_shape=HoleShape.NONE, **{**common, "epsilon": 1.0})
        elif example == "periodic-balls":
            spec = PerforationSpec(
                hole_shape=HoleShape.BALL,
                radius_factor=cfg.get("geometry", "radius_factor", 0.25, float),
                **common,
            )
        else:  # periodic-box
            box_lo = cfg.get("geometry", "box_lo", None, _floats)
            box_hi = cfg.get("geometry", "box_hi", None, _floats)
            if box_lo is None or box_hi is None:
                raise ConfigError("periodic-box geometry needs box_lo and box_hi")
            spec = PerforationSpec(hole_shape=HoleShape.BOX, box_lo=box_lo, box_hi=box_hi, **common)
    grid = make_grid(spec.omega_lo, spec.omega_hi, h, margin=margin, align=align)
    return build_periodic_mask(spec, grid)


def _jsonable(value):
    """Recursively convert numpy scalars so json.dumps output is plain."""
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (tuple, list)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (tuple, list)):
        return ";".join(_fmt(v) for v in value)
    return str(value)


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _sweep_csv(records, parameter: str, diag_order: list[str]) -> tuple[list[str], list[list]]:
    header = [parameter] + diag_order
    rows = []
    for rec in records:
        rows.append([rec.value] + [rec.diagnostics.get(k) for k in diag_order])
    return header, rows


def _epsilon_sweep_columns(records) -> list[str]:
    num_phi = 0
    for rec in records:
        num_phi = max(num_phi, sum(1 for k in rec.diagnostics if k.startswith("pairing_err_phi")))
    return (
        ["h", "lambda1", "l2_norm_u"]
        + [f"pairing_err_phi{i}" for i in range(1, num_phi + 1)]
        + ["solver_iters", "residual"]
    )


class Runner:
    def __init__(self, cfg: RunConfig, outdir: Path, emit_fields: list[str]):
        self.cfg = cfg
        self.outdir = outdir
        self.emit_fields = list(dict.fromkeys(cfg.write_fields + emit_fields))
        self.summary: dict = {"kind": cfg.kind, "version": __version__}
        self.csv_paths: list[Path] = []
        self.fields: dict = {}
        self.extras: dict = {}

    def emit(self, name: str, obj) -> None:
        self.fields[name] = obj

    def write_outputs(self) -> None:
        self.outdir.mkdir(parents=True, exist_ok=True)
        (self.outdir / "config-echo.ini").write_text(self.cfg.raw_text)
        unknown = [n for n in self.emit_fields if n not in self.fields]
        if unknown:
            raise ConfigError(
                f"cannot emit field(s) {unknown}: this experiment provides {sorted(self.fields)}"
            )
        written = []
        for name in self.emit_fields:
            obj = self.fields[name]
            path = self.outdir / f"{name}.txt"
            path.write_text(mask_to_text(obj) if isinstance(obj, DomainMask) else field_to_text(obj))
            written.append(path.name)
        if written:
            self.summary["field_files"] = written
        if self.cfg.figures:
            from . import report

            figs = report.render(self.cfg.kind, self.outdir, self.extras)
            if figs:
                self.summary["figure_files"] = [p.name for p in figs]
        self.summary["csv_files"] = [p.name for p in self.csv_paths]
        (self.outdir / "summary.json").write_text(
            json.dumps(_jsonable(self.summary), indent=2, sort_keys=True) + "\n"
        )

    def csv(self, name: str, header: list[str], rows: list[list]) -> None:
        path = self.outdir / f"{name}.csv"
        self.outdir.mkdir(parents=True, exist_ok=True)
        write_csv(path, header, rows)
        self.csv_paths.append(path)


def run_validate_kernel(r: Runner) -> int:
    cfg = r.cfg
    spec = cfg.kernel_spec
    report = validate_kernel(spec)
    rows = [[name, ok, value] for name, (ok, value) in report.checks.items()]
    r.csv("kernel-checks", ["check", "ok", "value"], rows)
    kern = sample(spec, cfg.spacing)
    r.summary.update(
        {
            "profile": spec.profile.value,
            "delta": spec.delta,
            "passed": report.passed,
            "notes": list(report.notes),
            "discrete_mass": kern.discrete_mass(),
        }
    )
    r.extras["kernel"] = kern
    r.extras["spec"] = spec
    return EXIT_OK if report.passed else EXIT_VALIDATION


def run_solve(r: Runner) -> int:
    cfg = r.cfg
    mask = build_mask(cfg)
    kern = sample(cfg.kernel_spec, cfg.spacing)
    op = NonlocalOperator(mask, kern, cfg.bc, method=cfg.method)
    f = field_from_function(mask.grid, _rhs_callable(cfg.rhs_name, cfg.omega_lo, cfg.omega_hi)) \
        if cfg.rhs_name != "one" else field_from_function(mask.grid, lambda *xs: np.ones_like(xs[0]))
    max_iters = cfg.get("solver", "max_iterations", None, int)
    sol = op.solve(f, tol=cfg.tol, max_iterations=max_iters)
    r.summary.update(
        {
            "l2_norm_u": l2_norm(sol.u),
            "iterations": sol.iterations,
            "residual": sol.residual,
            "num_unknowns": op.n_unknowns,
        }
    )
    r.emit("u", sol.u)
    r.emit("mask", mask)
    r.extras["u"] = sol.u
    r.extras["mask"] = mask
    return EXIT_OK


def run_eigen(r: Runner) -> int:
    cfg = r.cfg
    mask = build_mask(cfg)
    kern = sample(cfg.kernel_spec, cfg.spacing)
    op = NonlocalOperator(mask, kern, cfg.bc, method=cfg.method)
    max_outer = cfg.get("solver", "max_iterations", 200, int)
    res = op.first_eigenvalue(tol=cfg.tol, seed=cfg.seed, max_outer=max_outer)
    if not res.converged:
        raise SolverError(
            f"eigen iteration stalled at residual {res.residual:.3e} "
            f"after {res.iterations} iterations"
        )
    width = cfg.get("experiment", "layer_width", cfg.kernel_spec.support_radius / 2.0, float)
    cert = covering_lower_bound(mask, kern, width)
    r.csv(
        "eigen",
        ["lambda1", "beta1", "residual", "iterations", "converged", "lambda_lower", "established"],
        [[res.eigenvalue, 1.0 - res.eigenvalue, res.residual, res.iterations, res.converged,
          cert.lambda_lower, cert.established]],
    )
    r.summary.update(
        {
            "lambda1": res.eigenvalue,
            "beta1": 1.0 - res.eigenvalue,
            "converged": res.converged,
            "lambda_lower": cert.lambda_lower,
            "certificate_established": cert.established,
            "certificate_failure": cert.failure_reason,
        }
    )
    r.emit("eigenvector", res.eigenvector)
    r.emit("mask", mask)
    r.extras["u"] = res.eigenvector
    r.extras["mask"] = mask
    return EXIT_OK


def run_covering(r: Runner) -> int:
    cfg = r.cfg
    mask = build_mask(cfg)
    kern = sample(cfg.kernel_spec, cfg.spacing)
    width = cfg.get("experiment", "layer_width", cfg.kernel_spec.support_radius / 2.0, float)
    cert = covering_lower_bound(mask, kern, width)
    chain = cert.chain_constants or (None,) * len(cert.alphas)
    rows = [
        [j + 1, cert.layer_counts[j], cert.alphas[j], chain[j]]
        for j in range(len(cert.alphas))
    ]
    r.csv("covering", ["layer", "count", "alpha", "chain_constant"], rows)
    r.summary.update(
        {
            "layer_width": cert.layer_width,
            "lambda_lower": cert.lambda_lower,
            "established": cert.established,
            "failure_reason": cert.failure_reason,
        }
    )
    r.emit("mask", mask)
    r.extras["certificate"] = cert
    return EXIT_OK


def run_epsilon_sweep(r: Runner) -> int:
    cfg = r.cfg
    eps = cfg.get("experiment", "epsilons", (0.25, 0.125, 0.0625), _floats)
    lo, hi = cfg.omega_lo, cfg.omega_hi
    example = cfg.example
    if example not in ("periodic-balls", "periodic-box", "example2-strips"):
        raise ConfigError("epsilon-sweep needs a periodic geometry example")
    specs = []
    for e in eps:
        if example == "example2-strips":
            specs.append(example2_strips_spec(e))
        elif example == "periodic-balls":
            specs.append(
                PerforationSpec(
                    omega_lo=lo,
                    omega_hi=hi,
                    cell_lengths=cfg.get("geometry", "cell_lengths", (1.0,) * len(lo), _floats),
                    hole_shape=HoleShape.BALL,
                    epsilon=e,
                    gamma=cfg.get("geometry", "gamma", 1.0, float),
                    radius_factor=cfg.get("geometry", "radius_factor", 0.25, float),
                )
            )
        else:
            box_lo = cfg.get("geometry", "box_lo", None, _floats)
            box_hi = cfg.get("geometry", "box_hi", None, _floats)
            if box_lo is None or box_hi is None:
                raise ConfigError("periodic-box geometry needs box_lo and box_hi")
            specs.append(
                PerforationSpec(
                    omega_lo=lo,
                    omega_hi=hi,
                    cell_lengths=cfg.get("geometry", "cell_lengths", (1.0,) * len(lo), _floats),
                    hole_shape=HoleShape.BOX,
                    epsilon=e,
                    gamma=cfg.get("geometry", "gamma", 1.0, float),
                    box_lo=box_lo,
                    box_hi=box_hi,
                )
            )
    lo0, hi0 = specs[0].omega_lo, specs[0].omega_hi
    records = epsilon_sweep(
        specs,
        cfg.bc,
        _rhs_callable(cfg.rhs_name, lo0, hi0),
        cfg.kernel_spec,
        h_over_eps=cfg.get("experiment", "h_over_eps", 0.125, float),
        tol=cfg.tol,
        seed=cfg.seed,
        compute_eigenvalue=cfg.get("experiment", "compute_eigenvalue", True, _bool),
    )
    header, rows = _sweep_csv(records, "epsilon", _epsilon_sweep_columns(records))
    r.csv("epsilon-sweep", header, rows)
    errors = {str(rec.value): rec.error for rec in records if rec.error}
    if errors:
        r.summary["record_errors"] = errors
    r.summary["epsilons"] = list(eps)
    r.extras["records"] = records
    r.extras["parameter"] = "epsilon"
    return EXIT_OK


def run_delta_sweep(r: Runner) -> int:
    cfg = r.cfg
    deltas = cfg.get("experiment", "deltas", (0.4, 0.2, 0.1), _floats)
    mask = build_mask(cfg)
    bc_holes = HoleBC.DIRICHLET if cfg.bc == BoundaryCondition.DIRICHLET_HOLES else HoleBC.NEUMANN
    records = delta_localization_sweep(
        mask,
        cfg.get("kernel", "profile", "bump"),
        _rhs_callable(cfg.rhs_name, cfg.omega_lo, cfg.omega_hi),
        deltas,
        bc_holes=bc_holes,
        tol=cfg.tol,
    )
    header, rows = _sweep_csv(records, "delta", ["h", "error_l2", "solver_iters", "residual"])
    r.csv("delta-sweep", header, rows)
    errors = {str(rec.value): rec.error for rec in records if rec.error}
    if errors:
        r.summary["record_errors"] = errors
    r.summary["deltas"] = list(deltas)
    r.extras["records"] = records
    r.extras["parameter"] = "delta"
    return EXIT_OK


def run_nonlocal_critical(r: Runner) -> int:
    cfg = r.cfg
    eps = cfg.get("experiment", "epsilons", (0.25, 0.125, 0.0625), _floats)
    result = nonlocal_critical_sweep(
        _rhs_callable(cfg.rhs_name, cfg.omega_lo, cfg.omega_hi),
        c0=cfg.get("experiment", "c0", 0.25, float),
        epsilons=eps,
        gamma=cfg.get("experiment", "gamma", 1.0, float),
        kernel_spec=cfg.kernel_spec,
        omega=(cfg.omega_lo, cfg.omega_hi),
        cell_lengths=cfg.get("geometry", "cell_lengths", (1.0,) * len(cfg.omega_lo), _floats),
        h_over_eps=cfg.get("experiment", "h_over_eps", 0.125, float),
        tol=cfg.tol,
        seed=cfg.seed,
        compute_eigenvalue=cfg.get("experiment", "compute_eigenvalue", True, _bool),
    )
    header, rows = _sweep_csv(result.records, "epsilon", _epsilon_sweep_columns(result.records))
    r.csv("nonlocal-critical", header, rows)
    errors = {str(rec.value): rec.error for rec in result.records if rec.error}
    if errors:
        r.summary["record_errors"] = errors
    r.summary.update({"chi": result.chi, "nu": result.nu, "epsilons": list(eps)})
    r.extras["records"] = result.records
    r.extras["parameter"] = "epsilon"
    return EXIT_OK


def run_iterated_limits(r: Runner) -> int:
    cfg = r.cfg
    table = cfg.get("experiment", "table", "both")
    if table not in ("dirichlet", "neumann", "both"):
        raise ConfigError(f"unknown table {table!r}; choose dirichlet, neumann, or both")
    tol = cfg.get("experiment", "tol", 1e-10, float)
    verdicts = []
    if table in ("dirichlet", "both"):
        for regime in (RadiusRegime.EQ_B, RadiusRegime.BETWEEN_A_B, RadiusRegime.EQ_A, RadiusRegime.LL_A):
            verdicts.append(
                iterated_limit_dirichlet(
                    regime,
                    box_size=cfg.get("geometry", "box_size", 4.0, float),
                    dim=cfg.get("geometry", "dim", 3, int),
                    nodes_per_axis=cfg.get("geometry", "nodes_per_axis", 32, int),
                    c0=cfg.get("experiment", "c0", 1.0, float),
                    tol=tol,
                )
            )
    if table in ("neumann", "both"):
        cell = CellGeometry(
            (1.0, 1.0), cfg.get("geometry", "hole_radius", 0.25, float)
        )
        for regime in (RadiusRegime.LL_B, RadiusRegime.EQ_B):
            verdicts.append(
                iterated_limit_neumann(
                    regime,
                    box_size=cfg.get("geometry", "box_size", 4.0, float),
                    dim=2,
                    nodes_per_axis=cfg.get("geometry", "nodes_per_axis", 64, int),
                    cell=cell,
                    cell_spacing=cfg.get("geometry", "cell_spacing", 1.0 / 64.0, float),
                    tol=tol,
                )
            )
    rows = [
        [v.case_id, v.regime.value, v.distance, v.equal, v.predicted_equal, v.agrees_with_prediction()]
        for v in verdicts
    ]
    r.csv(
        "iterated-limits",
        ["case_id", "regime", "distance", "equal", "predicted_equal", "agrees"],
        rows,
    )
    r.summary["cases"] = {
        v.case_id: {"equal": v.equal, "distance": v.distance, "predicted_equal": v.predicted_equal}
        for v in verdicts
    }
    r.summary["all_agree"] = all(v.agrees_with_prediction() for v in verdicts)
    r.extras["verdicts"] = verdicts
    return EXIT_OK


def run_cell_coefficients(r: Runner) -> int:
    cfg = r.cfg
    cell = CellGeometry(
        cfg.get("geometry", "cell_lengths", (1.0, 1.0), _floats),
        cfg.get("geometry", "hole_radius", 0.25, float),
    )
    sol = homogenized_coefficients(cell, cfg.get("geometry", "cell_spacing", 1.0 / 64.0, float), tol=cfg.tol)
    n = cell.dim
    header = [f"q{i + 1}{j + 1}" for i in range(n) for j in range(n)] + [
        "material_fraction",
        "iterations",
    ]
    rows = [[sol.q[i, j] for i in range(n) for j in range(n)] + [sol.material_fraction, sol.iterations]]
    r.csv("cell-coefficients", header, rows)
    r.summary.update(
        {
            "q": [[float(sol.q[i, j]) for j in range(n)] for i in range(n)],
            "material_fraction": sol.material_fraction,
        }
    )
    for i in range(n):
        r.emit(f"corrector{i + 1}", sol.correctors[i])
    r.extras["cell"] = sol
    return EXIT_OK


RUNNERS = {
    "validate-kernel": run_validate_kernel,
    "solve": run_solve,
    "eigen": run_eigen,
    "covering": run_covering,
    "epsilon-sweep": run_epsilon_sweep,
    "delta-sweep": run_delta_sweep,
    "nonlocal-critical": run_nonlocal_critical,
    "iterated-limits": run_iterated_limits,
    "cell-coefficients": run_cell_coefficients,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="perfhom", description=__doc__)
    sub = parser.add_subparsers(dest="command")
    runp = sub.add_parser("run", help="run one experiment from a config file")
    runp.add_argument("config", type=Path)
    runp.add_argument("--output-dir", type=Path, default=None)
    runp.add_argument(
        "--emit-fields",
        default="",
        help="comma-separated field names to dump in the plain-text grid format",
    )
    args = parser.parse_args(argv)
    if args.command != "run":
        parser.print_help()
        return EXIT_CONFIG

    try:
        cfg = RunConfig(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    outdir = args.output_dir
    if outdir is None:
        outdir = args.config.with_name(args.config.stem + "-out")
    emit = [t for t in args.emit_fields.replace(",", " ").split() if t]

    runner = Runner(cfg, outdir, emit)
    try:
        with scipy.fft.set_workers(cfg.threads):
            code = RUNNERS[cfg.kind](runner)
        runner.write_outputs()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GeometryError, KernelError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VerdictGapError as exc:
        print(f"verdict gap: {exc}", file=sys.stderr)
        return EXIT_VERDICT_GAP
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if code == EXIT_VALIDATION:
        print("validation failure: see summary.json", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
