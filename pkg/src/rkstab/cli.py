"""Command-line front end for bounds, integration runs, and sweeps.

Subcommands: bounds, integrate, sweep, mesh-gen, validate.  Every run is
driven by a RunConfig that can come from a JSON file (--config), from
flags, or both; flags win over file values.  All enumerated settings are
validated before any computation starts.

Exit codes: 0 on success (an unstable integration or an invalid mesh is
a finding, not a failure), 1 on internal numerical failure, 2 on config
errors.  Failures emit a one-line JSON error record on stderr.

Outputs are plain JSON and CSV, written with fixed key order and 17
significant digits so that identical configurations with identical seeds
produce byte-identical files regardless of worker count.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .assembly import (
    AssembledSystem,
    DiffusionField,
    SurrogatePolicy,
    apply_dirichlet,
    assemble_system,
    l2_project,
)
from .bounds import (
    BOUND_CSV_FIELDS,
    DEFAULT_SEED,
    BoundReport,
    compute_bound_report,
)
from .mesh import (
    MeshFormatError,
    MeshSpec,
    MeshStructureError,
    SimplicialMesh,
    generate_mesh,
    read_mesh,
    validate_mesh,
    write_mesh,
)
from .reference import build_reference_element
from .timestepping import (
    BOUND_SOURCES,
    BlowUpError,
    CertificateError,
    integrate,
    l2_growth_certificate,
    rk_scheme,
    scheme_from_tableau,
    stable_timestep,
    top_mode_initial_condition,
)


class ConfigError(ValueError):
    """Invalid run configuration (exit code 2)."""


MESH_SPEC_KEYS = {
    "uniform_interval": {"n"},
    "structured_triangular": {"nx", "ny", "pattern"},
    "stretched": {"nx", "ny", "ratio"},
    "random_perturbed": {"nx", "ny", "amplitude", "seed"},
}

DIFFUSION_KINDS = ("identity", "scalar", "diag", "rotated_anisotropic", "aligned")

POLICY_NAMES = ("consistent", "hrz_diagonal", "node_quadrature")

SCHEME_NAMES = ("explicit_euler", "heun2", "kutta3", "classic_rk4", "generic")

INITIAL_KINDS = ("smooth", "top_mode", "random")

SWEEP_AXES = ("n", "m", "ratio", "policy")

BOUNDS_CSV_HEADER = ["dimension", "n_elements"] + BOUND_CSV_FIELDS + [
    "sandwich_satisfied"
]


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings for one CLI invocation.

    mesh is either a generator spec ("kind:key=value,...") or the path of
    an existing mesh file.  tau, when set, overrides the stable-step
    derivation; bound_source picks the eigenvalue estimate backing the
    derived step.
    """

    mesh: str
    order: int = 1
    diffusion: str = "identity"
    policy: str = "consistent"
    scheme: str = "explicit_euler"
    bound_source: str = "diag_ratio"
    tau: float | None = None
    steps: int = 100
    out: str = "."
    seed: int = DEFAULT_SEED
    dof_cap: int = 5000
    workers: int = 1
    initial: str = "smooth"
    tableau: dict | None = None
    sweep_axis: str | None = None
    sweep_values: tuple | None = None


def _parse_scalar(token: str):
    token = token.strip()
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        pass
    return token


def parse_spec(text: str) -> tuple[str, dict]:
    """Split "kind:key=value,key=value" into its kind and parameter dict."""
    kind, _, rest = text.partition(":")
    kind = kind.strip()
    params: dict = {}
    if rest.strip():
        for chunk in rest.split(","):
            key, eq, value = chunk.partition("=")
            if not eq or not key.strip():
                raise ConfigError(f"malformed spec parameter {chunk!r} in {text!r}")
            params[key.strip()] = _parse_scalar(value)
    return kind, params


def _format_spec(kind: str, params: dict) -> str:
    if not params:
        return kind
    body = ",".join(f"{key}={params[key]}" for key in sorted(params))
    return f"{kind}:{body}"


def _mesh_is_file(mesh: str) -> bool:
    return os.path.isfile(mesh)


def _mesh_spec(config: RunConfig) -> MeshSpec:
    kind, params = parse_spec(config.mesh)
    if kind not in MESH_SPEC_KEYS:
        known = ", ".join(sorted(MESH_SPEC_KEYS))
        raise ConfigError(f"unknown mesh kind {kind!r}; expected one of {known}")
    extra = set(params) - MESH_SPEC_KEYS[kind]
    if extra:
        raise ConfigError(
            f"mesh kind {kind!r} does not accept parameters {sorted(extra)}"
        )
    try:
        return MeshSpec(kind=kind, **params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad mesh spec {config.mesh!r}: {exc}") from exc


def build_mesh(config: RunConfig) -> SimplicialMesh:
    if _mesh_is_file(config.mesh):
        try:
            return read_mesh(config.mesh)
        except (MeshFormatError, MeshStructureError) as exc:
            raise ConfigError(f"bad mesh file {config.mesh!r}: {exc}") from exc
    return generate_mesh(_mesh_spec(config))


def build_diffusion(config: RunConfig, mesh: SimplicialMesh) -> DiffusionField:
    kind, params = parse_spec(config.diffusion)
    d = mesh.dimension
    if kind == "identity":
        return DiffusionField.constant(1.0, d=d)
    if kind == "scalar":
        return DiffusionField.constant(float(params.get("value", 1.0)), d=d)
    if kind == "diag":
        entries = [float(params.get("k1", 1.0))]
        if d == 2:
            entries.append(float(params.get("k2", 1.0)))
        return DiffusionField.constant(np.diag(entries))
    if kind == "rotated_anisotropic":
        if d != 2:
            raise ConfigError("rotated_anisotropic diffusion needs a 2D mesh")
        angle = float(params.get("angle", 0.0))
        k1 = float(params.get("k1", 1.0))
        k2 = float(params.get("k2", 1.0))
        return DiffusionField.rotated_anisotropic(angle, (k1, k2))
    if kind == "aligned":
        if _mesh_is_file(config.mesh):
            raise ConfigError("aligned diffusion requires a stretched mesh spec")
        mesh_kind, mesh_params = parse_spec(config.mesh)
        if mesh_kind != "stretched":
            raise ConfigError("aligned diffusion requires a stretched mesh spec")
        ratio = float(mesh_params.get("ratio", 1.0))
        return DiffusionField.constant(np.diag([1.0, ratio**-2]))
    known = ", ".join(DIFFUSION_KINDS)
    raise ConfigError(f"unknown diffusion kind {kind!r}; expected one of {known}")


def _build_scheme(config: RunConfig):
    if config.scheme == "generic":
        tableau = config.tableau
        if not isinstance(tableau, dict) or "a" not in tableau or "b" not in tableau:
            raise ConfigError(
                'scheme "generic" requires a tableau config entry {"a": [[...]], "b": [...]}'
            )
        return scheme_from_tableau(np.asarray(tableau["a"]), np.asarray(tableau["b"]))
    return rk_scheme(config.scheme)


def validate_config(config: RunConfig, command: str) -> None:
    """Check every enumeration and range before any computation runs."""
    if not isinstance(config.mesh, str) or not config.mesh.strip():
        raise ConfigError("mesh spec or mesh file path is required")
    if not isinstance(config.order, int) or config.order < 1:
        raise ConfigError(f"element order must be a positive integer, got {config.order!r}")
    if config.policy not in POLICY_NAMES:
        raise ConfigError(
            f"unknown policy {config.policy!r}; expected one of {', '.join(POLICY_NAMES)}"
        )
    if config.scheme not in SCHEME_NAMES:
        raise ConfigError(
            f"unknown scheme {config.scheme!r}; expected one of {', '.join(SCHEME_NAMES)}"
        )
    if config.scheme == "generic":
        _build_scheme(config)
    if config.bound_source not in BOUND_SOURCES:
        raise ConfigError(
            f"unknown bound source {config.bound_source!r}; "
            f"expected one of {', '.join(BOUND_SOURCES)}"
        )
    if config.tau is not None and not config.tau > 0:
        raise ConfigError(f"tau override must be positive, got {config.tau!r}")
    if not isinstance(config.steps, int) or config.steps < 0:
        raise ConfigError(f"steps must be a nonnegative integer, got {config.steps!r}")
    if not isinstance(config.seed, int):
        raise ConfigError(f"seed must be an integer, got {config.seed!r}")
    if not isinstance(config.dof_cap, int) or config.dof_cap < 1:
        raise ConfigError(f"dof cap must be a positive integer, got {config.dof_cap!r}")
    if not isinstance(config.workers, int) or config.workers < 1:
        raise ConfigError(f"workers must be a positive integer, got {config.workers!r}")
    if config.initial not in INITIAL_KINDS:
        raise ConfigError(
            f"unknown initial condition {config.initial!r}; "
            f"expected one of {', '.join(INITIAL_KINDS)}"
        )
    if not _mesh_is_file(config.mesh):
        _mesh_spec(config)
    kind, _ = parse_spec(config.diffusion)
    if kind not in DIFFUSION_KINDS:
        raise ConfigError(
            f"unknown diffusion kind {kind!r}; expected one of {', '.join(DIFFUSION_KINDS)}"
        )
    if command == "sweep":
        if config.sweep_axis not in SWEEP_AXES:
            raise ConfigError(
                f"sweep axis must be one of {', '.join(SWEEP_AXES)}, "
                f"got {config.sweep_axis!r}"
            )
        if not config.sweep_values:
            raise ConfigError("sweep requires a nonempty list of sweep values")
        if config.sweep_axis in ("n", "m"):
            bad = [v for v in config.sweep_values if not isinstance(v, int) or v < 1]
            if bad:
                raise ConfigError(f"sweep values for axis {config.sweep_axis!r} "
                                  f"must be positive integers, got {bad}")
        if config.sweep_axis == "policy":
            bad = [v for v in config.sweep_values if v not in POLICY_NAMES]
            if bad:
                raise ConfigError(f"unknown policies in sweep values: {bad}")
        if config.sweep_axis in ("n", "m", "ratio") and _mesh_is_file(config.mesh):
            raise ConfigError(
                f"sweep axis {config.sweep_axis!r} requires a mesh spec, not a mesh file"
            )
        if config.sweep_axis == "ratio":
            mesh_kind, _ = parse_spec(config.mesh)
            if mesh_kind != "stretched":
                raise ConfigError("sweep axis 'ratio' requires a stretched mesh spec")
    if command == "mesh-gen" and _mesh_is_file(config.mesh):
        raise ConfigError("mesh-gen requires a mesh spec, not an existing mesh file")


def _sandwich_satisfied(report: BoundReport) -> bool | None:
    lam = report.lambda_max_exact
    if lam is None:
        return None
    slack = 1e-9
    return (
        report.lower_diag_ratio <= lam * (1.0 + slack)
        and lam <= report.upper_diag_ratio * (1.0 + slack)
    )


def _csv_bool(value: bool | None) -> str:
    if value is None:
        return ""
    return "true" if value else "false"


def _bounds_record(config: RunConfig) -> tuple[dict, list[str]]:
    """Compute the bound report plus its JSON dict and CSV row fields."""
    mesh = build_mesh(config)
    elem = build_reference_element(mesh.dimension, config.order)
    diffusion = build_diffusion(config, mesh)
    policy = SurrogatePolicy(config.policy)
    report = compute_bound_report(
        mesh, elem, diffusion, policy, dof_cap=config.dof_cap, seed=config.seed
    )
    sandwich = _sandwich_satisfied(report)
    record = dict(report.to_dict())
    record["dimension"] = mesh.dimension
    record["n_elements"] = mesh.n_elements
    record["sandwich_satisfied"] = sandwich
    row = (
        [str(mesh.dimension), str(mesh.n_elements)]
        + report.csv_row()
        + [_csv_bool(sandwich)]
    )
    return record, row


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def cmd_bounds(config: RunConfig) -> dict:
    record, row = _bounds_record(config)
    os.makedirs(config.out, exist_ok=True)
    json_path = os.path.join(config.out, "bounds.json")
    csv_path = os.path.join(config.out, "bounds.csv")
    _write_json(json_path, record)
    with open(csv_path, "w") as handle:
        handle.write(",".join(BOUNDS_CSV_HEADER) + "\n")
        handle.write(",".join(row) + "\n")
    return {
        "command": "bounds",
        "bounds_json": json_path,
        "bounds_csv": csv_path,
        "n_dofs": record["n_dofs"],
        "sandwich_satisfied": record["sandwich_satisfied"],
    }


def _initial_vector(
    config: RunConfig,
    mesh: SimplicialMesh,
    elem,
    system: AssembledSystem,
) -> np.ndarray:
    if config.initial == "top_mode":
        return top_mode_initial_condition(system, seed=config.seed)
    if config.initial == "random":
        rng = np.random.default_rng(config.seed)
        return rng.standard_normal(system.n_dofs)
    if mesh.dimension == 1:
        func = lambda x: math.sin(math.pi * x[0])
    else:
        func = lambda x: math.sin(math.pi * x[0]) * math.sin(math.pi * x[1])
    coeffs = l2_project(mesh, elem, func)
    return coeffs[system.dof_map]


def cmd_integrate(config: RunConfig) -> dict:
    mesh = build_mesh(config)
    elem = build_reference_element(mesh.dimension, config.order)
    diffusion = build_diffusion(config, mesh)
    policy = SurrogatePolicy(config.policy)
    system = apply_dirichlet(assemble_system(mesh, elem, diffusion, policy))
    scheme = _build_scheme(config)

    report = None
    if config.tau is not None:
        tau = config.tau
        tau_source = "override"
    else:
        report = compute_bound_report(
            mesh,
            elem,
            diffusion,
            policy,
            dof_cap=config.dof_cap,
            seed=config.seed,
            system=system,
        )
        try:
            tau = stable_timestep(scheme, config.bound_source, report)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        tau_source = config.bound_source

    u0 = _initial_vector(config, mesh, elem, system)

    summary: dict = {
        "command": "integrate",
        "scheme": scheme.name,
        "tau": tau,
        "tau_source": tau_source,
        "n_steps_requested": config.steps,
        "n_dofs": system.n_dofs,
        "seed": config.seed,
        "lambda_max_exact": None if report is None else report.lambda_max_exact,
        "growth_bound": math.sqrt(elem.condition_number * system.kappa_surrogate),
        "growth_ratio": None,
        "certificate": None,
        "certificate_step": None,
        "max_energy_ratio": None,
        "blow_up_step": None,
    }

    try:
        trace = integrate(system, scheme, tau, config.steps, u0)
    except BlowUpError as err:
        summary["status"] = "unstable"
        summary["blow_up_step"] = err.step
        summary["n_steps_completed"] = max(err.step - 1, 0)
        trace = err.trace
    else:
        summary["status"] = "no-op" if config.steps == 0 else "stable"
        summary["n_steps_completed"] = config.steps
        energy = trace.energy_norms
        if energy[0] > 0:
            summary["max_energy_ratio"] = float(np.max(energy) / energy[0])
        try:
            summary["growth_ratio"] = l2_growth_certificate(trace, system, elem)
            summary["certificate"] = "ok"
        except CertificateError as err:
            summary["growth_ratio"] = err.ratio
            summary["certificate"] = "violated"
            summary["certificate_step"] = err.step

    os.makedirs(config.out, exist_ok=True)
    trace_path = os.path.join(config.out, "trace.csv")
    summary_path = os.path.join(config.out, "summary.json")
    trace.write_csv(trace_path)
    _write_json(summary_path, summary)
    return dict(summary, trace_csv=trace_path, summary_json=summary_path)


def _sweep_point_config(config: RunConfig, value) -> RunConfig:
    axis = config.sweep_axis
    if axis == "m":
        return dataclasses.replace(config, order=int(value))
    if axis == "policy":
        return dataclasses.replace(config, policy=str(value))
    kind, params = parse_spec(config.mesh)
    if axis == "n":
        if kind == "uniform_interval":
            params["n"] = int(value)
        else:
            params["nx"] = int(value)
            params["ny"] = int(value)
    elif axis == "ratio":
        params["ratio"] = value
    return dataclasses.replace(config, mesh=_format_spec(kind, params))


def cmd_sweep(config: RunConfig) -> dict:
    values = list(config.sweep_values)
    points_dir = os.path.join(config.out, "points")
    os.makedirs(points_dir, exist_ok=True)

    def run_point(index: int) -> str:
        point = _sweep_point_config(config, values[index])
        _, row = _bounds_record(point)
        line = ",".join([config.sweep_axis, str(values[index])] + row) + "\n"
        with open(os.path.join(points_dir, f"point_{index:04d}.csv"), "w") as handle:
            handle.write(line)
        return line

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            lines = list(pool.map(run_point, range(len(values))))
    else:
        lines = [run_point(i) for i in range(len(values))]

    sweep_path = os.path.join(config.out, "sweep.csv")
    with open(sweep_path, "w") as handle:
        handle.write(",".join(["axis", "value"] + BOUNDS_CSV_HEADER) + "\n")
        for line in lines:
            handle.write(line)
    return {
        "command": "sweep",
        "sweep_csv": sweep_path,
        "axis": config.sweep_axis,
        "n_points": len(values),
    }


def cmd_mesh_gen(config: RunConfig) -> dict:
    mesh = generate_mesh(_mesh_spec(config))
    os.makedirs(config.out, exist_ok=True)
    path = os.path.join(config.out, "mesh.txt")
    write_mesh(mesh, path)
    return {
        "command": "mesh-gen",
        "mesh_file": path,
        "dimension": mesh.dimension,
        "n_vertices": mesh.n_vertices,
        "n_elements": mesh.n_elements,
    }


def cmd_validate(config: RunConfig) -> dict:
    mesh = build_mesh(config)
    problems = validate_mesh(mesh)
    return {
        "command": "validate",
        "status": "ok" if not problems else "invalid",
        "n_problems": len(problems),
        "problems": problems,
    }


def _add_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its keys")
    parser.add_argument("--mesh", help="mesh spec 'kind:key=value,...' or mesh file path")
    parser.add_argument("--order", type=int, help="element order m")
    parser.add_argument("--diffusion", help="diffusion spec, e.g. rotated_anisotropic:angle=0.5,k1=1,k2=100")
    parser.add_argument("--policy", help="surrogate mass policy: " + ", ".join(POLICY_NAMES))
    parser.add_argument("--scheme", help="time scheme: " + ", ".join(SCHEME_NAMES))
    parser.add_argument("--tau", type=float, help="time step override")
    parser.add_argument("--steps", type=int, help="number of time steps")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="rng seed")
    parser.add_argument("--dof-cap", type=int, dest="dof_cap",
                        help="skip exact eigenvalues above this DOF count")
    parser.add_argument("--workers", type=int, help="sweep worker pool size")
    parser.add_argument("--bound-source", dest="bound_source",
                        help="eigenvalue estimate for the stable step: " + ", ".join(BOUND_SOURCES))
    parser.add_argument("--initial", help="initial condition: " + ", ".join(INITIAL_KINDS))
    parser.add_argument("--sweep-axis", dest="sweep_axis",
                        help="sweep axis: " + ", ".join(SWEEP_AXES))
    parser.add_argument("--sweep-values", dest="sweep_values",
                        help="comma-separated sweep values")


def load_config(args: argparse.Namespace) -> RunConfig:
    merged: dict = {}
    if args.config is not None:
        try:
            with open(args.config) as handle:
                data = json.load(handle)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        known = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged.update(data)
    flag_keys = (
        "mesh order diffusion policy scheme bound_source tau steps out seed "
        "dof_cap workers initial sweep_axis sweep_values"
    ).split()
    for key in flag_keys:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    if isinstance(merged.get("sweep_values"), str):
        merged["sweep_values"] = tuple(
            _parse_scalar(tok) for tok in merged["sweep_values"].split(",") if tok.strip()
        )
    elif isinstance(merged.get("sweep_values"), list):
        merged["sweep_values"] = tuple(merged["sweep_values"])
    if "mesh" not in merged:
        raise ConfigError("mesh spec or mesh file path is required")
    try:
        return RunConfig(**merged)
    except TypeError as exc:
        raise ConfigError(f"bad config: {exc}") from exc


COMMANDS = {
    "bounds": cmd_bounds,
    "integrate": cmd_integrate,
    "sweep": cmd_sweep,
    "mesh-gen": cmd_mesh_gen,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rkstab",
        description="Spectral bounds and stable explicit RK steps for FEM diffusion",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        _add_flags(sub.add_parser(name))
    args = parser.parse_args(argv)

    try:
        config = load_config(args)
        validate_config(config, args.command)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return 2

    try:
        result = COMMANDS[args.command](config)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return 2
    except Exception as exc:
        print(
            json.dumps(
                {"error": "internal", "message": f"{type(exc).__name__}: {exc}"}
            ),
            file=sys.stderr,
        )
        return 1
    print(json.dumps(result, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
