"""Run configuration, experiment drivers and result files.

A run is described by a JSON document::

    {
      "scheme": "const_vel_traj",
      "potential": {"kind": "eckart", "V0": 400, "alpha": 3.0, "unit": "cm-1"},
      "mass": 2000,
      "energies": {"values": [400], "unit": "cm-1"},
      "n_points": 31, "dt": 10, "t_max": 10000,
      "output_dir": "out"
    }

Energies may also be given as ``{"start": .., "stop": .., "num": .., "unit": ..}``.
Four verbs are available: ``solve`` (first energy), ``sweep`` (every
energy), ``bench`` (wall time and error against N) and ``residual-report``
(stationarity and conservation diagnostics, converged and early).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from cpwm.errors import (
    ConfigError,
    EnergyBelowThresholdError,
    IncompatibleSchemeError,
    NotConvergedError,
    TurningPointError,
)
from cpwm.eulerian import FixedGridEngine
from cpwm.lagrangian import (
    CONST_VEL_FIXED,
    CONST_VEL_TRAJ,
    SCHEMES,
    EngineConfig,
    LagrangianEngine,
    check_compatibility,
)
from cpwm.observables import phase_residual, schrodinger_residual
from cpwm.oracle import (
    eckart_probabilities,
    ramp_probabilities,
    square_barrier_probabilities,
    transfer_matrix_solve,
)
from cpwm.potentials import (
    DEFAULT_MASS,
    DoubleGaussian,
    Eckart,
    PiecewiseConstant,
    SquareBarrier,
    UphillRamp,
)
from cpwm.relaxation import HISTORY_COLUMNS, relax
from cpwm.units import hartree_to_cm1, to_hartree

PROFILE_COLUMNS = ("x", "re_psi_plus", "im_psi_plus", "re_psi_minus", "im_psi_minus",
                   "rho_plus", "rho_minus", "rho_total")
BENCH_COLUMNS = ("scheme", "n_points", "dt", "energy_cm1", "converged", "steps", "t", "wall_time",
                 "P_refl", "P_trans", "err_refl", "err_trans")
VOLATILE_KEYS = ("wall_time", "created")


@dataclass(frozen=True)
class RunConfig:
    """Validated run description; energies and potential parameters in hartree."""

    scheme: str
    potential: dict
    energies: tuple
    mass: float = DEFAULT_MASS
    energy_unit: str = "cm-1"
    x_left: float = -3.0
    x_right: float = 3.0
    x_divider: float = 0.0
    n_points: int = 31
    dt: float = 10.0
    t_max: float = 1.0e4
    tol: float = 1e-6
    window: int = 50
    window_time: float = 500.0
    residual_gate: float = 1e-3
    snapshot_stride: int = 0
    output_dir: str = "cpwm_output"
    error_bound: float = 1e-4
    bench_n_points: tuple = tuple(range(11, 102, 10))
    bench_schemes: tuple = (CONST_VEL_TRAJ, CONST_VEL_FIXED)
    bench_fixed_dt: float = 0.1
    early_fraction: float = 0.01

    @property
    def model(self):
        return build_potential(self.potential, self.mass)

    def engine_config(self, **overrides) -> EngineConfig:
        values = {name: getattr(self, name) for name in (
            "scheme", "x_left", "x_right", "x_divider", "n_points", "dt", "t_max", "tol", "window",
            "window_time", "residual_gate", "snapshot_stride")}
        values.update(overrides)
        return EngineConfig(**values)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["energies_cm1"] = [hartree_to_cm1(e) for e in self.energies]
        return out


# ---------------------------------------------------------------- potentials
_POTENTIAL_FIELDS = {
    "eckart": (Eckart, {"V0": "v0", "alpha": "alpha"}),
    "square_barrier": (SquareBarrier, {"V0": "v0", "x1": "x1", "x2": "x2"}),
    "uphill_ramp": (UphillRamp, {"V0": "v0", "alpha": "alpha"}),
    "double_gaussian": (DoubleGaussian, {"V0": "v0", "beta": "beta", "x0": "center"}),
    "custom_piecewise": (PiecewiseConstant, {"edges": "edges", "values": "values"}),
}
_ENERGY_FIELDS = ("V0", "values")


def _normalise_potential(block) -> dict:
    """Potential block with energy-valued parameters converted to hartree."""
    if not isinstance(block, dict) or "kind" not in block:
        raise ConfigError("potential", "expected an object with a 'kind' entry")
    kind = block["kind"]
    if kind not in _POTENTIAL_FIELDS:
        raise ConfigError("potential.kind", f"unknown kind {kind!r}; expected one of {sorted(_POTENTIAL_FIELDS)}")
    unit = block.get("unit", "cm-1")
    names = _POTENTIAL_FIELDS[kind][1]
    out = {"kind": kind}
    for key, value in block.items():
        if key in ("kind", "unit"):
            continue
        if key not in names:
            raise ConfigError(f"potential.{key}", f"not a parameter of {kind} (expected {sorted(names)})")
        try:
            if key in _ENERGY_FIELDS:
                value = [to_hartree(float(v), unit) for v in value] if key == "values" else to_hartree(float(value), unit)
            elif key == "edges":
                value = [float(v) for v in value]
            else:
                value = float(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"potential.{key}", str(exc)) from None
        out[key] = value
    return out


def build_potential(block: dict, mass: float = DEFAULT_MASS):
    """Potential model from a normalised block (parameters in hartree and a.u.)."""
    cls, names = _POTENTIAL_FIELDS[block["kind"]]
    kwargs = {names[k]: v for k, v in block.items() if k != "kind"}
    try:
        return cls(mass=mass, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError("potential", str(exc)) from None


def oracle_probabilities(model, energy):
    """Exact (P_refl, P_trans): closed forms where they exist, transfer matrices otherwise."""
    if isinstance(model, Eckart):
        return eckart_probabilities(model.v0, model.alpha, model.mass, energy)
    if isinstance(model, SquareBarrier):
        return square_barrier_probabilities(model.v0, model.x1, model.x2, model.mass, energy)
    if isinstance(model, UphillRamp):
        return ramp_probabilities(model.v0, model.alpha, model.mass, energy)
    sol = transfer_matrix_solve(model, energy, keep_states=False)
    return sol.reflection, sol.transmission


# -------------------------------------------------------------------- config
def _energies(block):
    if not isinstance(block, dict):
        raise ConfigError("energies", "expected an object with 'values' or 'start'/'stop'/'num'")
    unit = block.get("unit", "cm-1")
    if "values" in block:
        raw = [float(v) for v in block["values"]]
    elif {"start", "stop", "num"} <= block.keys():
        raw = list(np.linspace(float(block["start"]), float(block["stop"]), int(block["num"])))
    else:
        raise ConfigError("energies", "give 'values' or 'start', 'stop' and 'num'")
    if not raw:
        raise ConfigError("energies", "empty energy list")
    try:
        return unit, tuple(to_hartree(v, unit) for v in raw)
    except ValueError as exc:
        raise ConfigError("energies.unit", str(exc)) from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run description.

    Raises
    ------
    ConfigError
        Malformed document or out-of-range field (``err.field`` names it).
    IncompatibleSchemeError
        The scheme cannot treat this potential at one of the energies.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("document", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("document", "expected a JSON object")
    for key in ("scheme", "potential", "energies"):
        if key not in doc:
            raise ConfigError(key, "required")
    if doc["scheme"] not in SCHEMES:
        raise ConfigError("scheme", f"unknown scheme {doc['scheme']!r}; expected one of {SCHEMES}")
    known = {f.name for f in fields(RunConfig)}
    unit, energies = _energies(doc["energies"])
    kwargs = {"scheme": doc["scheme"], "potential": _normalise_potential(doc["potential"]),
              "energies": energies, "energy_unit": unit}
    extra = {}
    for key, value in doc.items():
        if key in ("scheme", "potential", "energies"):
            continue
        if key not in known or key == "energy_unit":
            extra[key] = value
            continue
        if key in ("bench_n_points", "bench_schemes"):
            value = tuple(value)
        kwargs[key] = value
    if extra:
        raise ConfigError(sorted(extra)[0], "unknown field")
    cfg = RunConfig(**kwargs)
    if not cfg.mass > 0:
        raise ConfigError("mass", "mass must be positive")
    if not cfg.error_bound > 0:
        raise ConfigError("error_bound", "error_bound must be positive")
    model = cfg.model
    engine_cfg = cfg.engine_config()
    for e in cfg.energies:
        try:
            check_compatibility(model, e, engine_cfg)
        except (TurningPointError, EnergyBelowThresholdError) as exc:
            raise IncompatibleSchemeError("energies", str(exc)) from None
        if cfg.scheme == CONST_VEL_FIXED and not model.symmetric_asymptotes:
            raise IncompatibleSchemeError("scheme", "const_vel_fixed needs V(-inf) == V(+inf); "
                                                    "use const_vel_two_region")
    return cfg


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())


# ----------------------------------------------------------------- execution
def make_engine(model, energy, config: EngineConfig):
    """Trajectory or fixed-grid engine according to ``config.scheme``."""
    if config.scheme == CONST_VEL_FIXED:
        return FixedGridEngine(model, energy, config)
    return LagrangianEngine(model, energy, config)


def _file_tag(scheme, n_points, energy):
    return f"{scheme}_N{n_points}_E{hartree_to_cm1(energy):.4f}cm1"


def write_profile(path, profile):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PROFILE_COLUMNS)
        for row in zip(profile["x"], profile["psi_plus"], profile["psi_minus"], profile["rho_plus"],
                       profile["rho_minus"], profile["rho_total"]):
            x, plus, minus, rp, rm, rt = row
            writer.writerow([repr(float(v)) for v in (x, plus.real, plus.imag, minus.real, minus.imag, rp, rm, rt)])


def write_history(path, history):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_COLUMNS)
        for row in history:
            writer.writerow([repr(float(v)) for v in row])


def solve_one(cfg: RunConfig, energy: float, out_dir: Path | None = None, **overrides) -> dict:
    """Relax one energy; returns a summary row (failures are recorded, not raised)."""
    engine_cfg = cfg.engine_config(**overrides)
    model = cfg.model
    row = {"energy_cm1": hartree_to_cm1(energy), "energy": energy, "scheme": engine_cfg.scheme,
           "n_points": engine_cfg.n_points}
    try:
        r_exact, t_exact = oracle_probabilities(model, energy)
    except (ValueError, ArithmeticError) as exc:
        r_exact = t_exact = float("nan")
        row["oracle_error"] = f"{type(exc).__name__}: {exc}"
    row.update(oracle_P_refl=r_exact, oracle_P_trans=t_exact)
    clock = time.perf_counter()
    try:
        result = relax(make_engine(model, energy, engine_cfg), raise_on_failure=False)
    except Exception as exc:  # failure isolation: the sweep records and continues
        row.update(converged=False, error=f"{type(exc).__name__}: {exc}",
                   wall_time=time.perf_counter() - clock)
        return row
    row.update(
        converged=bool(result.converged),
        P_refl=result.p_refl,
        P_trans=result.p_trans,
        err_refl=abs(result.p_refl - r_exact),
        err_trans=abs(result.p_trans - t_exact),
        unitarity_error=result.unitarity_error,
        residual=result.residual,
        schrodinger_residual=result.schrodinger_residual,
        t=result.t,
        steps=result.steps,
        dt=result.metadata["dt"],
        wall_time=result.wall_time,
    )
    if out_dir is not None:
        tag = _file_tag(engine_cfg.scheme, engine_cfg.n_points, energy)
        write_profile(out_dir / f"profile_{tag}.csv", result.profile)
        write_history(out_dir / f"history_{tag}.csv", result.history)
        row["profile_csv"] = f"profile_{tag}.csv"
        row["history_csv"] = f"history_{tag}.csv"
        for k, snap in enumerate(result.snapshots):
            write_profile(out_dir / f"snapshot_{tag}_{k:05d}.csv", snap)
    return row


def _row_ok(row, bound):
    return bool(row.get("converged")) and row.get("err_refl", np.inf) <= bound and row.get("err_trans", np.inf) <= bound


def _clean(obj, canonical):
    """JSON-safe copy; drops wall-clock fields in canonical mode."""
    if isinstance(obj, dict):
        return {k: _clean(v, canonical) for k, v in obj.items() if not (canonical and k in VOLATILE_KEYS)}
    if isinstance(obj, (list, tuple)):
        return [_clean(v, canonical) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_summary(path, payload, canonical=False):
    data = _clean(payload, canonical)
    if not canonical:
        data["created"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def run_experiment(cfg: RunConfig, mode: str = "sweep", out_dir=None, canonical: bool = False,
                   log=print) -> dict:
    """Run ``mode`` for ``cfg`` and write its files to ``out_dir``.

    Returns the summary payload; ``payload["ok"]`` is True when every run
    converged with oracle errors within ``cfg.error_bound``.
    """
    out_dir = Path(out_dir or cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"mode": mode, "config": cfg.as_dict()}
    if mode in ("solve", "sweep"):
        energies = cfg.energies[:1] if mode == "solve" else cfg.energies
        rows = []
        for e in energies:
            row = solve_one(cfg, e, out_dir)
            rows.append(row)
            log(_describe_row(row))
        payload["runs"] = rows
        payload["ok"] = all(_row_ok(r, cfg.error_bound) for r in rows)
    elif mode == "bench":
        rows = []
        for scheme in cfg.bench_schemes:
            for n in cfg.bench_n_points:
                dt = cfg.bench_fixed_dt if scheme == CONST_VEL_FIXED else cfg.dt
                row = solve_one(cfg, cfg.energies[0], None, scheme=scheme, n_points=int(n), dt=dt)
                rows.append(row)
                log(_describe_row(row))
        with open(out_dir / "bench.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(BENCH_COLUMNS)
            for row in rows:
                writer.writerow([row.get(c, "") for c in BENCH_COLUMNS])
        payload["runs"] = rows
        payload["ok"] = all(_row_ok(r, cfg.error_bound) for r in rows)
    elif mode == "residual-report":
        rows = [residual_report(cfg, e) for e in cfg.energies]
        for row in rows:
            log(f"E={row['energy_cm1']:.2f} cm-1  converged={row['converged']}  "
                f"phase={row.get('phase_residual', float('nan')):.3g}  "
                f"schrodinger={row.get('schrodinger_residual', float('nan')):.3g}  "
                f"early phase={row.get('early_phase_residual', float('nan')):.3g}")
        payload["runs"] = rows
        payload["ok"] = all(r.get("converged") for r in rows)
    else:
        raise ConfigError("mode", f"unknown mode {mode!r}")
    write_summary(out_dir / "summary.json", payload, canonical)
    return payload


def residual_report(cfg: RunConfig, energy: float) -> dict:
    """Stationarity and conservation diagnostics for one energy.

    The engine is stopped once at ``early_fraction * t_max`` to record the
    residuals of an unconverged state, then relaxed to convergence.
    """
    model = cfg.model
    engine_cfg = cfg.engine_config()
    row = {"energy_cm1": hartree_to_cm1(energy), "energy": energy, "scheme": cfg.scheme}
    try:
        engine = make_engine(model, energy, engine_cfg)
        early_t = cfg.early_fraction * cfg.t_max
        while engine.t < early_t - 1e-9 * engine.dt:
            engine.advance()
        row.update(early_t=engine.t, early_phase_residual=phase_residual(engine),
                   early_schrodinger_residual=schrodinger_residual(engine, source="current"))
        result = relax(make_engine(model, energy, engine_cfg), raise_on_failure=False)
    except Exception as exc:
        row.update(converged=False, error=f"{type(exc).__name__}: {exc}")
        return row
    row.update(converged=result.converged, t=result.t, phase_residual=result.residual,
               schrodinger_residual=result.schrodinger_residual, unitarity_error=result.unitarity_error)
    return row


def _describe_row(row):
    if "error" in row:
        return f"E={row['energy_cm1']:9.3f} cm-1  {row['scheme']} N={row['n_points']}  FAILED  {row['error']}"
    return (f"E={row['energy_cm1']:9.3f} cm-1  {row['scheme']} N={row['n_points']}  "
            f"converged={row['converged']}  P_refl={row['P_refl']:.8f}  P_trans={row['P_trans']:.8f}  "
            f"err={max(row['err_refl'], row['err_trans']):.2e}  t={row['t']:g}")


# ----------------------------------------------------------------------- CLI
def _parser():
    ap = argparse.ArgumentParser(prog="cpwm", description="Relax counter-propagating wave components to "
                                                          "stationary scattering states.")
    ap.add_argument("verb", choices=("solve", "sweep", "bench", "residual-report"))
    ap.add_argument("config", help="JSON run description")
    ap.add_argument("--out", help="output directory (overrides output_dir)")
    ap.add_argument("--scheme", choices=SCHEMES)
    ap.add_argument("--n-points", type=int)
    ap.add_argument("--dt", type=float)
    ap.add_argument("--t-max", type=float)
    ap.add_argument("--tol", type=float)
    ap.add_argument("--snapshot-stride", type=int)
    ap.add_argument("--error-bound", type=float)
    ap.add_argument("--energy", type=float, action="append",
                    help="energy in the config's energy unit; repeat to give several")
    ap.add_argument("--canonical", action="store_true",
                    help="omit wall-clock fields so identical configs give identical summaries")
    ap.add_argument("--quiet", action="store_true")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        doc = json.loads(Path(args.config).read_text())
        for key in ("scheme", "n_points", "dt", "t_max", "tol", "snapshot_stride", "error_bound"):
            value = getattr(args, key)
            if value is not None:
                doc[key] = value
        if args.energy:
            unit = doc.get("energies", {}).get("unit", "cm-1")
            doc["energies"] = {"values": args.energy, "unit": unit}
        cfg = parse_config(json.dumps(doc))
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"cpwm: configuration error: {exc}", file=sys.stderr)
        return 2
    log = (lambda *_: None) if args.quiet else print
    try:
        payload = run_experiment(cfg, args.verb, args.out, canonical=args.canonical, log=log)
    except NotConvergedError as exc:
        print(f"cpwm: {exc}", file=sys.stderr)
        return 1
    return 0 if payload["ok"] else 1


if __name__ == "__main__":
    sys.exit(main())
