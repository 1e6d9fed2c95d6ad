"""Scenario documents: loading, validation and normalisation.

Complex numbers are written as ``[re, im]`` pairs; plain real numbers are
accepted on input. Every validation failure names the offending field.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, replace
from importlib import resources
from typing import Optional

import numpy as np

from .audit import AuditThresholds
from .errors import ShapeError, ValidationError
from .generators import Generator, GeneratorKind
from .linalg import partial_trace_env, tensor
from .model import BathSpectrum, DriveSchedule, EnvSpec, ObservableSpec, SystemSpec, check_density_matrix
from .propagate import IntegratorConfig, default_step


@dataclass(frozen=True)
class Scenario:
    name: str
    system: SystemSpec
    generator: GeneratorKind
    observables: tuple
    rho_s0: Optional[np.ndarray] = None
    rho_full0: Optional[np.ndarray] = None
    env: Optional[EnvSpec] = None
    bath: Optional[BathSpectrum] = None
    t_final: float = 1.0
    dt: Optional[float] = None
    store_every: int = 1
    thresholds: AuditThresholds = AuditThresholds()

    def initial_reduced(self) -> np.ndarray:
        if self.rho_s0 is not None:
            return self.rho_s0
        return partial_trace_env(self.rho_full0, self.system.dim, self.env.dim)

    def initial_full(self) -> np.ndarray:
        if self.env is None:
            raise ValidationError("scenario has no environment", "environment")
        if self.rho_full0 is not None:
            return self.rho_full0
        return tensor(self.rho_s0, self.env.rho_e0)

    def integrator_config(self, generator: Optional[Generator] = None) -> IntegratorConfig:
        dt = self.dt
        if dt is None:
            dt = default_step(self.system, generator or Generator(self.system, self.generator))
        return IntegratorConfig(dt=min(dt, self.t_final), t_final=self.t_final, store_every=self.store_every)

    def observable(self, name: Optional[str] = None) -> ObservableSpec:
        if name is None:
            return self.observables[0]
        for o in self.observables:
            if o.name == name:
                return o
        raise ValidationError(f"no observable named {name!r}", "observables")

    def scaled(self, g: float) -> "Scenario":
        """Copy with the interaction Hamiltonian multiplied by ``g``."""
        return replace(self, system=self.system.scaled(g))


# ---------------------------------------------------------------- parsing helpers


def _require(doc, key, path):
    if not isinstance(doc, dict) or key not in doc:
        raise ValidationError("missing required field", f"{path}.{key}" if path else key)
    return doc[key]


def _number(x, path) -> complex:
    if isinstance(x, bool):
        raise ValidationError("expected a number", path)
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in x
    ):
        return complex(x[0], x[1])
    raise ValidationError(f"expected a number or [re, im] pair, got {x!r}", path)


def _real(x, path, positive=False, nonneg=False) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ValidationError(f"expected a real number, got {x!r}", path)
    v = float(x)
    if not np.isfinite(v):
        raise ValidationError("must be finite", path)
    if positive and v <= 0:
        raise ValidationError("must be positive", path)
    if nonneg and v < 0:
        raise ValidationError("must be >= 0", path)
    return v


def parse_matrix(obj, path, dim=None) -> np.ndarray:
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise ValidationError("expected a non-empty list of rows", path)
    n = len(obj)
    if any(len(r) != n for r in obj):
        raise ValidationError("matrix is not square", path)
    if dim is not None and n != dim:
        raise ValidationError(f"expected dimension {dim}, got {n}", path)
    m = np.array([[_number(x, f"{path}[{i}][{j}]") for j, x in enumerate(r)] for i, r in enumerate(obj)])
    if not np.all(np.isfinite(m)):
        raise ValidationError("non-finite entry", path)
    return m


def _hermitian(obj, path, dim=None):
    m = parse_matrix(obj, path, dim)
    if np.max(np.abs(m - m.conj().T)) >= 1e-10:
        raise ValidationError("matrix is not Hermitian", path)
    return m


def _density(obj, path, dim):
    m = parse_matrix(obj, path, dim)
    try:
        return check_density_matrix(m, path)
    except ValidationError as exc:
        raise ValidationError(str(exc).split(": ", 1)[-1], path) from None


def encode_matrix(m) -> list:
    m = np.asarray(m, dtype=np.complex128)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


# ---------------------------------------------------------------- load


def _parse_drive(doc, system_h, dim):
    protocol = doc.get("protocol", "none")
    params = doc.get("parameters", {}) or {}
    dt_drive = _real(doc.get("dt_drive", 0.01), "drive.dt_drive", positive=True)
    if protocol == "none":
        return DriveSchedule("none", h_start=system_h, dt_drive=dt_drive)
    if protocol == "linear_sweep":
        h0 = system_h if "H_start" not in params else _hermitian(params["H_start"], "drive.parameters.H_start", dim)
        h1 = _hermitian(_require(params, "H_end", "drive.parameters"), "drive.parameters.H_end", dim)
        t_sweep = _real(_require(params, "t_sweep", "drive.parameters"), "drive.parameters.t_sweep", positive=True)
        return DriveSchedule("linear_sweep", h_start=h0, h_end=h1, t_final=t_sweep, dt_drive=dt_drive)
    if protocol == "user_samples":
        ts = _require(doc, "t_samples", "drive")
        if not isinstance(ts, list):
            raise ValidationError("expected a list", "drive.t_samples")
        ts = [_real(t, f"drive.t_samples[{k}]") for k, t in enumerate(ts)]
        samples = _require(params, "samples", "drive.parameters")
        if not isinstance(samples, list):
            raise ValidationError("expected a list of matrices", "drive.parameters.samples")
        mats = [_hermitian(h, f"drive.parameters.samples[{k}]", dim) for k, h in enumerate(samples)]
        return DriveSchedule("user_samples", sample_times=ts, samples=tuple(mats), dt_drive=dt_drive)
    raise ValidationError(f"unknown protocol {protocol!r}", "drive.protocol")


def _parse(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ValidationError("scenario must be a JSON object", "")
    sysd = _require(doc, "system", "")
    dim_s = _require(sysd, "dimS", "system")
    if isinstance(dim_s, bool) or not isinstance(dim_s, int) or dim_s < 1:
        raise ValidationError("must be a positive integer", "system.dimS")
    h_s = _hermitian(_require(sysd, "H_S", "system"), "system.H_S", dim_s)
    cl = sysd.get("couplings", [])
    if not isinstance(cl, list):
        raise ValidationError("expected a list", "system.couplings")
    couplings = tuple(_hermitian(a, f"system.couplings[{k}]", dim_s) for k, a in enumerate(cl))
    drive = _parse_drive(doc["drive"], h_s, dim_s) if doc.get("drive") else None
    system = SystemSpec(dim_s, h_s, couplings, drive)

    env = None
    if doc.get("environment"):
        ed = doc["environment"]
        dim_e = _require(ed, "dimE", "environment")
        if isinstance(dim_e, bool) or not isinstance(dim_e, int) or dim_e < 1:
            raise ValidationError("must be a positive integer", "environment.dimE")
        h_e = _hermitian(_require(ed, "H_E", "environment"), "environment.H_E", dim_e)
        bl = _require(ed, "bath_ops", "environment")
        if not isinstance(bl, list):
            raise ValidationError("expected a list", "environment.bath_ops")
        bath_ops = tuple(_hermitian(b, f"environment.bath_ops[{k}]", dim_e) for k, b in enumerate(bl))
        if len(bath_ops) != len(couplings):
            raise ValidationError(
                f"{len(bath_ops)} bath operators for {len(couplings)} couplings", "environment.bath_ops"
            )
        rho_e = _density(_require(ed, "rho_E0", "environment"), "environment.rho_E0", dim_e)
        env = EnvSpec(dim_e, h_e, bath_ops, rho_e)

    bath = None
    if doc.get("bath"):
        bd = doc["bath"]
        table = bd.get("S_table")
        if table is not None:
            if not isinstance(table, list) or not all(isinstance(p, list) and len(p) == 2 for p in table):
                raise ValidationError("expected a list of [omega, S] pairs", "bath.S_table")
            table = tuple((_real(p[0], "bath.S_table"), _real(p[1], "bath.S_table")) for p in table)
        bath = BathSpectrum(
            temperature=_real(bd.get("temperature", 0.0), "bath.temperature", nonneg=True),
            eta=_real(_require(bd, "eta", "bath"), "bath.eta", positive=True),
            omega_c=_real(_require(bd, "omega_c", "bath"), "bath.omega_c", positive=True),
            lamb_shift_mode=bd.get("lamb_shift_mode", "zero"),
            s_table=table,
        )

    gd = _require(doc, "generator", "")
    variant = _require(gd, "variant", "generator")
    gmat = smat = None
    rates = gd.get("rates")
    if rates is not None:
        n = len(couplings)

        def rate_matrix(key):
            v = rates.get(key)
            if v is None:
                return None
            if isinstance(v, list):
                return parse_matrix(v, f"generator.rates.{key}", n)
            return np.array([[_number(v, f"generator.rates.{key}")]])

        gmat, smat = rate_matrix("gamma"), rate_matrix("S")
    kind = GeneratorKind(variant, gmat, smat, bath, bool(gd.get("allow_multilevel", False)))

    ol = _require(doc, "observables", "")
    if not isinstance(ol, list) or not ol:
        raise ValidationError("expected a non-empty list", "observables")
    observables = []
    for k, od in enumerate(ol):
        name = od.get("name", f"G{k}") if isinstance(od, dict) else None
        if not isinstance(name, str) or not name:
            raise ValidationError("observable needs a name", f"observables[{k}].name")
        g = _hermitian(_require(od, "G", f"observables[{k}]"), f"observables[{k}].G", dim_s)
        dg = od.get("explicit_dGdt")
        if dg is not None:
            dg = _hermitian(dg, f"observables[{k}].explicit_dGdt", dim_s)
        observables.append(ObservableSpec(name, g, dg))
    if len({o.name for o in observables}) != len(observables):
        raise ValidationError("observable names must be unique", "observables")

    init = _require(doc, "initial_state", "")
    rho_s0 = rho_full0 = None
    if init.get("rho_S0") is not None:
        rho_s0 = _density(init["rho_S0"], "initial_state.rho_S0", dim_s)
    if init.get("rho_full0") is not None:
        if env is None:
            raise ValidationError("rho_full0 requires an environment section", "initial_state.rho_full0")
        rho_full0 = _density(init["rho_full0"], "initial_state.rho_full0", dim_s * env.dim)
    if rho_s0 is None and rho_full0 is None:
        raise ValidationError("give rho_S0 or rho_full0", "initial_state")
    if rho_s0 is not None and rho_full0 is not None:
        raise ValidationError("give only one of rho_S0 and rho_full0", "initial_state")

    integ = _require(doc, "integrator", "")
    t_final = _real(_require(integ, "t_final", "integrator"), "integrator.t_final", positive=True)
    dt = integ.get("dt")
    dt = None if dt is None else _real(dt, "integrator.dt", positive=True)
    store_every = integ.get("store_every", 1)
    if isinstance(store_every, bool) or not isinstance(store_every, int) or store_every < 1:
        raise ValidationError("must be an integer >= 1", "integrator.store_every")
    if dt is not None and dt > t_final:
        raise ValidationError("dt exceeds t_final", "integrator.dt")
    if not system.drive.is_static and t_final > system.drive.t_final * (1 + 1e-12):
        raise ValidationError(
            f"t_final={t_final} exceeds the drive's range {system.drive.t_final}", "integrator.t_final"
        )

    ad = doc.get("audit") or {}
    rt = ad.get("rhs_threshold")
    thresholds = AuditThresholds(
        rhs=None if rt is None else _real(rt, "audit.rhs_threshold", positive=True),
        integral=_real(ad.get("integral_threshold", 1e-4), "audit.integral_threshold", positive=True),
    )
    sc = Scenario(
        name=str(doc.get("name", "scenario")),
        system=system,
        generator=kind,
        observables=tuple(observables),
        rho_s0=rho_s0,
        rho_full0=rho_full0,
        env=env,
        bath=bath,
        t_final=t_final,
        dt=dt,
        store_every=store_every,
        thresholds=thresholds,
    )
    # binds the generator once so structural errors surface at load time
    Generator(sc.system, sc.generator)
    return sc


def parse_scenario(doc: dict) -> Scenario:
    try:
        return _parse(doc)
    except ShapeError as exc:
        raise ValidationError(str(exc)) from exc


def load_scenario(path) -> Scenario:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON: {exc}", str(path)) from exc
    return parse_scenario(doc)


def bundled_path(name: str) -> str:
    if not name.endswith(".json"):
        name += ".json"
    return str(resources.files("occur") / "scenarios" / name)


def bundled_scenarios() -> list:
    return sorted(p.name for p in (resources.files("occur") / "scenarios").iterdir() if p.name.endswith(".json"))


# ---------------------------------------------------------------- normalise


def scenario_to_dict(sc: Scenario) -> dict:
    s = sc.system
    doc = {
        "name": sc.name,
        "system": {"dimS": s.dim, "H_S": encode_matrix(s.h_s), "couplings": [encode_matrix(a) for a in s.couplings]},
    }
    drv = s.drive
    if drv.protocol == "linear_sweep":
        doc["drive"] = {
            "protocol": "linear_sweep",
            "parameters": {"H_start": encode_matrix(drv.h_start), "H_end": encode_matrix(drv.h_end), "t_sweep": drv.t_final},
            "dt_drive": drv.dt_drive,
        }
    elif drv.protocol == "user_samples":
        doc["drive"] = {
            "protocol": "user_samples",
            "parameters": {"samples": [encode_matrix(h) for h in drv.samples]},
            "t_samples": [float(t) for t in drv.sample_times],
            "dt_drive": drv.dt_drive,
        }
    if sc.env is not None:
        e = sc.env
        doc["environment"] = {
            "dimE": e.dim,
            "H_E": encode_matrix(e.h_e),
            "bath_ops": [encode_matrix(b) for b in e.bath_ops],
            "rho_E0": encode_matrix(e.rho_e0),
        }
    if sc.bath is not None:
        b = sc.bath
        doc["bath"] = {
            "temperature": b.temperature,
            "eta": b.eta,
            "omega_c": b.omega_c,
            "lamb_shift_mode": b.lamb_shift_mode,
        }
        if b.s_table is not None:
            doc["bath"]["S_table"] = [list(p) for p in b.s_table]
    g = sc.generator
    doc["generator"] = {"variant": g.variant}
    if g.gamma_matrix is not None:
        doc["generator"]["rates"] = {"gamma": encode_matrix(g.gamma_matrix), "S": encode_matrix(g.s_matrix)}
    if g.allow_multilevel:
        doc["generator"]["allow_multilevel"] = True
    doc["observables"] = []
    for o in sc.observables:
        od = {"name": o.name, "G": encode_matrix(o.g)}
        if o.dgdt is not None:
            od["explicit_dGdt"] = encode_matrix(o.dgdt)
        doc["observables"].append(od)
    if sc.rho_s0 is not None:
        doc["initial_state"] = {"rho_S0": encode_matrix(sc.rho_s0)}
    else:
        doc["initial_state"] = {"rho_full0": encode_matrix(sc.rho_full0)}
    doc["integrator"] = {"t_final": sc.t_final, "store_every": sc.store_every}
    if sc.dt is not None:
        doc["integrator"]["dt"] = sc.dt
    doc["audit"] = {"integral_threshold": sc.thresholds.integral}
    if sc.thresholds.rhs is not None:
        doc["audit"]["rhs_threshold"] = sc.thresholds.rhs
    return doc


def atomic_write(path, text: str):
    """Write via a temporary file in the target directory, then rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".occur-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_scenario(sc: Scenario, path):
    atomic_write(path, json.dumps(scenario_to_dict(sc), indent=1) + "\n")
