"""Run configuration: YAML parsing, strict validation, canonical hashing.

Unknown keys are rejected with a path-qualified message so typos in
functional or scheme names fail fast. Defaults follow the reference
experiment settings: m0 = 0.99, dtau = 0.001, 50 imaginary-time steps per
SCF iteration, lambda = 1.0.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .cell import SimulationCell
from .ofham import FunctionalSet
from .pite import PiteParams
from .qpe import QpeConfig
from .scf import MixingScheme, ScfConfig

MODES = ("scf", "pite-demo", "qpe", "cost", "oracle-scf")

OUTPUT_DIR_ENV = "OFQSIM_OUT_DIR"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    mode: str
    cell: SimulationCell
    electrons: float
    functionals: FunctionalSet
    external_potential: dict
    initial_density: dict
    scf: ScfConfig
    pite: PiteParams
    qpe: QpeConfig
    cost: dict
    seed: int = 0
    threads: int = 1
    output_dir: str | None = None
    raw: dict = field(default_factory=dict)


def _require_keys(section: dict, allowed: set, path: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(
            f"{path}: unknown key(s) {sorted(unknown)}; allowed: {sorted(allowed)}"
        )


def _get(section: dict, key: str, default, path: str, cast=None):
    value = section.get(key, default)
    if cast is not None and value is not None:
        try:
            value = cast(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}.{key}: {exc}") from exc
    return value


def _parse_cell(section, path="cell") -> SimulationCell:
    if not isinstance(section, dict):
        raise ConfigError(f"{path}: expected a mapping")
    _require_keys(section, {"a1", "a2", "a3", "qubits"}, path)
    try:
        vectors = [np.asarray([float(x) for x in section[k]]) for k in ("a1", "a2", "a3")]
        qubits = tuple(int(q) for q in section["qubits"])
    except KeyError as exc:
        raise ConfigError(f"{path}: missing key {exc}") from exc
    try:
        return SimulationCell(a1=vectors[0], a2=vectors[1], a3=vectors[2], nq=qubits)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_functionals(section, path="functionals") -> FunctionalSet:
    section = section or {}
    _require_keys(section, {"kinetic", "exchange", "lambda"}, path)
    try:
        return FunctionalSet(
            kinetic=_get(section, "kinetic", "thomas-fermi", path, str),
            exchange=_get(section, "exchange", "lda-exchange", path, str),
            lam=_get(section, "lambda", 1.0, path, float),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_external(section, base: Path, path="external_potential") -> dict:
    section = section or {"kind": "none"}
    _require_keys(section, {"kind", "sites", "images", "path"}, path)
    kind = _get(section, "kind", "none", path, str)
    if kind not in ("none", "gaussian", "coulomb", "file"):
        raise ConfigError(f"{path}.kind: unknown kind {kind!r}")
    spec = {"kind": kind}
    if kind in ("gaussian", "coulomb"):
        sites = section.get("sites")
        if not sites:
            raise ConfigError(f"{path}.sites: at least one site required for {kind}")
        keys = {"center", "depth", "width"} if kind == "gaussian" else {"center", "charge", "rc"}
        parsed = []
        for i, site in enumerate(sites):
            _require_keys(site, keys, f"{path}.sites[{i}]")
            entry = {"center": [float(x) for x in site["center"]]}
            for k in keys - {"center"}:
                if k in site:
                    entry[k] = float(site[k])
            missing = {"depth", "width"} if kind == "gaussian" else {"charge"}
            if not missing <= set(entry):
                raise ConfigError(f"{path}.sites[{i}]: missing {sorted(missing - set(entry))}")
            parsed.append(entry)
        spec["sites"] = parsed
        if kind == "gaussian" and "images" in section:
            spec["images"] = int(section["images"])
    elif kind == "file":
        file_path = section.get("path")
        if not file_path:
            raise ConfigError(f"{path}.path: required for kind=file")
        resolved = (base / file_path).resolve() if not os.path.isabs(file_path) else Path(file_path)
        if not resolved.exists():
            raise ConfigError(f"{path}.path: file not found: {resolved}")
        spec["path"] = str(resolved)
    return spec


def _parse_initial_density(section, base: Path, path="initial_density") -> dict:
    section = section or {"kind": "uniform"}
    _require_keys(section, {"kind", "path"}, path)
    kind = _get(section, "kind", "uniform", path, str)
    if kind not in ("uniform", "file"):
        raise ConfigError(f"{path}.kind: unknown kind {kind!r}")
    spec = {"kind": kind}
    if kind == "file":
        file_path = section.get("path")
        if not file_path:
            raise ConfigError(f"{path}.path: required for kind=file")
        resolved = (base / file_path).resolve() if not os.path.isabs(file_path) else Path(file_path)
        if not resolved.exists():
            raise ConfigError(f"{path}.path: file not found: {resolved}")
        spec["path"] = str(resolved)
    return spec


def _parse_pite(section, path="pite") -> PiteParams:
    section = section or {}
    _require_keys(section, {"m0", "dtau", "steps", "mode"}, path)
    try:
        return PiteParams(
            m0=_get(section, "m0", 0.99, path, float),
            dtau=_get(section, "dtau", 0.001, path, float),
            steps=_get(section, "steps", 50, path, int),
            mode=_get(section, "mode", "exact", path, str),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_scf(section, pite: PiteParams, path="scf") -> ScfConfig:
    section = section or {}
    _require_keys(
        section,
        {"threshold", "max_iterations", "mixing", "energy_report", "track_infidelity"},
        path,
    )
    mixing = section.get("mixing") or {}
    _require_keys(mixing, {"scheme", "alpha", "history"}, f"{path}.mixing")
    try:
        scheme = MixingScheme(
            kind=_get(mixing, "scheme", "broyden", f"{path}.mixing", str),
            alpha=_get(mixing, "alpha", 0.3, f"{path}.mixing", float),
            history=_get(mixing, "history", 8, f"{path}.mixing", int),
        )
        return ScfConfig(
            threshold=_get(section, "threshold", 1e-6, path, float),
            max_iterations=_get(section, "max_iterations", 50, path, int),
            mixing=scheme,
            pite=pite,
            energy_report=_get(section, "energy_report", "rho_out", path, str),
            track_infidelity=bool(section.get("track_infidelity", True)),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_qpe(section, path="qpe") -> QpeConfig:
    section = section or {}
    _require_keys(
        section, {"dt", "samples", "target_std", "grid_size", "k_scale", "prior"}, path
    )
    prior = section.get("prior")
    if prior is not None:
        prior = (float(prior[0]), float(prior[1]))
        if not prior[1] > prior[0]:
            raise ConfigError(f"{path}.prior: upper bound must exceed lower bound")
    try:
        return QpeConfig(
            dt=_get(section, "dt", None, path, float),
            samples=_get(section, "samples", 1000, path, int),
            target_std=_get(section, "target_std", 0.0, path, float),
            grid_size=_get(section, "grid_size", 4096, path, int),
            k_scale=_get(section, "k_scale", 0.8, path, float),
            prior=prior,
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_cost(section, path="cost") -> dict:
    section = section or {}
    _require_keys(section, {"n_org_min", "n_org_max", "groups"}, path)
    spec = {
        "n_org_min": _get(section, "n_org_min", 6, path, int),
        "n_org_max": _get(section, "n_org_max", 20, path, int),
        "groups": _get(section, "groups", "full", path, str),
    }
    if spec["groups"] not in ("full", "serial"):
        raise ConfigError(f"{path}.groups: expected 'full' or 'serial'")
    if not 1 <= spec["n_org_min"] <= spec["n_org_max"]:
        raise ConfigError(f"{path}: need 1 <= n_org_min <= n_org_max")
    return spec


TOP_LEVEL_KEYS = {
    "mode", "seed", "threads", "output_dir", "cell", "electrons", "functionals",
    "external_potential", "initial_density", "scf", "pite", "qpe", "cost",
}


def parse_config_dict(data: dict, base: Path | None = None,
                      mode_override: str | None = None) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    base = base or Path.cwd()
    _require_keys(data, TOP_LEVEL_KEYS, "config")
    mode = mode_override or data.get("mode")
    if mode not in MODES:
        raise ConfigError(f"config.mode: expected one of {MODES}, got {mode!r}")
    if "cell" not in data:
        raise ConfigError("config.cell: required")
    pite = _parse_pite(data.get("pite"))
    cfg = RunConfig(
        mode=mode,
        cell=_parse_cell(data["cell"]),
        electrons=_get(data, "electrons", 1.0, "config", float),
        functionals=_parse_functionals(data.get("functionals")),
        external_potential=_parse_external(data.get("external_potential"), base),
        initial_density=_parse_initial_density(data.get("initial_density"), base),
        scf=_parse_scf(data.get("scf"), pite),
        pite=pite,
        qpe=_parse_qpe(data.get("qpe")),
        cost=_parse_cost(data.get("cost")),
        seed=_get(data, "seed", 0, "config", int),
        threads=_get(data, "threads", 1, "config", int),
        output_dir=data.get("output_dir"),
    )
    if cfg.electrons <= 0:
        raise ConfigError("config.electrons: must be positive")
    if cfg.threads < 1:
        raise ConfigError("config.threads: must be >= 1")
    cfg.raw = effective_dict(cfg)
    return cfg


def parse_config(path, mode_override: str | None = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return parse_config_dict(data, base=path.parent, mode_override=mode_override)


def effective_dict(cfg: RunConfig) -> dict:
    """Fully-expanded configuration with every default filled in."""
    return {
        "mode": cfg.mode,
        "seed": cfg.seed,
        "threads": cfg.threads,
        "output_dir": cfg.output_dir,
        "cell": {
            "a1": [float(x) for x in cfg.cell.a1],
            "a2": [float(x) for x in cfg.cell.a2],
            "a3": [float(x) for x in cfg.cell.a3],
            "qubits": [int(q) for q in cfg.cell.nq],
        },
        "electrons": cfg.electrons,
        "functionals": {
            "kinetic": cfg.functionals.kinetic,
            "exchange": cfg.functionals.exchange,
            "lambda": cfg.functionals.lam,
        },
        "external_potential": cfg.external_potential,
        "initial_density": cfg.initial_density,
        "scf": {
            "threshold": cfg.scf.threshold,
            "max_iterations": cfg.scf.max_iterations,
            "mixing": {
                "scheme": cfg.scf.mixing.kind,
                "alpha": cfg.scf.mixing.alpha,
                "history": cfg.scf.mixing.history,
            },
            "energy_report": cfg.scf.energy_report,
            "track_infidelity": cfg.scf.track_infidelity,
        },
        "pite": {
            "m0": cfg.pite.m0,
            "dtau": cfg.pite.dtau,
            "steps": cfg.pite.steps,
            "mode": cfg.pite.mode,
        },
        "qpe": {
            "dt": cfg.qpe.dt,
            "samples": cfg.qpe.samples,
            "target_std": cfg.qpe.target_std,
            "grid_size": cfg.qpe.grid_size,
            "k_scale": cfg.qpe.k_scale,
            "prior": list(cfg.qpe.prior) if cfg.qpe.prior else None,
        },
        "cost": dict(cfg.cost),
    }


def emit_config(cfg: RunConfig, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(effective_dict(cfg), fh, sort_keys=True)


def config_hash(cfg: RunConfig) -> str:
    """Hash of everything that influences results.

    Pure execution knobs (threads, output_dir) are excluded so reruns of the
    same physics produce identically-stamped traces.
    """
    payload = effective_dict(cfg)
    payload.pop("threads", None)
    payload.pop("output_dir", None)
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]
