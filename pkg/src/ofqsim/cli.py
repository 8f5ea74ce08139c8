"""Command-line front end.

Subcommands select the run mode (scf, pite-demo, qpe, cost, oracle-scf);
the YAML config supplies everything else. Per-iteration records go to
machine-readable trace files that are byte-identical across reruns with
the same config and seed; wall-clock timing lives only in metadata.json.

Exit codes: 0 converged/complete, 2 not converged within budget, 1 error.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .config import (OUTPUT_DIR_ENV, ConfigError, RunConfig, config_hash,
                     effective_dict, emit_config, parse_config)
from .eigensolve import dense_ground_state
from .hamiltonian import MAX_DENSE_DIM
from .ofham import (DensityGrid, assemble_hamiltonian, external_potential,
                    read_grid_file, uniform_density, write_grid_file)
from .pite import run_pite
from .qpe import QpeConfig, estimate_ground_energy
from .resources import cost_sweep
from .scf import classical_scf_oracle, encode_density, scf_loop, write_trace_jsonl

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ofqsim",
        description="Orbital-free DFT with simulated quantum ground-state subroutines",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode, help_text in (
        ("scf", "hybrid self-consistent loop with imaginary-time ground states"),
        ("oracle-scf", "reference loop with exact eigensolver ground states"),
        ("pite-demo", "imaginary-time trajectory for a fixed Hamiltonian"),
        ("qpe", "Bayesian ground-energy estimation"),
        ("cost", "circuit resource sweep (CSV)"),
    ):
        p = sub.add_parser(mode, help=help_text)
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--threads", type=int, default=None, help="worker threads")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--dump-state", action="store_true",
                       help="write the final statevector snapshot")
    return parser


def _resolve_out_dir(cfg: RunConfig, flag_value: str | None) -> Path:
    for candidate in (flag_value, cfg.output_dir, os.environ.get(OUTPUT_DIR_ENV)):
        if candidate:
            return Path(candidate)
    return Path("ofqsim_runs") / f"{cfg.mode}-{config_hash(cfg)}"


def _build_problem(cfg: RunConfig):
    cell = cfg.cell
    v_ext = external_potential(cfg.external_potential, cell)
    if cfg.initial_density["kind"] == "file":
        values = read_grid_file(cfg.initial_density["path"], cell)
        rho0 = DensityGrid(values, cfg.electrons, cell).normalized()
    else:
        rho0 = uniform_density(cell, cfg.electrons)
    return cell, v_ext, rho0


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


def run(cfg: RunConfig, out_dir: Path, dump_state: bool = False) -> int:
    """Execute the configured mode; returns the process exit code."""
    out_dir.mkdir(parents=True, exist_ok=True)
    _kernels.set_num_threads(cfg.threads)
    chash = config_hash(cfg)
    t_start = time.perf_counter()
    outputs: list[Path] = []
    meta: dict = {
        "version": __version__,
        "mode": cfg.mode,
        "seed": cfg.seed,
        "config_hash": chash,
        "config": effective_dict(cfg),
        "started": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    emit_config(cfg, out_dir / "effective_config.yaml")
    outputs.append(out_dir / "effective_config.yaml")

    status = EXIT_OK
    if cfg.mode in ("scf", "oracle-scf"):
        cell, v_ext, rho0 = _build_problem(cfg)
        if cfg.mode == "scf":
            trace = scf_loop(rho0, cfg.functionals, v_ext, cfg.scf)
        else:
            trace = classical_scf_oracle(rho0, cfg.functionals, v_ext, cfg.scf,
                                         seed=cfg.seed)
        trace_path = out_dir / "trace.jsonl"
        write_trace_jsonl(trace, trace_path, chash, cfg.seed)
        outputs.append(trace_path)
        dens_path = out_dir / "final_density.dat"
        write_grid_file(dens_path, trace.final_density.values, cell)
        outputs.append(dens_path)
        if cfg.mode == "scf" and any(trace.step_infidelities):
            steps_path = out_dir / "step_infidelities.csv"
            with open(steps_path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["# config_hash", chash])
                writer.writerow(["iteration", "step", "infidelity"])
                for k, steps in enumerate(trace.step_infidelities, start=1):
                    for j, x in enumerate(steps, start=1):
                        writer.writerow([k, j, repr(x)])
            outputs.append(steps_path)
        if dump_state and trace.final_state is not None:
            state_path = out_dir / "state.bin"
            trace.final_state.dump(state_path)
            outputs.append(state_path)
        meta["iterations"] = len(trace.iterations)
        meta["status"] = trace.status
        meta["final_energy"] = trace.final_energy
        meta["final_residual"] = trace.final_residual
        meta["iteration_seconds"] = [it.seconds for it in trace.iterations]
        h = assemble_hamiltonian(trace.final_density, cfg.functionals, v_ext)
        meta["operator_norms"] = h.norms_report()
        status = EXIT_OK if trace.converged else EXIT_NOT_CONVERGED

    elif cfg.mode == "pite-demo":
        cell, v_ext, rho0 = _build_problem(cfg)
        h = assemble_hamiltonian(rho0, cfg.functionals, v_ext)
        reference = None
        if cell.ngrid <= MAX_DENSE_DIM:
            reference = dense_ground_state(h)[1]
        ancillas = ("pite",) if cfg.pite.mode == "approximate" else ()
        state = encode_density(rho0, ancillas)
        traj = run_pite(state, h, cfg.pite, reference=reference)
        traj_path = out_dir / "trajectory.csv"
        traj.to_csv(traj_path)
        outputs.append(traj_path)
        if dump_state:
            state_path = out_dir / "state.bin"
            traj.final_state.dump(state_path)
            outputs.append(state_path)
        meta["steps"] = cfg.pite.steps
        meta["total_success_probability"] = traj.total_probability
        meta["final_infidelity"] = traj.infidelities[-1] if traj.infidelities else None
        meta["operator_norms"] = h.norms_report()

    elif cfg.mode == "qpe":
        cell, v_ext, rho0 = _build_problem(cfg)
        h = assemble_hamiltonian(rho0, cfg.functionals, v_ext)
        state = encode_density(rho0)
        traj = run_pite(state, h, cfg.pite)
        rng = np.random.default_rng(cfg.seed)
        result = estimate_ground_energy(traj.final_state, h, cfg.qpe, rng)
        csv_path = out_dir / "transcript.csv"
        result.transcript_to_csv(csv_path)
        outputs.append(csv_path)
        meta["estimate_mean"] = result.mean
        meta["estimate_std"] = result.std
        meta["samples_used"] = result.samples_used
        meta["reached_target"] = result.reached_target
        meta["pite_success_probability"] = traj.total_probability
        if dump_state:
            state_path = out_dir / "state.bin"
            traj.final_state.dump(state_path)
            outputs.append(state_path)
        if cfg.qpe.target_std > 0.0 and not result.reached_target:
            status = EXIT_NOT_CONVERGED

    elif cfg.mode == "cost":
        rows = cost_sweep(
            range(cfg.cost["n_org_min"], cfg.cost["n_org_max"] + 1),
            groups=cfg.cost["groups"],
        )
        cost_path = out_dir / "cost.csv"
        with open(cost_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["# config_hash", chash])
            writer.writerow(["ngrid", "groups", "qubits", "depth", "gates"])
            for row in rows:
                writer.writerow([row["ngrid"], row["groups"], row["qubits"],
                                 row["depth"], row["gates"]])
        outputs.append(cost_path)
        meta["rows"] = len(rows)

    meta["wall_seconds"] = time.perf_counter() - t_start
    meta["outputs"] = {p.name: _file_digest(p) for p in outputs if p.exists()}
    with open(out_dir / "metadata.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config, mode_override=args.mode)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.raw = effective_dict(cfg)
    if args.threads is not None:
        cfg.threads = args.threads
        cfg.raw = effective_dict(cfg)
    out_dir = _resolve_out_dir(cfg, args.out)
    try:
        code = run(cfg, out_dir, dump_state=args.dump_state)
    except Exception as exc:  # surfaced as structured diagnostics, exit 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"{cfg.mode}: wrote {out_dir} (exit {code})")
    return code


if __name__ == "__main__":
    sys.exit(main())
