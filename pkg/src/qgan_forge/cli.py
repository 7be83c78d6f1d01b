"""Command-line entry point: ``qgan-forge {run, grad-check, qpt, dump-circuit}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .ansatz import Experiment, LabelValue, assemble_training_circuit, build_discriminator, build_generator, mixed_state_preparation
from .circuit import Circuit, dumps
from .config import ConfigError, RunManifest, bundled_config, load_config, loads_config, noise_to_dict
from .gates import GateKind, GateOp
from .grad import Engine, circuit_gradient, value_gradient
from .noise import NoiseModel
from .tomo import characterize, gate_library
from .train import NumericalError, StepRecord, TrainConfig, Trajectory, initial_parameters, run_adversarial, truth_table

log = logging.getLogger("qgan_forge")

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED = 0, 1, 2
CSV_COLUMNS = ("round", "stage", "step", "V", "S_D_R_mean", "S_D_G_mean", "F_mean", "theta_hash")
GRAD_TOL = 1e-5

# measured process fidelities of the hardware, printed next to simulated ones
HARDWARE_FIDELITY = {"u_ent2": (0.9716, 0.0110), "u_ent3": (0.9456, 0.0154)}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage, which would collide with "not converged"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- shared option handling --------------------------------------------------

def resolve_config(source: Optional[str], default: str = "mixed_state") -> tuple[TrainConfig, Optional[NoiseModel], str]:
    """``source`` is a path or the name of a bundled config."""
    source = source or default
    if Path(source).is_file():
        train, noise = load_config(source)
        return train, noise, str(source)
    name = source[:-4] if source.endswith(".cfg") else source
    try:
        text = bundled_config(name)
    except KeyError:
        raise ConfigError(f"{source}: no such file or bundled config") from None
    train, noise = loads_config(text, f"{name}.cfg")
    return train, noise, f"bundled:{name}"


def resolve_noise(flag: Optional[str], current: Optional[NoiseModel], dd: bool = False) -> Optional[NoiseModel]:
    if flag is None:
        noise = current
    elif flag == "off":
        noise = None
    elif flag == "table-s1":
        noise = NoiseModel.table_s1()
    else:
        _, noise = load_config(flag)
        if noise is None:
            raise ConfigError(f"{flag}: no enabled [noise] section")
    if noise is not None and dd:
        noise = NoiseModel(**{**noise_to_dict(noise), "dd_protected_idle": True})
    return noise


def _parse_engines(text: str) -> list[Engine]:
    out = []
    for name in text.split(","):
        try:
            out.append(Engine(name.strip()))
        except ValueError:
            raise UsageError(f"unknown engine {name.strip()!r}; choose from {[e.value for e in Engine]}") from None
    return out


# --- trajectory files ----------------------------------------------------------

def trajectory_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    buf.write(f"# qgan-forge v{__version__}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in traj.records:
        w.writerow([r.round, r.stage, r.step, repr(r.V), repr(r.s_r_mean), repr(r.s_g_mean), repr(r.f_mean), r.theta_hash])
    return buf.getvalue()


def read_trajectory_csv(text: str) -> Trajectory:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# qgan-forge v"):
        raise ValueError("missing version header")
    traj = Trajectory()
    for row in csv.DictReader(lines[1:]):
        traj.records.append(
            StepRecord(
                int(row["round"]), row["stage"], int(row["step"]), float(row["V"]),
                (float(row["S_D_R_mean"]),), (float(row["S_D_G_mean"]),),
                float(row["F_mean"]), math.nan, row.get("theta_hash", ""),
            )
        )
    return traj


def _params_json(pv) -> dict:
    return {"keys": [list(k) for k in pv.keys], "values": [repr(float(v)) for v in pv.values]}


def write_run(out: Path, traj: Trajectory, config: TrainConfig, noise, manifest: RunManifest) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    (out / "trajectory.csv").write_text(trajectory_csv(traj))
    (out / "manifest.json").write_text(manifest.to_json())
    final = traj.final
    summary = {
        "converged": traj.converged,
        "stop_reason": traj.stop_reason,
        "rounds": traj.rounds,
        "total_steps": traj.total_steps,
        "V": repr(final.V),
        "F_mean": repr(final.f_mean),
        "theta_d": _params_json(traj.theta_d),
        "theta_g": _params_json(traj.theta_g),
    }
    if config.experiment is Experiment.XOR:
        table = truth_table(config.setup(), traj.theta_g, noise)
        summary["truth_table"] = table
        (out / "truth_table.json").write_text(json.dumps(table, indent=2, sort_keys=True) + "\n")
    (out / "final_params.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


# --- subcommands -----------------------------------------------------------------

def cmd_run(args) -> int:
    if args.manifest:
        m = RunManifest.from_json(Path(args.manifest).read_text())
        config, noise, cfg_path = m.train_config(), m.noise_model(), m.config_path
    else:
        config, noise, cfg_path = resolve_config(args.config)
    noise = resolve_noise(args.noise, noise, args.dd)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.engine is not None:
        overrides["grad_engine"] = _parse_engines(args.engine)[0]
    if args.shots is not None:
        overrides["shots"] = args.shots
    if overrides:
        try:
            config = TrainConfig(**{**config.to_dict(), **overrides})
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    out = Path(args.out or f"runs/{config.experiment.value}-seed{config.seed}")
    manifest = RunManifest("run", cfg_path, config.to_dict(), noise_to_dict(noise), config.seed, str(out))
    try:
        traj = run_adversarial(config, noise)
    except NumericalError as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        traj = exc.trajectory
        if not traj or not traj.records:
            return EXIT_NOT_CONVERGED
    summary = write_run(out, traj, config, noise, manifest)
    print(f"{config.experiment.value}: {summary['stop_reason']} after {traj.total_steps} steps, {traj.rounds} rounds")
    print(f"final V = {traj.final.V:.6f}  F = {traj.final.f_mean:.6f}")
    if "truth_table" in summary:
        for label, row in summary["truth_table"].items():
            print(f"  {label} -> {row['bit']}  (p1 = {row['p1']:.4f}, xor = {row['xor']})")
    print(f"wrote {out}/")
    return EXIT_OK if traj.converged else EXIT_NOT_CONVERGED


def _rx_sweep_rows(engines, noise, delay_ns, shots, seed):
    from .rng import stream

    rows = []
    local = noise.restrict((0, 1)) if noise is not None else None
    for i in range(25):
        theta = 2 * math.pi * i / 25
        circ = Circuit(2, [GateOp(GateKind.RX, (1,), theta, param=(1, 1, "x", "G"))])
        key = circ.params[0]
        vals = {}
        for e in engines:
            kw = {}
            if e is not Engine.FINITE_DIFF:
                kw["shots"] = shots
                kw["rng"] = stream(seed, f"grad-check-{e.value}", i) if shots else None
            if e is Engine.HADAMARD_TEST:
                kw["delay_ns"] = delay_ns
            vals[e.value] = circuit_gradient(circ, key, e, noise=local, **kw)
        rows.append((f"theta={theta:.6f}", vals, -math.sin(theta)))
    return rows


def _ansatz_rows(experiment, engines, noise, shots, seed):
    config = TrainConfig.xor(seed=seed) if experiment is Experiment.XOR else TrainConfig.mixed_state(seed=seed)
    setup = config.setup()
    theta_d, theta_g = initial_parameters(config, setup)
    grads = {e.value: {} for e in engines}
    for e in engines:
        for side in ("G", "D"):
            gv = value_gradient(side, theta_d, theta_g, setup, e, noise, shots, seed)
            for k, v in zip(gv.keys, gv.values):
                grads[e.value][k] = float(v)
    keys = list(theta_g.keys) + list(theta_d.keys)
    return [(":".join(str(p) for p in k), {e: grads[e][k] for e in grads}, None) for k in keys]


def cmd_grad_check(args) -> int:
    engines = _parse_engines(args.engines)
    if len(set(engines)) < 2:
        raise UsageError("grad-check needs at least two distinct engines")
    _, noise, _ = resolve_config(args.config) if args.config else (None, None, None)
    noise = resolve_noise(args.noise, noise, args.dd)
    shots = args.shots or 0
    if args.target == "rx-sweep":
        rows = _rx_sweep_rows(engines, noise, args.delay_ns, shots, args.seed)
    elif args.target in ("xor", "mixed"):
        exp = Experiment.XOR if args.target == "xor" else Experiment.MIXED_STATE
        rows = _ansatz_rows(exp, engines, noise, shots, args.seed)
    else:
        raise UsageError(f"unknown grad-check target {args.target!r}; choose rx-sweep, xor or mixed")

    names = [e.value for e in engines]
    has_ref = rows[0][2] is not None
    header = ["param"] + names + (["reference"] if has_ref else []) + ["max_disagreement"]
    table = []
    worst = 0.0
    for label, vals, ref in rows:
        col = [vals[n] for n in names]
        spread = max(col) - min(col)
        worst = max(worst, spread)
        table.append([label] + col + ([ref] if has_ref else []) + [spread])

    print("  ".join(f"{h:>16}" for h in header))
    for row in table:
        print(f"{row[0]:>16}  " + "  ".join(f"{v:>16.10f}" for v in row[1:]))
    if has_ref:
        for n in names:
            mae = float(np.mean([abs(vals[n] - ref) for _, vals, ref in rows]))
            print(f"mean |{n} - reference| = {mae:.3e}")
    print(f"max disagreement across engines = {worst:.3e}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "grad_check.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in table:
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
    # disagreement is only meaningful as a pass/fail when every engine sees the same exact circuit
    exact = noise is None and shots == 0
    if exact and worst > GRAD_TOL:
        print(f"FAIL: engines disagree by more than {GRAD_TOL:g}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_qpt(args) -> int:
    lib = gate_library()
    if args.gate not in lib:
        raise UsageError(f"unknown gate {args.gate!r}; choose from {', '.join(sorted(lib))}")
    noise = resolve_noise(args.noise, None, args.dd)
    chi_exp, chi_id, fid = characterize(args.gate, noise)
    line = f"{args.gate}: process fidelity tr(chi_exp chi_id) = {fid:.6f}"
    if noise is not None and args.gate in HARDWARE_FIDELITY:
        mu, sd = HARDWARE_FIDELITY[args.gate]
        line += f"  (hardware: {mu} +- {sd})"
    print(line)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{args.gate}_chi_exp.json").write_text(chi_exp.to_json() + "\n")
        (out / f"{args.gate}_chi_id.json").write_text(chi_id.to_json() + "\n")
    return EXIT_OK


def cmd_dump_circuit(args) -> int:
    config, _, _ = resolve_config(args.config)
    if args.seed is not None:
        config = TrainConfig(**{**config.to_dict(), "seed": args.seed})
    setup = config.setup()
    theta_d, theta_g = initial_parameters(config, setup)
    label = LabelValue.parse(args.label) if args.label else (setup.labels[0])
    if args.which == "generator":
        circ = build_generator(setup.g_spec, theta_g, label if setup.experiment is Experiment.XOR else None)
    elif args.which == "discriminator":
        circ = build_discriminator(setup.d_spec, theta_d)
    elif args.which == "mixed-prep":
        circ = mixed_state_preparation()
    else:
        source = "R" if args.which == "training-r" else "G"
        circ = assemble_training_circuit(setup, source, label, theta_g, theta_d).circuit
    text = dumps(circ)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qgan-forge", description="Quantum GAN simulator on a five-qubit register.")
    p.add_argument("--version", action="version", version=f"qgan-forge {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-round progress")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, noise=True):
        sp.add_argument("--config", help="config file, or bundled name: mixed_state, xor")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")
        if noise:
            sp.add_argument("--noise", help="off, table-s1, or a config file with a [noise] section")
            sp.add_argument("--dd", action="store_true", help="protect idles with dynamical decoupling")

    r = sub.add_parser("run", help="train a QGAN and write its trajectory")
    common(r)
    r.add_argument("--engine", help="hadamard, shift or fd")
    r.add_argument("--shots", type=int, help="0 = analytic expectations")
    r.add_argument("--manifest", help="replay a previous run's manifest.json")
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("grad-check", help="compare gradient engines")
    g.add_argument("target", nargs="?", default="rx-sweep", help="rx-sweep, xor or mixed")
    common(g)
    g.add_argument("--engines", "--engine", dest="engines", default="hadamard,shift,fd")
    g.add_argument("--shots", type=int, default=0)
    g.add_argument("--delay-ns", type=float, default=0.0, help="idle on the ancilla inside the Hadamard test")
    g.set_defaults(func=cmd_grad_check, seed=0)

    q = sub.add_parser("qpt", help="process tomography of a library gate")
    q.add_argument("gate")
    q.add_argument("--noise", help="off, table-s1, or a config file with a [noise] section")
    q.add_argument("--dd", action="store_true")
    q.add_argument("--out")
    q.set_defaults(func=cmd_qpt)

    d = sub.add_parser("dump-circuit", help="print a circuit in the line format")
    d.add_argument(
        "which", nargs="?", default="training-g",
        choices=["generator", "discriminator", "mixed-prep", "training-r", "training-g"],
    )
    common(d, noise=False)
    d.add_argument("--label", help="two-bit XOR label, e.g. 10")
    d.set_defaults(func=cmd_dump_circuit)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
