"""Alternating D-ascent / G-descent training and its trajectory record."""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .ansatz import Experiment, ParamVector, QGANSetup
from .grad import Engine, loss_gradient
from .objective import LossReport, loss, score
from .qsim import DensityMatrix, expectation, overlap_fidelity, state_fidelity
from .rng import stream

log = logging.getLogger(__name__)

__all__ = [
    "NumericalError",
    "TrainConfig",
    "StepRecord",
    "Trajectory",
    "score",
    "loss",
    "train_stage",
    "run_adversarial",
    "mean_fidelity",
    "truth_table",
]


class NumericalError(ArithmeticError):
    """The loss became non-finite; ``trajectory`` holds the records so far."""

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass
class TrainConfig:
    experiment: Experiment = Experiment.MIXED_STATE
    alpha_d: float = 0.8
    alpha_g: float = 0.6
    max_steps_d: int = 50
    max_steps_g: int = 100
    max_rounds: int = 30
    max_total_steps: int = 600
    grad_engine: Engine = Engine.HADAMARD_TEST
    seed: int = 0
    stop_grad_norm: float = 1e-3
    stop_loss_abs: float = 0.02
    stop_delta_v: float = 1e-6
    fidelity_plateau: float = 1e-3
    init_low: float = 0.0
    init_high: float = math.pi
    shots: int = 0
    g_layers: int = 2
    d_layers: int = 3
    rho_r: str = "circuit"
    fidelity_via_tomography: bool = False

    def __post_init__(self):
        self.experiment = Experiment(self.experiment)
        self.grad_engine = Engine(self.grad_engine)
        # zero rates are accepted to allow degenerate runs; negative ones are not
        if self.alpha_d < 0 or self.alpha_g < 0:
            raise ValueError("learning rates must be non-negative")
        if min(self.max_steps_d, self.max_steps_g, self.max_rounds, self.max_total_steps) < 1:
            raise ValueError("step limits must be at least 1")
        if self.stop_grad_norm < 0 or self.stop_loss_abs < 0:
            raise ValueError("stopping thresholds must be non-negative")
        if self.shots < 0:
            raise ValueError("shots must be >= 0")
        if self.rho_r not in ("circuit", "printed"):
            raise ValueError("rho_r must be 'circuit' or 'printed'")
        self.seed = int(self.seed) & (2**64 - 1)

    @classmethod
    def mixed_state(cls, **kw) -> "TrainConfig":
        base = dict(experiment=Experiment.MIXED_STATE, alpha_d=0.8, alpha_g=0.6, max_steps_d=50, max_steps_g=100, max_total_steps=600)
        return cls(**{**base, **kw})

    @classmethod
    def xor(cls, **kw) -> "TrainConfig":
        base = dict(experiment=Experiment.XOR, alpha_d=1.0, alpha_g=1.5, max_steps_d=50, max_steps_g=50, max_total_steps=400)
        return cls(**{**base, **kw})

    def setup(self) -> QGANSetup:
        return QGANSetup.for_experiment(self.experiment, g_layers=self.g_layers, d_layers=self.d_layers, rho_r=self.rho_r)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["experiment"] = self.experiment.value
        d["grad_engine"] = self.grad_engine.value
        return d


@dataclass
class StepRecord:
    round: int
    stage: str
    step: int
    V: float
    s_r: tuple[float, ...]
    s_g: tuple[float, ...]
    f_mean: float
    f_overlap_mean: float
    theta_hash: str
    theta_d: Optional[np.ndarray] = field(default=None, repr=False)
    theta_g: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def s_r_mean(self) -> float:
        return float(np.mean(self.s_r))

    @property
    def s_g_mean(self) -> float:
        return float(np.mean(self.s_g))

    def consistent(self, tol: float = 1e-12) -> bool:
        return abs(self.V - (self.s_r_mean - self.s_g_mean)) <= tol


@dataclass
class Trajectory:
    records: list[StepRecord] = field(default_factory=list)
    theta_d: Optional[ParamVector] = None
    theta_g: Optional[ParamVector] = None
    converged: bool = False
    stop_reason: str = ""
    rounds: int = 0
    total_steps: int = 0

    @property
    def final(self) -> StepRecord:
        return self.records[-1]


def theta_hash(theta_d: ParamVector, theta_g: ParamVector) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(theta_d.values, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(theta_g.values, dtype="<f8").tobytes())
    return h.hexdigest()[:16]


def _tomographic_data(setup: QGANSetup, theta_g: ParamVector, label, noise) -> DensityMatrix:
    from .tomo import qst

    rho = setup.generated_data(theta_g, label, noise)
    return qst(lambda p: expectation(rho, p), 1)


def fidelities(setup: QGANSetup, theta_g: ParamVector, noise=None, via_tomography: bool = False) -> tuple[list[float], list[float]]:
    """Per-label Uhlmann and overlap fidelities between R's and G's data qubit."""
    uhl, ovl = [], []
    for label in setup.labels:
        if via_tomography:
            rho_g = _tomographic_data(setup, theta_g, label, noise)
        else:
            rho_g = setup.generated_data(theta_g, label, noise)
        rho_r = setup.real_data(label)
        uhl.append(state_fidelity(rho_r, rho_g))
        ovl.append(overlap_fidelity(rho_r, rho_g))
    return uhl, ovl


def mean_fidelity(setup: QGANSetup, theta_g: ParamVector, noise=None, via_tomography: bool = False) -> float:
    return float(np.mean(fidelities(setup, theta_g, noise, via_tomography)[0]))


def truth_table(setup: QGANSetup, theta_g: ParamVector, noise=None) -> dict[str, dict]:
    """Generator's data-qubit populations per label and the argmax bit."""
    out = {}
    for label in setup.labels:
        rho = setup.generated_data(theta_g, label, noise).elements
        p1 = float(np.real(rho[1, 1]))
        key = "-" if label is None else str(label)
        out[key] = {"p0": 1 - p1, "p1": p1, "bit": int(p1 > 0.5), "xor": None if label is None else label.xor}
    return out


class _Runner:
    """Carries the run-wide state a stage needs (setup, noise, counters, records)."""

    def __init__(self, config: TrainConfig, noise=None):
        self.config = config
        self.setup = config.setup()
        self.noise = noise
        self.trajectory = Trajectory()
        self.counter = 0  # gradient evaluations, keys sampling streams

    def loss(self, theta_d, theta_g) -> LossReport:
        cfg = self.config
        rng = stream(cfg.seed, "sampling-loss", self.counter) if cfg.shots else None
        rep = loss(self.setup, theta_d, theta_g, self.noise, cfg.shots, rng)
        if not math.isfinite(rep.V):
            raise NumericalError("loss is not finite", self.trajectory)
        return rep

    def record(self, rnd, stage, step, rep: LossReport, theta_d, theta_g) -> StepRecord:
        uhl, ovl = fidelities(self.setup, theta_g, self.noise, self.config.fidelity_via_tomography)
        rec = StepRecord(
            rnd, stage, step, rep.V, rep.s_r, rep.s_g, float(np.mean(uhl)), float(np.mean(ovl)),
            theta_hash(theta_d, theta_g), theta_d.values.copy(), theta_g.values.copy(),
        )
        self.trajectory.records.append(rec)
        return rec

    @property
    def budget_left(self) -> int:
        return self.config.max_total_steps - self.trajectory.total_steps


def _stage(runner: _Runner, side: str, theta_d: ParamVector, theta_g: ParamVector, rnd: int):
    cfg = runner.config
    limit = cfg.max_steps_d if side == "D" else cfg.max_steps_g
    alpha = cfg.alpha_d if side == "D" else cfg.alpha_g
    rep = runner.loss(theta_d, theta_g)
    records = [runner.record(rnd, side, 0, rep, theta_d, theta_g)]
    reason = "limit"
    last_norm = math.inf
    for step in range(1, limit + 1):
        if side == "G" and rep.V**2 < cfg.stop_loss_abs**2:
            reason = "loss"
            break
        if runner.budget_left <= 0:
            reason = "budget"
            break
        runner.counter += 1
        grad = loss_gradient(
            side, theta_d, theta_g, runner.setup, cfg.grad_engine, runner.noise,
            cfg.shots, cfg.seed, v=rep.V, counter=runner.counter,
        )
        last_norm = grad.norm()
        if not math.isfinite(last_norm):
            raise NumericalError("gradient is not finite", runner.trajectory)
        if last_norm < cfg.stop_grad_norm:
            reason = "grad"
            break
        if side == "D":
            theta_d = theta_d.with_values(theta_d.values + alpha * grad.values)
        else:
            theta_g = theta_g.with_values(theta_g.values - alpha * grad.values)
        runner.trajectory.total_steps += 1
        new = runner.loss(theta_d, theta_g)
        records.append(runner.record(rnd, side, step, new, theta_d, theta_g))
        if side == "D" and new.V < rep.V - 1e-12:
            log.debug("round %d: D step %d lowered V (%.6g -> %.6g)", rnd, step, rep.V, new.V)
        flat = abs(new.V - rep.V) < cfg.stop_delta_v
        rep = new
        if side == "D" and flat:
            reason = "flat"
            break
    else:
        reason = "limit"
    if side == "G" and reason == "limit" and rep.V**2 < cfg.stop_loss_abs**2:
        reason = "loss"
    return theta_d, theta_g, records, reason, last_norm


def train_stage(side: str, theta_d: ParamVector, theta_g: ParamVector, config: TrainConfig, noise=None, round_index: int = 1):
    """One D (ascent on V) or G (descent on V**2) stage.

    Returns ``(theta_d, theta_g, records, stop_reason)``.
    """
    if side not in ("D", "G"):
        raise ValueError("side must be 'D' or 'G'")
    runner = _Runner(config, noise)
    theta_d, theta_g, records, reason, _ = _stage(runner, side, theta_d, theta_g, round_index)
    return theta_d, theta_g, records, reason


def initial_parameters(config: TrainConfig, setup: Optional[QGANSetup] = None) -> tuple[ParamVector, ParamVector]:
    setup = setup or config.setup()
    rng = stream(config.seed, "init")
    theta_d = ParamVector.random(setup.d_spec, rng, config.init_low, config.init_high)
    theta_g = ParamVector.random(setup.g_spec, rng, config.init_low, config.init_high)
    return theta_d, theta_g


def run_adversarial(
    config: TrainConfig,
    noise=None,
    theta_d: Optional[ParamVector] = None,
    theta_g: Optional[ParamVector] = None,
) -> Trajectory:
    """Alternate D then G stages until equilibrium or a budget runs out.

    Equilibrium: ``|V| < stop_loss_abs`` after the G stage, the mean fidelity
    moved less than ``fidelity_plateau`` over the round, and D actually
    trained (it moved, or its gradient was already below threshold).
    """
    runner = _Runner(config, noise)
    setup = runner.setup
    d0, g0 = initial_parameters(config, setup)
    theta_d = d0 if theta_d is None else theta_d
    theta_g = g0 if theta_g is None else theta_g
    traj = runner.trajectory
    f_prev = mean_fidelity(setup, theta_g, noise, config.fidelity_via_tomography)
    for rnd in range(1, config.max_rounds + 1):
        traj.rounds = rnd
        d_before = theta_d.values.copy()
        theta_d, theta_g, _, d_reason, d_norm = _stage(runner, "D", theta_d, theta_g, rnd)
        d_trained = bool(np.any(theta_d.values != d_before)) or d_reason == "grad"
        theta_d, theta_g, g_recs, g_reason, _ = _stage(runner, "G", theta_d, theta_g, rnd)
        end = g_recs[-1]
        log.info("round %d: V=%.5f F=%.6f (D:%s G:%s) steps=%d", rnd, end.V, end.f_mean, d_reason, g_reason, traj.total_steps)
        if abs(end.V) < config.stop_loss_abs and abs(end.f_mean - f_prev) < config.fidelity_plateau and d_trained:
            traj.converged = True
            traj.stop_reason = "equilibrium"
            break
        f_prev = end.f_mean
        if runner.budget_left <= 0:
            traj.stop_reason = "budget"
            break
    else:
        traj.stop_reason = "max_rounds"
    traj.theta_d, traj.theta_g = theta_d, theta_g
    return traj


def recompute(record: StepRecord, config: TrainConfig, noise=None) -> LossReport:
    """Re-evaluate V from a record's parameter snapshot (analytic mode)."""
    setup = config.setup()
    return loss(setup, setup.theta_d(record.theta_d), setup.theta_g(record.theta_g), noise)
