"""
The run loop: initial state, coupled steps, cadenced diagnostics and snapshots, checkpoints.
"""
import logging
import pathlib

import numpy as np

from . import diagnostics, error
from .benchmarks import init_tanh_circle, init_tanh_plane
from .config import RunConfig
from .const import CHECKPOINT_FORMAT_VERSION
from .constitutive import Constitutive
from .grid import ScalarField, VectorField
from .model import CheckpointHeader, InitKind
from .timestepper import SimState, Stepper, get_stepper
from .utils import snapshot

log = logging.getLogger(__name__)

FIELDS_DIR = "fields"
DIAGNOSTICS_FILE = "diagnostics.csv"


def _effective_params(cfg: RunConfig):
    return Stepper(cfg.model, cfg.step).params


def restore_state(cfg: RunConfig, directory) -> SimState:
    """
    Load a checkpoint written for the same parameters and grid.

    :raises: :class:`.error.CheckpointMismatch`, :class:`.error.SnapshotFormatError`
    """
    arrays, header = snapshot.read_checkpoint(directory)
    params = _effective_params(cfg)
    if header.params_digest != params.digest():
        raise error.CheckpointMismatch(
            f"Checkpoint in {directory} was written for other parameters"
        )
    if header.grid_digest != cfg.grid.digest():
        raise error.CheckpointMismatch(f"Checkpoint in {directory} was written for another grid")
    g = cfg.grid
    try:
        vel = VectorField(g, arrays["u"], arrays["v"])
        state = SimState(
            t=header.t,
            phi=ScalarField(g, arrays["phi"]),
            q=ScalarField(g, arrays["q"]),
            vel=vel,
            p=ScalarField(g, arrays["p"]),
            step=header.step,
        )
    except error.InvalidField as ex:
        raise error.CheckpointMismatch(f"Checkpoint arrays do not fit the grid: {ex}") from ex
    log.info(f"Restored t={state.t:.6g} (step {state.step}) from {directory}")
    return state


def initial_state(cfg: RunConfig) -> SimState:
    """
    Build the initial state described by ``cfg.init``.
    """
    init, g = cfg.init, cfg.grid
    params = _effective_params(cfg)
    if init.kind is InitKind.CHECKPOINT:
        return restore_state(cfg, init.path)
    if init.kind is InitKind.UNIFORM:
        phi = np.full(g.shape, init.phi)
    elif init.kind is InitKind.TANH_CIRCLE:
        phi = init_tanh_circle(g, init.r0, params.eps, init.inside, init.center).values
    else:
        x0 = g.lx / 2 if init.x0 is None else init.x0
        phi = init_tanh_plane(g, x0, params.eps, init.orientation).values
    if cfg.noise:
        rng = np.random.default_rng(cfg.seed)
        phi = phi + cfg.noise * rng.uniform(-1.0, 1.0, g.shape)
    return SimState.initial(g, phi, init.theta, params)


def write_fields(directory: pathlib.Path, state: SimState, params):
    """Snapshot ``phi``, ``theta``, ``u``, ``v`` and ``p`` as ``<name>_<step>.nsac``."""
    g = state.grid
    theta = Constitutive(params).theta(state.q.values)
    fields = {
        "phi": state.phi.values,
        "theta": theta,
        "u": state.vel.u,
        "v": state.vel.v,
        "p": state.p.values,
    }
    for name, values in fields.items():
        path = directory / f"{name}_{state.step:06d}.nsac"
        snapshot.write_snapshot(path, values, g.lx, g.ly, state.t)


def write_state_checkpoint(directory, state: SimState, params, cfg: RunConfig):
    header = CheckpointHeader(
        format_version=CHECKPOINT_FORMAT_VERSION,
        t=state.t,
        step=state.step,
        params_digest=params.digest(),
        grid_digest=cfg.grid.digest(),
    )
    arrays = {
        "phi": state.phi.values,
        "q": state.q.values,
        "u": state.vel.u,
        "v": state.vel.v,
        "p": state.p.values,
    }
    snapshot.write_checkpoint(directory, arrays, cfg.grid.lx, cfg.grid.ly, header)


def run(cfg: RunConfig) -> int:
    """
    Advance from the initial state to ``cfg.t_end``.

    Writes ``diagnostics.csv``, ``fields/<name>_<step>.nsac`` snapshots and a final checkpoint into
    ``cfg.output_dir``.

    :return: ``0`` on success, ``1`` when a step failed (the last good state is checkpointed).
    """
    out = pathlib.Path(cfg.output_dir)
    fields_dir = out / FIELDS_DIR
    fields_dir.mkdir(parents=True, exist_ok=True)
    params = _effective_params(cfg)
    state = initial_state(cfg)
    initial_step = state.step
    if cfg.init.kind is not InitKind.CHECKPOINT:
        diagnostics.initial_average_condition(state, params)
    clamp = 0.0
    log.info(f"Run from t={state.t:.6g} to t_end={cfg.t_end:.6g} on {cfg.grid.nx}x{cfg.grid.ny}")

    with diagnostics.DiagWriter(out / DIAGNOSTICS_FILE) as writer:
        last = diagnostics.record(state, params)
        writer.write(last)
        write_fields(fields_dir, state, params)
        while state.t < cfg.t_end and not np.isclose(state.t, cfg.t_end, rtol=1e-12, atol=0.0):
            step_cfg = cfg.step
            remaining = cfg.t_end - state.t
            if remaining < step_cfg.dt:
                step_cfg = step_cfg.replace(dt=remaining)
            try:
                state, report = get_stepper(cfg.model, step_cfg).step(state)
            except error.StepFailure as ex:
                log.error(f"Run stopped at t={state.t:.6g}: {ex}")
                write_state_checkpoint(out, state, params, cfg)
                return 1
            clamp += report.clamp_mass
            taken = state.step - initial_step
            if taken % cfg.diag_every == 0:
                last = diagnostics.record(state, params, clamp)
                writer.write(last)
                log.info(
                    f"t={state.t:.6g} E_tot={last.E_tot:.10g} S={last.S:.10g} "
                    f"phi in [{last.phi_min:.4f}, {last.phi_max:.4f}]"
                )
            if taken % cfg.snapshot_every == 0:
                write_fields(fields_dir, state, params)
        if last.t != state.t:
            writer.write(diagnostics.record(state, params, clamp))

    write_state_checkpoint(out, state, params, cfg)
    log.info(f"Run finished at t={state.t:.6g} after {state.step - initial_step} steps")
    return 0
