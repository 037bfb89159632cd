"""
Flat ``key = value`` run configuration.

Blank lines and lines starting with ``#`` are ignored, a trailing ``# comment`` after a value is
stripped and keys are dotted ``section.name``. Every error names the offending line.
"""
import logging
import typing
from dataclasses import dataclass, field

from . import error
from .grid import GridSpec
from .model import (
    AdvectionScheme,
    HeatLagging,
    InitialCondition,
    InitKind,
    LatentHeatKind,
    LatentHeatSpec,
    ModelParams,
    PhiSplitting,
    StepConfig,
    ViscosityProfile,
)

log = logging.getLogger(__name__)

_TRUE = ("true", "yes", "1")
_FALSE = ("false", "no", "0")


def _bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"expected a number, got {text!r}") from None


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"expected an integer, got {text!r}") from None


def _str(text: str) -> str:
    if not text:
        raise ValueError("expected a non-empty value")
    return text


def _selector(enum):
    return enum.from_name


# key -> parser; the default lives on the dataclass the key feeds
KEYS: typing.Dict[str, typing.Callable[[str], typing.Any]] = {
    "grid.nx": _int,
    "grid.ny": _int,
    "grid.lx": _float,
    "grid.ly": _float,
    "model.eps": _float,
    "model.alpha": _float,
    "model.beta": _float,
    "model.kappa1": _float,
    "model.kappa2": _float,
    "model.nu1": _float,
    "model.nu2": _float,
    "model.nu_profile": _selector(ViscosityProfile),
    "model.latent": _selector(LatentHeatKind),
    "model.lambda_lin": _float,
    "model.delta": _float,
    "model.delta0": _float,
    "step.dt": _float,
    "step.cfl_target": _float,
    "step.poisson_tol": _float,
    "step.max_iters": _int,
    "step.phi_splitting": _selector(PhiSplitting),
    "step.heat_lagging": _selector(HeatLagging),
    "step.phi_advection": _selector(AdvectionScheme),
    "step.q_advection": _selector(AdvectionScheme),
    "step.adaptive": _bool,
    "step.newton_tol": _float,
    "step.newton_max_iters": _int,
    "step.delta": _float,
    "init.kind": _selector(InitKind),
    "init.phi": _float,
    "init.theta": _float,
    "init.r0": _float,
    "init.center_x": _float,
    "init.center_y": _float,
    "init.inside": _float,
    "init.x0": _float,
    "init.orientation": _float,
    "init.noise": _float,
    "init.path": _str,
    "run.t_end": _float,
    "run.diag_every": _int,
    "run.snapshot_every": _int,
    "run.output_dir": _str,
    "run.seed": _int,
}

REQUIRED = ("grid.nx", "grid.ny")


@dataclass(frozen=True)
class RunConfig:
    """
    Everything a run needs.

    :ivar grid: The :class:`.grid.GridSpec`.
    :ivar model: The :class:`.model.ModelParams`.
    :ivar step: The :class:`.model.StepConfig`.
    :ivar init: The :class:`.model.InitialCondition`.
    :ivar t_end: Final time, ``0`` writes the initial diagnostics only.
    :ivar diag_every: Steps between diagnostic rows.
    :ivar snapshot_every: Steps between field snapshots.
    :ivar output_dir: Directory receiving every output file.
    :ivar seed: Seed of the initial perturbation ``init.noise``.
    :ivar noise: Amplitude of a uniform random perturbation added to the initial ``φ``.
    """

    grid: GridSpec
    model: ModelParams = field(default_factory=ModelParams)
    step: StepConfig = field(default_factory=StepConfig)
    init: InitialCondition = field(default_factory=InitialCondition)
    t_end: float = 0.01
    diag_every: int = 1
    snapshot_every: int = 100
    output_dir: str = "nsac-out"
    seed: int = 0
    noise: float = 0.0


def _split(text: str):
    """Yield ``(line_number, key, value)`` for every entry."""
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise error.ConfigError(f"expected 'key = value', got {line!r}", number)
        key = key.strip()
        value = value.split("#", 1)[0].strip()
        if not key:
            raise error.ConfigError("missing key", number)
        yield number, key, value


def _collect(text: str) -> typing.Tuple[dict, dict]:
    values, lines = {}, {}
    for number, key, raw in _split(text):
        if key in lines:
            raise error.ConfigError(
                f"duplicate key {key!r} (first set on line {lines[key]})", number
            )
        parser = KEYS.get(key)
        if parser is None:
            raise error.ConfigError(f"unknown key {key!r}", number)
        try:
            values[key] = parser(raw)
        except error.UnknownScheme as ex:
            raise error.ConfigError(str(ex), number) from ex
        except ValueError as ex:
            raise error.ConfigError(f"{key}: {ex}", number) from ex
        lines[key] = number
    return values, lines


def _section(values: dict, prefix: str) -> dict:
    start = len(prefix) + 1
    return {key[start:]: value for key, value in values.items() if key[: start - 1] == prefix}


def _latent(model: dict) -> LatentHeatSpec:
    kind = model.pop("latent", LatentHeatKind.ARCTAN)
    lam = model.pop("lambda_lin", None)
    if kind is LatentHeatKind.LINEAR:
        return LatentHeatSpec.linear(1.0 if lam is None else lam)
    if lam is not None:
        log.warning("model.lambda_lin is ignored for the arctan latent heat")
    return LatentHeatSpec.arctan()


def _check_initial(init: InitialCondition, noise: float, grid: GridSpec, params: ModelParams):
    """Range checks of the initial data against the interface width and the domain."""
    if init.kind is InitKind.TANH_CIRCLE:
        lo, hi = 4 * params.eps, min(grid.lx, grid.ly) / 2 - 4 * params.eps
        if not lo < init.r0 < hi:
            raise error.InvalidParameter(
                "init.r0", f"init.r0 = {init.r0} must lie in ({lo:.6g}, {hi:.6g})"
            )
    if init.kind is not InitKind.CHECKPOINT and not init.theta >= 0:
        raise error.InvalidParameter("init.theta", f"init.theta = {init.theta} must be >= 0")
    if not noise >= 0:
        raise error.InvalidParameter("init.noise", f"init.noise = {noise} must be >= 0")


def _build(values: dict) -> RunConfig:
    g = _section(values, "grid")
    grid = GridSpec(g["nx"], g["ny"], g.get("lx", 1.0), g.get("ly", 1.0))

    model = _section(values, "model")
    latent = _latent(model)
    params = ModelParams(latent=latent, **model)

    step = StepConfig(**_section(values, "step"))
    if step.delta is not None:
        try:
            params.replace(delta=step.delta)
        except error.InvalidParameter as ex:
            raise error.InvalidParameter("step.delta", ex.msg) from ex

    init = _section(values, "init")
    noise = init.pop("noise", 0.0)
    center = None
    if "center_x" in init or "center_y" in init:
        center = (init.pop("center_x", grid.lx / 2), init.pop("center_y", grid.ly / 2))
    initial = InitialCondition(center=center, **init)
    if initial.kind is InitKind.CHECKPOINT and initial.path is None:
        raise error.InvalidParameter("init.kind", "init.path is required for a checkpoint start")
    _check_initial(initial, noise, grid, params)

    run = _section(values, "run")
    if run.get("t_end", 0.0) < 0:
        raise error.InvalidParameter("run.t_end", "t_end must be >= 0")
    for key in ("diag_every", "snapshot_every"):
        if run.get(key, 1) < 1:
            raise error.InvalidParameter(f"run.{key}", "cadences must be >= 1")
    return RunConfig(grid=grid, model=params, step=step, init=initial, noise=noise, **run)


def _line_of(key: str, lines: dict) -> typing.Optional[int]:
    if key in lines:
        return lines[key]
    section = key.split(".", 1)[0]
    candidates = [number for name, number in lines.items() if name.startswith(section + ".")]
    return min(candidates) if candidates else None


def parse_config(text: str) -> RunConfig:
    """
    Parse and fully validate a run configuration.

    :param text: Contents of the configuration file.
    :return: :class:`RunConfig`
    :raises: :class:`.error.ConfigError` citing the offending line.
    """
    values, lines = _collect(text)
    for key in REQUIRED:
        if key not in values:
            raise error.ConfigError(f"missing required key {key!r}")
    try:
        cfg = _build(values)
    except error.InvalidParameter as ex:
        raise error.ConfigError(ex.msg, _line_of(ex.key, lines)) from ex
    log.debug(f"Parsed configuration with {len(values)} entries")
    return cfg


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as handle:
        return parse_config(handle.read())
