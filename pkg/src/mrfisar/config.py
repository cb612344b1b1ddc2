"""Plain-text key=value experiment configuration.

A document is a sequence of `key = value` lines; blank lines and comments
(`#` to end of line) are ignored.  Unknown keys, malformed lines,
duplicate keys and out-of-range values are parse errors naming the line
and key.  Missing keys fall back to the full-data simulation defaults
(35-36 GHz in 64 steps, 1.7 degrees in 64 steps, 5 km standoff).

`preset = ka-128` switches the defaults to the 128-step Ka-band
acquisition (34.5-35.3 GHz, 2 degrees); explicit keys still win.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .grid import ImageGrid, PhantomSpec
from .mrf import IsingParams, LikelihoodParams, McmcSchedule
from .operator import RadarConfig, default_grid
from .solvers import SolverParams

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "serialize_config",
           "default_config", "KNOWN_ALGORITHMS"]

KNOWN_ALGORITHMS = ("mrf-fista", "fista", "bp")

_PRESETS = {
    "ka-128": {
        "radar.f0_hz": "34.5e9",
        "radar.bandwidth_hz": "0.8e9",
        "radar.n_freq": "128",
        "radar.total_angle_deg": "2.0",
        "radar.n_angle": "128",
        "grid.nx": "128",
        "grid.ny": "128",
    },
}


class ConfigError(ValueError):
    pass


def _parse_float(raw: str) -> float:
    return float(raw)


def _parse_pos_float(raw: str) -> float:
    v = float(raw)
    if v <= 0:
        raise ValueError("must be positive")
    return v


def _parse_pos_int(raw: str) -> int:
    v = int(raw)
    if v <= 0:
        raise ValueError("must be a positive integer")
    return v


def _parse_nonneg_int(raw: str) -> int:
    v = int(raw)
    if v < 0:
        raise ValueError("must be >= 0")
    return v


def _parse_ratio_list(raw: str) -> tuple[float, ...]:
    toks = [t for t in raw.split(",") if t.strip()]
    if not toks:
        raise ValueError("empty list")
    vals = tuple(float(tok) for tok in toks)
    for v in vals:
        if not 0 < v <= 1:
            raise ValueError(f"ratio {v} outside (0, 1]")
    return vals


def _parse_snr_list(raw: str) -> tuple[float, ...]:
    toks = [t for t in raw.split(",") if t.strip()]
    if not toks:
        raise ValueError("empty list")
    vals = tuple(float(tok) for tok in toks)
    for v in vals:
        if v != v:
            raise ValueError("snr cannot be NaN")
    return vals


def _parse_algorithms(raw: str) -> tuple[str, ...]:
    vals = tuple(tok.strip() for tok in raw.split(","))
    for v in vals:
        if v not in KNOWN_ALGORITHMS:
            raise ValueError(f"unknown algorithm {v!r}; choose from {KNOWN_ALGORITHMS}")
    if len(set(vals)) != len(vals):
        raise ValueError("duplicate algorithm")
    return vals


def _parse_auto_float(raw: str) -> float | None:
    if raw == "auto":
        return None
    v = float(raw)
    if v <= 0:
        raise ValueError("must be positive or 'auto'")
    return v


def _parse_bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_choice(*options: str):
    def parse(raw: str) -> str:
        if raw not in options:
            raise ValueError(f"must be one of {options}")
        return raw
    return parse


def _fmt_float(v: float) -> str:
    return repr(float(v))


def _fmt_list(vals) -> str:
    return ",".join(repr(float(v)) for v in vals)


def _fmt_auto(v: float | None) -> str:
    return "auto" if v is None else _fmt_float(v)


def _fmt_bool(v: bool) -> str:
    return "true" if v else "false"


# key -> (parser, default string); canonical serialization order
_KEYS: dict[str, tuple] = {
    "radar.f0_hz": (_parse_pos_float, "35e9"),
    "radar.bandwidth_hz": (_parse_pos_float, "1e9"),
    "radar.n_freq": (_parse_pos_int, "64"),
    "radar.r0_m": (_parse_pos_float, "5000.0"),
    "radar.total_angle_deg": (_parse_pos_float, "1.7"),
    "radar.n_angle": (_parse_pos_int, "64"),
    "radar.dt_s": (_parse_pos_float, "0.001"),
    "grid.nx": (_parse_pos_int, "64"),
    "grid.ny": (_parse_pos_int, "64"),
    "grid.dx_m": (_parse_auto_float, "auto"),
    "grid.dy_m": (_parse_auto_float, "auto"),
    "phantom.shape": (_parse_choice("aircraft", "blobs"), "aircraft"),
    "phantom.k": (_parse_pos_int, "4"),
    "phantom.radius": (_parse_nonneg_int, "2"),
    "phantom.amin": (_parse_pos_float, "1.0"),
    "phantom.amax": (_parse_pos_float, "1.0"),
    "sampling.ratio": (_parse_ratio_list, "0.3"),
    "snr.db": (_parse_snr_list, "10.0"),
    "trials": (_parse_pos_int, "1"),
    "algorithms": (_parse_algorithms, "mrf-fista,fista,bp"),
    "operator.mode": (_parse_choice("exact", "far-field"), "exact"),
    "solver.max_iter": (_parse_pos_int, "300"),
    "solver.stop_tol": (_parse_pos_float, "1e-05"),
    "solver.lambda1_scale": (_parse_pos_float, "0.01"),
    "solver.lambda_tv_ratio": (_parse_float, "0.1"),
    "solver.w1": (_parse_pos_float, "0.5"),
    "solver.mrf_every": (_parse_pos_int, "1"),
    "solver.tv_iters": (_parse_pos_int, "20"),
    "solver.tv_tol": (_parse_pos_float, "1e-06"),
    "ising.alpha": (_parse_float, "0.01"),
    "ising.beta": (_parse_float, "0.3"),
    "ising.temperature": (_parse_pos_float, "1.0"),
    "mcmc.burn_in": (_parse_pos_int, "5"),
    "mcmc.samples": (_parse_pos_int, "1"),
    "likelihood.b_on": (_parse_auto_float, "auto"),
    "likelihood.sigma_off": (_parse_auto_float, "auto"),
    "output.dir": (str, "out"),
    "output.figures": (_parse_bool, "true"),
    "output.image_scale": (_parse_choice("db", "linear"), "db"),
    "output.db_floor": (_parse_float, "-40.0"),
    "seed": (int, "12345"),
    "workers": (_parse_pos_int, "1"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment description.

    Scan parameters are stored as given (start frequency, bandwidth, total
    angle) and turned into a RadarConfig on demand, so serialization
    round-trips exactly.
    """

    f0: float = 35e9
    bandwidth: float = 1e9
    n_freq: int = 64
    r0: float = 5000.0
    total_angle_deg: float = 1.7
    n_angle: int = 64
    dt: float = 1e-3
    grid_nx: int = 64
    grid_ny: int = 64
    grid_dx: float | None = None
    grid_dy: float | None = None
    phantom: PhantomSpec = field(default_factory=PhantomSpec)
    ratios: tuple[float, ...] = (0.3,)
    snrs: tuple[float, ...] = (10.0,)
    trials: int = 1
    algorithms: tuple[str, ...] = KNOWN_ALGORITHMS
    operator_mode: str = "exact"
    max_iter: int = 300
    stop_tol: float = 1e-5
    lambda1_scale: float = 0.01
    lambda_tv_ratio: float = 0.1
    w1: float = 0.5
    mrf_every: int = 1
    tv_iters: int = 20
    tv_tol: float = 1e-6
    ising: IsingParams = field(default_factory=IsingParams)
    schedule: McmcSchedule = field(default_factory=McmcSchedule)
    b_on: float | None = None
    sigma_off: float | None = None
    output_dir: str = "out"
    figures: bool = True
    image_scale: str = "db"
    db_floor: float = -40.0
    seed: int = 12345
    workers: int = 1

    def radar(self) -> RadarConfig:
        return RadarConfig.from_scan(self.f0, self.bandwidth, self.n_freq, self.r0,
                                     self.total_angle_deg, self.n_angle, self.dt)

    def build_grid(self) -> ImageGrid:
        return default_grid(self.radar(), self.grid_nx, self.grid_ny,
                            self.grid_dx, self.grid_dy)

    def likelihood(self) -> LikelihoodParams | None:
        if self.b_on is None or self.sigma_off is None:
            return None
        return LikelihoodParams(self.b_on, self.sigma_off)

    def solver_params(self, algorithm: str, seed: int) -> SolverParams:
        return SolverParams(
            lambda1_scale=self.lambda1_scale,
            lambda_tv_ratio=self.lambda_tv_ratio,
            w1=self.w1,
            max_iter=self.max_iter,
            stop_tol=self.stop_tol,
            tv_iters=self.tv_iters,
            tv_tol=self.tv_tol,
            mrf_enabled=(algorithm == "mrf-fista"),
            mrf_every=self.mrf_every,
            ising=self.ising,
            likelihood=self.likelihood(),
            schedule=self.schedule,
            seed=seed,
        )


def parse_values(text: str) -> dict[str, str]:
    """First parsing stage: raw key -> value strings, with line checks."""
    values: dict[str, str] = {}
    preset: dict[str, str] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key == "preset":
            if value not in _PRESETS:
                raise ConfigError(
                    f"line {lineno}: unknown preset {value!r}; choose from {sorted(_PRESETS)}")
            preset = _PRESETS[value]
            continue
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"line {lineno}: empty value for key {key!r}")
        values[key] = value
    return {**preset, **values}


def build_config(values: dict[str, str]) -> ExperimentConfig:
    """Second stage: typed values plus cross-field validation."""
    parsed: dict[str, object] = {}
    for key, (parser, default) in _KEYS.items():
        raw = values.get(key, default)
        try:
            parsed[key] = parser(raw)
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"key {key!r}: bad value {raw!r} ({exc})") from exc

    try:
        phantom = PhantomSpec(parsed["phantom.shape"], parsed["phantom.k"],
                              parsed["phantom.radius"], parsed["phantom.amin"],
                              parsed["phantom.amax"])
        ising = IsingParams(parsed["ising.alpha"], parsed["ising.beta"],
                            parsed["ising.temperature"])
        schedule = McmcSchedule(parsed["mcmc.burn_in"], parsed["mcmc.samples"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if parsed["solver.lambda_tv_ratio"] < 0:
        raise ConfigError("key 'solver.lambda_tv_ratio': must be >= 0")
    if (parsed["likelihood.b_on"] is None) != (parsed["likelihood.sigma_off"] is None):
        raise ConfigError("likelihood.b_on and likelihood.sigma_off must both be "
                          "'auto' or both be set")

    config = ExperimentConfig(
        f0=parsed["radar.f0_hz"], bandwidth=parsed["radar.bandwidth_hz"],
        n_freq=parsed["radar.n_freq"], r0=parsed["radar.r0_m"],
        total_angle_deg=parsed["radar.total_angle_deg"],
        n_angle=parsed["radar.n_angle"], dt=parsed["radar.dt_s"],
        grid_nx=parsed["grid.nx"], grid_ny=parsed["grid.ny"],
        grid_dx=parsed["grid.dx_m"], grid_dy=parsed["grid.dy_m"],
        phantom=phantom,
        ratios=parsed["sampling.ratio"], snrs=parsed["snr.db"],
        trials=parsed["trials"], algorithms=parsed["algorithms"],
        operator_mode=parsed["operator.mode"],
        max_iter=parsed["solver.max_iter"], stop_tol=parsed["solver.stop_tol"],
        lambda1_scale=parsed["solver.lambda1_scale"],
        lambda_tv_ratio=parsed["solver.lambda_tv_ratio"],
        w1=parsed["solver.w1"], mrf_every=parsed["solver.mrf_every"],
        tv_iters=parsed["solver.tv_iters"], tv_tol=parsed["solver.tv_tol"],
        ising=ising, schedule=schedule,
        b_on=parsed["likelihood.b_on"], sigma_off=parsed["likelihood.sigma_off"],
        output_dir=parsed["output.dir"], figures=parsed["output.figures"],
        image_scale=parsed["output.image_scale"], db_floor=parsed["output.db_floor"],
        seed=parsed["seed"], workers=parsed["workers"],
    )
    try:
        config.radar()
    except ValueError as exc:
        raise ConfigError(f"radar configuration invalid: {exc}") from exc
    return config


def parse_config(text: str) -> ExperimentConfig:
    """Parse a configuration document; total (either a value or an error)."""
    return build_config(parse_values(text))


def default_config() -> ExperimentConfig:
    return build_config({})


def serialize_config(config: ExperimentConfig) -> str:
    """Canonical document, reparses to an identical config."""
    c = config
    out = {
        "radar.f0_hz": _fmt_float(c.f0),
        "radar.bandwidth_hz": _fmt_float(c.bandwidth),
        "radar.n_freq": str(c.n_freq),
        "radar.r0_m": _fmt_float(c.r0),
        "radar.total_angle_deg": _fmt_float(c.total_angle_deg),
        "radar.n_angle": str(c.n_angle),
        "radar.dt_s": _fmt_float(c.dt),
        "grid.nx": str(c.grid_nx),
        "grid.ny": str(c.grid_ny),
        "grid.dx_m": _fmt_auto(c.grid_dx),
        "grid.dy_m": _fmt_auto(c.grid_dy),
        "phantom.shape": c.phantom.shape,
        "phantom.k": str(c.phantom.k),
        "phantom.radius": str(c.phantom.radius),
        "phantom.amin": _fmt_float(c.phantom.amin),
        "phantom.amax": _fmt_float(c.phantom.amax),
        "sampling.ratio": _fmt_list(c.ratios),
        "snr.db": _fmt_list(c.snrs),
        "trials": str(c.trials),
        "algorithms": ",".join(c.algorithms),
        "operator.mode": c.operator_mode,
        "solver.max_iter": str(c.max_iter),
        "solver.stop_tol": _fmt_float(c.stop_tol),
        "solver.lambda1_scale": _fmt_float(c.lambda1_scale),
        "solver.lambda_tv_ratio": _fmt_float(c.lambda_tv_ratio),
        "solver.w1": _fmt_float(c.w1),
        "solver.mrf_every": str(c.mrf_every),
        "solver.tv_iters": str(c.tv_iters),
        "solver.tv_tol": _fmt_float(c.tv_tol),
        "ising.alpha": _fmt_float(c.ising.alpha),
        "ising.beta": _fmt_float(c.ising.beta),
        "ising.temperature": _fmt_float(c.ising.temperature),
        "mcmc.burn_in": str(c.schedule.burn_in),
        "mcmc.samples": str(c.schedule.samples),
        "likelihood.b_on": _fmt_auto(c.b_on),
        "likelihood.sigma_off": _fmt_auto(c.sigma_off),
        "output.dir": c.output_dir,
        "output.figures": _fmt_bool(c.figures),
        "output.image_scale": c.image_scale,
        "output.db_floor": _fmt_float(c.db_floor),
        "seed": str(c.seed),
        "workers": str(c.workers),
    }
    return "".join(f"{k} = {v}\n" for k, v in out.items())
