"""Scenario, Landau-Zener grid and sweep files (JSON, Hz and seconds)."""

from __future__ import annotations

import copy
import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .integrator import PHYSICAL, PROGRAMMED, Schedule
from .physics import TWO_PI, SystemParams, TwoLevelState
from .spectral import WINDOWS


class ScenarioError(ValueError):
    """Invalid scenario content; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


# key -> default; None marks "optional, no value"
SCENARIO_DEFAULTS = {
    "name": "",
    "description": "",
    "omega_bar_b_hz": None,
    "omega_bar_s_hz": None,
    "coupling_hz": 0.0,
    "k_selftrap": 0.0,
    "p_exponent": 5.0 / 7.0,
    "surface_coeff_b": 0.0,
    "surface_coeff_s": 0.0,
    "coupling_nb_coeff": 0.0,
    "tau_b_s": "inf",
    "tau_s_s": "inf",
    "fill_b": 1.0,
    "fill_s": 1.0,
    "larmor_hz": 0.0,
    "reference_larmor_hz": None,
    "n_b0": 1.0,
    "n_s0": 0.0,
    "phi0_rad": 0.0,
    "t_end_s": 10.0,
    "trajectory_rate_hz": None,
    "rel_tol": 1e-10,
    "abs_tol": 1e-12,
    "max_steps": 5_000_000,
    "sample_rate_hz": 1000.0,
    "noise_rms": 0.0,
    "seed": 0,
    "window_s": 0.5,
    "hop_s": 0.05,
    "window": "hann",
    "f_max_hz": None,
    "min_amp": 0.01,
    "max_hop_hz": 3.0,
    "analysis_start_s": None,
    "crossing_time_hint_s": None,
    "schedule": None,
}
REQUIRED = ("omega_bar_b_hz", "omega_bar_s_hz")
SCHEDULE_KEYS = ("mode", "sweep_rate_hz_per_s", "crossing_time_s", "table")
TABLE_KEYS = ("n", "freq_hz")


def _number(data, key, *, positive=False, nonneg=False, allow_inf=False, integer=False):
    value = data[key]
    if allow_inf and (value is None or value == "inf"):
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(key, f"expected a number, got {value!r}")
    value = float(value)
    if math.isnan(value) or (math.isinf(value) and not allow_inf):
        raise ScenarioError(key, "must be finite")
    if positive and not value > 0:
        raise ScenarioError(key, "must be > 0")
    if nonneg and value < 0:
        raise ScenarioError(key, "must be >= 0")
    if integer and value != int(value):
        raise ScenarioError(key, "must be an integer")
    return value


def _optional(data, key, **kw):
    return None if data[key] is None else _number(data, key, **kw)


@dataclass(frozen=True)
class Scenario:
    """Validated scenario with the physics objects it describes.

    ``raw`` holds the complete key set (defaults filled in) exactly as it is
    echoed into run metadata.
    """

    raw: dict
    params: SystemParams
    initial: TwoLevelState
    schedule: Schedule
    t_end: float

    def __getitem__(self, key):
        return self.raw[key]

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        if not isinstance(data, dict):
            raise ScenarioError("<root>", "scenario must be a JSON object")
        for key in data:
            if key not in SCENARIO_DEFAULTS:
                raise ScenarioError(key, "unknown key")
        for key in REQUIRED:
            if key not in data:
                raise ScenarioError(key, "missing required key")
        raw = {**copy.deepcopy(SCENARIO_DEFAULTS), **copy.deepcopy(data)}

        for key in ("name", "description"):
            if not isinstance(raw[key], str):
                raise ScenarioError(key, "must be a string")
        bulk_hz = _number(raw, "omega_bar_b_hz")
        surface_hz = _number(raw, "omega_bar_s_hz")
        coupling_hz = _number(raw, "coupling_hz", nonneg=True)
        k = _number(raw, "k_selftrap", nonneg=True)
        p = _number(raw, "p_exponent")
        if not 0 < p < 1:
            raise ScenarioError("p_exponent", "must lie in (0, 1)")
        tau_b = _number(raw, "tau_b_s", positive=True, allow_inf=True)
        tau_s = _number(raw, "tau_s_s", positive=True, allow_inf=True)
        fill_b = _number(raw, "fill_b", nonneg=True)
        fill_s = _number(raw, "fill_s", nonneg=True)
        larmor = _number(raw, "larmor_hz", nonneg=True)
        _optional(raw, "reference_larmor_hz", nonneg=True)
        n_b0 = _number(raw, "n_b0", nonneg=True)
        n_s0 = _number(raw, "n_s0", nonneg=True)
        if n_b0 + n_s0 <= 0:
            raise ScenarioError("n_b0", "initial populations must not both be zero")
        phi0 = _number(raw, "phi0_rad")
        t_end = _number(raw, "t_end_s", positive=True)
        _optional(raw, "trajectory_rate_hz", positive=True)
        for key in ("rel_tol", "abs_tol"):
            tol = _number(raw, key, positive=True)
            if tol > 1e-2:
                raise ScenarioError(key, "must lie in (0, 1e-2]")
        _number(raw, "max_steps", positive=True, integer=True)
        raw["max_steps"] = int(raw["max_steps"])
        _number(raw, "sample_rate_hz", positive=True)
        _number(raw, "noise_rms", nonneg=True)
        _number(raw, "seed", nonneg=True, integer=True)
        raw["seed"] = int(raw["seed"])
        window_s = _number(raw, "window_s", positive=True)
        hop_s = _number(raw, "hop_s", positive=True)
        if hop_s > window_s:
            raise ScenarioError("hop_s", "must not exceed window_s")
        if raw["window"] not in WINDOWS:
            raise ScenarioError("window", f"must be one of {', '.join(WINDOWS)}")
        _optional(raw, "f_max_hz", positive=True)
        _number(raw, "min_amp", positive=True)
        _number(raw, "max_hop_hz", positive=True)
        _optional(raw, "analysis_start_s")
        _optional(raw, "crossing_time_hint_s")

        for key in ("coupling_nb_coeff", "surface_coeff_b", "surface_coeff_s"):
            _number(raw, key)
        params = SystemParams.from_hz(
            bulk_hz, surface_hz, coupling_hz=coupling_hz, larmor_hz=larmor,
            k_selftrap=k, p_exponent=p, surface_coeff_b=float(raw["surface_coeff_b"]),
            surface_coeff_s=float(raw["surface_coeff_s"]),
            coupling_nb_coeff=float(raw["coupling_nb_coeff"]), tau_b=tau_b, tau_s=tau_s,
            fill_b=fill_b, fill_s=fill_s, label=raw["name"])
        schedule = _schedule(raw["schedule"])
        initial = TwoLevelState(0.0, complex(math.sqrt(n_b0)),
                                complex(math.sqrt(n_s0) * np.exp(1j * phi0)))
        return cls(raw=raw, params=params, initial=initial, schedule=schedule, t_end=t_end)

    @classmethod
    def load(cls, path) -> "Scenario":
        return cls.from_dict(read_json(path))


def _schedule(block) -> Schedule:
    if block is None:
        return Schedule()
    if not isinstance(block, dict):
        raise ScenarioError("schedule", "must be an object")
    for key in block:
        if key not in SCHEDULE_KEYS:
            raise ScenarioError(f"schedule.{key}", "unknown key")
    mode = block.get("mode", PHYSICAL)
    if mode not in (PHYSICAL, PROGRAMMED):
        raise ScenarioError("schedule.mode", f"must be {PHYSICAL!r} or {PROGRAMMED!r}")
    table = None
    if block.get("table") is not None:
        tab = block["table"]
        if not isinstance(tab, dict):
            raise ScenarioError("schedule.table", "must be an object with n and freq_hz")
        for key in tab:
            if key not in TABLE_KEYS:
                raise ScenarioError(f"schedule.table.{key}", "unknown key")
        try:
            n = np.asarray(tab["n"], dtype=float)
            w = TWO_PI * np.asarray(tab["freq_hz"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError("schedule.table", f"needs numeric n and freq_hz lists ({exc})")
        table = (n, w)
    try:
        if mode == PROGRAMMED:
            flat = {k: block.get(k) for k in ("sweep_rate_hz_per_s", "crossing_time_s")}
            for key, value in flat.items():
                if value is None:
                    raise ScenarioError(f"schedule.{key}", "required in programmed mode")
                _number(flat, key)
            rate = TWO_PI * float(flat["sweep_rate_hz_per_s"])
            t_x = float(flat["crossing_time_s"])
            return Schedule(mode=PROGRAMMED, programmed_detuning=((0.0, 1.0), (-rate * t_x,
                            rate * (1.0 - t_x))), tabulated_bulk_freq=table)
        return Schedule(mode=PHYSICAL, tabulated_bulk_freq=table)
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError("schedule", str(exc))


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


@dataclass(frozen=True)
class LZGrid:
    """Cartesian grid of couplings (Hz) and detuning sweep rates (Hz/s)."""

    couplings_hz: tuple
    rates_hz_per_s: tuple
    span: float = 40.0
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_abs_err: float = 0.02

    KEYS = ("couplings_hz", "rates_hz_per_s", "span", "rel_tol", "abs_tol", "max_abs_err")

    @classmethod
    def from_dict(cls, data: dict) -> "LZGrid":
        for key in data:
            if key not in cls.KEYS:
                raise ScenarioError(key, "unknown key")
        out = {}
        for key in ("couplings_hz", "rates_hz_per_s"):
            values = data.get(key)
            if not isinstance(values, list) or not values:
                raise ScenarioError(key, "must be a non-empty list")
            for i, v in enumerate(values):
                _number({f"{key}[{i}]": v}, f"{key}[{i}]", positive=(key != "couplings_hz"),
                        nonneg=True)
            out[key] = tuple(float(v) for v in values)
        for key in ("span", "rel_tol", "abs_tol", "max_abs_err"):
            if key in data:
                out[key] = _number(data, key, positive=True)
        for key in ("rel_tol", "abs_tol"):
            if out.get(key, 0) > 1e-2:
                raise ScenarioError(key, "must lie in (0, 1e-2]")
        return cls(**out)

    @classmethod
    def load(cls, path) -> "LZGrid":
        return cls.from_dict(read_json(path))

    def points(self):
        return list(itertools.product(self.couplings_hz, self.rates_hz_per_s))


MAX_AXES = 3


@dataclass(frozen=True)
class SweepSpec:
    """Base scenario plus up to three axes of values, swept as a Cartesian grid."""

    base: dict
    axes: tuple
    workers: int = 1

    KEYS = ("base", "axes", "workers")

    @classmethod
    def from_dict(cls, data: dict, root: Path | None = None) -> "SweepSpec":
        for key in data:
            if key not in cls.KEYS:
                raise ScenarioError(key, "unknown key")
        base = data.get("base")
        if isinstance(base, str):
            path = Path(base)
            if not path.is_absolute() and root is not None:
                path = root / path
            try:
                base = read_json(path)
            except OSError as exc:
                raise ScenarioError("base", f"cannot read {path}: {exc.strerror}")
        if not isinstance(base, dict):
            raise ScenarioError("base", "must be a scenario object or a path to one")
        axes = data.get("axes")
        if not isinstance(axes, list) or not 1 <= len(axes) <= MAX_AXES:
            raise ScenarioError("axes", f"must be a list of 1 to {MAX_AXES} axes")
        parsed = []
        for i, axis in enumerate(axes):
            if not isinstance(axis, dict) or set(axis) != {"path", "values"}:
                raise ScenarioError(f"axes[{i}]", "needs exactly 'path' and 'values'")
            if not isinstance(axis["values"], list) or not axis["values"]:
                raise ScenarioError(f"axes[{i}].values", "must be a non-empty list")
            parsed.append((str(axis["path"]), tuple(axis["values"])))
        paths = [p for p, _ in parsed]
        if len(set(paths)) != len(paths):
            raise ScenarioError("axes", "duplicate parameter path")
        workers = data.get("workers", 1)
        if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
            raise ScenarioError("workers", "must be a positive integer")
        spec = cls(base=base, axes=tuple(parsed), workers=workers)
        # validate the base and every point before anything runs
        for _, scenario_dict in spec.points():
            Scenario.from_dict(scenario_dict)
        return spec

    @classmethod
    def load(cls, path) -> "SweepSpec":
        path = Path(path)
        return cls.from_dict(read_json(path), root=path.parent)

    @property
    def size(self) -> int:
        return math.prod(len(v) for _, v in self.axes)

    def points(self):
        """``(name, scenario dict)`` for every grid point, in row-major order."""
        out = []
        for combo in itertools.product(*(values for _, values in self.axes)):
            data = copy.deepcopy(self.base)
            parts = []
            for (path, _), value in zip(self.axes, combo):
                set_path(data, path, value)
                parts.append(f"{path}={_format_value(value)}")
            out.append(("__".join(parts), data))
        return out


def set_path(data: dict, path: str, value) -> None:
    """Assign ``value`` at a dotted ``path`` (e.g. ``schedule.sweep_rate_hz_per_s``)."""
    keys = path.split(".")
    node = data
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ScenarioError(path, "path crosses a non-object value")
    node[keys[-1]] = value


def _format_value(value) -> str:
    text = repr(float(value)) if isinstance(value, float) else str(value)
    return "".join(c if c.isalnum() or c in "-+._" else "_" for c in text)


REFERENCE_SCENARIOS = ("selftrap_crossing", "dynamic_coupling", "rigid_trap")


def reference_path(name: str) -> Path:
    """Path of a shipped scenario or grid file (``selftrap_crossing``, ``lz_grid``, ...)."""
    path = Path(__file__).parent / "scenarios" / f"{name}.json"
    if not path.exists():
        raise FileNotFoundError(f"no shipped file named {name!r}")
    return path
