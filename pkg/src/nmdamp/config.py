"""Run configuration: JSON schema, defaults, command-line overrides and validation.

Schema (all keys optional; missing keys take the defaults in ``DEFAULTS``)::

    {
      "bath":    {"eta": 0.2, "omega_c": 0.2, "exponent_n": 1.0, "temperature": 0.0,
                  "kernel_mode": "auto"},
      "system":  {"omega0": 1.0},
      "drive":   {"kind": "none" | "kick_train" | "delta_kicks" | "constant" | "tabulated",
                  "period_tau": 2.0, "width_epsilon": 1.0,
                  "omega_shift": 0.0, "lambda": [re, im],
                  "table": {"times": [...], "omega": [...], "lambda": [[re, im], ...] | null}},
      "grid":    {"dt": 0.01, "horizon": 40.0},
      "initial_state": {"kind": "coherent", "alpha": [re, im]}
                     | {"kind": "fock", "m": 1} | {"kind": "vacuum"},
      "dynamics": {"fock_dim": 40, "tail_tol": 1e-6},
      "sweep":   {"periods": [2.0, 2.5, 3.0, 4.0], "checkpoints": [5.0, 10.0, 20.0],
                  "workers": 4},
      "oracle":  {"num_modes": 4000, "omega_max_factor": 40.0, "checkpoints": 64,
                  "tolerances": {"G": 1e-3, "L": 1e-3, "ff": 1e-3, "fdf": 1e-3,
                                 "ffd": 1e-3, "norm": 1e-8}},
      "output":  {"directory": "out", "format": "csv", "baseline": true}
    }

``initial_state`` may be null, in which case each subcommand picks its own
default (vacuum for coefficient runs, |1> for fidelity sweeps).
"""

from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

from .bath import KernelEvaluator, SpectralDensity
from .drive import DriveProtocol, KickTrain
from .dynamics import FockDensityMatrix, GaussianMoments
from .errors import ConfigurationError
from .propagator import TimeGrid

OUTPUT_DIR_ENV = "NMDAMP_OUTPUT_DIR"

DEFAULTS: dict = {
    "bath": {"eta": 0.2, "omega_c": 0.2, "exponent_n": 1.0, "temperature": 0.0, "kernel_mode": "auto"},
    "system": {"omega0": 1.0},
    "drive": {"kind": "none", "period_tau": 2.0, "width_epsilon": 1.0, "omega_shift": 0.0, "lambda": [0.0, 0.0], "table": None},
    "grid": {"dt": 0.01, "horizon": 40.0},
    "initial_state": None,
    "dynamics": {"fock_dim": 40, "tail_tol": 1e-6},
    "sweep": {"periods": [2.0, 2.5, 3.0, 4.0], "checkpoints": [5.0, 10.0, 20.0], "workers": 4},
    "oracle": {
        "num_modes": 4000,
        "omega_max_factor": 40.0,
        "checkpoints": 64,
        "tolerances": {"G": 1e-3, "L": 1e-3, "ff": 1e-3, "fdf": 1e-3, "ffd": 1e-3, "norm": 1e-8},
    },
    "output": {"directory": "out", "format": "csv", "baseline": True},
}

DRIVE_KINDS = ("none", "kick_train", "delta_kicks", "constant", "tabulated")
STATE_KINDS = ("coherent", "fock", "vacuum")


def _merge(base: dict, extra: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigurationError(f"unknown config field {where!r}")
        if isinstance(base[key], dict) and key != "tolerances" and isinstance(value, dict):
            out[key] = _merge(base[key], value, where)
        elif isinstance(base[key], dict) and not isinstance(value, dict):
            raise ConfigurationError(f"config field {where!r} must be an object")
        elif key == "tolerances":
            merged = dict(base[key])
            merged.update(value)
            out[key] = merged
        else:
            out[key] = copy.deepcopy(value)
    return out


def parse_override(text: str) -> tuple[list[str], object]:
    """Split ``a.b.c=value``; the value is read as JSON, falling back to a plain string."""
    if "=" not in text:
        raise ConfigurationError(f"override {text!r} is not of the form path.to.field=value")
    path, raw = text.split("=", 1)
    keys = [k for k in path.strip().split(".") if k]
    if not keys:
        raise ConfigurationError(f"override {text!r} has an empty path")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return keys, value


def apply_override(doc: dict, keys: list[str], value) -> dict:
    out = copy.deepcopy(doc)
    node = out
    for k in keys[:-1]:
        if node.get(k) is None:
            node[k] = {}
        if not isinstance(node[k], dict):
            raise ConfigurationError(f"cannot descend into non-object field {k!r}")
        node = node[k]
    node[keys[-1]] = value
    return out


def _line_of(text: str | None, key: str) -> str:
    if not text:
        return ""
    needle = f'"{key}"'
    for no, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return f" (line {no})"
    return ""


@dataclass(frozen=True)
class RunConfig:
    """Validated, fully resolved configuration; ``raw`` is the resolved JSON document."""

    raw: dict
    source_text: str | None = None

    # -- construction ---------------------------------------------------------

    @classmethod
    def from_dict(cls, doc: dict | None = None, overrides: list[str] = (), source_text: str | None = None) -> "RunConfig":
        doc = doc or {}
        if not isinstance(doc, dict):
            raise ConfigurationError("config root must be a JSON object")
        resolved = _merge(DEFAULTS, doc)
        for text in overrides:
            keys, value = parse_override(text)
            if keys[0] not in DEFAULTS:
                raise ConfigurationError(f"unknown config section {keys[0]!r} in override {text!r}")
            resolved = apply_override(resolved, keys, value)
        cfg = cls(raw=resolved, source_text=source_text)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, overrides: list[str] = ()) -> "RunConfig":
        text = Path(path).read_text()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
        return cls.from_dict(doc, overrides, source_text=text)

    # -- typed views ------------------------------------------------------------

    def _num(self, section: str, key: str, positive=False, nonneg=False) -> float:
        value = self.raw[section][key]
        where = f"{section}.{key}{_line_of(self.source_text, key)}"
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigurationError(f"{where}: expected a finite number, got {value!r}")
        if positive and not value > 0:
            raise ConfigurationError(f"{where}: must be > 0, got {value}")
        if nonneg and value < 0:
            raise ConfigurationError(f"{where}: must be >= 0, got {value}")
        return float(value)

    @property
    def omega0(self) -> float:
        return self._num("system", "omega0", positive=True)

    @property
    def dt(self) -> float:
        return self._num("grid", "dt", positive=True)

    @property
    def horizon(self) -> float:
        return self._num("grid", "horizon", nonneg=True)

    def density(self) -> SpectralDensity:
        b = self.raw["bath"]
        try:
            return SpectralDensity(
                eta=self._num("bath", "eta", nonneg=True),
                omega_c=self._num("bath", "omega_c", positive=True),
                exponent_n=self._num("bath", "exponent_n", positive=True),
                temperature=self._num("bath", "temperature", nonneg=True),
            )
        except ValueError as exc:
            raise ConfigurationError(f"bath: {exc} (given {b})") from exc

    def kernel(self) -> KernelEvaluator:
        mode = self.raw["bath"]["kernel_mode"]
        if mode not in ("auto", "analytic", "quadrature"):
            raise ConfigurationError(f"bath.kernel_mode{_line_of(self.source_text, 'kernel_mode')}: unknown mode {mode!r}")
        return KernelEvaluator(self.density(), mode=mode)

    def grid(self) -> TimeGrid:
        return TimeGrid.from_horizon(self.dt, self.horizon)

    @property
    def drive_kind(self) -> str:
        kind = self.raw["drive"]["kind"]
        if kind not in DRIVE_KINDS:
            raise ConfigurationError(
                f"drive.kind{_line_of(self.source_text, 'kind')}: {kind!r} is not one of {', '.join(DRIVE_KINDS)}"
            )
        return kind

    @property
    def period_tau(self) -> float:
        return self._num("drive", "period_tau", positive=True)

    @property
    def width_epsilon(self) -> float:
        return self._num("drive", "width_epsilon", positive=True)

    @property
    def sweep_kind(self) -> str:
        """Drive family used for period sweeps: ideal kicks if configured, soft pulses otherwise."""
        return "delta_kicks" if self.drive_kind == "delta_kicks" else "kick_train"

    def drive(self, period_tau: float | None = None, kind: str | None = None) -> DriveProtocol:
        kind = kind or self.drive_kind
        tau = self.period_tau if period_tau is None else float(period_tau)
        if kind == "none":
            return DriveProtocol.none()
        if kind == "kick_train":
            return DriveProtocol.kick_train(KickTrain(tau, self.width_epsilon))
        if kind == "delta_kicks":
            return DriveProtocol.delta_kicks(tau, self.horizon)
        if kind == "tabulated":
            return self._tabulated()
        lam = self.raw["drive"]["lambda"]
        if not (isinstance(lam, (list, tuple)) and len(lam) == 2):
            raise ConfigurationError("drive.lambda must be a [re, im] pair")
        return DriveProtocol.constant(self._num("drive", "omega_shift"), complex(float(lam[0]), float(lam[1])))

    def _tabulated(self) -> DriveProtocol:
        table = self.raw["drive"]["table"]
        where = f"drive.table{_line_of(self.source_text, 'table')}"
        if not isinstance(table, dict) or "times" not in table or "omega" not in table:
            raise ConfigurationError(f"{where}: a tabulated drive needs 'times' and 'omega' lists")
        try:
            times = [float(x) for x in table["times"]]
            omega = [float(x) for x in table["omega"]]
            lam = table.get("lambda")
            lam = None if lam is None else [complex(float(a), float(b)) for a, b in lam]
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"{where}: malformed samples ({exc})") from exc
        if times and (times[0] > 0 or times[-1] < self.horizon):
            raise ConfigurationError(f"{where}: samples must cover [0, horizon]")
        return DriveProtocol.tabulated(times, omega, lam)

    def initial_state(self, default: str = "vacuum") -> dict:
        spec = self.raw["initial_state"]
        if spec is None:
            spec = {"kind": "fock", "m": 1} if default == "fock" else {"kind": "vacuum"}
        if not isinstance(spec, dict) or spec.get("kind") not in STATE_KINDS:
            raise ConfigurationError(
                f"initial_state{_line_of(self.source_text, 'initial_state')}: kind must be one of {', '.join(STATE_KINDS)}"
            )
        kind = spec["kind"]
        if kind == "coherent":
            alpha = spec.get("alpha", [0.0, 0.0])
            if not (isinstance(alpha, (list, tuple)) and len(alpha) == 2):
                raise ConfigurationError("initial_state.alpha must be a [re, im] pair")
        if kind == "fock":
            m = spec.get("m", 1)
            if isinstance(m, bool) or not isinstance(m, int) or m < 0:
                raise ConfigurationError(f"initial_state.m must be a non-negative integer, got {m!r}")
            if m >= self.fock_dim:
                raise ConfigurationError(f"initial_state.m = {m} does not fit in dynamics.fock_dim = {self.fock_dim}")
        return spec

    def gaussian_state(self, default: str = "vacuum") -> GaussianMoments:
        spec = self.initial_state(default)
        if spec["kind"] == "coherent":
            a = spec.get("alpha", [0.0, 0.0])
            return GaussianMoments.coherent(complex(float(a[0]), float(a[1])))
        if spec["kind"] == "vacuum":
            return GaussianMoments.vacuum()
        raise ConfigurationError("a Fock initial state is not Gaussian; use the fidelity subcommand")

    def fock_state(self, default: str = "fock") -> FockDensityMatrix:
        spec = self.initial_state(default)
        dim = self.fock_dim
        if spec["kind"] == "fock":
            return FockDensityMatrix.fock(spec.get("m", 1), dim)
        if spec["kind"] == "coherent":
            a = spec.get("alpha", [0.0, 0.0])
            return FockDensityMatrix.coherent(complex(float(a[0]), float(a[1])), dim)
        return FockDensityMatrix.fock(0, dim)

    @property
    def fock_dim(self) -> int:
        d = self.raw["dynamics"]["fock_dim"]
        if isinstance(d, bool) or not isinstance(d, int) or d < 2:
            raise ConfigurationError(f"dynamics.fock_dim must be an integer >= 2, got {d!r}")
        return d

    @property
    def tail_tol(self) -> float:
        return self._num("dynamics", "tail_tol", positive=True)

    @property
    def sweep_periods(self) -> list[float]:
        periods = self.raw["sweep"]["periods"]
        if not isinstance(periods, list) or not periods:
            raise ConfigurationError("sweep.periods must be a non-empty list")
        out = []
        for p in periods:
            if isinstance(p, bool) or not isinstance(p, (int, float)) or not p > 0:
                raise ConfigurationError(f"sweep.periods entries must be positive numbers, got {p!r}")
            out.append(float(p))
        return out

    @property
    def checkpoints(self) -> list[float]:
        cps = self.raw["sweep"]["checkpoints"]
        if not isinstance(cps, list):
            raise ConfigurationError("sweep.checkpoints must be a list")
        return [float(c) for c in cps]

    @property
    def workers(self) -> int:
        w = self.raw["sweep"]["workers"]
        if isinstance(w, bool) or not isinstance(w, int) or w < 1:
            raise ConfigurationError(f"sweep.workers must be a positive integer, got {w!r}")
        return w

    @property
    def output_format(self) -> str:
        fmt = self.raw["output"]["format"]
        if fmt not in ("csv", "json"):
            raise ConfigurationError(f"output.format must be 'csv' or 'json', got {fmt!r}")
        return fmt

    @property
    def output_dir(self) -> Path:
        env = os.environ.get(OUTPUT_DIR_ENV)
        return Path(env) if env else Path(self.raw["output"]["directory"])

    @property
    def baseline(self) -> bool:
        return bool(self.raw["output"]["baseline"])

    # -- validation -------------------------------------------------------------

    def _check_kick_timing(self, tau: float, kind: str):
        dt = self.dt
        src = self.source_text
        if kind == "kick_train":
            eps = self.width_epsilon
            if eps > tau / 2:
                raise ConfigurationError(
                    f"drive.width_epsilon{_line_of(src, 'width_epsilon')}: epsilon <= tau/2 violated "
                    f"(epsilon = {eps}, tau = {tau})"
                )
            ratio = tau / (2 * dt)
            if abs(ratio - round(ratio)) > 1e-8 * max(1.0, ratio):
                raise ConfigurationError(
                    f"drive.period_tau{_line_of(src, 'period_tau')}: tau/(2 dt) must be an integer "
                    f"(tau = {tau}, dt = {dt})"
                )
        elif kind == "delta_kicks":
            ratio = tau / (4 * dt)
            if abs(ratio - round(ratio)) > 1e-8 * max(1.0, ratio):
                raise ConfigurationError(
                    f"drive.period_tau{_line_of(src, 'period_tau')}: ideal kicks at tau/4 need tau/(4 dt) integer "
                    f"(tau = {tau}, dt = {dt})"
                )

    def validate(self, sweep: bool = False) -> "RunConfig":
        """Check every constraint without running anything; returns self."""
        sd = self.density()
        self.kernel()
        omega0 = self.omega0
        dt = self.dt
        self.grid()
        kind = self.drive_kind
        scales = [1.0 / sd.omega_c, 1.0 / omega0]
        if kind == "kick_train" or (sweep and kind != "delta_kicks"):
            scales.append(self.width_epsilon)
        limit = min(scales) / 20
        if dt > limit * (1 + 1e-12):
            raise ConfigurationError(
                f"grid.dt{_line_of(self.source_text, 'dt')}: dt <= min(epsilon, 1/omega_c, 1/omega0)/20 = {limit:.6g} "
                f"violated (dt = {dt})"
            )
        if kind in ("kick_train", "delta_kicks"):
            self._check_kick_timing(self.period_tau, kind)
        if kind in ("constant", "tabulated"):
            self.drive()
        if sweep:
            for tau in self.sweep_periods:
                self._check_kick_timing(tau, self.sweep_kind)
            self.checkpoints
            self.workers
        self.initial_state()
        self.tail_tol
        self.output_format
        oracle = self.raw["oracle"]
        if not isinstance(oracle["num_modes"], int) or oracle["num_modes"] < 1:
            raise ConfigurationError("oracle.num_modes must be a positive integer")
        self._num("oracle", "omega_max_factor", positive=True)
        for key, value in oracle["tolerances"].items():
            if key not in DEFAULTS["oracle"]["tolerances"]:
                raise ConfigurationError(f"oracle.tolerances: unknown quantity {key!r}")
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
                raise ConfigurationError(f"oracle.tolerances.{key} must be a positive number")
        return self
