"""Scenario files: which system to run, on which admissible pair, over which (epsilon, n) cells.

A scenario is a flat YAML mapping with one nested ``pair`` block::

    preset: euclid_ab
    delta: 0.1333333333333333
    pair:
      K_lower: [-0.5]
      K_upper: [0.5]
      rho: 0.00048828125
      Q_lower: [-1.0]
      Q_upper: [1.0]
    eps_list: [0.4, 0.2, 0.1, 0.05]
    n_range: [5, 10]

Validation errors carry the YAML line of the offending field.
"""

import hashlib
import logging
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import yaml

from .config import package_data_path
from .coverage import SERVING_MODES, AdmissiblePair
from .errors import LieEntropyError, ValidationError
from .presets import euclidean_system, get_preset, list_presets
from .regions import BoxRegion, Region, region_from_mapping
from .system import LinearSystem

logger = logging.getLogger(__name__)

SCENARIO_DIR = "scenarios"

_TOP_LEVEL = {
    "name",
    "description",
    "preset",
    "A",
    "B",
    "control_lower",
    "control_upper",
    "delta",
    "pair",
    "eps_list",
    "n_range",
    "fit_window",
    "mode",
    "log_base",
    "seed",
    "budget",
    "separated_n_range",
    "separated_epsilon",
    "separated_rho",
    "admissibility_horizon",
    "witness_epsilon",
    "witness_t_max",
}
_PAIR_KEYS = {"K_lower", "K_upper", "rho", "Q_lower", "Q_upper", "Q_center", "Q_radius", "serving"}


class ScenarioError(ValidationError):
    """Raised for invalid scenario files; carries the field and its YAML line."""

    def __init__(self, message: str, field_name: Optional[str] = None, line: Optional[int] = None, source: Optional[str] = None):
        self.field_name = field_name
        self.line = line
        self.source = source
        location = ":".join(str(part) for part in (source, line) if part is not None)
        prefix = f"{location}: " if location else ""
        where = f"{field_name}: " if field_name else ""
        super().__init__(f"{prefix}{where}{message}", stage="scenario")

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        data.update({"field": self.field_name, "line": self.line, "source": self.source})
        return data


def _line_index(text: str) -> Dict[str, int]:
    """1-based YAML line of every top-level key and of every key in the pair block."""
    lines: Dict[str, int] = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return lines
    if not isinstance(root, yaml.MappingNode):
        return lines
    for key_node, value_node in root.value:
        lines[str(key_node.value)] = key_node.start_mark.line + 1
        if key_node.value == "pair" and isinstance(value_node, yaml.MappingNode):
            for sub_key, _ in value_node.value:
                lines[f"pair.{sub_key.value}"] = sub_key.start_mark.line + 1
    return lines


@dataclass
class Scenario:
    """A validated scenario."""

    name: str
    K_region: BoxRegion
    rho: float
    Q_region: Region
    eps_list: List[float]
    n_values: List[int]
    serving: str = "point"
    preset: Optional[str] = None
    A: Optional[List[List[float]]] = None
    B: Optional[List[List[float]]] = None
    control_lower: Optional[List[float]] = None
    control_upper: Optional[List[float]] = None
    delta: Optional[float] = None
    fit_window: Optional[Tuple[int, int]] = None
    mode: str = "greedy"
    log_base: Optional[str] = None
    seed: int = 0
    budget: Optional[int] = None
    separated_n_values: List[int] = field(default_factory=list)
    separated_epsilon: Optional[float] = None
    separated_rho: Optional[float] = None
    admissibility_horizon: Optional[int] = None
    witness_epsilon: Optional[float] = None
    witness_t_max: Optional[float] = None
    description: str = ""
    source: Optional[str] = None

    def build_system(self) -> LinearSystem:
        if self.preset:
            return get_preset(self.preset, self.control_lower, self.control_upper, self.delta)
        kwargs: Dict[str, Any] = {"name": self.name}
        if self.control_lower is not None:
            kwargs["control_lower"] = self.control_lower
        if self.control_upper is not None:
            kwargs["control_upper"] = self.control_upper
        if self.delta is not None:
            kwargs["delta"] = self.delta
        return euclidean_system(self.A, self.B, **kwargs)

    def build_pair(self, system: LinearSystem, epsilon: Optional[float] = None) -> AdmissiblePair:
        eps = self.eps_list[-1] if epsilon is None else epsilon
        return AdmissiblePair.from_regions(system.group, self.K_region, self.rho, self.Q_region, eps, self.serving)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["K_region"] = self.K_region.to_dict()
        data["Q_region"] = self.Q_region.to_dict()
        data.pop("source", None)
        if self.fit_window is not None:
            data["fit_window"] = list(self.fit_window)
        return data

    def fingerprint(self, extra: Optional[Dict[str, Any]] = None) -> str:
        """sha256 of the canonical YAML dump of the scenario (and optional settings)."""
        payload = {"scenario": self.to_dict(), "settings": extra or {}}
        return hashlib.sha256(yaml.safe_dump(payload, sort_keys=True).encode("utf-8")).hexdigest()

    def with_overrides(self, mode: Optional[str] = None, log_base: Optional[str] = None, seed: Optional[int] = None, budget: Optional[int] = None) -> "Scenario":
        """Copy with command-line or tool-call overrides applied and validated."""
        changes: Dict[str, Any] = {}
        if mode is not None:
            if mode not in ("greedy", "exact", "both"):
                raise ScenarioError(f"mode must be greedy, exact or both, got {mode!r}", "mode", source=self.source)
            changes["mode"] = mode
        if log_base is not None:
            if str(log_base) not in ("2", "e"):
                raise ScenarioError(f"log_base must be 2 or e, got {log_base!r}", "log_base", source=self.source)
            changes["log_base"] = str(log_base)
        if seed is not None:
            changes["seed"] = int(seed)
        if budget is not None:
            if int(budget) <= 0:
                raise ScenarioError(f"budget must be a positive integer, got {budget!r}", "budget", source=self.source)
            changes["budget"] = int(budget)
        return replace(self, **changes)


def _as_float_list(value: Any, key: str, lines: Dict[str, int], source: Optional[str]) -> List[float]:
    try:
        arr = np.atleast_1d(np.asarray(value, dtype=float))
    except (TypeError, ValueError):
        raise ScenarioError(f"expected a number or a list of numbers, got {value!r}", key, lines.get(key), source)
    if arr.ndim != 1 or not np.all(np.isfinite(arr)):
        raise ScenarioError(f"expected a flat list of finite numbers, got {value!r}", key, lines.get(key), source)
    return [float(v) for v in arr]


def _as_range(value: Any, key: str, lines: Dict[str, int], source: Optional[str]) -> List[int]:
    if not isinstance(value, (list, tuple)) or len(value) != 2 or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        raise ScenarioError(f"expected [first, last] integers, got {value!r}", key, lines.get(key), source)
    lo, hi = value
    if lo < 0 or hi < lo:
        raise ScenarioError(f"range [{lo}, {hi}] is empty or negative", key, lines.get(key), source)
    return list(range(lo, hi + 1))


def parse_scenario(text: str, source: Optional[str] = None) -> Scenario:
    """Parse and validate scenario YAML text."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ScenarioError(f"invalid YAML: {e}", line=mark.line + 1 if mark else None, source=source)
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a mapping", source=source)
    lines = _line_index(text)

    def fail(key: str, message: str) -> ScenarioError:
        return ScenarioError(message, key, lines.get(key), source)

    for key in data:
        if key not in _TOP_LEVEL:
            raise fail(str(key), "unknown field")

    preset = data.get("preset")
    if preset is not None and preset not in list_presets():
        raise fail("preset", f"unknown preset {preset!r}; available: {', '.join(list_presets())}")
    if preset is None and ("A" not in data or "B" not in data):
        raise fail("preset", "either preset or both A and B are required")
    if preset is not None and ("A" in data or "B" in data):
        raise fail("A" if "A" in data else "B", "inline matrices cannot be combined with a preset")

    pair = data.get("pair")
    if not isinstance(pair, dict):
        raise fail("pair", "a pair block with K_lower, K_upper, rho and Q is required")
    for key in pair:
        if key not in _PAIR_KEYS:
            raise fail(f"pair.{key}", "unknown field")
    if "rho" not in pair:
        raise fail("pair", "pair.rho is required")
    regions: Dict[str, Region] = {}
    for prefix in ("K", "Q"):
        try:
            regions[prefix] = region_from_mapping(pair, prefix)
        except ValidationError as e:
            key = next((f"pair.{k}" for k in pair if k.startswith(f"{prefix}_")), "pair")
            raise fail(key, e.message)
    K_region, Q_region = regions["K"], regions["Q"]
    if not isinstance(K_region, BoxRegion):
        raise fail("pair.K_lower", "K must be a box")
    rho = float(pair["rho"])
    if not rho > 0:
        raise fail("pair.rho", f"rho must be positive, got {rho}")
    serving = str(pair.get("serving", "point"))
    if serving not in SERVING_MODES:
        raise fail("pair.serving", f"serving must be one of {', '.join(SERVING_MODES)}, got {serving!r}")

    if "eps_list" not in data:
        raise fail("eps_list", "eps_list is required")
    eps_list = _as_float_list(data["eps_list"], "eps_list", lines, source)
    if any(e <= 0 for e in eps_list):
        raise fail("eps_list", "every epsilon must be positive")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise fail("eps_list", f"eps_list must be strictly decreasing, got {eps_list}")
    if rho > min(eps_list) / 4.0 + 1e-15:
        raise fail("pair.rho", f"rho = {rho} exceeds epsilon_min / 4 = {min(eps_list) / 4.0}")

    if "n_range" not in data:
        raise fail("n_range", "n_range is required")
    n_values = _as_range(data["n_range"], "n_range", lines, source)

    fit_window = None
    if data.get("fit_window") is not None:
        window = _as_range(data["fit_window"], "fit_window", lines, source)
        fit_window = (window[0], window[-1])

    mode = str(data.get("mode", "greedy"))
    if mode not in ("greedy", "exact", "both"):
        raise fail("mode", f"mode must be greedy, exact or both, got {mode!r}")
    log_base = data.get("log_base")
    if log_base is not None:
        log_base = str(log_base)
        if log_base not in ("2", "e"):
            raise fail("log_base", f"log_base must be 2 or e, got {log_base!r}")

    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise fail("seed", f"seed must be an integer, got {seed!r}")
    budget = data.get("budget")
    if budget is not None and (not isinstance(budget, int) or budget <= 0):
        raise fail("budget", f"budget must be a positive integer, got {budget!r}")

    separated_n_values: List[int] = []
    if data.get("separated_n_range") is not None:
        separated_n_values = _as_range(data["separated_n_range"], "separated_n_range", lines, source)
        if separated_n_values[0] < 1:
            raise fail("separated_n_range", "separated sets need n >= 1")
        if data.get("separated_epsilon") is None:
            raise fail("separated_epsilon", "separated_epsilon is required with separated_n_range")

    def optional_positive(key: str) -> Optional[float]:
        if data.get(key) is None:
            return None
        try:
            value = float(data[key])
        except (TypeError, ValueError):
            raise fail(key, f"expected a number, got {data[key]!r}")
        if not value > 0:
            raise fail(key, f"{key} must be positive")
        return value

    horizon = data.get("admissibility_horizon")
    if horizon is not None and (not isinstance(horizon, int) or horizon < max(n_values)):
        raise fail("admissibility_horizon", f"admissibility_horizon must be an integer >= {max(n_values)}")

    scenario = Scenario(
        name=str(data.get("name") or preset or "inline"),
        description=str(data.get("description", "")),
        K_region=K_region,
        rho=rho,
        Q_region=Q_region,
        serving=serving,
        eps_list=eps_list,
        n_values=n_values,
        preset=preset,
        A=data.get("A"),
        B=data.get("B"),
        control_lower=_as_float_list(data["control_lower"], "control_lower", lines, source) if "control_lower" in data else None,
        control_upper=_as_float_list(data["control_upper"], "control_upper", lines, source) if "control_upper" in data else None,
        delta=optional_positive("delta"),
        fit_window=fit_window,
        mode=mode,
        log_base=log_base,
        seed=seed,
        budget=budget,
        separated_n_values=separated_n_values,
        separated_epsilon=optional_positive("separated_epsilon"),
        separated_rho=optional_positive("separated_rho"),
        admissibility_horizon=horizon,
        witness_epsilon=optional_positive("witness_epsilon"),
        witness_t_max=optional_positive("witness_t_max"),
        source=source,
    )

    # the control box must contain 0 and the inline matrices must be well formed
    try:
        scenario.build_system()
    except (LieEntropyError, TypeError, ValueError) as e:
        message = getattr(e, "message", str(e))
        key = "A" if preset is None and not message.startswith("Control") else "control_lower"
        raise fail(key, message)
    return scenario


def bundled_scenarios() -> List[str]:
    """Names of the scenario files shipped with the package."""
    directory = package_data_path(SCENARIO_DIR)
    if not os.path.isdir(directory):
        return []
    return sorted(name[: -len(".yaml")] for name in os.listdir(directory) if name.endswith(".yaml"))


def resolve_scenario_path(path_or_name: str) -> str:
    """A file path as given, or the path of a bundled scenario by name."""
    if os.path.exists(path_or_name):
        return path_or_name
    bundled = package_data_path(os.path.join(SCENARIO_DIR, f"{path_or_name}.yaml"))
    if os.path.exists(bundled):
        return bundled
    raise ScenarioError(f"no scenario file or bundled scenario named {path_or_name!r}; bundled: {', '.join(bundled_scenarios())}")


def load_scenario(path_or_name: str) -> Scenario:
    """Load a scenario from a file path or a bundled scenario name."""
    path = resolve_scenario_path(path_or_name)
    with open(path, "r") as f:
        text = f.read()
    scenario = parse_scenario(text, source=os.path.basename(path))
    logger.info(f"Loaded scenario {scenario.name} from {path}")
    return scenario
