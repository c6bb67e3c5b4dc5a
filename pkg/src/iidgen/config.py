"""Scenario files (YAML) and the bundled example scenarios.

A scenario is a mapping with keys::

    name: example1
    seed: 0
    exosystems:            # one entry per forcing channel, all sharing S
      - {S: [[0, 1], [-1, 0]], E: [1, 0], w0: [1, 1]}
    plant:
      A: [[0]]             # constant A, or A_expr (entry expressions) + frozen_A
      N: [[1]]             # one input vector per channel
    gains: {L1: [...], L23: [...]}      # or L11, L12, L21, L22, L3
    region: {sector_inner_angle: 2.356, strip: [-10, -1]}
    synthesis: {gamma0: 20, nu0: 20, alpha: 0.5, beta: 0.5, budget: 1500}  # seed: defaults to top level
    sim:
      dt: 0.001
      horizon: 30
      noise: {kind: sinusoid, amplitude: 0.1, frequency: peak, phase: 1.5708}

``gains``, ``region``, ``synthesis`` and ``sim.noise`` are optional. Unknown
keys are rejected; every error names the offending field.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .errors import ConfigError
from .model import Exosystem, GainSet, LmiRegion, MatrixExpr, Plant, ValidationReport, validate_scenario
from .sim import DEFAULT_DT, NoiseSpec
from .synthesis import SynthesisSpec

BUNDLED = ("example1", "example1_noise", "example2")


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    exosystems: tuple
    plant: Plant
    gains: Optional[GainSet] = None
    region: Optional[LmiRegion] = None
    synthesis: Optional[SynthesisSpec] = None
    dt: float = DEFAULT_DT
    horizon: float = 30.0
    seed: int = 0
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    # the noise frequency is resolved to the H-infinity peak of the gains
    noise_at_peak: bool = False
    report: ValidationReport = field(default_factory=ValidationReport, repr=False)

    def with_overrides(self, dt=None, horizon=None, seed=None, budget=None) -> "Scenario":
        """Copy with CLI-style overrides; ``seed`` reaches synthesis and uniform noise."""
        changes = {}
        if dt is not None:
            if not dt > 0:
                raise ConfigError("must be positive", "sim.dt")
            changes["dt"] = float(dt)
        if horizon is not None:
            if not horizon > 0:
                raise ConfigError("must be positive", "sim.horizon")
            changes["horizon"] = float(horizon)
        synthesis = self.synthesis
        if seed is not None:
            changes["seed"] = int(seed)
            changes["noise"] = dataclasses.replace(self.noise, seed=int(seed))
            if synthesis is not None:
                synthesis = dataclasses.replace(synthesis, seed=int(seed))
        if budget is not None:
            if synthesis is None:
                synthesis = SynthesisSpec(region=self.region, seed=changes.get("seed", self.seed))
            try:
                synthesis = dataclasses.replace(synthesis, budget=int(budget))
            except ValueError as exc:
                raise ConfigError(str(exc), "synthesis.budget") from None
        changes["synthesis"] = synthesis
        if changes.get("horizon", self.horizon) < 10 * changes.get("dt", self.dt):
            raise ConfigError("horizon must cover at least 10 steps", "sim.horizon")
        return dataclasses.replace(self, **changes)

    def synthesis_spec(self) -> SynthesisSpec:
        if self.synthesis is not None:
            return self.synthesis
        return SynthesisSpec(region=self.region, seed=self.seed)


# --- parsing helpers ---------------------------------------------------------


def _mapping(node, path, required=(), optional=()):
    if not isinstance(node, dict):
        raise ConfigError("expected a mapping", path)
    unknown = set(node) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"unknown keys {sorted(map(str, unknown))}", path)
    for key in required:
        if key not in node:
            raise ConfigError("missing required key", f"{path}.{key}" if path else key)
    return node


def _number(node, path, positive=False, nonnegative=False, allow_inf=False) -> float:
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        if allow_inf and node in ("inf", ".inf"):
            return math.inf
        raise ConfigError(f"expected a number, got {node!r}", path)
    x = float(node)
    if math.isnan(x) or (math.isinf(x) and not allow_inf):
        raise ConfigError("must be finite", path)
    if positive and not x > 0:
        raise ConfigError("must be positive", path)
    if nonnegative and not x >= 0:
        raise ConfigError("must be nonnegative", path)
    return x


def _integer(node, path, minimum=None) -> int:
    if isinstance(node, bool) or not isinstance(node, int):
        raise ConfigError(f"expected an integer, got {node!r}", path)
    if minimum is not None and node < minimum:
        raise ConfigError(f"must be >= {minimum}", path)
    return int(node)


def _vector(node, path) -> np.ndarray:
    if isinstance(node, (int, float)) and not isinstance(node, bool):
        node = [node]
    if not isinstance(node, list) or not node:
        raise ConfigError("expected a non-empty list of numbers", path)
    return np.array([_number(x, f"{path}[{i}]") for i, x in enumerate(node)])


def _matrix(node, path) -> np.ndarray:
    if not isinstance(node, list) or not node or not all(isinstance(r, list) for r in node):
        raise ConfigError("expected a non-empty nested list", path)
    rows = [_vector(r, f"{path}[{i}]") for i, r in enumerate(node)]
    if len({r.size for r in rows}) != 1:
        raise ConfigError("rows have different lengths", path)
    return np.array(rows)


def _parse_exosystem(node, path) -> Exosystem:
    _mapping(node, path, required=("S", "E", "w0"))
    return Exosystem(_matrix(node["S"], f"{path}.S"), _vector(node["E"], f"{path}.E"),
                     _vector(node["w0"], f"{path}.w0"))


def _parse_plant(node) -> Plant:
    _mapping(node, "plant", required=("N",), optional=("A", "A_expr", "frozen_A"))
    if ("A" in node) == ("A_expr" in node):
        raise ConfigError("give exactly one of A and A_expr", "plant")
    N = node["N"]
    if not isinstance(N, list) or not N:
        raise ConfigError("expected a list of input vectors", "plant.N")
    N_list = tuple(_vector(v, f"plant.N[{k}]") for k, v in enumerate(N))
    if "A" in node:
        A = _matrix(node["A"], "plant.A")
        frozen = _matrix(node["frozen_A"], "plant.frozen_A") if "frozen_A" in node else None
        if frozen is not None and (frozen.shape != A.shape or not np.array_equal(frozen, A)):
            raise ConfigError("must equal A for a constant plant", "plant.frozen_A")
        return Plant(A, N_list)
    if "frozen_A" not in node:
        raise ConfigError("required when A_expr is given", "plant.frozen_A")
    A_expr = MatrixExpr.from_config(node["A_expr"], "plant.A_expr")
    return Plant(A_expr, N_list, _matrix(node["frozen_A"], "plant.frozen_A"))


def _parse_gains(node, m) -> GainSet:
    stacked = ("L1", "L23")
    blocks = ("L11", "L12", "L21", "L22", "L3")
    _mapping(node, "gains", optional=stacked + blocks)
    keys = set(node)
    if keys == set(stacked):
        L1 = _vector(node["L1"], "gains.L1")
        L23 = _vector(node["L23"], "gains.L23")
        if m is None or L1.size <= m or L23.size != L1.size + 1:
            raise ConfigError(f"L1 has {L1.size} and L23 {L23.size} entries; "
                              "need len(L23) = len(L1) + 1 = m + n + 1", "gains")
        return GainSet.from_stacked(L1, L23, m)
    if keys == set(blocks):
        return GainSet(*(_vector(node[k], f"gains.{k}") for k in blocks[:4]),
                       _number(node["L3"], "gains.L3"))
    raise ConfigError("give either L1 and L23, or all of L11, L12, L21, L22, L3", "gains")


def _parse_region(node) -> LmiRegion:
    _mapping(node, "region", optional=("strip", "sector_inner_angle", "half_plane"))
    parts = []
    if "sector_inner_angle" in node:
        parts.append(LmiRegion.conic_sector(_number(node["sector_inner_angle"],
                                                    "region.sector_inner_angle", positive=True)))
    if "strip" in node:
        s = node["strip"]
        if not isinstance(s, list) or len(s) != 2:
            raise ConfigError("expected [hmin, hmax]", "region.strip")
        parts.append(LmiRegion.strip(_number(s[0], "region.strip[0]"), _number(s[1], "region.strip[1]")))
    if "half_plane" in node:
        parts.append(LmiRegion.half_plane(_number(node["half_plane"], "region.half_plane")))
    if not parts:
        raise ConfigError("empty region", "region")
    region = parts[0] if len(parts) == 1 else LmiRegion.intersection(parts)
    problems = region.problems()
    if problems:
        raise ConfigError("; ".join(problems), "region")
    return region


def _parse_synthesis(node, region, seed) -> SynthesisSpec:
    keys = ("gamma0", "nu0", "alpha", "beta", "budget", "stability_margin", "seed")
    _mapping(node, "synthesis", optional=keys)
    kw = {}
    for key in ("gamma0", "nu0"):
        if key in node:
            kw[key] = _number(node[key], f"synthesis.{key}", positive=True, allow_inf=True)
    for key in ("alpha", "beta"):
        if key in node:
            kw[key] = _number(node[key], f"synthesis.{key}", nonnegative=True)
    if "budget" in node:
        kw["budget"] = _integer(node["budget"], "synthesis.budget", minimum=1)
    if "stability_margin" in node:
        kw["stability_margin"] = _number(node["stability_margin"], "synthesis.stability_margin",
                                         positive=True)
    # a synthesis seed overrides the scenario seed for the search only
    kw["seed"] = _integer(node["seed"], "synthesis.seed", minimum=0) if "seed" in node else seed
    try:
        return SynthesisSpec(region=region, **kw)
    except ValueError as exc:
        raise ConfigError(str(exc), "synthesis") from None


def _parse_noise(node, seed):
    _mapping(node, "sim.noise", required=("kind",), optional=("amplitude", "frequency", "phase"))
    kind = node["kind"]
    if kind not in ("none", "sinusoid", "uniform"):
        raise ConfigError(f"unknown kind {kind!r} (none, sinusoid, uniform)", "sim.noise.kind")
    amplitude = _number(node.get("amplitude", 0.0), "sim.noise.amplitude", nonnegative=True)
    at_peak = node.get("frequency") == "peak"
    if at_peak and kind != "sinusoid":
        raise ConfigError("'peak' only applies to sinusoidal noise", "sim.noise.frequency")
    frequency = 0.0 if at_peak else _number(node.get("frequency", 0.0), "sim.noise.frequency",
                                            nonnegative=True)
    phase = _number(node.get("phase", 0.0), "sim.noise.phase")
    return NoiseSpec(kind, amplitude, frequency, phase, seed), at_peak


def parse_scenario(data, name: Optional[str] = None) -> Scenario:
    """Build a :class:`Scenario` from a parsed mapping.

    Raises
    ------
    ConfigError
        Malformed input or a dimension mismatch; the message carries the field path.
    """
    _mapping(data, "", required=("exosystems", "plant"),
             optional=("name", "seed", "gains", "region", "synthesis", "sim"))
    seed = _integer(data.get("seed", 0), "seed", minimum=0)
    scen_name = data.get("name", name or "scenario")
    if not isinstance(scen_name, str):
        raise ConfigError("expected a string", "name")
    exos = data["exosystems"]
    if not isinstance(exos, list) or not exos:
        raise ConfigError("expected a non-empty list", "exosystems")
    exosystems = tuple(_parse_exosystem(e, f"exosystems[{k}]") for k, e in enumerate(exos))
    plant = _parse_plant(data["plant"])
    m = exosystems[0].S.shape[0] if exosystems[0].S.ndim == 2 else None
    gains = _parse_gains(data["gains"], m) if data.get("gains") is not None else None
    region = _parse_region(data["region"]) if data.get("region") is not None else None
    synthesis = (_parse_synthesis(data["synthesis"], region, seed)
                 if data.get("synthesis") is not None else None)

    sim = _mapping(data.get("sim", {}), "sim", optional=("dt", "horizon", "noise"))
    dt = _number(sim.get("dt", DEFAULT_DT), "sim.dt", positive=True)
    horizon = _number(sim.get("horizon", 30.0), "sim.horizon", positive=True)
    if horizon < 10 * dt:
        raise ConfigError("horizon must cover at least 10 steps", "sim.horizon")
    noise, at_peak = (_parse_noise(sim["noise"], seed) if sim.get("noise") is not None
                      else (NoiseSpec(seed=seed), False))

    report = validate_scenario(exosystems, plant, gains)
    if not report.ok:
        first = report.errors[0]
        raise ConfigError(first.message, first.path)
    return Scenario(scen_name, exosystems, plant, gains, region, synthesis, dt, horizon, seed,
                    noise, at_peak, report)


def scenario_to_dict(scenario: Scenario) -> dict:
    """Inverse of :func:`parse_scenario` (canonical form: stacked gains)."""
    def vec(a):
        return [float(x) for x in np.asarray(a).ravel()]

    def mat(a):
        return [vec(row) for row in np.asarray(a)]

    plant = scenario.plant
    pd = {}
    if plant.time_varying:
        pd["A_expr"] = plant.A.to_config()
        pd["frozen_A"] = mat(plant.frozen_A)
    else:
        pd["A"] = mat(plant.A)
    pd["N"] = [vec(N) for N in plant.N_list]
    out = {
        "name": scenario.name,
        "seed": scenario.seed,
        "exosystems": [{"S": mat(e.S), "E": vec(e.E), "w0": vec(e.w0)} for e in scenario.exosystems],
        "plant": pd,
    }
    if scenario.gains is not None:
        out["gains"] = {"L1": vec(scenario.gains.L1), "L23": vec(scenario.gains.L23)}
    if scenario.region is not None:
        out["region"] = scenario.region.to_config()
    if scenario.synthesis is not None:
        s = scenario.synthesis
        out["synthesis"] = {"gamma0": s.gamma0, "nu0": s.nu0, "alpha": s.alpha, "beta": s.beta,
                            "budget": int(s.budget), "stability_margin": s.stability_margin}
        if s.seed != scenario.seed:
            out["synthesis"]["seed"] = int(s.seed)
    sim = {"dt": scenario.dt, "horizon": scenario.horizon}
    noise = scenario.noise
    if noise.kind != "none":
        nd = {"kind": noise.kind, "amplitude": noise.amplitude}
        if noise.kind == "sinusoid":
            nd["frequency"] = "peak" if scenario.noise_at_peak else noise.frequency
            nd["phase"] = noise.phase
        sim["noise"] = nd
    out["sim"] = sim
    return out


def dump_scenario(scenario: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(scenario), sort_keys=False, default_flow_style=None)


def gains_fragment(gains: GainSet) -> str:
    """YAML ``gains:`` block that can replace the one in a scenario file."""
    data = {"gains": {"L1": [float(x) for x in gains.L1], "L23": [float(x) for x in gains.L23]}}
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=None)


def load_scenario(source) -> Scenario:
    """Load a scenario from a file path or a bundled name (``example1``, ...)."""
    path = Path(source)
    if path.is_file():
        text = path.read_text()
        name = path.stem
    elif str(source) in BUNDLED:
        text = resources.files("iidgen.scenarios").joinpath(f"{source}.yaml").read_text()
        name = str(source)
    else:
        raise ConfigError(f"no such file or bundled scenario (bundled: {', '.join(BUNDLED)})",
                          str(source))
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}", str(source)) from None
    return parse_scenario(data, name)
