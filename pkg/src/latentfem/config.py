"""Flat ``key = value`` experiment configuration with strict validation.

One assignment per line, ``#`` starts a comment, keys carry a dotted section
prefix (``material.H_m = 338e6``). Values are SI; a key ending in ``_mm`` is
given in millimetres and stored under the stem in metres. Every key must be
known for the selected case, otherwise parsing fails with all offending keys
listed at once.
"""

from dataclasses import dataclass, field
from pathlib import Path

CASES = ("front_1d", "meltvol_1d", "single_track")

_BOOL = {"true": True, "false": False, "yes": True, "no": False, "on": True, "off": False, "1": True, "0": False}


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists every offending key or line."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


# key -> (type, default). ``None`` defaults mark optional keys.
_COMMON = {
    "case": (str, None),
    "scheme.type": (str, "hi"),
    "scheme.mode": (str, "isothermal"),
    "scheme.criterion": (str, "tolerance"),
    "scheme.eps_tol": (float, 1e-3),
    "scheme.d": (float, None),
    "scheme.bump": (str, "quartic"),
    "solver.theta": (float, 1.0),
    "solver.rtol": (float, 1e-6),
    "solver.atol": (float, 1e-10),
    "solver.max_iter": (int, 1000),
    "solver.capacity": (str, "auto"),
    "solver.linear_solver": (str, "direct"),
    "solver.linear_rtol": (float, 1e-10),
    "solver.line_search": (bool, True),
    "solver.max_backtracks": (int, 8),
    "solver.predictor": (str, "extrapolate"),
    "time.dt0": (float, 200.0),
    "time.t_end": (float, None),
    "time.adaptive": (bool, False),
    "time.dt_min": (float, None),
    "time.double_after": (int, 4),
    "material.T_m": (float, None),
    "material.H_m": (float, None),
    "material.T_s": (float, None),
    "material.T_l": (float, None),
    "material.C_s": (float, None),
    "material.C_m": (float, None),
    "material.k_s": (float, None),
    "material.k_m": (float, None),
    "output.dir": (str, None),
    "output.snapshot_times": (str, ""),
    "output.label": (str, None),
}

_WATER = {
    "mesh.n_elements": (int, 25),
    "mesh.length": (float, 1.0),
    "material.interval_T_s": (float, 270.0),
    "material.interval_T_l": (float, 276.0),
}

_CASE_KEYS = {
    "front_1d": {
        **_WATER,
        "case.T_wall": (float, 253.0),
        "case.T_0": (float, 283.0),
        "time.t_end": (float, 72e3),
    },
    "meltvol_1d": {
        **_WATER,
        "case.T_0": (float, 263.0),
        "case.source_amplitude": (float, 20000.0),
        "time.t_end": (float, 20e3),
    },
    "single_track": {
        "mesh.extent_x": (float, 0.6e-3),
        "mesh.extent_y": (float, 0.2e-3),
        "mesh.extent_z": (float, 0.2e-3),
        "mesh.layer_thickness": (float, 0.05e-3),
        "mesh.elements_per_layer": (int, 3),
        "mesh.substrate_z_factor": (float, 2.0),
        "material.C_p": (float, None),
        "case.T_0": (float, 303.0),
        "laser.power": (float, 30.0),
        "laser.radius": (float, 0.06e-3),
        "laser.speed": (float, 0.12),
        "laser.reflectivity": (float, 0.7),
        "laser.extinction": (float, 60000.0),
        "laser.start_x": (float, -0.06e-3),
        "laser.variant": (str, "gusarov"),
        "scheme.d": (float, 100.0),
        "time.dt0": (float, 5e-6),
        "time.t_end": (float, 4e-3),
        "time.adaptive": (bool, True),
        "solver.max_iter": (int, 30),
        "steady.window": (float, 300e-6),
        "steady.rtol": (float, 0.01),
        "steady.min_time": (float, 1e-3),
        "output.vtk": (bool, True),
    },
}


@dataclass
class ExperimentConfig:
    """Resolved configuration: every known key with its value (defaults filled in)."""

    case: str
    values: dict
    source: str = "<memory>"
    explicit: set = field(default_factory=set)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        v = self.values.get(key, default)
        return default if v is None else v

    def section(self, prefix):
        p = prefix + "."
        return {k[len(p):]: v for k, v in self.values.items() if k.startswith(p)}

    def to_text(self):
        lines = [f"case = {self.case}"]
        for k in sorted(self.values):
            if k == "case" or self.values[k] is None:
                continue
            lines.append(f"{k} = {_format(self.values[k])}")
        return "\n".join(lines) + "\n"


def _format(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _convert(raw, typ):
    if typ is bool:
        key = raw.strip().lower()
        if key not in _BOOL:
            raise ValueError(f"expected a boolean, got {raw!r}")
        return _BOOL[key]
    if typ is int:
        f = float(raw)
        if f != int(f):
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(f)
    if typ is float:
        return float(raw)
    return raw.strip()


def parse_assignments(lines, origin="<config>"):
    """Split lines into ``(key, raw value, location)`` triples; syntax errors collected."""
    out, problems = [], []
    for no, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            problems.append(f"{origin}:{no}: expected 'key = value', got {line.strip()!r}")
            continue
        key, value = (s.strip() for s in text.split("=", 1))
        if not key or not value:
            problems.append(f"{origin}:{no}: empty key or value")
            continue
        out.append((key, value, f"{origin}:{no}"))
    return out, problems


def build_config(assignments, source="<memory>"):
    """Validate ``(key, raw, where)`` triples (later entries win) into an :class:`ExperimentConfig`."""
    problems = []
    seen = {}
    for key, raw, where in assignments:
        if key.endswith("_mm"):
            stem = key[:-3]
            try:
                raw = repr(float(raw) * 1e-3)
            except ValueError:
                problems.append(f"{where}: {key}: expected a number, got {raw!r}")
                continue
            key = stem
        seen[key] = (raw, where)
    case = seen.get("case", (None, None))[0]
    if case is None:
        raise ConfigError(problems + ["missing required key 'case'"])
    if case not in CASES:
        raise ConfigError(problems + [f"case must be one of {', '.join(CASES)}, got {case!r}"])
    schema = {**_COMMON, **_CASE_KEYS[case]}
    values = {k: d for k, (_, d) in schema.items()}
    values["case"] = case
    for key, (raw, where) in seen.items():
        if key not in schema:
            problems.append(f"{where}: unknown key {key!r} for case {case}")
            continue
        try:
            values[key] = _convert(raw, schema[key][0])
        except ValueError as exc:
            problems.append(f"{where}: {key}: {exc}")
    problems += _check(values)
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(case=case, values=values, source=source, explicit=set(seen))


def _check(v):
    problems = []
    choices = {
        "scheme.type": ("none", "ac", "hi"),
        "scheme.mode": ("isothermal", "mushy"),
        "scheme.criterion": ("original", "tolerance"),
        "scheme.bump": ("quartic", "sine"),
        "solver.capacity": ("auto", "consistent", "lumped"),
        "solver.linear_solver": ("direct", "bicgstab"),
        "solver.predictor": ("previous", "extrapolate"),
        "laser.variant": ("gusarov", "printed"),
    }
    for key, allowed in choices.items():
        if key in v and v[key] not in allowed:
            problems.append(f"{key} must be one of {', '.join(allowed)}, got {v[key]!r}")
    positive = [
        "time.dt0", "time.t_end", "solver.rtol", "solver.atol", "solver.linear_rtol",
        "mesh.length", "mesh.extent_x", "mesh.extent_y", "mesh.extent_z", "mesh.layer_thickness",
        "laser.power", "laser.radius", "laser.speed", "laser.extinction", "steady.window",
    ]
    for key in positive:
        if v.get(key) is not None and not v[key] > 0:
            problems.append(f"{key} must be positive, got {v[key]!r}")
    for key in ("solver.max_iter", "mesh.n_elements", "mesh.elements_per_layer", "time.double_after"):
        if v.get(key) is not None and v[key] < 1:
            problems.append(f"{key} must be at least 1, got {v[key]!r}")
    if not 0.0 <= v["solver.theta"] <= 1.0:
        problems.append(f"solver.theta must lie in [0, 1], got {v['solver.theta']!r}")
    if v["scheme.type"] == "hi" and v["scheme.criterion"] == "tolerance" and not 0.0 < v["scheme.eps_tol"] < 1.0:
        problems.append(f"scheme.eps_tol must lie in (0, 1), got {v['scheme.eps_tol']!r}")
    try:
        _parse_times(v.get("output.snapshot_times", ""))
    except ValueError as exc:
        problems.append(f"output.snapshot_times: {exc}")
    return problems


def _parse_times(text):
    text = (text or "").strip()
    if not text:
        return []
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


def snapshot_times(cfg):
    return _parse_times(cfg.get("output.snapshot_times", ""))


def parse_override(text):
    if "=" not in text:
        raise ConfigError([f"override must look like key=value, got {text!r}"])
    key, value = (s.strip() for s in text.split("=", 1))
    if not key or not value:
        raise ConfigError([f"override must look like key=value, got {text!r}"])
    return key, value


def load_config(path, overrides=()):
    """Read a config file and apply ``key=value`` overrides on top."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from exc
    assignments, problems = parse_assignments(text.splitlines(), str(path))
    for i, ov in enumerate(overrides):
        key, value = parse_override(ov)
        assignments.append((key, value, f"--override[{i}]"))
    if problems:
        raise ConfigError(problems)
    return build_config(assignments, source=str(path))


def config_from_dict(mapping):
    """Build a configuration from ``{key: value}`` (values formatted as text first)."""
    assignments = [(k, _format(v), f"<dict:{k}>") for k, v in mapping.items()]
    return build_config(assignments)
