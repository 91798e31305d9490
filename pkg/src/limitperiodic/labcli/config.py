"""INI run configurations.

A configuration has a ``[run]`` section naming the experiment and optional
sections for the potential, grids, schedule and the experiment itself::

    [run]
    kind = lyapunov-curve
    seed = 0

    [potential]
    members = 0

    [grid]
    lambdas = 1
    e_min = -4
    e_max = 4
    step = 0.01

``members`` is a ``;``-separated list of potentials, each a
comma-separated list of values. ``file`` may name a potential file
instead. Keys under ``[settings]`` override joining settings by field
name; ``[induction]`` carries the block parameters.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import asdict, dataclass, field, fields

from ..construct.params import JoiningSettings
from ..odometer import load_potential

KINDS = ("bands", "lyapunov-curve", "meas-bounds", "start", "induction", "iterate")
OUT_ENV = "LIMITPERIODIC_OUT"

_SETTING_TYPES = {f.name: f.type for f in fields(JoiningSettings)}


@dataclass(frozen=True)
class RunConfig:
    kind: str
    seed: int = 0
    out: str | None = None
    members: tuple[tuple[float, ...], ...] = ((0.0,),)
    lambdas: tuple[float, ...] = (1.0,)
    e_min: float = -4.0
    e_max: float = 4.0
    step: float = 0.01
    schedule: tuple[int, ...] | None = None  # None: doubling
    radius: float = 10.0
    M: float = 1.25
    levels: tuple[int, ...] = (1, 2, 3)
    depth: int = 3
    eps_1: float = 0.8
    M_cap: float = 1.25
    preset: str = "desk"
    r: int = 4
    energy: float = 0.3
    level: int | None = None
    amp_exponent: float = 1.0
    theta_exponent: float = 70.0
    theta_nice: float | None = None
    diameter_exponent: float = 1.0
    per_band: int = 5
    settings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["members"] = [list(m) for m in self.members]
        d["lambdas"] = list(self.lambdas)
        d["levels"] = list(self.levels)
        d["schedule"] = None if self.schedule is None else list(self.schedule)
        d["M_cap"] = self.M_cap if math.isfinite(self.M_cap) else "inf"
        d["settings"] = dict(sorted(self.settings.items()))
        return d


# (section, key) -> (RunConfig field, parser)
def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace(",", " ").split())


def _members(text: str) -> tuple[tuple[float, ...], ...]:
    return tuple(_floats(part) for part in text.split(";") if part.strip())


def _opt_float(text: str):
    return None if text.strip().lower() in ("", "none") else float(text)


def _opt_int(text: str):
    return None if text.strip().lower() in ("", "none") else int(text)


KEYS = {
    ("run", "kind"): ("kind", str.strip),
    ("run", "seed"): ("seed", int),
    ("run", "out"): ("out", str.strip),
    ("potential", "members"): ("members", _members),
    ("potential", "file"): (None, str.strip),
    ("grid", "lambdas"): ("lambdas", _floats),
    ("grid", "e_min"): ("e_min", float),
    ("grid", "e_max"): ("e_max", float),
    ("grid", "step"): ("step", float),
    ("grid", "per_band"): ("per_band", int),
    ("schedule", "indices"): ("schedule", _ints),
    ("start", "radius"): ("radius", float),
    ("start", "M"): ("M", float),
    ("start", "levels"): ("levels", _ints),
    ("iterate", "depth"): ("depth", int),
    ("iterate", "eps_1"): ("eps_1", float),
    ("iterate", "radius"): ("radius", float),
    ("iterate", "M_cap"): ("M_cap", float),
    ("iterate", "preset"): ("preset", str.strip),
    ("induction", "r"): ("r", int),
    ("induction", "energy"): ("energy", float),
    ("induction", "level"): ("level", _opt_int),
    ("induction", "amp_exponent"): ("amp_exponent", float),
    ("induction", "theta_exponent"): ("theta_exponent", float),
    ("induction", "theta_nice"): ("theta_nice", _opt_float),
    ("induction", "diameter_exponent"): ("diameter_exponent", float),
}


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep M, M_cap case
    return cp


def _coerce_setting(name: str, text: str):
    typ = _SETTING_TYPES[name]
    if typ in ("int", int):
        return int(text)
    if typ in ("float", float):
        return float(text)
    return text.strip()


def apply_overrides(text: str, overrides) -> str:
    """Return ``text`` with ``section.key=value`` pairs written into it."""
    cp = _parser()
    cp.read_string(text)
    for item in overrides or ():
        key, sep, value = item.partition("=")
        section, dot, option = key.strip().partition(".")
        if not sep or not dot or not option:
            raise ValueError(f"override {item!r} is not of the form section.key=value")
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, option, value.strip())
    lines = []
    for s in cp.sections():
        lines.append(f"[{s}]")
        lines.extend(f"{k} = {v}" for k, v in cp.items(s))
        lines.append("")
    return "\n".join(lines)


def validate_config(text: str, base_dir: str | None = None) -> tuple[RunConfig | None, list[str]]:
    """Parse a configuration; either a config and no errors, or None and every violation."""
    errors: list[str] = []
    cp = _parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        return None, [f"syntax: {exc}".replace("\n", " ")]

    values: dict = {}
    file_path = None
    for section in cp.sections():
        for key, raw in cp.items(section):
            if section == "settings":
                if key not in _SETTING_TYPES:
                    errors.append(f"settings.{key}: unknown setting")
                    continue
                try:
                    values.setdefault("settings", {})[key] = _coerce_setting(key, raw)
                except ValueError:
                    errors.append(f"settings.{key}: cannot parse {raw!r}")
                continue
            spec = KEYS.get((section, key))
            if spec is None:
                errors.append(f"{section}.{key}: unknown key")
                continue
            name, parse = spec
            try:
                parsed = parse(raw)
            except ValueError:
                errors.append(f"{section}.{key}: cannot parse {raw!r}")
                continue
            if name is None:
                file_path = parsed
            else:
                values[name] = parsed

    kind = values.get("kind")
    if kind is None:
        errors.append("run.kind: missing; allowed kinds are " + ", ".join(KINDS))
    elif kind not in KINDS:
        errors.append(f"run.kind: unknown kind {kind!r}; allowed kinds are " + ", ".join(KINDS))

    if file_path is not None:
        if "members" in values:
            errors.append("potential.file: give either members or file, not both")
        else:
            path = file_path if base_dir is None else os.path.join(base_dir, file_path)
            try:
                values["members"] = (tuple(load_potential(path).values.tolist()),)
            except (OSError, ValueError) as exc:
                errors.append(f"potential.file: {exc}")

    errors.extend(_check_values(values))
    if errors:
        return None, errors
    return RunConfig(**values), []


def _finite(x) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


def _check_values(v: dict) -> list[str]:
    errs = []
    step = v.get("step", 0.01)
    if not (_finite(step) and step > 0):
        errs.append(f"grid.step: must be > 0, got {step}")
    e_min, e_max = v.get("e_min", -4.0), v.get("e_max", 4.0)
    if not (_finite(e_min) and _finite(e_max) and e_min < e_max):
        errs.append(f"grid.e_min/e_max: need e_min < e_max, got {e_min}, {e_max}")
    if "per_band" in v and v["per_band"] < 1:
        errs.append("grid.per_band: must be >= 1")
    members = v.get("members", ((0.0,),))
    if not members or any(len(m) == 0 for m in members):
        errs.append("potential.members: every member needs at least one value")
    elif any(not all(_finite(x) for x in m) for m in members):
        errs.append("potential.members: values must be finite")
    lams = v.get("lambdas", (1.0,))
    if not lams:
        errs.append("grid.lambdas: at least one coupling is required")
    elif not all(_finite(x) for x in lams):
        errs.append("grid.lambdas: couplings must be finite")
    elif v.get("kind") in ("iterate", "start", "induction") and any(x == 0 for x in lams):
        errs.append(f"grid.lambdas: coupling 0 is not allowed for {v['kind']}")
    sched = v.get("schedule")
    if sched is not None:
        if not sched or sched[0] < 1 or any(b <= a or b % a for a, b in zip(sched, sched[1:])):
            errs.append("schedule.indices: need increasing periods, each dividing the next")
    if not v.get("radius", 10.0) > 0:
        errs.append("radius: must be > 0")
    if not v.get("M", 1.25) >= 1:
        errs.append("start.M: must be >= 1")
    if not v.get("levels", (1,)) or min(v.get("levels", (1,))) < 0:
        errs.append("start.levels: need nonnegative levels")
    if v.get("depth", 3) < 1:
        errs.append("iterate.depth: must be >= 1")
    if not 0 < v.get("eps_1", 0.8) <= 1:
        errs.append("iterate.eps_1: must lie in (0, 1]")
    if not v.get("M_cap", 1.25) >= 1:
        errs.append("iterate.M_cap: must be >= 1")
    if v.get("preset", "desk") not in ("desk", "default"):
        errs.append("iterate.preset: must be 'desk' or 'default'")
    if v.get("r", 4) < 2:
        errs.append("induction.r: must be >= 2")
    if not v.get("amp_exponent", 1.0) > 0:
        errs.append("induction.amp_exponent: must be > 0")
    tn = v.get("theta_nice")
    if tn is not None and not tn > 0:
        errs.append("induction.theta_nice: must be > 0")
    if v.get("settings"):
        try:
            JoiningSettings().with_overrides(**v["settings"])
        except Exception as exc:  # ParameterError or a dataclass check
            errs.append(f"settings: {exc}")
    return errs


def load_config(path, overrides=()) -> tuple[RunConfig | None, list[str]]:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        return None, [f"config: cannot read {path}: {exc.strerror}"]
    try:
        text = apply_overrides(text, overrides)
    except (ValueError, configparser.Error) as exc:
        return None, [f"override: {exc}"]
    return validate_config(text, base_dir=os.path.dirname(os.path.abspath(path)))


__all__ = ["KINDS", "OUT_ENV", "RunConfig", "apply_overrides", "load_config", "validate_config"]
