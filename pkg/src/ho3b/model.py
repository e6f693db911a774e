"""Potential models and run specifications, with YAML input/output.

Model file layout (all energies in GeV, lengths in GeV^-1)::

    name: bhaduri
    kinematics: nonrelativistic          # or semirelativistic
    reference_mass: 1.0
    exchange_sign: 1                     # required sign of space x spin x isospin
    three_body_constant: 0.0             # A, enters as A/(m1 m2 m3)
    particles:
      u: {mass: 0.337, spin: 0.5, isospin: 0.5}
    structures:
      - pairs: all                       # or a list such as [u-u, u-b]
        form: coulomb
        strength: -0.2602
        operator: identity               # spin_spin, sigma_sigma or a matrix
        mass_factor: none                # or inverse_product

Unknown keys are rejected and every error names the file line.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

import yaml

from .radial import FORM_KINDS, FormFactor

__all__ = [
    "ConfigError",
    "Particle",
    "Structure",
    "PotentialModel",
    "RunSpec",
    "load_model",
    "load_run",
    "dump_model",
    "dump_run",
    "parse_model",
    "parse_run",
]

OPERATORS = ("identity", "spin_spin", "sigma_sigma")
KINEMATICS = ("nonrelativistic", "semirelativistic")
MODES = ("single_b", "free")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Particle:
    mass: float
    spin: float = 0.5
    isospin: float = 0.0


@dataclass(frozen=True)
class Structure:
    form: str
    strength: float
    pairs: Any = "all"  # "all" or tuple of sorted label pairs
    range: float | None = None
    eta: float | None = None
    operator: Any = "identity"  # name or tuple-of-tuples matrix
    mass_factor: str = "none"

    def form_factor(self, scale: float = 1.0) -> FormFactor:
        return FormFactor(self.form, self.strength * scale, self.range, self.eta)

    def applies_to(self, a: str, b: str) -> bool:
        return self.pairs == "all" or tuple(sorted((a, b))) in self.pairs


@dataclass(frozen=True)
class PotentialModel:
    name: str
    kinematics: str
    particles: dict
    structures: tuple
    reference_mass: float = 1.0
    exchange_sign: int = 1
    three_body_constant: float = 0.0
    note: str = ""

    @property
    def relativistic(self) -> bool:
        return self.kinematics == "semirelativistic"

    def with_constant(self, a: float) -> "PotentialModel":
        return PotentialModel(self.name, self.kinematics, self.particles, self.structures,
                              self.reference_mass, self.exchange_sign, a, self.note)


@dataclass(frozen=True)
class RunSpec:
    particles: tuple = ()
    L: int = 0
    parity: int = 1
    spin: float = 0.5
    isospin: float = 0.5
    levels: int = 1
    nq_opt: int = 8
    nq: int = 16
    mode: str = "single_b"
    ordering: tuple = (0, 1, 2)
    bounds: tuple = (0.2, 20.0)
    start: tuple | None = None
    b: float | None = None
    b_x: float | None = None
    b_y: float | None = None
    symmetry: str = "auto"
    grid: tuple | None = None
    nq_list: tuple | None = None
    L_values: tuple | None = None
    output: str | None = None

    def __post_init__(self):
        if not 0 <= self.nq_opt <= self.nq <= 16:
            raise ConfigError("cutoffs must satisfy 0 <= nq_opt <= nq <= 16")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.symmetry not in ("auto", "none", "pair", "full"):
            raise ConfigError("symmetry must be auto, none, pair or full")


# ---------------------------------------------------------------------------
# YAML with line numbers


def _compose(text: str, source: str):
    try:
        return yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def _line(node) -> int:
    return node.start_mark.line + 1


def _err(source: str, node, msg: str) -> ConfigError:
    return ConfigError(f"{source}:{_line(node)}: {msg}")


def _value(node, source: str):
    """Plain Python value of a node (scalars typed by the safe resolver)."""
    return yaml.safe_load(yaml.serialize(node))


def _mapping(node, source: str, allowed: Sequence[str], required: Sequence[str] = ()) -> dict:
    if not isinstance(node, yaml.MappingNode):
        raise _err(source, node, "expected a mapping")
    out = {}
    for k, v in node.value:
        key = k.value
        if key not in allowed:
            raise _err(source, k, f"unknown key {key!r}")
        if key in out:
            raise _err(source, k, f"duplicate key {key!r}")
        out[key] = v
    for key in required:
        if key not in out:
            raise _err(source, node, f"missing required key {key!r}")
    return out


def _num(node, source: str, positive: bool = False) -> float:
    v = _value(node, source)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise _err(source, node, "expected a number")
    if positive and not v > 0:
        raise _err(source, node, "expected a positive number")
    return float(v)


def _int(node, source: str) -> int:
    v = _value(node, source)
    if isinstance(v, bool) or not isinstance(v, int):
        raise _err(source, node, "expected an integer")
    return v


def _half(node, source: str) -> float:
    v = _num(node, source)
    if 2 * v != round(2 * v) or v < 0:
        raise _err(source, node, "expected a non-negative integer or half-integer")
    return v


def _str(node, source: str, choices: Sequence[str] | None = None) -> str:
    v = _value(node, source)
    if not isinstance(v, str):
        raise _err(source, node, "expected a string")
    if choices is not None and v not in choices:
        raise _err(source, node, f"expected one of {', '.join(choices)}")
    return v


def _seq(node, source: str) -> list:
    if not isinstance(node, yaml.SequenceNode):
        raise _err(source, node, "expected a list")
    return node.value


def parse_model(text: str, source: str = "<model>") -> PotentialModel:
    root = _compose(text, source)
    if root is None:
        raise ConfigError(f"{source}: empty model file")
    top = _mapping(root, source,
                   ["name", "kinematics", "reference_mass", "exchange_sign",
                    "three_body_constant", "particles", "structures", "note"],
                   ["kinematics", "particles", "structures"])
    particles = {}
    pnode = top["particles"]
    if not isinstance(pnode, yaml.MappingNode):
        raise _err(source, pnode, "particles must be a mapping label -> properties")
    for k, v in pnode.value:
        d = _mapping(v, source, ["mass", "spin", "isospin"], ["mass"])
        particles[str(k.value)] = Particle(
            _num(d["mass"], source, positive=True),
            _half(d["spin"], source) if "spin" in d else 0.5,
            _half(d["isospin"], source) if "isospin" in d else 0.0,
        )
    structures = []
    for snode in _seq(top["structures"], source):
        d = _mapping(snode, source,
                     ["pairs", "form", "strength", "range", "eta", "operator", "mass_factor"],
                     ["form", "strength"])
        form = _str(d["form"], source, FORM_KINDS)
        pairs: Any = "all"
        if "pairs" in d:
            pn = d["pairs"]
            if isinstance(pn, yaml.ScalarNode):
                if _str(pn, source) != "all":
                    raise _err(source, pn, "pairs must be 'all' or a list like [u-u, u-b]")
            else:
                lst = []
                for item in _seq(pn, source):
                    s = _str(item, source)
                    parts = s.split("-")
                    if len(parts) != 2 or any(p not in particles for p in parts):
                        raise _err(source, item, f"bad pair {s!r}")
                    lst.append(tuple(sorted(parts)))
                pairs = tuple(sorted(set(lst)))
        op: Any = "identity"
        if "operator" in d:
            on = d["operator"]
            if isinstance(on, yaml.ScalarNode):
                op = _str(on, source, OPERATORS)
            else:
                rows = []
                for r in _seq(on, source):
                    rows.append(tuple(_num(x, source) for x in _seq(r, source)))
                n = len(rows)
                if any(len(r) != n for r in rows):
                    raise _err(source, on, "operator matrix must be square")
                if any(rows[i][j] != rows[j][i] for i in range(n) for j in range(n)):
                    raise _err(source, on, "operator matrix must be symmetric")
                op = tuple(rows)
        try:
            st = Structure(
                form=form,
                strength=_num(d["strength"], source),
                pairs=pairs,
                range=_num(d["range"], source, positive=True) if "range" in d else None,
                eta=_num(d["eta"], source) if "eta" in d else None,
                operator=op,
                mass_factor=_str(d["mass_factor"], source, ("none", "inverse_product")) if "mass_factor" in d else "none",
            )
            st.form_factor()
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise _err(source, snode, str(exc)) from None
        structures.append(st)
    es = _int(top["exchange_sign"], source) if "exchange_sign" in top else 1
    if es not in (1, -1):
        raise _err(source, top["exchange_sign"], "exchange_sign must be 1 or -1")
    return PotentialModel(
        name=_str(top["name"], source) if "name" in top else Path(source).stem,
        kinematics=_str(top["kinematics"], source, KINEMATICS),
        particles=particles,
        structures=tuple(structures),
        reference_mass=_num(top["reference_mass"], source, positive=True) if "reference_mass" in top else 1.0,
        exchange_sign=es,
        three_body_constant=_num(top["three_body_constant"], source) if "three_body_constant" in top else 0.0,
        note=_str(top["note"], source) if "note" in top else "",
    )


def parse_run(text: str, source: str = "<run>") -> RunSpec:
    root = _compose(text, source)
    if root is None:
        raise ConfigError(f"{source}: empty run file")
    names = [f.name for f in fields(RunSpec)]
    top = _mapping(root, source, names)
    kw: dict[str, Any] = {}
    for key, node in top.items():
        if key == "particles":
            items = [_str(x, source) for x in _seq(node, source)]
            if len(items) != 3:
                raise _err(source, node, "exactly three particles are required")
            kw[key] = tuple(items)
        elif key in ("L", "levels", "nq_opt", "nq"):
            kw[key] = _int(node, source)
        elif key == "parity":
            v = _int(node, source)
            if v not in (1, -1):
                raise _err(source, node, "parity must be 1 or -1")
            kw[key] = v
        elif key in ("spin", "isospin"):
            kw[key] = _half(node, source)
        elif key in ("mode", "symmetry", "output"):
            kw[key] = _str(node, source)
        elif key in ("b", "b_x", "b_y"):
            kw[key] = _num(node, source, positive=True)
        elif key == "ordering":
            v = [_int(x, source) for x in _seq(node, source)]
            if sorted(v) != [0, 1, 2]:
                raise _err(source, node, "ordering must be a permutation of 0, 1, 2")
            kw[key] = tuple(v)
        elif key in ("bounds", "start"):
            v = tuple(_num(x, source, positive=True) for x in _seq(node, source))
            if key == "bounds" and (len(v) != 2 or v[0] >= v[1]):
                raise _err(source, node, "bounds must be [low, high] with low < high")
            kw[key] = v
        elif key == "grid":
            pts = []
            for x in _seq(node, source):
                if isinstance(x, yaml.SequenceNode):
                    pts.append(tuple(_num(y, source, positive=True) for y in _seq(x, source)))
                else:
                    pts.append(_num(x, source, positive=True))
            kw[key] = tuple(pts)
        elif key in ("nq_list", "L_values"):
            kw[key] = tuple(_int(x, source) for x in _seq(node, source))
    try:
        return RunSpec(**kw)
    except ConfigError as exc:
        raise ConfigError(f"{source}:{_line(root)}: {exc}") from None


def load_model(path) -> PotentialModel:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_model(text, str(p))


def load_run(path) -> RunSpec:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_run(text, str(p))


def _clean(d: dict) -> dict:
    return {k: v for k, v in d.items() if v is not None}


def dump_model(model: PotentialModel) -> str:
    structs = []
    for s in model.structures:
        d = {
            "pairs": "all" if s.pairs == "all" else [f"{a}-{b}" for a, b in s.pairs],
            "form": s.form,
            "strength": s.strength,
            "range": s.range,
            "eta": s.eta,
            "operator": s.operator if isinstance(s.operator, str) else [list(r) for r in s.operator],
            "mass_factor": s.mass_factor,
        }
        structs.append(_clean(d))
    doc = {
        "name": model.name,
        "kinematics": model.kinematics,
        "reference_mass": model.reference_mass,
        "exchange_sign": model.exchange_sign,
        "three_body_constant": model.three_body_constant,
        "note": model.note,
        "particles": {k: asdict(p) for k, p in model.particles.items()},
        "structures": structs,
    }
    return yaml.safe_dump(doc, sort_keys=False)


def dump_run(run: RunSpec) -> str:
    d = {}
    for f in fields(RunSpec):
        v = getattr(run, f.name)
        if v is None or v == ():
            continue
        if isinstance(v, tuple):
            v = [list(x) if isinstance(x, tuple) else x for x in v]
        d[f.name] = v
    return yaml.safe_dump(d, sort_keys=False)
