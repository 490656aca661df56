"""Scenario files: a versioned YAML tree describing one experiment.

Schema (version 1)::

    schema_version: 1
    name: reference_1d
    domain:    {dim: 1, outer: [0, 1], inner: [0.25, 0.75], resolution: 200}
    material:  {family: identity-scaled, c: 1.0, h: 1.0}
               # affine:       {family: affine, c0: [[1,0],[0,1]], grad: [[[..]]], h: 1.0}
               # checkerboard: {family: checkerboard, c1: 1.0, c2: 2.0, h: 1.0}
    observer:  [0.5]
    regions:   {thickness1: 0.125, thickness2: 0.125}
    time:      {T: auto, factor: 1.2, dt: "cfl:0.5"}     # T may be a number, dt a number
    initial_data: {family: low-modes, modes: 4, seed: 7}
               # standing-wave: {family: standing-wave, mode: 1, amplitude: 1.0}
               # zero:          {family: zero}
    run:       {pipeline: hum, tol: 1.0e-8, max_iter: 200, filter_modes: null,
                ensemble_size: 32, ensemble_modes: 8, field: RadialM,
                quantity: energy_drift, levels: 3, budget_seconds: 600,
                threads: 1, output: out}

Boxes are ``[lo, hi]`` in 1D and ``[[lo0, hi0], [lo1, hi1]]`` in 2D.
An omitted ``run.filter_modes`` means no filter in 1D and 32 modes in 2D.
"""

from __future__ import annotations

import copy
import re
from dataclasses import asdict, dataclass, field

import yaml

from .errors import ConfigError

class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads exponent floats without a dot or sign (``1e6``, ``1.0e6``)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.X,
    ),
    list("-+0123456789."),
)

SCHEMA_VERSION = 1
PIPELINES = ("simulate", "multiplier-check", "observability", "time-budget", "hum", "oracle")
FAMILIES = ("identity-scaled", "affine", "checkerboard")
DATA_FAMILIES = ("low-modes", "standing-wave", "zero")
DEFAULT_FILTER_MODES_2D = 32


@dataclass
class DomainSpec:
    dim: int
    outer: list
    inner: list
    resolution: int


@dataclass
class MaterialSpec:
    family: str = "identity-scaled"
    params: dict = field(default_factory=lambda: {"c": 1.0})
    h: float = 1.0


@dataclass
class RegionSpec:
    thickness1: float
    thickness2: float


@dataclass
class TimeSpec:
    T: object = "auto"
    factor: float = 1.2
    dt: object = "cfl:0.5"

    def cfl(self):
        if isinstance(self.dt, str):
            return float(self.dt.split(":", 1)[1])
        return None


@dataclass
class DataSpec:
    family: str = "low-modes"
    modes: int = 4
    seed: int = 7
    mode: int = 1
    amplitude: float = 1.0


@dataclass
class RunSpec:
    pipeline: str = "simulate"
    tol: float = 1e-8
    max_iter: int = 200
    filter_modes: int | None = None
    ensemble_size: int = 32
    ensemble_modes: int = 8
    field: str = "RadialM"
    quantity: str = "energy_drift"
    levels: int = 3
    budget_seconds: float = 600.0
    threads: int = 1
    output: str = "out"


@dataclass
class Scenario:
    name: str
    domain: DomainSpec
    material: MaterialSpec
    observer: list
    regions: RegionSpec
    time: TimeSpec = field(default_factory=TimeSpec)
    initial_data: DataSpec = field(default_factory=DataSpec)
    run: RunSpec = field(default_factory=RunSpec)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self):
        d = asdict(self)
        mat = d.pop("material")
        d["material"] = {"family": mat["family"], **mat["params"], "h": mat["h"]}
        order = ["schema_version", "name", "domain", "material", "observer", "regions", "time", "initial_data", "run"]
        return {k: d[k] for k in order}

    def dumps(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    def with_resolution(self, resolution):
        s = copy.deepcopy(self)
        s.domain.resolution = int(resolution)
        return s


# --- parsing ---------------------------------------------------------------------


class _Lines:
    """Dotted path -> line number (1-based) from the YAML node tree."""

    def __init__(self, text):
        self.map = {}
        try:
            node = yaml.compose(text, Loader=_Loader)
        except yaml.YAMLError:
            node = None
        if node is not None:
            self._walk(node, "")

    def _walk(self, node, path):
        self.map[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = f"{path}.{k.value}" if path else str(k.value)
                self.map[key] = k.start_mark.line + 1
                if isinstance(v, (yaml.MappingNode, yaml.SequenceNode)):
                    self._walk(v, key)
                    self.map[key] = k.start_mark.line + 1

    def line(self, path):
        while path:
            if path in self.map:
                return self.map[path]
            path = path.rpartition(".")[0]
        return self.map.get("")


def _need(tree, key, path, lines, kind=None):
    if not isinstance(tree, dict) or key not in tree:
        full = f"{path}.{key}" if path else key
        raise ConfigError(f"missing required key '{key}'", field=full, line=lines.line(path))
    value = tree[key]
    if kind is not None and not isinstance(value, kind):
        full = f"{path}.{key}" if path else key
        raise ConfigError(f"expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}", field=full, line=lines.line(full))
    return value


def _num(value, path, lines, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", field=path, line=lines.line(path))
    if positive and value <= 0:
        raise ConfigError(f"must be positive, got {value!r}", field=path, line=lines.line(path))
    return value


def _box(value, dim, path, lines):
    ok = False
    if dim == 1 and isinstance(value, list) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value):
        ok = True
    if dim == 2 and isinstance(value, list) and len(value) == 2:
        ok = all(isinstance(r, list) and len(r) == 2 and all(isinstance(v, (int, float)) for v in r) for r in value)
    if not ok:
        raise ConfigError(f"expected a {dim}D box, got {value!r}", field=path, line=lines.line(path))
    return value


def _known(tree, allowed, path, lines):
    for k in tree:
        if k not in allowed:
            full = f"{path}.{k}" if path else str(k)
            raise ConfigError(f"unknown key '{k}'", field=full, line=lines.line(full))


def parse_scenario(tree, text=""):
    lines = _Lines(text)
    if not isinstance(tree, dict):
        raise ConfigError("scenario must be a mapping", line=1)
    _known(tree, {"schema_version", "name", "domain", "material", "observer", "regions", "time", "initial_data", "run"}, "", lines)
    version = tree.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}", field="schema_version", line=lines.line("schema_version"))

    dom = _need(tree, "domain", "", lines, dict)
    _known(dom, {"dim", "outer", "inner", "resolution"}, "domain", lines)
    dim = _need(dom, "dim", "domain", lines, int)
    if dim not in (1, 2):
        raise ConfigError(f"dim must be 1 or 2, got {dim}", field="domain.dim", line=lines.line("domain.dim"))
    outer = _box(_need(dom, "outer", "domain", lines), dim, "domain.outer", lines)
    inner = _box(_need(dom, "inner", "domain", lines), dim, "domain.inner", lines)
    res = _need(dom, "resolution", "domain", lines, int)
    domain = DomainSpec(dim, outer, inner, res)

    mat = _need(tree, "material", "", lines, dict)
    family = mat.get("family", "identity-scaled")
    if family not in FAMILIES:
        raise ConfigError(f"unknown material family {family!r}", field="material.family", line=lines.line("material.family"))
    allowed = {"identity-scaled": {"c"}, "affine": {"c0", "grad"}, "checkerboard": {"c1", "c2"}}[family]
    _known(mat, allowed | {"family", "h"}, "material", lines)
    params = {k: mat[k] for k in allowed if k in mat}
    if family == "identity-scaled":
        params.setdefault("c", 1.0)
        _num(params["c"], "material.c", lines, positive=False)
    elif family == "checkerboard":
        for k in ("c1", "c2"):
            _num(_need(mat, k, "material", lines), f"material.{k}", lines)
    else:
        _need(mat, "c0", "material", lines, list)
        _need(mat, "grad", "material", lines, list)
    h = _num(mat.get("h", 1.0), "material.h", lines)
    material = MaterialSpec(family, params, h)

    observer = _need(tree, "observer", "", lines, list)
    if len(observer) != dim:
        raise ConfigError(f"observer needs {dim} coordinates", field="observer", line=lines.line("observer"))
    for i, v in enumerate(observer):
        _num(v, "observer", lines)

    reg = _need(tree, "regions", "", lines, dict)
    _known(reg, {"thickness1", "thickness2"}, "regions", lines)
    regions = RegionSpec(
        _num(_need(reg, "thickness1", "regions", lines), "regions.thickness1", lines, positive=True),
        _num(_need(reg, "thickness2", "regions", lines), "regions.thickness2", lines, positive=True),
    )

    t = tree.get("time", {}) or {}
    _known(t, {"T", "factor", "dt"}, "time", lines)
    time = TimeSpec(**t)
    if time.T != "auto":
        _num(time.T, "time.T", lines, positive=True)
    _num(time.factor, "time.factor", lines, positive=True)
    if isinstance(time.dt, str):
        head, _, tail = time.dt.partition(":")
        try:
            ok = head == "cfl" and 0 < float(tail) <= 0.9
        except ValueError:
            ok = False
        if not ok:
            raise ConfigError(f"dt must be a number or 'cfl:<factor in (0, 0.9]>', got {time.dt!r}", field="time.dt", line=lines.line("time.dt"))
    else:
        _num(time.dt, "time.dt", lines, positive=True)

    dd = tree.get("initial_data", {}) or {}
    _known(dd, {"family", "modes", "seed", "mode", "amplitude"}, "initial_data", lines)
    data = DataSpec(**dd)
    if data.family not in DATA_FAMILIES:
        raise ConfigError(f"unknown initial-data family {data.family!r}", field="initial_data.family", line=lines.line("initial_data.family"))

    rr = tree.get("run", {}) or {}
    _known(rr, set(RunSpec.__dataclass_fields__), "run", lines)
    run = RunSpec(**rr)
    if "filter_modes" not in rr and dim == 2:
        run.filter_modes = DEFAULT_FILTER_MODES_2D  # explicit null switches the filter off
    if run.pipeline not in PIPELINES:
        raise ConfigError(f"unknown pipeline {run.pipeline!r}", field="run.pipeline", line=lines.line("run.pipeline"))
    return Scenario(
        name=str(tree.get("name", "scenario")),
        domain=domain,
        material=material,
        observer=list(observer),
        regions=regions,
        time=time,
        initial_data=data,
        run=run,
        schema_version=version,
    )


def loads_scenario(text):
    try:
        tree = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {exc}", line=None if mark is None else mark.line + 1) from exc
    return parse_scenario(tree, text)


def load_scenario(path):
    with open(path, encoding="utf-8") as fh:
        return loads_scenario(fh.read())
