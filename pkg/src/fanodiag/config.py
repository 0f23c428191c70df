"""Experiment configuration files.

The format is INI (``configparser``) with one value per key and no
interpolation.  Every physical quantity carries its unit after the number::

    [units]
    omega_ref = 1.5 eV

    [grid]
    x_min = -10 L_ref
    x_max = 10 L_ref
    n_points = 401

    [layer core]
    x_min = -2 L_ref
    x_max = 2 L_ref
    rho = 1 internal
    omega0 = 1.3 w_ref
    omega_p = 1 w_ref
    gamma = 0.2 w_ref

Nodes outside every layer are vacuum.  ``rho`` and ``v_peak`` only accept
the ``internal`` unit.  See ``configs/`` for complete examples.
"""

import configparser
import csv
import hashlib
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import units
from .errors import ConfigError
from .material import (BathModel, FrequencyMesh, Grid1D, MaterialProfile,
                       sine_band_coupling)

PIPELINES = ("chi", "green", "modes", "verify", "correlate", "oracle")
BATH_KINDS = ("none", "drude_lorentz", "sine_band", "tabulated")

DEFAULT_TOLERANCES = {
    "chi_closed_form": 1e-12,
    "kramers_kronig": 1e-3,
    "coupling_roundtrip": 1e-6,
    "reciprocity": 1e-10,
    "green_identity": 1e-6,
    "surface_flux": 1e-8,
    "exact": 1e-13,
    "quadrature": 1e-6,
    "stencil": 1e-6,
    "commutator": 1e-6,
    "route": 1e-10,
    "correlation_routes": 1e-6,
    "hermiticity": 1e-12,
    "oracle_response": 1e-2,
    "oracle_vacuum": 5e-2,
    "symplectic": 1e-9,
}

_NUMBER_UNIT = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s+(\S+)\s*$")


@dataclass
class Diagnostic:
    """One validation finding; ``level`` is "error" or "warning"."""

    level: str
    field: str
    message: str
    line: int = None
    column: int = None

    def to_dict(self):
        return asdict(self)


@dataclass
class LayerSpec:
    name: str
    x_min: float
    x_max: float
    rho: float
    omega0: float
    omega_p: float
    gamma: float = None
    v_peak: float = None


@dataclass
class ExperimentConfig:
    """Parsed and unit-converted experiment description (internal units)."""

    path: Path
    sha256: str
    omega_ref_si: float
    grid: Grid1D
    mesh: FrequencyMesh
    layers: list
    bath_kind: str
    bath_options: dict
    pipelines: list
    options: dict
    output_dir: str = None
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    def build_profile(self, grid=None):
        """MaterialProfile on ``grid`` (default: the configured grid).

        alpha = omega_p sqrt(eps0 rho) in every layer; other nodes are vacuum.
        """
        grid = self.grid if grid is None else grid
        x = grid.x
        rho = np.ones(x.size)
        w0 = np.zeros(x.size)
        wp = np.zeros(x.size)
        for mask, layer in zip(self.layer_masks(grid), self.layers):
            rho[mask], w0[mask], wp[mask] = layer.rho, layer.omega0, layer.omega_p
        return MaterialProfile(grid, rho, w0, wp * np.sqrt(units.EPS0 * rho))

    def layer_masks(self, grid=None):
        """Node membership per layer; intervals are half-open except at the grid end."""
        grid = self.grid if grid is None else grid
        x = grid.x
        tol = 1e-9 * grid.h
        out = []
        for layer in self.layers:
            m = (x >= layer.x_min - tol) & (x < layer.x_max - tol)
            if abs(layer.x_max - x[-1]) <= tol:
                m[-1] = True
            out.append(m)
        return out

    def segments(self):
        """Piecewise-constant pieces covering the grid: (x_lo, x_hi, layer or None)."""
        out = []
        pos = self.grid.x_min
        for layer in self.layers:
            if layer.x_min > pos:
                out.append((pos, layer.x_min, None))
            out.append((layer.x_min, layer.x_max, layer))
            pos = layer.x_max
        if pos < self.grid.x_max:
            out.append((pos, self.grid.x_max, None))
        return out

    def build_bath(self, profile, mesh=None, flat_preset=False):
        """Bath on ``profile.grid`` and ``mesh`` (default: configured mesh).

        ``flat_preset`` turns the Ohmic preset into a tabulated flat spectrum
        on ``mesh`` (a band-limited bath, as needed by a finite oscillator set).
        """
        mesh = self.mesh if mesh is None else mesh
        grid = profile.grid
        masks = self.layer_masks(grid)
        if self.bath_kind == "drude_lorentz":
            gam = np.zeros(grid.n_points)
            for mask, layer in zip(masks, self.layers):
                gam[mask] = layer.gamma
            bath = BathModel.drude_lorentz(profile.plasma_frequency, gam)
            if flat_preset:
                v = bath.preset_coupling(profile)
                return BathModel.tabulated(mesh, np.repeat(v[:, None], mesh.size, axis=1))
            return bath
        if self.bath_kind == "none":
            return BathModel.none(grid, mesh)
        v = np.zeros((grid.n_points, mesh.size))
        if self.bath_kind == "sine_band":
            for mask, layer in zip(masks, self.layers):
                v[mask] = sine_band_coupling(mesh, layer.v_peak, self.bath_options["omega_cut"])
        else:
            # tabulated: one column per layer on its own frequency nodes
            om, cols = read_bath_table(self.bath_options["file"])
            for mask, layer in zip(masks, self.layers):
                row = np.interp(mesh.omega, om, cols[layer.name], left=0.0, right=0.0)
                v[mask] = (layer.v_peak if layer.v_peak is not None else 1.0) * row
        v[profile.vacuum] = 0.0
        return BathModel.tabulated(mesh, v)

    def tolerance(self, name):
        return self.tolerances[name]


def read_bath_table(path):
    """Tabulated coupling file: header ``omega,<layer>,...``; omega in w_ref."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = [h.strip() for h in rows[0]]
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    return data[:, 0], {name: data[:, i] for i, name in enumerate(header) if i > 0}


class _Reader:
    """Wraps a parsed file, collects diagnostics, tracks key line numbers."""

    def __init__(self, text, path):
        self.path = path
        self.diags = []
        self.lines = {}
        section = None
        for n, raw in enumerate(text.splitlines(), start=1):
            s = raw.strip()
            if s.startswith("[") and s.endswith("]"):
                section = s[1:-1].strip()
                self.lines[(section, None)] = (n, 1)
            elif section and s and s[0] not in "#;" and ("=" in s or ":" in s):
                key = re.split(r"[=:]", s, maxsplit=1)[0].strip().lower()
                col = raw.index("=") + 2 if "=" in raw else raw.index(":") + 2
                self.lines[(section, key)] = (n, col)
        self.cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
        self.cp.read_string(text, source=str(path))

    def where(self, section, key=None):
        return self.lines.get((section, key), self.lines.get((section, None), (None, None)))

    def error(self, section, key, message, level="error"):
        line, col = self.where(section, key)
        name = f"{section}.{key}" if key else section
        self.diags.append(Diagnostic(level, name, message, line, col))

    def raw(self, section, key, required=True):
        if not self.cp.has_option(section, key):
            if required:
                self.error(section, key, f"missing key {key!r}")
            return None
        return self.cp.get(section, key).strip()

    def quantity(self, section, key, kinds, omega_ref, required=True):
        """Parse ``<number> <unit>`` and convert to internal units."""
        text = self.raw(section, key, required)
        if text is None:
            return None
        m = _NUMBER_UNIT.match(text)
        if not m:
            self.error(section, key, f"expected '<number> <unit>', got {text!r}")
            return None
        value, unit = float(m.group(1)), m.group(2)
        kind = units.unit_kind(unit)
        if kind is None or kind not in kinds:
            self.error(section, key, f"unit {unit!r} not allowed here (expected {'/'.join(kinds)})")
            return None
        if unit not in ("w_ref", "L_ref", "t_ref", "internal") and omega_ref is None:
            self.error(section, key, f"absolute unit {unit!r} needs [units] omega_ref")
            return None
        return units.to_internal(value, unit, omega_ref)

    def quantity_list(self, section, key, kinds, omega_ref, required=True):
        text = self.raw(section, key, required)
        if text is None:
            return None
        out = []
        for i, item in enumerate(p for p in text.split(",") if p.strip()):
            tmp = f"__{key}_{i}"
            self.cp.set(section, tmp, item)
            self.lines[(section, tmp)] = self.where(section, key)
            out.append(self.quantity(section, tmp, kinds, omega_ref))
            self.cp.remove_option(section, tmp)
        if any(v is None for v in out):
            return None
        return out

    def integer(self, section, key, minimum=1, required=True, default=None):
        text = self.raw(section, key, required)
        if text is None:
            return default
        try:
            val = int(text)
        except ValueError:
            self.error(section, key, f"expected an integer, got {text!r}")
            return default
        if val < minimum:
            self.error(section, key, f"must be >= {minimum}")
        return val


def _parse_error_diag(exc, path):
    if isinstance(exc, configparser.MissingSectionHeaderError):
        return Diagnostic("error", "syntax", "key/value before the first [section]", exc.lineno, 1)
    if isinstance(exc, (configparser.DuplicateOptionError, configparser.DuplicateSectionError)):
        return Diagnostic("error", "syntax", str(exc).splitlines()[0], exc.lineno, 1)
    if isinstance(exc, configparser.ParsingError):
        line, text = exc.errors[0]
        col = len(text) - len(text.lstrip()) + 1
        return Diagnostic("error", "syntax", f"cannot parse line {text!r}", line, col)
    return Diagnostic("error", "syntax", str(exc), None, None)


def _freq_kinds():
    return ("frequency", "internal")


def _len_kinds():
    return ("length", "internal")


def parse_config(path, tol_overrides=None, pipelines=None):
    """Read and validate a config file.

    ``pipelines`` overrides the ``[pipelines] run`` list (single-pipeline
    shortcuts); option requirements are checked for whatever will run.

    Returns
    -------
    (ExperimentConfig or None, list of Diagnostic)
        The config is None when any diagnostic has level "error".
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        return None, [Diagnostic("error", "file", f"cannot read {path}: {exc.strerror}")]
    text = data.decode("utf-8")
    try:
        r = _Reader(text, path)
    except configparser.Error as exc:
        return None, [_parse_error_diag(exc, path)]
    cp = r.cp
    known = {"units", "grid", "mesh", "bath", "pipelines", "output", "tolerances"} | set(PIPELINES)
    for sec in cp.sections():
        if sec not in known and not sec.startswith("layer "):
            r.error(sec, None, "unknown section", level="warning")

    omega_ref = None
    if cp.has_section("units"):
        text_ref = r.raw("units", "omega_ref")
        if text_ref and text_ref != "internal":
            m = _NUMBER_UNIT.match(text_ref)
            try:
                omega_ref = units.reference_frequency_si(float(m.group(1)), m.group(2))
            except (AttributeError, ValueError) as exc:
                r.error("units", "omega_ref", f"invalid reference frequency: {exc}")
    else:
        r.error("units", None, "missing [units] section (use 'omega_ref = internal' for bare units)")

    grid = mesh = None
    if cp.has_section("grid"):
        a = r.quantity("grid", "x_min", _len_kinds(), omega_ref)
        b = r.quantity("grid", "x_max", _len_kinds(), omega_ref)
        n = r.integer("grid", "n_points", minimum=3)
        if None not in (a, b, n):
            if b <= a:
                r.error("grid", "x_max", "x_max must exceed x_min")
            else:
                grid = Grid1D(a, b, n)
    else:
        r.error("grid", None, "missing [grid] section")

    if cp.has_section("mesh"):
        a = r.quantity("mesh", "omega_min", _freq_kinds(), omega_ref)
        b = r.quantity("mesh", "omega_max", _freq_kinds(), omega_ref)
        n = r.integer("mesh", "n_points", minimum=3)
        if None not in (a, b, n):
            if a <= 0 or b <= a:
                r.error("mesh", "omega_min", "need 0 < omega_min < omega_max")
            else:
                mesh = FrequencyMesh.uniform(a, b, n)
    else:
        r.error("mesh", None, "missing [mesh] section")

    bath_kind = "none"
    bath_options = {}
    if cp.has_section("bath"):
        bath_kind = r.raw("bath", "kind") or "none"
        if bath_kind not in BATH_KINDS:
            r.error("bath", "kind", f"unknown bath kind {bath_kind!r} (one of {', '.join(BATH_KINDS)})")
        if bath_kind == "sine_band":
            bath_options["omega_cut"] = r.quantity("bath", "omega_cut", _freq_kinds(), omega_ref)
        if bath_kind == "tabulated":
            fname = r.raw("bath", "file")
            if fname is not None:
                fpath = (path.parent / fname).resolve()
                if not fpath.is_file():
                    r.error("bath", "file", f"referenced file {fname!r} does not exist")
                else:
                    bath_options["file"] = str(fpath)

    layers = []
    for sec in cp.sections():
        if not sec.startswith("layer "):
            continue
        name = sec[len("layer "):].strip()
        lo = r.quantity(sec, "x_min", _len_kinds(), omega_ref)
        hi = r.quantity(sec, "x_max", _len_kinds(), omega_ref)
        rho = r.quantity(sec, "rho", ("internal",), omega_ref)
        w0 = r.quantity(sec, "omega0", _freq_kinds(), omega_ref)
        wp = r.quantity(sec, "omega_p", _freq_kinds(), omega_ref)
        gam = r.quantity(sec, "gamma", _freq_kinds(), omega_ref, required=bath_kind == "drude_lorentz")
        vpk = r.quantity(sec, "v_peak", ("internal",), omega_ref, required=bath_kind == "sine_band")
        if rho is not None and rho <= 0:
            r.error(sec, "rho", f"rho must be positive, got {rho:g}")
        if w0 is not None and w0 < 0:
            r.error(sec, "omega0", "omega0 must be >= 0")
        if wp is not None and wp < 0:
            r.error(sec, "omega_p", "omega_p must be >= 0")
        if gam is not None and bath_kind == "drude_lorentz" and gam <= 0 and (wp or 0) > 0:
            r.error(sec, "gamma", "drude_lorentz bath needs gamma > 0")
        if vpk is not None and vpk < 0:
            r.error(sec, "v_peak", "v_peak must be >= 0")
        if lo is not None and hi is not None and hi <= lo:
            r.error(sec, "x_max", "layer x_max must exceed x_min")
        if None in (lo, hi, rho, w0, wp):
            continue
        layers.append(LayerSpec(name, lo, hi, rho, w0, wp, gam, vpk))
        if grid is not None:
            tol = 1e-9 * grid.h
            if lo < grid.x_min - tol or hi > grid.x_max + tol:
                r.error(sec, "x_min", f"layer [{lo:g}, {hi:g}] extends beyond the grid "
                                      f"[{grid.x_min:g}, {grid.x_max:g}]")
    if not layers and not any(d.level == "error" for d in r.diags):
        r.error("layer", None, "no [layer <name>] sections defined")
    order = sorted(layers, key=lambda l: l.x_min)
    for a, b in zip(order, order[1:]):
        if b.x_min < a.x_max - 1e-12 * max(1.0, abs(a.x_max)):
            r.error(f"layer {b.name}", "x_min",
                    f"layer {b.name!r} overlaps layer {a.name!r} on [{b.x_min:g}, {min(a.x_max, b.x_max):g}]")
    layers = order

    if bath_kind == "tabulated" and "file" in bath_options and mesh is not None:
        try:
            om, cols = read_bath_table(bath_options["file"])
        except (OSError, ValueError, IndexError) as exc:
            r.error("bath", "file", f"cannot read bath table: {exc}")
        else:
            for layer in layers:
                if layer.name not in cols:
                    r.error("bath", "file", f"bath table has no column for layer {layer.name!r}")
            if om.size < 2 or np.any(np.diff(om) <= 0):
                r.error("bath", "file", "bath table omega column must be strictly increasing")
            elif np.max(np.diff(om)) > mesh.spacing * (1 + 1e-9):
                r.error("bath", "file",
                        f"bath tabulated with spacing {np.max(np.diff(om)):.3g} coarser than the "
                        f"requested mesh spacing {mesh.spacing:.3g}; values will be interpolated",
                        level="warning")
            if any(np.any(c < 0) for c in cols.values()):
                r.error("bath", "file", "bath coupling must be >= 0")

    requested = pipelines
    pipelines = []
    if cp.has_section("pipelines"):
        text_p = r.raw("pipelines", "run")
        for p in (t.strip() for t in (text_p or "").split(",") if t.strip()):
            if p not in PIPELINES:
                r.error("pipelines", "run", f"unknown pipeline {p!r} (one of {', '.join(PIPELINES)})")
            else:
                pipelines.append(p)
    if requested is not None:
        pipelines = list(requested)
    elif not pipelines:
        r.error("pipelines", "run", "no pipelines requested")
    options = {p: _pipeline_options(r, p, omega_ref, grid) for p in PIPELINES}
    _check_requirements(r, pipelines, options, mesh)

    tolerances = dict(DEFAULT_TOLERANCES)
    if cp.has_section("tolerances"):
        for key in cp.options("tolerances"):
            _set_tolerance(tolerances, key, cp.get("tolerances", key), r.diags, r.where("tolerances", key))
    for item in tol_overrides or ():
        if "=" not in item:
            r.diags.append(Diagnostic("error", "--tol-override", f"expected name=value, got {item!r}"))
            continue
        key, val = item.split("=", 1)
        _set_tolerance(tolerances, key.strip(), val, r.diags, (None, None))

    output_dir = cp.get("output", "dir", fallback=None) if cp.has_section("output") else None

    if any(d.level == "error" for d in r.diags):
        return None, r.diags
    cfg = ExperimentConfig(path, hashlib.sha256(data).hexdigest(), omega_ref, grid, mesh, layers,
                           bath_kind, bath_options, pipelines, options, output_dir, tolerances)
    return cfg, r.diags


def _check_requirements(r, pipelines, options, mesh):
    for p in ("green", "modes"):
        if p in pipelines and not options[p]["omega"]:
            r.error(p, "omega", f"pipeline {p!r} needs at least one frequency")
    if "verify" in pipelines:
        om = options["verify"]["omega"] or []
        if mesh is not None and len({mesh.index_nearest(w) for w in om}) < 2:
            r.error("verify", "omega", "verify needs two frequencies on distinct mesh nodes")
    if "oracle" in pipelines:
        o = options["oracle"]
        if o["boundary"] not in ("dirichlet", "periodic"):
            r.error("oracle", "boundary", "boundary must be 'dirichlet' or 'periodic'")
        if not o["drive_omega"] and not o["modes"]:
            r.error("oracle", "drive_omega", "oracle has nothing to do: no drive_omega and modes = no")
    if "correlate" in pipelines:
        c = options["correlate"]
        if (c["window_min"] is None) != (c["window_max"] is None):
            r.error("correlate", "window_min", "give both window_min and window_max or neither")


def _set_tolerance(tolerances, key, value, diags, where):
    name = f"tolerances.{key}"
    if key not in DEFAULT_TOLERANCES:
        diags.append(Diagnostic("error", name, f"unknown tolerance {key!r}", *where))
        return
    try:
        val = float(value)
    except ValueError:
        diags.append(Diagnostic("error", name, f"expected a number, got {value!r}", *where))
        return
    if not val > 0:
        diags.append(Diagnostic("error", name, "tolerances must be positive", *where))
        return
    tolerances[key] = val


def _pipeline_options(r, name, omega_ref, grid):
    """Per-pipeline options with defaults; unit-bearing values converted."""
    cp = r.cp
    has = cp.has_section(name)

    def q(key, kinds, default=None):
        if has and cp.has_option(name, key):
            return r.quantity(name, key, kinds, omega_ref)
        return default

    def ql(key, kinds, default=None):
        if has and cp.has_option(name, key):
            return r.quantity_list(name, key, kinds, omega_ref)
        return default

    def s(key, default):
        return cp.get(name, key).strip() if has and cp.has_option(name, key) else default

    def i(key, default, minimum=1):
        if has and cp.has_option(name, key):
            return r.integer(name, key, minimum=minimum)
        return default

    if name == "chi":
        return {"kk_points": ql("kk_points", _len_kinds(), [])}
    if name == "green":
        solver = s("solver", "fd")
        if solver not in ("fd", "transfer_matrix"):
            r.error(name, "solver", "solver must be 'fd' or 'transfer_matrix'")
        return {"omega": ql("omega", _freq_kinds(), []), "solver": solver,
                "dump": s("dump", "yes") in ("yes", "true", "1")}
    if name == "modes":
        return {"omega": ql("omega", _freq_kinds(), []),
                "kernels": [k.strip() for k in s("kernels", "fE,fA,fPi,fX,fP").split(",") if k.strip()]}
    if name == "verify":
        return {"omega": ql("omega", _freq_kinds(), []),
                "region_min": q("region_min", _len_kinds()), "region_max": q("region_max", _len_kinds())}
    if name == "correlate":
        return {"points": ql("points", _len_kinds(), []), "tau": ql("tau", ("time", "internal"), [0.0]),
                "window_min": q("window_min", _freq_kinds()), "window_max": q("window_max", _freq_kinds()),
                "window_width": q("window_width", _freq_kinds())}
    if name == "oracle":
        return {"n_points": i("n_points", 80, minimum=3), "n_bath": i("n_bath", 40),
                "boundary": s("boundary", "dirichlet"), "bath_max": q("bath_max", _freq_kinds()),
                "drive_omega": ql("drive_omega", _freq_kinds(), []), "eta": q("eta", _freq_kinds()),
                "drive_x": q("drive_x", _len_kinds(), 0.0), "compare_region": q("compare_region", _len_kinds()),
                "modes": s("modes", "yes") in ("yes", "true", "1"),
                "vacuum_cutoff": q("vacuum_cutoff", _freq_kinds()),
                "vacuum_width": q("vacuum_width", _freq_kinds()),
                "dimension_cap": i("dimension_cap", 25_000)}
    return {}


def load_config(path, tol_overrides=None, pipelines=None):
    """parse_config that raises ConfigError on any error diagnostic."""
    cfg, diags = parse_config(path, tol_overrides, pipelines)
    if cfg is None:
        errors = [d for d in diags if d.level == "error"]
        raise ConfigError(f"{len(errors)} configuration error(s); first: "
                          f"{errors[0].field}: {errors[0].message}", diags)
    return cfg, diags
