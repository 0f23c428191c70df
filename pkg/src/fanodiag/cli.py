"""Command-line front end.

    fanodiag run       --config exp.ini [--out DIR] [--tol-override name=value] [--threads N]
    fanodiag validate  --config exp.ini
    fanodiag chi|green|modes|verify|correlate|oracle --config exp.ini ...

Outputs go to ``--out``, else to ``$FANODIAG_OUT/<name>`` (default root
``./fanodiag_out``), where ``<name>`` is ``[output] dir`` or the config file
stem.  Every run writes ``report.json``; wall-clock data and the timestamp
sit in its ``header`` block only, so two runs of the same config produce
identical files apart from that block.

Exit codes: 0 success, 1 pipeline failure, 2 invalid configuration,
3 numerical singularity, 4 a residual above its tolerance.
"""

import argparse
import datetime
import json
import os
import sys
import time
import traceback
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import erfc

from . import crosscheck
from .config import PIPELINES, load_config, parse_config
from .errors import (ConfigError, LosslessPointError, SingularityError,
                     StabilityError)
from .fields import (equal_time_commutator_residual, green_sweep,
                     hermiticity_residual, kernel_route_residual,
                     positivity_residual, vacuum_correlation_E)
from .greenfn import (DielectricResponse, green_fd, green_identity_residual,
                      green_multilayer)
from .io import OutputDir, dumps
from .material import (FrequencyMesh, Grid1D, compute_chi,
                       kramers_kronig_residual, lorentz_chi, recover_coupling)
from .modes import (build_mode_set, cc_commutator_residual,
                    commutation_residual, eigen_residuals,
                    structural_residuals)
from .oracle import (assemble_hamiltonian, classical_response, normal_modes,
                     smoothed_vacuum_correlation)

SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_SINGULAR, EXIT_TOLERANCE = 0, 1, 2, 3, 4
ENV_OUT = "FANODIAG_OUT"
# eigendecompositions beyond this phase-space size are skipped by the oracle pipeline
ORACLE_EIG_CAP = 8000
KERNEL_NAMES = ("fE", "fA", "fPi", "fX", "fP", "fY_delta", "fQ_delta")


@dataclass
class Check:
    """One residual against its tolerance; non-gating checks are reported only."""

    name: str
    value: float
    tolerance: float
    gate: bool = True
    note: str = None

    @property
    def passed(self):
        return bool(np.isfinite(self.value) and self.value <= self.tolerance)

    def to_dict(self):
        d = {"name": self.name, "value": self.value, "tolerance": self.tolerance,
             "pass": self.passed, "gate": self.gate}
        if self.note:
            d["note"] = self.note
        return d


@dataclass
class PipelineResult:
    name: str
    status: str = "pending"
    checks: list = field(default_factory=list)
    info: dict = field(default_factory=dict)
    error: dict = None
    wall_time: float = 0.0

    def to_dict(self):
        return {"name": self.name, "status": self.status,
                "checks": [c.to_dict() for c in self.checks],
                "info": self.info, "error": self.error}


@dataclass
class RunReport:
    """Outcome of one run.  ``to_dict`` keeps wall-clock data in ``header``."""

    config_path: str
    config_sha256: str
    pipelines: list
    files: list
    started: str = ""
    wall_time: float = 0.0

    @property
    def exit_code(self):
        status = {p.status for p in self.pipelines}
        if "singular" in status:
            return EXIT_SINGULAR
        if "failed" in status:
            return EXIT_FAILURE
        if "tolerance_exceeded" in status:
            return EXIT_TOLERANCE
        return EXIT_OK

    def residual_table(self):
        return [dict(c.to_dict(), pipeline=p.name) for p in self.pipelines for c in p.checks]

    def to_dict(self):
        return {
            "header": {"generated_at": self.started, "wall_time_s": self.wall_time,
                       "pipeline_wall_time_s": {p.name: p.wall_time for p in self.pipelines}},
            "schema_version": SCHEMA_VERSION,
            "config": {"path": Path(self.config_path).name, "sha256": self.config_sha256},
            "pipelines": [p.to_dict() for p in self.pipelines],
            "residuals": self.residual_table(),
            "exit_code": self.exit_code,
            "manifest": self.files,
        }


class _Context:
    """Shared lazily computed state of one run."""

    def __init__(self, cfg, out, threads):
        self.cfg = cfg
        self.out = out
        self.threads = threads
        self.profile = cfg.build_profile()
        self.bath = cfg.build_bath(self.profile)
        self._table = None
        self._mode_sets = {}

    @property
    def grid(self):
        return self.cfg.grid

    @property
    def mesh(self):
        return self.cfg.mesh

    @property
    def table(self):
        if self._table is None:
            self._table = compute_chi(self.profile, self.bath, self.mesh)
        return self._table

    def tol(self, name):
        return self.cfg.tolerances[name]

    def region(self):
        """Nodes used for identity checks: [verify] region_min/max, else the inner 60%."""
        o = self.cfg.options["verify"]
        x = self.grid.x
        lo, hi = o["region_min"], o["region_max"]
        if lo is None or hi is None:
            span = x[-1] - x[0]
            lo, hi = x[0] + 0.2 * span, x[-1] - 0.2 * span
        return np.flatnonzero((x >= lo - 1e-12) & (x <= hi + 1e-12))

    def chi_at(self, omega):
        return compute_chi(self.profile, self.bath, self.mesh, [omega]).chi[:, 0]

    def stack_for(self, grid, chi_col):
        """Layer stack whose region permittivities are read off ``chi_col``."""
        segs = self.cfg.segments()
        eps = []
        for lo, hi, layer in segs:
            if layer is None:
                eps.append(1.0)
            else:
                i = int(np.argmin(np.abs(grid.x - 0.5 * (lo + hi))))
                eps.append(1.0 + chi_col[i])
        return crosscheck.stack_from_segments([(a, b) for a, b, _ in segs], eps, segs[0][0])

    def mode_set(self, j):
        """Mode set at mesh node ``j`` (cached; shared by modes and verify)."""
        if j not in self._mode_sets:
            w = float(self.mesh.omega[j])
            chi = self.table.chi[:, j]
            G = green_fd(DielectricResponse(self.grid, w, 1.0 + chi))
            self._mode_sets[j] = (G, build_mode_set(G, chi, self.bath, self.profile, self.mesh))
        return self._mode_sets[j]


def _meta(ctx, **extra):
    cfg = ctx.cfg
    base = {
        "units": {"system": "hbar = c = eps0 = mu0 = 1",
                  "omega_ref_rad_per_s": cfg.omega_ref_si,
                  "frequency": "omega_ref", "length": "c/omega_ref", "time": "1/omega_ref"},
        "grid": {"x_min": cfg.grid.x_min, "x_max": cfg.grid.x_max, "n_points": cfg.grid.n_points},
        "mesh": {"omega_min": float(cfg.mesh.omega[0]), "omega_max": float(cfg.mesh.omega[-1]),
                 "n_points": cfg.mesh.size},
        "bath": cfg.bath_kind,
        "config_sha256": cfg.sha256,
    }
    base.update(extra)
    return base


def _rel_max(a, b, mask=None):
    a, b = np.asarray(a), np.asarray(b)
    if mask is not None:
        a, b = a[mask], b[mask]
    scale = float(np.max(np.abs(b)))
    return float(np.max(np.abs(a - b))) / scale if scale > 0 else float(np.max(np.abs(a)))


# ---------------------------------------------------------------- pipelines

def pipeline_chi(ctx, res):
    table, prof, mesh = ctx.table, ctx.profile, ctx.mesh
    X, W = np.meshgrid(ctx.grid.x, mesh.omega, indexing="ij")
    ctx.out.write_csv("chi.csv", ["x", "omega", "re_chi", "im_chi"],
                      [X, W, table.chi.real, table.chi.imag],
                      _meta(ctx, provenance=table.provenance))
    material = prof.alpha > 0
    if ctx.cfg.bath_kind == "none":
        closed = lorentz_chi(prof, mesh.omega)
        res.checks.append(Check("chi_closed_form", _rel_max(table.chi, closed, material),
                                ctx.tol("chi_closed_form")))
        return
    for (lo, hi, layer) in ctx.cfg.segments():
        if layer is None or layer.omega_p == 0:
            continue
        i = int(np.argmin(np.abs(ctx.grid.x - 0.5 * (lo + hi))))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            kk = kramers_kronig_residual(table, i)
        if not kk.applicable:
            continue
        truncated = bool(caught)
        scale = float(np.max(np.abs(table.chi[i])))
        res.checks.append(Check(
            f"kramers_kronig[{layer.name}]", kk.residual / scale, ctx.tol("kramers_kronig"),
            gate=not truncated,
            note=f"tail bound {kk.tail_bound / scale:.3e}" + ("; mesh span truncates the transform"
                                                              if truncated else "")))
    # coupling round trip on interior nodes with appreciable coupling
    v = ctx.bath.coupling_on(mesh, prof)
    worst = 0.0
    for j in range(2, mesh.size - 2):
        w = mesh.omega[j]
        col = v[:, j]
        ix = np.flatnonzero(material & (col > 1e-6 * max(col.max(), 1e-300)))
        if ix.size == 0:
            continue
        back = recover_coupling(table.chi[:, j], prof, w, ix)
        worst = max(worst, float(np.max(np.abs(back - col[ix]) / col[ix])))
    res.checks.append(Check("coupling_roundtrip", worst, ctx.tol("coupling_roundtrip")))


def pipeline_green(ctx, res):
    o = ctx.cfg.options["green"]
    region = ctx.region()
    for k, w in enumerate(o["omega"]):
        chi = ctx.chi_at(w)
        resp = DielectricResponse(ctx.grid, w, 1.0 + chi)
        if o["solver"] == "fd":
            sol = green_fd(resp)
        else:
            sol = green_multilayer(ctx.stack_for(ctx.grid, chi), w, ctx.grid)
        meta = _meta(ctx, omega=w, solver=sol.solver, boundary=sol.boundary,
                     grid_digest=ctx.grid.digest())
        ctx.out.write_matrix_csv(f"green_{k}.csv", ctx.grid.x, ctx.grid.x, sol.G, meta)
        if o["dump"]:
            ctx.out.write_npy(f"green_{k}.npy", sol.G, meta)
        scale = float(np.max(np.abs(sol.G)))
        res.checks.append(Check(f"reciprocity[{w:g}]", sol.reciprocity_residual() / scale,
                                ctx.tol("reciprocity")))
        if np.any(resp.eps.imag > 0):
            rep = green_identity_residual(sol, resp, region)
            exact = sol.solver == "finite-difference"
            res.checks.append(Check(f"green_identity[{w:g}]", rep.residual, ctx.tol("green_identity"),
                                    gate=exact, note=None if exact else
                                    "continuum Green function on a discrete sum: O(h^2) expected"))
            res.checks.append(Check(f"surface_flux[{w:g}]", rep.flux_relative, ctx.tol("surface_flux"),
                                    gate=False, note=f"regime {rep.regime}"))


def _snap(ctx, omegas, res):
    out = []
    for w in omegas:
        j = ctx.mesh.index_nearest(w)
        out.append(j)
        res.info.setdefault("frequencies", []).append(
            {"requested": w, "mesh_node": float(ctx.mesh.omega[j])})
    return out


def _relation_checks(ctx, cs, tag):
    tol_of = {"exact": "exact", "quadrature": "quadrature", "stencil": "stencil"}
    out = []
    rels = dict(eigen_residuals(cs, ctx.profile))
    rels.update(structural_residuals(cs))
    for name, r in rels.items():
        out.append(Check(f"{name}[{tag}]", r.relative, ctx.tol(tol_of[r.kind])))
    return out


def pipeline_modes(ctx, res):
    o = ctx.cfg.options["modes"]
    h = ctx.grid.h
    for k, j in enumerate(_snap(ctx, o["omega"], res)):
        _, cs = ctx.mode_set(j)
        w = float(ctx.mesh.omega[j])
        kernels = {"fE": cs.fE, "fA": cs.fA, "fPi": cs.fPi, "fX": cs.fX, "fP": cs.fP,
                   "fY_delta": cs.fY.delta, "fQ_delta": cs.fQ.delta}
        for name in o["kernels"]:
            if name not in kernels:
                raise ConfigError(f"unknown kernel {name!r}; choose from {', '.join(KERNEL_NAMES)}")
            ctx.out.write_matrix_csv(f"modes_{k}_{name}.csv", ctx.grid.x, ctx.grid.x,
                                     kernels[name].matrix(h),
                                     _meta(ctx, omega=w, kernel=name, labels=int(cs.labels.size)))
        res.checks.extend(_relation_checks(ctx, cs, f"{w:g}"))


def pipeline_verify(ctx, res):
    o = ctx.cfg.options["verify"]
    region = ctx.region()
    nodes = list(dict.fromkeys(_snap(ctx, o["omega"], res)))
    sets = []
    for j in nodes:
        G, cs = ctx.mode_set(j)
        w = float(ctx.mesh.omega[j])
        tag = f"{w:g}"
        chi = cs.chi
        res.checks.extend(_relation_checks(ctx, cs, tag))
        res.checks.append(Check(f"s_condition[{tag}]", cs.s.unitarity_residual(ctx.profile),
                                ctx.tol("exact")))
        res.checks.append(Check(f"route_equivalence[{tag}]",
                                kernel_route_residual(cs.fE, G, chi, w, cs.labels), ctx.tol("route")))
        rep = green_identity_residual(G, DielectricResponse(ctx.grid, w, 1.0 + chi), region)
        res.checks.append(Check(f"green_identity_volume[{tag}]", rep.volume_residual,
                                ctx.tol("green_identity")))
        res.checks.append(Check(f"surface_flux[{tag}]", rep.flux_relative, ctx.tol("surface_flux")))
        if cs.labels.size:
            back = recover_coupling(chi, ctx.profile, w, cs.labels)
            res.checks.append(Check(f"coupling_roundtrip[{tag}]",
                                    _rel_max(back, cs.coupling[cs.labels]),
                                    ctx.tol("coupling_roundtrip")))
        sets.append(cs)
    labels = np.intersect1d(region, sets[0].labels)
    for c1, c2 in zip(sets, sets[1:]):
        tag = f"{c1.omega:g},{c2.omega:g}"
        rep = commutation_residual(c1, c2, ctx.profile, labels)
        res.checks.append(Check(f"offdiagonal_commutator[{tag}]", rep.offdiagonal_relative,
                                ctx.tol("commutator")))
        res.checks.append(Check(f"double_curl[{tag}]", rep.double_curl_relative, ctx.tol("commutator")))
        r, s = cc_commutator_residual(c1, c2, labels)
        res.checks.append(Check(f"cc_commutator[{tag}]", r / s, ctx.tol("commutator")))
    res.info["labels_checked"] = int(labels.size)


def smooth_window(lo, hi, width):
    """W(w) = erfc((lo - w)/width) erfc((w - hi)/width) / 4."""
    return lambda w: 0.25 * erfc((lo - np.asarray(w)) / width) * erfc((np.asarray(w) - hi) / width)


def pipeline_correlate(ctx, res):
    o = ctx.cfg.options["correlate"]
    x = ctx.grid.x
    if o["points"]:
        pts = np.array([int(np.argmin(np.abs(x - p))) for p in o["points"]])
    else:
        region = ctx.region()
        pts = region[np.linspace(0, region.size - 1, 5).astype(int)]
    tau = np.asarray(o["tau"], dtype=float)
    window = None
    if o["window_min"] is not None:
        width = o["window_width"] or 0.1 * (o["window_max"] - o["window_min"])
        window = smooth_window(o["window_min"], o["window_max"], width)
    sweep = green_sweep(ctx.table, ctx.mesh, pts, threads=ctx.threads)
    result = vacuum_correlation_E(sweep, tau, window)
    P, T = pts.size, tau.size
    xa = np.broadcast_to(x[pts][:, None, None], (P, P, T))
    xb = np.broadcast_to(x[pts][None, :, None], (P, P, T))
    tt = np.broadcast_to(tau[None, None, :], (P, P, T))
    meta = _meta(ctx, points=x[pts], tau=tau, window=None if window is None else
                 {"omega_min": o["window_min"], "omega_max": o["window_max"]},
                 truncation={"tail_ratio": result.tail_ratio, "omega_max": result.omega_max},
                 route_agreement=result.route_agreement)
    for name, vals in (("direct", result.direct), ("identity", result.identity)):
        ctx.out.write_csv(f"correlation_{name}.csv", ["x", "x_prime", "tau", "re", "im"],
                          [xa, xb, tt, vals.real, vals.imag], meta)
    res.checks.append(Check("correlation_routes", result.route_agreement,
                            ctx.tol("correlation_routes")))
    if np.allclose(np.sort(tau), np.sort(-tau)):
        res.checks.append(Check("hermiticity", hermiticity_residual(result), ctx.tol("hermiticity")))
    if np.any(tau == 0.0):
        res.checks.append(Check("positivity", positivity_residual(result), ctx.tol("hermiticity")))
    res.checks.append(Check("equal_time_commutator",
                            equal_time_commutator_residual(sweep, window=window),
                            ctx.tol("commutator")))
    res.info["tail_ratio"] = result.tail_ratio


def pipeline_oracle(ctx, res):
    cfg, o = ctx.cfg, ctx.cfg.options["oracle"]
    grid = Grid1D(cfg.grid.x_min, cfg.grid.x_max, o["n_points"])
    prof = cfg.build_profile(grid)
    top = o["bath_max"] or float(cfg.mesh.omega[-1])
    M = o["n_bath"]
    d = top / M
    mesh = FrequencyMesh(d * np.arange(1, M + 1), np.full(M, d))
    bath = cfg.build_bath(prof, mesh, flat_preset=True)
    model = assemble_hamiltonian(prof, mesh.omega, mesh.weights, bath.coupling,
                                 boundary=o["boundary"], dimension_cap=o["dimension_cap"])
    res.info.update(n_points=grid.n_points, n_bath=M, phase_space_dimension=2 * model.n_dof,
                    zero_modes=int(model.zero_modes))
    eta = o["eta"] or 3 * d
    res.info["eta"] = eta
    x = grid.x
    i_src = int(np.argmin(np.abs(x - o["drive_x"])))
    reach = o["compare_region"] or 0.15 * (x[-1] - x[0])
    near = np.abs(x - x[i_src]) <= reach
    j = np.zeros(grid.n_points)
    j[i_src] = 1.0 / grid.h
    for k, w in enumerate(o["drive_omega"]):
        z = w + 1j * eta
        E = classical_response(model, z, j)
        chi = compute_chi(prof, bath, mesh, [z]).chi[:, 0]
        Ec = crosscheck.driven_field(ctx.stack_for(grid, chi), z, x, x[i_src])
        ctx.out.write_csv(f"oracle_response_{k}.csv",
                          ["x", "re_discrete", "im_discrete", "re_continuum", "im_continuum"],
                          [x, E.real, E.imag, Ec.real, Ec.imag], _meta(ctx, omega=w, eta=eta))
        res.checks.append(Check(f"oracle_response[{w:g}]", _rel_max(E, Ec, near),
                                ctx.tol("oracle_response")))
    if not o["modes"]:
        return
    if 2 * model.n_dof > ORACLE_EIG_CAP:
        res.info["modes_skipped"] = f"phase-space dimension {2 * model.n_dof} > {ORACLE_EIG_CAP}"
        return
    dec = normal_modes(model)
    ctx.out.write_csv("oracle_modes.csv", ["omega"], [dec.omega], _meta(ctx, method=dec.method))
    res.checks.append(Check("symplectic", dec.symplectic_residual, ctx.tol("symplectic")))
    wc = o["vacuum_cutoff"] or 2.0 * top / 3.0
    width = o["vacuum_width"] or 0.1 * top
    W = lambda w: 0.5 * erfc((np.asarray(w) - wc) / width)  # noqa: E731
    wg = np.linspace(1e-4, wc + 7 * width, 4001)
    ww = np.full(wg.size, wg[1] - wg[0])
    ww[[0, -1]] *= 0.5
    pts = np.clip([i_src - 1, i_src, i_src + 1], 0, grid.n_points - 1)
    disc = smoothed_vacuum_correlation(dec, pts, W, eta, wg, ww)
    z = wg + 1j * eta
    chi = compute_chi(prof, bath, mesh, z).chi
    cont = crosscheck.smoothed_vacuum_correlation(lambda k: ctx.stack_for(grid, chi[:, k]),
                                                  z, ww, W, x[pts])
    res.checks.append(Check("oracle_vacuum", _rel_max(disc, cont), ctx.tol("oracle_vacuum")))
    res.info["vacuum_window"] = {"cutoff": wc, "width": width}


RUNNERS = {"chi": pipeline_chi, "green": pipeline_green, "modes": pipeline_modes,
           "verify": pipeline_verify, "correlate": pipeline_correlate, "oracle": pipeline_oracle}


def run(cfg, out_dir, threads=1, pipelines=None):
    """Execute the requested pipelines in dependency order and write the report.

    A failed pipeline stops the chi -> green -> modes -> verify -> correlate
    chain; later members are marked "skipped".  The oracle only depends on
    the config and always runs when requested.
    """
    t0 = time.perf_counter()
    started = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    out = OutputDir(out_dir)
    wanted = set(cfg.pipelines if pipelines is None else pipelines)
    results = []
    ctx = None
    chain_broken = False
    for name in PIPELINES:
        if name not in wanted:
            continue
        res = PipelineResult(name)
        results.append(res)
        if chain_broken and name != "oracle":
            res.status = "skipped"
            continue
        t1 = time.perf_counter()
        try:
            if ctx is None:
                ctx = _Context(cfg, out, threads)
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                RUNNERS[name](ctx, res)
            msgs = sorted({f"{w.category.__name__}: {w.message}" for w in caught})
            if msgs:
                res.info["warnings"] = msgs
            failed = [c for c in res.checks if c.gate and not c.passed]
            res.status = "tolerance_exceeded" if failed else "ok"
        except (SingularityError, LosslessPointError, StabilityError) as exc:
            res.status = "singular"
            res.error = {"type": type(exc).__name__, "message": str(exc),
                         "location": _location(exc)}
        except Exception as exc:  # recorded in the partial manifest
            res.status = "failed"
            res.error = {"type": type(exc).__name__, "message": str(exc),
                         "traceback": traceback.format_exc().splitlines()[-3:]}
        res.wall_time = time.perf_counter() - t1
        if res.status in ("singular", "failed") and name != "oracle":
            chain_broken = True
    report = RunReport(str(cfg.path), cfg.sha256, results, out.files, started,
                       time.perf_counter() - t0)
    (Path(out_dir) / "report.json").write_text(dumps(report.to_dict()))
    return report


def _location(exc):
    loc = getattr(exc, "location", None)
    if loc is None:
        return None
    x, w = loc
    return {"x": x, "omega": None if w is None else {"re": w.real, "im": w.imag}}


def output_dir(args_out, cfg):
    if args_out:
        return Path(args_out)
    root = Path(os.environ.get(ENV_OUT, "fanodiag_out"))
    return root / (cfg.output_dir or cfg.path.stem)


def _print_report(report, stream):
    for p in report.pipelines:
        n_fail = sum(1 for c in p.checks if c.gate and not c.passed)
        line = f"{p.name:10s} {p.status:20s} {len(p.checks):3d} checks"
        if n_fail:
            line += f", {n_fail} above tolerance"
        if p.error:
            line += f" | {p.error['type']}: {p.error['message']}"
        print(line, file=stream)
        for c in p.checks:
            if c.gate and not c.passed:
                print(f"    {c.name}: {c.value:.3e} > {c.tolerance:.1e}", file=stream)


def build_parser():
    parser = argparse.ArgumentParser(prog="fanodiag", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in ("run", "validate") + PIPELINES:
        p = sub.add_parser(verb)
        p.add_argument("--config", required=True, help="experiment config (INI)")
        if verb != "validate":
            p.add_argument("--out", help=f"output directory (default ${ENV_OUT}/<name>)")
            p.add_argument("--tol-override", action="append", default=[], metavar="NAME=VALUE")
            p.add_argument("--threads", type=int, default=1)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.verb == "validate":
        cfg, diags = parse_config(args.config)
        print(json.dumps({"config": args.config, "diagnostics": [d.to_dict() for d in diags]},
                         indent=2))
        return EXIT_CONFIG if any(d.level == "error" for d in diags) else EXIT_OK
    pipelines = None if args.verb == "run" else [args.verb]
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg, diags = load_config(args.config, args.tol_override, pipelines)
    except ConfigError as exc:
        print(json.dumps({"error": str(exc), "diagnostics": [d.to_dict() for d in exc.diagnostics]},
                         indent=2), file=sys.stderr)
        return EXIT_CONFIG
    for d in diags:
        print(f"warning: {d.field}: {d.message}", file=sys.stderr)
    out = output_dir(args.out, cfg)
    report = run(cfg, out, threads=args.threads, pipelines=pipelines)
    _print_report(report, sys.stdout)
    print(f"report: {out / 'report.json'}")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
