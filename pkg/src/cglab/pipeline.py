"""Pipeline orchestration, artifact export and the one-screen summary."""

from __future__ import annotations

import csv
import io
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import ansatz
from .config import RunConfig, config_hash
from .errors import NoAdmissibleU
from .export import field_csv, key_value_text, mesh_off, vertex_csv
from .fields import gauss_bonnet_integral, kernel_residual_pointwise, period_integral, vertex_fields
from .sphere import hemisphere_margin
from .spectral import TYSK_CONSTANT, assemble_operators, spectral_report, spectrum_csv
from .strominger import dilaton_jet, full_solve, solution_csv
from .surface import build_surface, cyclic_unramified_cover, homology_loops, validate_config
from .jets import Jet2

logger = logging.getLogger(__name__)

__all__ = ["RunOptions", "RunReport", "run_pipeline", "summarize", "export_artifacts", "SUBCOMMANDS"]

SUBCOMMANDS = ("mesh", "spectrum", "solve", "verify", "report")
DEGREE = 2


@dataclass(frozen=True)
class RunOptions:
    level: int | None = None
    eigs: int = 16
    samples: int = 100
    cover: int = 1
    seed: int = 0

    def canonical(self) -> dict:
        return {"level": self.level, "eigs": self.eigs, "samples": self.samples, "cover": self.cover,
                "seed": self.seed}


@dataclass
class RunReport:
    """Everything a run produced; ``files`` maps file names to their text."""

    subcommand: str
    config: RunConfig
    options: RunOptions
    values: list = field(default_factory=list)
    files: dict = field(default_factory=dict)
    identities: list = field(default_factory=list)
    status: str = "ok"
    diagnostic: str = ""
    timing: dict = field(default_factory=dict)
    mesh_stats: dict = field(default_factory=dict)
    hemisphere: object = None
    spectral: object = None
    solution: object = None

    def add(self, key, value):
        self.values.append((key, _fmt(value)))

    def get(self, key):
        for k, v in self.values:
            if k == key:
                return v
        raise KeyError(key)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _effective_branch(cfg: RunConfig, opts: RunOptions):
    b = cfg.branch
    if opts.level is None or opts.level == b.mesh_level:
        return b
    return validate_config(cfg.raw_points, b.alpha_prime, opts.level, b.pairing)


def _mesh_stage(rep: RunReport, branch, opts: RunOptions):
    t = time.perf_counter()
    mesh = build_surface(branch)
    if opts.cover > 1:
        loop = homology_loops(mesh)[0]
        mesh = cyclic_unramified_cover(mesh, loop, opts.cover)
    rep.timing["mesh"] = time.perf_counter() - t
    e = len(mesh.edges)
    rep.mesh_stats = {"V": mesh.n_vertices, "E": e, "F": len(mesh.triangles),
                      "chi": mesh.euler_characteristic, "genus": mesh.genus}
    rep.add("mesh.level", branch.mesh_level)
    rep.add("mesh.subdivisions", mesh.base.subdivisions)
    rep.add("mesh.cover_degree", mesh.degree)
    for k, v in rep.mesh_stats.items():
        rep.add(f"mesh.{k}", v)
    rep.add("mesh.pairing", "; ".join(f"{a + 1}-{b + 1}" for a, b in mesh.base.pairing))
    rep.add("mesh.arc_separation", mesh.base.separation)
    rep.add("mesh.rotated", not np.allclose(branch.rotation, np.eye(3)))
    return mesh


def _hemisphere_stage(rep: RunReport, branch):
    hr = hemisphere_margin(np.asarray(branch.points))
    rep.hemisphere = hr
    rep.add("hemisphere.feasible", hr.feasible)
    rep.add("hemisphere.margin", hr.margin)
    rep.add("hemisphere.direction", np.asarray(hr.direction))
    if not hr.feasible:
        rep.add("hemisphere.certificate", [i + 1 for i in hr.certificate])
    return hr


def _spectrum_stage(rep: RunReport, mesh, ops, opts):
    t = time.perf_counter()
    sr = spectral_report(mesh, ops, count=opts.eigs)
    rep.timing["spectrum"] = time.perf_counter() - t
    rep.spectral = sr
    rep.add("spectrum.index", sr.index)
    rep.add("spectrum.delta", sr.delta)
    rep.add("spectrum.calibration_error", sr.calibration_error)
    rep.add("spectrum.kernel_multiplicity", sr.kernel_multiplicity)
    rep.add("spectrum.kernel_projection_residuals", sr.projection_residuals)
    rep.add("spectrum.eigenvalues", sr.eigenvalues)
    rep.add("spectrum.tysk_bound", int(np.floor(TYSK_CONSTANT * mesh.degree)))
    rep.add("spectrum.total_mass", float(ops.mass.sum()))
    rep.files["spectrum.csv"] = spectrum_csv(sr)
    return sr


def _solve_stage(rep: RunReport, branch, mesh, ops, opts):
    t = time.perf_counter()
    try:
        sol = full_solve(branch, mesh=mesh, operators=ops, samples=min(opts.samples, 200))
    except NoAdmissibleU as exc:
        rep.timing["solve"] = time.perf_counter() - t
        rep.add("solve.status", "no_admissible_u")
        rep.add("solve.certificate", [i + 1 for i in exc.certificate])
        rep.add("solve.margin", exc.margin)
        rep.status = "no_admissible_u"
        rep.diagnostic = str(exc)
        return None
    rep.timing["solve"] = time.perf_counter() - t
    rep.solution = sol
    rep.add("solve.status", "solved")
    rep.add("solve.alpha_prime", sol.alpha_prime)
    rep.add("solve.c", sol.c)
    rep.add("solve.margin", sol.margin)
    rep.add("solve.near_degenerate_vertices", sol.near_degenerate)
    for k, v in sol.residuals.items():
        rep.add(f"solve.{k}", v)
    rep.files["solution.csv"] = solution_csv(sol)
    rep.files["fields.csv"] = field_csv(vertex_fields(mesh, sol.c_frame * sol.scale, sol.f))
    return sol


def _verify_stage(rep: RunReport, branch, mesh, ops, opts):
    t = time.perf_counter()
    rng = np.random.default_rng(opts.seed)
    curve = branch.curve
    frames = ansatz.sample_frames(curve, opts.samples, rng)
    hr = rep.hemisphere if rep.hemisphere is not None else hemisphere_margin(np.asarray(branch.points))
    c_frame = np.asarray(branch.rotation) @ np.asarray(hr.direction) if hr.feasible else None
    worst = {}
    for fr in frames:
        if c_frame is not None:
            fj = dilaton_jet(fr, c_frame, branch.alpha_prime).log()
        else:
            # the balanced identity holds for any smooth f
            fj = fr.alpha * 0.3 + fr.beta * 0.1 - fr.gamma * 0.2
        af = ansatz.assemble_point_structures(fr, fj)
        res = {}
        res.update(ansatz.verify_algebraic_identities(af))
        res.update(ansatz.verify_differential_identities(af))
        for name in ("alpha", "beta", "gamma"):
            res[f"kernel_{name}"] = kernel_residual_pointwise(fr, name)
        for k, v in res.items():
            worst[k] = max(worst.get(k, 0.0), float(v))
    rep.identities = [(k, worst[k], len(frames)) for k in sorted(worst)]
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["identity", "max_residual", "samples"])
    for k, v, n in rep.identities:
        wr.writerow([k, f"{v:.3e}", n])
    rep.files["identities.csv"] = buf.getvalue()
    rep.add("verify.samples", len(frames))
    rep.add("verify.max_algebraic", max(v for k, v, _ in rep.identities if k in _ALGEBRAIC))
    rep.add("verify.max_differential", max(v for k, v, _ in rep.identities if k not in _ALGEBRAIC))
    gb = gauss_bonnet_integral(curve)
    rep.add("verify.gauss_bonnet", gb)
    rep.add("verify.gauss_bonnet_rel_error", abs(gb / (-4 * np.pi * DEGREE) - 1))
    rep.add("verify.total_mass_error", abs(float(ops.mass.sum()) - 4 * np.pi * mesh.degree))
    if mesh.copies is not None:
        _periods(rep, mesh)
    rep.timing["verify"] = time.perf_counter() - t


_ALGEBRAIC = {"J0_kahler_action", "omega0_cubed", "Omega_Omegabar", "Omega_wedge_Omega", "omega_prime_squared",
              "norm_omega0", "norm_omega_f", "balanced_expansion", "Omega_type_30"}


def _periods(rep, mesh):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["arc", "sheet", "ring", "form", "re", "im"])
    worst = 0.0
    try:
        rings = [homology_loops(mesh, ring=0), homology_loops(mesh, ring=1)]
    except ValueError as exc:
        rep.add("verify.periods", f"skipped ({exc})")
        return
    for form in ("dz/w", 1, 2, 3):
        vals = []
        for loops in rings:
            row = []
            for lp in loops:
                p = period_integral(mesh, lp, form)
                wr.writerow([lp.arc + 1, lp.sheet, lp.ring, form, f"{p.real:.12e}", f"{p.imag:.12e}"])
                row.append(p)
            vals.append(row)
        for a, b in zip(*vals):
            worst = max(worst, abs(a - b) / max(1.0, abs(a)))
    rep.files["periods.csv"] = buf.getvalue()
    rep.add("verify.period_homology_defect", worst)


def run_pipeline(cfg: RunConfig, subcommand: str, options: RunOptions | None = None) -> RunReport:
    """Run one subcommand; never writes files (see :func:`export_artifacts`).

    Numerical failures propagate as exceptions; a missing admissible ``u``
    is recorded in ``status``.
    """
    if subcommand not in SUBCOMMANDS:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    opts = options or RunOptions()
    branch = _effective_branch(cfg, opts)
    rep = RunReport(subcommand, cfg, opts)
    rep.add("subcommand", subcommand)
    rep.add("config.hash", config_hash(branch, opts.canonical())[:12])
    rep.add("config.alpha_prime", branch.alpha_prime)
    rep.add("config.points", [list(map(float, p)) for p in np.asarray(branch.points)])
    hr = _hemisphere_stage(rep, branch)
    mesh = _mesh_stage(rep, branch, opts)
    rep.files["mesh.off"] = mesh_off(mesh)
    rep.files["vertices.csv"] = vertex_csv(mesh)
    rep.files["fields.csv"] = field_csv(vertex_fields(mesh))
    ops = None
    if subcommand in ("spectrum", "solve", "verify", "report"):
        ops = assemble_operators(mesh)
    if subcommand in ("spectrum", "solve", "report"):
        _spectrum_stage(rep, mesh, ops, opts)
    if subcommand in ("solve", "report"):
        if hr.feasible or subcommand == "solve":
            _solve_stage(rep, branch, mesh, ops, opts)
        else:
            rep.add("solve.status", "no_admissible_u")
            rep.add("solve.certificate", [i + 1 for i in hr.certificate])
            rep.status = "no_admissible_u" if subcommand == "solve" else "ok"
    if subcommand in ("verify", "report"):
        _verify_stage(rep, branch, mesh, ops, opts)
    rep.files["summary.txt"] = key_value_text(rep.values + [("status", rep.status)])
    return rep


def output_directory(base, rep: RunReport) -> str:
    return os.path.join(base, f"cglab-{rep.get('config.hash')}")


def export_artifacts(rep: RunReport, base_dir) -> list:
    """Write all report files into ``<base_dir>/cglab-<hash>/``."""
    path = output_directory(base_dir, rep)
    os.makedirs(path, exist_ok=True)
    written = []
    for name in sorted(rep.files):
        fn = os.path.join(path, name)
        with open(fn, "w", encoding="utf-8", newline="") as fh:
            fh.write(rep.files[name])
        written.append(fn)
    return written


def summarize(rep: RunReport) -> str:
    """One-screen synopsis of a run."""
    lines = [f"cglab {rep.subcommand}  [{rep.get('config.hash')}]"]
    ms = rep.mesh_stats
    if ms:
        lines.append(f"surface: genus {ms['genus']}  V={ms['V']} E={ms['E']} F={ms['F']} chi={ms['chi']}")
    hr = rep.hemisphere
    if hr is not None:
        if hr.feasible:
            lines.append(f"hemisphere: FEASIBLE (margin {hr.margin:.2f})")
        else:
            cert = ", ".join(str(i + 1) for i in hr.certificate)
            lines.append(f"hemisphere: INFEASIBLE (margin {hr.margin:.2f}; origin in hull of points {cert})")
    sr = rep.spectral
    if sr is not None:
        deg = int(rep.get("mesh.cover_degree"))
        bound = int(np.floor(TYSK_CONSTANT * deg))
        if sr.index < deg:
            lines.append(f"index {sr.index} < deg {deg}: Strominger ansatz unsolvable")
        else:
            lines.append(f"index {sr.index} in [{deg}, {bound}]")
        lines.append(f"Tysk bound: index ≤ {bound} ({'holds' if sr.index <= bound else 'VIOLATED'})")
        ok = "≥ 3" if sr.kernel_multiplicity >= 3 else "< 3 (expected ≥ 3)"
        lines.append(f"kernel multiplicity: {sr.kernel_multiplicity} {ok}  (window ±{sr.delta:.2g} around 2)")
    if rep.solution is not None:
        r = rep.solution.residuals
        lines.append(f"Strominger solve: alpha'={rep.solution.alpha_prime:g}  quadratic {r['quadratic']:.1e}  "
                     f"pde {r['pde_analytic']:.1e}  fem {r['fem_dual']:.1e}  min u at ramification "
                     f"{r['u_min_ramification']:.3f}")
    elif rep.status == "no_admissible_u" or any(k == "solve.status" and v == "no_admissible_u" for k, v in rep.values):
        lines.append("Strominger solve: no admissible u (hemisphere condition fails)")
    if rep.identities:
        alg = float(rep.get("verify.max_algebraic"))
        dif = float(rep.get("verify.max_differential"))
        lines.append(f"identities: algebraic max {alg:.1e}, differential max {dif:.1e} "
                     f"over {rep.get('verify.samples')} points")
        lines.append(f"Gauss-Bonnet: relative error {float(rep.get('verify.gauss_bonnet_rel_error')):.1e}")
    if rep.timing:
        lines.append("time: " + ", ".join(f"{k} {v:.1f}s" for k, v in rep.timing.items()))
    return "\n".join(lines)
