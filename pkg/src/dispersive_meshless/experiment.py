"""Build, run and diagnose one configured experiment, and write its artifacts."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .config import ExperimentConfig, serialize_config
from .drude import VACUUM, DrudeMaterial
from .kernel import KernelParams
from .nodes import NodeCloud, Region, build_cavity_cloud
from .oracles import empty_cavity_modes, loaded_cavity_resonance_fd, plasma_profile
from .shapes import CurlStencils, build_stencils
from .solver import FieldState, ProbeRecord, SolverConfig, SourceSpec, run


@dataclass(frozen=True, eq=False)
class Setup:
    cloud: NodeCloud
    stencils: CurlStencils
    kernel: KernelParams
    radius: float
    materials: dict
    source: SourceSpec
    probe_nodes: tuple
    build_seconds: float = 0.0


def make_cloud(cfg: ExperimentConfig) -> NodeCloud:
    region = Region(*cfg.plasma_region) if cfg.plasma_present else None
    return build_cavity_cloud(cfg.cavity_width, cfg.cavity_height, cfg.cavity_spacing, region)


def build_setup(cfg: ExperimentConfig, basis_mode: str | None = None, source_position=None) -> Setup:
    t = time.perf_counter()
    cloud = make_cloud(cfg)
    h = cfg.cavity_spacing
    kernel = KernelParams(cfg.kernel_shape_parameter, h)
    radius = cfg.kernel_support_factor * h
    mode = basis_mode or cfg.solver_basis_mode
    stencils = build_stencils(cloud, kernel, radius, mode)
    materials = {0: VACUUM, 1: DrudeMaterial(cfg.plasma_omega_ep, cfg.plasma_gamma_e, cfg.plasma_omega_mp, cfg.plasma_gamma_m)}
    pos = cfg.source_position if source_position is None else source_position
    src = SourceSpec(
        cloud.nearest_vector_node(pos), cfg.source_amplitude, cfg.source_f0, cfg.source_t0, cfg.source_tau, cfg.source_direction
    )
    probes = tuple(cloud.nearest_vector_node(p) for p in cfg.solver_probes)
    return Setup(cloud, stencils, kernel, radius, materials, src, probes, time.perf_counter() - t)


def solver_config(cfg: ExperimentConfig, setup: Setup, n_steps: int | None = None, **kw) -> SolverConfig:
    return SolverConfig(
        dt=cfg.dt,
        n_steps=cfg.n_steps if n_steps is None else n_steps,
        basis_mode=setup.stencils.basis_mode,
        probe_nodes=setup.probe_nodes,
        record_every=cfg.solver_record_every,
        hardwire_vacuum=cfg.solver_hardwire_vacuum,
        **kw,
    )


def simulate(cfg: ExperimentConfig, basis_mode: str | None = None, setup: Setup | None = None, **kw) -> ProbeRecord:
    setup = setup or build_setup(cfg, basis_mode)
    return run(setup.cloud, setup.stencils, setup.materials, setup.source, solver_config(cfg, setup, **kw))


def oracle_frequencies(cfg: ExperimentConfig) -> list:
    """Reference resonances in the oracle band: finite differences with plasma, closed form without."""
    lo, hi = cfg.diagnostics_oracle_band
    if cfg.plasma_present and cfg.plasma_omega_ep > 0:
        eps = plasma_profile(cfg.plasma_region, cfg.plasma_omega_ep)
        return loaded_cavity_resonance_fd(cfg.cavity_width, cfg.cavity_height, eps, (lo, hi), cfg.diagnostics_oracle_grid)
    return [f for f, _, _ in empty_cavity_modes(cfg.cavity_width, cfg.cavity_height, hi) if f >= lo]


def charge_snapshots(cfg: ExperimentConfig, basis_mode: str | None = None) -> list:
    """Charge density at each configured time, driven by a source at ``charge_source``."""
    setup = build_setup(cfg, basis_mode, source_position=cfg.diagnostics_charge_source)
    dt = cfg.dt
    state = FieldState.zeros(setup.cloud.n_vector, setup.cloud.n_scalar)
    fields = []
    for t in sorted(cfg.diagnostics_charge_times):
        n = int(round(t / dt)) - state.step_index
        if n > 0:
            sc = replace(solver_config(cfg, setup, n_steps=n), probe_nodes=())
            state = run(setup.cloud, setup.stencils, setup.materials, setup.source, sc, state=state).final_state
        fields.append(
            dg.charge_density(state, setup.cloud, setup.kernel, setup.radius, setup.stencils.basis_mode, timestamp=state.step_index * dt)
        )
    return fields


@dataclass(eq=False)
class ExperimentResult:
    config: ExperimentConfig
    basis_mode: str
    record: ProbeRecord
    spectrum: dg.SpectrumResult
    oracle: list
    spurious: list
    charges: list
    ratios: list
    timings: dict = field(default_factory=dict)
    setup: Setup | None = None

    @property
    def dominant(self) -> dg.Peak:
        return self.spectrum.dominant()

    def summary(self) -> dict:
        dom = self.dominant
        out = {
            "basis_mode": self.basis_mode,
            "dominant_peak_hz": dom.frequency,
            "dominant_peak_db": dom.level_db,
        }
        if self.oracle:
            ref = min(self.oracle, key=lambda f: abs(f - dom.frequency))
            out["oracle_nearest_hz"] = ref
            out["dominant_relative_error"] = dg.relative_error(dom.frequency, ref)
        lo, hi = self.config.diagnostics_spurious_band
        out["spurious_band"] = f"{lo!r} {hi!r}"
        out["spurious_peaks_hz"] = " ".join(repr(p.frequency) for p in self.spurious) or "none"
        for f, r in zip(self.charges, self.ratios):
            out[f"concentration_ratio_t{f.timestamp:.6e}"] = "none" if r is None else r
        return out


def _ps(t):
    return f"{t * 1e12:.3f}ps".replace(".", "p")


def run_experiment(cfg: ExperimentConfig, out_dir=None, basis_mode: str | None = None, oracle: list | None = None) -> ExperimentResult:
    """Full pipeline for one basis mode; writes artifacts when ``out_dir`` is given."""
    mode = basis_mode or cfg.solver_basis_mode
    timings = {}
    t = time.perf_counter()
    setup = build_setup(cfg, mode)
    timings["build_seconds"] = time.perf_counter() - t
    t = time.perf_counter()
    rec = simulate(cfg, setup=setup)
    timings["march_seconds"] = time.perf_counter() - t
    spec = dg.spectrum(rec, window=cfg.diagnostics_window, zero_pad_factor=cfg.diagnostics_zero_pad, floor_db=cfg.diagnostics_floor_db)
    lo, hi = cfg.diagnostics_spurious_band
    spurious = dg.spurious_mode_scan(spec, lo, hi, cfg.diagnostics_spurious_floor_db)
    if oracle is None:
        t = time.perf_counter()
        oracle = oracle_frequencies(cfg) if cfg.diagnostics_oracle else []
        timings["oracle_seconds"] = time.perf_counter() - t
    charges = charge_snapshots(cfg, mode) if cfg.diagnostics_charge_times else []
    r = cfg.diagnostics_concentration_radius * cfg.cavity_spacing
    ratios = [dg.concentration_ratio(f, cfg.diagnostics_charge_source, r) for f in charges]
    result = ExperimentResult(cfg, mode, rec, spec, list(oracle), spurious, charges, ratios, timings, setup)
    if out_dir is not None:
        write_artifacts(result, Path(out_dir))
    return result


def write_artifacts(result: ExperimentResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    result.setup.cloud.to_csv(out / "nodes.csv")
    result.record.to_csv(out / "probes.csv")
    result.spectrum.to_csv(out / "spectrum.csv")
    result.spectrum.peaks_to_csv(out / "peaks.csv", reference=result.oracle or None)
    with open(out / "oracle.csv", "w") as fh:
        fh.write("frequency\n")
        fh.writelines(f"{f!r}\n" for f in result.oracle)
    for f in result.charges:
        f.to_csv(out / f"charge_{_ps(f.timestamp)}.csv")
    dg.write_summary(out / "summary.txt", result.summary())
    (out / "config.cfg").write_text(serialize_config(result.config))
    manifest = {f"config.{k}": v for k, v in _flat_config(result.config).items()}
    manifest.update(result.record.manifest)
    manifest.update(result.timings)
    dg.write_summary(out / "manifest.txt", manifest)


def _flat_config(cfg):
    from dataclasses import fields

    return {f.name: getattr(cfg, f.name) for f in fields(cfg)}


@dataclass(eq=False)
class Comparison:
    report: dict
    results: dict


def compare_modes(cfg: ExperimentConfig, out_dir=None) -> Comparison:
    """Run both bases on the same cloud and source; returns a side-by-side report."""
    oracle = oracle_frequencies(cfg) if cfg.diagnostics_oracle else []
    res = {}
    for mode in ("vector", "scalar"):
        sub = None if out_dir is None else Path(out_dir) / mode
        res[mode] = run_experiment(cfg, sub, mode, oracle=oracle)
    report = {}
    for mode, r in res.items():
        s = r.summary()
        for k, v in s.items():
            report[f"{mode}.{k}"] = v
        report[f"{mode}.n_vector"] = r.setup.cloud.n_vector
        report[f"{mode}.n_scalar"] = r.setup.cloud.n_scalar
        report[f"{mode}.W_B_nnz"] = r.setup.stencils.W_B.nnz
        report[f"{mode}.W_D_nnz"] = r.setup.stencils.W_D.nnz
        for k, v in r.timings.items():
            report[f"{mode}.{k}"] = v
    rv, rs = res["vector"].ratios, res["scalar"].ratios
    if rv and rs and rv[0] is not None and rs[0] is not None:
        report["vector_more_concentrated"] = rv[0] > rs[0]
    report["note"] = "wall-clock timings are informational and hardware dependent"
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        dg.write_summary(Path(out_dir) / "comparison.txt", report)
    return Comparison(report, res)


def sweep(cfg: ExperimentConfig, param: str, values, out_dir=None) -> list:
    """Dominant peak and its error against the oracle for each value of ``param``."""
    fields_ = {"shape_parameter": "kernel_shape_parameter", "support_factor": "kernel_support_factor"}
    if param not in fields_:
        raise ValueError(f"cannot sweep {param!r}; choose from {sorted(fields_)}")
    oracle = oracle_frequencies(cfg) if cfg.diagnostics_oracle else []
    rows = []
    for v in values:
        c = replace(cfg, **{fields_[param]: float(v)})
        rec = simulate(c)
        dom = dg.spectrum(rec, window=c.diagnostics_window, zero_pad_factor=c.diagnostics_zero_pad, floor_db=c.diagnostics_floor_db).dominant()
        ref = min(oracle, key=lambda f: abs(f - dom.frequency)) if oracle else float("nan")
        err = dg.relative_error(dom.frequency, ref) if oracle else float("nan")
        rows.append((float(v), dom.frequency, ref, err))
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        with open(Path(out_dir) / "sweep.csv", "w") as fh:
            fh.write(f"{param},dominant_hz,oracle_hz,relative_error\n")
            for row in rows:
                fh.write(",".join(repr(x) for x in row) + "\n")
    return rows
