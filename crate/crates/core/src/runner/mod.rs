//! Config-driven experiment runner.

mod compare;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64 as C64;
use serde::Serialize;

pub use compare::{compare_files, compare_tables, Comparison, CurveMetrics, SharedGrid, Table};

use crate::config::{Experiment, ExperimentConfig};
use crate::dmd::{self, reconstruction_error, DmdModel, SnapshotSet};
use crate::error::{Error, Result};
use crate::gme::{self, DensityDrift, DensityTrajectory, PopulationTrajectory};
use crate::grid::TimeGrid;
use crate::kernels::{
    extract_floquet_kernels, extract_kernel, fmt_f64, kernel_fft, snap_dt, tensor_label, FloquetKernelSet,
    KernelSeries, KernelSpectrum, ProjectorKind,
};
use crate::propagator::{
    propagate_observe, stable_substeps, thermal_donor_initial, Block, EtHamiltonian, HierarchySpace,
};

#[derive(Clone, Debug, Serialize)]
pub struct DepthCheck {
    pub depth: usize,
    pub n_ado: usize,
    /// End of the compared kernel window.
    pub t_end: f64,
    /// `max |k_L − k_{L+2}| / max |k_{L+2}|` over all components.
    pub deviation: f64,
    pub per_component: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HierarchyReport {
    pub depth: usize,
    pub n_terms: usize,
    pub n_ado: usize,
    pub n_matsubara: Vec<usize>,
    pub truncation_residual: Vec<f64>,
    pub rk4_substeps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth_check: Option<DepthCheck>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DmdReport {
    pub rank: usize,
    pub delay: usize,
    pub snapshots: usize,
    pub singular_values: Vec<f64>,
    pub max_eig_modulus: f64,
    pub fit_residual: f64,
}

impl DmdReport {
    fn new(model: &DmdModel, snaps: &SnapshotSet) -> Self {
        Self {
            rank: model.rank(),
            delay: model.delay,
            snapshots: snaps.len(),
            singular_values: model.singular_values.clone(),
            max_eig_modulus: model.disc_eigs.iter().map(|z| z.norm()).fold(0.0, f64::max),
            fit_residual: reconstruction_error(model, snaps),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub experiment: Experiment,
    /// Every setting the run used, defaults included.
    pub config: ExperimentConfig,
    /// Values not present in the config file that the run assumed.
    pub defaults_applied: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hierarchy: Option<HierarchyReport>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub dmd: BTreeMap<String, DmdReport>,
    /// Conservation and symmetry defects.
    pub invariants: BTreeMap<String, f64>,
    /// Scalar results of the experiment.
    pub values: BTreeMap<String, f64>,
    /// Curve metrics keyed `<quantity>.<variant>.<component>`, reference first.
    pub metrics: BTreeMap<String, CurveMetrics>,
    pub files: Vec<String>,
    pub timings_s: BTreeMap<String, f64>,
}

impl RunReport {
    fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            experiment: cfg.experiment,
            config: cfg.clone(),
            defaults_applied: cfg.defaults_applied.iter().cloned().collect(),
            hierarchy: None,
            dmd: BTreeMap::new(),
            invariants: BTreeMap::new(),
            values: BTreeMap::new(),
            metrics: BTreeMap::new(),
            files: Vec::new(),
            timings_s: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn metric_curves(&mut self, prefix: &str, x: &KernelSeries, reference: &KernelSeries) {
        for (label, r) in reference.components() {
            if let Some(v) = x.get(label) {
                let m = CurveMetrics::between(v, r, reference.grid.dt);
                self.metrics.insert(format!("{prefix}.{label}"), m);
            }
        }
    }
}

/// Output files, held in memory until the run succeeds.
#[derive(Default)]
struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn add(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.files.push((name.to_string(), buf));
        Ok(())
    }

    fn series(&mut self, name: &str, s: &KernelSeries) -> Result<()> {
        self.add(name, |w| s.write_csv(w))
    }

    fn population(&mut self, name: &str, p: &PopulationTrajectory) -> Result<()> {
        self.add(name, |w| p.write_csv(w))
    }

    fn density(&mut self, name: &str, d: &DensityTrajectory) -> Result<()> {
        self.add(name, |w| d.write_csv(w))
    }

    fn spectrum(&mut self, name: &str, s: &KernelSpectrum) -> Result<()> {
        self.add(name, |w| write_spectrum(w, s))
    }

    fn write_all(&self, dir: &Path) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut names = Vec::new();
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            names.push(path.display().to_string());
        }
        Ok(names)
    }
}

fn write_spectrum(w: &mut Vec<u8>, s: &KernelSpectrum) -> Result<()> {
    let err = |e: csv::Error| Error::Parse(e.to_string());
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["omega".to_string()];
    for l in &s.labels {
        header.push(format!("{l}_re"));
        header.push(format!("{l}_im"));
    }
    wr.write_record(&header).map_err(err)?;
    for (j, &om) in s.omega.iter().enumerate() {
        let mut row = vec![fmt_f64(om)];
        for d in &s.data {
            row.push(fmt_f64(d[j].re));
            row.push(fmt_f64(d[j].im));
        }
        wr.write_record(&row).map_err(err)?;
    }
    wr.flush().map_err(|e| Error::Parse(e.to_string()))
}

struct Timer(Instant);

impl Timer {
    fn start() -> Self {
        Timer(Instant::now())
    }

    fn lap(&mut self, report: &mut RunReport, name: &str) {
        *report.timings_s.entry(name.to_string()).or_insert(0.0) += self.0.elapsed().as_secs_f64();
        self.0 = Instant::now();
    }
}

/// Loads, runs and writes outputs for the config at `path`.
pub fn run(path: impl AsRef<Path>) -> Result<RunReport> {
    let cfg = ExperimentConfig::load(path)?;
    run_config(&cfg)
}

/// Runs a validated config and writes its artifacts plus `report.json` into `output.dir`.
pub fn run_config(cfg: &ExperimentConfig) -> Result<RunReport> {
    let total = Instant::now();
    let mut report = RunReport::new(cfg);
    let mut art = Artifacts::default();
    match cfg.experiment {
        Experiment::Kernels => run_kernels(cfg, &mut report, &mut art)?,
        Experiment::Population => run_population(cfg, &mut report, &mut art)?,
        Experiment::Gme => run_gme(cfg, &mut report, &mut art)?,
        Experiment::FloquetKernels => run_floquet(cfg, &mut report, &mut art)?,
        Experiment::DmdFit => run_dmd_fit(cfg, &mut report, &mut art)?,
        Experiment::Compare => run_compare(cfg, &mut report, &mut art)?,
    }
    let echo = cfg.to_toml();
    art.add("config.echo.cfg", |w| {
        w.extend_from_slice(echo.as_bytes());
        Ok(())
    })?;
    for (k, v) in report.invariants.iter().chain(&report.values) {
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite result {k} = {v}")));
        }
    }
    report.files = art.files.iter().map(|(n, _)| n.clone()).collect();
    report.files.push("report.json".into());
    report.timings_s.insert("total".into(), total.elapsed().as_secs_f64());
    let json = report.to_json()?;
    art.add("report.json", |w| {
        w.extend_from_slice(json.as_bytes());
        Ok(())
    })?;
    art.write_all(&cfg.output.dir)?;
    Ok(report)
}

struct Physics {
    h: EtHamiltonian,
    space: HierarchySpace,
}

fn build_space(cfg: &ExperimentConfig, depth: usize) -> Result<HierarchySpace> {
    HierarchySpace::build_with_cap(cfg.expansions()?, depth, cfg.hierarchy.entry_cap)
}

fn physics(cfg: &ExperimentConfig, dt: f64, report: &mut RunReport) -> Result<Physics> {
    let h = cfg.hamiltonian()?;
    let space = build_space(cfg, cfg.hierarchy.depth)?;
    report.hierarchy = Some(HierarchyReport {
        depth: space.depth(),
        n_terms: space.n_terms(),
        n_ado: space.len(),
        n_matsubara: space.expansions().iter().map(|e| e.n_matsubara).collect(),
        truncation_residual: space.expansions().iter().map(|e| e.truncation_residual).collect(),
        rk4_substeps: stable_substeps(&space, &h, dt),
        depth_check: None,
    });
    Ok(Physics { h, space })
}

/// Window of the depth check: `[0, check_t_end]` or the whole kernel grid.
fn check_grid(cfg: &ExperimentConfig, grid: &TimeGrid) -> TimeGrid {
    match cfg.hierarchy.check_t_end {
        Some(t) => grid.truncated(((t / grid.dt).round() as usize + 1).min(grid.len)),
        None => *grid,
    }
}

fn depth_check(
    cfg: &ExperimentConfig,
    report: &mut RunReport,
    coarse: &[KernelSeries],
    extract: impl FnOnce(&HierarchySpace, &TimeGrid) -> Result<Vec<KernelSeries>>,
) -> Result<()> {
    if !cfg.hierarchy.check_depth {
        return Ok(());
    }
    let depth = cfg.hierarchy.depth + 2;
    let space = build_space(cfg, depth)?;
    let window = check_grid(cfg, &coarse[0].grid);
    let fine = extract(&space, &window)?;
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let mut per_component = BTreeMap::new();
    for (i, (c, f)) in coarse.iter().zip(&fine).enumerate() {
        for (label, fv) in f.components() {
            let cv = &c.require(label)?[..window.len];
            let d = cv.iter().zip(fv).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            let s = fv.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let key = if coarse.len() > 1 { format!("k{i}:{label}") } else { label.to_string() };
            per_component.insert(key, if s > 0.0 { d / s } else { d });
            diff = diff.max(d);
            scale = scale.max(s);
        }
    }
    let deviation = if scale > 0.0 { diff / scale } else { diff };
    if let Some(h) = report.hierarchy.as_mut() {
        h.depth_check = Some(DepthCheck {
            depth,
            n_ado: space.len(),
            t_end: window.t_end(),
            deviation,
            per_component,
        });
    }
    Ok(())
}

fn snapshot_count(cfg: &ExperimentConfig, len: usize) -> Result<usize> {
    let m = cfg.grids.snapshots;
    if m > len {
        return Err(Error::Config(vec![format!(
            "grids.snapshots: {m} exceeds the {len} available samples"
        )]));
    }
    Ok(m)
}

/// DMD fit on the first `snapshots` samples of every component of `series`.
fn fit_series(cfg: &ExperimentConfig, series: &KernelSeries) -> Result<(DmdModel, SnapshotSet)> {
    let m = snapshot_count(cfg, series.len())?;
    let data: Vec<Vec<C64>> = series.components().map(|(_, s)| s[..m].to_vec()).collect();
    let snaps = SnapshotSet::from_series(&data, series.grid.dt, series.grid.t0)?;
    let model = dmd::fit(&snaps, cfg.dmd.rank, cfg.dmd.amp_method, cfg.dmd.delay)?;
    Ok((model, snaps))
}

/// Reference kernels, their DMD forecast and the zero-padded snapshot baseline.
struct KernelVariants {
    reference: KernelSeries,
    dmd: KernelSeries,
    snapshots: KernelSeries,
}

fn static_kernels(
    cfg: &ExperimentConfig,
    phys: &Physics,
    kind: ProjectorKind,
    name: &str,
    report: &mut RunReport,
    art: &mut Artifacts,
) -> Result<KernelVariants> {
    let mut timer = Timer::start();
    let grid = TimeGrid::spanning(0.0, cfg.grids.dt, cfg.grids.t_end)?;
    let reference = extract_kernel(&phys.space, &phys.h, kind, &grid)?;
    timer.lap(report, &format!("{name}_reference"));

    let (model, snaps) = fit_series(cfg, &reference)?;
    let dmd_series = KernelSeries::from_dmd(&model, reference.labels().to_vec(), grid)?;
    report.dmd.insert(name.to_string(), DmdReport::new(&model, &snaps));
    let snapshots = reference.truncated(snaps.len()).zero_padded(grid.len);
    timer.lap(report, &format!("{name}_dmd"));

    report.metric_curves(&format!("{name}.dmd"), &dmd_series, &reference);
    report.metric_curves(&format!("{name}.snapshots_zero_padded"), &snapshots, &reference);
    report
        .values
        .insert(format!("{name}.reference.max_imag"), reference.max_imag());

    art.series(&format!("{name}_reference.csv"), &reference)?;
    art.series(&format!("{name}_dmd.csv"), &dmd_series)?;
    art.series(&format!("{name}_snapshots_zero_padded.csv"), &snapshots)?;
    art.spectrum(&format!("{name}_spectrum_reference.csv"), &kernel_fft(&reference))?;
    art.spectrum(&format!("{name}_spectrum_dmd.csv"), &kernel_fft(&dmd_series))?;
    art.spectrum(
        &format!("{name}_spectrum_snapshots_zero_padded.csv"),
        &kernel_fft(&snapshots),
    )?;
    let model_json = model.to_json()?;
    art.add(&format!("{name}_dmd_model.json"), |w| {
        w.extend_from_slice(model_json.as_bytes());
        Ok(())
    })?;

    depth_check(cfg, report, std::slice::from_ref(&reference), |space, window| {
        Ok(vec![extract_kernel(space, &phys.h, kind, window)?])
    })?;
    timer.lap(report, "depth_check");
    if kind == ProjectorKind::System {
        tensor_relations(&reference, report);
    }
    Ok(KernelVariants {
        reference,
        dmd: dmd_series,
        snapshots,
    })
}

/// Conjugation and trace relations of the kernel tensor, measured rather than assumed.
fn tensor_relations(k: &KernelSeries, report: &mut RunReport) {
    let names = ProjectorKind::System.basis_labels();
    fn swap(s: &str) -> &str {
        match s {
            "DA" => "AD",
            "AD" => "DA",
            x => x,
        }
    }
    let get = |b: &str, a: &str| k.get(&tensor_label(b, a)).unwrap_or(&[]);
    let scale = k.components().flat_map(|(_, s)| s.iter().map(|z| z.norm())).fold(0.0, f64::max);
    let mut column_sum: f64 = 0.0;
    let mut pairing: f64 = 0.0;
    let mut self_conj: f64 = 0.0;
    for a in names {
        for (x, y) in get("DD", a).iter().zip(get("AA", a)) {
            column_sum = column_sum.max((x + y).norm());
        }
        for b in names {
            let lhs = get(swap(b), swap(a));
            for (x, y) in lhs.iter().zip(get(b, a)) {
                pairing = pairing.max((x - y.conj()).norm());
            }
        }
        for z in get("DA", a) {
            self_conj = self_conj.max(2.0 * z.im.abs());
        }
    }
    report.invariants.insert("tensor.column_sum".into(), column_sum);
    report.values.insert("tensor.max_abs".into(), scale);
    // K[b̄,ā] = K[b,a]*, the relation that keeps ρ hermitian (K_AD = K_DA* in block form)
    report.values.insert("tensor.conjugate_pairing_defect".into(), pairing / scale);
    // K_DA = K_DA* entrywise
    report.values.insert("tensor.DA_self_conjugacy_defect".into(), self_conj / scale);
}

fn direct_reduced(phys: &Physics, grid: &TimeGrid, report: &mut RunReport) -> Result<Vec<Block>> {
    let init = thermal_donor_initial(&phys.space);
    let mut rho = Vec::with_capacity(grid.len);
    let mut trace: f64 = 0.0;
    let mut herm: f64 = 0.0;
    propagate_observe(&phys.space, &phys.h, &init, grid, |_, s| {
        trace = trace.max((s.trace() - 1.0).norm());
        herm = herm.max(s.hermiticity_defect());
        rho.push(s.rho());
        Ok(())
    })?;
    report.invariants.insert("hierarchy.trace_drift".into(), trace);
    report.invariants.insert("hierarchy.hermiticity_defect".into(), herm);
    Ok(rho)
}

fn donor_trajectory(grid: TimeGrid, rho: &[Block]) -> PopulationTrajectory {
    PopulationTrajectory {
        grid,
        p_d: rho.iter().map(|r| r[0].re).collect(),
    }
}

fn record_drift(report: &mut RunReport, name: &str, d: &DensityDrift) {
    report.invariants.insert(format!("{name}.trace_drift"), d.max_trace_error);
    report.invariants.insert(format!("{name}.hermiticity_defect"), d.max_hermiticity_error);
    report.values.insert(format!("{name}.flagged"), if d.flagged { 1.0 } else { 0.0 });
}

fn population_metrics(report: &mut RunReport, name: &str, p: &PopulationTrajectory, reference: &PopulationTrajectory) {
    let m = CurveMetrics::real(&p.p_d, &reference.p_d, p.grid.dt);
    report.metrics.insert(format!("population.{name}.P_D"), m);
}

fn run_kernels(cfg: &ExperimentConfig, report: &mut RunReport, art: &mut Artifacts) -> Result<()> {
    let phys = physics(cfg, cfg.grids.dt, report)?;
    let name = match cfg.kernels.projector {
        ProjectorKind::Population => "kernels",
        ProjectorKind::System => "tensor",
    };
    static_kernels(cfg, &phys, cfg.kernels.projector, name, report, art)?;
    Ok(())
}

fn run_population(cfg: &ExperimentConfig, report: &mut RunReport, art: &mut Artifacts) -> Result<()> {
    let phys = physics(cfg, cfg.grids.dt, report)?;
    let k = static_kernels(cfg, &phys, ProjectorKind::Population, "kernels", report, art)?;
    let mut timer = Timer::start();
    let grid = k.reference.grid;
    let direct = donor_trajectory(grid, &direct_reduced(&phys, &grid, report)?);
    timer.lap(report, "direct_propagation");
    let reference = gme::solve_population(&k.reference, 1.0, &grid)?;
    let dmd = gme::solve_population(&k.dmd, 1.0, &grid)?;
    let snaps = gme::solve_population(&k.snapshots, 1.0, &grid)?;
    timer.lap(report, "rate_equation");
    for (name, p) in [("reference", &reference), ("dmd", &dmd), ("snapshots_zero_padded", &snaps)] {
        population_metrics(report, name, p, &direct);
        art.population(&format!("population_{name}.csv"), p)?;
    }
    art.population("population_direct.csv", &direct)?;
    Ok(())
}

fn run_gme(cfg: &ExperimentConfig, report: &mut RunReport, art: &mut Artifacts) -> Result<()> {
    let phys = physics(cfg, cfg.grids.dt, report)?;
    let k = static_kernels(cfg, &phys, ProjectorKind::System, "tensor", report, art)?;
    let mut timer = Timer::start();
    let grid = k.reference.grid;
    let pop_kernel = extract_kernel(&phys.space, &phys.h, ProjectorKind::Population, &grid)?;
    let route = gme::solve_population(&pop_kernel, 1.0, &grid)?;
    timer.lap(report, "population_route");
    let direct_rho = direct_reduced(&phys, &grid, report)?;
    let direct = donor_trajectory(grid, &direct_rho);
    timer.lap(report, "direct_propagation");

    let c = |re: f64| C64::new(re, 0.0);
    let rho0 = [c(1.0), c(0.0), c(0.0), c(0.0)];
    let mut coherence = Vec::new();
    for (name, kern) in [("reference", &k.reference), ("dmd", &k.dmd), ("snapshots_zero_padded", &k.snapshots)] {
        let traj = gme::solve_gme(kern, &phys.h, rho0, &grid)?;
        record_drift(report, &format!("gme.{name}"), &traj.drift);
        let p = donor_trajectory(grid, &traj.rho);
        report.values.insert(format!("gme.{name}.rho_DD_vs_population_route"), p.max_abs_diff(&route.p_d));
        population_metrics(report, &format!("gme_{name}"), &p, &direct);
        let im_da: Vec<f64> = traj.rho.iter().map(|r| r[1].im).collect();
        report.values.insert(format!("gme.{name}.final_abs_im_rho_DA"), im_da[grid.len - 1].abs());
        coherence.push(im_da);
        art.density(&format!("density_{name}.csv"), &traj)?;
    }
    let direct_im: Vec<f64> = direct_rho.iter().map(|r| r[1].im).collect();
    let max_diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    report.values.insert("gme.coherence_dmd_vs_reference".into(), max_diff(&coherence[1], &coherence[0]));
    report.values.insert("gme.coherence_reference_vs_direct".into(), max_diff(&coherence[0], &direct_im));
    report.values.insert("direct.final_abs_im_rho_DA".into(), direct_im[grid.len - 1].abs());
    timer.lap(report, "gme");
    population_metrics(report, "population_route", &route, &direct);
    art.population("population_route.csv", &route)?;
    art.population("population_direct.csv", &direct)?;
    Ok(())
}

fn harmonic_label(n: usize, label: &str) -> String {
    format!("k{n}_{}", label.trim_start_matches("k_"))
}

/// Harmonics stacked into one series (`k0_DD, k0_AD, k1_DD, ...`).
fn stack_harmonics(set: &FloquetKernelSet) -> Result<KernelSeries> {
    let mut labels = Vec::new();
    let mut data = Vec::new();
    for (n, h) in set.harmonics().iter().enumerate() {
        for (label, s) in h.components() {
            labels.push(harmonic_label(n, label));
            data.push(s.to_vec());
        }
    }
    KernelSeries::new(set.tau_grid, labels, data)
}

fn unstack_harmonics(stacked: &KernelSeries, like: &FloquetKernelSet) -> Result<Vec<KernelSeries>> {
    like.harmonics()
        .iter()
        .enumerate()
        .map(|(n, h)| {
            let data = h
                .labels()
                .iter()
                .map(|l| stacked.require(&harmonic_label(n, l)).map(<[C64]>::to_vec))
                .collect::<Result<_>>()?;
            KernelSeries::new(stacked.grid, h.labels().to_vec(), data)
        })
        .collect()
}

fn run_floquet(cfg: &ExperimentConfig, report: &mut RunReport, art: &mut Artifacts) -> Result<()> {
    let h = cfg.hamiltonian()?;
    let omega = h
        .drive_frequency()
        .ok_or_else(|| Error::Config(vec!["system.omega: floquet_kernels needs a driven system".into()]))?;
    let period = std::f64::consts::TAU / omega;
    let dt = snap_dt(period, cfg.grids.dt);
    let phys = physics(cfg, dt, report)?;
    let (n_max, n_phase) = (cfg.floquet.n_max, cfg.floquet.n_phase);
    report.values.insert("floquet.dt".into(), dt);
    report.values.insert("floquet.period".into(), period);

    let mut timer = Timer::start();
    let grid = TimeGrid::spanning(0.0, dt, cfg.grids.t_end)?;
    let set = extract_floquet_kernels(&phys.space, &phys.h, omega, &grid, n_max, n_phase)?;
    timer.lap(report, "floquet_reference");

    let by_n: Vec<f64> = (0..=n_max)
        .map(|n| set.harmonics()[n].components().flat_map(|(_, s)| s.iter().map(|z| z.norm())).fold(0.0, f64::max))
        .collect();
    for (n, m) in by_n.iter().enumerate() {
        report.values.insert(format!("floquet.max_abs_k{n}"), *m);
        for l in set.labels() {
            report
                .values
                .insert(format!("floquet.max_abs_{}", harmonic_label(n, l)), set.harmonics()[n].max_abs(l).unwrap_or(0.0));
        }
        art.series(&format!("floquet_k{n}.csv"), &set.harmonics()[n])?;
    }
    let decreasing = by_n.windows(2).all(|w| w[1] < w[0]);
    report.values.insert("floquet.strictly_decreasing".into(), if decreasing { 1.0 } else { 0.0 });
    let max_imag_n1 = set.harmonics().iter().skip(1).map(KernelSeries::max_imag).fold(0.0, f64::max);
    report.values.insert("floquet.max_imag_n_ge_1".into(), max_imag_n1);

    if n_max >= 1 {
        let km1 = set.harmonic(-1)?;
        let k1 = &set.harmonics()[1];
        let dev = km1
            .components()
            .zip(k1.components())
            .flat_map(|((_, a), (_, b))| a.iter().zip(b).map(|(x, y)| (x - y.conj()).norm()))
            .fold(0.0, f64::max);
        report.invariants.insert("floquet.k_minus1_vs_conj_k1".into(), dev);
        art.series("floquet_k_minus1.csv", &km1)?;
    }

    // populations
    let direct = donor_trajectory(grid, &direct_reduced(&phys, &grid, report)?);
    timer.lap(report, "direct_propagation");
    let pop = gme::solve_population_floquet(&set, n_max, 1.0, &grid)?;
    population_metrics(report, "floquet", &pop, &direct);
    art.population("population_direct.csv", &direct)?;
    art.population("population_floquet.csv", &pop)?;
    if n_max >= 1 {
        let lower = gme::solve_population_floquet(&set, n_max - 1, 1.0, &grid)?;
        report.values.insert("floquet.truncation_change".into(), lower.max_abs_diff(&pop.p_d));
        report.values.insert("floquet.top_harmonic_relative".into(), by_n[n_max] / by_n[0]);
        art.population(&format!("population_floquet_nmax{}.csv", n_max - 1), &lower)?;
    }
    let steps = (period / dt).round() as usize;
    let start = (10.0 * period / dt).round() as usize;
    let cycle = |p: &[f64]| -> Option<f64> {
        (start + steps < p.len())
            .then(|| (start..p.len() - steps).map(|k| (p[k + steps] - p[k]).abs()).fold(0.0, f64::max))
    };
    match cycle(&pop.p_d) {
        Some(v) => {
            report.values.insert("floquet.limit_cycle_deviation".into(), v);
            if let Some(d) = cycle(&direct.p_d) {
                report.values.insert("direct.limit_cycle_deviation".into(), d);
            }
        }
        None => log::warn!("grids.t_end is shorter than 11 periods; limit cycle not measured"),
    }
    timer.lap(report, "rate_equation");

    // DMD forecast of the harmonics from the snapshot window
    let stacked = stack_harmonics(&set)?;
    let (model, snaps) = fit_series(cfg, &stacked)?;
    report.dmd.insert("floquet".into(), DmdReport::new(&model, &snaps));
    let predicted = KernelSeries::from_dmd(&model, stacked.labels().to_vec(), grid)?;
    report.metric_curves("floquet.dmd", &predicted, &stacked);
    let dmd_set = FloquetKernelSet::from_harmonics(unstack_harmonics(&predicted, &set)?, omega)?;
    for (n, hk) in dmd_set.harmonics().iter().enumerate() {
        art.series(&format!("floquet_dmd_k{n}.csv"), hk)?;
    }
    let pop_dmd = gme::solve_population_floquet(&dmd_set, n_max, 1.0, &grid)?;
    population_metrics(report, "floquet_dmd", &pop_dmd, &direct);
    art.population("population_floquet_dmd.csv", &pop_dmd)?;
    timer.lap(report, "floquet_dmd");

    let harmonics = set.harmonics().to_vec();
    depth_check(cfg, report, &harmonics, |space, window| {
        let s = extract_floquet_kernels(space, &phys.h, omega, window, n_max, n_phase)?;
        Ok(s.harmonics().to_vec())
    })?;
    timer.lap(report, "depth_check");
    Ok(())
}

fn input_path(p: &Option<PathBuf>, field: &str) -> Result<PathBuf> {
    p.clone().ok_or_else(|| Error::Config(vec![format!("{field}: required")]))
}

fn run_dmd_fit(cfg: &ExperimentConfig, report: &mut RunReport, art: &mut Artifacts) -> Result<()> {
    let path = input_path(&cfg.inputs.series, "inputs.series")?;
    let table = Table::load(&path)?;
    if (table.grid.dt - cfg.grids.dt).abs() > 1e-9 * cfg.grids.dt {
        return Err(Error::Config(vec![format!(
            "grids.dt: {} does not match the input series step {}",
            cfg.grids.dt, table.grid.dt
        )]));
    }
    let labels: Vec<String> = table.columns.iter().map(|(n, _)| n.clone()).collect();
    let data = table.columns.iter().map(|(_, v)| v.clone()).collect();
    let series = KernelSeries::new(table.grid, labels, data)?;
    let (model, snaps) = fit_series(cfg, &series)?;
    report.dmd.insert("series".into(), DmdReport::new(&model, &snaps));
    let span = cfg.grids.t_end.max(table.grid.t_end() - table.grid.t0);
    let grid = TimeGrid::spanning(table.grid.t0, table.grid.dt, span)?;
    let predicted = KernelSeries::from_dmd(&model, series.labels().to_vec(), grid)?;
    report.metric_curves("series.dmd", &predicted, &series);
    art.series("dmd_prediction.csv", &predicted)?;
    let model_json = model.to_json()?;
    art.add("dmd_model.json", |w| {
        w.extend_from_slice(model_json.as_bytes());
        Ok(())
    })
}

fn run_compare(cfg: &ExperimentConfig, report: &mut RunReport, art: &mut Artifacts) -> Result<()> {
    let a = input_path(&cfg.inputs.a, "inputs.a")?;
    let b = input_path(&cfg.inputs.b, "inputs.b")?;
    let cmp = compare_files(&a, &b)?;
    for (name, m) in &cmp.columns {
        report.metrics.insert(format!("compare.{name}"), *m);
    }
    let json = serde_json::to_string_pretty(&cmp)?;
    art.add("compare.json", |w| {
        w.extend_from_slice(json.as_bytes());
        Ok(())
    })
}
