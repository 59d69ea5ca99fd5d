//! The five analysis commands: `compute_*` functions return data, and
//! [`run_command`] writes result files and a manifest.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use dipole_core::dynamics::{
    evolve_at, product_state, pure_density, uniform_times, EvolveOptions, LindbladSystem, Physicality, Trajectory,
};
use dipole_core::model::{grid_values, validate_scenario, ProtocolSpec, ScenarioSpec, SweepSpec, ValidatedScenario};
use dipole_core::operators::sigma;
use dipole_core::protocols::{min_fidelity, run_raman_protocol, FidelityResult, RamanTransfer, DEFAULT_RANDOM_STATES, DEFAULT_SEED};
use dipole_core::spectra::{
    detuning_grid, dressed_states, find_extrema, spectrum_analytic, DressedSpectrum, Extremum, Method, ProbeProblem,
    SpectrumResult, DEFAULT_GRID,
};
use dipole_core::{Error as CoreError, C64};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{Result, SimError};
use crate::output::{fmt_f64, sibling, write_csv, write_json, RunManifest, Tolerances};
use crate::scenario::{load_scenario, set_path, spec_from_document};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Dressed,
    Evolve,
    Protocol,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Dressed => "dressed",
            Command::Evolve => "evolve",
            Command::Protocol => "protocol",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// `lo:hi:n`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl std::str::FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, n] = parts[..] else {
            return Err(format!("grid `{s}` is not of the form lo:hi:n"));
        };
        let lo: f64 = lo.trim().parse().map_err(|_| format!("bad grid start `{lo}`"))?;
        let hi: f64 = hi.trim().parse().map_err(|_| format!("bad grid end `{hi}`"))?;
        let n: usize = n.trim().parse().map_err(|_| format!("bad grid size `{n}`"))?;
        if !(lo.is_finite() && hi.is_finite()) || n == 0 || (n > 1 && lo >= hi) {
            return Err(format!("grid `{s}` is empty"));
        }
        Ok(Grid { lo, hi, n })
    }
}

#[derive(Debug, Clone)]
pub struct Request {
    pub command: Command,
    pub scenario_path: PathBuf,
    pub overrides: Vec<String>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub grid: Option<Grid>,
    pub jobs: Option<usize>,
    /// Spectrum evaluation path.
    pub method: Method,
}

impl Request {
    pub fn new(command: Command, scenario_path: impl Into<PathBuf>) -> Self {
        Self {
            command,
            scenario_path: scenario_path.into(),
            overrides: Vec::new(),
            out: None,
            format: Format::Csv,
            grid: None,
            jobs: None,
            method: Method::Numeric,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    pub manifest: PathBuf,
    pub warnings: Vec<String>,
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| SimError::Usage(format!("cannot start worker pool: {e}")))
}

fn tolerances(opts: &EvolveOptions) -> Tolerances {
    Tolerances { rtol: opts.integrator.rtol, atol: opts.integrator.atol }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumOutput {
    pub spectrum: SpectrumResult,
    pub extrema: Vec<Extremum>,
}

/// Probe spectrum over detunings `ν₁ − ω_ul`, evaluated in parallel.
pub fn compute_spectrum(v: &ValidatedScenario, detunings: &[f64], method: Method) -> Result<SpectrumOutput> {
    let spectrum = match method {
        Method::Analytic => spectrum_analytic(v, detunings)?,
        Method::Numeric => {
            let pp = ProbeProblem::new(v)?;
            let w = pp.omega_ul();
            let nu1: Vec<f64> = detunings.iter().map(|d| w + d).collect();
            let chi = nu1.par_iter().map(|&nu| pp.response(nu)).collect::<Result<Vec<C64>, CoreError>>()?;
            SpectrumResult { nu1, detuning: detunings.to_vec(), chi, method }
        }
    };
    let extrema = find_extrema(&spectrum.detuning, &spectrum.absorption())?;
    Ok(SpectrumOutput { spectrum, extrema })
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolveOutput {
    pub times: Vec<f64>,
    pub observables: Vec<(String, Vec<C64>)>,
    pub trace_error: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

impl EvolveOutput {
    fn from_trajectory(tr: &Trajectory) -> Self {
        let Physicality { trace_error, hermiticity_error, min_eigenvalue } = tr.physicality;
        Self { times: tr.times.clone(), observables: tr.observables.clone(), trace_error, hermiticity_error, min_eigenvalue }
    }

    fn summary(&self) -> serde_json::Value {
        json!({
            "trace_error": self.trace_error,
            "hermiticity_error": self.hermiticity_error,
            "min_eigenvalue": self.min_eigenvalue,
        })
    }
}

/// Evolves the scenario's initial state and records its observables.
pub fn compute_evolution(v: &ValidatedScenario, opts: &EvolveOptions) -> Result<Trajectory> {
    let spec = v.spec();
    let evo = spec.evolution.as_ref().ok_or_else(|| CoreError::InvalidParameter("scenario has no `evolution` section".into()))?;
    let init = spec.initial.as_ref().ok_or_else(|| CoreError::InvalidParameter("scenario has no `initial` state".into()))?;
    let psi0 = product_state(v, init)?;
    let sys = LindbladSystem::from_scenario(v)?;
    let mut tr = evolve_at(&pure_density(&psi0), &sys, 0.0, &uniform_times(0.0, evo.t_end, evo.samples), opts)?;
    for o in &evo.observables {
        let op = sigma(v, &o.atom, &o.ket, &o.bra)?;
        tr.observe(&o.name, &op)?;
    }
    Ok(tr)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub fidelity: f64,
    pub analytic: f64,
    pub argmin: String,
}

/// `spec` with the scalar at `path` replaced by `value`.
pub fn with_parameter(spec: &ScenarioSpec, path: &str, value: f64) -> Result<ScenarioSpec> {
    let mut doc = serde_json::to_value(spec).expect("serializable");
    set_path(&mut doc, path, json!(value))?;
    spec_from_document(doc, Path::new(path))
}

/// Minimal fidelity of the scenario's gate protocol over the sweep grid.
/// Grid points run in parallel; rows keep grid order.
pub fn compute_sweep(spec: &ScenarioSpec, sweep: &SweepSpec, opts: &EvolveOptions) -> Result<Vec<SweepRow>> {
    let values = sweep.values();
    let specs = values.iter().map(|&x| with_parameter(spec, &sweep.parameter, x)).collect::<Result<Vec<_>>>()?;
    specs
        .par_iter()
        .zip(&values)
        .map(|(s, &value)| {
            let v = validate_scenario(s)?;
            let protocol = gate_protocol(&v)?;
            let f = min_fidelity(&v, protocol, None, opts)?;
            Ok(SweepRow { value, fidelity: f.fidelity, analytic: f.analytic, argmin: f.argmin_label })
        })
        .collect()
}

fn gate_protocol(v: &ValidatedScenario) -> Result<&ProtocolSpec> {
    match &v.spec().protocol {
        Some(p @ (ProtocolSpec::Cap { .. } | ProtocolSpec::Cpi { .. })) => Ok(p),
        _ => Err(CoreError::InvalidParameter("scenario has no `cap` or `cpi` protocol".into()).into()),
    }
}

fn complex_columns(name: &str) -> [String; 2] {
    [format!("{name}_re"), format!("{name}_im")]
}

/// Runs a request and writes its result file(s) and a manifest.
pub fn run_command(req: &Request) -> Result<Outcome> {
    let start = Instant::now();
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let spec = load_scenario(&req.scenario_path, &req.overrides)?;
    let v = validate_scenario(&spec)?;
    let opts = EvolveOptions::default();
    let mut warnings: Vec<String> = v.warnings().iter().map(|d| d.to_string()).collect();
    if req.grid.is_some() && !matches!(req.command, Command::Spectrum | Command::Sweep) {
        return Err(SimError::Usage(format!("--grid does not apply to `{}`", req.command.name())));
    }

    let out = req.out.clone().unwrap_or_else(|| {
        let stem = req.scenario_path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
        PathBuf::from(format!("{stem}.{}.{}", req.command.name(), req.format.extension()))
    });
    let mut outputs = vec![out.clone()];
    let pool = pool(req.jobs)?;
    let metadata;
    let csv = req.format == Format::Csv;

    match req.command {
        Command::Spectrum => {
            let (lo, hi, n) = req.grid.map(|g| (g.lo, g.hi, g.n)).unwrap_or(DEFAULT_GRID);
            let grid = detuning_grid(lo, hi, n);
            let res = pool.install(|| compute_spectrum(&v, &grid, req.method))?;
            if let Some(m) = res.spectrum.gain_violation() {
                warnings.push(format!("warning: negative absorption {m:e}"));
            }
            if csv {
                let header = ["nu1_minus_omega_ac_over_gamma", "re_chi", "im_chi"].map(String::from);
                let rows: Vec<Vec<String>> = res
                    .spectrum
                    .detuning
                    .iter()
                    .zip(&res.spectrum.chi)
                    .map(|(d, z)| vec![fmt_f64(*d), fmt_f64(z.re), fmt_f64(z.im)])
                    .collect();
                write_csv(&out, &header, &rows)?;
                let ext = sibling(&out, "extrema.json");
                write_json(&ext, &res.extrema)?;
                outputs.push(ext);
            } else {
                write_json(&out, &res)?;
            }
            metadata = json!({
                "grid": {"lo": lo, "hi": hi, "n": n},
                "method": res.spectrum.method,
                "probe_amplitude": spec.probe.as_ref().map(|p| [p.amplitude.re, p.amplitude.im]),
            });
        }
        Command::Dressed => {
            let d: DressedSpectrum = dressed_states(&v)?;
            if csv {
                let mut header = vec!["eigenvalue".to_string()];
                header.extend(d.basis.iter().flat_map(|b| complex_columns(b)));
                let rows: Vec<Vec<String>> = d
                    .eigenvalues
                    .iter()
                    .zip(&d.eigenvectors)
                    .map(|(e, vec)| {
                        let mut r = vec![fmt_f64(*e)];
                        r.extend(vec.iter().flat_map(|z| [fmt_f64(z.re), fmt_f64(z.im)]));
                        r
                    })
                    .collect();
                write_csv(&out, &header, &rows)?;
            } else {
                write_json(&out, &d)?;
            }
            metadata = json!({"manifold": d.basis});
        }
        Command::Evolve => {
            let tr = compute_evolution(&v, &opts)?;
            write_trajectory(&out, csv, &tr)?;
            metadata = json!({"tolerances": tolerances(&opts), "physicality": EvolveOutput::from_trajectory(&tr).summary()});
        }
        Command::Protocol => match gate_protocol(&v) {
            Ok(protocol) => {
                let f: FidelityResult = min_fidelity(&v, protocol, None, &opts)?;
                warnings.extend(f.warnings.iter().map(|d| d.to_string()));
                if csv {
                    let header = ["initial_state", "fidelity"].map(String::from);
                    let rows: Vec<Vec<String>> =
                        f.labels.iter().zip(&f.fidelities).map(|(l, x)| vec![l.clone(), fmt_f64(*x)]).collect();
                    write_csv(&out, &header, &rows)?;
                    let summary = sibling(&out, "summary.json");
                    write_json(&summary, &f)?;
                    outputs.push(summary);
                } else {
                    write_json(&out, &f)?;
                }
                metadata = json!({
                    "seed": DEFAULT_SEED,
                    "random_states": DEFAULT_RANDOM_STATES,
                    "tolerances": tolerances(&opts),
                    "min_fidelity": f.fidelity,
                    "analytic": f.analytic,
                });
            }
            Err(_) => {
                let r: RamanTransfer = run_raman_protocol(&v, &opts)?;
                write_trajectory(&out, csv, &r.trajectory)?;
                let summary = json!({
                    "extremum": r.extremum,
                    "xi_cb": [r.xi.0.re, r.xi.0.im],
                    "xi_bc": [r.xi.1.re, r.xi.1.im],
                    "excited_population": r.excited_population,
                });
                let path = sibling(&out, "summary.json");
                write_json(&path, &summary)?;
                outputs.push(path);
                metadata = json!({
                    "tolerances": tolerances(&opts),
                    "physicality": EvolveOutput::from_trajectory(&r.trajectory).summary(),
                    "transfer": summary,
                });
            }
        },
        Command::Sweep => {
            let mut sweep = spec
                .sweep
                .clone()
                .ok_or_else(|| CoreError::InvalidParameter("scenario has no `sweep` section".into()))?;
            if let Some(g) = req.grid {
                sweep.lo = g.lo;
                sweep.hi = g.hi;
                sweep.n = g.n;
            }
            let rows = pool.install(|| compute_sweep(&spec, &sweep, &opts))?;
            if csv {
                let header = [sweep.parameter.as_str(), "fidelity", "analytic", "argmin"].map(String::from);
                let table: Vec<Vec<String>> = rows
                    .iter()
                    .map(|r| vec![fmt_f64(r.value), fmt_f64(r.fidelity), fmt_f64(r.analytic), r.argmin.clone()])
                    .collect();
                write_csv(&out, &header, &table)?;
            } else {
                write_json(&out, &json!({"parameter": sweep.parameter, "rows": rows}))?;
            }
            metadata = json!({
                "parameter": sweep.parameter,
                "grid": grid_values(sweep.lo, sweep.hi, sweep.n, sweep.scale),
                "scale": sweep.scale,
                "seed": DEFAULT_SEED,
                "random_states": DEFAULT_RANDOM_STATES,
                "tolerances": tolerances(&opts),
            });
        }
    }

    let manifest_path = sibling(&out, "manifest.json");
    let manifest = RunManifest {
        tool: "sim",
        version: env!("CARGO_PKG_VERSION"),
        command: req.command.name().into(),
        scenario_path: req.scenario_path.clone(),
        overrides: req.overrides.clone(),
        scenario: spec,
        outputs: outputs.clone(),
        metadata,
        warnings: warnings.clone(),
        started_unix_seconds: started,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    write_json(&manifest_path, &manifest)?;
    Ok(Outcome { outputs, manifest: manifest_path, warnings })
}

fn write_trajectory(out: &Path, csv: bool, tr: &Trajectory) -> Result<()> {
    if csv {
        let mut header = vec!["time".to_string()];
        header.extend(tr.observables.iter().flat_map(|(n, _)| complex_columns(n)));
        let rows: Vec<Vec<String>> = tr
            .times
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let mut r = vec![fmt_f64(*t)];
                r.extend(tr.observables.iter().flat_map(|(_, s)| [fmt_f64(s[k].re), fmt_f64(s[k].im)]));
                r
            })
            .collect();
        write_csv(out, &header, &rows)
    } else {
        write_json(out, &EvolveOutput::from_trajectory(tr))
    }
}
