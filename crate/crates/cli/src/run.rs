//! Protocol drivers. Each turns a resolved [`RunConfig`] into a list of
//! named output files; writing them is left to the caller.

use clickcraft_core::fock::{self, StateSpec};
use clickcraft_core::pfunc::{GridSpec, PhaseSpaceMixture};
use clickcraft_core::povm::{self, DetectorConfig};
use clickcraft_core::processes::{self, AdditionSpec, AmplifySpec, SubtractionSpec};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Clicks, Format, Protocol, RunConfig};
use crate::error::CliError;
use crate::format::{csv, json, percent, sci, Percent, Sci};

/// Truncation tolerance used when the cutoff is not given explicitly.
const AUTO_TAIL_TOL: f64 = 1e-12;
const DEFAULT_ERRORBOUND_CUTOFF: usize = 512;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

pub fn execute(protocol: Protocol, cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    if let Some(p) = cfg.protocol {
        if p != protocol {
            return Err(CliError::schema(format!("config is written for `{p}`, not `{protocol}`")));
        }
    }
    if let Some(grid) = &cfg.grid {
        grid.validate()?;
    }
    let out = Emitter { protocol, format: cfg.output.format };
    match protocol {
        Protocol::Herald => herald(cfg, &out),
        Protocol::Subtract => subtract(cfg, &out),
        Protocol::Add => add(cfg, &out),
        Protocol::Amplify => amplify(cfg, &out),
        Protocol::Clickstats => clickstats(cfg, &out),
        Protocol::Errorbound => errorbound(cfg, &out),
    }
}

/// Manifest echoing the resolved parameters and the files produced.
pub fn manifest(protocol: Protocol, cfg: &RunConfig, artifacts: &[Artifact]) -> Result<Artifact, CliError> {
    #[derive(Serialize)]
    struct Manifest<'a> {
        tool: &'static str,
        version: &'static str,
        core_version: &'static str,
        protocol: Protocol,
        config: &'a RunConfig,
        outputs: Vec<&'a str>,
    }
    let mut config = cfg.clone();
    config.protocol = Some(protocol);
    let m = Manifest {
        tool: "clickcraft",
        version: env!("CARGO_PKG_VERSION"),
        core_version: clickcraft_core::VERSION,
        protocol,
        config: &config,
        outputs: artifacts.iter().map(|a| a.name.as_str()).collect(),
    };
    Ok(Artifact { name: "manifest.json".into(), contents: json(&m)? })
}

struct Emitter {
    protocol: Protocol,
    format: Format,
}

impl Emitter {
    fn name(&self, stem: &str) -> String {
        format!("{}_{stem}.{}", self.protocol, self.format.extension())
    }

    /// One table, as CSV rows or as a JSON array of records.
    fn table<R: Serialize>(&self, stem: &str, header: &[&str], records: &[R], cells: impl Fn(&R) -> Vec<String>) -> Result<Artifact, CliError> {
        let contents = match self.format {
            Format::Csv => csv(header, &records.iter().map(cells).collect::<Vec<_>>()),
            Format::Json => {
                #[derive(Serialize)]
                struct TableOut<'a, R> {
                    protocol: Protocol,
                    columns: &'a [&'a str],
                    rows: &'a [R],
                }
                json(&TableOut { protocol: self.protocol, columns: header, rows: records })?
            }
        };
        Ok(Artifact { name: self.name(stem), contents })
    }

    fn grid(&self, stem: &str, mixture: &PhaseSpaceMixture<f64>, spec: &GridSpec) -> Result<Artifact, CliError> {
        let values = mixture.evaluate_grid(spec)?;
        let contents = match self.format {
            Format::Csv => {
                let mut rows = Vec::with_capacity(spec.n_re * spec.n_im);
                for j in 0..spec.n_im {
                    for i in 0..spec.n_re {
                        rows.push(vec![sci(spec.re_at(i)), sci(spec.im_at(j)), sci(values.get(i, j))]);
                    }
                }
                csv(&["re", "im", "value"], &rows)
            }
            Format::Json => {
                #[derive(Serialize)]
                struct GridOut<'a> {
                    protocol: Protocol,
                    grid: &'a GridSpec,
                    layout: &'static str,
                    values: Vec<Sci>,
                }
                json(&GridOut {
                    protocol: self.protocol,
                    grid: spec,
                    layout: "row-major, one row per imaginary coordinate, cell centers",
                    values: values.values.iter().map(|&v| Sci(v)).collect(),
                })?
            }
        };
        Ok(Artifact { name: self.name(stem), contents })
    }
}

#[derive(Serialize)]
struct ProbabilityRow {
    k: usize,
    probability: Sci,
    percent: Percent,
}

fn probability_rows(out: &Emitter, rows: &[ProbabilityRow]) -> Result<Artifact, CliError> {
    out.table("probabilities", &["k", "probability", "percent"], rows, |r| {
        vec![r.k.to_string(), sci(r.probability.0), percent(r.percent.0)]
    })
}

fn two_mode_cutoffs(cfg: &RunConfig, input: &StateSpec) -> Result<(usize, usize), CliError> {
    let d = match cfg.cutoff {
        Some(d) => d,
        None => fock::suggest_cutoff(input, AUTO_TAIL_TOL)?,
    };
    Ok(match input {
        StateSpec::PhaseDiffusedTmsv { .. } => (d, d),
        _ => (d, 1),
    })
}

fn herald(cfg: &RunConfig, out: &Emitter) -> Result<Vec<Artifact>, CliError> {
    let det = cfg.detector()?;
    let input = cfg.input()?;
    let ks = cfg.clicks.single(det.n())?;
    let pair = fock::make_two_mode_state(&input, two_mode_cutoffs(cfg, &input)?)?;

    #[derive(Serialize)]
    struct DistRow {
        k: usize,
        n: usize,
        unnormalized: Sci,
        normalized: Sci,
    }
    let mut probs = Vec::new();
    let mut dist = Vec::new();
    for &k in &ks {
        let o = processes::herald(&pair, &det, k)?;
        for (n, p) in fock::photon_distribution(&o.state).into_iter().enumerate() {
            let normalized = if o.probability > 0.0 { p / o.probability } else { 0.0 };
            dist.push(DistRow { k, n, unnormalized: Sci(p), normalized: Sci(normalized) });
        }
        probs.push(ProbabilityRow { k, probability: Sci(o.probability), percent: Percent(o.probability) });
    }
    Ok(vec![
        probability_rows(out, &probs)?,
        out.table("distribution", &["k", "n", "unnormalized", "normalized"], &dist, |r| {
            vec![r.k.to_string(), r.n.to_string(), sci(r.unnormalized.0), sci(r.normalized.0)]
        })?,
    ])
}

/// Phase-space form of the single-mode input states.
pub fn input_mixture(spec: &StateSpec) -> Result<PhaseSpaceMixture<f64>, CliError> {
    match *spec {
        StateSpec::Vacuum => Ok(PhaseSpaceMixture::coherent(num_complex::Complex64::new(0.0, 0.0))),
        StateSpec::Coherent { alpha } => Ok(PhaseSpaceMixture::coherent(alpha)),
        StateSpec::Thermal { nbar } => Ok(PhaseSpaceMixture::thermal(nbar)?),
        StateSpec::DisplacedThermal { alpha, nbar } => Ok(PhaseSpaceMixture::displaced_thermal(alpha, nbar)?),
        StateSpec::Fock { .. } | StateSpec::PhaseDiffusedTmsv { .. } => Err(CliError::invalid(
            "the phase-space protocols take coherent, thermal or displaced thermal inputs",
        )),
    }
}

/// Probabilities and (optionally) normalized output grids for a
/// single-detector phase-space protocol.
fn single_detector<F>(cfg: &RunConfig, out: &Emitter, n: usize, run: F) -> Result<Vec<Artifact>, CliError>
where
    F: Fn(&PhaseSpaceMixture<f64>, usize) -> Result<clickcraft_core::ProcessOutcome<PhaseSpaceMixture<f64>>, CliError>,
{
    let p_in = input_mixture(&cfg.input()?)?;
    let ks = cfg.clicks.single(n)?;
    let outcomes = ks.iter().map(|&k| run(&p_in, k)).collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<_> = ks
        .iter()
        .zip(&outcomes)
        .map(|(&k, o)| ProbabilityRow { k, probability: Sci(o.probability), percent: Percent(o.probability) })
        .collect();
    let mut files = vec![probability_rows(out, &rows)?];
    if let Some(grid) = &cfg.grid {
        for (&k, o) in ks.iter().zip(&outcomes) {
            let state = o.normalize().unwrap_or_else(|| o.state.clone());
            files.push(out.grid(&format!("grid_k{k}"), &state, grid)?);
        }
    }
    Ok(files)
}

fn subtract(cfg: &RunConfig, out: &Emitter) -> Result<Vec<Artifact>, CliError> {
    let det = cfg.detector()?;
    let spec = SubtractionSpec::new(cfg.beam_splitter()?, det, 0)?;
    single_detector(cfg, out, det.n(), |p, k| Ok(processes::subtract(p, &spec.with_clicks(k)?)?))
}

fn add(cfg: &RunConfig, out: &Emitter) -> Result<Vec<Artifact>, CliError> {
    let det = cfg.detector()?;
    let spec = AdditionSpec::new(cfg.squeezer()?, det, 0)?;
    single_detector(cfg, out, det.n(), |p, k| Ok(processes::add(p, &spec.with_clicks(k)?)?))
}

fn amplify(cfg: &RunConfig, out: &Emitter) -> Result<Vec<Artifact>, CliError> {
    let add = AdditionSpec::new(cfg.squeezer()?, cfg.addition_detector()?, 0)?;
    let sub = SubtractionSpec::new(cfg.beam_splitter()?, cfg.subtraction_detector()?, 0)?;
    let template = AmplifySpec::new(add, sub)?;
    let p_in = input_mixture(&cfg.input()?)?;
    let pairs = cfg.clicks.pairs(add.det.n(), sub.det.n())?;
    let outcomes = pairs
        .par_iter()
        .map(|&(k1, k2)| Ok(processes::amplify(&p_in, &template.with_clicks(k1, k2)?)?))
        .collect::<Result<Vec<_>, CliError>>()?;

    #[derive(Serialize)]
    struct PairRow {
        k1: usize,
        k2: usize,
        probability: Sci,
        percent: Percent,
    }
    let rows: Vec<_> = pairs
        .iter()
        .zip(&outcomes)
        .map(|(&(k1, k2), o)| PairRow { k1, k2, probability: Sci(o.probability), percent: Percent(o.probability) })
        .collect();
    let mut files = vec![out.table("probabilities", &["k1", "k2", "probability", "percent"], &rows, |r| {
        vec![r.k1.to_string(), r.k2.to_string(), sci(r.probability.0), percent(r.percent.0)]
    })?];
    if let Some(grid) = &cfg.grid {
        for (&(k1, k2), o) in pairs.iter().zip(&outcomes) {
            let state = o.normalize().unwrap_or_else(|| o.state.clone());
            files.push(out.grid(&format!("grid_k1_{k1}_k2_{k2}"), &state, grid)?);
        }
    }
    Ok(files)
}

fn clickstats(cfg: &RunConfig, out: &Emitter) -> Result<Vec<Artifact>, CliError> {
    let det = cfg.detector()?;
    let mut dist = match (&cfg.photon_distribution, &cfg.input) {
        (Some(p), None) => p.clone(),
        (None, Some(spec)) => {
            let d = match cfg.cutoff {
                Some(d) => d,
                None => fock::suggest_cutoff(spec, AUTO_TAIL_TOL)?,
            };
            fock::photon_distribution(&fock::make_state(spec, d)?)
        }
        _ => return Err(CliError::schema("clickstats needs exactly one of \"input\" or \"photon_distribution\"")),
    };
    // Beyond the last occupied number state every D_{k,m} with k > m vanishes.
    while dist.len() > 1 && dist.last() == Some(&0.0) {
        dist.pop();
    }
    let stats = povm::click_statistics(&dist, &det)?;
    let kmax = det.n().min(dist.len() - 1);

    #[derive(Serialize)]
    struct ClickRow {
        k: usize,
        probability: Sci,
    }
    let rows: Vec<_> = (0..=kmax).map(|k| ClickRow { k, probability: Sci(stats.probs[k]) }).collect();
    Ok(vec![out.table("clicks", &["k", "probability"], &rows, |r| vec![r.k.to_string(), sci(r.probability.0)])?])
}

fn errorbound(cfg: &RunConfig, out: &Emitter) -> Result<Vec<Artifact>, CliError> {
    let eta = cfg.detector.ok_or_else(|| CliError::schema("errorbound needs a detector efficiency (--eta)"))?.eta;
    let ns = match &cfg.n_values {
        Some(ns) => ns.clone(),
        None => vec![cfg.detector()?.n()],
    };
    let ks = match &cfg.clicks {
        Clicks::One(k) => vec![*k],
        Clicks::List(ks) => ks.clone(),
        _ => return Err(CliError::schema("errorbound needs explicit click counts (--k)")),
    };
    let cutoff = cfg.cutoff.unwrap_or(DEFAULT_ERRORBOUND_CUTOFF);

    #[derive(Serialize)]
    struct BoundRow {
        n: usize,
        k: usize,
        distance: Sci,
        scanned: Sci,
        argmax: usize,
        tail_bound: Sci,
    }
    let mut rows = Vec::new();
    for &n in &ns {
        let det = DetectorConfig::new(n, eta)?;
        for &k in &ks {
            let d = povm::operator_norm_distance(&det, k, cutoff)?;
            rows.push(BoundRow { n, k, distance: Sci(d.value), scanned: Sci(d.scanned), argmax: d.argmax, tail_bound: Sci(d.tail_bound) });
        }
    }
    Ok(vec![out.table("distance", &["N", "k", "distance", "scanned", "argmax", "tail_bound"], &rows, |r| {
        vec![r.n.to_string(), r.k.to_string(), sci(r.distance.0), sci(r.scanned.0), r.argmax.to_string(), sci(r.tail_bound.0)]
    })?])
}
