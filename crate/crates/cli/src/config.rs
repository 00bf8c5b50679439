//! The versioned JSON run configuration and its command-line overrides.
//!
//! Every section is optional at the schema level; each protocol asks only
//! for what it needs and reports a missing section as a schema error.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clickcraft_core::fock::{BeamSplitterConfig, SqueezerConfig, StateSpec};
use clickcraft_core::pfunc::GridSpec;
use clickcraft_core::povm::DetectorConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Herald,
    Subtract,
    Add,
    Amplify,
    Clickstats,
    Errorbound,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Herald => "herald",
            Protocol::Subtract => "subtract",
            Protocol::Add => "add",
            Protocol::Amplify => "amplify",
            Protocol::Clickstats => "clickstats",
            Protocol::Errorbound => "errorbound",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub n: usize,
    pub eta: f64,
}

impl DetectorSpec {
    pub fn build(&self) -> Result<DetectorConfig<f64>, CliError> {
        Ok(DetectorConfig::new(self.n, self.eta)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSplitterSpec {
    pub t: f64,
}

/// Two-mode squeezer given either by `μ = cosh ξ` or by `ξ` itself.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqueezerSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
}

impl SqueezerSpec {
    pub fn build(&self) -> Result<SqueezerConfig<f64>, CliError> {
        match (self.mu, self.xi) {
            (Some(mu), None) => Ok(SqueezerConfig::from_mu(mu)?),
            (None, Some(xi)) => Ok(SqueezerConfig::new(xi)?),
            _ => Err(CliError::schema("squeezer needs exactly one of \"mu\" or \"xi\"")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllTag {
    All,
}

/// Which click events to condition on.
///
/// `"all"`, a single count, a list of counts, or for the two-detector
/// protocol a product `{"k1": [...], "k2": [...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Clicks {
    All(AllTag),
    One(usize),
    List(Vec<usize>),
    Pairs { k1: Vec<usize>, k2: Vec<usize> },
}

impl Default for Clicks {
    fn default() -> Self {
        Clicks::All(AllTag::All)
    }
}

impl FromStr for Clicks {
    type Err = CliError;

    /// `all`, `3`, `0,1,2`, or `k1/k2` with comma lists on either side.
    fn from_str(s: &str) -> Result<Self, CliError> {
        let list = |part: &str| -> Result<Vec<usize>, CliError> {
            part.split(',')
                .map(|x| x.trim().parse::<usize>().map_err(|_| CliError::schema(format!("bad click count {x:?} in --k"))))
                .collect()
        };
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(Clicks::All(AllTag::All));
        }
        if let Some((a, b)) = s.split_once('/') {
            return Ok(Clicks::Pairs { k1: list(a)?, k2: list(b)? });
        }
        let ks = list(s)?;
        Ok(if ks.len() == 1 { Clicks::One(ks[0]) } else { Clicks::List(ks) })
    }
}

impl Clicks {
    /// Click counts for a single detector with `n` diodes.
    pub fn single(&self, n: usize) -> Result<Vec<usize>, CliError> {
        let ks = match self {
            Clicks::All(_) => (0..=n).collect(),
            Clicks::One(k) => vec![*k],
            Clicks::List(ks) => ks.clone(),
            Clicks::Pairs { .. } => {
                return Err(CliError::schema("click pairs {k1, k2} only apply to the amplify protocol"));
            }
        };
        check_range(&ks, n)?;
        Ok(ks)
    }

    /// `(k₁, k₂)` pairs in row-major order for detectors with `n1`, `n2` diodes.
    pub fn pairs(&self, n1: usize, n2: usize) -> Result<Vec<(usize, usize)>, CliError> {
        let (r1, r2): (Vec<usize>, Vec<usize>) = match self {
            Clicks::All(_) => ((0..=n1).collect(), (0..=n2).collect()),
            Clicks::Pairs { k1, k2 } => (k1.clone(), k2.clone()),
            _ => return Err(CliError::schema("amplify needs clicks \"all\" or {\"k1\": [...], \"k2\": [...]}")),
        };
        check_range(&r1, n1)?;
        check_range(&r2, n2)?;
        Ok(r1.iter().flat_map(|&a| r2.iter().map(move |&b| (a, b))).collect())
    }
}

fn check_range(ks: &[usize], n: usize) -> Result<(), CliError> {
    if ks.is_empty() {
        return Err(CliError::schema("empty click selection"));
    }
    match ks.iter().find(|&&k| k > n) {
        Some(k) => Err(CliError::invalid(format!("{k} clicks requested from a detector with {n} diodes"))),
        None => Ok(()),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<Protocol>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<StateSpec>,
    /// Explicit photon-number distribution for `clickstats`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photon_distribution: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector: Option<DetectorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub addition_detector: Option<DetectorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtraction_detector: Option<DetectorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam_splitter: Option<BeamSplitterSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub squeezer: Option<SqueezerSpec>,
    #[serde(default)]
    pub clicks: Clicks,
    /// Diode counts scanned by `errorbound`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_values: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl RunConfig {
    pub fn empty() -> Self {
        RunConfig {
            schema: SCHEMA_VERSION,
            protocol: None,
            description: None,
            input: None,
            photon_distribution: None,
            detector: None,
            addition_detector: None,
            subtraction_detector: None,
            beam_splitter: None,
            squeezer: None,
            clicks: Clicks::default(),
            n_values: None,
            cutoff: None,
            grid: None,
            output: OutputSpec::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(CliError::schema(format!(
                "unsupported config schema {} (this build reads schema {SCHEMA_VERSION})",
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::ReadConfig { path: path.to_owned(), source })?;
        Self::from_json(&text)
    }

    pub fn detector(&self) -> Result<DetectorConfig<f64>, CliError> {
        self.detector.as_ref().ok_or_else(|| missing("detector"))?.build()
    }

    pub fn addition_detector(&self) -> Result<DetectorConfig<f64>, CliError> {
        self.addition_detector.or(self.detector).ok_or_else(|| missing("addition_detector"))?.build()
    }

    pub fn subtraction_detector(&self) -> Result<DetectorConfig<f64>, CliError> {
        self.subtraction_detector.or(self.detector).ok_or_else(|| missing("subtraction_detector"))?.build()
    }

    pub fn beam_splitter(&self) -> Result<BeamSplitterConfig<f64>, CliError> {
        let t = self.beam_splitter.ok_or_else(|| missing("beam_splitter"))?.t;
        Ok(BeamSplitterConfig::new(t)?)
    }

    pub fn squeezer(&self) -> Result<SqueezerConfig<f64>, CliError> {
        self.squeezer.ok_or_else(|| missing("squeezer"))?.build()
    }

    pub fn input(&self) -> Result<StateSpec, CliError> {
        self.input.ok_or_else(|| missing("input"))
    }

    /// Applies command-line overrides on top of the file contents.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(eta) = o.eta {
            let mut touched = false;
            for det in [&mut self.detector, &mut self.addition_detector, &mut self.subtraction_detector] {
                if let Some(d) = det.as_mut() {
                    d.eta = eta;
                    touched = true;
                }
            }
            if !touched {
                let n = o.n.as_ref().and_then(|ns| ns.first().copied()).unwrap_or(1);
                self.detector = Some(DetectorSpec { n, eta });
            }
        }
        if let Some(ns) = &o.n {
            if ns.len() == 1 {
                for det in [&mut self.detector, &mut self.addition_detector, &mut self.subtraction_detector] {
                    if let Some(d) = det.as_mut() {
                        d.n = ns[0];
                    }
                }
            }
            self.n_values = Some(ns.clone());
        }
        if let Some(k) = &o.k {
            self.clicks = k.clone();
        }
        if let Some(t) = o.t {
            self.beam_splitter = Some(BeamSplitterSpec { t });
        }
        if let Some(mu) = o.mu {
            self.squeezer = Some(SqueezerSpec { mu: Some(mu), xi: None });
        }
        if let Some(c) = o.cutoff {
            self.cutoff = Some(c);
        }
        if let Some(g) = o.grid {
            self.grid = Some(g);
        }
        if let Some(f) = o.format {
            self.output.format = f;
        }
        if let Some(dir) = &o.out {
            self.output.dir = Some(dir.clone());
        }
    }
}

fn missing(section: &str) -> CliError {
    CliError::schema(format!("config is missing the \"{section}\" section"))
}

/// Values given on the command line; each replaces the matching config field.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub eta: Option<f64>,
    pub n: Option<Vec<usize>>,
    pub k: Option<Clicks>,
    pub t: Option<f64>,
    pub mu: Option<f64>,
    pub cutoff: Option<usize>,
    pub grid: Option<GridSpec>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
}

/// Parses `re0,re1,im0,im1,nre,nim`.
pub fn parse_grid(s: &str) -> Result<GridSpec, CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || CliError::schema(format!("--grid expects re0,re1,im0,im1,nre,nim, got {s:?}"));
    if parts.len() != 6 {
        return Err(bad());
    }
    let f = |i: usize| parts[i].parse::<f64>().map_err(|_| bad());
    let u = |i: usize| parts[i].parse::<usize>().map_err(|_| bad());
    Ok(GridSpec { re_min: f(0)?, re_max: f(1)?, im_min: f(2)?, im_max: f(3)?, n_re: u(4)?, n_im: u(5)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clicks_from_flags() {
        assert_eq!("all".parse::<Clicks>().unwrap(), Clicks::All(AllTag::All));
        assert_eq!("2".parse::<Clicks>().unwrap(), Clicks::One(2));
        assert_eq!("0,2".parse::<Clicks>().unwrap(), Clicks::List(vec![0, 2]));
        assert_eq!("1,2/0".parse::<Clicks>().unwrap(), Clicks::Pairs { k1: vec![1, 2], k2: vec![0] });
        assert!("x".parse::<Clicks>().is_err());
    }

    #[test]
    fn clicks_from_json() {
        let c: Clicks = serde_json::from_str("\"all\"").unwrap();
        assert_eq!(c, Clicks::All(AllTag::All));
        let c: Clicks = serde_json::from_str("[1, 3]").unwrap();
        assert_eq!(c.single(4).unwrap(), vec![1, 3]);
        let c: Clicks = serde_json::from_str(r#"{"k1": [1], "k2": [0, 1]}"#).unwrap();
        assert_eq!(c.pairs(4, 4).unwrap(), vec![(1, 0), (1, 1)]);
        assert!(Clicks::One(5).single(4).is_err());
    }

    #[test]
    fn schema_version_is_checked() {
        assert!(RunConfig::from_json(r#"{"schema": 1}"#).is_ok());
        let err = RunConfig::from_json(r#"{"schema": 2}"#).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let err = RunConfig::from_json(r#"{"schema": 1, "bogus": 0}"#).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn overrides_replace_fields() {
        let mut cfg = RunConfig::from_json(
            r#"{"schema": 1, "addition_detector": {"n": 4, "eta": 0.5}, "subtraction_detector": {"n": 4, "eta": 0.5}}"#,
        )
        .unwrap();
        cfg.apply(&Overrides { eta: Some(0.9), n: Some(vec![8]), ..Default::default() });
        assert_eq!(cfg.addition_detector, Some(DetectorSpec { n: 8, eta: 0.9 }));
        assert_eq!(cfg.subtraction_detector, Some(DetectorSpec { n: 8, eta: 0.9 }));
    }

    #[test]
    fn grid_flag() {
        let g = parse_grid("-2,2,-1,1,40,20").unwrap();
        assert_eq!((g.n_re, g.n_im, g.re_min, g.im_max), (40, 20, -2.0, 1.0));
        assert!(parse_grid("1,2,3").is_err());
    }
}
