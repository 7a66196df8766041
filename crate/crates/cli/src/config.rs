use chaoslab::functionals::{DomainSpec, Shape};
use chaoslab::hermite::{HermiteExpansion, Observable, MAX_DEGREE};
use chaoslab::limits::{expansion_digest, Carrier, SCHEMA_VERSION};
use chaoslab::specialfn::{CovarianceModel, ModelKind};
use chaoslab::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Moments,
    Variance,
    Field,
    Clt,
    Ascl,
    Contractions,
    Conditions,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Moments => "moments",
            CommandKind::Variance => "variance",
            CommandKind::Field => "field",
            CommandKind::Clt => "clt",
            CommandKind::Ascl => "ascl",
            CommandKind::Contractions => "contractions",
            CommandKind::Conditions => "conditions",
        }
    }

    /// Keys a config for this command may set besides the model keys.
    fn allowed(self) -> &'static [&'static str] {
        match self {
            CommandKind::Moments => &["q", "signed", "r_max"],
            CommandKind::Variance => &["phi", "shape", "t", "n", "drop_first_chaos"],
            CommandKind::Field => &["t", "h", "k", "carrier"],
            CommandKind::Clt => {
                &["phi", "shape", "t", "n", "h", "k", "carrier", "n_reps", "drop_first_chaos"]
            }
            CommandKind::Ascl => &["phi", "shape", "horizons", "h", "k", "carrier", "drop_first_chaos"],
            CommandKind::Contractions => {
                &["phi", "shape", "t", "k1", "k2", "m", "k_cap", "n_samples", "drop_first_chaos"]
            }
            CommandKind::Conditions => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Bin,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Bin => "bin",
        }
    }
}

/// One experiment request. Every key is optional on input; [`RunConfig::resolve`]
/// fills defaults so that the stored copy is complete.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_version: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signed: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Shape>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier: Option<Carrier>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k2: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_first_chaos: Option<bool>,
    /// Digest of the configured observable's expansion; checked when supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

const MODEL_KEYS: [&str; 6] = ["model", "d", "alpha", "mu", "beta", "gamma"];
const COMMON_KEYS: [&str; 5] = ["schema_version", "command", "seed", "out", "format"];

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f; } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
    }

    /// Values set in `flags` win over `self`.
    pub fn overlay(mut self, flags: RunConfig) -> Self {
        let f = flags;
        overlay!(self, f; schema_version, command, model, d, alpha, mu, beta, gamma, q, signed, r_max,
            phi, shape, t, horizons, n, k, h, carrier, n_reps, n_samples, k1, k2, m, k_cap,
            drop_first_chaos, expansion_digest, seed, out, format);
        self
    }

    /// Checks every key and fills defaults; the result is what gets recorded.
    pub fn resolve(mut self, command: CommandKind, env_seed: Option<&str>) -> Result<Self> {
        match self.schema_version {
            None => self.schema_version = Some(SCHEMA_VERSION),
            Some(v) if v == SCHEMA_VERSION => {}
            Some(v) => {
                return Err(Error::Config(format!("schema_version {v} is not supported (expected {SCHEMA_VERSION})")))
            }
        }
        match self.command {
            Some(c) if c != command => {
                return Err(Error::Config(format!(
                    "config is for command '{}' but '{}' was invoked",
                    c.name(),
                    command.name()
                )))
            }
            _ => self.command = Some(command),
        }
        let set = serde_json::to_value(&self).map_err(|e| Error::Config(e.to_string()))?;
        let set = set.as_object().expect("RunConfig serializes to an object");
        for key in set.keys() {
            let k = key.as_str();
            let with_phi = k == "expansion_digest" && command.allowed().contains(&"phi");
            if !(MODEL_KEYS.contains(&k) || COMMON_KEYS.contains(&k) || command.allowed().contains(&k) || with_phi) {
                return Err(Error::Config(format!("key '{k}' is not used by command '{}'", command.name())));
            }
        }

        if let Some(s) = env_seed {
            let seed = s
                .trim()
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("CHAOSLAB_SEED='{s}' is not an unsigned integer")))?;
            self.seed = Some(seed);
        }
        self.seed.get_or_insert(0);
        if self.d.is_none() {
            return Err(Error::Config("dimension d is required".into()));
        }
        let name = self.model.clone().ok_or_else(|| Error::Config("model is required".into()))?;
        match name.as_str() {
            "berry" => {}
            "exponential" => {
                self.alpha.get_or_insert(1.0);
            }
            "matern" => {
                self.mu.get_or_insert(0.5);
            }
            "cauchy" => {
                self.beta.get_or_insert(1.0);
                self.gamma.get_or_insert(2.0);
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown model '{other}' (expected berry, exponential, matern or cauchy)"
                )))
            }
        }
        self.model_spec()?;

        let format = *self.format.get_or_insert(Format::Csv);
        match (command, format) {
            (CommandKind::Field, Format::Json) => {
                return Err(Error::Config("field output format must be csv or bin".into()))
            }
            (CommandKind::Field, _) => {}
            (_, Format::Bin) => return Err(Error::Config("bin format is only available for field".into())),
            _ => {}
        }
        if self.out.is_none() {
            self.out = Some(format!("chaoslab-{}.{}", command.name(), format.ext()));
        }

        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => {
                Err(Error::Config(format!("{name} must be a positive number, got {x}")))
            }
            _ => Ok(()),
        };
        positive("h", self.h)?;
        for (name, list) in [("t", &self.t), ("horizons", &self.horizons)] {
            if let Some(list) = list {
                if list.is_empty() {
                    return Err(Error::Config(format!("{name} must not be empty")));
                }
                for &x in list {
                    positive(name, Some(x))?;
                }
            }
        }

        let uses = |k: &str| command.allowed().contains(&k);
        if uses("shape") {
            self.shape.get_or_insert(Shape::Ball);
        }
        if uses("drop_first_chaos") {
            self.drop_first_chaos.get_or_insert(false);
        }
        if uses("carrier") {
            self.carrier.get_or_insert(Carrier::Auto);
        }
        match command {
            CommandKind::Moments => {
                self.q.get_or_insert_with(|| "8..128".into());
                self.signed.get_or_insert(true);
                self.r_max.get_or_insert_with(|| "inf".into());
                parse_q(self.q.as_deref().unwrap())?;
                parse_radius(self.r_max.as_deref().unwrap())?;
            }
            CommandKind::Variance => {
                self.phi.get_or_insert_with(|| "hermite:2".into());
                self.require_t()?;
            }
            CommandKind::Field => {
                self.h.get_or_insert(0.25);
                let t = self.t.get_or_insert_with(|| vec![8.0]);
                if t.len() != 1 {
                    return Err(Error::Config("field takes a single half-width t".into()));
                }
            }
            CommandKind::Clt => {
                self.require("phi", self.phi.is_some())?;
                self.require_t()?;
                let reps = *self.n_reps.get_or_insert(1000);
                if reps < 2 {
                    return Err(Error::Config(format!("n_reps = {reps} must be >= 2")));
                }
            }
            CommandKind::Ascl => {
                self.require("phi", self.phi.is_some())?;
                self.require("horizons (--T)", self.horizons.is_some())?;
            }
            CommandKind::Contractions => {
                self.require_t()?;
                self.n_samples.get_or_insert(chaoslab::contractions::DEFAULT_SAMPLES);
                if self.phi.is_some() {
                    if self.k1.is_some() || self.k2.is_some() {
                        return Err(Error::Config("give either phi (xi estimate) or k1/k2 (single h_t), not both".into()));
                    }
                    self.m.get_or_insert(3);
                    self.k_cap.get_or_insert(8);
                } else {
                    if self.m.is_some() || self.k_cap.is_some() || self.drop_first_chaos == Some(true) {
                        return Err(Error::Config("m, k_cap and drop_first_chaos need phi".into()));
                    }
                    self.drop_first_chaos = None;
                    self.require("k1", self.k1.is_some())?;
                    self.require("k2", self.k2.is_some())?;
                }
            }
            CommandKind::Conditions => {}
        }
        if self.phi.is_some() {
            let digest = expansion_digest(&self.expansion()?);
            match &self.expansion_digest {
                Some(given) if *given != digest => {
                    return Err(Error::Config(format!(
                        "expansion digest {given} does not match the computed {digest}"
                    )))
                }
                _ => self.expansion_digest = Some(digest),
            }
        }
        Ok(self)
    }

    fn require(&self, name: &str, present: bool) -> Result<()> {
        if present {
            Ok(())
        } else {
            Err(Error::Config(format!("{name} is required for command '{}'", self.command.unwrap().name())))
        }
    }

    fn require_t(&self) -> Result<()> {
        self.require("t", self.t.is_some())
    }

    pub fn model_spec(&self) -> Result<CovarianceModel> {
        let d = self.d.ok_or_else(|| Error::Config("dimension d is required".into()))?;
        let kind = match self.model.as_deref() {
            Some("berry") => ModelKind::Berry,
            Some("exponential") => ModelKind::Exponential { alpha: self.alpha.unwrap_or(1.0) },
            Some("matern") => ModelKind::WhittleMatern { mu: self.mu.unwrap_or(0.5) },
            Some("cauchy") => ModelKind::Cauchy { beta: self.beta.unwrap_or(1.0), gamma: self.gamma.unwrap_or(2.0) },
            Some(other) => return Err(Error::Config(format!("unknown model '{other}'"))),
            None => return Err(Error::Config("model is required".into())),
        };
        CovarianceModel::new(kind, d)
    }

    pub fn domain(&self, t: f64) -> Result<DomainSpec> {
        let d = self.d.unwrap();
        match self.shape.unwrap_or(Shape::Ball) {
            Shape::Ball => DomainSpec::ball(d, t),
            Shape::Box => DomainSpec::cube(d, t),
        }
    }

    pub fn observable(&self) -> Result<Observable> {
        let phi = self.phi.as_deref().ok_or_else(|| Error::Config("phi is required".into()))?;
        let obs = Observable::parse(phi)?;
        if self.drop_first_chaos == Some(true) {
            obs.without_chaos(&[1])
        } else {
            Ok(obs)
        }
    }

    pub fn expansion(&self) -> Result<HermiteExpansion> {
        let obs = self.observable()?;
        let order = obs.polynomial_degree().map_or(MAX_DEGREE, |p| p.max(1));
        obs.expansion(order)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out(&self) -> &str {
        self.out.as_deref().unwrap()
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or(Format::Csv)
    }
}

/// `8..128`, `8..=128` (both inclusive), `5` or `2,4,8`.
pub fn parse_q(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("cannot parse q range '{s}' (use 8..128, 5 or 2,4,8)"));
    let num = |x: &str| x.trim().parse::<usize>().map_err(|_| bad());
    let qs = if let Some((a, b)) = s.split_once("..") {
        let (lo, hi) = (num(a)?, num(b.trim_start_matches('='))?);
        if lo > hi {
            return Err(bad());
        }
        (lo..=hi).collect()
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if qs.is_empty() || qs.contains(&0) {
        return Err(Error::Config(format!("q values must be >= 1, got '{s}'")));
    }
    Ok(qs)
}

pub fn parse_radius(s: &str) -> Result<chaoslab::covmoments::Radius> {
    use chaoslab::covmoments::Radius;
    match s.trim() {
        "inf" | "infinity" => Ok(Radius::Infinite),
        x => match x.parse::<f64>() {
            Ok(r) if r > 0.0 && r.is_finite() => Ok(Radius::Finite(r)),
            _ => Err(Error::Config(format!("r_max must be a positive number or 'inf', got '{s}'"))),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> RunConfig {
        RunConfig { model: Some("berry".into()), d: Some(2), ..Default::default() }
    }

    #[test]
    fn q_ranges() {
        assert_eq!(parse_q("8..10").unwrap(), vec![8, 9, 10]);
        assert_eq!(parse_q("8..=9").unwrap(), vec![8, 9]);
        assert_eq!(parse_q("2,4").unwrap(), vec![2, 4]);
        assert!(parse_q("0..4").is_err());
        assert!(parse_q("9..3").is_err());
    }

    #[test]
    fn defaults_are_recorded() {
        let c = base().resolve(CommandKind::Moments, None).unwrap();
        assert_eq!(c.q.as_deref(), Some("8..128"));
        assert_eq!(c.signed, Some(true));
        assert_eq!(c.seed, Some(0));
        assert_eq!(c.schema_version, Some(SCHEMA_VERSION));
        assert_eq!(c.out.as_deref(), Some("chaoslab-moments.csv"));
    }

    #[test]
    fn env_seed_overrides() {
        let mut c = base();
        c.seed = Some(5);
        let c = c.resolve(CommandKind::Moments, Some("17")).unwrap();
        assert_eq!(c.seed, Some(17));
        assert!(base().resolve(CommandKind::Moments, Some("x")).is_err());
    }

    #[test]
    fn foreign_keys_rejected() {
        let mut c = base();
        c.n_reps = Some(10);
        let e = c.resolve(CommandKind::Moments, None).unwrap_err();
        assert!(e.to_string().contains("n_reps"));
    }

    #[test]
    fn unknown_json_keys_rejected() {
        let e = serde_json::from_str::<RunConfig>(r#"{"model":"berry","colour":1}"#);
        assert!(e.is_err());
    }

    #[test]
    fn overlay_prefers_flags() {
        let file = RunConfig { d: Some(3), seed: Some(1), ..base() };
        let flags = RunConfig { seed: Some(9), ..Default::default() };
        let c = file.overlay(flags);
        assert_eq!((c.d, c.seed), (Some(3), Some(9)));
    }

    #[test]
    fn digest_is_recorded_and_checked() {
        let c = RunConfig { phi: Some("hermite:2".into()), t: Some(vec![4.0]), ..base() };
        let r = c.clone().resolve(CommandKind::Variance, None).unwrap();
        let digest = r.expansion_digest.clone().unwrap();
        assert_eq!(digest.len(), 16);
        let again = RunConfig { expansion_digest: Some(digest), ..c.clone() };
        assert!(again.resolve(CommandKind::Variance, None).is_ok());
        let wrong = RunConfig { expansion_digest: Some("00".into()), ..c };
        assert!(wrong.resolve(CommandKind::Variance, None).is_err());
    }

    #[test]
    fn wrong_schema_and_command() {
        let c = RunConfig { schema_version: Some(2), ..base() };
        assert!(c.resolve(CommandKind::Moments, None).is_err());
        let c = RunConfig { command: Some(CommandKind::Clt), ..base() };
        assert!(c.resolve(CommandKind::Moments, None).is_err());
    }
}
