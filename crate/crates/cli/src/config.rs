use std::f64::consts::PI;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use scar_metrology::Backend;

/// Environment variable that overrides the cache root.
pub const CACHE_ENV: &str = "SCARMET_CACHE_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Verify,
    HusimiMap,
    Appendix,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Fig1 => "fig1",
            Experiment::Fig2 => "fig2",
            Experiment::Fig3 => "fig3",
            Experiment::Fig4 => "fig4",
            Experiment::Verify => "verify",
            Experiment::HusimiMap => "husimi-map",
            Experiment::Appendix => "appendix",
        }
    }

    /// Keys this experiment reads besides the common ones.
    fn keys(&self) -> &'static [&'static str] {
        match self {
            Experiment::Fig1 => &["perturbation", "goe_samples", "seed"],
            Experiment::Fig2 => &["perturbation", "points", "t_max", "backend"],
            Experiment::Fig3 => &["perturbation", "points", "backend"],
            Experiment::Fig4 => &["points", "refine", "time_scan_n", "backend"],
            Experiment::Verify => &[],
            Experiment::HusimiMap => &["perturbation", "map_times", "n_theta", "n_phi", "backend"],
            Experiment::Appendix => &["omega_a", "couplings", "n_max", "points", "backend"],
        }
    }
}

const COMMON_KEYS: &[&str] = &[
    "experiment", "N", "L", "d", "gamma", "lambda", "omega", "eta", "chi", "output_dir", "cache_dir",
    "threads",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// A number or an expression such as `"pi/2"`, `"-pi"` or `"3pi/2"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Angle {
    Number(f64),
    Expr(String),
}

impl Angle {
    pub fn value(&self) -> Result<f64> {
        match self {
            Angle::Number(x) => Ok(*x),
            Angle::Expr(s) => parse_angle(s),
        }
    }
}

fn parse_angle(s: &str) -> Result<f64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if let Ok(x) = t.parse::<f64>() {
        return Ok(x);
    }
    let (num, den) = match t.split_once('/') {
        Some((a, b)) => (a, b.parse::<f64>().with_context(|| format!("bad angle `{s}`"))?),
        None => (t.as_str(), 1.0),
    };
    let coeff = num
        .strip_suffix("pi")
        .ok_or_else(|| anyhow!("bad angle `{s}`: expected a number or k*pi/m"))?
        .trim_end_matches('*');
    let k = match coeff {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().with_context(|| format!("bad angle `{s}`"))?,
    };
    Ok(k * PI / den)
}

/// The config file as written: flat keys, all optional except `experiment`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: Option<Experiment>,
    #[serde(rename = "N")]
    pub n: Option<OneOrMany<usize>>,
    #[serde(rename = "L")]
    pub side_length: Option<f64>,
    pub d: Option<usize>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    pub omega: Option<f64>,
    pub eta: Option<OneOrMany<Angle>>,
    pub chi: Option<OneOrMany<f64>>,
    pub perturbation: Option<f64>,
    pub backend: Option<Backend>,
    pub points: Option<usize>,
    pub t_max: Option<f64>,
    pub refine: Option<bool>,
    pub time_scan_n: Option<usize>,
    pub map_times: Option<Vec<f64>>,
    pub n_theta: Option<usize>,
    pub n_phi: Option<usize>,
    pub omega_a: Option<f64>,
    pub couplings: Option<Vec<f64>>,
    pub n_max: Option<usize>,
    pub goe_samples: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// Fully resolved run configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(rename = "N")]
    pub sizes: Vec<usize>,
    #[serde(rename = "L")]
    pub side_length: f64,
    pub d: usize,
    pub gamma: f64,
    pub lambda: f64,
    /// `None` for fig4, where `omega = -chi/N` is imposed.
    pub omega: Option<f64>,
    pub etas: Vec<f64>,
    pub chis: Vec<f64>,
    pub perturbation: f64,
    pub backend: Backend,
    pub points: usize,
    pub t_max: Option<f64>,
    pub refine: bool,
    pub time_scan_n: usize,
    pub map_times: Option<Vec<f64>>,
    pub n_theta: usize,
    pub n_phi: usize,
    pub omega_a: f64,
    pub couplings: Vec<f64>,
    pub n_max: usize,
    pub goe_samples: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub cache_dir: PathBuf,
    pub threads: usize,
}

/// Parses `text`, applies `key=value` overrides and checks that every key
/// is used by the chosen experiment.
pub fn load(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut table: toml::Table = text.parse().context("config is not valid TOML")?;
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| anyhow!("override `{o}` must look like key=value"))?;
        let k = k.trim();
        let value = format!("v = {}", v.trim())
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(v.trim().to_string()));
        table.insert(k.to_string(), value);
    }
    let raw: RawConfig = table.clone().try_into().map_err(|e| anyhow!("invalid config: {e}"))?;
    let experiment = raw.experiment.ok_or_else(|| anyhow!("missing key `experiment`"))?;
    for key in table.keys() {
        if !COMMON_KEYS.contains(&key.as_str()) && !experiment.keys().contains(&key.as_str()) {
            bail!("key `{key}` is not used by experiment {}", experiment.name());
        }
    }
    if experiment == Experiment::Fig4 && raw.omega.is_some() {
        bail!("key `omega` is fixed to -chi/N by experiment fig4");
    }
    resolve(experiment, raw)
}

fn resolve(experiment: Experiment, raw: RawConfig) -> Result<RunConfig> {
    use Experiment::*;
    let half_pi = PI / 2.0;
    let (sizes, omega, etas, chis) = match experiment {
        Fig1 => (vec![8], Some(2.0), vec![half_pi], vec![0.0, 2.0]),
        Fig2 => (vec![8], Some(0.0), vec![0.0, half_pi], vec![2.0]),
        Fig3 | Fig4 => (vec![4, 6, 8, 10], Some(0.0), vec![0.0, half_pi], vec![2.0]),
        Verify => (vec![6], Some(0.7), vec![half_pi], vec![2.0]),
        HusimiMap => (vec![8], Some(0.0), vec![half_pi], vec![2.0]),
        Appendix => (vec![4], Some(1.0), vec![half_pi], vec![0.0]),
    };
    let etas = match &raw.eta {
        Some(e) => e.to_vec().iter().map(Angle::value).collect::<Result<Vec<_>>>()?,
        None => etas,
    };
    let output_dir = raw.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let cache_dir = std::env::var_os(CACHE_ENV)
        .map(PathBuf::from)
        .or(raw.cache_dir.clone())
        .unwrap_or_else(|| PathBuf::from(".scarmet-cache"));
    let threads = raw.threads.unwrap_or_else(|| {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    });
    let cfg = RunConfig {
        experiment,
        sizes: raw.n.map(|n| n.to_vec()).unwrap_or(sizes),
        side_length: raw.side_length.unwrap_or(10.0),
        d: raw.d.unwrap_or(1),
        gamma: raw.gamma.unwrap_or(2.0),
        lambda: raw.lambda.unwrap_or(1.0),
        omega: if experiment == Fig4 { None } else { raw.omega.or(omega) },
        etas,
        chis: raw.chi.map(|c| c.to_vec()).unwrap_or(chis),
        perturbation: raw
            .perturbation
            .unwrap_or(if experiment == Fig1 { 1e-5 } else { 0.0 }),
        backend: raw.backend.unwrap_or_default(),
        points: raw.points.unwrap_or(match experiment {
            Fig4 => 40,
            Appendix => 41,
            _ => 400,
        }),
        t_max: raw.t_max,
        refine: raw.refine.unwrap_or(true),
        time_scan_n: raw.time_scan_n.unwrap_or(8),
        map_times: raw.map_times,
        n_theta: raw.n_theta.unwrap_or(61),
        n_phi: raw.n_phi.unwrap_or(120),
        omega_a: raw.omega_a.unwrap_or(11.0),
        couplings: raw.couplings.unwrap_or_else(|| vec![0.1, 0.05]),
        n_max: raw.n_max.unwrap_or(6),
        goe_samples: raw.goe_samples.unwrap_or(0),
        seed: raw.seed.unwrap_or(0),
        output_dir,
        cache_dir,
        threads: threads.max(1),
    };
    if cfg.sizes.is_empty() || cfg.etas.is_empty() || cfg.chis.is_empty() {
        bail!("`N`, `eta` and `chi` need at least one value");
    }
    if cfg.points < 2 {
        bail!("key `points` must be at least 2");
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles() {
        assert_eq!(parse_angle("pi/2").unwrap(), PI / 2.0);
        assert_eq!(parse_angle("-pi").unwrap(), -PI);
        assert_eq!(parse_angle("3pi/2").unwrap(), 3.0 * PI / 2.0);
        assert_eq!(parse_angle("0.25").unwrap(), 0.25);
        assert!(parse_angle("tau").is_err());
    }

    #[test]
    fn defaults_for_fig2() {
        let c = load("experiment = \"fig2\"", &[]).unwrap();
        assert_eq!(c.sizes, vec![8]);
        assert_eq!(c.omega, Some(0.0));
        assert_eq!(c.etas, vec![0.0, PI / 2.0]);
        assert_eq!(c.points, 400);
    }

    #[test]
    fn overrides_replace_values() {
        let c = load("experiment = \"fig3\"\nN = [4, 6]", &["N=[4]".into(), "eta=\"pi/2\"".into()]).unwrap();
        assert_eq!(c.sizes, vec![4]);
        assert_eq!(c.etas, vec![PI / 2.0]);
    }

    #[test]
    fn offending_keys_are_named() {
        let e = load("experiment = \"fig2\"\nkai = 2", &[]).unwrap_err().to_string();
        assert!(e.contains("kai"), "{e}");
        let e = load("experiment = \"fig2\"\nomega_a = 2.0", &[]).unwrap_err().to_string();
        assert!(e.contains("omega_a"), "{e}");
        let e = load("experiment = \"fig4\"\nomega = 1.0", &[]).unwrap_err().to_string();
        assert!(e.contains("omega"), "{e}");
    }
}
