//! Flat key-value experiment configuration.
//!
//! Format: one `key = value` per line, `#` starts a comment, lists are
//! comma-separated. Unknown and duplicate keys are rejected so a config file
//! can be audited line by line.
//!
//! Defaults: `n_steps = 500`, `n_paths = 10000`, `seed = 42`,
//! `gamma = 1e-5`, `delta_factor = 0.01` (of the strike; `<= 0` disables
//! localization), `format = csv`, `maturities = 0.5`, `rhos = -0.5`,
//! `methods = AS, ExpA-1, ExpA-2, ExpM-1, ExpM-2`,
//! `benchmark_paths = 1000000`, `benchmark_steps = 1000`.
//! `epsilon` defaults per model (0 for hull_white and constant, 1e-5 for
//! stein_stein and heston), `benchmark` defaults per model (`heston_cf` for
//! heston, `bs` for constant, `highres_mc` otherwise). Market defaults are
//! `r = 0.0953`, `s0 = 100`, `v0 = 0.2`, and each builtin carries its
//! standard coefficient set (hull_white: `mu = 0.2`, `c = 0.1`;
//! stein_stein: `a = 0.2`, `b = 4`, `c = 0.1`; heston: `a = 0.04`, `b = 8`,
//! `c = 0.1`).

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rhoseries::estimators::Method;
use rhoseries::model::{default_epsilon, ModelParams, DEFAULT_GAMMA};

/// One column of the output table: a coefficient family at an order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MethodSpec {
    pub label: &'static str,
    pub method: Method,
    pub order: usize,
}

pub const ALL_METHODS: [MethodSpec; 5] = [
    MethodSpec { label: "AS", method: Method::AsClosed, order: 1 },
    MethodSpec { label: "ExpA-1", method: Method::ExpA, order: 1 },
    MethodSpec { label: "ExpA-2", method: Method::ExpA, order: 2 },
    MethodSpec { label: "ExpM-1", method: Method::ExpM, order: 1 },
    MethodSpec { label: "ExpM-2", method: Method::ExpM, order: 2 },
];

fn method_from_label(label: &str) -> Option<MethodSpec> {
    ALL_METHODS.iter().copied().find(|m| m.label == label)
}

/// Which oracle fills the benchmark column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkKind {
    HighresMc,
    HestonCf,
    Bs,
}

impl fmt::Display for BenchmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchmarkKind::HighresMc => "highres_mc",
            BenchmarkKind::HestonCf => "heston_cf",
            BenchmarkKind::Bs => "bs",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Markdown,
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Markdown => "md",
        }
    }
}

/// Everything one table run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model_name: String,
    pub params: ModelParams,
    pub strikes: Vec<f64>,
    pub maturities: Vec<f64>,
    pub rhos: Vec<f64>,
    pub methods: Vec<MethodSpec>,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub benchmark: BenchmarkKind,
    pub benchmark_paths: usize,
    pub benchmark_steps: usize,
    /// Localizer half-width as a fraction of the strike; `<= 0` disables it.
    pub delta_factor: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub format: OutputFormat,
}

struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {line_no}: expected `key = value`, got `{line}`"))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if value.is_empty() {
                bail!("line {line_no}: key `{key}` has no value");
            }
            if let Some((first_line, _)) = entries.get(&key) {
                bail!("line {line_no}: key `{key}` already set on line {first_line}");
            }
            entries.insert(key, (line_no, value));
        }
        Ok(Self { entries })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(_, v)| v)
    }

    fn take_parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| anyhow!("line {line}: invalid value for `{key}`: {e}")),
        }
    }

    fn take_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|item| {
                    item.trim()
                        .parse::<f64>()
                        .map_err(|e| anyhow!("line {line}: invalid number in `{key}`: {e}"))
                })
                .collect::<Result<Vec<f64>>>()
                .map(Some),
        }
    }

    fn reject_unknown(&self) -> Result<()> {
        if let Some((key, (line, _))) = self.entries.iter().next() {
            bail!("line {line}: unknown key `{key}`");
        }
        Ok(())
    }
}

/// Parses a configuration from text (strict mode).
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut raw = RawConfig::parse(text)?;

    let model_name = raw
        .take("model")
        .ok_or_else(|| anyhow!("missing required key `model`"))?;
    let known_model = ["hull_white", "stein_stein", "heston", "constant"];
    if !known_model.contains(&model_name.as_str()) {
        bail!(
            "field `model`: unknown model `{model_name}` (expected one of {})",
            known_model.join(", ")
        );
    }

    let (def_mu, def_a, def_b, def_c) = match model_name.as_str() {
        "hull_white" => (Some(0.2), None, None, Some(0.1)),
        "stein_stein" => (None, Some(0.2), Some(4.0), Some(0.1)),
        "heston" => (None, Some(0.04), Some(8.0), Some(0.1)),
        _ => (None, None, None, None),
    };
    let params = ModelParams {
        mu: raw.take_parsed::<f64>("mu")?.or(def_mu),
        a: raw.take_parsed::<f64>("a")?.or(def_a),
        b: raw.take_parsed::<f64>("b")?.or(def_b),
        c: raw.take_parsed::<f64>("c")?.or(def_c),
        rate: raw.take_parsed::<f64>("r")?.unwrap_or(0.0953),
        s0: raw.take_parsed::<f64>("s0")?.unwrap_or(100.0),
        v0: raw.take_parsed::<f64>("v0")?.unwrap_or(0.2),
    };

    let strikes = raw
        .take_list("strikes")?
        .ok_or_else(|| anyhow!("missing required key `strikes`"))?;
    if strikes.is_empty() || strikes.iter().any(|&k| k <= 0.0) {
        bail!("field `strikes`: needs at least one positive strike");
    }
    let maturities = raw.take_list("maturities")?.unwrap_or_else(|| vec![0.5]);
    if maturities.is_empty() || maturities.iter().any(|&t| t <= 0.0) {
        bail!("field `maturities`: needs at least one positive maturity");
    }
    let rhos = raw.take_list("rhos")?.unwrap_or_else(|| vec![-0.5]);
    if rhos.is_empty() || rhos.iter().any(|&r| r.abs() >= 1.0) {
        bail!("field `rhos`: needs at least one correlation with |rho| < 1");
    }

    let methods = match raw.take("methods") {
        None => ALL_METHODS.to_vec(),
        Some(v) => {
            let parsed: Result<Vec<MethodSpec>> = v
                .split(',')
                .map(|item| {
                    let label = item.trim();
                    method_from_label(label).ok_or_else(|| {
                        anyhow!(
                            "field `methods`: unknown method `{label}` (expected AS, ExpA-1, ExpA-2, ExpM-1, ExpM-2)"
                        )
                    })
                })
                .collect();
            parsed?
        }
    };
    if methods.is_empty() {
        bail!("field `methods`: needs at least one method");
    }

    let n_steps = raw.take_parsed::<usize>("n_steps")?.unwrap_or(500);
    if n_steps < 2 {
        bail!("field `n_steps`: must be >= 2, got {n_steps}");
    }
    let n_paths = match raw.take_parsed::<i64>("n_paths")? {
        None => 10_000,
        Some(n) if n >= 100 => n as usize,
        Some(n) => bail!("field `n_paths`: must be >= 100, got {n}"),
    };
    let seed = raw.take_parsed::<u64>("seed")?.unwrap_or(42);

    let benchmark = match raw.take("benchmark") {
        None => match model_name.as_str() {
            "heston" => BenchmarkKind::HestonCf,
            "constant" => BenchmarkKind::Bs,
            _ => BenchmarkKind::HighresMc,
        },
        Some(v) => match v.as_str() {
            "highres_mc" => BenchmarkKind::HighresMc,
            "heston_cf" => BenchmarkKind::HestonCf,
            "bs" => BenchmarkKind::Bs,
            other => bail!("field `benchmark`: unknown oracle `{other}`"),
        },
    };
    if benchmark == BenchmarkKind::HestonCf && model_name != "heston" {
        bail!("field `benchmark`: heston_cf only prices the heston model");
    }
    if benchmark == BenchmarkKind::Bs && model_name != "constant" {
        bail!("field `benchmark`: bs is only exact for the constant model");
    }
    let benchmark_paths = raw.take_parsed::<usize>("benchmark_paths")?.unwrap_or(1_000_000);
    let benchmark_steps = raw.take_parsed::<usize>("benchmark_steps")?.unwrap_or(1000);
    if benchmark_paths < 100 || benchmark_steps < 2 {
        bail!("fields `benchmark_paths`/`benchmark_steps`: too small for a benchmark");
    }

    let delta_factor = raw.take_parsed::<f64>("delta_factor")?.unwrap_or(0.01);
    let epsilon = raw
        .take_parsed::<f64>("epsilon")?
        .unwrap_or_else(|| default_epsilon(&model_name));
    let gamma = raw.take_parsed::<f64>("gamma")?.unwrap_or(DEFAULT_GAMMA);
    if epsilon < 0.0 || gamma < 0.0 {
        bail!("fields `epsilon`/`gamma`: must be >= 0");
    }

    let format = match raw.take("format") {
        None => OutputFormat::Csv,
        Some(v) => match v.as_str() {
            "csv" => OutputFormat::Csv,
            "markdown" => OutputFormat::Markdown,
            other => bail!("field `format`: expected csv or markdown, got `{other}`"),
        },
    };

    raw.reject_unknown()?;

    Ok(ExperimentConfig {
        model_name,
        params,
        strikes,
        maturities,
        rhos,
        methods,
        n_steps,
        n_paths,
        seed,
        benchmark,
        benchmark_paths,
        benchmark_steps,
        delta_factor,
        epsilon,
        gamma,
        format,
    })
}

/// Loads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in config {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config("model = hull_white\nstrikes = 100\n").unwrap();
        assert_eq!(cfg.n_steps, 500);
        assert_eq!(cfg.n_paths, 10_000);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.epsilon, 0.0); // hull_white keeps its own floor
        assert_eq!(cfg.gamma, 1e-5);
        assert_eq!(cfg.delta_factor, 0.01);
        assert_eq!(cfg.params.mu, Some(0.2));
        assert_eq!(cfg.params.rate, 0.0953);
        assert_eq!(cfg.methods.len(), 5);
        assert_eq!(cfg.benchmark, BenchmarkKind::HighresMc);
        assert_eq!(cfg.rhos, vec![-0.5]);
    }

    #[test]
    fn stein_stein_gets_epsilon_default() {
        let cfg = parse_config("model = stein_stein\nstrikes = 100\n").unwrap();
        assert_eq!(cfg.epsilon, 1e-5);
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let err = parse_config("model = hull_white\nstrikes = 100\nfoo = 1\n").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("foo"), "{msg}");
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let err = parse_config("model = heston\nmodel = heston\nstrikes = 100\n").unwrap_err();
        assert!(format!("{err}").contains("already set"));
    }

    #[test]
    fn negative_n_paths_is_rejected() {
        let err = parse_config("model = hull_white\nstrikes = 100\nn_paths = -5\n").unwrap_err();
        assert!(format!("{err}").contains("n_paths"));
    }

    #[test]
    fn bad_syntax_reports_line_number() {
        let err = parse_config("model = hull_white\nstrikes\n").unwrap_err();
        assert!(format!("{err}").contains("line 2"));
    }

    #[test]
    fn method_list_parses() {
        let cfg =
            parse_config("model = hull_white\nstrikes = 100\nmethods = ExpA-2, ExpM-2\n").unwrap();
        assert_eq!(cfg.methods.len(), 2);
        assert_eq!(cfg.methods[0].label, "ExpA-2");
        let err = parse_config("model = hull_white\nstrikes = 100\nmethods = ExpZ\n").unwrap_err();
        assert!(format!("{err}").contains("ExpZ"));
    }

    #[test]
    fn benchmark_must_fit_model() {
        assert!(parse_config("model = hull_white\nstrikes = 100\nbenchmark = heston_cf\n").is_err());
        assert!(parse_config("model = heston\nstrikes = 100\nbenchmark = heston_cf\n").is_ok());
    }
}
