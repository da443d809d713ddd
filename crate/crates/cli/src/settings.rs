//! Flat `key = value` settings merged from a config file, the environment and
//! command-line flags (in increasing precedence), then converted to typed
//! experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use uoi::experiment::{CurParams, ExperimentConfig, ExperimentTask, SweepParameter, SweepSpec};
use uoi::synthetic::{BetaDistribution, GeneratorSpec};
use uoi::uoi::{GridSpec, SelectionVariant};
use uoi::SeedSpec;

#[derive(Debug)]
pub struct SettingsError(pub String);

impl fmt::Display for SettingsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn err(msg: impl Into<String>) -> SettingsError {
    SettingsError(msg.into())
}

pub fn normalize_key(key: &str) -> String {
    key.trim().replace('_', "-").to_ascii_lowercase()
}

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_config_text(text: &str, origin: &Path) -> Result<BTreeMap<String, String>, SettingsError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(err(format!(
                "{}:{}: expected `key = value`",
                origin.display(),
                i + 1
            )));
        };
        let key = normalize_key(k);
        if key.is_empty() {
            return Err(err(format!("{}:{}: empty key", origin.display(), i + 1)));
        }
        let value = v.trim().trim_matches('"').to_string();
        out.insert(key, value);
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, SettingsError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| err(format!("{}: {e}", path.display())))?;
    parse_config_text(&text, path)
}

/// Merged settings with typed accessors.
#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn new(values: BTreeMap<String, String>) -> Self {
        Self { values }
    }

    pub fn check_known(&self, known: &[&str]) -> Result<(), SettingsError> {
        match self.values.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(err(format!("unknown setting `{k}`"))),
            None => Ok(()),
        }
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, SettingsError>
    where
        T::Err: fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| err(format!("invalid value `{v}` for {key}: {e}"))),
        }
    }

    fn set<T: FromStr>(&self, key: &str, target: &mut T) -> Result<(), SettingsError>
    where
        T::Err: fmt::Display,
    {
        if let Some(v) = self.get(key)? {
            *target = v;
        }
        Ok(())
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.values.get(key).map(PathBuf::from)
    }

    fn flag(&self, key: &str) -> Result<Option<bool>, SettingsError> {
        match self.values.get(key).map(|v| v.to_ascii_lowercase()) {
            None => Ok(None),
            Some(v) => match v.as_str() {
                "true" | "yes" | "1" | "on" => Ok(Some(true)),
                "false" | "no" | "0" | "off" => Ok(Some(false)),
                _ => Err(err(format!("invalid value `{v}` for {key}: expected true or false"))),
            },
        }
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, SettingsError>
    where
        T::Err: fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<T>()
                        .map_err(|e| err(format!("invalid entry `{s}` in {key}: {e}")))
                })
                .collect::<Result<Vec<T>, _>>()
                .map(Some),
        }
    }

    pub fn output(&self) -> Option<PathBuf> {
        self.path("out")
    }

    pub fn generator(&self) -> Result<GeneratorSpec, SettingsError> {
        let mut g = GeneratorSpec::default();
        self.set("n", &mut g.n)?;
        self.set("p", &mut g.p)?;
        self.set("k", &mut g.k)?;
        self.set("noise", &mut g.noise_multiplier)?;
        self.set("beta-min", &mut g.beta_min)?;
        self.set("beta-max", &mut g.beta_max)?;
        if let Some(d) = self.values.get("distribution") {
            g.distribution = BetaDistribution::from_str(d).map_err(|_| {
                let names: Vec<&str> = BetaDistribution::ALL.iter().map(|d| d.name()).collect();
                err(format!("unknown distribution `{d}`; expected one of {}", names.join(", ")))
            })?;
        }
        if let Some(s) = self.get::<u64>("seed")? {
            g.seed = SeedSpec::new(s);
        }
        g.validate().map_err(|e| err(e.to_string()))?;
        Ok(g)
    }

    pub fn experiment(&self, task: ExperimentTask) -> Result<ExperimentConfig, SettingsError> {
        let mut c = ExperimentConfig {
            task,
            x_path: self.path("x"),
            y_path: self.path("y"),
            beta_path: self.path("beta"),
            output: self.output(),
            csv_output: self.path("csv-out"),
            ..Default::default()
        };
        self.set("reps", &mut c.repetitions)?;
        self.set("workers", &mut c.workers)?;
        if c.workers == 0 {
            return Err(err("workers must be at least 1"));
        }
        if let Some(b) = self.flag("baseline")? {
            c.baseline = b;
        }

        let u = &mut c.uoi;
        self.set("b1", &mut u.b1)?;
        self.set("b2", &mut u.b2)?;
        if let GridSpec::Auto { size, ratio } = &mut u.grid {
            self.set("grid-size", size)?;
            self.set("grid-ratio", ratio)?;
        }
        if let Some(s) = self.get::<u64>("seed")? {
            u.seed = SeedSpec::new(s);
        }
        if let Some(v) = self.values.get("variant") {
            u.selection_variant = match v.to_ascii_lowercase().as_str() {
                "bolasso" => SelectionVariant::Bolasso,
                "stability" => SelectionVariant::Stability,
                _ => return Err(err(format!("unknown variant `{v}`; expected bolasso or stability"))),
            };
        }
        self.set("alpha", &mut u.stability_alpha)?;
        self.set("pi-thr", &mut u.stability_pi_thr)?;
        self.set("subsamples", &mut u.stability_subsamples)?;
        self.set("tol", &mut u.solver.tol)?;
        self.set("max-iter", &mut u.solver.max_iter)?;
        if let Some(b) = self.flag("standardize")? {
            u.standardize = b;
        }
        u.validate().map_err(|e| err(e.to_string()))?;

        if task == ExperimentTask::Cur {
            let mut cur = CurParams::default();
            if let Some(r) = self.list("ranks")? {
                cur.ranks = r;
            }
            self.set("cols-per-rank", &mut cur.cols_per_rank)?;
            if let Some(b) = self.flag("encoded")? {
                cur.encoded = b;
            }
            c.cur = cur;
        }
        if task == ExperimentTask::Sweep {
            c.generator = self.generator()?;
            // the data draw follows the repetition seed, not the generator seed
            c.generator.seed = c.uoi.seed;
            let parameter = match self.values.get("parameter").map(|s| s.to_ascii_lowercase()) {
                Some(p) => match p.as_str() {
                    "b1" => SweepParameter::B1,
                    "b2" => SweepParameter::B2,
                    "noise" => SweepParameter::Noise,
                    "sparsity" => SweepParameter::Sparsity,
                    _ => return Err(err(format!("unknown sweep parameter `{p}`"))),
                },
                None => return Err(err("sweep needs --parameter {b1|b2|noise|sparsity}")),
            };
            let values = self
                .list::<f64>("values")?
                .filter(|v| !v.is_empty())
                .ok_or_else(|| err("sweep needs --values LIST"))?;
            c.sweep = Some(SweepSpec {
                parameter,
                values,
                samples_per_feature: self.get("samples-per-feature")?,
            });
        }
        if matches!(task, ExperimentTask::Lasso | ExperimentTask::Logistic)
            && (c.x_path.is_none() || c.y_path.is_none())
        {
            return Err(err("--x and --y are required"));
        }
        if task == ExperimentTask::Cur && c.x_path.is_none() {
            return Err(err("--x is required"));
        }
        Ok(c)
    }
}
