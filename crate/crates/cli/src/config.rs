//! Experiment configuration: command-line flags layered over an optional
//! `key = value` file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::Args;
use igaspec::distribution::PsiMethod;
use igaspec::reparam::Reparametrization;
use serde::Serialize;

pub const DEFAULT_N_LADDER: [usize; 4] = [64, 128, 256, 512];
pub const DEFAULT_PROBES: usize = 1000;
pub const DEFAULT_SYMBOL_GRID: usize = 64;
pub const DEFAULT_ORDER_PROBES: usize = 64;
pub const DEFAULT_PACK_CELLS: usize = 8;

/// A configuration error: a usage problem rather than a numerical failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError(msg.into()))
}

/// Flags shared by every subcommand. Each one can also be given in the
/// config file under the same name with dashes replaced by underscores.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Key = value file read before the flags; flags win on conflicts.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Spline degree.
    #[arg(long)]
    pub p: Option<usize>,
    /// Number of knot intervals.
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma separated list of knot interval counts.
    #[arg(long, value_name = "N1,N2,...")]
    pub n_ladder: Option<String>,
    /// identity, exp_convex, log_concave.
    #[arg(long)]
    pub family: Option<String>,
    /// Family shape parameter.
    #[arg(long)]
    pub a: Option<f64>,
    /// Pinned endpoint derivative of the family.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// explicit_p1, integral_1d or grid_2d_oracle.
    #[arg(long)]
    pub psi_method: Option<String>,
    /// Resolution of the grid oracle.
    #[arg(long)]
    pub grid_resolution: Option<usize>,
    /// Number of probe points for tables and sup estimates.
    #[arg(long)]
    pub probes: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed recorded with the results; every probe set is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Turn the report properties into the exit status.
    #[arg(long)]
    pub check: bool,
}

/// Reparametrization family as named in configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum FamilySpec {
    Identity,
    ExpConvex { a: f64, gamma: f64 },
    LogConcave { a: f64, gamma: f64 },
}

impl FamilySpec {
    pub fn build(&self) -> igaspec::Result<Reparametrization> {
        match *self {
            FamilySpec::Identity => Ok(Reparametrization::identity()),
            FamilySpec::ExpConvex { a, gamma } => Reparametrization::exp_convex(a, gamma),
            FamilySpec::LogConcave { a, gamma } => Reparametrization::log_concave(a, gamma),
        }
    }
}

/// Raw settings, merged from file and flags, before validation.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
    pub check: bool,
}

const COMMON_KEYS: &[&str] = &[
    "p",
    "n",
    "n_ladder",
    "family",
    "a",
    "gamma",
    "psi_method",
    "grid_resolution",
    "probes",
    "out",
    "seed",
];

impl Settings {
    /// Reads `key = value` lines; `#` starts a comment, blank lines are skipped.
    pub fn parse_file(text: &str, source: &Path, allowed: &[&str]) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = format!("{}:{}", source.display(), i + 1);
            let Some((key, value)) = line.split_once('=') else {
                return err(format!("{at}: expected `key = value`, got `{line}`"));
            };
            let key = key.trim().replace('-', "_");
            if !COMMON_KEYS.contains(&key.as_str()) && !allowed.contains(&key.as_str()) && key != "check" {
                return err(format!("{at}: unknown key `{key}`"));
            }
            values.insert(key, value.trim().to_string());
        }
        let check = match values.remove("check").as_deref() {
            None => false,
            Some("true") => true,
            Some("false") => false,
            Some(other) => return err(format!("field `check` must be true or false, got `{other}`")),
        };
        Ok(Self { values, check })
    }

    /// Loads the optional file then applies the flags on top.
    pub fn load(common: &CommonArgs, extra: &[(&str, Option<String>)]) -> Result<Self> {
        let allowed: Vec<&str> = extra.iter().map(|(k, _)| *k).collect();
        let mut settings = match &common.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
                Self::parse_file(&text, path, &allowed)?
            }
            None => Self::default(),
        };
        let flags: [(&str, Option<String>); 11] = [
            ("p", common.p.map(|v| v.to_string())),
            ("n", common.n.map(|v| v.to_string())),
            ("n_ladder", common.n_ladder.clone()),
            ("family", common.family.clone()),
            ("a", common.a.map(|v| v.to_string())),
            ("gamma", common.gamma.map(|v| v.to_string())),
            ("psi_method", common.psi_method.clone()),
            ("grid_resolution", common.grid_resolution.map(|v| v.to_string())),
            ("probes", common.probes.map(|v| v.to_string())),
            ("out", common.out.as_ref().map(|v| v.display().to_string())),
            ("seed", common.seed.map(|v| v.to_string())),
        ];
        for (key, value) in flags.into_iter().chain(extra.iter().cloned()) {
            if let Some(v) = value {
                settings.values.insert(key.to_string(), v);
            }
        }
        settings.check |= common.check;
        Ok(settings)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| ConfigError(format!("field `{key}` has an invalid value `{v}`"))),
        }
    }

    pub fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.parsed(key)?
            .ok_or_else(|| ConfigError(format!("missing required field `{key}`")))
    }

    pub fn optional<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.parsed(key)
    }

    pub fn degree(&self) -> Result<usize> {
        let p: usize = self.required("p")?;
        if p < 1 {
            return err("field `p` must be at least 1");
        }
        Ok(p)
    }

    pub fn intervals(&self) -> Result<usize> {
        let n: usize = self.required("n")?;
        if n < 2 {
            return err("field `n` must be at least 2");
        }
        Ok(n)
    }

    /// `n_ladder`, falling back to `n` alone, then to the default ladder.
    pub fn ladder(&self) -> Result<Vec<usize>> {
        let ladder = match (self.raw("n_ladder"), self.optional::<usize>("n")?) {
            (Some(list), _) => parse_list(list, "n_ladder")?,
            (None, Some(n)) => vec![n],
            (None, None) => DEFAULT_N_LADDER.to_vec(),
        };
        if ladder.is_empty() || ladder.iter().any(|&n| n < 2) {
            return err("field `n_ladder` needs values of at least 2");
        }
        if ladder.windows(2).any(|w| w[1] <= w[0]) {
            return err("field `n_ladder` must be strictly ascending");
        }
        Ok(ladder)
    }

    pub fn family(&self) -> Result<FamilySpec> {
        let name = self.raw("family").unwrap_or("identity");
        self.family_named(name, self.optional("a")?)
    }

    /// Builds a family spec from a name and an optional `a`; `gamma` is shared.
    pub fn family_named(&self, name: &str, a: Option<f64>) -> Result<FamilySpec> {
        let need = |field: &str, v: Option<f64>| -> Result<f64> {
            v.ok_or_else(|| ConfigError(format!("missing required field `{field}` for family `{name}`")))
        };
        match name {
            "identity" => Ok(FamilySpec::Identity),
            "exp_convex" | "exp" => Ok(FamilySpec::ExpConvex {
                a: need("a", a)?,
                gamma: need("gamma", self.optional("gamma")?)?,
            }),
            "log_concave" | "log" => Ok(FamilySpec::LogConcave {
                a: need("a", a)?,
                gamma: need("gamma", self.optional("gamma")?)?,
            }),
            other => err(format!(
                "field `family` must be identity, exp_convex or log_concave, got `{other}`"
            )),
        }
    }

    pub fn psi_method(&self, p: usize) -> Result<PsiMethod> {
        let resolution = self
            .optional("grid_resolution")?
            .unwrap_or(igaspec::distribution::GRID_ORACLE_RESOLUTION);
        match self.raw("psi_method") {
            None => Ok(PsiMethod::default_for(p)),
            Some("explicit_p1") => Ok(PsiMethod::ExplicitP1),
            Some("integral_1d") => Ok(PsiMethod::Integral1d),
            Some("grid_2d_oracle") => Ok(PsiMethod::Grid2dOracle { resolution }),
            Some(other) => err(format!(
                "field `psi_method` must be explicit_p1, integral_1d or grid_2d_oracle, got `{other}`"
            )),
        }
    }

    pub fn probes(&self, default: usize) -> Result<usize> {
        let probes = self.optional("probes")?.unwrap_or(default);
        if probes < 2 {
            return err("field `probes` must be at least 2");
        }
        Ok(probes)
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.raw("out").unwrap_or("."))
    }

    pub fn seed(&self) -> Result<u64> {
        Ok(self.optional("seed")?.unwrap_or(0))
    }
}

/// Parses a comma separated list.
pub fn parse_list<T: std::str::FromStr>(text: &str, field: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| ConfigError(format!("field `{field}` has an invalid entry `{}`", s.trim())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_parsing_and_precedence() {
        let text = "# comment\np = 2\nfamily = exp_convex\na=1\ngamma = 0.5\n\nr = 4\n";
        let s = Settings::parse_file(text, Path::new("cfg"), &["r"]).unwrap();
        assert_eq!(s.degree().unwrap(), 2);
        assert_eq!(s.family().unwrap(), FamilySpec::ExpConvex { a: 1.0, gamma: 0.5 });
        assert_eq!(s.raw("r"), Some("4"));
    }

    #[test]
    fn unknown_keys_are_reported_with_line() {
        let e = Settings::parse_file("p = 1\nbogus = 3\n", Path::new("cfg"), &[]).unwrap_err();
        assert_eq!(e.0, "cfg:2: unknown key `bogus`");
        let e = Settings::parse_file("p 1\n", Path::new("cfg"), &[]).unwrap_err();
        assert!(e.0.starts_with("cfg:1:"));
    }

    #[test]
    fn missing_gamma_names_the_field() {
        let s = Settings::parse_file("family = exp_convex\na = 1\n", Path::new("cfg"), &[]).unwrap();
        let e = s.family().unwrap_err();
        assert!(e.0.contains("`gamma`"), "{}", e.0);
    }

    #[test]
    fn ladder_rules() {
        let s = Settings::parse_file("n_ladder = 64,128\n", Path::new("cfg"), &[]).unwrap();
        assert_eq!(s.ladder().unwrap(), vec![64, 128]);
        let s = Settings::parse_file("n_ladder = 128,64\n", Path::new("cfg"), &[]).unwrap();
        assert!(s.ladder().is_err());
        let s = Settings::default();
        assert_eq!(s.ladder().unwrap(), DEFAULT_N_LADDER.to_vec());
    }
}
