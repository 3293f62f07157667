//! One function per subcommand. Each writes its files into the output
//! directory and returns a JSON summary plus the outcome of `--check`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use igaspec::analysis::{
    auto_concave_window, estimate_errors, ordering_hypothesis_from_family, orient_pair, pack_counts,
    uniform_probes, verify_ordering, weyl_counting, EstimateReport, Monotonic, OrderingReport, PackReport,
    WeylReport,
};
use igaspec::assembly::assemble_pair;
use igaspec::distribution::{slope_at_zero, GammaSlope, PsiFunction, Rearrangement};
use igaspec::eigensolve::DiscreteSpectrum;
use igaspec::pipeline::{spectra_for_ladder, spectrum_for};
use igaspec::reparam::{Convexity, Reparametrization};
use igaspec::symbol::FullSymbol;
use serde::Serialize;

use crate::config::{
    parse_list, ConfigError, FamilySpec, Settings, DEFAULT_ORDER_PROBES, DEFAULT_PACK_CELLS, DEFAULT_PROBES,
    DEFAULT_SYMBOL_GRID,
};

/// Failure of a subcommand, classified by exit status.
#[derive(Debug)]
pub enum CommandError {
    Config(ConfigError),
    Library(igaspec::Error),
    Io(std::io::Error),
}

impl CommandError {
    pub fn exit_code(&self) -> u8 {
        use igaspec::Error as E;
        match self {
            CommandError::Config(_) => 2,
            CommandError::Library(
                E::InvalidArgument(_)
                | E::OutOfRange { .. }
                | E::Unsupported(_)
                | E::InvalidReparametrization(_)
                | E::InvalidPair(_),
            ) => 2,
            CommandError::Library(_) | CommandError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CommandError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CommandError::Config(e) => write!(f, "configuration error: {e}"),
            CommandError::Library(e) => write!(f, "{e}"),
            CommandError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<ConfigError> for CommandError {
    fn from(e: ConfigError) -> Self {
        CommandError::Config(e)
    }
}

impl From<igaspec::Error> for CommandError {
    fn from(e: igaspec::Error) -> Self {
        CommandError::Library(e)
    }
}

impl From<std::io::Error> for CommandError {
    fn from(e: std::io::Error) -> Self {
        CommandError::Io(e)
    }
}

pub type CmdResult = Result<Outcome, CommandError>;

/// Summary printed to stdout and whether the checked property held.
pub struct Outcome {
    /// Pretty JSON, identical to the `<command>.json` file.
    pub summary: String,
    pub passed: bool,
    pub check_enabled: bool,
}

#[derive(Serialize)]
struct CheckStatus {
    enabled: bool,
    passed: bool,
}

fn create(dir: &Path, name: &str) -> std::io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<String, CommandError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CommandError::Io(e.into()))?;
    fs::write(dir.join(name), format!("{text}\n"))?;
    Ok(text)
}

fn out_dir(settings: &Settings) -> Result<std::path::PathBuf, CommandError> {
    let dir = settings.out_dir();
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn psi_for(settings: &Settings, p: usize, phi: &Reparametrization) -> Result<PsiFunction, CommandError> {
    let method = settings.psi_method(p)?;
    Ok(PsiFunction::new(FullSymbol::new(p, phi.clone())?, method)?)
}

#[derive(Serialize)]
struct SpectrumSummary<'a> {
    command: &'static str,
    seed: u64,
    reparametrization: FamilySpec,
    p: usize,
    n: usize,
    size: usize,
    outlier_count: usize,
    max_range: f64,
    near_ties: &'a [usize],
    min_eigenvalue: f64,
    max_eigenvalue: f64,
    check: CheckStatus,
}

/// Spectrum CSV, JSON summary and optional matrix triplets.
///
/// Check: the solve produced `N` positive eigenvalues without near ties.
pub fn spectrum(settings: &Settings, dump_matrices: bool) -> CmdResult {
    let p = settings.degree()?;
    let n = settings.intervals()?;
    let family = settings.family()?;
    let seed = settings.seed()?;
    let phi = family.build()?;
    let dir = out_dir(settings)?;

    let spec = spectrum_for(p, n, &phi)?;
    let mut csv = create(&dir, "spectrum.csv")?;
    spec.write_csv(&mut csv)?;
    csv.flush()?;
    if dump_matrices {
        let (m, k) = assemble_pair(p, n, &phi)?;
        let mut out = create(&dir, "mass.txt")?;
        m.write_triplets(&mut out)?;
        out.flush()?;
        let mut out = create(&dir, "stiffness.txt")?;
        k.write_triplets(&mut out)?;
        out.flush()?;
    }

    let passed = spec.eigenvalues.len() == spec.size
        && spec.eigenvalues.iter().all(|&l| l > 0.0)
        && spec.near_ties.is_empty();
    let summary = SpectrumSummary {
        command: "spectrum",
        seed,
        reparametrization: family,
        p,
        n,
        size: spec.size,
        outlier_count: spec.outlier_count,
        max_range: spec.max_range,
        near_ties: &spec.near_ties,
        min_eigenvalue: spec.eigenvalues[0],
        max_eigenvalue: spec.eigenvalues[spec.size - 1],
        check: CheckStatus {
            enabled: settings.check,
            passed,
        },
    };
    let summary = write_json(&dir, "spectrum.json", &summary)?;
    Ok(Outcome {
        summary,
        passed,
        check_enabled: settings.check,
    })
}

#[derive(Serialize)]
struct SymbolSummary {
    command: &'static str,
    seed: u64,
    reparametrization: FamilySpec,
    p: usize,
    psi_method: &'static str,
    max_symbol: f64,
    max_frequency: f64,
    explicit_breakpoint: Option<f64>,
    slope: Option<GammaSlope>,
    grid: usize,
    probes: usize,
    psi_at_max: f64,
    check: CheckStatus,
}

/// Symbol grid, Ψ table and √ξ table.
///
/// Check: Ψ reaches π at the top of the range and `Ψ(√ξ(x)) = πx` on the table.
pub fn symbol(settings: &Settings, grid: Option<usize>) -> CmdResult {
    let p = settings.degree()?;
    let family = settings.family()?;
    let seed = settings.seed()?;
    let probes = settings.probes(DEFAULT_PROBES)?;
    let grid = grid.unwrap_or(DEFAULT_SYMBOL_GRID);
    if grid < 2 {
        return Err(ConfigError("field `grid` must be at least 2".into()).into());
    }
    let phi = family.build()?;
    let dir = out_dir(settings)?;
    let psi = psi_for(settings, p, &phi)?;

    let mut out = create(&dir, "symbol.csv")?;
    psi.symbol().write_grid_csv(&mut out, grid, grid)?;
    out.flush()?;

    let ys = uniform_probes(psi.max_y(), probes);
    let mut out = create(&dir, "psi.csv")?;
    psi.write_csv(&mut out, &ys)?;
    out.flush()?;

    let xs: Vec<f64> = (0..probes).map(|i| i as f64 / (probes - 1) as f64).collect();
    let slope = if phi.is_strict() {
        Some(slope_at_zero(&psi)?)
    } else {
        None
    };
    let re = Rearrangement::new(psi.clone());
    let roots = re.eval_many(&xs)?;
    let mut out = create(&dir, "xi.csv")?;
    writeln!(out, "x,sqrt_xi")?;
    for (x, r) in xs.iter().zip(&roots) {
        writeln!(out, "{x:.16e},{r:.16e}")?;
    }
    out.flush()?;

    let psi_at_max = psi.eval(psi.max_y());
    let round_trip = psi
        .eval_many(&roots)
        .iter()
        .zip(&xs)
        .all(|(v, x)| (v - std::f64::consts::PI * x).abs() <= 1e-9);
    let passed = (psi_at_max - std::f64::consts::PI).abs() <= 1e-9 && round_trip;
    let summary = SymbolSummary {
        command: "symbol",
        seed,
        reparametrization: family,
        p,
        psi_method: psi.method().name(),
        max_symbol: psi.symbol().max_value(),
        max_frequency: psi.max_y(),
        explicit_breakpoint: psi.explicit_breakpoint(),
        slope,
        grid,
        probes,
        psi_at_max,
        check: CheckStatus {
            enabled: settings.check,
            passed,
        },
    };
    let summary = write_json(&dir, "symbol.json", &summary)?;
    Ok(Outcome {
        summary,
        passed,
        check_enabled: settings.check,
    })
}

#[derive(Serialize)]
struct WeylSummary<'a> {
    command: &'static str,
    seed: u64,
    reparametrization: FamilySpec,
    p: usize,
    psi_method: &'static str,
    n_values: &'a [usize],
    outlier_counts: Vec<usize>,
    sup_errors: &'a [f64],
    sup_nonincreasing: bool,
    probes: usize,
    check: CheckStatus,
}

/// Weyl counting errors over the `n` ladder.
///
/// Check: the sup error is nonincreasing along the ladder.
pub fn weyl(settings: &Settings) -> CmdResult {
    let p = settings.degree()?;
    let ladder = settings.ladder()?;
    let family = settings.family()?;
    let seed = settings.seed()?;
    let probes = settings.probes(DEFAULT_PROBES)?;
    let phi = family.build()?;
    let dir = out_dir(settings)?;
    let psi = psi_for(settings, p, &phi)?;

    let probe_y = uniform_probes(psi.max_y(), probes);
    let spectra = spectra_for_ladder(p, &ladder, &phi)?;
    let mut runs = Vec::with_capacity(spectra.len());
    for s in &spectra {
        let report = weyl_counting(s, &psi, &probe_y)?;
        runs.push(igaspec::analysis::WeylRun {
            n: s.n,
            sup_error: report.sup_errors[0],
            pointwise_errors: report.pointwise_errors.into_iter().next().unwrap_or_default(),
        });
    }
    let report = WeylReport::from_runs(p, probe_y, runs);
    let mut out = create(&dir, "weyl.csv")?;
    report.write_csv(&mut out)?;
    out.flush()?;

    let passed = report.sup_nonincreasing;
    let summary = WeylSummary {
        command: "weyl",
        seed,
        reparametrization: family,
        p,
        psi_method: psi.method().name(),
        n_values: &report.n_values,
        outlier_counts: spectra.iter().map(|s| s.outlier_count).collect(),
        sup_errors: &report.sup_errors,
        sup_nonincreasing: report.sup_nonincreasing,
        probes,
        check: CheckStatus {
            enabled: settings.check,
            passed,
        },
    };
    let summary = write_json(&dir, "weyl.json", &summary)?;
    Ok(Outcome {
        summary,
        passed,
        check_enabled: settings.check,
    })
}

#[derive(Serialize)]
struct OrderSummary<'a> {
    command: &'static str,
    seed: u64,
    phi1: FamilySpec,
    phi2: FamilySpec,
    psi_method: &'static str,
    report: &'a OrderingReport,
    check: CheckStatus,
}

/// Parses `exp:2,exp:1` into two family specs sharing `gamma`.
fn parse_pair(settings: &Settings, text: &str) -> Result<[FamilySpec; 2], ConfigError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(ConfigError(format!(
            "field `pair` needs two entries, got `{text}`"
        )));
    }
    let mut specs = [FamilySpec::Identity; 2];
    for (slot, part) in specs.iter_mut().zip(parts) {
        let Some((name, a)) = part.split_once(':') else {
            return Err(ConfigError(format!(
                "field `pair` entries look like `exp:2`, got `{part}`"
            )));
        };
        let a: f64 = a
            .parse()
            .map_err(|_| ConfigError(format!("field `pair` has an invalid `a` in `{part}`")))?;
        *slot = match settings.family_named(name, Some(a))? {
            FamilySpec::Identity => return Err(ConfigError("field `pair` needs exp or log families".into())),
            spec => spec,
        };
    }
    Ok(specs)
}

fn spec_of(phi: &Reparametrization, specs: &[FamilySpec; 2], maps: &[Reparametrization; 2]) -> FamilySpec {
    // orient_pair may swap the maps; recover which spec each came from
    let same = |a: &Reparametrization, b: &Reparametrization| {
        (0..=8).all(|i| {
            let x = i as f64 / 8.0;
            a.deriv1(x) == b.deriv1(x)
        })
    };
    if same(phi, &maps[0]) {
        specs[0]
    } else {
        specs[1]
    }
}

/// Same-index ordering of two spectra on the interval certified by the pair.
///
/// Check: `Ψ₁ > Ψ₂` on the interval and no pair violates the ordering.
pub fn order(settings: &Settings, pair: Option<&str>) -> CmdResult {
    let p = settings.degree()?;
    let n = settings.intervals()?;
    let seed = settings.seed()?;
    let probes = settings.probes(DEFAULT_ORDER_PROBES)?;
    let pair = pair.ok_or_else(|| ConfigError("missing required field `pair`".into()))?;
    let specs = parse_pair(settings, pair)?;
    let maps = [specs[0].build()?, specs[1].build()?];
    let (phi1, phi2) = orient_pair(maps[0].clone(), maps[1].clone());
    let (spec1, spec2) = (spec_of(&phi1, &specs, &maps), spec_of(&phi2, &specs, &maps));
    let dir = out_dir(settings)?;

    let interval = ordering_hypothesis_from_family(&phi1, &phi2, p)?;
    let psi1 = psi_for(settings, p, &phi1)?;
    let psi2 = psi_for(settings, p, &phi2)?;
    let s1 = spectrum_for(p, n, &phi1)?;
    let s2 = spectrum_for(p, n, &phi2)?;
    let report = verify_ordering(&s1, &s2, &psi1, &psi2, interval, probes)?;
    let mut out = create(&dir, "order_pairs.csv")?;
    report.write_pairs_csv(&mut out, &s1, &s2)?;
    out.flush()?;

    let passed = report.passed();
    let summary = OrderSummary {
        command: "order",
        seed,
        phi1: spec1,
        phi2: spec2,
        psi_method: psi1.method().name(),
        report: &report,
        check: CheckStatus {
            enabled: settings.check,
            passed,
        },
    };
    let summary = write_json(&dir, "order.json", &summary)?;
    Ok(Outcome {
        summary,
        passed,
        check_enabled: settings.check,
    })
}

#[derive(Serialize)]
struct PackSummary<'a> {
    command: &'static str,
    seed: u64,
    reparametrization: FamilySpec,
    window: &'static str,
    /// Whether the window carries a concavity certificate for `Ψ`.
    certified_concave: bool,
    report: &'a PackReport,
    check: CheckStatus,
}

/// Frequency counts per cell of a uniform partition of a window.
///
/// Check: when the window carries a concavity certificate (degree 1, strictly
/// convex map, automatic window) the counts must be strictly decreasing.
/// Other windows only produce a report.
pub fn pack(settings: &Settings, window: Option<&str>, r: Option<usize>) -> CmdResult {
    let p = settings.degree()?;
    let n = settings.intervals()?;
    let family = settings.family()?;
    let seed = settings.seed()?;
    let r = r.unwrap_or(DEFAULT_PACK_CELLS);
    let phi = family.build()?;
    let window = window.unwrap_or("auto-concave");
    let (interval, label) = match window {
        "auto-concave" => (auto_concave_window(&phi), "auto-concave"),
        explicit => {
            let bounds: Vec<f64> = parse_list(explicit, "window")?;
            if bounds.len() != 2 {
                return Err(ConfigError(format!(
                    "field `window` must be `auto-concave` or `lo,hi`, got `{explicit}`"
                ))
                .into());
            }
            ((bounds[0], bounds[1]), "explicit")
        }
    };
    let dir = out_dir(settings)?;

    let spec = spectrum_for(p, n, &phi)?;
    let report = pack_counts(&spec, interval, r)?;
    let mut out = create(&dir, "pack.csv")?;
    report.write_csv(&mut out)?;
    out.flush()?;

    let certified = p == 1 && phi.convexity() == Convexity::StrictlyConvex && label == "auto-concave";
    let passed = !certified || report.monotonic == Monotonic::Decreasing;
    let summary = PackSummary {
        command: "pack",
        seed,
        reparametrization: family,
        window: label,
        certified_concave: certified,
        report: &report,
        check: CheckStatus {
            enabled: settings.check,
            passed,
        },
    };
    let summary = write_json(&dir, "pack.json", &summary)?;
    Ok(Outcome {
        summary,
        passed,
        check_enabled: settings.check,
    })
}

#[derive(Serialize)]
struct EstimateSummary<'a> {
    command: &'static str,
    seed: u64,
    reparametrization: FamilySpec,
    p: usize,
    psi_method: &'static str,
    slope: GammaSlope,
    reports: &'a [EstimateReport],
    abs_error_decreasing: bool,
    check: CheckStatus,
}

/// Sampling errors of the inlier frequencies against `√ξ` over the ladder.
///
/// Check: the absolute error strictly decreases along the ladder.
pub fn estimate(settings: &Settings) -> CmdResult {
    let p = settings.degree()?;
    let ladder = settings.ladder()?;
    let family = settings.family()?;
    let seed = settings.seed()?;
    let phi = family.build()?;
    let dir = out_dir(settings)?;
    let psi = psi_for(settings, p, &phi)?;
    let slope = slope_at_zero(&psi)?;
    let re = Rearrangement::new(psi.clone());

    let spectra: Vec<DiscreteSpectrum> = spectra_for_ladder(p, &ladder, &phi)?;
    let reports = spectra
        .iter()
        .map(|s| estimate_errors(s, &re, &slope))
        .collect::<igaspec::Result<Vec<_>>>()?;
    let mut out = create(&dir, "estimate.csv")?;
    writeln!(
        out,
        "p,n,inlier_count,abs_error,weighted_rel_error,uniform_rel_error"
    )?;
    for r in &reports {
        writeln!(
            out,
            "{},{},{},{:.16e},{:.16e},{:.16e}",
            r.p, r.n, r.inlier_count, r.abs_error, r.weighted_rel_error, r.uniform_rel_error
        )?;
    }
    out.flush()?;

    let decreasing = reports.windows(2).all(|w| w[1].abs_error < w[0].abs_error);
    let summary = EstimateSummary {
        command: "estimate",
        seed,
        reparametrization: family,
        p,
        psi_method: psi.method().name(),
        slope,
        reports: &reports,
        abs_error_decreasing: decreasing,
        check: CheckStatus {
            enabled: settings.check,
            passed: decreasing,
        },
    };
    let summary = write_json(&dir, "estimate.json", &summary)?;
    Ok(Outcome {
        summary,
        passed: decreasing,
        check_enabled: settings.check,
    })
}
