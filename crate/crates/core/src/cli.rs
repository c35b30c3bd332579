//! Command-line surface: fit, ladder, score, simulate, summarize.
//!
//! Every command is deterministic and idempotent: identical inputs rewrite
//! byte-identical outputs. The only randomness in the binary lives behind
//! `simulate --seed`. Exit codes: 0 success, 2 input error, 3 convergence
//! failure, 4 internal invariant violation.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{load_csv, summarize, write_csv, Dataset, HousingType};
use crate::diagnostics::{
    coefficient_rows, derive_ladder_specs, run_ladder, stars, LadderReport,
};
use crate::efficiency::{efficiency_report, TeEstimator};
use crate::error::{Error, Result};
use crate::likelihood::ParameterVector;
use crate::mle::{certify, fit, Convergence, Derived, FitResult};
use crate::model::{build, Family, ModelSpec};
use crate::simulate::{fixture_survey, generate, DgpSpec};

#[derive(Parser, Debug)]
#[command(
    name = "sfa",
    about = "Cross-sectional consumption-frontier estimation toolkit",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit one model from a survey CSV and a model-spec JSON.
    Fit(FitArgs),
    /// Fit the four-model ladder (OLS, NHN, NHN_HET, TN) and compare.
    Ladder(FitArgs),
    /// Score per-household efficiency from a prior fit.
    Score(ScoreArgs),
    /// Generate synthetic data: a full DGP or a survey-shaped fixture.
    Simulate(SimulateArgs),
    /// Per-variable summary statistics of a survey CSV.
    Summarize(SummarizeArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
    Table,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum TeChoice {
    Bc,
    Expjlms,
}

impl From<TeChoice> for TeEstimator {
    fn from(c: TeChoice) -> Self {
        match c {
            TeChoice::Bc => TeEstimator::Bc,
            TeChoice::Expjlms => TeEstimator::ExpJlms,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum HousingChoice {
    Srh,
    Slum,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Survey CSV (a `<input>.schema.json` sidecar remaps headers).
    #[arg(long)]
    pub input: PathBuf,
    /// Model specification JSON.
    #[arg(long)]
    pub spec: PathBuf,
    /// Output directory (created if absent).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    pub format: OutputFormat,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// The CSV the fit was produced from.
    #[arg(long)]
    pub input: PathBuf,
    /// Directory holding `fit.json`; score files are written next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    #[arg(long, value_enum, default_value_t = TeChoice::Bc)]
    pub te: TeChoice,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// DGP specification JSON (mutually exclusive with --housing).
    #[arg(long, conflicts_with = "housing")]
    pub spec: Option<PathBuf>,
    /// Survey-shaped fixture marginals to target.
    #[arg(long, value_enum)]
    pub housing: Option<HousingChoice>,
    /// Records to draw in fixture mode.
    #[arg(long, default_value_t = 625)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Optional output directory; stdout only when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    pub format: OutputFormat,
}

/// Run a parsed command; the returned code is the process exit status.
pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Fit(args) => cmd_fit(&args),
        Command::Ladder(args) => cmd_ladder(&args),
        Command::Score(args) => cmd_score(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Summarize(args) => cmd_summarize(&args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence { .. } => 3,
        Error::Certification(_) => 4,
        _ => 2,
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn read_spec(path: &Path) -> Result<ModelSpec> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Invalid(format!("cannot read spec `{}`: {e}", path.display())))?;
    let spec: ModelSpec = serde_json::from_str(&text)?;
    spec.validate()?;
    Ok(spec)
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    let sidecar = PathBuf::from(format!("{}.schema.json", path.display()));
    let schema: Option<HashMap<String, String>> = if sidecar.exists() {
        Some(serde_json::from_str(&fs::read_to_string(&sidecar)?)?)
    } else {
        None
    };
    let report = load_csv(path, schema.as_ref())?;
    for w in &report.warnings {
        eprintln!("warning: row {}: {}", w.row, w.reason);
    }
    if !report.rejections.is_empty() {
        eprintln!(
            "note: rejected {} of {} rows",
            report.rejections.len(),
            report.raw_rows
        );
        for r in report.rejections.iter().take(10) {
            eprintln!("  row {}: {}", r.row, r.reason);
        }
    }
    Ok(report.dataset)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    fs::write(path, buf)?;
    Ok(())
}

/// Serialized form of a fit, sufficient to reconstruct scoring inputs.
#[derive(Debug, Serialize, Deserialize)]
pub struct FitDocument {
    pub family: Family,
    pub n: usize,
    pub loglik: f64,
    pub labels: Vec<String>,
    /// Packed [β | ln σ_v² | ineff-block] estimates.
    pub estimates: Vec<f64>,
    pub se: Option<Vec<f64>>,
    pub z: Option<Vec<f64>>,
    pub p_values: Option<Vec<f64>>,
    pub derived: DerivedDoc,
    pub convergence: ConvergenceDoc,
    pub cov: Option<Vec<Vec<f64>>>,
    pub column_hash: String,
    pub spec: ModelSpec,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DerivedDoc {
    pub sigma_v: f64,
    pub sigma_u: f64,
    pub lambda: f64,
    pub sigma2: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ConvergenceDoc {
    pub iterations: usize,
    pub grad_norm: f64,
    pub restarts: usize,
    pub wrong_skew_warning: bool,
    pub boundary_collapse: bool,
    pub converged: bool,
    pub message: Option<String>,
}

impl FitDocument {
    pub fn from_fit(fr: &FitResult) -> Self {
        FitDocument {
            family: fr.spec.family,
            n: fr.n,
            loglik: fr.loglik,
            labels: fr.labels.clone(),
            estimates: fr.pv_hat.pack().iter().copied().collect(),
            se: fr.se.as_ref().map(|v| v.iter().copied().collect()),
            z: fr.z.as_ref().map(|v| v.iter().copied().collect()),
            p_values: fr.p_values.as_ref().map(|v| v.iter().copied().collect()),
            derived: DerivedDoc {
                sigma_v: fr.derived.sigma_v,
                sigma_u: fr.derived.sigma_u,
                lambda: fr.derived.lambda,
                sigma2: fr.derived.sigma2,
            },
            convergence: ConvergenceDoc {
                iterations: fr.convergence.iterations,
                grad_norm: fr.convergence.grad_norm,
                restarts: fr.convergence.restarts,
                wrong_skew_warning: fr.convergence.wrong_skew_warning,
                boundary_collapse: fr.convergence.boundary_collapse,
                converged: fr.convergence.converged,
                message: fr.convergence.message.clone(),
            },
            cov: fr.cov.as_ref().map(|m| {
                (0..m.nrows())
                    .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                    .collect()
            }),
            column_hash: fr.column_hash.clone(),
            spec: fr.spec.clone(),
        }
    }

    /// Rebuild an in-memory fit against the design it was produced from.
    pub fn to_fit_result(&self, p: usize, q: usize) -> Result<FitResult> {
        let packed = DVector::from_vec(self.estimates.clone());
        let pv_hat = ParameterVector::unpack(self.family, p, q, &packed)?;
        let cov = self.cov.as_ref().map(|rows| {
            DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i][j])
        });
        Ok(FitResult {
            spec: self.spec.clone(),
            labels: self.labels.clone(),
            pv_hat,
            loglik: self.loglik,
            cov,
            se: self.se.as_ref().map(|v| DVector::from_vec(v.clone())),
            z: self.z.as_ref().map(|v| DVector::from_vec(v.clone())),
            p_values: self.p_values.as_ref().map(|v| DVector::from_vec(v.clone())),
            derived: Derived {
                sigma_v: self.derived.sigma_v,
                sigma_u: self.derived.sigma_u,
                lambda: self.derived.lambda,
                sigma2: self.derived.sigma2,
            },
            convergence: Convergence {
                iterations: self.convergence.iterations,
                grad_norm: self.convergence.grad_norm,
                restarts: self.convergence.restarts,
                wrong_skew_warning: self.convergence.wrong_skew_warning,
                boundary_collapse: self.convergence.boundary_collapse,
                converged: self.convergence.converged,
                message: self.convergence.message.clone(),
            },
            n: self.n,
            column_hash: self.column_hash.clone(),
        })
    }
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let spec = read_spec(&args.spec)?;
    let ds = load_dataset(&args.input)?;
    ensure_dir(&args.out)?;
    let dm = build(&spec, &ds)?;
    let fr = fit(&spec, &dm)?;
    certify(&fr, &dm)?;

    write_json(&args.out.join("fit.json"), &FitDocument::from_fit(&fr))?;
    write_coefficients_csv(&args.out.join("coefficients.csv"), &fr)?;

    match args.format {
        OutputFormat::Json => {
            let doc = FitDocument::from_fit(&fr);
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
        _ => print_fit_table(&fr),
    }
    if let Some(msg) = &fr.convergence.message {
        eprintln!("note: {msg}");
    }
    Ok(())
}

fn write_coefficients_csv(path: &Path, fr: &FitResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["label", "estimate", "se", "z", "p", "stars"])?;
    for row in coefficient_rows(fr) {
        w.write_record([
            row.label.clone(),
            format!("{}", row.estimate),
            row.se.map_or(String::new(), |v| format!("{v}")),
            row.z.map_or(String::new(), |v| format!("{v}")),
            row.p.map_or(String::new(), |v| format!("{v}")),
            row.stars.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn print_fit_table(fr: &FitResult) {
    println!("model: {}   n = {}   loglik = {:.6}", fr.spec.family, fr.n, fr.loglik);
    println!("{:<24} {:>12} {:>12} {:>9} {:>9}", "parameter", "estimate", "se", "z", "p");
    for row in coefficient_rows(fr) {
        println!(
            "{:<24} {:>12.6} {:>12} {:>9} {:>9}{}",
            row.label,
            row.estimate,
            row.se.map_or("-".to_string(), |v| format!("{v:.6}")),
            row.z.map_or("-".to_string(), |v| format!("{v:.3}")),
            row.p.map_or("-".to_string(), |v| format!("{v:.3}")),
            row.stars
        );
    }
    let d = &fr.derived;
    println!(
        "sigma_v = {:.6}  sigma_u = {:.6}  sigma2 = {:.6}  lambda = {:.6}",
        d.sigma_v, d.sigma_u, d.sigma2, d.lambda
    );
}

pub fn cmd_ladder(args: &FitArgs) -> Result<()> {
    // The base spec only supplies the variable lists; each derived family
    // spec is validated on its own.
    let text = fs::read_to_string(&args.spec)
        .map_err(|e| Error::Invalid(format!("cannot read spec `{}`: {e}", args.spec.display())))?;
    let base: ModelSpec = serde_json::from_str(&text)?;
    let ds = load_dataset(&args.input)?;
    ensure_dir(&args.out)?;
    let specs = derive_ladder_specs(&base);
    let report = run_ladder(&ds, &specs)?;

    write_json(&args.out.join("ladder.json"), &report)?;
    let table = ladder_table(&base, &report);
    fs::write(args.out.join("ladder.txt"), &table)?;
    if args.format == OutputFormat::Json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{table}");
    }
    Ok(())
}

/// Aligned text table: frontier block, inefficiency block, footer block.
fn ladder_table(base: &ModelSpec, report: &LadderReport) -> String {
    let mut out = String::new();
    let headers = ["Model 1 (OLS)", "Model 2 (NHN)", "Model 3 (NHN_HET)", "Model 4 (TN)"];
    let label_w = 26usize;
    let col_w = 22usize;

    let coef_cell = |family_idx: usize, label: &str| -> String {
        let entry = &report.models[family_idx];
        let Ok(row) = &entry.row else { return "-".to_string() };
        let hit = row.coefficients.iter().find(|c| c.label == label);
        match hit {
            Some(c) => match c.p {
                Some(p) => format!("{:.6} ({:.3}){}", c.estimate, p, c.stars),
                None => format!("{:.6}", c.estimate),
            },
            None => "-".to_string(),
        }
    };

    out.push_str(&format!("{:<label_w$}", ""));
    for h in headers {
        out.push_str(&format!("{h:<col_w$}"));
    }
    out.push('\n');

    out.push_str("Frontier\n");
    let mut frontier_labels: Vec<String> = Vec::new();
    if base.include_frontier_intercept {
        frontier_labels.push("const".to_string());
    }
    frontier_labels.extend(base.frontier_vars.clone());
    // Keep the published layout: variables first, constant last.
    frontier_labels.rotate_left(usize::from(base.include_frontier_intercept));
    for label in &frontier_labels {
        out.push_str(&format!("  {:<24}", label));
        for i in 0..4 {
            out.push_str(&format!("{:<col_w$}", coef_cell(i, label)));
        }
        out.push('\n');
    }

    if !base.ineff_vars.is_empty() || base.include_ineff_intercept {
        out.push_str("Inefficiencies\n");
        let mut ineff_labels: Vec<String> = Vec::new();
        ineff_labels.extend(base.ineff_vars.clone());
        if base.include_ineff_intercept {
            ineff_labels.push("const".to_string());
        }
        for label in &ineff_labels {
            out.push_str(&format!("  {:<24}", label));
            for (i, wrapped) in
                [None, None, Some(format!("lnsig2u[{label}]")), Some(format!("mu[{label}]"))]
                    .iter()
                    .enumerate()
            {
                let cell = match wrapped {
                    Some(l) => coef_cell(i, l),
                    None => "-".to_string(),
                };
                out.push_str(&format!("{cell:<col_w$}"));
            }
            out.push('\n');
        }
    }

    // Footer rows in the published order.
    let footer = |name: &str, f: &dyn Fn(usize) -> String| -> String {
        let mut line = format!("{name:<label_w$}");
        for i in 0..4 {
            line.push_str(&format!("{:<col_w$}", f(i)));
        }
        line.push('\n');
        line
    };
    let row_of = |i: usize| report.models[i].row.as_ref().ok();
    out.push_str(&footer("Log-likelihood value", &|i| {
        row_of(i).map_or("-".to_string(), |r| format!("{:.6}", r.loglik))
    }));
    out.push_str(&footer("Wald chi-square", &|i| {
        row_of(i).map_or("-".to_string(), |r| match &r.wald {
            Some(w) => format!("{:.2}{}", w.chi2, stars(w.p)),
            None => "-".to_string(),
        })
    }));
    out.push_str(&footer("sigma_v", &|i| {
        row_of(i).map_or("-".to_string(), |r| format!("{:.6}", r.sigma_v))
    }));
    out.push_str(&footer("sigma_u", &|i| {
        row_of(i).map_or("-".to_string(), |r| format!("{:.6}", r.sigma_u))
    }));
    out.push_str(&footer("sigma2", &|i| {
        row_of(i).map_or("-".to_string(), |r| format!("{:.6}", r.sigma2))
    }));
    out.push_str(&footer("lambda", &|i| {
        row_of(i).map_or("-".to_string(), |r| format!("{:.6}", r.lambda))
    }));
    out.push_str(&footer("Mean efficiency", &|i| {
        row_of(i)
            .and_then(|r| r.mean_te)
            .map_or("-".to_string(), |m| format!("{m:.6}"))
    }));

    if let Some(lr) = &report.lr_ols_vs_nhn {
        out.push_str(&format!(
            "LR (OLS vs NHN, df=1)     LR = {:.6}  critical(1%) = {:.3}  {}\n",
            lr.lr,
            lr.critical_1pct,
            if lr.reject { "reject no-inefficiency" } else { "no rejection" }
        ));
    }
    if let Some(sel) = report.selected {
        out.push_str(&format!("Selected model            {sel}\n"));
    }
    for n in &report.notes {
        out.push_str(&format!("note: {n}\n"));
    }
    out
}

pub fn cmd_score(args: &ScoreArgs) -> Result<()> {
    let fit_path = args.out.join("fit.json");
    let text = fs::read_to_string(&fit_path)
        .map_err(|e| Error::Invalid(format!("cannot read `{}`: {e}", fit_path.display())))?;
    let doc: FitDocument = serde_json::from_str(&text)?;
    let ds = load_dataset(&args.input)?;
    let dm = build(&doc.spec, &ds)?;
    if dm.column_hash() != doc.column_hash {
        return Err(Error::ColumnHashMismatch);
    }
    let fr = doc.to_fit_result(dm.p(), dm.q())?;
    let report = efficiency_report(&fr, &dm, &ds, args.te.into(), args.bins)?;

    // Contract check before anything is written.
    for h in &report.per_household {
        for te in [h.te_bc, h.te_exp_jlms] {
            if !(te > 0.0 && te <= 1.0) {
                return Err(Error::Certification(format!(
                    "efficiency score out of (0,1] for household {}",
                    h.id
                )));
            }
        }
        if h.u_jlms < 0.0 || !h.u_jlms.is_finite() {
            return Err(Error::Certification(format!(
                "conditional inefficiency invalid for household {}",
                h.id
            )));
        }
    }

    ensure_dir(&args.out)?;
    let mut w = csv::Writer::from_path(args.out.join("scores.csv"))?;
    w.write_record([
        "id",
        "eps",
        "u_jlms",
        "te_bc",
        "te_exp_jlms",
        "frontier_pred_kwh",
        "observed_kwh",
        "overuse_ratio",
    ])?;
    for h in &report.per_household {
        w.write_record([
            h.id.clone(),
            format!("{}", h.eps),
            format!("{}", h.u_jlms),
            format!("{}", h.te_bc),
            format!("{}", h.te_exp_jlms),
            format!("{}", h.frontier_pred_kwh),
            format!("{}", h.observed_kwh),
            format!("{}", h.overuse_ratio),
        ])?;
    }
    w.flush()?;

    #[derive(Serialize)]
    struct SummaryDoc<'a> {
        family: Family,
        estimator: TeEstimator,
        mean: f64,
        sd: Option<f64>,
        min: f64,
        max: f64,
        share_overuse_ge_20pct: f64,
        share_overuse_ge_50pct: f64,
        warning: &'a Option<String>,
    }
    write_json(
        &args.out.join("summary.json"),
        &SummaryDoc {
            family: doc.family,
            estimator: report.estimator,
            mean: report.summary.mean,
            sd: report.summary.sd,
            min: report.summary.min,
            max: report.summary.max,
            share_overuse_ge_20pct: report.overuse.share_ge_20pct,
            share_overuse_ge_50pct: report.overuse.share_ge_50pct,
            warning: &doc.convergence.message,
        },
    )?;

    let mut w = csv::Writer::from_path(args.out.join("histogram.csv"))?;
    w.write_record(["bin_lo", "bin_hi", "count"])?;
    for (k, count) in report.histogram.counts.iter().enumerate() {
        w.write_record([
            format!("{}", report.histogram.edges[k]),
            format!("{}", report.histogram.edges[k + 1]),
            count.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(args.out.join("frontier.csv"))?;
    w.write_record(["id", "observed_kwh", "frontier_kwh", "overuse_ratio"])?;
    for h in &report.per_household {
        w.write_record([
            h.id.clone(),
            format!("{}", h.observed_kwh),
            format!("{}", h.frontier_pred_kwh),
            format!("{}", h.overuse_ratio),
        ])?;
    }
    w.flush()?;

    println!(
        "scored {} households ({}): mean = {:.6}, sd = {}, min = {:.6}, max = {:.6}",
        report.per_household.len(),
        report.estimator,
        report.summary.mean,
        report.summary.sd.map_or("-".to_string(), |v| format!("{v:.6}")),
        report.summary.min,
        report.summary.max
    );
    println!(
        "share >= 20% over frontier: {:.6}; share >= 50%: {:.6}",
        report.overuse.share_ge_20pct, report.overuse.share_ge_50pct
    );
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    ensure_dir(&args.out)?;
    match (&args.spec, args.housing) {
        (Some(spec_path), None) => {
            let text = fs::read_to_string(spec_path).map_err(|e| {
                Error::Invalid(format!("cannot read `{}`: {e}", spec_path.display()))
            })?;
            let mut dgp: DgpSpec = serde_json::from_str(&text)?;
            dgp.seed = args.seed;
            let sim = generate(&dgp)?;
            write_csv(&sim.dataset, &args.out.join("simulated.csv"))?;
            #[derive(Serialize)]
            struct TruthDoc<'a> {
                dgp: &'a DgpSpec,
                rows: &'a [crate::simulate::TruthRow],
            }
            write_json(&args.out.join("truth.json"), &TruthDoc { dgp: &dgp, rows: &sim.truth })?;
            println!("simulated {} records (family {})", sim.dataset.n(), dgp.family);
        }
        (None, Some(housing)) => {
            let housing = match housing {
                HousingChoice::Srh => HousingType::Srh,
                HousingChoice::Slum => HousingType::Slum,
            };
            let ds = fixture_survey(housing, args.n, args.seed)?;
            write_csv(&ds, &args.out.join("simulated.csv"))?;
            #[derive(Serialize)]
            struct FixtureDoc {
                housing: HousingType,
                n: usize,
                seed: u64,
                note: &'static str,
            }
            write_json(
                &args.out.join("truth.json"),
                &FixtureDoc {
                    housing,
                    n: args.n,
                    seed: args.seed,
                    note: "survey-shaped fixture with independent marginals; no frontier truth",
                },
            )?;
            println!("generated {} fixture records ({housing:?})", ds.n());
        }
        _ => {
            return Err(Error::Invalid(
                "simulate needs exactly one of --spec <dgp.json> or --housing <srh|slum>"
                    .to_string(),
            ))
        }
    }
    Ok(())
}

pub fn cmd_summarize(args: &SummarizeArgs) -> Result<()> {
    let ds = load_dataset(&args.input)?;
    let rows = summarize(&ds)?;

    let render_table = |out: &mut dyn Write| -> std::io::Result<()> {
        writeln!(out, "{:<22} {:>12} {:>12} {:>12} {:>12}", "variable", "mean", "sd", "min", "max")?;
        for r in &rows {
            writeln!(
                out,
                "{:<22} {:>12.6} {:>12} {:>12.6} {:>12.6}",
                r.variable,
                r.mean,
                r.sd.map_or("-".to_string(), |v| format!("{v:.6}")),
                r.min,
                r.max
            )?;
        }
        Ok(())
    };

    match args.format {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&rows)?),
        _ => {
            let mut stdout = std::io::stdout();
            render_table(&mut stdout)?;
        }
    }

    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        write_json(&dir.join("summary.json"), &rows)?;
        let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
        w.write_record(["variable", "mean", "sd", "min", "max"])?;
        for r in &rows {
            w.write_record([
                r.variable.clone(),
                format!("{}", r.mean),
                r.sd.map_or(String::new(), |v| format!("{v}")),
                format!("{}", r.min),
                format!("{}", r.max),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}
