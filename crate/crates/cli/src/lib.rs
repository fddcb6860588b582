//! The `cuspforms` command line: dataset checks, single verifications and
//! the acceptance suite.  Every command can print a JSON report; exit codes
//! are 0 (all checks pass), 1 (a check failed) and 2 (usage error).

pub mod report;
pub mod suite;

use std::ffi::OsString;
use std::path::Path;

use clap::{Args, Parser, Subcommand};
use cuspforms::cusp_oracle::{expand_at_cusp, OracleCoefficient, OracleOptions};
use cuspforms::cusps::{enumerate_cusps, extended_width, parse_cusp, Cusp};
use cuspforms::modform::{load_builtin, load_newform, Builtin, NewformData};
use cuspforms::voronoi::{
    average_bound_experiment, closed_form_identity, verify_voronoi, CoefficientSource, TestFunction,
};
use cuspforms::whittaker::{fit_and_check, verify_al_relation};
use serde_json::json;

use report::{Check, VerificationReport};
use suite::{provenance_name, Level};

#[derive(Parser, Debug)]
#[command(name = "cuspforms", version, about = "Fourier coefficients of newforms at the cusps of Γ₀(N)")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Copy)]
struct Output {
    /// Print a machine-readable JSON report.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the cusps of Γ₀(N) with widths and extended widths.
    Cusps {
        #[arg(long)]
        level: i64,
        /// Conductor of the nebentypus used for δ(𝔞).
        #[arg(long, default_value_t = 1)]
        conductor: i64,
        #[command(flatten)]
        out: Output,
    },
    /// Newform dataset commands.
    #[command(subcommand)]
    Modform(ModformCommand),
    /// Fourier coefficients at a cusp from the numerical oracle.
    Coeffs {
        #[arg(long)]
        form: String,
        #[arg(long)]
        cusp: String,
        #[arg(long)]
        nmax: i64,
        /// Sampling height (chosen automatically otherwise).
        #[arg(long)]
        y: Option<f64>,
        #[command(flatten)]
        out: Output,
    },
    /// Product formula against the oracle after one unimodular fit.
    Formula {
        #[arg(long)]
        form: String,
        #[arg(long)]
        cusp: String,
        #[arg(long)]
        nmax: i64,
        #[arg(long)]
        fit_from: Option<i64>,
        #[command(flatten)]
        out: Output,
    },
    /// Atkin-Lehner relation between a cusp and its partner.
    Al {
        #[arg(long)]
        form: String,
        /// Comma-separated primes dividing the level.
        #[arg(long, value_delimiter = ',')]
        set: Vec<i64>,
        #[arg(long)]
        cusp: String,
        #[arg(long, default_value_t = 30)]
        nmax: i64,
        #[command(flatten)]
        out: Output,
    },
    /// Twisted Voronoi summation with a smooth bump.
    Voronoi {
        #[arg(long)]
        form: String,
        /// The twist a/b.
        #[arg(long)]
        twist: String,
        #[arg(long, default_value = "oo")]
        cusp: String,
        /// Support A,B of the bump.
        #[arg(long, value_delimiter = ',', num_args = 1)]
        bump: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Source::Auto)]
        source: Source,
        #[command(flatten)]
        out: Output,
    },
    /// f(a/b + iy) through the dual expansion with the closed-form transform.
    Identity {
        #[arg(long)]
        form: String,
        #[arg(long)]
        twist: String,
        #[arg(long)]
        y: f64,
        #[arg(long, value_enum, default_value_t = Source::Auto)]
        source: Source,
        #[command(flatten)]
        out: Output,
    },
    /// Growth of Σ_{n≤X} |a(n;𝔞)|² against the mean-square bound.
    Bounds {
        #[arg(long)]
        form: String,
        #[arg(long)]
        cusp: String,
        #[arg(long, default_value_t = 5000)]
        xmax: i64,
        #[command(flatten)]
        out: Output,
    },
    /// The acceptance suite.
    Suite {
        #[arg(long, conflicts_with = "full")]
        quick: bool,
        #[arg(long)]
        full: bool,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Subcommand, Debug)]
enum ModformCommand {
    /// Load a newform file (or builtin name) and run every load-time invariant.
    Check {
        file: String,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(clap::ValueEnum, Debug, Clone, Copy)]
enum Source {
    Auto,
    Oracle,
    Formula,
}

impl From<Source> for CoefficientSource {
    fn from(s: Source) -> Self {
        match s {
            Source::Auto => CoefficientSource::Auto,
            Source::Oracle => CoefficientSource::Oracle,
            Source::Formula => CoefficientSource::ProductFormula,
        }
    }
}

/// A bad argument value discovered after parsing (exit code 2).
struct Usage(String);

/// Parses `argv`, runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok((report, json)) => {
            if json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.to_text());
            }
            report.exit_code()
        }
        Err(Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
    }
}

fn load_form(spec: &str) -> Result<NewformData, Usage> {
    if let Ok(b) = spec.parse::<Builtin>() {
        return load_builtin(b).map_err(|e| Usage(format!("builtin {spec}: {e}")));
    }
    if Path::new(spec).exists() {
        return load_newform(Path::new(spec)).map_err(|e| Usage(format!("{spec}: {e}")));
    }
    Err(Usage(format!("{spec} is neither a builtin form nor a readable file")))
}

fn cusp_arg(level: i64, s: &str) -> Result<Cusp, Usage> {
    parse_cusp(level, s).map_err(|e| Usage(format!("cusp {s}: {e}")))
}

fn twist_arg(s: &str) -> Result<(i64, i64), Usage> {
    let bad = || Usage(format!("twist {s} must be a/b with b >= 1"));
    let (a, b) = s.split_once('/').ok_or_else(bad)?;
    let (a, b) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if b < 1 {
        return Err(bad());
    }
    Ok((a, b))
}

fn execute(command: Command) -> Result<(VerificationReport, bool), Usage> {
    Ok(match command {
        Command::Cusps { level, conductor, out } => (cusps(level, conductor)?, out.json),
        Command::Modform(ModformCommand::Check { file, out }) => (modform_check(&file), out.json),
        Command::Coeffs { form, cusp, nmax, y, out } => {
            let f = load_form(&form)?;
            let c = cusp_arg(f.level(), &cusp)?;
            (coeffs(&f, &c, nmax, y), out.json)
        }
        Command::Formula { form, cusp, nmax, fit_from, out } => {
            let f = load_form(&form)?;
            let c = cusp_arg(f.level(), &cusp)?;
            let check = Check::new(
                format!("formula.{}.{c}", f.name()),
                "product formula = oracle after one unimodular fit (rel 1e-6, |c| = 1 +- 1e-8)",
                json!({"form": f.name(), "cusp": c.to_string(), "nmax": nmax, "fit_from": fit_from}),
            )
            .provenance(["oracle", "product_formula"]);
            let check = match fit_and_check(&f, &c, nmax, fit_from) {
                Ok(r) if r.available() == 0 => check.skipped(
                    r.rows.first().and_then(|row| row.diagnosis.clone()).unwrap_or_else(|| "formula unavailable".into()),
                ),
                Ok(r) => {
                    let ok = r.passes(1e-6, 1e-8);
                    let mut check = check.residual(r.max_residual).passed(ok);
                    check.inputs["report"] = serde_json::to_value(&r).expect("serializable");
                    check
                }
                Err(e) => check.failed(e),
            };
            (VerificationReport::new("formula", vec![check]), out.json)
        }
        Command::Al { form, set, cusp, nmax, out } => {
            let f = load_form(&form)?;
            let c = cusp_arg(f.level(), &cusp)?;
            let check = Check::new(
                format!("al.{}.{c}", f.name()),
                "oracle at the cusp = transformed partner oracle (rel 1e-6 after one fit)",
                json!({"form": f.name(), "cusp": c.to_string(), "set": set, "nmax": nmax}),
            )
            .provenance(["oracle"]);
            let check = match verify_al_relation(&f, &set, &c, nmax) {
                Ok(r) => {
                    let ok = r.partner_cusp_matches && r.max_residual < 1e-6 && r.constant_modulus_error < 1e-8;
                    let mut check = check.residual(r.max_residual).passed(ok);
                    check.inputs["report"] = serde_json::to_value(&r).expect("serializable");
                    check
                }
                Err(e) if matches!(e, cuspforms::whittaker::WhittakerError::Unsupported(_)) => check.skipped(e.to_string()),
                Err(e) => check.failed(e),
            };
            (VerificationReport::new("al", vec![check]), out.json)
        }
        Command::Voronoi { form, twist, cusp, bump, source, out } => {
            let f = load_form(&form)?;
            let (a, b) = twist_arg(&twist)?;
            let c = cusp_arg(f.level(), &cusp)?;
            let [lo, hi] = bump[..] else {
                return Err(Usage("--bump takes A,B".into()));
            };
            if !(0.0 < lo && lo < hi) {
                return Err(Usage("--bump needs 0 < A < B".into()));
            }
            let test = TestFunction::bump(lo, hi);
            let check = Check::new(
                format!("voronoi.{}.{c}.{a}_{b}", f.name()),
                "|LHS - RHS| < 1e-6 |LHS| (or 1e-9 absolute)",
                json!({"form": f.name(), "cusp": c.to_string(), "twist": twist, "bump": [lo, hi]}),
            );
            let check = match verify_voronoi(&f, a, b, &c, &test, source.into()) {
                Ok(r) => {
                    let mut check = check
                        .residual(r.rel_residual)
                        .provenance([provenance_name(r.lhs_provenance), provenance_name(r.rhs_provenance)])
                        .passed(r.passes);
                    check.inputs["report"] = serde_json::to_value(&r).expect("serializable");
                    check
                }
                Err(e) => check.failed(e),
            };
            (VerificationReport::new("voronoi", vec![check]), out.json)
        }
        Command::Identity { form, twist, y, source, out } => {
            let f = load_form(&form)?;
            let (a, b) = twist_arg(&twist)?;
            if !(y > 0.0) {
                return Err(Usage("--y must be positive".into()));
            }
            let check = Check::new(
                format!("identity.{}.{a}_{b}", f.name()),
                "f(a/b + iy) = dual expansion with the closed-form transform (rel 1e-8)",
                json!({"form": f.name(), "twist": twist, "y": y}),
            );
            let check = match closed_form_identity(&f, a, b, y, source.into()) {
                Ok(r) => {
                    let mut check = check
                        .residual(r.rel_residual)
                        .provenance([
                            provenance_name(r.direct_provenance),
                            provenance_name(r.dual_provenance),
                            provenance_name(r.hankel_provenance),
                        ])
                        .passed(r.passes);
                    check.inputs["report"] = serde_json::to_value(&r).expect("serializable");
                    check
                }
                Err(e) => check.failed(e),
            };
            (VerificationReport::new("identity", vec![check]), out.json)
        }
        Command::Bounds { form, cusp, xmax, out } => {
            let f = load_form(&form)?;
            let c = cusp_arg(f.level(), &cusp)?;
            if xmax < 10 {
                return Err(Usage("--xmax must be at least 10".into()));
            }
            // Ten points evenly spaced in log X over the last decade.
            let xs: Vec<i64> = (0..10)
                .map(|j| (xmax as f64 / 10.0 * 10f64.powf(j as f64 / 9.0)).round() as i64)
                .collect();
            let check = Check::new(
                format!("bounds.{}.{c}", f.name()),
                "log-log slope of the mean square lies in [k - 0.75, k + 0.25]",
                json!({"form": f.name(), "cusp": c.to_string(), "x": xs}),
            );
            let check = match average_bound_experiment(&f, &c, &xs, CoefficientSource::Auto) {
                Ok(r) => {
                    let mut check = check
                        .residual(r.slope.unwrap_or(f64::NAN) - f.weight() as f64)
                        .provenance([provenance_name(r.provenance)])
                        .passed(r.slope_in_window);
                    check.inputs["report"] = serde_json::to_value(&r).expect("serializable");
                    check
                }
                Err(e) => check.failed(e),
            };
            (VerificationReport::new("bounds", vec![check]), out.json)
        }
        Command::Suite { quick, full, out } => {
            let level = if full && !quick { Level::Full } else { Level::Quick };
            (suite::run_suite(level), out.json)
        }
    })
}

fn cusps(level: i64, conductor: i64) -> Result<VerificationReport, Usage> {
    let list = enumerate_cusps(level).map_err(|e| Usage(e.to_string()))?;
    let mut checks = Vec::new();
    for c in list {
        let w = extended_width(level, conductor, c.denominator()).map_err(|e| Usage(e.to_string()))?;
        let check = Check::new(
            format!("cusp.{:04}.{:04}.{c}", c.denominator(), c.d_class()),
            "cusp of Gamma0(N)",
            json!({
                "level": level,
                "cusp": c.to_string(),
                "denominator": c.denominator(),
                "class": c.d_class(),
                "width": w.width,
                "extended_width": w.delta,
            }),
        )
        .provenance(["exact"])
        .passed(true);
        checks.push(check);
    }
    Ok(VerificationReport::new("cusps", checks))
}

fn modform_check(file: &str) -> VerificationReport {
    let check = Check::new(format!("modform.{file}"), "all load-time invariants hold", json!({"file": file}));
    let loaded = match file.parse::<Builtin>() {
        Ok(b) => load_builtin(b),
        Err(_) => load_newform(Path::new(file)),
    };
    let check = match loaded.and_then(|f| f.validate().map(|_| f)) {
        Ok(f) => {
            let mut check = check.provenance(["input"]).passed(true);
            check.inputs = json!({
                "file": file,
                "name": f.name(),
                "level": f.level(),
                "weight": f.weight(),
                "conductor": f.conductor(),
                "n_max": f.n_max(),
            });
            check
        }
        Err(e) => check.failed(e),
    };
    VerificationReport::new("modform", vec![check])
}

fn coeffs(f: &NewformData, c: &Cusp, n_max: i64, y: Option<f64>) -> VerificationReport {
    let mut opts = OracleOptions::new(n_max);
    opts.y = y;
    let check = Check::new(
        format!("coeffs.{}.{c}", f.name()),
        "oracle expansion with every requested coefficient resolved, no constant or negative terms",
        json!({"form": f.name(), "cusp": c.to_string(), "nmax": n_max, "y": y}),
    )
    .provenance(["oracle"]);
    let check = match expand_at_cusp(f, c, &opts) {
        Ok(e) => {
            let noise = e.noise_floor();
            let unresolved = e.unresolved();
            let clean = e.constant_term <= noise && (!f.is_holomorphic() || e.negative_mass <= noise);
            let mut check = check.residual(e.residual).passed(unresolved.is_empty() && clean);
            if !unresolved.is_empty() {
                check = check.note(format!("{} coefficients unresolved at this height", unresolved.len()));
            }
            check.inputs["expansion"] = json!({
                "delta": e.delta,
                "y": e.y,
                "samples": e.samples,
                "noise_floor": noise,
                "coefficients": e.coefficients.iter().map(|(n, v)| match v {
                    OracleCoefficient::Resolved { value } => json!([n, value[0], value[1]]),
                    OracleCoefficient::Unresolved { .. } => json!([n, null, null]),
                }).collect::<Vec<_>>(),
            });
            check
        }
        Err(e) => check.failed(e),
    };
    VerificationReport::new("coeffs", vec![check])
}
