//! `shortgap` command-line interface: prime scans, tuple/context setup,
//! variational bounds, weight tables, weighted sums, Buchstab tooling,
//! region tables, and experiment orchestration.
//!
//! Exit codes: 0 success, 2 invalid configuration or usage, 3 numeric
//! check failure.

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use shortgap::decomposition::{
    buchstab_identity_check, buchstab_omega, build_ledger, ledger_build_and_check, region_loss,
    RegionSpec, ALL_REGIONS,
};
use shortgap::error::Error;
use shortgap::harness::{
    density_rows_to_csv, experiment_density, experiment_short_interval_pnt, fmt_f64, parse_config,
    pnt_rows_to_csv, run_full_report, write_csv, RunManifest,
};
use shortgap::maynard_weights::{build_lambda, build_y, read_table, weight, write_table};
use shortgap::prime_engine::{count_primes, scan_gap_pairs, Interval};
use shortgap::scalar::{parse_rat, rat, rat_to_string, Ext, Rat, Real};
use shortgap::sums::{
    count_s_h, error_scan, s1, s1_p_j, s2_m, s_minus, SMinusKind,
};
use shortgap::tuples::{
    is_admissible, make_prime_tuple, AdmissibleTuple, ContextBuilder, SieveContext,
};
use shortgap::variational::{
    basis_combination, optimize_mk, rho_threshold, symmetric_basis, SimplexPoly,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Context file: the scalar parameters plus the tuple that produced them.
#[derive(Serialize, Deserialize)]
struct ContextFile {
    context: SieveContext,
    offsets: Vec<i64>,
}

fn load_context(path: &Path) -> Result<(SieveContext, AdmissibleTuple), Error> {
    let text = std::fs::read_to_string(path)?;
    let file: ContextFile = serde_json::from_str(&text)?;
    let tuple = AdmissibleTuple::from_offsets(&file.offsets)?;
    Ok((file.context, tuple))
}

/// Integers with optional scientific notation ("1e10").
fn parse_u64_sci(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let f = s
        .parse::<f64>()
        .map_err(|_| format!("not an integer: {s}"))?;
    if f < 0.0 || f > u64::MAX as f64 || f.fract() != 0.0 {
        return Err(format!("not a nonnegative integer: {s}"));
    }
    Ok(f as u64)
}

fn parse_rat_arg(s: &str) -> Result<Rat, String> {
    parse_rat(s).ok_or_else(|| format!("not a rational: {s}"))
}

/// Weight-shape grammar: `const:<rational>` for a constant, or
/// `sym:<i>-degree:<d>` for the i-th (1-based) element of the symmetric
/// basis at the given degree, expanded for the context's k.
fn parse_shape(spec: &str, k: usize) -> Result<SimplexPoly, Error> {
    if let Some(c) = spec.strip_prefix("const:") {
        let c = parse_rat(c).ok_or_else(|| Error::Config(format!("bad constant in {spec:?}")))?;
        return Ok(SimplexPoly::constant(k, c));
    }
    if let Some(rest) = spec.strip_prefix("sym:") {
        if let Some((idx, deg)) = rest.split_once("-degree:") {
            let idx: usize = idx
                .parse()
                .map_err(|_| Error::Config(format!("bad index in {spec:?}")))?;
            let deg: u32 = deg
                .parse()
                .map_err(|_| Error::Config(format!("bad degree in {spec:?}")))?;
            let basis = symmetric_basis(deg);
            if idx == 0 || idx > basis.len() {
                return Err(Error::Config(format!(
                    "index {idx} outside 1..={} for degree {deg}",
                    basis.len()
                )));
            }
            let mut coeffs = vec![rat(0, 1); basis.len()];
            coeffs[idx - 1] = rat(1, 1);
            return Ok(basis_combination(k, &basis, &coeffs));
        }
    }
    Err(Error::Config(format!(
        "unrecognized shape {spec:?}; use const:<c> or sym:<i>-degree:<d>"
    )))
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

#[derive(Parser)]
#[command(name = "shortgap", version, about = "sieve-theory laboratory")]
struct Cli {
    #[command(subcommand)]
    module: Module,
}

#[derive(Subcommand)]
enum Module {
    /// Prime counting and gap scans
    Primes {
        #[command(subcommand)]
        verb: PrimesVerb,
    },
    /// Admissible tuples and sieve contexts
    Tuple {
        #[command(subcommand)]
        verb: TupleVerb,
    },
    /// Variational bound and detection threshold
    Mk {
        #[command(subcommand)]
        verb: MkVerb,
    },
    /// Sieve weight tables
    Weights {
        #[command(subcommand)]
        verb: WeightsVerb,
    },
    /// Weighted sums over short intervals
    Sums {
        #[command(subcommand)]
        verb: SumsVerb,
    },
    /// Buchstab identity and density function
    Buchstab {
        #[command(subcommand)]
        verb: BuchstabVerb,
    },
    /// The six exponent regions
    Regions {
        #[command(subcommand)]
        verb: RegionsVerb,
    },
    /// Two-step decomposition checks
    Ledger {
        #[command(subcommand)]
        verb: LedgerVerb,
    },
    /// Grid experiments from a config file
    Experiment(ExperimentArgs),
    /// Full parameter-chain report
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum PrimesVerb {
    Count {
        #[arg(long, value_parser = parse_u64_sci)]
        from: u64,
        #[arg(long, value_parser = parse_u64_sci)]
        to: u64,
    },
    Gaps {
        #[arg(long, value_parser = parse_u64_sci)]
        from: u64,
        #[arg(long, value_parser = parse_u64_sci)]
        to: u64,
        #[arg(long = "max-gap")]
        max_gap: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum TupleVerb {
    Check {
        #[arg(long, value_delimiter = ',')]
        offsets: Vec<i64>,
    },
    Make {
        #[arg(long)]
        k: usize,
    },
    Context {
        #[arg(long, value_parser = parse_u64_sci)]
        x: u64,
        #[arg(long, value_parser = parse_rat_arg)]
        delta: Rat,
        #[arg(long, value_delimiter = ',', default_values_t = [0i64, 2])]
        offsets: Vec<i64>,
        #[arg(long, value_parser = parse_rat_arg)]
        theta: Option<Rat>,
        #[arg(long, value_parser = parse_rat_arg)]
        eps: Option<Rat>,
        #[arg(long, value_parser = parse_rat_arg)]
        eps0: Option<Rat>,
        #[arg(long, value_parser = parse_rat_arg)]
        beta: Option<Rat>,
        #[arg(long = "d0-floor")]
        d0_floor: Option<u64>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, value_parser = parse_u64_sci)]
        h: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum MkVerb {
    Optimize {
        #[arg(long)]
        k: u64,
        #[arg(long)]
        degree: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Threshold {
        #[arg(long, value_parser = parse_rat_arg)]
        delta: Rat,
        #[arg(long, value_parser = parse_rat_arg, default_value = "94/100")]
        beta: Rat,
        #[arg(long, value_parser = parse_rat_arg, default_value = "1/1000")]
        eps0: Rat,
        #[arg(long, value_parser = parse_rat_arg)]
        mk: Rat,
    },
}

#[derive(Subcommand)]
enum WeightsVerb {
    Build {
        #[arg(long)]
        context: PathBuf,
        #[arg(long = "F", default_value = "const:1")]
        shape: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SumCommon {
    #[arg(long)]
    context: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, value_parser = parse_u64_sci)]
    from: u64,
    #[arg(long, value_parser = parse_u64_sci)]
    to: u64,
    /// shape used for the main-term prediction
    #[arg(long = "F", default_value = "const:1")]
    shape: String,
    /// cross-check against the direct per-n weight evaluation
    #[arg(long)]
    oracle: bool,
}

#[derive(Subcommand)]
enum SumsVerb {
    S1(SumCommon),
    S2 {
        #[command(flatten)]
        common: SumCommon,
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// drop the m-th divisor component (the modified weights)
        #[arg(long)]
        restrict: bool,
    },
    S1pj {
        #[command(flatten)]
        common: SumCommon,
        #[arg(long)]
        p: u64,
        #[arg(long)]
        j: usize,
    },
    Sminus {
        #[command(flatten)]
        common: SumCommon,
        #[arg(long, value_parser = ["s1", "s2"], default_value = "s1")]
        kind: String,
    },
    CountSh {
        #[arg(long)]
        context: PathBuf,
        #[arg(long, value_parser = parse_u64_sci)]
        from: u64,
        #[arg(long, value_parser = parse_u64_sci)]
        to: u64,
        #[arg(long, default_value_t = 1)]
        m: u64,
    },
    ErrorScan {
        #[arg(long)]
        context: PathBuf,
        #[arg(long, value_parser = parse_u64_sci)]
        z: u64,
        #[arg(long = "q-max", default_value_t = 30)]
        q_max: u64,
    },
}

#[derive(Subcommand)]
enum BuchstabVerb {
    Omega {
        #[arg(long)]
        u: f64,
    },
    Identity {
        #[arg(long, value_parser = parse_u64_sci)]
        from: u64,
        #[arg(long, value_parser = parse_u64_sci)]
        to: u64,
        #[arg(long)]
        w1: f64,
        #[arg(long)]
        w2: f64,
    },
}

#[derive(Subcommand)]
enum RegionsVerb {
    Table {
        #[arg(long, value_parser = parse_rat_arg)]
        delta: Rat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum LedgerVerb {
    Check {
        #[arg(long)]
        context: PathBuf,
        #[arg(long = "sample-from", value_parser = parse_u64_sci)]
        sample_from: u64,
        #[arg(long = "sample-to", value_parser = parse_u64_sci)]
        sample_to: u64,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Stride positions n = v0 (mod W) in (lo, hi].
fn stride(iv: Interval, ctx: &SieveContext) -> impl Iterator<Item = u64> + '_ {
    let start = iv.lo + 1;
    let first = start + (ctx.v0 + ctx.w - start % ctx.w) % ctx.w;
    (first..=iv.hi).step_by(ctx.w as usize)
}

fn oracle_check(name: &str, fast: f64, direct: f64) -> Result<(), Error> {
    let denom = fast.abs().max(direct.abs()).max(1e-300);
    if (fast - direct).abs() / denom > 1e-9 {
        return Err(Error::NumericCheck(format!(
            "{name} oracle mismatch: fast = {fast}, direct = {direct}"
        )));
    }
    eprintln!("oracle ok: {name} = {direct}");
    Ok(())
}

fn run() -> Result<(), Error> {
    if let Ok(threads) = std::env::var("SHORTGAP_THREADS") {
        let n: usize = threads
            .parse()
            .map_err(|_| Error::Config(format!("bad SHORTGAP_THREADS = {threads}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .ok();
    }
    let cli = Cli::parse();
    match cli.module {
        Module::Primes { verb } => match verb {
            PrimesVerb::Count { from, to } => {
                let count = count_primes(Interval::new(from, to)?);
                emit(&serde_json::json!({"from": from, "to": to, "count": count}), None)?;
            }
            PrimesVerb::Gaps {
                from,
                to,
                max_gap,
                out,
            } => {
                let pairs = scan_gap_pairs(Interval::new(from, to)?, max_gap);
                let rows: Vec<Vec<String>> = pairs
                    .iter()
                    .map(|&(p, q)| vec![p.to_string(), q.to_string(), (q - p).to_string()])
                    .collect();
                match out {
                    Some(path) => write_csv(&path, &["p", "p_next", "gap"], &rows)?,
                    None => {
                        println!("p,p_next,gap");
                        for r in rows {
                            println!("{}", r.join(","));
                        }
                    }
                }
            }
        },
        Module::Tuple { verb } => match verb {
            TupleVerb::Check { offsets } => {
                let t = AdmissibleTuple::from_offsets(&offsets)?;
                let cert = is_admissible(&t);
                emit(&cert, None)?;
                if !cert.admissible {
                    return Err(Error::Config(format!(
                        "tuple covers all residues mod {}",
                        cert.covering_prime.unwrap_or(0)
                    )));
                }
            }
            TupleVerb::Make { k } => {
                let t = make_prime_tuple(k);
                let offsets: Vec<i64> = t.forms().iter().map(|f| f.h).collect();
                emit(&serde_json::json!({"k": k, "offsets": offsets}), None)?;
            }
            TupleVerb::Context {
                x,
                delta,
                offsets,
                theta,
                eps,
                eps0,
                beta,
                d0_floor,
                r,
                h,
                out,
            } => {
                let t = AdmissibleTuple::from_offsets(&offsets)?;
                let mut b = ContextBuilder::new(t, x, delta);
                if let Some(v) = theta {
                    b = b.theta(v);
                }
                if let Some(v) = eps {
                    b = b.eps(v);
                }
                if let Some(v) = eps0 {
                    b = b.eps0(v);
                }
                if let Some(v) = beta {
                    b = b.beta(v);
                }
                if let Some(v) = d0_floor {
                    b = b.d0_floor(v);
                }
                if let Some(v) = r {
                    b = b.r_override(v);
                }
                if let Some(v) = h {
                    b = b.h_override(v);
                }
                let (ctx, _) = b.build()?;
                emit(
                    &ContextFile {
                        context: ctx,
                        offsets,
                    },
                    out.as_deref(),
                )?;
            }
        },
        Module::Mk { verb } => match verb {
            MkVerb::Optimize { k, degree, out } => {
                let res = optimize_mk(k, degree)?;
                let doc = serde_json::json!({
                    "k": res.k,
                    "degree": res.degree,
                    "mk_lower": res.mk_lower,
                    "certified": rat_to_string(&res.certified),
                    "basis": res.basis,
                    "coefficients": res.coefficients.iter().map(rat_to_string).collect::<Vec<_>>(),
                    "i_value": res.i_value,
                    "j_values": res.j_values,
                    "warnings": res.warnings,
                });
                emit(&doc, out.as_deref())?;
            }
            MkVerb::Threshold {
                delta,
                beta,
                eps0,
                mk,
            } => {
                let thr = rho_threshold(&delta, &eps0, &beta, &mk)?;
                emit(&serde_json::json!({"m": thr.m, "conclusive": thr.conclusive}), None)?;
            }
        },
        Module::Weights { verb } => match verb {
            WeightsVerb::Build {
                context,
                shape,
                out,
            } => {
                let (ctx, _) = load_context(&context)?;
                let f = parse_shape(&shape, ctx.k)?;
                let y = build_y::<Ext>(&f, &ctx)?;
                let lam = build_lambda(&y);
                write_table(&lam, &out)?;
                let (lmax, ymax) = lam.lambda_max_report(&y);
                emit(
                    &serde_json::json!({
                        "entries": lam.entries.len(),
                        "lambda_max": lmax,
                        "y_max": ymax,
                        "out": out.display().to_string(),
                    }),
                    None,
                )?;
            }
        },
        Module::Sums { verb } => match verb {
            SumsVerb::S1(c) => {
                let (ctx, t) = load_context(&c.context)?;
                let lam = read_table::<Ext>(&c.weights)?;
                let f = parse_shape(&c.shape, ctx.k)?;
                let iv = Interval::new(c.from, c.to)?;
                let rep = s1(iv, &ctx, &t, &lam, &f)?;
                if c.oracle {
                    let direct: f64 = stride(iv, &ctx)
                        .map(|n| weight(n, &t, &lam).to_f64_lossy())
                        .sum();
                    oracle_check("s1", rep.value, direct)?;
                }
                emit(&rep, None)?;
            }
            SumsVerb::S2 {
                common: c,
                m,
                restrict,
            } => {
                let (ctx, t) = load_context(&c.context)?;
                let lam = read_table::<Ext>(&c.weights)?;
                let f = parse_shape(&c.shape, ctx.k)?;
                let iv = Interval::new(c.from, c.to)?;
                let rep = s2_m(iv, &ctx, &t, &lam, &f, m, restrict)?;
                if c.oracle && !restrict {
                    let form = &t.forms()[m - 1];
                    let direct: f64 = stride(iv, &ctx)
                        .filter(|&n| {
                            let v = form.eval(n);
                            v > 1 && shortgap::prime_engine::is_prime(v as u64)
                        })
                        .map(|n| weight(n, &t, &lam).to_f64_lossy())
                        .sum();
                    oracle_check("s2", rep.value, direct)?;
                }
                emit(&rep, None)?;
            }
            SumsVerb::S1pj { common: c, p, j } => {
                let (ctx, t) = load_context(&c.context)?;
                let lam = read_table::<Ext>(&c.weights)?;
                let iv = Interval::new(c.from, c.to)?;
                let value = s1_p_j(iv, &ctx, &t, &lam, p, j)?;
                emit(&serde_json::json!({"sum": "S1_pj", "p": p, "j": j, "value": value}), None)?;
            }
            SumsVerb::Sminus { common: c, kind } => {
                let (ctx, t) = load_context(&c.context)?;
                let lam = read_table::<Ext>(&c.weights)?;
                let iv = Interval::new(c.from, c.to)?;
                let which = if kind == "s1" {
                    SMinusKind::S1Minus
                } else {
                    SMinusKind::S2Minus
                };
                let value = s_minus(iv, &ctx, &t, &lam, which)?;
                emit(&serde_json::json!({"sum": format!("{kind}-minus"), "value": value}), None)?;
            }
            SumsVerb::CountSh {
                context,
                from,
                to,
                m,
            } => {
                let (ctx, t) = load_context(&context)?;
                let iv = Interval::new(from, to)?;
                let count = count_s_h(iv, &t, &ctx, m)?;
                emit(&serde_json::json!({"count": count, "m": m}), None)?;
            }
            SumsVerb::ErrorScan { context, z, q_max } => {
                let (ctx, _) = load_context(&context)?;
                let rep = error_scan(ctx.x, z, q_max, &ctx)?;
                emit(&rep, None)?;
            }
        },
        Module::Buchstab { verb } => match verb {
            BuchstabVerb::Omega { u } => {
                let value = buchstab_omega(u)?;
                emit(&serde_json::json!({"u": u, "omega": value}), None)?;
            }
            BuchstabVerb::Identity { from, to, w1, w2 } => {
                let mut failures = Vec::new();
                for n in from + 1..=to {
                    if !buchstab_identity_check(n, w1, w2)? {
                        failures.push(n);
                    }
                }
                let checked = to - from;
                emit(
                    &serde_json::json!({
                        "checked": checked,
                        "failures": failures,
                    }),
                    None,
                )?;
                if !failures.is_empty() {
                    return Err(Error::NumericCheck(format!(
                        "identity failed for {} of {checked} integers",
                        failures.len()
                    )));
                }
            }
        },
        Module::Regions { verb } => match verb {
            RegionsVerb::Table { delta, out } => {
                let mut rows = Vec::new();
                for name in ALL_REGIONS {
                    let spec = RegionSpec::of(name);
                    let loss = region_loss(&spec, &delta)?;
                    rows.push(vec![
                        format!("{name:?}"),
                        (!loss.empty).to_string(),
                        fmt_f64(loss.value),
                        fmt_f64(loss.budget),
                    ]);
                }
                let header = ["region", "nonempty", "loss", "paper_budget"];
                match out {
                    Some(path) => write_csv(&path, &header, &rows)?,
                    None => {
                        println!("{}", header.join(","));
                        for r in rows {
                            println!("{}", r.join(","));
                        }
                    }
                }
            }
        },
        Module::Ledger { verb } => match verb {
            LedgerVerb::Check {
                context,
                sample_from,
                sample_to,
            } => {
                let (ctx, _) = load_context(&context)?;
                let _ = build_ledger(&ctx.delta)?;
                let rep = ledger_build_and_check(&ctx, Interval::new(sample_from, sample_to)?)?;
                let ok = rep.identity_failures == 0
                    && rep.property2_failures == 0
                    && rep.negative_terms == 0;
                emit(&rep, None)?;
                if !ok {
                    return Err(Error::NumericCheck(format!(
                        "{} identity, {} cutoff, {} sign failures",
                        rep.identity_failures, rep.property2_failures, rep.negative_terms
                    )));
                }
            }
        },
        Module::Experiment(args) => {
            let text = std::fs::read_to_string(&args.config)?;
            let cfg = parse_config(&text)?;
            let dir = args
                .out_dir
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&dir)?;
            let mut manifest = RunManifest::new(&cfg);
            let pnt = experiment_short_interval_pnt(&cfg)?;
            let pnt_path = dir.join("pnt.csv");
            write_csv(
                &pnt_path,
                &["x", "delta", "h", "count", "ratio"],
                &pnt_rows_to_csv(&pnt),
            )?;
            manifest
                .outputs
                .push(("pnt".into(), pnt_path.display().to_string()));
            if !cfg.d_values.is_empty() {
                let density = experiment_density(&cfg)?;
                let density_path = dir.join("density.csv");
                write_csv(
                    &density_path,
                    &["x", "delta", "d", "pair_count", "normalized", "hl_prediction"],
                    &density_rows_to_csv(&density),
                )?;
                manifest
                    .outputs
                    .push(("density".into(), density_path.display().to_string()));
            }
            let manifest_path = dir.join("manifest.json");
            emit(&manifest, Some(&manifest_path))?;
            emit(&manifest, None)?;
        }
        Module::Report(args) => {
            let text = std::fs::read_to_string(&args.config)?;
            let cfg = parse_config(&text)?;
            let report = run_full_report(&cfg)?;
            emit(&report, args.out.as_deref())?;
            if let Some(stage) = report.aborted_at {
                return Err(Error::NumericCheck(format!("report aborted at stage {stage}")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::NumericCheck(msg)) => {
            eprintln!("numeric check failed: {msg}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
