//! Experiment orchestration: line-based config parsing, hashed run
//! manifests, the short-interval prime-count and gap-density experiments,
//! CSV/JSON emission with finiteness validation, and the full
//! parameter-chain report (tuple -> M_k -> threshold -> sums -> regions).

use crate::decomposition::{region_loss, RegionSpec, ALL_REGIONS};
use crate::error::{Error, Result};
use crate::maynard_weights::{build_lambda, build_y};
use crate::prime_engine::{count_primes, scan_gap_pairs, Interval};
use crate::scalar::{parse_rat, rat, rat_to_f64, rat_to_string, Ext, Rat};
use crate::sums::s1;
use crate::tuples::{is_admissible, singular_series, AdmissibleTuple, ContextBuilder, SieveContext};
use crate::variational::{optimize_mk, rho_threshold, SimplexPoly};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Parsed experiment description: a parameter grid plus output choices.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub x_values: Vec<u64>,
    #[serde(with = "crate::scalar::rat_serde")]
    pub delta: Rat,
    pub d_values: Vec<u64>,
    pub k: usize,
    pub degree: u32,
    pub tuple_offsets: Vec<i64>,
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
    pub oracle: bool,
    /// raw text the config was parsed from; hashed into the manifest
    #[serde(skip)]
    canonical: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "unnamed".into(),
            x_values: Vec::new(),
            delta: rat(21, 40),
            d_values: Vec::new(),
            k: 2,
            degree: 3,
            tuple_offsets: vec![0, 2],
            seeds: vec![1],
            output_dir: None,
            oracle: false,
            canonical: String::new(),
        }
    }
}

fn parse_list<T: std::str::FromStr>(v: &str, key: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::Config(format!("bad value {s:?} in list for key {key}")))
        })
        .collect()
}

/// Line-based `key = value` format with `[section]` headers. Sections:
/// `[experiment]` (name, delta, k, degree, tuple, oracle), `[grid]`
/// (x, d, seeds), `[output]` (dir). Unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut section = String::from("experiment");
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(s) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = s.trim().to_string();
            if !matches!(section.as_str(), "experiment" | "grid" | "output") {
                return Err(Error::Config(format!(
                    "unknown section [{section}] at line {}",
                    lineno + 1
                )));
            }
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("expected key = value at line {}", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        match (section.as_str(), key) {
            ("experiment", "name") => cfg.name = value.to_string(),
            ("experiment", "delta") => {
                cfg.delta = parse_rat(value)
                    .ok_or_else(|| Error::Config(format!("bad rational delta = {value}")))?;
            }
            ("experiment", "k") => {
                cfg.k = value
                    .parse()
                    .map_err(|_| Error::Config(format!("bad k = {value}")))?;
            }
            ("experiment", "degree") => {
                cfg.degree = value
                    .parse()
                    .map_err(|_| Error::Config(format!("bad degree = {value}")))?;
            }
            ("experiment", "tuple") => cfg.tuple_offsets = parse_list(value, "tuple")?,
            ("experiment", "oracle") => {
                cfg.oracle = value
                    .parse()
                    .map_err(|_| Error::Config(format!("bad oracle flag = {value}")))?;
            }
            ("grid", "x") => cfg.x_values = parse_list(value, "x")?,
            ("grid", "d") => cfg.d_values = parse_list(value, "d")?,
            ("grid", "seeds") => cfg.seeds = parse_list(value, "seeds")?,
            ("output", "dir") => cfg.output_dir = Some(PathBuf::from(value)),
            _ => {
                return Err(Error::Config(format!(
                    "unknown key {key:?} in section [{section}] at line {}",
                    lineno + 1
                )));
            }
        }
    }
    cfg.canonical = canonical_text(&cfg);
    validate(&cfg)?;
    Ok(cfg)
}

fn canonical_text(cfg: &ExperimentConfig) -> String {
    let join = |v: &[u64]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    let mut s = String::new();
    let _ = writeln!(s, "[experiment]");
    let _ = writeln!(s, "name = {}", cfg.name);
    let _ = writeln!(s, "delta = {}", rat_to_string(&cfg.delta));
    let _ = writeln!(s, "k = {}", cfg.k);
    let _ = writeln!(s, "degree = {}", cfg.degree);
    let _ = writeln!(
        s,
        "tuple = {}",
        cfg.tuple_offsets
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    );
    let _ = writeln!(s, "oracle = {}", cfg.oracle);
    let _ = writeln!(s, "[grid]");
    let _ = writeln!(s, "x = {}", join(&cfg.x_values));
    let _ = writeln!(s, "d = {}", join(&cfg.d_values));
    let _ = writeln!(s, "seeds = {}", join(&cfg.seeds));
    if let Some(dir) = &cfg.output_dir {
        let _ = writeln!(s, "[output]");
        let _ = writeln!(s, "dir = {}", dir.display());
    }
    s
}

fn validate(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.delta < rat(21, 40) || cfg.delta > rat(1, 1) {
        return Err(Error::Config(format!(
            "delta = {} outside [0.525, 1]",
            rat_to_string(&cfg.delta)
        )));
    }
    for &x in &cfg.x_values {
        if x < 100 || x > 1_000_000_000_000 {
            return Err(Error::Config(format!("x = {x} outside [100, 10^12]")));
        }
    }
    for &d in &cfg.d_values {
        if d < 2 || d % 2 != 0 {
            return Err(Error::Config(format!("gap bound d = {d} must be even >= 2")));
        }
    }
    if cfg.k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    // every grid point must give a valid sieve context
    let t = AdmissibleTuple::from_offsets(&cfg.tuple_offsets)?;
    let cert = is_admissible(&t);
    if !cert.admissible {
        return Err(Error::Config(format!(
            "tuple covers all residues mod {}",
            cert.covering_prime.unwrap_or(0)
        )));
    }
    for &x in &cfg.x_values {
        ContextBuilder::new(t.clone(), x, cfg.delta.clone())
            .build()
            .map_err(|e| Error::Config(format!("grid point x = {x}: {e}")))?;
    }
    Ok(())
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(cfg.canonical.as_bytes());
    let out = hasher.finalize();
    out.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

/// Record of one run: re-running the same config hash must reproduce the
/// numeric payloads byte for byte (timestamps live only here).
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub created_unix: u64,
    pub machine: String,
    pub outputs: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        let created = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunManifest {
            config_hash: config_hash(cfg),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: created,
            machine: format!("{}/{}", std::env::consts::OS, std::env::consts::ARCH),
            outputs: Vec::new(),
        }
    }
}

// ---------------------------------------------------------------------------
// Emission helpers
// ---------------------------------------------------------------------------

/// 17 significant digits: enough to round-trip any f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn check_finite(values: &[f64], what: &str) -> Result<()> {
    for &v in values {
        if !v.is_finite() {
            return Err(Error::NumericCheck(format!(
                "non-finite value {v} in {what}"
            )));
        }
    }
    Ok(())
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{}", header.join(","));
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::NumericCheck(format!(
                "row width {} does not match header width {}",
                row.len(),
                header.len()
            )));
        }
        let _ = writeln!(out, "{}", row.join(","));
    }
    std::fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct PntRow {
    pub x: u64,
    pub delta: f64,
    pub h: u64,
    pub count: u64,
    /// count * log x / h; near 1 when the short interval matches the
    /// average prime density
    pub ratio: f64,
}

fn interval_length(x: u64, delta: &Rat) -> Result<u64> {
    let h = (x as f64).powf(rat_to_f64(delta)).floor() as u64;
    if h == 0 || h > x {
        return Err(Error::Config(format!(
            "interval length h = {h} invalid for x = {x}"
        )));
    }
    Ok(h)
}

/// Prime counts in (x - h, x] with h = floor(x^delta), against the
/// h / log x average. Grid points run in parallel; output keeps grid order.
pub fn experiment_short_interval_pnt(cfg: &ExperimentConfig) -> Result<Vec<PntRow>> {
    let delta = cfg.delta.clone();
    let rows: Result<Vec<PntRow>> = cfg
        .x_values
        .par_iter()
        .map(|&x| {
            let h = interval_length(x, &delta)?;
            let count = count_primes(Interval::new(x - h, x)?);
            let ratio = count as f64 * (x as f64).ln() / h as f64;
            Ok(PntRow {
                x,
                delta: rat_to_f64(&delta),
                h,
                count,
                ratio,
            })
        })
        .collect();
    let rows = rows?;
    check_finite(
        &rows.iter().map(|r| r.ratio).collect::<Vec<_>>(),
        "pnt ratios",
    )?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityRow {
    pub x: u64,
    pub delta: f64,
    pub d: u64,
    /// consecutive prime pairs in (x - h, x] differing by at most d
    pub pair_count: u64,
    /// pair_count * (log x)^2 / h
    pub normalized: f64,
    /// sum of the pair-correlation constants for the gaps 2, 4, ..., d
    pub hl_prediction: f64,
}

/// Pair-correlation prediction for gaps up to d: sum over even d' <= d of
/// the singular series of the pair (0, d').
pub fn pair_density_prediction(d: u64) -> f64 {
    let mut total = 0.0;
    let mut dp = 2;
    while dp <= d {
        let t = AdmissibleTuple::from_offsets(&[0, dp as i64]).expect("pair tuple");
        total += singular_series(&t, 1000).value;
        dp += 2;
    }
    total
}

/// Counts of close consecutive prime pairs in (x - h, x] for each grid
/// (x, d), normalized to the (log x)^-2 density scale.
pub fn experiment_density(cfg: &ExperimentConfig) -> Result<Vec<DensityRow>> {
    let delta = cfg.delta.clone();
    let mut points: Vec<(u64, u64)> = Vec::new();
    for &x in &cfg.x_values {
        for &d in &cfg.d_values {
            points.push((x, d));
        }
    }
    let rows: Result<Vec<DensityRow>> = points
        .par_iter()
        .map(|&(x, d)| {
            let h = interval_length(x, &delta)?;
            let pairs = scan_gap_pairs(Interval::new(x - h, x)?, d);
            let log_x = (x as f64).ln();
            Ok(DensityRow {
                x,
                delta: rat_to_f64(&delta),
                d,
                pair_count: pairs.len() as u64,
                normalized: pairs.len() as f64 * log_x * log_x / h as f64,
                hl_prediction: pair_density_prediction(d),
            })
        })
        .collect();
    let rows = rows?;
    check_finite(
        &rows
            .iter()
            .flat_map(|r| [r.normalized, r.hl_prediction])
            .collect::<Vec<_>>(),
        "density rows",
    )?;
    Ok(rows)
}

pub fn pnt_rows_to_csv(rows: &[PntRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.x.to_string(),
                fmt_f64(r.delta),
                r.h.to_string(),
                r.count.to_string(),
                fmt_f64(r.ratio),
            ]
        })
        .collect()
}

pub fn density_rows_to_csv(rows: &[DensityRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.x.to_string(),
                fmt_f64(r.delta),
                r.d.to_string(),
                r.pair_count.to_string(),
                fmt_f64(r.normalized),
                fmt_f64(r.hl_prediction),
            ]
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Full report
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct FullReport {
    pub manifest: RunManifest,
    pub document: serde_json::Value,
    /// set when a stage failed; the document holds everything before it
    pub aborted_at: Option<String>,
}

fn desk_context(cfg: &ExperimentConfig, x: u64) -> Result<(SieveContext, AdmissibleTuple)> {
    let t = AdmissibleTuple::from_offsets(&cfg.tuple_offsets)?;
    ContextBuilder::new(t, x, cfg.delta.clone())
        .d0_floor(5)
        .r_override(20.0)
        .build()
}

/// Runs the parameter chain (tuple, certified M_k, threshold m), the
/// region-loss table, a desk-scale S1 evaluation, and both experiments.
/// A stage failure stops the chain; everything computed so far stays in
/// the document.
pub fn run_full_report(cfg: &ExperimentConfig) -> Result<FullReport> {
    let mut manifest = RunManifest::new(cfg);
    let mut doc = serde_json::Map::new();
    doc.insert("name".into(), cfg.name.clone().into());
    doc.insert("config_hash".into(), manifest.config_hash.clone().into());
    let abort = |doc: serde_json::Map<String, serde_json::Value>,
                 manifest: RunManifest,
                 stage: &str,
                 err: Error| {
        let mut doc = doc;
        doc.insert("error".into(), err.to_string().into());
        Ok(FullReport {
            manifest,
            document: serde_json::Value::Object(doc),
            aborted_at: Some(stage.to_string()),
        })
    };
    // stage 1: tuple
    let tuple = match AdmissibleTuple::from_offsets(&cfg.tuple_offsets) {
        Ok(t) => t,
        Err(e) => return abort(doc, manifest, "tuple", e),
    };
    doc.insert(
        "tuple".into(),
        serde_json::json!({
            "k": tuple.k(),
            "offsets": cfg.tuple_offsets,
        }),
    );
    // stage 2: variational bound and threshold
    let mk = match optimize_mk(cfg.k as u64, cfg.degree) {
        Ok(r) => r,
        Err(e) => return abort(doc, manifest, "mk", e),
    };
    doc.insert(
        "mk".into(),
        serde_json::json!({
            "k": cfg.k,
            "degree": cfg.degree,
            "certified_lower_bound": mk.mk_lower,
        }),
    );
    let thr = match rho_threshold(&cfg.delta, &rat(1, 1000), &rat(94, 100), &mk.certified) {
        Ok(t) => t,
        Err(e) => return abort(doc, manifest, "threshold", e),
    };
    doc.insert(
        "threshold".into(),
        serde_json::json!({"m": thr.m, "conclusive": thr.conclusive}),
    );
    manifest.outputs.push(("parameter_chain".into(), "inline".into()));
    // stage 3: region losses
    let mut regions = Vec::new();
    for name in ALL_REGIONS {
        let spec = RegionSpec::of(name);
        match region_loss(&spec, &cfg.delta) {
            Ok(l) => regions.push(serde_json::json!({
                "region": format!("{name:?}"),
                "nonempty": !l.empty,
                "loss": l.value,
                "budget": l.budget,
            })),
            Err(e) => return abort(doc, manifest, "regions", e),
        }
    }
    doc.insert("regions".into(), serde_json::Value::Array(regions));
    if cfg.x_values.is_empty() {
        return Ok(FullReport {
            manifest,
            document: serde_json::Value::Object(doc),
            aborted_at: None,
        });
    }
    // stage 4: desk-scale S1 at the smallest grid point (capped at 10^8)
    let x0 = (*cfg.x_values.iter().min().unwrap()).min(100_000_000);
    let s1_stage = (|| -> Result<serde_json::Value> {
        let (ctx, t) = desk_context(cfg, x0)?;
        let f = SimplexPoly::constant(ctx.k, rat(1, 1));
        let y = build_y::<Ext>(&f, &ctx)?;
        let lam = build_lambda(&y);
        let h = interval_length(x0, &cfg.delta)?;
        let rep = s1(Interval::new(x0 - h, x0)?, &ctx, &t, &lam, &f)?;
        Ok(serde_json::to_value(&rep)?)
    })();
    match s1_stage {
        Ok(v) => {
            doc.insert("s1".into(), v);
        }
        Err(e) => return abort(doc, manifest, "s1", e),
    }
    // stage 5: experiments
    match experiment_short_interval_pnt(cfg) {
        Ok(rows) => {
            doc.insert("pnt".into(), serde_json::to_value(&rows)?);
            manifest.outputs.push(("pnt".into(), "inline".into()));
        }
        Err(e) => return abort(doc, manifest, "pnt", e),
    }
    if !cfg.d_values.is_empty() {
        match experiment_density(cfg) {
            Ok(rows) => {
                doc.insert("density".into(), serde_json::to_value(&rows)?);
                manifest.outputs.push(("density".into(), "inline".into()));
            }
            Err(e) => return abort(doc, manifest, "density", e),
        }
    }
    Ok(FullReport {
        manifest,
        document: serde_json::Value::Object(doc),
        aborted_at: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
[experiment]
name = demo
delta = 21/40
k = 2
degree = 3
tuple = 0,2
[grid]
x = 1000000
d = 2,6
seeds = 7
";

    #[test]
    fn config_parse_and_hash() {
        let cfg = parse_config(SAMPLE).unwrap();
        assert_eq!(cfg.name, "demo");
        assert_eq!(cfg.delta, rat(21, 40));
        assert_eq!(cfg.x_values, vec![1_000_000]);
        assert_eq!(cfg.d_values, vec![2, 6]);
        let h1 = config_hash(&cfg);
        let h2 = config_hash(&parse_config(SAMPLE).unwrap());
        assert_eq!(h1, h2);
        assert_eq!(h1.len(), 64);
        let other = parse_config(&SAMPLE.replace("demo", "demo2")).unwrap();
        assert_ne!(h1, config_hash(&other));
    }

    #[test]
    fn config_rejects_bad_input() {
        assert!(matches!(
            parse_config("[experiment]\nfrobnicate = 1\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            parse_config("[experiment]\ndelta = 1/2\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            parse_config("[experiment]\ndelta = 3/2\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            parse_config("[grid]\nd = 3\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            parse_config("[bogus]\n"),
            Err(Error::Config(_))
        ));
        // odd-offset tuple is inadmissible mod 2
        assert!(parse_config("[experiment]\ntuple = 0,1\n").is_err());
    }

    #[test]
    fn pnt_rows_match_known_count() {
        let mut cfg = parse_config(SAMPLE).unwrap();
        cfg.delta = rat(1, 1);
        let rows = experiment_short_interval_pnt(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].h, 1_000_000);
        assert_eq!(rows[0].count, 78_498);
        let expected = 78_498.0 * (1e6f64).ln() / 1e6;
        assert!((rows[0].ratio - expected).abs() < 1e-12);
    }

    #[test]
    fn pnt_short_interval_ratio_band() {
        let mut cfg = parse_config(SAMPLE).unwrap();
        cfg.x_values = vec![100_000_000];
        cfg.delta = rat(3, 5);
        let rows = experiment_short_interval_pnt(&cfg).unwrap();
        assert!(
            (0.7..=1.3).contains(&rows[0].ratio),
            "ratio {}",
            rows[0].ratio
        );
    }

    #[test]
    fn density_monotone_and_predicted() {
        let mut cfg = parse_config(SAMPLE).unwrap();
        cfg.x_values = vec![10_000_000];
        cfg.delta = rat(3, 5);
        let rows = experiment_density(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        let (d2, d6) = (&rows[0], &rows[1]);
        assert_eq!(d2.d, 2);
        assert_eq!(d6.d, 6);
        assert!(d6.pair_count >= d2.pair_count);
        assert!(d2.hl_prediction > 1.0 && d2.hl_prediction < 2.0); // twin constant 1.32..
        // S(0,4) = S(0,2) and S(0,6) = 2 S(0,2), so the sum to d = 6 is 4 S(0,2)
        assert!((d6.hl_prediction - 4.0 * d2.hl_prediction).abs() < 1e-9);
    }

    #[test]
    fn interval_length_rejects_overflow() {
        assert!(interval_length(1000, &rat(2, 1)).is_err());
        assert_eq!(interval_length(1000, &rat(1, 1)).unwrap(), 1000);
    }

    #[test]
    fn finite_check_and_csv() {
        assert!(check_finite(&[1.0, 2.0], "t").is_ok());
        assert!(matches!(
            check_finite(&[f64::NAN], "t"),
            Err(Error::NumericCheck(_))
        ));
        assert!(matches!(
            check_finite(&[f64::INFINITY], "t"),
            Err(Error::NumericCheck(_))
        ));
        // 17 significant digits round-trip
        let v = std::f64::consts::PI;
        assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(&path, &["a", "b"], &[vec!["1".into(), fmt_f64(0.5)]]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("a,b\n"));
        assert!(write_csv(&path, &["a"], &[vec!["1".into(), "2".into()]]).is_err());
    }

    #[test]
    fn full_report_empty_grid_has_chain_only() {
        let mut cfg = parse_config(SAMPLE).unwrap();
        cfg.x_values = Vec::new();
        cfg.d_values = Vec::new();
        let rep = run_full_report(&cfg).unwrap();
        assert!(rep.aborted_at.is_none());
        let doc = rep.document.as_object().unwrap();
        assert!(doc.contains_key("tuple"));
        assert!(doc.contains_key("mk"));
        assert!(doc.contains_key("threshold"));
        assert!(doc.contains_key("regions"));
        assert!(!doc.contains_key("pnt"));
    }

    #[test]
    fn full_report_deterministic_numeric_payload() {
        let mut cfg = parse_config(SAMPLE).unwrap();
        cfg.x_values = vec![1_000_000];
        cfg.d_values = vec![2];
        let r1 = run_full_report(&cfg).unwrap();
        let r2 = run_full_report(&cfg).unwrap();
        assert!(r1.aborted_at.is_none());
        assert_eq!(
            serde_json::to_string(&r1.document).unwrap(),
            serde_json::to_string(&r2.document).unwrap()
        );
        assert_eq!(r1.manifest.config_hash, r2.manifest.config_hash);
        let doc = r1.document.as_object().unwrap();
        assert!(doc.contains_key("s1"));
        assert!(doc.contains_key("pnt"));
        assert!(doc.contains_key("density"));
    }
}
