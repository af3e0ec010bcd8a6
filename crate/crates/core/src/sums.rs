//! Weighted short-interval sums over the sieve weights: S1, the prime-marked
//! S2^(m), the small-prime-restricted variants, the simultaneous-prime
//! counter, and a Bombieri-Vinogradov-style error scan with the prime
//! indicator standing in for the mollified counting function.
//!
//! Enumeration strides through the single residue class v0 mod W. Divisor
//! conditions d_i | L_i(n) are resolved once per table entry into a residue
//! class modulo the (coprime) product of the d_i, then scattered onto the
//! stride buckets, so no n is ever factored.

use crate::error::{Error, Result};
use crate::maynard_weights::WeightTable;
use crate::prime_engine::{is_prime, simple_sieve, sieve_interval, Interval};
use crate::scalar::{rat_to_f64, Real};
use crate::tuples::{mod_inverse, AdmissibleTuple, SieveContext};
use crate::variational::{i_k, j_k_m, SimplexPoly};
use num_integer::Integer;
use serde::Serialize;

/// One evaluated sum against its first-order prediction.
#[derive(Debug, Clone, Serialize)]
pub struct SumReport {
    pub value: f64,
    /// stride positions visited
    pub n_count: u64,
    pub main_term: f64,
    /// value / main_term (NaN when the main term vanishes)
    pub ratio: f64,
    pub params: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl SumReport {
    fn new(value: f64, n_count: u64, main_term: f64, params: serde_json::Value) -> Self {
        let ratio = if main_term != 0.0 {
            value / main_term
        } else {
            f64::NAN
        };
        SumReport {
            value,
            n_count,
            main_term,
            ratio,
            params,
            warning: None,
        }
    }
}

/// Lambda table entry translated into a single residue condition
/// n = residue (mod modulus), modulus = product of the d_i.
struct ResidueEntry<S> {
    d: Vec<u64>,
    modulus: u64,
    residue: u64,
    lambda: S,
}

fn residue_entries<S: Real>(
    lam: &WeightTable<S>,
    t: &AdmissibleTuple,
) -> Result<Vec<ResidueEntry<S>>> {
    if t.k() != lam.k {
        return Err(Error::Config(format!(
            "tuple arity {} does not match table k = {}",
            t.k(),
            lam.k
        )));
    }
    let mut out = Vec::with_capacity(lam.entries.len());
    'entry: for (d, &lambda) in &lam.entries {
        // CRT over the pairwise coprime d_i: d_i | a_i n + h_i
        let mut modulus = 1u64;
        let mut residue = 0u64;
        for (f, &di) in t.forms().iter().zip(d) {
            if di == 1 {
                continue;
            }
            if f.a.gcd(&di) != 1 {
                // gcd(a, h) = 1, so a shared factor makes the condition empty
                continue 'entry;
            }
            let ri = {
                let inv = mod_inverse(f.a % di, di) as i128;
                ((-(f.h as i128)).rem_euclid(di as i128) * inv % di as i128) as u64
            };
            // combine n = residue (mod modulus) with n = ri (mod di)
            let step_inv = mod_inverse(modulus % di, di) as u128;
            let diff = (ri as i128 - residue as i128).rem_euclid(di as i128) as u128;
            let tshift = (diff * step_inv % di as u128) as u64;
            residue += tshift * modulus;
            modulus *= di;
        }
        out.push(ResidueEntry {
            d: d.clone(),
            modulus,
            residue,
            lambda,
        });
    }
    Ok(out)
}

/// Per-position inner lambda sums over the stride n = n0 + i W, optionally
/// keeping only entries with d_m = 1 (the modified weights).
fn bucket_sums<S: Real>(
    iv: Interval,
    ctx: &SieveContext,
    entries: &[ResidueEntry<S>],
    restrict_dm: Option<usize>,
) -> (u64, Vec<S>) {
    let w = ctx.w;
    let first_off = (ctx.v0 as i128 - (iv.lo + 1) as i128).rem_euclid(w as i128) as u64;
    let n0 = iv.lo + 1 + first_off;
    if n0 > iv.hi {
        return (n0, Vec::new());
    }
    let count = (iv.hi - n0) / w + 1;
    let mut buckets = vec![S::zero(); count as usize];
    for e in entries {
        if let Some(m) = restrict_dm {
            if e.d[m] != 1 {
                continue;
            }
        }
        if e.modulus == 1 {
            for b in buckets.iter_mut() {
                *b = *b + e.lambda;
            }
            continue;
        }
        // first stride index with n0 + i W = residue (mod modulus)
        let dm = e.modulus;
        let winv = mod_inverse(w % dm, dm) as u128;
        let diff = (e.residue as i128 - n0 as i128).rem_euclid(dm as i128) as u128;
        let mut i = (diff * winv % dm as u128) as u64;
        while i < count {
            buckets[i as usize] = buckets[i as usize] + e.lambda;
            i += dm;
        }
    }
    (n0, buckets)
}

fn snapshot(iv: Interval, ctx: &SieveContext, extra: serde_json::Value) -> serde_json::Value {
    serde_json::json!({
        "lo": iv.lo, "hi": iv.hi,
        "k": ctx.k, "W": ctx.w, "v0": ctx.v0, "R": ctx.r,
        "extra": extra,
    })
}

fn warn_short(iv: Interval, ctx: &SieveContext, mut report: SumReport) -> SumReport {
    if ctx.w >= iv.len() {
        report.warning = Some(format!(
            "W = {} is at least the interval length {}; too few terms to compare",
            ctx.w,
            iv.len()
        ));
    }
    report
}

fn phi_over_w(w: u64) -> f64 {
    let mut num = 1.0f64;
    let mut m = w;
    let mut p = 2u64;
    while p * p <= m {
        if m % p == 0 {
            num *= 1.0 - 1.0 / p as f64;
            while m % p == 0 {
                m /= p;
            }
        }
        p += 1;
    }
    if m > 1 {
        num *= 1.0 - 1.0 / m as f64;
    }
    num
}

/// S1 = sum of w(n) over the stride; prediction
/// (h/W) (phi(W) log R / W)^k I_k(F).
pub fn s1<S: Real>(
    iv: Interval,
    ctx: &SieveContext,
    t: &AdmissibleTuple,
    lam: &WeightTable<S>,
    f: &SimplexPoly,
) -> Result<SumReport> {
    let entries = residue_entries(lam, t)?;
    let (_, buckets) = bucket_sums(iv, ctx, &entries, None);
    let value = buckets
        .iter()
        .fold(S::zero(), |acc, &b| acc + b * b)
        .to_f64_lossy();
    let h = iv.len() as f64;
    let log_r = ctx.r.ln();
    let main = h / ctx.w as f64
        * (phi_over_w(ctx.w) * log_r).powi(ctx.k as i32)
        * rat_to_f64(&i_k(f));
    let report = SumReport::new(
        value,
        buckets.len() as u64,
        main,
        snapshot(iv, ctx, serde_json::json!({"sum": "S1"})),
    );
    Ok(warn_short(iv, ctx, report))
}

/// S2^(m) = sum of 1_P(L_m(n)) w(n); with `restrict_dm` the weights are the
/// modified w'(n) built from entries with d_m = 1. Prediction:
/// (1 - beta) (h/W) (log R / log x) (phi(W) log R / W)^k J_k^(m)(F).
pub fn s2_m<S: Real>(
    iv: Interval,
    ctx: &SieveContext,
    t: &AdmissibleTuple,
    lam: &WeightTable<S>,
    f: &SimplexPoly,
    m: usize,
    restrict_dm: bool,
) -> Result<SumReport> {
    if m < 1 || m > ctx.k {
        return Err(Error::Domain(format!("form index m = {m} outside 1..={}", ctx.k)));
    }
    let entries = residue_entries(lam, t)?;
    let restrict = if restrict_dm { Some(m - 1) } else { None };
    let (n0, buckets) = bucket_sums(iv, ctx, &entries, restrict);
    let form = &t.forms()[m - 1];
    let mut acc = S::zero();
    for (i, &b) in buckets.iter().enumerate() {
        if b.is_zero() {
            continue;
        }
        let n = n0 + i as u64 * ctx.w;
        let ln = form.eval(n);
        if ln > 0 && ln <= u64::MAX as i128 && is_prime(ln as u64) {
            acc = acc + b * b;
        }
    }
    let h = iv.len() as f64;
    let log_r = ctx.r.ln();
    let log_x = (ctx.x as f64).ln();
    let main = rat_to_f64(&(crate::scalar::rat(1, 1) - ctx.beta.clone()))
        * h
        / ctx.w as f64
        * (log_r / log_x)
        * (phi_over_w(ctx.w) * log_r).powi(ctx.k as i32)
        * rat_to_f64(&j_k_m(f, m));
    let report = SumReport::new(
        acc.to_f64_lossy(),
        buckets.len() as u64,
        main,
        snapshot(iv, ctx, serde_json::json!({"sum": "S2", "m": m, "restrict_dm": restrict_dm})),
    );
    Ok(warn_short(iv, ctx, report))
}

/// Sum of w(n) over stride positions with p | L_j(n). Empty by construction
/// for p <= D0, which is rejected.
pub fn s1_p_j<S: Real>(
    iv: Interval,
    ctx: &SieveContext,
    t: &AdmissibleTuple,
    lam: &WeightTable<S>,
    p: u64,
    j: usize,
) -> Result<f64> {
    if p <= ctx.d0 {
        return Err(Error::Domain(format!(
            "p = {p} is at most D0 = {}; the restricted sum is empty by construction",
            ctx.d0
        )));
    }
    if !is_prime(p) {
        return Err(Error::Domain(format!("p = {p} is not prime")));
    }
    if j < 1 || j > ctx.k {
        return Err(Error::Domain(format!("form index j = {j} outside 1..={}", ctx.k)));
    }
    let entries = residue_entries(lam, t)?;
    let (n0, buckets) = bucket_sums(iv, ctx, &entries, None);
    let form = &t.forms()[j - 1];
    let mut acc = S::zero();
    for (i, &b) in buckets.iter().enumerate() {
        if b.is_zero() {
            continue;
        }
        let n = n0 + i as u64 * ctx.w;
        if form.eval(n).rem_euclid(p as i128) == 0 {
            acc = acc + b * b;
        }
    }
    Ok(acc.to_f64_lossy())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SMinusKind {
    S1Minus,
    S2Minus,
}

/// Restricted sums over n whose form product has a prime factor below
/// n^c1: S1- sums w(n); S2- additionally weights each n by its number of
/// prime forms, so S2- <= k S1- holds term by term.
pub fn s_minus<S: Real>(
    iv: Interval,
    ctx: &SieveContext,
    t: &AdmissibleTuple,
    lam: &WeightTable<S>,
    which: SMinusKind,
) -> Result<f64> {
    let c1 = rat_to_f64(&ctx.c1);
    if c1 < 0.0 {
        return Err(Error::Config(format!("c1 = {c1} must be nonnegative")));
    }
    let entries = residue_entries(lam, t)?;
    let (n0, buckets) = bucket_sums(iv, ctx, &entries, None);
    if buckets.is_empty() {
        return Ok(0.0);
    }
    // largest possible threshold over the interval bounds the sieve
    let max_thresh = (iv.hi as f64).powf(c1);
    let small_primes = simple_sieve(max_thresh.ceil() as u64 + 1);
    let mut acc = S::zero();
    for (i, &b) in buckets.iter().enumerate() {
        if b.is_zero() {
            continue;
        }
        let n = n0 + i as u64 * ctx.w;
        let thresh = (n as f64).powf(c1);
        let mut hit = false;
        'scan: for &p in &small_primes {
            if (p as f64) >= thresh {
                break;
            }
            for form in t.forms() {
                if form.eval(n).rem_euclid(p as i128) == 0 {
                    hit = true;
                    break 'scan;
                }
            }
        }
        if !hit {
            continue;
        }
        match which {
            SMinusKind::S1Minus => acc = acc + b * b,
            SMinusKind::S2Minus => {
                let mut primes = 0u64;
                for form in t.forms() {
                    let v = form.eval(n);
                    if v > 0 && v <= u64::MAX as i128 && is_prime(v as u64) {
                        primes += 1;
                    }
                }
                acc = acc + b * b * S::from_u64(primes).unwrap();
            }
        }
    }
    Ok(acc.to_f64_lossy())
}

/// Count of n in iv with at least m+1 prime forms and no prime factor of
/// the form product below n^c1.
pub fn count_s_h(
    iv: Interval,
    t: &AdmissibleTuple,
    ctx: &SieveContext,
    m: u64,
) -> Result<u64> {
    if m < 1 {
        return Err(Error::Domain("m must be at least 1".into()));
    }
    let c1 = rat_to_f64(&ctx.c1);
    let max_thresh = (iv.hi as f64).powf(c1);
    let small_primes = simple_sieve(max_thresh.ceil() as u64 + 1);
    let mut count = 0u64;
    for n in iv.lo + 1..=iv.hi {
        let mut primes = 0u64;
        for form in t.forms() {
            let v = form.eval(n);
            if v > 0 && v <= u64::MAX as i128 && is_prime(v as u64) {
                primes += 1;
            }
        }
        if primes < m + 1 {
            continue;
        }
        let thresh = (n as f64).powf(c1);
        let mut small_factor = false;
        'scan: for &p in &small_primes {
            if (p as f64) >= thresh {
                break;
            }
            for form in t.forms() {
                if form.eval(n).rem_euclid(p as i128) == 0 {
                    small_factor = true;
                    break 'scan;
                }
            }
        }
        if !small_factor {
            count += 1;
        }
    }
    Ok(count)
}

/// Discrepancy scan report: per-q maxima of |E| over residues and the
/// sampled (h, y) grid.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorScanReport {
    pub x: u64,
    pub z: u64,
    pub z0: u64,
    pub q_max: u64,
    /// (q, worst residue a, max |E|)
    pub per_q: Vec<(u64, u64, f64)>,
    pub total: f64,
    pub main_scale: f64,
    pub h_grid: Vec<u64>,
    pub y_grid: Vec<u64>,
}

/// z0 = x exp(-3 (log x)^(1/3)), rounded down.
pub fn z0_cutoff(x: u64) -> u64 {
    let xf = x as f64;
    (xf * (-3.0 * xf.ln().powf(1.0 / 3.0)).exp()).floor() as u64
}

/// Scan E(y, h; q, a) = [primes in (y-h, y] with n = a (q)]
/// - (h / z0) / phi(q) * [primes in (y-z0, y]] over q <= Q, all reduced
/// residues, h on a geometric grid in [z/4, z], y on a grid in [x/2, x).
pub fn error_scan(x: u64, z: u64, q_max: u64, _ctx: &SieveContext) -> Result<ErrorScanReport> {
    if z > x {
        return Err(Error::Domain(format!("z = {z} exceeds x = {x}")));
    }
    if q_max < 1 {
        return Err(Error::Domain("Q must be at least 1".into()));
    }
    let z0 = z0_cutoff(x);
    if z0 == 0 || z0 > z {
        return Err(Error::Domain(format!(
            "z0 = {z0} outside (0, z]; pick x and z with z >= z0"
        )));
    }
    let h_grid: Vec<u64> = (0..8)
        .map(|i| ((z as f64 / 4.0) * 4.0f64.powf(i as f64 / 7.0)).round() as u64)
        .collect();
    let y_grid: Vec<u64> = (0..4).map(|i| x / 2 + i * (x - x / 2) / 4).collect();
    let euler_phi = |q: u64| -> u64 {
        (1..=q).filter(|&a| a.gcd(&q) == 1).count() as u64
    };
    let mut per_q: Vec<(u64, u64, f64)> = (1..=q_max).map(|q| (q, 0, 0.0)).collect();
    for &y in &y_grid {
        let seg = sieve_interval(Interval::new(y - z, y)?);
        let primes: Vec<u64> = seg.primes().collect();
        let base_z0 = primes.iter().filter(|&&p| p > y - z0).count() as f64;
        for (slot, q) in (1..=q_max).enumerate() {
            let phi_q = euler_phi(q) as f64;
            // counts per residue class, accumulated from the top so each
            // h boundary is a prefix of the descending prime list
            let mut counts = vec![0u64; q as usize];
            let mut hs: Vec<u64> = h_grid.clone();
            hs.sort_unstable();
            let mut idx = primes.len();
            // walk h from smallest to largest, extending the window downward
            let mut lower = y;
            for &h in &hs {
                let floor = y - h;
                while idx > 0 && primes[idx - 1] > floor {
                    idx -= 1;
                }
                // extend counts for primes in (floor, lower]
                let mut j = idx;
                while j < primes.len() && primes[j] <= lower {
                    counts[(primes[j] % q) as usize] += 1;
                    j += 1;
                }
                lower = floor;
                let expected = h as f64 / z0 as f64 / phi_q * base_z0;
                for a in 0..q {
                    if a.gcd(&q) != 1 && q > 1 {
                        continue;
                    }
                    let e = (counts[a as usize] as f64 - expected).abs();
                    if e > per_q[slot].2 {
                        per_q[slot] = (q, a, e);
                    }
                }
            }
        }
    }
    let total: f64 = per_q.iter().map(|&(_, _, e)| e).sum();
    let main_scale = z as f64 / (x as f64).ln();
    Ok(ErrorScanReport {
        x,
        z,
        z0,
        q_max,
        per_q,
        total,
        main_scale,
        h_grid,
        y_grid,
    })
}
