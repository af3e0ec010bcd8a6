//! Admissible sets of linear forms L_i(n) = a_i n + h_i, the W / v0 / D0
//! machinery, and singular-series calibration for constellation counts.

use crate::error::{Error, Result};
use crate::prime_engine::simple_sieve;
use crate::scalar::{rat, rat_serde, rat_to_f64, Rat};
use num_bigint::BigUint;
use num_integer::Integer;
use serde::{Deserialize, Serialize};

/// A linear form a*n + h with a >= 1 and gcd(a, h) = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinearForm {
    pub a: u64,
    pub h: i64,
}

impl LinearForm {
    pub fn new(a: u64, h: i64) -> Result<Self> {
        if a == 0 {
            return Err(Error::InvalidForm {
                a,
                h,
                reason: "slope must be positive".into(),
            });
        }
        let g = (a as i128).gcd(&(h as i128));
        if g != 1 && !(h == 0 && a == 1) {
            return Err(Error::InvalidForm {
                a,
                h,
                reason: "gcd(a, h) must be 1".into(),
            });
        }
        Ok(LinearForm { a, h })
    }

    /// L(n) as an i128 (callers positioned near large x stay well in range).
    pub fn eval(&self, n: u64) -> i128 {
        self.a as i128 * n as i128 + self.h as i128
    }

    /// L(n) as u64; errors if the value is not positive.
    pub fn eval_u64(&self, n: u64) -> Result<u64> {
        let v = self.eval(n);
        if v <= 0 {
            return Err(Error::Domain(format!(
                "L(n) = {}n + {} is {} <= 0 at n = {n}",
                self.a, self.h, v
            )));
        }
        u64::try_from(v).map_err(|_| Error::IntervalOverflow(u64::MAX))
    }

    /// L(v) reduced mod m.
    pub fn eval_mod(&self, v: u64, m: u64) -> u64 {
        let m = m as i128;
        let r = (self.a as i128 % m * (v as i128 % m) + self.h as i128) % m;
        ((r % m + m) % m) as u64
    }
}

/// A tuple of distinct linear forms, candidate set H for the sieve.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissibleTuple {
    forms: Vec<LinearForm>,
}

/// Outcome of the admissibility check: per-prime witness residues when
/// admissible, the covering prime otherwise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissibilityCertificate {
    pub admissible: bool,
    /// (p, n mod p) with no L_i(n) divisible by p, for every prime p <= k.
    pub witnesses: Vec<(u64, u64)>,
    pub covering_prime: Option<u64>,
}

impl AdmissibleTuple {
    pub fn new(forms: Vec<LinearForm>) -> Result<Self> {
        if forms.is_empty() {
            return Err(Error::Domain("tuple needs at least one form".into()));
        }
        for (i, f) in forms.iter().enumerate() {
            if forms[..i].contains(f) {
                return Err(Error::DuplicateForm { a: f.a, h: f.h });
            }
        }
        Ok(AdmissibleTuple { forms })
    }

    /// Offsets-only constructor with all slopes 1.
    pub fn from_offsets(offsets: &[i64]) -> Result<Self> {
        AdmissibleTuple::new(
            offsets
                .iter()
                .map(|&h| LinearForm::new(1, h))
                .collect::<Result<_>>()?,
        )
    }

    pub fn k(&self) -> usize {
        self.forms.len()
    }

    pub fn forms(&self) -> &[LinearForm] {
        &self.forms
    }

    /// Residues n mod p for which p divides some L_i(n).
    /// Returns 0..p when a form vanishes identically mod p (impossible for
    /// valid forms since gcd(a, h) = 1 forces p to miss one of them).
    pub fn roots_mod_p(&self, p: u64) -> Vec<u64> {
        let mut roots: Vec<u64> = Vec::with_capacity(self.k());
        for f in &self.forms {
            if f.a % p == 0 {
                // p | a and gcd(a, h) = 1 imply p does not divide L(n) for any n
                continue;
            }
            let a_inv = mod_inverse(f.a % p, p);
            let h_mod = f.eval_mod(0, p);
            let root = (p - h_mod % p) % p * a_inv % p;
            if !roots.contains(&root) {
                roots.push(root);
            }
        }
        roots.sort_unstable();
        roots
    }
}

pub(crate) fn mod_inverse(a: u64, m: u64) -> u64 {
    // extended Euclid; callers guarantee gcd(a, m) = 1
    let (mut old_r, mut r) = (a as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    (((old_s % m as i128) + m as i128) % m as i128) as u64
}

/// Admissibility: for every prime p <= k there is a residue class avoiding
/// all the forms' roots. For p > k this is automatic (k forms cover at most
/// k < p classes).
pub fn is_admissible(t: &AdmissibleTuple) -> AdmissibilityCertificate {
    let k = t.k() as u64;
    let mut witnesses = Vec::new();
    for p in simple_sieve(k) {
        let roots = t.roots_mod_p(p);
        if roots.len() as u64 == p {
            return AdmissibilityCertificate {
                admissible: false,
                witnesses,
                covering_prime: Some(p),
            };
        }
        let witness = (0..p).find(|n| !roots.contains(n)).unwrap();
        witnesses.push((p, witness));
    }
    AdmissibilityCertificate {
        admissible: true,
        witnesses,
        covering_prime: None,
    }
}

/// The first k primes larger than k, as offsets with slope 1.
pub fn make_prime_tuple(k: usize) -> AdmissibleTuple {
    let mut limit = (2 * k + 30) as u64;
    loop {
        let primes: Vec<u64> = simple_sieve(limit)
            .into_iter()
            .filter(|&p| p > k as u64)
            .take(k)
            .collect();
        if primes.len() == k {
            let t = AdmissibleTuple::from_offsets(
                &primes.iter().map(|&p| p as i64).collect::<Vec<_>>(),
            )
            .expect("prime offsets are distinct");
            debug_assert!(is_admissible(&t).admissible);
            return t;
        }
        limit *= 2;
    }
}

/// The D0 lower bound from the cross terms a_j h_i - a_i h_j, the offsets,
/// and the slopes. Returns max(floor, bound + 1).
pub fn pick_d0(t: &AdmissibleTuple, floor: u64) -> u64 {
    let forms = t.forms();
    let mut bound: i64 = 0;
    for (i, fi) in forms.iter().enumerate() {
        bound = bound.max(fi.h).max(fi.a as i64);
        for fj in &forms[i + 1..] {
            let cross = (fj.a as i128 * fi.h as i128 - fi.a as i128 * fj.h as i128).unsigned_abs();
            bound = bound.max(i64::try_from(cross).unwrap_or(i64::MAX));
        }
    }
    floor.max(bound as u64 + 1)
}

/// Default floor for pick_d0: "sufficiently large with respect to k".
pub fn default_d0_floor(t: &AdmissibleTuple) -> u64 {
    pick_d0(t, 0).max(t.k() as u64)
}

/// Primorial of d0 in arbitrary precision.
pub fn compute_w(d0: u64) -> BigUint {
    let mut w = BigUint::from(1u32);
    for p in simple_sieve(d0) {
        w *= p;
    }
    w
}

/// Primorial of d0 as u64, rejecting overflow.
pub fn compute_w_u64(d0: u64) -> Result<u64> {
    let mut w: u64 = 1;
    for p in simple_sieve(d0) {
        w = w.checked_mul(p).ok_or(Error::PrimorialOverflow(d0))?;
    }
    Ok(w)
}

/// Smallest residue v0 mod W with every L_i(v0) coprime to W.
pub fn find_v0(t: &AdmissibleTuple, w: u64) -> Result<u64> {
    if w == 1 {
        return Ok(0);
    }
    if w > 200_000_000 {
        return Err(Error::Domain(format!("W = {w} too large for residue scan")));
    }
    'outer: for v in 0..w {
        for f in t.forms() {
            if f.eval_mod(v, w).gcd(&w) != 1 {
                continue 'outer;
            }
        }
        return Ok(v);
    }
    // no residue: name the prime whose classes are fully covered
    for p in simple_sieve(w).into_iter().filter(|p| w % p == 0) {
        if t.roots_mod_p(p).len() as u64 == p {
            return Err(Error::NoResidue(p));
        }
    }
    Err(Error::NoResidue(w))
}

/// Truncated singular series: prod_{p <= cutoff} (1 - nu_p/p)(1 - 1/p)^{-k}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingularSeries {
    pub value: f64,
    pub cutoff: u64,
    /// false when some prime's residues are fully covered (value forced to 0)
    pub admissible: bool,
}

pub fn singular_series(t: &AdmissibleTuple, cutoff: u64) -> SingularSeries {
    let k = t.k() as i32;
    let mut log_sum = 0.0f64;
    for p in simple_sieve(cutoff) {
        let nu = t.roots_mod_p(p).len() as u64;
        if nu == p {
            return SingularSeries {
                value: 0.0,
                cutoff,
                admissible: false,
            };
        }
        let pf = p as f64;
        log_sum += (1.0 - nu as f64 / pf).ln() - (k as f64) * (1.0 - 1.0 / pf).ln();
    }
    SingularSeries {
        value: log_sum.exp(),
        cutoff,
        admissible: true,
    }
}

/// All scalar parameters threading through the sieve formulas.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SieveContext {
    pub x: u64,
    /// interval length, h >= x^delta
    pub h: u64,
    #[serde(with = "rat_serde")]
    pub delta: Rat,
    #[serde(with = "rat_serde")]
    pub theta: Rat,
    #[serde(with = "rat_serde")]
    pub eps: Rat,
    #[serde(with = "rat_serde")]
    pub eps0: Rat,
    pub k: usize,
    pub d0: u64,
    pub w: u64,
    pub v0: u64,
    /// level R = x^(theta/2 - eps) unless overridden for desk-scale tables
    pub r: f64,
    #[serde(with = "rat_serde")]
    pub beta: Rat,
    #[serde(with = "rat_serde")]
    pub c1: Rat,
}

/// Builder for [`SieveContext`]; defaults follow the sieve conventions
/// (beta = 0.94, eps = eps0 = 10^-3, c1 = eps (theta/2 - eps) / 2).
pub struct ContextBuilder {
    tuple: AdmissibleTuple,
    x: u64,
    delta: Rat,
    theta: Rat,
    eps: Rat,
    eps0: Rat,
    beta: Rat,
    d0_floor: Option<u64>,
    r_override: Option<f64>,
    h_override: Option<u64>,
    c1_override: Option<Rat>,
}

impl ContextBuilder {
    pub fn new(tuple: AdmissibleTuple, x: u64, delta: Rat) -> Self {
        ContextBuilder {
            tuple,
            x,
            delta,
            theta: rat(1, 50),
            eps: rat(1, 1000),
            eps0: rat(1, 1000),
            beta: rat(94, 100),
            d0_floor: None,
            r_override: None,
            h_override: None,
            c1_override: None,
        }
    }

    pub fn theta(mut self, v: Rat) -> Self {
        self.theta = v;
        self
    }
    pub fn eps(mut self, v: Rat) -> Self {
        self.eps = v;
        self
    }
    pub fn eps0(mut self, v: Rat) -> Self {
        self.eps0 = v;
        self
    }
    pub fn beta(mut self, v: Rat) -> Self {
        self.beta = v;
        self
    }
    pub fn d0_floor(mut self, v: u64) -> Self {
        self.d0_floor = Some(v);
        self
    }
    pub fn r_override(mut self, v: f64) -> Self {
        self.r_override = Some(v);
        self
    }
    pub fn h_override(mut self, v: u64) -> Self {
        self.h_override = Some(v);
        self
    }
    pub fn c1_override(mut self, v: Rat) -> Self {
        self.c1_override = Some(v);
        self
    }

    pub fn build(self) -> Result<(SieveContext, AdmissibleTuple)> {
        let cert = is_admissible(&self.tuple);
        if !cert.admissible {
            return Err(Error::NotAdmissible(cert.covering_prime.unwrap_or(0)));
        }
        if self.delta < rat(21, 40) || self.delta > rat(1, 1) {
            return Err(Error::Config(format!(
                "delta must lie in [0.525, 1], got {}",
                self.delta
            )));
        }
        if self.beta >= rat(1, 1) {
            return Err(Error::Config("beta must be < 1".into()));
        }
        let floor = self
            .d0_floor
            .unwrap_or_else(|| default_d0_floor(&self.tuple));
        let d0 = pick_d0(&self.tuple, floor);
        let w = compute_w_u64(d0)?;
        let v0 = find_v0(&self.tuple, w)?;
        let delta_f = rat_to_f64(&self.delta);
        let h = self
            .h_override
            .unwrap_or_else(|| (self.x as f64).powf(delta_f).floor() as u64);
        if h > self.x {
            return Err(Error::Config(format!("h = {h} exceeds x = {}", self.x)));
        }
        if h < (self.x as f64).powf(delta_f).floor() as u64 {
            return Err(Error::Config(format!(
                "h = {h} below x^delta = {}",
                (self.x as f64).powf(delta_f)
            )));
        }
        let r_exp = rat_to_f64(&(&self.theta / rat(2, 1) - &self.eps));
        let r = self.r_override.unwrap_or((self.x as f64).powf(r_exp));
        if r <= 1.0 {
            return Err(Error::Config(format!("R = {r} must exceed 1")));
        }
        let c1 = self.c1_override.unwrap_or_else(|| {
            // satisfies c1 <= eps log R / log x with margin when R = x^(theta/2-eps)
            &self.eps * (&self.theta / rat(2, 1) - &self.eps) / rat(2, 1)
        });
        let ctx = SieveContext {
            x: self.x,
            h,
            delta: self.delta,
            theta: self.theta,
            eps: self.eps,
            eps0: self.eps0,
            k: self.tuple.k(),
            d0,
            w,
            v0,
            r,
            beta: self.beta,
            c1,
        };
        Ok((ctx, self.tuple))
    }
}
