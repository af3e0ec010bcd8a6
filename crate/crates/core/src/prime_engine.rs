//! Segmented prime sieving, smallest-prime-factor queries, the rough-number
//! indicator psi(n, w), and prime-pair scanning.
//!
//! Intervals follow the half-open convention (lo, hi]: lo exclusive, hi
//! inclusive. Segments are independent work units; parallel and serial
//! sieving produce bit-identical flags.

use crate::error::{Error, Result};
use rayon::prelude::*;

/// Default segment size in integers (cache-resident flag arrays).
pub const DEFAULT_SEGMENT_SIZE: u64 = 1 << 22;

/// Half-open interval (lo, hi].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub lo: u64,
    pub hi: u64,
}

impl Interval {
    pub fn new(lo: u64, hi: u64) -> Result<Self> {
        if hi > i64::MAX as u64 {
            return Err(Error::IntervalOverflow(hi));
        }
        if lo >= hi {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    /// Number of integers in (lo, hi].
    pub fn len(&self) -> u64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.lo >= self.hi
    }

    pub fn contains(&self, n: u64) -> bool {
        n > self.lo && n <= self.hi
    }
}

/// Sieve of Eratosthenes up to and including `limit`.
pub fn simple_sieve(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for p in 2..=n {
        if !composite[p] {
            primes.push(p as u64);
            let mut m = p * p;
            while m <= n {
                composite[m] = true;
                m += p;
            }
        }
    }
    primes
}

/// Primality flags for (base, base+len], packed one bit per integer.
/// Bit i corresponds to base + 1 + i.
#[derive(Debug, Clone)]
pub struct PrimeSegment {
    pub base: u64,
    pub len: u64,
    bits: Vec<u64>,
}

impl PrimeSegment {
    pub fn interval(&self) -> Interval {
        Interval {
            lo: self.base,
            hi: self.base + self.len,
        }
    }

    pub fn is_prime(&self, n: u64) -> bool {
        assert!(n > self.base && n <= self.base + self.len, "out of segment");
        let i = (n - self.base - 1) as usize;
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        let base = self.base;
        self.bits.iter().enumerate().flat_map(move |(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let b = w.trailing_zeros() as u64;
                    w &= w - 1;
                    Some(base + 1 + wi as u64 * 64 + b)
                }
            })
        })
    }
}

fn sieve_chunk(base: u64, len: u64, base_primes: &[u64]) -> Vec<u64> {
    // flags for (base, base+len], initially all prime
    let words = ((len + 63) / 64) as usize;
    let mut bits = vec![!0u64; words];
    if len % 64 != 0 {
        bits[words - 1] = (1u64 << (len % 64)) - 1;
    }
    let clear = |bits: &mut [u64], n: u64| {
        let i = (n - base - 1) as usize;
        bits[i / 64] &= !(1u64 << (i % 64));
    };
    let hi = base + len;
    for &p in base_primes {
        if p * p > hi {
            break;
        }
        // first multiple of p strictly above base, at least p*p
        let mut m = (base / p + 1) * p;
        if m < p * p {
            m = p * p;
        }
        while m <= hi {
            clear(&mut bits, m);
            m += p;
        }
    }
    // 1 is not prime
    if base == 0 {
        bits[0] &= !1u64;
    }
    // primes at or below sqrt(hi) inside the chunk survive the m >= p*p start
    bits
}

fn base_primes_for(hi: u64) -> Vec<u64> {
    simple_sieve((hi as f64).sqrt() as u64 + 2)
}

/// Chunk boundaries aligned to 64 integers so parallel results concatenate
/// into one bit vector deterministically.
fn chunks(iv: Interval, segment_size: u64) -> Vec<(u64, u64)> {
    let seg = (segment_size.max(64) / 64) * 64;
    let mut out = Vec::new();
    let mut base = iv.lo;
    while base < iv.hi {
        let len = seg.min(iv.hi - base);
        out.push((base, len));
        base += len;
    }
    out
}

/// Sieve an interval, materializing exact primality flags.
pub fn sieve_interval(iv: Interval) -> PrimeSegment {
    sieve_interval_with(iv, DEFAULT_SEGMENT_SIZE)
}

pub fn sieve_interval_with(iv: Interval, segment_size: u64) -> PrimeSegment {
    let base_primes = base_primes_for(iv.hi);
    let parts: Vec<Vec<u64>> = chunks(iv, segment_size)
        .par_iter()
        .map(|&(base, len)| sieve_chunk(base, len, &base_primes))
        .collect();
    let mut bits = Vec::with_capacity(((iv.len() + 63) / 64) as usize);
    for part in parts {
        bits.extend_from_slice(&part);
    }
    PrimeSegment {
        base: iv.lo,
        len: iv.len(),
        bits,
    }
}

/// Number of primes in (lo, hi], streaming over segments.
pub fn count_primes(iv: Interval) -> u64 {
    let base_primes = base_primes_for(iv.hi);
    chunks(iv, DEFAULT_SEGMENT_SIZE)
        .par_iter()
        .map(|&(base, len)| {
            let bits = sieve_chunk(base, len, &base_primes);
            bits.iter().map(|w| w.count_ones() as u64).sum::<u64>()
        })
        .collect::<Vec<u64>>()
        .into_iter()
        .sum()
}

/// Deterministic Miller-Rabin, valid for all n < 2^64.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let s = d.trailing_zeros();
    d >>= s;
    let mul = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        b %= n;
        while e > 0 {
            if e & 1 == 1 {
                acc = mul(acc, b);
            }
            b = mul(b, b);
            e >>= 1;
        }
        acc
    };
    'witness: for &a in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Least prime dividing n. Errors for n <= 1.
pub fn smallest_prime_factor(n: u64) -> Result<u64> {
    if n <= 1 {
        return Err(Error::Domain(format!(
            "smallest_prime_factor requires n > 1, got {n}"
        )));
    }
    for &p in &[2u64, 3, 5] {
        if n % p == 0 {
            return Ok(p);
        }
    }
    // wheel mod 6
    let mut c = 7u64;
    let mut step = 4u64;
    while c * c <= n {
        if n % c == 0 {
            return Ok(c);
        }
        c += step;
        step = 6 - step;
    }
    Ok(n)
}

/// psi(n, w) = 1 iff every prime factor of n exceeds w. psi(1, w) = 1 by
/// vacuity; the comparison P^-(n) > w is strict.
pub fn psi(n: u64, w: f64) -> bool {
    if n == 1 {
        return true;
    }
    if w < 2.0 {
        return true;
    }
    let wcap = w.floor() as u64;
    for &p in &[2u64, 3, 5] {
        if p > wcap {
            break;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut c = 7u64;
    let mut step = 4u64;
    while c <= wcap && c * c <= n {
        if n % c == 0 {
            return false;
        }
        c += step;
        step = 6 - step;
    }
    if wcap * wcap >= n {
        // no divisor <= sqrt(n), so n is prime; roughness is n > w
        (n as f64) > w
    } else {
        true
    }
}

/// All pairs of consecutive primes p < p' in iv with p' - p <= d.
pub fn scan_gap_pairs(iv: Interval, d: u64) -> Vec<(u64, u64)> {
    assert!(d >= 1);
    let seg = sieve_interval(iv);
    let mut out = Vec::new();
    let mut last: Option<u64> = None;
    for p in seg.primes() {
        if let Some(q) = last {
            if p - q <= d {
                out.push((q, p));
            }
        }
        last = Some(p);
    }
    out
}

/// Smallest-prime-factor view over an interval, capped at `b_spf`.
/// Entries with no prime factor <= min(b_spf, sqrt(hi)) hold the sentinel
/// [`FactorView::ROUGH`]; queries fall back to trial division.
pub struct FactorView {
    pub interval: Interval,
    cap: u64,
    spf: Vec<u64>,
}

impl FactorView {
    pub const ROUGH: u64 = 0;
    pub const DEFAULT_CAP: u64 = 10_000_000;

    pub fn build(iv: Interval, b_spf: u64) -> Self {
        let cap = b_spf.min((iv.hi as f64).sqrt() as u64 + 1);
        let primes = simple_sieve(cap);
        let mut spf = vec![Self::ROUGH; iv.len() as usize];
        // descending so the smallest prime lands last
        for &p in primes.iter().rev() {
            let mut m = (iv.lo / p + 1) * p;
            while m <= iv.hi {
                spf[(m - iv.lo - 1) as usize] = p;
                m += p;
            }
        }
        FactorView {
            interval: iv,
            cap: b_spf,
            spf,
        }
    }

    /// P^-(n) for n in the view's interval.
    pub fn spf(&self, n: u64) -> Result<u64> {
        if !self.interval.contains(n) {
            return Err(Error::Domain(format!("{n} outside factor view interval")));
        }
        if n <= 1 {
            return Err(Error::Domain("spf requires n > 1".into()));
        }
        match self.spf[(n - self.interval.lo - 1) as usize] {
            Self::ROUGH => smallest_prime_factor(n),
            p => Ok(p),
        }
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }
}

/// Full factorizations (ascending, with multiplicity) for every n in iv.
/// Intended for desk-scale samples: length <= 10^6, positioned <= 10^12.
pub fn factor_interval(iv: Interval) -> Vec<Vec<u64>> {
    let primes = base_primes_for(iv.hi);
    let len = iv.len() as usize;
    let mut rem: Vec<u64> = (0..len).map(|i| iv.lo + 1 + i as u64).collect();
    let mut factors: Vec<Vec<u64>> = vec![Vec::new(); len];
    for &p in &primes {
        if p * p > iv.hi {
            break;
        }
        let mut m = (iv.lo / p + 1) * p;
        while m <= iv.hi {
            let i = (m - iv.lo - 1) as usize;
            while rem[i] % p == 0 {
                rem[i] /= p;
                factors[i].push(p);
            }
            m += p;
        }
    }
    for i in 0..len {
        if rem[i] > 1 {
            factors[i].push(rem[i]);
        }
    }
    factors
}
