//! Sieve weight tables: the y_r values sampled from a simplex polynomial,
//! the lambda_d coefficients obtained from them by the Moebius/totient sum,
//! and the resulting nonnegative weight w(n).
//!
//! Support vectors r = (r_1, ..., r_k) have squarefree pairwise-coprime
//! components, each coprime to W, with product below R. Real arithmetic is
//! generic over [`Real`] and defaults to double-double, since the table
//! values come from logs of integers and feed into cancelling sums.

use crate::error::{Error, Result};
use crate::scalar::{Ext, Real};
use crate::tuples::AdmissibleTuple;
use crate::tuples::SieveContext;
use crate::variational::SimplexPoly;
use std::collections::BTreeMap;
use std::io::{Read as _, Write as _};
use std::path::Path;

/// Hard cap on R for full-table construction.
pub const R_CAP: f64 = 1.0e4;
/// Hard cap on the number of support vectors.
pub const SUPPORT_CAP: u64 = 2_000_000;

/// Squarefree integers in [1, limit) coprime to w, with their prime factors.
fn squarefree_coprime(limit: f64, w: u64) -> Vec<(u64, Vec<u64>)> {
    let mut out = Vec::new();
    let top = limit.ceil() as u64;
    'outer: for m in 1..top {
        if (m as f64) >= limit {
            break;
        }
        if num_integer::gcd(m, w) != 1 {
            continue;
        }
        let mut rest = m;
        let mut factors = Vec::new();
        let mut p = 2u64;
        while p * p <= rest {
            if rest % p == 0 {
                rest /= p;
                if rest % p == 0 {
                    continue 'outer;
                }
                factors.push(p);
            } else {
                p += 1;
            }
        }
        if rest > 1 {
            factors.push(rest);
        }
        out.push((m, factors));
    }
    out
}

/// Enumerate support vectors depth-first, pruning branches whose running
/// product already reaches R and skipping components sharing a prime.
fn enumerate_support(k: usize, w: u64, r: f64) -> Result<Vec<Vec<u64>>> {
    if r > R_CAP {
        return Err(Error::SupportTooLarge {
            estimate: r as u64,
            cap: R_CAP as u64,
        });
    }
    let candidates = squarefree_coprime(r, w);
    let mut out: Vec<Vec<u64>> = Vec::new();
    let mut cur: Vec<u64> = Vec::with_capacity(k);
    let mut used: Vec<u64> = Vec::new();
    fn rec(
        k: usize,
        r: f64,
        candidates: &[(u64, Vec<u64>)],
        cur: &mut Vec<u64>,
        used: &mut Vec<u64>,
        prod: u64,
        out: &mut Vec<Vec<u64>>,
    ) -> Result<()> {
        if cur.len() == k {
            if out.len() as u64 >= SUPPORT_CAP {
                return Err(Error::SupportTooLarge {
                    estimate: out.len() as u64 + 1,
                    cap: SUPPORT_CAP,
                });
            }
            out.push(cur.clone());
            return Ok(());
        }
        'cand: for (m, factors) in candidates {
            let next = prod.checked_mul(*m).unwrap_or(u64::MAX);
            if (next as f64) >= r {
                continue;
            }
            for p in factors {
                if used.contains(p) {
                    continue 'cand;
                }
            }
            cur.push(*m);
            used.extend_from_slice(factors);
            rec(k, r, candidates, cur, used, next, out)?;
            cur.pop();
            used.truncate(used.len() - factors.len());
        }
        Ok(())
    }
    rec(k, r, &candidates, &mut cur, &mut used, 1, &mut out)?;
    Ok(out)
}

fn euler_phi_squarefree(mut n: u64) -> u64 {
    let mut phi = 1u64;
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            phi *= p - 1;
        } else {
            p += 1;
        }
    }
    if n > 1 {
        phi *= n - 1;
    }
    phi
}

fn moebius_squarefree(mut n: u64) -> i64 {
    let mut omega = 0u32;
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            omega += 1;
        } else {
            p += 1;
        }
    }
    if n > 1 {
        omega += 1;
    }
    if omega % 2 == 0 {
        1
    } else {
        -1
    }
}

fn divisors_squarefree(n: u64) -> Vec<u64> {
    let mut divs = vec![1u64];
    let mut rest = n;
    let mut p = 2u64;
    while p * p <= rest {
        if rest % p == 0 {
            rest /= p;
            let prev = divs.clone();
            divs.extend(prev.into_iter().map(|d| d * p));
        } else {
            p += 1;
        }
    }
    if rest > 1 {
        let prev = divs.clone();
        divs.extend(prev.into_iter().map(|d| d * rest));
    }
    divs.sort_unstable();
    divs
}

/// Table of y_r values over the support vectors.
#[derive(Debug, Clone)]
pub struct YTable<S: Real = Ext> {
    pub k: usize,
    pub w: u64,
    pub r: f64,
    pub entries: BTreeMap<Vec<u64>, S>,
}

impl<S: Real> YTable<S> {
    pub fn get(&self, r: &[u64]) -> S {
        self.entries.get(r).copied().unwrap_or_else(S::zero)
    }

    pub fn y_max(&self) -> S {
        self.entries
            .values()
            .fold(S::zero(), |m, v| if v.abs() > m { v.abs() } else { m })
    }
}

/// Sample F at (log r_1/log R, ..., log r_k/log R) over the whole support.
pub fn build_y<S: Real>(f: &SimplexPoly, ctx: &SieveContext) -> Result<YTable<S>> {
    build_y_raw(f, ctx.k, ctx.w, ctx.r)
}

/// Same as [`build_y`] with explicit parameters (small hand-built tables).
pub fn build_y_raw<S: Real>(f: &SimplexPoly, k: usize, w: u64, r: f64) -> Result<YTable<S>> {
    if r <= 1.0 {
        return Err(Error::Domain(format!("level R = {r} must exceed 1")));
    }
    if f.k() != k {
        return Err(Error::Domain(format!(
            "simplex polynomial arity {} does not match k = {k}",
            f.k()
        )));
    }
    let log_r = S::from_f64_exact(r).ln_r();
    let support = enumerate_support(k, w, r)?;
    let mut entries = BTreeMap::new();
    for vec in support {
        let t: Vec<S> = vec
            .iter()
            .map(|&ri| S::from_u64(ri).unwrap().ln_r() / log_r)
            .collect();
        entries.insert(vec, f.eval(&t));
    }
    Ok(YTable { k, w, r, entries })
}

/// Table of lambda_d coefficients; same support shape as the y table.
#[derive(Debug, Clone)]
pub struct WeightTable<S: Real = Ext> {
    pub k: usize,
    pub w: u64,
    pub r: f64,
    pub entries: BTreeMap<Vec<u64>, S>,
}

impl<S: Real> WeightTable<S> {
    pub fn get(&self, d: &[u64]) -> S {
        self.entries.get(d).copied().unwrap_or_else(S::zero)
    }

    pub fn lambda_max(&self) -> S {
        self.entries
            .values()
            .fold(S::zero(), |m, v| if v.abs() > m { v.abs() } else { m })
    }

    /// Informational bound pair (lambda_max, y_max (log R)^k) for logging;
    /// the first should stay within a k-dependent constant of the second.
    pub fn lambda_max_report(&self, y: &YTable<S>) -> (f64, f64) {
        let lr = self.r.ln();
        (
            self.lambda_max().to_f64_lossy(),
            y.y_max().to_f64_lossy() * lr.powi(self.k as i32),
        )
    }
}

/// lambda_d = (prod mu(d_i) d_i) sum over support vectors r with d_i | r_i
/// of y_r / prod phi(r_i). Accumulated by walking the y support once and
/// scattering each entry onto its divisor vectors.
pub fn build_lambda<S: Real>(y: &YTable<S>) -> WeightTable<S> {
    let mut entries: BTreeMap<Vec<u64>, S> = BTreeMap::new();
    for (rvec, &yr) in &y.entries {
        if yr.is_zero() {
            continue;
        }
        let mut phi_prod = 1u64;
        for &ri in rvec {
            phi_prod *= euler_phi_squarefree(ri);
        }
        let contrib = yr / S::from_u64(phi_prod).unwrap();
        let divisor_lists: Vec<Vec<u64>> =
            rvec.iter().map(|&ri| divisors_squarefree(ri)).collect();
        let mut d = vec![0u64; y.k];
        scatter(&divisor_lists, 0, &mut d, contrib, &mut entries);
    }
    for (d, v) in entries.iter_mut() {
        let mut sign = 1i64;
        let mut prod = 1u64;
        for &di in d {
            sign *= moebius_squarefree(di);
            prod *= di;
        }
        let factor = S::from_u64(prod).unwrap();
        *v = if sign < 0 { -*v * factor } else { *v * factor };
    }
    entries.retain(|_, v| !v.is_zero());
    WeightTable {
        k: y.k,
        w: y.w,
        r: y.r,
        entries,
    }
}

fn scatter<S: Real>(
    lists: &[Vec<u64>],
    idx: usize,
    d: &mut Vec<u64>,
    contrib: S,
    out: &mut BTreeMap<Vec<u64>, S>,
) {
    if idx == lists.len() {
        let slot = out.entry(d.clone()).or_insert_with(S::zero);
        *slot = *slot + contrib;
        return;
    }
    for &div in &lists[idx] {
        d[idx] = div;
        scatter(lists, idx + 1, d, contrib, out);
    }
}

/// Recover y_r from a lambda table by Moebius inversion:
/// y_r = (prod mu(r_i) phi(r_i)) sum over d with r_i | d_i of
/// lambda_d / prod d_i. Used as the round-trip consistency check.
pub fn invert_lambda<S: Real>(lam: &WeightTable<S>) -> YTable<S> {
    let mut entries: BTreeMap<Vec<u64>, S> = BTreeMap::new();
    for rvec in lam.entries.keys() {
        let mut acc = S::zero();
        for (dvec, &ld) in &lam.entries {
            if rvec.iter().zip(dvec).all(|(&ri, &di)| di % ri == 0) {
                let prod: u64 = dvec.iter().product();
                acc = acc + ld / S::from_u64(prod).unwrap();
            }
        }
        let mut sign = 1i64;
        let mut phi = 1u64;
        for &ri in rvec {
            sign *= moebius_squarefree(ri);
            phi *= euler_phi_squarefree(ri);
        }
        let factor = S::from_u64(phi).unwrap();
        let v = if sign < 0 { -acc * factor } else { acc * factor };
        entries.insert(rvec.clone(), v);
    }
    YTable {
        k: lam.k,
        w: lam.w,
        r: lam.r,
        entries,
    }
}

/// w(n) = (sum of lambda_d over d with d_i | L_i(n) for every i)^2.
pub fn weight<S: Real>(n: u64, t: &AdmissibleTuple, lam: &WeightTable<S>) -> S {
    debug_assert_eq!(t.k(), lam.k);
    let values: Vec<i128> = t.forms().iter().map(|f| f.eval(n)).collect();
    let mut acc = S::zero();
    'entry: for (d, &ld) in &lam.entries {
        for (&di, &li) in d.iter().zip(&values) {
            if di > 1 && li.rem_euclid(di as i128) != 0 {
                continue 'entry;
            }
        }
        acc = acc + ld;
    }
    acc * acc
}

const TABLE_MAGIC: &[u8; 8] = b"LAMTBL01";

/// Serialize a lambda table: header (k, W, R, record count) followed by
/// sorted (d-vector, 8-byte float) records, little endian throughout.
pub fn write_table<S: Real>(lam: &WeightTable<S>, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(32 + lam.entries.len() * (8 * lam.k + 8));
    out.extend_from_slice(TABLE_MAGIC);
    out.extend_from_slice(&(lam.k as u64).to_le_bytes());
    out.extend_from_slice(&lam.w.to_le_bytes());
    out.extend_from_slice(&lam.r.to_le_bytes());
    out.extend_from_slice(&(lam.entries.len() as u64).to_le_bytes());
    for (d, v) in &lam.entries {
        for &di in d {
            out.extend_from_slice(&di.to_le_bytes());
        }
        out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

pub fn read_table<S: Real>(path: &Path) -> Result<WeightTable<S>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    let bad = |msg: &str| Error::Config(format!("weight table {}: {msg}", path.display()));
    if buf.len() < 40 || &buf[..8] != TABLE_MAGIC {
        return Err(bad("missing or unknown header"));
    }
    let u64_at = |off: usize| u64::from_le_bytes(buf[off..off + 8].try_into().unwrap());
    let k = u64_at(8) as usize;
    let w = u64_at(16);
    let r = f64::from_le_bytes(buf[24..32].try_into().unwrap());
    let n = u64_at(32) as usize;
    let rec = 8 * k + 8;
    if buf.len() != 40 + n * rec {
        return Err(bad("truncated records"));
    }
    let mut entries = BTreeMap::new();
    for i in 0..n {
        let base = 40 + i * rec;
        let d: Vec<u64> = (0..k).map(|j| u64_at(base + 8 * j)).collect();
        let v = f64::from_le_bytes(buf[base + 8 * k..base + rec].try_into().unwrap());
        entries.insert(d, S::from_f64_exact(v));
    }
    Ok(WeightTable { k, w, r, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;
    use crate::variational::SimplexPoly;

    fn const_f(k: usize, c: i64) -> SimplexPoly {
        SimplexPoly::constant(k, rat(c, 1))
    }

    #[test]
    fn support_enumeration() {
        let s = enumerate_support(1, 6, 8.0).unwrap();
        assert_eq!(s, vec![vec![1], vec![5], vec![7]]);
        let s = enumerate_support(2, 6, 8.0).unwrap();
        assert_eq!(
            s,
            vec![vec![1, 1], vec![1, 5], vec![1, 7], vec![5, 1], vec![7, 1]]
        );
        // shared prime between components is rejected
        let s = enumerate_support(2, 2, 10.0).unwrap();
        assert!(!s.contains(&vec![3, 3]));
        assert!(s.contains(&vec![3, 1]));
        assert!(enumerate_support(1, 2, 1.0e6).is_err());
    }

    #[test]
    fn y_examples() {
        // constant F gives 1 on every support vector; origin gives F(0,...,0)
        let y: YTable = build_y_raw(&const_f(2, 1), 2, 6, 8.0).unwrap();
        assert_eq!(y.get(&[1, 1]).to_f64_lossy(), 1.0);
        assert_eq!(y.get(&[5, 1]).to_f64_lossy(), 1.0);
        assert_eq!(y.get(&[3, 1]).to_f64_lossy(), 0.0);
        // F = t, R = 100, r = 10: log 10 / log 100 = 1/2 (W = 1 keeps 10)
        let f = SimplexPoly::monomial(1, vec![1], rat(1, 1));
        let y: YTable = build_y_raw(&f, 1, 1, 100.0).unwrap();
        assert!((y.get(&[10]).to_f64_lossy() - 0.5).abs() < 1e-15);
        assert_eq!(y.get(&[1]).to_f64_lossy(), 0.0);
    }

    /// Independent oracle: lambda_d from the definition by direct loops.
    fn lambda_oracle_k1(y: &YTable, d: u64) -> f64 {
        let mut acc = 0.0;
        for (r, yr) in &y.entries {
            if r[0] % d == 0 {
                acc += yr.to_f64_lossy() / euler_phi_squarefree(r[0]) as f64;
            }
        }
        moebius_squarefree(d) as f64 * d as f64 * acc
    }

    #[test]
    fn lambda_small_case() {
        // W = 6, R = 8: support {1, 5, 7}
        let y: YTable = build_y_raw(&const_f(1, 1), 1, 6, 8.0).unwrap();
        let lam = build_lambda(&y);
        assert!((lam.get(&[7]).to_f64_lossy() + 7.0 / 6.0).abs() < 1e-12);
        assert!((lam.get(&[5]).to_f64_lossy() + 5.0 / 4.0).abs() < 1e-12);
        // 1 + 1/4 + 1/6 over the full support
        assert!((lam.get(&[1]).to_f64_lossy() - 17.0 / 12.0).abs() < 1e-12);
        for d in [1u64, 5, 7] {
            assert!(
                (lam.get(&[d]).to_f64_lossy() - lambda_oracle_k1(&y, d)).abs() < 1e-12,
                "oracle mismatch at d = {d}"
            );
        }
    }

    #[test]
    fn lambda_support_excluding_five() {
        // W = 30 removes 5 from the support, leaving {1, 7}
        let y: YTable = build_y_raw(&const_f(1, 1), 1, 30, 8.0).unwrap();
        let lam = build_lambda(&y);
        assert!((lam.get(&[1]).to_f64_lossy() - 7.0 / 6.0).abs() < 1e-12);
        assert!((lam.get(&[7]).to_f64_lossy() + 7.0 / 6.0).abs() < 1e-12);
        assert_eq!(lam.get(&[5]).to_f64_lossy(), 0.0);
        // n = 7: divisor-restricted sum lambda_1 + lambda_7 cancels exactly
        let t = AdmissibleTuple::from_offsets(&[0]).unwrap();
        let w7: Ext = weight(7, &t, &lam);
        assert!(w7.to_f64_lossy().abs() < 1e-24);
    }

    #[test]
    fn zero_f_gives_zero_table() {
        let y: YTable = build_y_raw(&const_f(1, 0), 1, 6, 8.0).unwrap();
        let lam = build_lambda(&y);
        assert!(lam.entries.is_empty());
    }

    #[test]
    fn weight_nonnegative_and_coprime_case() {
        let y: YTable = build_y_raw(&const_f(2, 1), 2, 6, 20.0).unwrap();
        let lam = build_lambda(&y);
        let t = AdmissibleTuple::from_offsets(&[0, 2]).unwrap();
        for n in 1..400u64 {
            let w: Ext = weight(n, &t, &lam);
            assert!(w.to_f64_lossy() >= 0.0);
        }
        // n = 6k + 5: L(n) in {6k+5, 6k+7}; pick n with both coprime to all
        // support entries > 1 so only the all-ones vector survives
        let l1 = lam.get(&[1, 1]);
        let n = 29u64; // 29 and 31 prime, above R = 20
        let w: Ext = weight(n, &t, &lam);
        let diff = (w - l1 * l1).to_f64_lossy().abs();
        assert!(diff < 1e-20, "w({n}) should equal lambda_(1,1)^2");
    }

    #[test]
    fn weight_matches_divisor_loop_oracle() {
        let y: YTable = build_y_raw(&const_f(2, 1), 2, 6, 25.0).unwrap();
        let lam = build_lambda(&y);
        let t = AdmissibleTuple::from_offsets(&[0, 4]).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.random_range(999_000..1_001_000u64);
            let fast: Ext = weight(n, &t, &lam);
            // brute force: loop over the full table with i128 divisibility
            let mut acc = 0.0f64;
            for (d, v) in &lam.entries {
                let ok = t
                    .forms()
                    .iter()
                    .zip(d)
                    .all(|(f, &di)| f.eval(n).rem_euclid(di as i128) == 0);
                if ok {
                    acc += v.to_f64_lossy();
                }
            }
            assert!((fast.to_f64_lossy() - acc * acc).abs() < 1e-9);
        }
    }

    #[test]
    fn support_invariant_on_table() {
        let y: YTable = build_y_raw(&const_f(2, 1), 2, 6, 30.0).unwrap();
        let lam = build_lambda(&y);
        for d in lam.entries.keys() {
            let prod: u64 = d.iter().product();
            assert!((prod as f64) < lam.r);
            assert_eq!(num_integer::gcd(prod, lam.w), 1);
            // squarefree product
            let mut m = prod;
            let mut p = 2u64;
            while p * p <= m {
                if m % p == 0 {
                    m /= p;
                    assert_ne!(m % p, 0, "product not squarefree: {prod}");
                }
                p += 1;
            }
        }
        let (lmax, bound_core) = lam.lambda_max_report(&y);
        assert!(lmax.is_finite() && bound_core.is_finite());
    }

    #[test]
    fn moebius_inversion_round_trip() {
        for (k, w, r) in [(1usize, 2u64, 100.0f64), (2, 6, 40.0)] {
            let f = if k == 1 {
                SimplexPoly::monomial(1, vec![1], rat(1, 1))
                    .add(&SimplexPoly::constant(1, rat(1, 2)))
            } else {
                const_f(2, 1).add(&SimplexPoly::monomial(2, vec![1, 1], rat(-1, 3)))
            };
            let y: YTable = build_y_raw(&f, k, w, r).unwrap();
            let lam = build_lambda(&y);
            let y2 = invert_lambda(&lam);
            for (rvec, v) in &y.entries {
                let back = y2.get(rvec).to_f64_lossy();
                let orig = v.to_f64_lossy();
                let tol = 1e-9 * orig.abs().max(1.0);
                assert!(
                    (back - orig).abs() < tol,
                    "round trip failed at {rvec:?}: {back} vs {orig}"
                );
            }
        }
    }

    #[test]
    fn binary_round_trip() {
        let y: YTable = build_y_raw(&const_f(2, 1), 2, 6, 20.0).unwrap();
        let lam = build_lambda(&y);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lambda.bin");
        write_table(&lam, &path).unwrap();
        let back: WeightTable = read_table(&path).unwrap();
        assert_eq!(back.k, lam.k);
        assert_eq!(back.w, lam.w);
        assert_eq!(back.r, lam.r);
        assert_eq!(back.entries.len(), lam.entries.len());
        for (d, v) in &lam.entries {
            let b = back.get(d).to_f64_lossy();
            assert_eq!(b, v.to_f64_lossy());
        }
        assert!(read_table::<Ext>(&dir.path().join("missing.bin")).is_err());
    }
}
