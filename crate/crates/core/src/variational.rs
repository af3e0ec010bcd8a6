//! Exact simplex integration, the I_k and J_k^(m) functionals, and the M_k
//! maximization as a generalized symmetric eigenproblem.
//!
//! Polynomials live on the simplex {t_i >= 0, sum t_i <= 1} and vanish
//! outside. Two integration routes exist: termwise monomial expansion for
//! explicit small-k polynomials, and partition-based closed forms for the
//! symmetric basis (1 - P1)^a P2^b that stay cheap at k = 1000. The
//! eigenproblem is solved in floating point, then the Rayleigh quotient is
//! re-evaluated in exact rationals at the rounded eigenvector, so the
//! reported M_k lower bound is certified by a concrete witness.

use crate::error::{Error, Result};
use crate::scalar::{rat, rat_to_f64, Ext, Rat, Real};
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::BTreeMap;

/// Polynomial on the k-simplex, exact rational coefficients per monomial.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoly {
    k: usize,
    terms: BTreeMap<Vec<u32>, Rat>,
}

impl SimplexPoly {
    pub fn zero(k: usize) -> Self {
        SimplexPoly {
            k,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(k: usize, c: Rat) -> Self {
        let mut p = SimplexPoly::zero(k);
        if !c.is_zero() {
            p.terms.insert(vec![0; k], c);
        }
        p
    }

    pub fn monomial(k: usize, exps: Vec<u32>, c: Rat) -> Self {
        assert_eq!(exps.len(), k);
        let mut p = SimplexPoly::zero(k);
        if !c.is_zero() {
            p.terms.insert(exps, c);
        }
        p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Rat)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &SimplexPoly) -> SimplexPoly {
        assert_eq!(self.k, other.k);
        let mut terms = self.terms.clone();
        for (e, c) in &other.terms {
            let entry = terms.entry(e.clone()).or_insert_with(Rat::zero);
            *entry += c;
            if entry.is_zero() {
                terms.remove(e);
            }
        }
        SimplexPoly { k: self.k, terms }
    }

    pub fn scale(&self, c: &Rat) -> SimplexPoly {
        if c.is_zero() {
            return SimplexPoly::zero(self.k);
        }
        SimplexPoly {
            k: self.k,
            terms: self.terms.iter().map(|(e, v)| (e.clone(), v * c)).collect(),
        }
    }

    pub fn mul(&self, other: &SimplexPoly) -> SimplexPoly {
        assert_eq!(self.k, other.k);
        let mut terms: BTreeMap<Vec<u32>, Rat> = BTreeMap::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                let entry = terms.entry(e).or_insert_with(Rat::zero);
                *entry += c1 * c2;
            }
        }
        terms.retain(|_, c| !c.is_zero());
        SimplexPoly { k: self.k, terms }
    }

    /// Evaluate at a point; zero outside the closed simplex.
    pub fn eval<S: Real>(&self, t: &[S]) -> S {
        assert_eq!(t.len(), self.k);
        let mut sum = S::zero();
        for &ti in t {
            if ti < S::zero() {
                return S::zero();
            }
            sum = sum + ti;
        }
        if sum > S::one() {
            return S::zero();
        }
        let mut acc = S::zero();
        for (e, c) in &self.terms {
            let mut m = S::from_f64_exact(rat_to_f64(c));
            for (ti, &ei) in t.iter().zip(e) {
                if ei > 0 {
                    m = m * ti.powi(ei as i32);
                }
            }
            acc = acc + m;
        }
        acc
    }
}

fn factorial(n: u64) -> BigInt {
    let mut f = BigInt::one();
    for i in 2..=n {
        f *= i;
    }
    f
}

/// Exact integral of prod t_i^{e_i} over the k-simplex:
/// prod e_i! / (k + sum e_i)!.
pub fn simplex_monomial_integral(exps: &[u32]) -> Rat {
    let k = exps.len() as u64;
    let total: u64 = exps.iter().map(|&e| e as u64).sum();
    let mut num = BigInt::one();
    for &e in exps {
        num *= factorial(e as u64);
    }
    Rat::new(num, factorial(k + total))
}

/// Integral of (1 - sum t_i)^a prod t_i^{e_i} over the k-simplex.
fn simplex_monomial_integral_with_slack(a: u32, exps: &[u32]) -> Rat {
    let k = exps.len() as u64;
    let total: u64 = exps.iter().map(|&e| e as u64).sum();
    let mut num = factorial(a as u64);
    for &e in exps {
        num *= factorial(e as u64);
    }
    Rat::new(num, factorial(k + a as u64 + total))
}

/// I_k(F) = integral of F^2 over the simplex, exact.
pub fn i_k(f: &SimplexPoly) -> Rat {
    let sq = f.mul(f);
    let mut acc = Rat::zero();
    for (e, c) in sq.terms() {
        acc += c * simplex_monomial_integral(e);
    }
    acc
}

/// J_k^(m)(F): square the inner integral over t_m (from 0 to the simplex
/// ceiling 1 - sum of the others), then integrate the rest. Exact.
pub fn j_k_m(f: &SimplexPoly, m: usize) -> Rat {
    let k = f.k();
    assert!(m >= 1 && m <= k, "m must be in 1..=k");
    let mi = m - 1;
    // inner integral: each monomial contributes
    //   c/(e_m + 1) * u^{e_m + 1} * prod_{i != m} t_i^{e_i},  u = 1 - sum_{i != m} t_i
    // square and integrate over the (k-1)-simplex with slack powers of u
    let inner: Vec<(u32, Vec<u32>, Rat)> = f
        .terms()
        .map(|(e, c)| {
            let em = e[mi];
            let rest: Vec<u32> = e
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != mi)
                .map(|(_, &x)| x)
                .collect();
            (em + 1, rest, c / rat((em + 1) as i64, 1))
        })
        .collect();
    let mut acc = Rat::zero();
    for (u1, rest1, c1) in &inner {
        for (u2, rest2, c2) in &inner {
            let slack = u1 + u2;
            let exps: Vec<u32> = rest1.iter().zip(rest2).map(|(a, b)| a + b).collect();
            acc += c1 * c2 * simplex_monomial_integral_with_slack(slack, &exps);
        }
    }
    acc
}

/// Sum over m of J_k^(m).
pub fn j_k_total(f: &SimplexPoly) -> Rat {
    (1..=f.k()).map(|m| j_k_m(f, m)).sum()
}

// ---------------------------------------------------------------------------
// Symmetric basis (1 - P1)^a P2^b and its closed-form Gram matrices
// ---------------------------------------------------------------------------

/// Basis element exponents: (1 - P1)^a * P2^b with P1 = sum t_i,
/// P2 = sum t_i^2.
pub type BasisElem = (u32, u32);

/// All (a, b) with a + 2b <= degree, in lexicographic order.
pub fn symmetric_basis(degree: u32) -> Vec<BasisElem> {
    let mut out = Vec::new();
    for a in 0..=degree {
        for b in 0..=(degree - a) / 2 {
            out.push((a, b));
        }
    }
    out
}

/// Expand a symmetric basis element as an explicit polynomial (small k only).
pub fn expand_basis_elem(k: usize, a: u32, b: u32) -> SimplexPoly {
    let mut p1 = SimplexPoly::constant(k, rat(1, 1));
    for i in 0..k {
        let mut e = vec![0u32; k];
        e[i] = 1;
        p1 = p1.add(&SimplexPoly::monomial(k, e, rat(-1, 1)));
    }
    let mut p2 = SimplexPoly::zero(k);
    for i in 0..k {
        let mut e = vec![0u32; k];
        e[i] = 2;
        p2 = p2.add(&SimplexPoly::monomial(k, e, rat(1, 1)));
    }
    let mut f = SimplexPoly::constant(k, rat(1, 1));
    for _ in 0..a {
        f = f.mul(&p1);
    }
    for _ in 0..b {
        f = f.mul(&p2);
    }
    f
}

/// Linear combination of symmetric basis elements as an explicit polynomial.
pub fn basis_combination(k: usize, basis: &[BasisElem], coeffs: &[Rat]) -> SimplexPoly {
    let mut f = SimplexPoly::zero(k);
    for ((a, b), c) in basis.iter().zip(coeffs) {
        f = f.add(&expand_basis_elem(k, *a, *b).scale(c));
    }
    f
}

fn partitions_of(n: u32) -> Vec<Vec<u32>> {
    fn rec(n: u32, max: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if n == 0 {
            out.push(cur.clone());
            return;
        }
        for part in (1..=max.min(n)).rev() {
            cur.push(part);
            rec(n - part, part, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, n.max(1), &mut Vec::new(), &mut out);
    out
}

/// Numerator of the closed-form integral of (1 - P1)^a P2^b over the
/// k-simplex; the full value is this over (k + a + 2b)!.
///
/// Expanding P2^b over partitions lambda of b assigns squared exponents
/// 2*lambda_j to distinct variables; each assignment integrates to
/// a! prod (2 lambda_j)! / (k + a + 2b)!.
fn sym_integral_numerator(a: u32, b: u32, k: u64) -> BigInt {
    let mut total = BigInt::zero();
    for lam in partitions_of(b) {
        let r = lam.len() as u64;
        if r > k {
            continue;
        }
        // multinomial b! / prod lambda_j!
        let mut term = factorial(b as u64);
        for &l in &lam {
            term /= factorial(l as u64);
        }
        // ordered choices of r distinct variables, deduped over equal parts
        for i in 0..r {
            term *= k - i;
        }
        let mut mult_count: BTreeMap<u32, u64> = BTreeMap::new();
        for &l in &lam {
            *mult_count.entry(l).or_insert(0) += 1;
        }
        for (_, m) in mult_count {
            term /= factorial(m);
        }
        term *= factorial(a as u64);
        for &l in &lam {
            term *= factorial(2 * l as u64);
        }
        total += term;
    }
    total
}

/// Integral of (1 - P1)^a P2^b over the k-simplex, exact.
pub fn sym_integral(a: u32, b: u32, k: u64) -> Rat {
    Rat::new(
        sym_integral_numerator(a, b, k),
        factorial(k + a as u64 + 2 * b as u64),
    )
}

/// Gram matrices of the symmetric basis, scaled by the common factor
/// (k + 2 degree + 1)! so entries convert to f64 without underflow.
/// The scale cancels in every Rayleigh quotient.
pub struct SymGram {
    pub k: u64,
    pub degree: u32,
    pub basis: Vec<BasisElem>,
    pub i_gram: Vec<Vec<Rat>>,
    pub j_gram: Vec<Vec<Rat>>,
}

pub fn build_gram(k: u64, degree: u32) -> SymGram {
    let basis = symmetric_basis(degree);
    let n = basis.len();
    let dmax = k + 2 * degree as u64 + 1;
    let scale_fact = factorial(dmax);
    // ratio (dmax)! / m! as BigInt
    let fact_ratio = |m: u64| -> BigInt {
        let mut r = BigInt::one();
        for i in m + 1..=dmax {
            r *= i;
        }
        r
    };
    let mut i_gram = vec![vec![Rat::zero(); n]; n];
    let mut j_gram = vec![vec![Rat::zero(); n]; n];
    // inner-integral coefficients: int_0^u (u-t)^a t^{2j} dt
    //   = a!(2j)!/(a+2j+1)! u^{a+2j+1}
    let c_inner = |a: u32, j: u32| -> Rat {
        Rat::new(
            factorial(a as u64) * factorial(2 * j as u64),
            factorial(a as u64 + 2 * j as u64 + 1),
        )
    };
    let binom = |n_: u32, r_: u32| -> BigInt {
        factorial(n_ as u64) / (factorial(r_ as u64) * factorial((n_ - r_) as u64))
    };
    for (i, &(a1, b1)) in basis.iter().enumerate() {
        for (j, &(a2, b2)) in basis.iter().enumerate() {
            if j < i {
                i_gram[i][j] = i_gram[j][i].clone();
                j_gram[i][j] = j_gram[j][i].clone();
                continue;
            }
            let a = (a1 + a2) as u64;
            let b = (b1 + b2) as u64;
            i_gram[i][j] = Rat::from(
                sym_integral_numerator(a1 + a2, b1 + b2, k) * fact_ratio(k + a + 2 * b),
            );
            // J entry: square of the inner t_k-integral, integrated over the
            // (k-1)-simplex; k-fold by symmetry over m
            let mut acc = Rat::zero();
            for j1 in 0..=b1 {
                for j2 in 0..=b2 {
                    let aa = (a1 + a2 + 2 * j1 + 2 * j2 + 2) as u64;
                    let bb = b1 - j1 + b2 - j2;
                    let numer = sym_integral_numerator(aa as u32, bb, k - 1);
                    let g = Rat::from(numer * fact_ratio(k - 1 + aa + 2 * bb as u64));
                    acc += Rat::from(binom(b1, j1) * binom(b2, j2))
                        * c_inner(a1, j1)
                        * c_inner(a2, j2)
                        * g;
                }
            }
            j_gram[i][j] = Rat::from(BigInt::from(k)) * acc;
        }
    }
    let _ = scale_fact;
    SymGram {
        k,
        degree,
        basis,
        i_gram,
        j_gram,
    }
}

/// Exact Rayleigh quotient (sum_m J_k^(m)) / I_k at a rational coefficient
/// vector in the symmetric basis.
pub fn rayleigh_quotient(gram: &SymGram, coeffs: &[Rat]) -> Option<Rat> {
    let n = gram.basis.len();
    assert_eq!(coeffs.len(), n);
    let mut num = Rat::zero();
    let mut den = Rat::zero();
    for i in 0..n {
        for j in 0..n {
            let cij = &coeffs[i] * &coeffs[j];
            num += &cij * &gram.j_gram[i][j];
            den += &cij * &gram.i_gram[i][j];
        }
    }
    if den.is_zero() {
        None
    } else {
        Some(num / den)
    }
}

/// Result of the M_k lower-bound optimization.
#[derive(Debug, Clone)]
pub struct VariationalResult {
    pub k: u64,
    pub degree: u32,
    pub basis: Vec<BasisElem>,
    /// float view of the certified quotient
    pub mk_lower: f64,
    /// exact Rayleigh quotient at the witness coefficients
    pub certified: Rat,
    /// witness coefficients (rationalized eigenvector)
    pub coefficients: Vec<Rat>,
    pub i_value: f64,
    pub j_values: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Maximize the Rayleigh quotient over the degree-bounded symmetric basis by
/// solving the generalized eigenproblem J c = lambda I c, then certify the
/// reported bound exactly at the rounded eigenvector.
pub fn optimize_mk(k: u64, degree: u32) -> Result<VariationalResult> {
    if k < 1 {
        return Err(Error::Domain("k must be >= 1".into()));
    }
    let gram = build_gram(k, degree);
    let mut active: Vec<usize> = (0..gram.basis.len()).collect();
    let mut warnings = Vec::new();
    loop {
        if active.is_empty() {
            return Err(Error::NumericCheck(
                "I-Gram matrix singular for every basis subset".into(),
            ));
        }
        match try_solve(&gram, &active) {
            Some((quotient, coeffs_active)) => {
                let mut coeffs = vec![Rat::zero(); gram.basis.len()];
                for (slot, &idx) in active.iter().enumerate() {
                    coeffs[idx] = coeffs_active[slot].clone();
                }
                let certified = rayleigh_quotient(&gram, &coeffs).ok_or_else(|| {
                    Error::NumericCheck("witness has zero I_k".into())
                })?;
                let mk_lower = rat_to_f64(&certified);
                // exact I at the witness, rescaled back to true magnitude
                let mut i_scaled = Rat::zero();
                for i in 0..gram.basis.len() {
                    for j in 0..gram.basis.len() {
                        i_scaled += &coeffs[i] * &coeffs[j] * &gram.i_gram[i][j];
                    }
                }
                let dmax = k + 2 * degree as u64 + 1;
                let i_value = rat_to_f64(&(i_scaled / Rat::from(factorial(dmax))));
                let j_each = mk_lower * i_value / k as f64;
                let _ = quotient;
                return Ok(VariationalResult {
                    k,
                    degree,
                    basis: gram.basis.clone(),
                    mk_lower,
                    certified,
                    coefficients: coeffs,
                    i_value,
                    j_values: vec![j_each; k as usize],
                    warnings,
                });
            }
            None => {
                let dropped = active.pop().unwrap();
                warnings.push(format!(
                    "I-Gram not positive definite; pruned basis element {:?}",
                    gram.basis[dropped]
                ));
            }
        }
    }
}

/// Exact conversion of a rational to double-double (hi + lo pair).
fn rat_to_ext(r: &Rat) -> Ext {
    let hi = rat_to_f64(r);
    if !hi.is_finite() {
        return Ext::from(hi);
    }
    let lo = rat_to_f64(&(r - Rat::from_float(hi).unwrap()));
    Ext::new_add(hi, lo)
}

/// Exact rationalization of a double-double value.
fn ext_to_rat(v: Ext) -> Option<Rat> {
    Some(Rat::from_float(v.hi())? + Rat::from_float(v.lo())?)
}

/// Solve of the pencil restricted to `active` indices. The basis Grams are
/// badly conditioned, so the reduction L D L^T of the I-Gram and every
/// triangular solve run in double-double precision; only the reduced
/// well-conditioned symmetric eigensolve runs in f64. The reported quotient
/// comes from an exact rational Rayleigh evaluation at the reconstructed
/// witness, so double-double roundoff can only lower the bound, never
/// overstate it. Returns None when the I-Gram is not positive definite on
/// the active subset.
fn try_solve(gram: &SymGram, active: &[usize]) -> Option<(f64, Vec<Rat>)> {
    use nalgebra::{DMatrix, DVector};
    let n = active.len();
    // diagonal pre-scaling s_i = 1/sqrt(I_ii) to tame magnitudes
    let s: Vec<Ext> = (0..n)
        .map(|i| Ext::from(1.0) / rat_to_ext(&gram.i_gram[active[i]][active[i]]).sqrt())
        .collect();
    if s.iter().any(|v| !v.hi().is_finite() || v.hi() <= 0.0) {
        return None;
    }
    let ig = |r: usize, c: usize| rat_to_ext(&gram.i_gram[active[r]][active[c]]) * s[r] * s[c];
    let jg = |r: usize, c: usize| rat_to_ext(&gram.j_gram[active[r]][active[c]]) * s[r] * s[c];
    // LDL^T of the scaled I-Gram (unit lower triangular L, diagonal D)
    let mut l = vec![vec![Ext::from(0.0); n]; n];
    let mut d = vec![Ext::from(0.0); n];
    for j in 0..n {
        let mut dj = ig(j, j);
        for s_ in 0..j {
            dj = dj - l[j][s_] * l[j][s_] * d[s_];
        }
        if !(dj.hi() > 0.0) || !dj.hi().is_finite() {
            return None;
        }
        l[j][j] = Ext::from(1.0);
        for i in j + 1..n {
            let mut v = ig(i, j);
            for s_ in 0..j {
                v = v - l[i][s_] * l[j][s_] * d[s_];
            }
            l[i][j] = v / dj;
        }
        d[j] = dj;
    }
    // B = L^{-1} J L^{-T} via two forward substitutions
    let fwd_solve = |rhs: &mut Vec<Vec<Ext>>| {
        for col in 0..n {
            for row in 0..n {
                let mut v = rhs[row][col];
                for s_ in 0..row {
                    v = v - l[row][s_] * rhs[s_][col];
                }
                rhs[row][col] = v;
            }
        }
    };
    let mut x: Vec<Vec<Ext>> = (0..n)
        .map(|r| (0..n).map(|c| jg(r, c)).collect())
        .collect();
    fwd_solve(&mut x);
    let mut xt: Vec<Vec<Ext>> = (0..n)
        .map(|r| (0..n).map(|c| x[c][r]).collect())
        .collect();
    fwd_solve(&mut xt);
    let b = xt;
    // reduced matrix A = D^{-1/2} B D^{-1/2}, eigenvalues = pencil spectrum
    let dsqrt: Vec<Ext> = d.iter().map(|v| v.sqrt()).collect();
    let a = DMatrix::from_fn(n, n, |r, c| {
        (b[r][c] / (dsqrt[r] * dsqrt[c])).to_f64_lossy()
    });
    if a.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let sym = (a.clone() + a.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let lam_max = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    // certify every near-maximal candidate, keep the largest exact quotient
    let mut best: Option<(Rat, Vec<Rat>)> = None;
    for (idx, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < lam_max - 1e-9 * lam_max.abs().max(1.0) {
            continue;
        }
        let y: DVector<f64> = eig.eigenvectors.column(idx).into();
        // z = D^{-1/2} y, back-substitute L^T w = z, undo the pre-scaling
        let z: Vec<Ext> = (0..n).map(|i| Ext::from(y[i]) / dsqrt[i]).collect();
        let mut w = z;
        for row in (0..n).rev() {
            let mut v = w[row];
            for s_ in row + 1..n {
                v = v - l[s_][row] * w[s_];
            }
            w[row] = v;
        }
        let c: Option<Vec<Rat>> = (0..n).map(|i| ext_to_rat(w[i] * s[i])).collect();
        let Some(c) = c else { continue };
        let mut full = vec![Rat::zero(); gram.basis.len()];
        for (slot, &gi) in active.iter().enumerate() {
            full[gi] = c[slot].clone();
        }
        if let Some(q) = rayleigh_quotient(gram, &full) {
            let better = match &best {
                Some((bq, _)) => q > *bq,
                None => true,
            };
            if better {
                best = Some((q, c));
            }
        }
    }
    best.map(|(q, c)| (rat_to_f64(&q), c))
}

/// Outcome of the bounded-gaps threshold formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RhoThreshold {
    pub m: i64,
    /// m >= 1 means at least m + 1 forms are simultaneously prime
    pub conclusive: bool,
}

/// m = ceil((delta - 0.525 + eps0)/2 * (1 - beta) * Mk) - 1, exactly.
pub fn rho_threshold(delta: &Rat, eps0: &Rat, beta: &Rat, mk: &Rat) -> Result<RhoThreshold> {
    if delta < &rat(21, 40) || delta > &rat(1, 1) {
        return Err(Error::Domain(format!("delta {delta} outside [0.525, 1]")));
    }
    if beta >= &rat(1, 1) && mk.is_positive() {
        // degenerate: factor vanishes or flips sign
    }
    if !mk.is_positive() {
        return Err(Error::Domain("Mk must be positive".into()));
    }
    let inner = (delta - rat(21, 40) + eps0) / rat(2, 1) * (rat(1, 1) - beta) * mk;
    let m = inner.ceil().to_integer().to_i64().ok_or_else(|| {
        Error::NumericCheck("threshold does not fit in i64".into())
    })? - 1;
    Ok(RhoThreshold {
        m,
        conclusive: m >= 1,
    })
}
