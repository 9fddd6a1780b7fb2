//! Level-one cusp forms: exact q-expansion bases, Hecke eigenforms, GL(3)
//! coefficients of the symmetric-square lift, the Petersson formula, and
//! integration over the modular fundamental domain.

use std::f64::consts::{LN_2, PI, TAU};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use dashmap::DashMap;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{factorize, kloosterman, moebius, tau};
use crate::besselx::bessel_j;
use crate::error::{Error, Result};
use crate::lfun::{dirichlet_coefficients_needed, l_sym2_at1, Sym2Method};
use crate::quad::GaussLegendre;
use crate::special::ln_factorial;

// ---------------------------------------------------------------------------
// Exact power series

type Series = Vec<BigInt>;

fn sigma_series(r: u32, n: usize, c0: i64, scale: i64) -> Series {
    let mut sig = vec![BigInt::zero(); n + 1];
    for d in 1..=n {
        let p = BigInt::from(d).pow(r);
        for m in (d..=n).step_by(d) {
            sig[m] += &p;
        }
    }
    let mut out: Series = sig.into_iter().map(|s| s * scale).collect();
    out[0] = BigInt::from(c0);
    out
}

fn mul_trunc(a: &[BigInt], b: &[BigInt], n: usize) -> Series {
    let mut c = vec![BigInt::zero(); n + 1];
    let b_lo = b.iter().position(|x| !x.is_zero()).unwrap_or(b.len());
    for (i, ai) in a.iter().enumerate().take(n + 1) {
        if ai.is_zero() {
            continue;
        }
        for j in b_lo..=(n - i).min(b.len() - 1) {
            if !b[j].is_zero() {
                c[i + j] += ai * &b[j];
            }
        }
    }
    c
}

fn eisenstein4(n: usize) -> Series {
    sigma_series(3, n, 1, 240)
}

fn eisenstein6(n: usize) -> Series {
    sigma_series(5, n, 1, -504)
}

fn delta_series(n: usize) -> Series {
    let e4 = eisenstein4(n);
    let e6 = eisenstein6(n);
    let e4c = mul_trunc(&mul_trunc(&e4, &e4, n), &e4, n);
    let e6s = mul_trunc(&e6, &e6, n);
    e4c.iter()
        .zip(&e6s)
        .map(|(a, b)| {
            let (q, r) = (a - b).div_rem(&BigInt::from(1728));
            debug_assert!(r.is_zero());
            q
        })
        .collect()
}

/// Dimension of the space of level-one cusp forms of even weight `k`.
pub fn cusp_dimension(k: u32) -> usize {
    if k % 2 == 1 || k < 12 {
        return 0;
    }
    let d = (k / 12) as usize;
    if k % 12 == 2 {
        d - 1
    } else {
        d
    }
}

/// Exact integer echelon basis of cusp forms of weight `k`, coefficients
/// of `q^0..=q^N`. Row `i` starts `q^{i+1} + 0·q^{i+2} + …` up to `q^d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QExpansionBasis {
    pub weight: u32,
    pub truncation: usize,
    pub rows: Vec<Vec<BigInt>>,
}

impl QExpansionBasis {
    pub fn dimension(&self) -> usize {
        self.rows.len()
    }
}

/// Miller-style basis: `Δ^i E4^a E6^b` with `12i + 4a + 6b = k`, reduced so
/// that row `i` has coefficient `δ_{ij}` at `q^j` for `j ≤ d`.
pub fn cusp_basis(k: u32, n: usize) -> Result<QExpansionBasis> {
    if k % 2 == 1 {
        return Err(Error::domain(format!("weight must be even, got {k}")));
    }
    if k < 4 {
        return Err(Error::domain(format!("weight must be at least 4, got {k}")));
    }
    let d = cusp_dimension(k);
    if d == 0 {
        return Ok(QExpansionBasis { weight: k, truncation: n, rows: Vec::new() });
    }
    if n < d + 1 {
        return Err(Error::parameter(format!("truncation {n} below dimension + 1 = {}", d + 1)));
    }
    let e4 = eisenstein4(n);
    let e6 = eisenstein6(n);
    let delta = delta_series(n);
    let e4_cubed = mul_trunc(&mul_trunc(&e4, &e4, n), &e4, n);

    // lowest-weight cofactor, for i = d
    let w_low = k as usize - 12 * d;
    let mut one = vec![BigInt::zero(); n + 1];
    one[0] = BigInt::one();
    let mut cofactor = match w_low {
        0 => one,
        4 => e4.clone(),
        6 => e6.clone(),
        8 => mul_trunc(&e4, &e4, n),
        10 => mul_trunc(&e4, &e6, n),
        14 => mul_trunc(&mul_trunc(&e4, &e4, n), &e6, n),
        _ => unreachable!("weight {w_low} cannot remain after removing Δ^d"),
    };
    let mut cofactors = vec![Series::new(); d + 1];
    cofactors[d] = cofactor.clone();
    for i in (1..d).rev() {
        cofactor = mul_trunc(&cofactor, &e4_cubed, n);
        cofactors[i] = cofactor.clone();
    }
    let mut rows = Vec::with_capacity(d);
    let mut delta_pow = delta.clone();
    for (i, cof) in cofactors.iter().enumerate().skip(1) {
        if i > 1 {
            delta_pow = mul_trunc(&delta_pow, &delta, n);
        }
        rows.push(mul_trunc(&delta_pow, cof, n));
    }
    // clear the entries above each pivot, working upward
    for i in (0..d).rev() {
        for r in 0..i {
            let c = rows[r][i + 1].clone();
            if !c.is_zero() {
                let (lo, hi) = rows.split_at_mut(i);
                for (x, y) in lo[r].iter_mut().zip(&hi[0]) {
                    *x -= &c * y;
                }
            }
        }
    }
    Ok(QExpansionBasis { weight: k, truncation: n, rows })
}

// ---------------------------------------------------------------------------
// Big-integer helpers

/// `b · e^{−ln_scale}` without overflow in the intermediate.
fn scaled_f64(b: &BigInt, ln_scale: f64) -> f64 {
    if b.is_zero() {
        return 0.0;
    }
    let bits = b.bits();
    let (mant, shift) = if bits > 900 {
        let s = bits - 64;
        ((b >> s).to_f64().unwrap_or(0.0), s as f64)
    } else {
        (b.to_f64().unwrap_or(0.0), 0.0)
    };
    mant * (shift * LN_2 - ln_scale).exp()
}

/// Characteristic polynomial `det(λI − M)` by Berkowitz's division-free
/// algorithm; coefficients in increasing degree.
fn char_poly(m: &[Vec<BigInt>]) -> Vec<BigInt> {
    let n = m.len();
    // c holds coefficients of the char poly of the leading r×r block, highest degree first
    let mut c: Vec<BigInt> = vec![BigInt::one(), -m[0][0].clone()];
    for r in 1..n {
        // block [[A, S], [R, a]] with A the leading r×r, a = m[r][r]
        let a = m[r][r].clone();
        let s: Vec<BigInt> = (0..r).map(|i| m[i][r].clone()).collect();
        let rr: Vec<BigInt> = (0..r).map(|j| m[r][j].clone()).collect();
        // Toeplitz column: 1, -a, -R S, -R A S, -R A^2 S, ...
        let mut t = vec![BigInt::one(), -a];
        let mut v = s.clone();
        for _ in 0..r {
            let dot: BigInt = rr.iter().zip(&v).map(|(x, y)| x * y).sum();
            t.push(-dot);
            v = (0..r).map(|i| (0..r).map(|j| &m[i][j] * &v[j]).sum()).collect();
        }
        // new c = T · c, T lower triangular Toeplitz of size (r+2)×(r+1)
        let mut nc = vec![BigInt::zero(); r + 2];
        for (i, slot) in nc.iter_mut().enumerate() {
            for (j, cj) in c.iter().enumerate() {
                if i >= j && i - j < t.len() {
                    *slot += &t[i - j] * cj;
                }
            }
        }
        c = nc;
    }
    c.reverse();
    c
}

/// Exact `p(λ)` and `p'(λ)` at a dyadic `λ = m 2^e`, returned as `p/p'`.
fn newton_correction(poly: &[BigInt], lambda: f64) -> Option<f64> {
    if lambda == 0.0 || !lambda.is_finite() {
        return None;
    }
    let (mant, exp) = frexp_int(lambda);
    let d = poly.len() - 1;
    let m = BigInt::from(mant);
    // scale by 2^{-e·d} (e < 0) so everything is integral: Σ c_j m^j 2^{e j}
    let mut p = BigInt::zero();
    let mut dp = BigInt::zero();
    for (j, c) in poly.iter().enumerate() {
        let term = c * m.pow(j as u32);
        let shift = (d - j) as i64 * (-exp);
        p += shift_big(&term, shift);
        if j > 0 {
            let dterm = c * BigInt::from(j) * m.pow(j as u32 - 1);
            let dshift = (d - j) as i64 * (-exp);
            dp += shift_big(&dterm, dshift);
        }
    }
    // p(λ) = p·2^{e d}, p'(λ) = dp·2^{e(d−1)}, so p/p' = (p/dp)·2^{e}
    if dp.is_zero() {
        return None;
    }
    Some(big_ratio(&p, &dp) * 2f64.powi(exp as i32))
}

fn shift_big(b: &BigInt, s: i64) -> BigInt {
    if s >= 0 {
        b << (s as u64)
    } else {
        b >> ((-s) as u64)
    }
}

fn frexp_int(x: f64) -> (i64, i64) {
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { -1 } else { 1 };
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = (bits & ((1u64 << 52) - 1)) as i64;
    let (m, e) = if exp == 0 { (frac, -1074) } else { (frac | (1 << 52), exp - 1075) };
    (sign * m, e)
}

fn big_ratio(a: &BigInt, b: &BigInt) -> f64 {
    let sa = a.bits() as i64;
    let sb = b.bits() as i64;
    let fa = scaled_f64(a, (sa as f64) * LN_2);
    let fb = scaled_f64(b, (sb as f64) * LN_2);
    fa / fb * 2f64.powi((sa - sb) as i32)
}

// ---------------------------------------------------------------------------
// Eigenforms

/// Magic first line of eigenform cache files.
pub const CACHE_MAGIC: &str = "holomoment-eigenforms v1";

/// A normalized Hecke eigenform: `a[n]` is `a_f(n)` for `1 ≤ n ≤ N`
/// (`a[0]` is unused and zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenformRecord {
    pub weight: u32,
    /// Position in the list sorted by `a_f(2)`.
    pub index: usize,
    pub truncation: usize,
    pub a: Vec<f64>,
    /// Largest Hecke-relation residual seen over a sample of products.
    pub precision: f64,
}

impl EigenformRecord {
    /// `a_f(n)`, extended past the truncation through multiplicativity when
    /// every prime factor of `n` is available.
    pub fn coefficient(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::domain("coefficients start at n = 1"));
        }
        if (n as usize) <= self.truncation {
            return Ok(self.a[n as usize]);
        }
        let mut acc = 1.0;
        for (p, e) in factorize(n) {
            if p as usize > self.truncation {
                return Err(Error::parameter(format!(
                    "a_f({n}) needs a_f({p}) beyond truncation {}",
                    self.truncation
                )));
            }
            acc *= self.prime_power(p, e);
        }
        Ok(acc)
    }

    /// `a_f(p^e)` from `a_f(p)` by the Hecke recursion.
    pub fn prime_power(&self, p: u64, e: u32) -> f64 {
        let ap = self.a[p as usize];
        let (mut prev, mut cur) = (1.0, ap);
        if e == 0 {
            return 1.0;
        }
        for _ in 1..e {
            let next = ap * cur - prev;
            prev = cur;
            cur = next;
        }
        cur
    }

    /// Dense table `a_f(1..=n)` (entry 0 zero), extended by multiplicativity.
    pub fn table(&self, n: usize) -> Result<Vec<f64>> {
        if n <= self.truncation {
            return Ok(self.a[..=n].to_vec());
        }
        let primes = crate::arith::primes_up_to(n);
        if let Some(&p) = primes.iter().rev().find(|&&p| p > self.truncation) {
            return Err(Error::parameter(format!(
                "a_f({p}) is beyond truncation {}; need at least {n} coefficients",
                self.truncation
            )));
        }
        // multiplicative sieve: a(n) = a(p^e) a(n / p^e) for the smallest p
        let mut out = vec![0.0; n + 1];
        out[1] = 1.0;
        let mut spf = vec![0usize; n + 1];
        for &p in &primes {
            for m in (p..=n).step_by(p) {
                if spf[m] == 0 {
                    spf[m] = p;
                }
            }
        }
        for m in 2..=n {
            let p = spf[m];
            let mut q = m;
            let mut e = 0;
            while q % p == 0 {
                q /= p;
                e += 1;
            }
            out[m] = self.prime_power(p as u64, e) * out[q];
        }
        Ok(out)
    }

    /// Raw q-coefficient `a_f(n) n^{(k−1)/2}`.
    pub fn raw_coefficient(&self, n: u64) -> Result<f64> {
        Ok(self.coefficient(n)? * (n as f64).powf((f64::from(self.weight) - 1.0) / 2.0))
    }
}

fn hecke_matrix(basis: &QExpansionBasis, p: usize) -> Vec<Vec<BigInt>> {
    let d = basis.dimension();
    let k = basis.weight;
    let pk = BigInt::from(p).pow(k - 1);
    // coordinates of T_p b_i are its coefficients at q^1..q^d
    (1..=d)
        .map(|nn| {
            (0..d)
                .map(|i| {
                    let mut v = basis.rows[i][p * nn].clone();
                    if nn % p == 0 {
                        v += &pk * &basis.rows[i][nn / p];
                    }
                    v
                })
                .collect()
        })
        .collect()
}

/// `M'[n][i] = M[n][i] (i/n)^{(k−1)/2} / p^{(k−1)/2}`: the Hecke matrix in
/// the coordinates `a_f(1..=d)`, with eigenvalues `a_f(p)`.
fn normalized_matrix(m: &[Vec<BigInt>], k: u32, p: usize) -> DMatrix<f64> {
    let d = m.len();
    let h = (f64::from(k) - 1.0) / 2.0;
    DMatrix::from_fn(d, d, |r, c| {
        let nn = (r + 1) as f64;
        let ii = (c + 1) as f64;
        scaled_f64(&m[r][c], h * (nn.ln() - ii.ln() + (p as f64).ln()))
    })
}

fn null_vector(a: &DMatrix<f64>) -> Vec<f64> {
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .expect("nonempty matrix");
    vt.row(imin).iter().copied().collect()
}

/// Relative separation below which two `T_2` eigenvalues count as repeated.
const REPEATED_EIGENVALUE_GAP: f64 = 1e-8;

/// All normalized Hecke eigenforms of weight `k`, with `a_f(n)` for `n ≤ N`,
/// sorted by `a_f(2)`.
pub fn hecke_eigenforms(k: u32, n: usize) -> Result<Vec<EigenformRecord>> {
    let d = cusp_dimension(k);
    if k % 2 == 1 {
        return Err(Error::domain(format!("weight must be even, got {k}")));
    }
    if d == 0 {
        cusp_basis(k, n)?;
        return Ok(Vec::new());
    }
    if n < 2 * d {
        return Err(Error::parameter(format!("truncation {n} too small for the T_2 matrix; need {}", 2 * d)));
    }
    let basis = cusp_basis(k, n)?;
    let t2 = hecke_matrix(&basis, 2);
    let m2 = normalized_matrix(&t2, k, 2);
    let h = (f64::from(k) - 1.0) / 2.0;

    let mut eig: Vec<f64> = m2.clone().schur().complex_eigenvalues().iter().map(|z| z.re).collect();
    eig.sort_by(f64::total_cmp);
    // one Newton step on the exact characteristic polynomial of T_2
    let poly = char_poly(&t2);
    let scale2 = (h * 2f64.ln()).exp();
    for mu in eig.iter_mut() {
        if let Some(delta) = newton_correction(&poly, *mu * scale2) {
            let refined = *mu - delta / scale2;
            if (refined - *mu).abs() < 1e-6 {
                *mu = refined;
            }
        }
    }

    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut i = 0;
    while i < d {
        let mut j = i + 1;
        while j < d && (eig[j] - eig[i]).abs() <= REPEATED_EIGENVALUE_GAP * (1.0 + eig[i].abs()) {
            j += 1;
        }
        if j == i + 1 {
            let a = &m2 - DMatrix::identity(d, d) * eig[i];
            vectors.push(null_vector(&a));
        } else {
            vectors.extend(split_with_t3(&basis, &m2, &eig[i..j])?);
        }
        i = j;
    }

    let mut records = Vec::with_capacity(d);
    for v in vectors {
        if v[0].abs() < 1e-12 {
            return Err(Error::accuracy("eigenvector normalization a_f(1)", v[0].abs(), 1e-12));
        }
        let v: Vec<f64> = v.iter().map(|x| x / v[0]).collect();
        let mut a = vec![0.0; n + 1];
        for (nn, slot) in a.iter_mut().enumerate().skip(1) {
            let ln_n = (nn as f64).ln();
            let mut acc = 0.0;
            for (ii, row) in basis.rows.iter().enumerate() {
                // a_f(i) b_i(n) (i/n)^{(k−1)/2}
                acc += v[ii] * scaled_f64(&row[nn], h * (ln_n - ((ii + 1) as f64).ln()));
            }
            *slot = acc;
        }
        records.push(EigenformRecord { weight: k, index: 0, truncation: n, a, precision: 0.0 });
    }
    records.sort_by(|x, y| x.a[2].total_cmp(&y.a[2]));
    for (idx, r) in records.iter_mut().enumerate() {
        r.index = idx;
        r.precision = hecke_residual(r, 12);
    }
    Ok(records)
}

fn split_with_t3(basis: &QExpansionBasis, m2: &DMatrix<f64>, cluster: &[f64]) -> Result<Vec<Vec<f64>>> {
    let d = basis.dimension();
    if basis.truncation < 3 * d {
        return Err(Error::parameter(format!(
            "repeated T_2 eigenvalue needs T_3, which needs truncation {}",
            3 * d
        )));
    }
    let mu = cluster.iter().sum::<f64>() / cluster.len() as f64;
    let a = m2 - DMatrix::identity(d, d) * mu;
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
    let q = DMatrix::from_fn(d, cluster.len(), |r, c| vt[(order[c], r)]);
    let m3 = normalized_matrix(&hecke_matrix(basis, 3), basis.weight, 3);
    // T_3 restricted to the T_2 eigenspace, in an orthonormal frame
    let small = q.transpose() * &m3 * &q;
    let eig = small.clone().schur().complex_eigenvalues();
    let mut out = Vec::new();
    for z in eig.iter() {
        let a = &small - DMatrix::identity(cluster.len(), cluster.len()) * z.re;
        let y = DMatrix::from_vec(cluster.len(), 1, null_vector(&a));
        let v = &q * y;
        out.push(v.iter().copied().collect());
    }
    Ok(out)
}

/// `max |a(n)a(m) − Σ_{d|(n,m)} a(nm/d²)|` over `2 ≤ n ≤ n_max`, `nm ≤ N`.
const RESIDUAL_RANGE: usize = 144;

fn hecke_residual(r: &EigenformRecord, n_max: usize) -> f64 {
    // fixed range so the value does not depend on which truncation got cached
    let top = r.truncation.min(RESIDUAL_RANGE);
    let mut worst = 0.0f64;
    for nn in 2..=n_max {
        for m in nn..=top / nn {
            let g = nn.gcd(&m);
            let mut rhs = 0.0;
            for dd in 1..=g {
                if g % dd == 0 {
                    rhs += r.a[nn * m / (dd * dd)];
                }
            }
            worst = worst.max((r.a[nn] * r.a[m] - rhs).abs());
        }
    }
    worst
}

/// Write records of one weight in the line-oriented cache format.
pub fn write_eigenform_cache(path: &Path, k: u32, n: usize, records: &[EigenformRecord]) -> Result<()> {
    let mut s = String::new();
    writeln!(s, "{CACHE_MAGIC}").ok();
    writeln!(s, "{k} {n} {}", records.len()).ok();
    for r in records {
        write!(s, "{}", r.index).ok();
        for v in &r.a[1..=n] {
            write!(s, " {v:.16e}").ok();
        }
        s.push('\n');
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(s.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Read a cache file; a wrong magic line or malformed body is a cache error.
pub fn read_eigenform_cache(path: &Path) -> Result<(u32, usize, Vec<EigenformRecord>)> {
    let f = std::fs::File::open(path)?;
    let mut lines = BufReader::new(f).lines();
    let bad = |what: &str| Error::Cache(format!("{}: {what}", path.display()));
    let magic = lines.next().ok_or_else(|| bad("empty file"))??;
    if magic.trim() != CACHE_MAGIC {
        return Err(bad("format version mismatch"));
    }
    let header = lines.next().ok_or_else(|| bad("missing header"))??;
    let fields: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| bad("bad header")))
        .collect::<Result<_>>()?;
    let [k, n, dim] = fields[..] else {
        return Err(bad("header must be `k N dim`"));
    };
    let mut records = Vec::with_capacity(dim);
    for _ in 0..dim {
        let line = lines.next().ok_or_else(|| bad("missing form line"))??;
        let mut it = line.split_whitespace();
        let index: usize = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad index"))?;
        let mut a = vec![0.0];
        for t in it {
            a.push(t.parse::<f64>().map_err(|_| bad("bad coefficient"))?);
        }
        if a.len() != n + 1 {
            return Err(bad("wrong number of coefficients"));
        }
        let mut r = EigenformRecord { weight: k as u32, index, truncation: n, a, precision: 0.0 };
        r.precision = hecke_residual(&r, 12);
        records.push(r);
    }
    Ok((k as u32, n, records))
}

// ---------------------------------------------------------------------------
// GL(3) coefficients

/// `A_f(n, r)` for `n ≤ n_max`, `r ≤ r_max`; `values[n][r]`, index 0 unused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gl3Coefficients {
    pub weight: u32,
    pub index: usize,
    pub n_max: usize,
    pub r_max: usize,
    pub values: Vec<Vec<f64>>,
}

impl Gl3Coefficients {
    pub fn get(&self, n: usize, r: usize) -> Result<f64> {
        if n == 0 || r == 0 || n > self.n_max || r > self.r_max {
            return Err(Error::parameter(format!(
                "A({n},{r}) outside computed range {}×{}",
                self.n_max, self.r_max
            )));
        }
        Ok(self.values[n][r])
    }
}

/// `A_f(n,1) = Σ_{d²t=n} a_f(t²)` for `n ≤ limit` (entry 0 zero). Needs
/// `a_f(p)` for every prime `p ≤ limit`.
pub fn sym2_coefficients(f: &EigenformRecord, limit: usize) -> Result<Vec<f64>> {
    let sq: Vec<f64> = (0..=limit)
        .map(|t| if t == 0 { Ok(0.0) } else { a_square(f, t as u64) })
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; limit + 1];
    let mut d = 1;
    while d * d <= limit {
        for t in 1..=limit / (d * d) {
            out[d * d * t] += sq[t];
        }
        d += 1;
    }
    Ok(out)
}

/// `a_f(t²)` from `a_f(p)` for the primes dividing `t`.
fn a_square(f: &EigenformRecord, t: u64) -> Result<f64> {
    let mut acc = 1.0;
    for (p, e) in factorize(t) {
        if p as usize > f.truncation {
            return Err(Error::parameter(format!(
                "a_f({}) needs a_f({p}) beyond truncation {}",
                t * t,
                f.truncation
            )));
        }
        acc *= f.prime_power(p, 2 * e);
    }
    Ok(acc)
}

/// GL(3) coefficients of the symmetric-square lift.
///
/// `A(n, r) = Σ_{d|(n,r)} μ(d) A(n/d, 1) A(r/d, 1)`; before returning, the
/// identity `Σ_{d|(n,r)} A(n/d, r/d) = A(n,1) A(r,1)` (the Dirichlet series
/// product `ζ(s+w) Σ A(n,r) n^{−s} r^{−w} = L(s, sym²f) L(w, sym²f)`) is
/// checked coefficientwise for `n, r ≤ 50`.
pub fn gl3_coefficients(f: &EigenformRecord, n_max: usize, r_max: usize) -> Result<Gl3Coefficients> {
    if n_max == 0 || r_max == 0 {
        return Err(Error::parameter("GL(3) ranges must be positive"));
    }
    let top = n_max.max(r_max).max(50);
    let a1 = sym2_coefficients(f, top)?;
    let build = |nn: usize, r: usize| -> f64 {
        let g = nn.gcd(&r);
        let mut s = 0.0;
        for d in 1..=g {
            if g % d == 0 {
                let mu = moebius(d as u64);
                if mu != 0 {
                    s += mu as f64 * a1[nn / d] * a1[r / d];
                }
            }
        }
        s
    };
    let check = 50;
    let mut worst = 0.0f64;
    let small: Vec<Vec<f64>> = (0..=check)
        .map(|nn| (0..=check).map(|r| if nn > 0 && r > 0 { build(nn, r) } else { 0.0 }).collect())
        .collect();
    for nn in 1..=check {
        for r in 1..=check {
            let g = nn.gcd(&r);
            let mut lhs = 0.0;
            for d in 1..=g {
                if g % d == 0 {
                    lhs += small[nn / d][r / d];
                }
            }
            let rhs = a1[nn] * a1[r];
            worst = worst.max((lhs - rhs).abs() / (1.0 + rhs.abs()));
        }
    }
    if worst > 1e-9 {
        return Err(Error::accuracy("GL(3) Dirichlet-series identity", worst, 1e-9));
    }
    let values = (0..=n_max)
        .map(|nn| (0..=r_max).map(|r| if nn > 0 && r > 0 { build(nn, r) } else { 0.0 }).collect())
        .collect();
    Ok(Gl3Coefficients { weight: f.weight, index: f.index, n_max, r_max, values })
}

// ---------------------------------------------------------------------------
// Petersson formula

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeterssonSides {
    pub lhs: f64,
    pub rhs: f64,
    /// Rigorous bound on the omitted `c > c_max` part of the Kloosterman series.
    pub tail_bound: f64,
    /// Set when `tail_bound` exceeds `1e-8`.
    pub warning: Option<String>,
}

/// Both sides of
/// `(2π²/(k−1)) Σ_f a_f(n)a_f(m)/L(1,sym²f) = δ_{n=m} + 2π i^{−k} Σ_c S(n,m;c)/c J_{k−1}(4π√(nm)/c)`.
pub fn petersson_sides(k: u32, n: u64, m: u64, c_max: u64) -> Result<PeterssonSides> {
    let forms = if cusp_dimension(k) == 0 {
        cusp_basis(k, 2)?;
        Vec::new()
    } else {
        let need = (n.max(m) as usize).max(2 * cusp_dimension(k)).max(dirichlet_coefficients_needed(k));
        hecke_eigenforms(k, need)?
    };
    petersson_sides_with(k, &forms, n, m, c_max)
}

/// As [`petersson_sides`], with the eigenforms of weight `k` supplied.
pub fn petersson_sides_with(k: u32, forms: &[EigenformRecord], n: u64, m: u64, c_max: u64) -> Result<PeterssonSides> {
    if n == 0 || m == 0 || c_max == 0 {
        return Err(Error::domain("Petersson formula needs n, m, c_max ≥ 1"));
    }
    let kf = f64::from(k);
    let mut lhs = 0.0;
    for f in forms {
        let l1 = l_sym2_at1(f, Sym2Method::Dirichlet)?;
        lhs += f.coefficient(n)? * f.coefficient(m)? / l1.value;
    }
    lhs *= 2.0 * PI * PI / (kf - 1.0);

    let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
    let root = ((n * m) as f64).sqrt();
    let order = i64::from(k) - 1;
    let mut series = 0.0;
    for c in 1..=c_max {
        let s = kloosterman(n, m, c)?.value;
        if s != 0.0 {
            series += s / c as f64 * bessel_j(order, 4.0 * PI * root / c as f64)?;
        }
    }
    let rhs = if n == m { 1.0 } else { 0.0 } + 2.0 * PI * sign * series;
    let tail_bound = 2.0 * PI * kloosterman_tail(k, n, m, c_max);
    let warning = (tail_bound > 1e-8).then(|| format!("c_max = {c_max} certifies only {tail_bound:.2e}"));
    Ok(PeterssonSides { lhs, rhs, tail_bound, warning })
}

/// `Σ_{c > c_max} τ(c) √gcd(n,m,c) c^{−1/2} (x_c/2)^{k−1}/(k−1)!` with
/// `x_c = 4π√(nm)/c`, using `|J_l(x)| ≤ (x/2)^l/l!` and Weil's bound; summed
/// explicitly to `100 c_max`, then bounded with `τ(c) ≤ 2√c`.
fn kloosterman_tail(k: u32, n: u64, m: u64, c_max: u64) -> f64 {
    let l = f64::from(k) - 1.0;
    let ln_a = l * (2.0 * PI * ((n * m) as f64).sqrt()).ln() - ln_factorial(u64::from(k) - 1);
    let g_max = (n.gcd(&m) as f64).sqrt();
    let mut acc = 0.0;
    let far = 100 * c_max;
    for c in c_max + 1..=far {
        let g = (crate::arith::gcd3(n, m, c) as f64).sqrt();
        let cf = c as f64;
        acc += tau(c) as f64 * g * (ln_a - (l + 0.5) * cf.ln()).exp();
    }
    // Σ_{c > far} 2√c · g · c^{−1/2−l} e^{ln_a} ≤ 2 g e^{ln_a} far^{1−l}/(l − 1)
    acc + 2.0 * g_max * (ln_a + (1.0 - l) * (far as f64).ln()).exp() / (l - 1.0)
}

// ---------------------------------------------------------------------------
// Fundamental domain

/// What to integrate over `SL₂(ℤ)\ℍ` against `dx dy / y²`.
#[derive(Debug, Clone, Copy)]
pub enum Integrand<'a> {
    One,
    /// `|F|²` with `F = y^{k/2} f`.
    Abs2(&'a EigenformRecord),
    /// `|F|⁴`.
    Abs4(&'a EigenformRecord),
    /// `F² · conj(G)` for `f` of weight `k` and `g` of weight `2k`.
    ConjPair(&'a EigenformRecord, &'a EigenformRecord),
}

/// Result of a fundamental-domain quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainIntegral {
    pub value: Complex64,
    /// Difference between the last two refinement levels.
    pub error_estimate: f64,
    /// Height above which the integrand was dropped.
    pub y_cutoff: f64,
    pub x_nodes: usize,
    pub t_nodes: usize,
}

/// `y^{k/2} f(z)` from normalized coefficients, each term formed in log space.
struct FormEvaluator {
    half_k: f64,
    half_km1: f64,
    a: Vec<f64>,
    ln_n: Vec<f64>,
}

impl FormEvaluator {
    fn new(f: &EigenformRecord, terms: usize) -> Result<Self> {
        let a = f.table(terms)?;
        let ln_n = (0..=terms).map(|n| if n == 0 { 0.0 } else { (n as f64).ln() }).collect();
        let k = f64::from(f.weight);
        Ok(FormEvaluator { half_k: k / 2.0, half_km1: (k - 1.0) / 2.0, a, ln_n })
    }

    fn eval(&self, x: f64, y: f64, terms: usize) -> Complex64 {
        let ln_y = y.ln();
        let mut acc = Complex64::new(0.0, 0.0);
        let step = Complex64::from_polar(1.0, TAU * x);
        let mut phase = step;
        for nn in 1..=terms.min(self.a.len() - 1) {
            let mag = (self.half_k * ln_y + self.half_km1 * self.ln_n[nn] - TAU * nn as f64 * y).exp();
            acc += phase * (self.a[nn] * mag);
            phase *= step;
        }
        acc
    }
}

/// Terms needed at height `y` so that the Deligne-bounded tail
/// `Σ_{n>N} τ(n) n^{(k−1)/2} y^{k/2} e^{−2πny}` stays below `eps` times the
/// size `y^{k/2} e^{−2πy}` of the first term.
fn terms_needed(k: u32, y: f64, eps: f64) -> usize {
    let kf = f64::from(k);
    let ln_ref = kf / 2.0 * y.ln() - TAU * y + eps.ln();
    let mut nn = 1usize;
    loop {
        let n = nn as f64;
        // τ(n) ≤ 2√n; consecutive bounds shrink by at most
        // e^{−2πy}(1+1/n)^{k/2}, so the tail after n is term/(1 − ratio)
        let ln_term = (2.0 * n.sqrt()).ln() + (kf - 1.0) / 2.0 * n.ln() + kf / 2.0 * y.ln() - TAU * n * y;
        let ratio = (-TAU * y + kf / 2.0 * (1.0 + 1.0 / n).ln()).exp();
        if ratio < 0.9 && ln_term - (1.0 - ratio).ln() < ln_ref {
            return nn.saturating_sub(1).max(1);
        }
        nn += 1;
        if nn > 1_000_000 {
            return nn;
        }
    }
}

/// Integral of the chosen integrand over the standard fundamental domain.
///
/// With `t = 1/y` the measure becomes `dx dt` on
/// `|x| ≤ 1/2, 0 < t ≤ (1 − x²)^{−1/2}`; Gauss–Legendre panels in both
/// variables are doubled until two levels agree within `tol` relative to
/// `∫ |integrand|`. Terms of the q-expansions and the height are cut where
/// the Deligne envelope drops below `tol/100` of its peak.
pub fn fundamental_domain_integral(k_total: u32, integrand: Integrand<'_>, tol: f64) -> Result<DomainIntegral> {
    if !(tol > 0.0) {
        return Err(Error::domain("tolerance must be positive"));
    }
    let (forms, weights): (Vec<&EigenformRecord>, Vec<u32>) = match integrand {
        Integrand::One => (vec![], vec![]),
        Integrand::Abs2(f) | Integrand::Abs4(f) => (vec![f], vec![f.weight]),
        Integrand::ConjPair(f, g) => {
            if g.weight != 2 * f.weight {
                return Err(Error::domain("conj_pair needs g of twice the weight of f"));
            }
            (vec![f, g], vec![f.weight, g.weight])
        }
    };
    let expected = match integrand {
        Integrand::One => 0,
        Integrand::Abs2(f) => 2 * f.weight,
        Integrand::Abs4(f) => 4 * f.weight,
        Integrand::ConjPair(f, g) => 2 * f.weight + g.weight,
    };
    if k_total != expected {
        return Err(Error::domain(format!("k_total {k_total} does not match integrand weight {expected}")));
    }
    let eps = tol * 1e-2;
    let y_min = 3f64.sqrt() / 2.0;
    let env = |y: f64| -> f64 {
        match integrand {
            Integrand::One => 1.0,
            Integrand::Abs2(f) => envelope(f.weight, y).powi(2),
            Integrand::Abs4(f) => envelope(f.weight, y).powi(4),
            Integrand::ConjPair(f, g) => envelope(f.weight, y).powi(2) * envelope(g.weight, y),
        }
    };
    let y_cutoff = if forms.is_empty() {
        f64::INFINITY
    } else {
        let peak_y = f64::from(k_total) / (4.0 * PI);
        let mut y = y_min;
        let mut peak = 0.0f64;
        loop {
            let e = env(y);
            peak = peak.max(e);
            if y > peak_y && e < eps * peak {
                break y;
            }
            y *= 1.05;
        }
    };
    let max_terms = weights.iter().map(|&w| terms_needed(w, y_min, eps)).max().unwrap_or(0);
    let evals: Vec<FormEvaluator> = forms
        .iter()
        .map(|f| {
            FormEvaluator::new(f, max_terms).map_err(|_| {
                let have = f.truncation;
                let achievable = (1..=30)
                    .map(|p| 10f64.powi(-p))
                    .filter(|&t| terms_needed(f.weight, y_min, t * 1e-2) <= have)
                    .fold(f64::NAN, f64::min);
                Error::accuracy(
                    format!("fundamental-domain integral: weight {} form needs {max_terms} coefficients", f.weight),
                    achievable,
                    tol,
                )
            })
        })
        .collect::<Result<_>>()?;

    let t_min = if y_cutoff.is_finite() { 1.0 / y_cutoff } else { 0.0 };
    let value_at = |x: f64, t: f64| -> Complex64 {
        let y = 1.0 / t;
        match integrand {
            Integrand::One => Complex64::new(1.0, 0.0),
            Integrand::Abs2(f) => {
                let nt = terms_needed(f.weight, y, eps);
                Complex64::new(evals[0].eval(x, y, nt).norm_sqr(), 0.0)
            }
            Integrand::Abs4(f) => {
                let nt = terms_needed(f.weight, y, eps);
                Complex64::new(evals[0].eval(x, y, nt).norm_sqr().powi(2), 0.0)
            }
            Integrand::ConjPair(f, g) => {
                let ff = evals[0].eval(x, y, terms_needed(f.weight, y, eps));
                let gg = evals[1].eval(x, y, terms_needed(g.weight, y, eps));
                ff * ff * gg.conj()
            }
        }
    };
    let integrate = |px: usize, pt: usize| -> (Complex64, f64) {
        let rule = GaussLegendre::cached(16);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut acc_abs = 0.0;
        let hx = 1.0 / px as f64;
        for ix in 0..px {
            let (x0, x1) = (-0.5 + hx * ix as f64, -0.5 + hx * (ix + 1) as f64);
            for (xn, xw) in rule.nodes.iter().zip(&rule.weights) {
                let x = 0.5 * (x0 + x1) + 0.5 * (x1 - x0) * xn;
                let wx = 0.5 * (x1 - x0) * xw;
                let t_top = 1.0 / (1.0 - x * x).sqrt();
                let ht = (t_top - t_min) / pt as f64;
                for it in 0..pt {
                    let (t0, t1) = (t_min + ht * it as f64, t_min + ht * (it + 1) as f64);
                    for (tn, tw) in rule.nodes.iter().zip(&rule.weights) {
                        let t = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * tn;
                        let v = value_at(x, t);
                        let w = wx * 0.5 * (t1 - t0) * tw;
                        acc += v * w;
                        acc_abs += v.norm() * w;
                    }
                }
            }
        }
        (acc, acc_abs)
    };
    let (mut px, mut pt) = (2usize, 4usize);
    let (mut prev, _) = integrate(px, pt);
    for _ in 0..6 {
        px *= 2;
        pt *= 2;
        let (cur, scale) = integrate(px, pt);
        let err = (cur - prev).norm();
        if err <= tol * scale {
            return Ok(DomainIntegral {
                value: cur,
                error_estimate: err,
                y_cutoff,
                x_nodes: 16 * px,
                t_nodes: 16 * pt,
            });
        }
        prev = cur;
    }
    let (last, scale) = integrate(2 * px, 2 * pt);
    Err(Error::accuracy("fundamental-domain quadrature", (last - prev).norm() / scale, tol))
}

/// Deligne envelope `Σ τ(n) n^{(k−1)/2} y^{k/2} e^{−2πny}`.
fn envelope(k: u32, y: f64) -> f64 {
    let kf = f64::from(k);
    (1..200)
        .map(|n| {
            let nf = n as f64;
            tau(n) as f64 * ((kf - 1.0) / 2.0 * nf.ln() + kf / 2.0 * y.ln() - TAU * nf * y).exp()
        })
        .sum()
}

/// `||F||₂² = (k−1)! / (2^{2k−1} π^{k+1}) · L(1, sym²f)`.
pub fn petersson_norm_sq(f: &EigenformRecord) -> Result<f64> {
    let k = u64::from(f.weight);
    let l1 = l_sym2_at1(f, Sym2Method::Dirichlet)?.value;
    Ok((ln_factorial(k - 1) - (2 * k - 1) as f64 * LN_2 - (k + 1) as f64 * PI.ln()).exp() * l1)
}

// ---------------------------------------------------------------------------
// Store

/// Eigenforms per weight, kept in memory and optionally in a cache directory
/// (one file per weight, see [`write_eigenform_cache`]).
///
/// A file whose magic line, weight or truncation does not fit the request
/// is rebuilt, never reused.
#[derive(Debug, Default)]
pub struct EigenformStore {
    dir: Option<PathBuf>,
    mem: DashMap<u32, (usize, Arc<Vec<EigenformRecord>>)>,
    /// Serializes builds and cache writes per weight.
    locks: DashMap<u32, Arc<Mutex<()>>>,
    rebuild: bool,
}

impl EigenformStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Store backed by `dir`, created if missing. With `rebuild`, existing
    /// files are ignored and overwritten.
    pub fn with_dir(dir: impl Into<PathBuf>, rebuild: bool) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(EigenformStore { dir: Some(dir), rebuild, ..Self::default() })
    }

    pub fn cache_path(&self, k: u32) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("weight-{k}.txt")))
    }

    /// Eigenforms of weight `k` with at least `n` coefficients.
    pub fn get(&self, k: u32, n: usize) -> Result<Arc<Vec<EigenformRecord>>> {
        if let Some(f) = self.cached(k, n) {
            return Ok(f);
        }
        let lock = self.locks.entry(k).or_default().clone();
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(f) = self.cached(k, n) {
            return Ok(f);
        }
        if let Some(path) = self.cache_path(k) {
            if !self.rebuild && path.exists() {
                if let Ok((kk, nn, recs)) = read_eigenform_cache(&path) {
                    if kk == k && nn >= n && recs.len() == cusp_dimension(k) {
                        return Ok(self.remember(k, nn, recs));
                    }
                }
            }
        }
        let n = n.max(2 * cusp_dimension(k)).max(1);
        let recs = hecke_eigenforms(k, n)?;
        if let Some(path) = self.cache_path(k) {
            write_eigenform_cache(&path, k, n, &recs)?;
        }
        Ok(self.remember(k, n, recs))
    }

    fn cached(&self, k: u32, n: usize) -> Option<Arc<Vec<EigenformRecord>>> {
        self.mem.get(&k).filter(|e| e.0 >= n).map(|e| e.1.clone())
    }

    fn remember(&self, k: u32, n: usize, recs: Vec<EigenformRecord>) -> Arc<Vec<EigenformRecord>> {
        let arc = Arc::new(recs);
        self.mem.insert(k, (n, arc.clone()));
        arc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        let expect = [(4, 0), (10, 0), (12, 1), (14, 0), (24, 2), (26, 1), (36, 3), (38, 2)];
        for (k, d) in expect {
            assert_eq!(cusp_dimension(k), d, "k={k}");
        }
    }

    #[test]
    fn delta_coefficients() {
        let b = cusp_basis(12, 10).unwrap();
        let tau_n: Vec<i64> = vec![0, 1, -24, 252, -1472, 4830, -6048, -16744, 84480, -113643, -115920];
        for (nn, &t) in tau_n.iter().enumerate() {
            assert_eq!(b.rows[0][nn], BigInt::from(t));
        }
    }

    #[test]
    fn berkowitz_small() {
        // [[2, 1], [1, 3]] has det(λ − M) = λ² − 5λ + 5
        let m = vec![vec![BigInt::from(2), BigInt::from(1)], vec![BigInt::from(1), BigInt::from(3)]];
        let p = char_poly(&m);
        assert_eq!(p, vec![BigInt::from(5), BigInt::from(-5), BigInt::from(1)]);
        let m3: Vec<Vec<BigInt>> = [[1, 2, 0], [0, 3, 1], [4, 0, 2]]
            .iter()
            .map(|r| r.iter().map(|&v| BigInt::from(v)).collect())
            .collect();
        // λ³ − 6λ² + 11λ − 14
        assert_eq!(char_poly(&m3), vec![BigInt::from(-14), BigInt::from(11), BigInt::from(-6), BigInt::from(1)]);
    }

    #[test]
    fn newton_correction_is_small_at_roots() {
        let p = vec![BigInt::from(-2), BigInt::from(0), BigInt::from(1)];
        let r = 2f64.sqrt();
        let d = newton_correction(&p, r).unwrap();
        assert!(d.abs() < 1e-15);
        let d = newton_correction(&p, 1.5).unwrap();
        assert!((d - (0.25 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn scaled_conversion_survives_huge_integers() {
        let b = BigInt::from(3) << 2000u32;
        let v = scaled_f64(&b, 2000.0 * LN_2);
        assert!((v - 3.0).abs() < 1e-12);
        assert_eq!(scaled_f64(&-b.clone(), 2000.0 * LN_2).signum(), -1.0);
    }

    #[test]
    fn cache_round_trip() {
        let forms = hecke_eigenforms(24, 30).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w24.txt");
        write_eigenform_cache(&p, 24, 30, &forms).unwrap();
        let (k, n, back) = read_eigenform_cache(&p).unwrap();
        assert_eq!((k, n, back.len()), (24, 30, 2));
        for (x, y) in forms.iter().zip(&back) {
            for nn in 1..=30 {
                assert_eq!(x.a[nn], y.a[nn]);
            }
        }
        std::fs::write(&p, "holomoment-eigenforms v0\n24 30 2\n").unwrap();
        assert!(matches!(read_eigenform_cache(&p), Err(Error::Cache(_))));
    }
}
