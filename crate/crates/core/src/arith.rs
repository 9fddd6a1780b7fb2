//! Exact elementary arithmetic and Kloosterman sums.
//!
//! `S(n, m; c) = Σ*_{b mod c} e((n b + m b̄)/c)`, the sum running over residues
//! coprime to `c`. With the convention `S(n, m; 1) = 1` the Petersson
//! Kloosterman series can start at `c = 1`.

use std::f64::consts::TAU;
use std::sync::LazyLock;

use dashmap::DashMap;
use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Moduli above this use the factored evaluation when they split.
pub const FAST_PATH_THRESHOLD: u64 = 10_000;

/// Trial-division factorization, primes in increasing order.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    if n < 2 {
        return out;
    }
    for p in [2u64, 3] {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
    }
    let mut p = 5u64;
    while p * p <= n {
        for q in [p, p + 2] {
            if n % q == 0 {
                let mut e = 0;
                while n % q == 0 {
                    n /= q;
                    e += 1;
                }
                out.push((q, e));
            }
        }
        p += 6;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Number of positive divisors.
pub fn tau(n: u64) -> u64 {
    factorize(n).iter().map(|&(_, e)| u64::from(e) + 1).product()
}

/// Möbius function; `moebius(1) = 1`.
pub fn moebius(n: u64) -> i64 {
    let f = factorize(n);
    if f.iter().any(|&(_, e)| e > 1) {
        0
    } else if f.len() % 2 == 0 {
        1
    } else {
        -1
    }
}

pub fn gcd3(a: u64, b: u64, c: u64) -> u64 {
    a.gcd(&b).gcd(&c)
}

/// Table of `moebius(n)` for `0 <= n <= limit` (entry 0 unused).
pub fn moebius_table(limit: usize) -> Vec<i8> {
    let mut mu = vec![1i8; limit + 1];
    let mut is_composite = vec![false; limit + 1];
    if limit >= 1 {
        mu[0] = 0;
    }
    for p in 2..=limit {
        if is_composite[p] {
            continue;
        }
        for j in (p..=limit).step_by(p) {
            if j > p {
                is_composite[j] = true;
            }
            mu[j] = -mu[j];
        }
        let sq = p.saturating_mul(p);
        if sq <= limit {
            for j in (sq..=limit).step_by(sq) {
                mu[j] = 0;
            }
        }
    }
    mu
}

/// Primes up to and including `limit`.
pub fn primes_up_to(limit: usize) -> Vec<usize> {
    if limit < 2 {
        return Vec::new();
    }
    let mut sieve = vec![true; limit + 1];
    sieve[0] = false;
    sieve[1] = false;
    let mut p = 2;
    while p * p <= limit {
        if sieve[p] {
            for j in (p * p..=limit).step_by(p) {
                sieve[j] = false;
            }
        }
        p += 1;
    }
    (0..=limit).filter(|&i| sieve[i]).collect()
}

/// Which elementary function [`arithmetic_function`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArithmeticFunction {
    Tau,
    Moebius,
    Gcd3,
}

/// Evaluate `tau(n)`, `moebius(n)` or `gcd3(n, m, c)` on positive arguments.
pub fn arithmetic_function(kind: ArithmeticFunction, args: &[i64]) -> Result<i64> {
    let arity = match kind {
        ArithmeticFunction::Tau | ArithmeticFunction::Moebius => 1,
        ArithmeticFunction::Gcd3 => 3,
    };
    if args.len() != arity {
        return Err(Error::domain(format!(
            "{kind:?} takes {arity} argument(s), got {}",
            args.len()
        )));
    }
    if let Some(bad) = args.iter().find(|&&a| a <= 0) {
        return Err(Error::domain(format!("{kind:?} needs positive arguments, got {bad}")));
    }
    let a: Vec<u64> = args.iter().map(|&x| x as u64).collect();
    Ok(match kind {
        ArithmeticFunction::Tau => tau(a[0]) as i64,
        ArithmeticFunction::Moebius => moebius(a[0]),
        ArithmeticFunction::Gcd3 => gcd3(a[0], a[1], a[2]) as i64,
    })
}

/// Inverse of `b` modulo `c`, if it exists.
pub fn mod_inverse(b: u64, c: u64) -> Option<u64> {
    if c == 1 {
        return Some(0);
    }
    let g = (b as i128).extended_gcd(&(c as i128));
    if g.gcd != 1 {
        return None;
    }
    Some(g.x.rem_euclid(c as i128) as u64)
}

fn mulmod(a: u64, b: u64, c: u64) -> u64 {
    ((a as u128 * b as u128) % c as u128) as u64
}

/// A Kloosterman sum together with its Weil bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KloostermanValue {
    pub n: u64,
    pub m: u64,
    pub c: u64,
    pub value: f64,
    /// `tau(c) c^{1/2} gcd(n, m, c)^{1/2}`.
    pub weil: f64,
}

/// `tau(c) * sqrt(c) * sqrt(gcd(n, m, c))`.
pub fn weil_bound(n: u64, m: u64, c: u64) -> Result<f64> {
    if c == 0 {
        return Err(Error::domain("Kloosterman modulus must be positive"));
    }
    let g = gcd3(n, m, c);
    Ok(tau(c) as f64 * (c as f64).sqrt() * (g as f64).sqrt())
}

/// Direct summation; returns `(real, imaginary)` parts of the raw sum.
///
/// Uses one table of `e(j/c)` per call, so rounding error stays `O(c ulp)`.
pub fn kloosterman_direct(n: u64, m: u64, c: u64) -> Result<(f64, f64)> {
    if c == 0 {
        return Err(Error::domain("Kloosterman modulus must be positive"));
    }
    if c == 1 {
        return Ok((1.0, 0.0));
    }
    let n = n % c;
    let m = m % c;
    let table: Vec<(f64, f64)> = (0..c)
        .map(|j| {
            let t = TAU * j as f64 / c as f64;
            (t.cos(), t.sin())
        })
        .collect();
    let (mut re, mut im) = (0.0, 0.0);
    for b in 1..c {
        let Some(bbar) = mod_inverse(b, c) else {
            continue;
        };
        let idx = (mulmod(n, b, c) + mulmod(m, bbar, c)) % c;
        let (cr, ci) = table[idx as usize];
        re += cr;
        im += ci;
    }
    Ok((re, im))
}

/// `S(n, m; c1 c2) = S(n, m c̄2²; c1) S(n, m c̄1²; c2)` for coprime `c1`, `c2`,
/// each factor summed directly.
pub fn kloosterman_split(n: u64, m: u64, c1: u64, c2: u64) -> Result<f64> {
    if c1 == 0 || c2 == 0 {
        return Err(Error::domain("Kloosterman modulus must be positive"));
    }
    if c1.gcd(&c2) != 1 {
        return Err(Error::domain(format!("moduli {c1} and {c2} are not coprime")));
    }
    let inv2 = mod_inverse(c2 % c1, c1).unwrap_or(0);
    let inv1 = mod_inverse(c1 % c2, c2).unwrap_or(0);
    let m1 = mulmod(m % c1, mulmod(inv2, inv2, c1), c1);
    let m2 = mulmod(m % c2, mulmod(inv1, inv1, c2), c2);
    Ok(checked_real(n, m1, c1)? * checked_real(n, m2, c2)?)
}

fn checked_real(n: u64, m: u64, c: u64) -> Result<f64> {
    let (re, im) = kloosterman_direct(n, m, c)?;
    let tol = 1e-9 * c as f64;
    if im.abs() >= tol {
        return Err(Error::accuracy(
            format!("imaginary part of S({n},{m};{c})"),
            im.abs(),
            tol,
        ));
    }
    Ok(re)
}

/// Evaluate through the prime-power factorization of `c`, peeling one prime
/// power at a time with [`kloosterman_split`]'s identity.
pub fn kloosterman_factored(n: u64, m: u64, c: u64) -> Result<f64> {
    if c == 0 {
        return Err(Error::domain("Kloosterman modulus must be positive"));
    }
    let factors = factorize(c);
    if factors.len() < 2 {
        return checked_real(n, m, c);
    }
    let (p, e) = factors[0];
    let q = p.pow(e);
    let rest = c / q;
    let inv_rest = mod_inverse(rest % q, q).unwrap_or(0);
    let inv_q = mod_inverse(q % rest, rest).unwrap_or(0);
    let m1 = mulmod(m % q, mulmod(inv_rest, inv_rest, q), q);
    let m2 = mulmod(m % rest, mulmod(inv_q, inv_q, rest), rest);
    Ok(checked_real(n, m1, q)? * kloosterman_factored(n, m2, rest)?)
}

static KLOOSTERMAN_CACHE: LazyLock<DashMap<(u64, u64, u64), f64>> = LazyLock::new(DashMap::new);

/// Kloosterman sum `S(n, m; c)` (real), cached by `(n mod c, m mod c, c)`.
///
/// Moduli above [`FAST_PATH_THRESHOLD`] with at least two distinct prime
/// factors are evaluated through multiplicativity; everything else,
/// including all prime powers, by direct summation.
pub fn kloosterman(n: u64, m: u64, c: u64) -> Result<KloostermanValue> {
    if c == 0 {
        return Err(Error::domain("Kloosterman modulus must be positive"));
    }
    let key = (n % c, m % c, c);
    let weil = weil_bound(n, m, c)?;
    if let Some(v) = KLOOSTERMAN_CACHE.get(&key) {
        return Ok(KloostermanValue { n, m, c, value: *v, weil });
    }
    // computed outside the map so other keys are never blocked
    let value = if c > FAST_PATH_THRESHOLD && factorize(c).len() >= 2 {
        kloosterman_factored(key.0, key.1, c)?
    } else {
        checked_real(key.0, key.1, c)?
    };
    KLOOSTERMAN_CACHE.insert(key, value);
    Ok(KloostermanValue { n, m, c, value, weil })
}
