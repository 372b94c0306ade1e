//! Fixed-precision arithmetic in the unramified ring O_E = Z_p[x]/(g) mod p^N,
//! its residue field, and p-adic linear solving.

use serde::Serialize;
use thiserror::Error;

/// Largest supported degree of O_E over Z_p.
pub const MAX_EXT: usize = 6;

/// Valuation with `VAL_INF` standing for "zero at the available precision".
pub type Val = u32;
pub const VAL_INF: Val = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContextError {
    #[error("p = {0} is not an odd prime")]
    BadPrime(u64),
    #[error("ext_degree {ext} is not a positive multiple of f = {f}")]
    BadExtDegree { ext: usize, f: usize },
    #[error("ext_degree {0} exceeds the supported maximum {MAX_EXT}")]
    ExtTooLarge(usize),
    #[error("precision N = {n} too large for p = {p} (maximum {max})")]
    PrecisionTooLarge { p: u64, n: u32, max: u32 },
    #[error("{0} must be at least 1")]
    NonPositive(&'static str),
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Residue word: elements of O_E mod p^N are stored as u128 coordinates.
pub type Word = u128;

/// Largest n with p^n < 2^126 and p^⌈n/2⌉ < 2^64, so sums fit in a word and products
/// can be formed from 64-bit halves.
pub fn max_precision(p: u64) -> u32 {
    let mut n = 0;
    loop {
        let next = n + 1;
        let fits = pow_word_checked(p, next).is_some_and(|m| m < 1 << 126)
            && pow_word_checked(p, next.div_ceil(2)).is_some_and(|b| b < 1 << 64);
        if !fits {
            return n;
        }
        n = next;
    }
}

fn pow_word_checked(p: u64, e: u32) -> Option<Word> {
    (0..e).try_fold(1 as Word, |acc, _| acc.checked_mul(p as Word))
}

pub fn pow_u64(p: u64, e: u32) -> u64 {
    (0..e).fold(1u64, |acc, _| acc * p)
}

pub fn pow_word(p: u64, e: u32) -> Word {
    pow_word_checked(p, e).expect("power fits in a word")
}

fn limbs(p: u64, prec: u32) -> (Word, Word) {
    let h = prec.div_ceil(2);
    (pow_word(p, h), pow_word(p, prec - h))
}

/// p-adic valuation of a nonzero integer.
pub fn vp_int(mut n: i128, p: u64) -> u32 {
    assert!(n != 0);
    let p = p as i128;
    let mut v = 0;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    v
}

/// Smallest integer >= 2 generating (Z/p^2)^x.
pub fn smallest_generator_mod_p2(p: u64) -> u64 {
    let m = p * p;
    let order = p * (p - 1);
    (2..m)
        .find(|&g| {
            if g % p == 0 {
                return false;
            }
            let mut x = 1u64;
            for k in 1..=order {
                x = x * g % m;
                if x == 1 {
                    return k == order;
                }
            }
            false
        })
        .expect("a generator exists for odd p")
}

// Polynomials over F_p, coefficient vectors low to high.

fn fp_trim(a: &mut Vec<u64>) {
    while a.last() == Some(&0) {
        a.pop();
    }
}

fn fp_inv(a: u64, p: u64) -> u64 {
    let mut r = 1;
    let mut b = a % p;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    r
}

fn fp_polymod(a: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    let mut r = a.to_vec();
    fp_trim(&mut r);
    let dm = m.len() - 1;
    let lead_inv = fp_inv(m[dm], p);
    while r.len() > dm {
        let dr = r.len() - 1;
        let c = r[dr] * lead_inv % p;
        for i in 0..=dm {
            let idx = dr - dm + i;
            r[idx] = (r[idx] + p - c * m[i] % p) % p;
        }
        fp_trim(&mut r);
    }
    r
}

fn fp_mulmod(a: &[u64], b: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut r = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            r[i + j] = (r[i + j] + x * y) % p;
        }
    }
    fp_polymod(&r, m, p)
}

fn fp_gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    fp_trim(&mut a);
    fp_trim(&mut b);
    while !b.is_empty() {
        let r = fp_polymod(&a, &b, p);
        a = b;
        b = r;
    }
    a
}

/// Ben-Or irreducibility test for a monic polynomial over F_p.
pub fn is_irreducible_fp(g: &[u64], p: u64) -> bool {
    let d = g.len() - 1;
    if d == 1 {
        return true;
    }
    let x = vec![0, 1];
    let mut xp = x.clone();
    for _ in 1..=d / 2 {
        let mut r = vec![1u64];
        let mut base = xp.clone();
        let mut e = p;
        while e > 0 {
            if e & 1 == 1 {
                r = fp_mulmod(&r, &base, g, p);
            }
            base = fp_mulmod(&base, &base, g, p);
            e >>= 1;
        }
        xp = r;
        let mut diff = xp.clone();
        diff.resize(diff.len().max(2), 0);
        diff[1] = (diff[1] + p - 1) % p;
        let gc = fp_gcd(g, &diff, p);
        if gc.len() > 1 {
            return false;
        }
    }
    true
}

/// Lexicographically smallest monic irreducible polynomial of degree `e` over F_p,
/// ordering candidates by the integer sum_i c_i p^i of their lower coefficients.
pub fn smallest_irreducible(p: u64, e: usize) -> Vec<u64> {
    if e == 1 {
        return vec![0, 1];
    }
    let total = pow_u64(p, e as u32);
    for code in 0..total {
        let mut g = Vec::with_capacity(e + 1);
        let mut c = code;
        for _ in 0..e {
            g.push(c % p);
            c /= p;
        }
        g.push(1);
        if g[0] != 0 && is_irreducible_fp(&g, p) {
            return g;
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}

/// Element of O_E mod p^N, coefficients in the basis 1, x, ..., x^(e-1).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default)]
pub struct OElement(pub [Word; MAX_EXT]);

/// Element of the residue field k_E = F_p[x]/(g mod p).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default)]
pub struct ResidueElement(pub [u64; MAX_EXT]);

/// Arithmetic of O_E at a fixed absolute precision.
#[derive(Clone, Debug)]
pub struct Ring {
    p: u64,
    ext: usize,
    prec: u32,
    modulus: Word,
    // p^⌈N/2⌉ and p^(N − ⌈N/2⌉), the limb sizes used in mulmod
    half: Word,
    upper: Word,
    // g(x) = x^e + sum_{i<e} g[i] x^i
    g: [u64; MAX_EXT],
}

impl Ring {
    pub fn new(p: u64, ext: usize, prec: u32) -> Result<Self, ContextError> {
        if p == 2 || !is_prime(p) {
            return Err(ContextError::BadPrime(p));
        }
        if ext == 0 {
            return Err(ContextError::NonPositive("ext_degree"));
        }
        if ext > MAX_EXT {
            return Err(ContextError::ExtTooLarge(ext));
        }
        if prec == 0 {
            return Err(ContextError::NonPositive("N"));
        }
        let max = max_precision(p);
        if prec > max {
            return Err(ContextError::PrecisionTooLarge { p, n: prec, max });
        }
        let gp = smallest_irreducible(p, ext);
        let mut g = [0u64; MAX_EXT];
        g[..ext].copy_from_slice(&gp[..ext]);
        let (half, upper) = limbs(p, prec);
        Ok(Ring {
            p,
            ext,
            prec,
            modulus: pow_word(p, prec),
            half,
            upper,
            g,
        })
    }

    /// Same ring at a different precision.
    pub fn with_precision(&self, prec: u32) -> Result<Self, ContextError> {
        let max = max_precision(self.p);
        if prec == 0 || prec > max {
            return Err(ContextError::PrecisionTooLarge {
                p: self.p,
                n: prec,
                max,
            });
        }
        let (half, upper) = limbs(self.p, prec);
        Ok(Ring {
            prec,
            modulus: pow_word(self.p, prec),
            half,
            upper,
            ..self.clone()
        })
    }

    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn ext(&self) -> usize {
        self.ext
    }
    pub fn precision(&self) -> u32 {
        self.prec
    }
    pub fn modulus(&self) -> Word {
        self.modulus
    }
    /// Lower coefficients of the defining polynomial g.
    pub fn defining_poly(&self) -> Vec<u64> {
        let mut v = self.g[..self.ext].to_vec();
        v.push(1);
        v
    }

    #[inline]
    fn mulmod(&self, a: Word, b: Word) -> Word {
        if self.modulus <= u64::MAX as Word {
            return a * b % self.modulus;
        }
        // a = a0 + a1·B, b = b0 + b1·B with B = p^⌈N/2⌉; B² ≡ 0
        let bb = self.half;
        let (a0, a1, b0, b1) = (a % bb, a / bb, b % bb, b / bb);
        let lo = a0 * b0;
        let (c0, c1) = (lo % bb, lo / bb);
        let u = self.upper;
        let mid = (c1 % u + a0 * b1 % u + a1 * b0 % u) % u;
        c0 + mid * bb
    }
    #[inline]
    fn addmod(&self, a: Word, b: Word) -> Word {
        let s = a + b;
        if s >= self.modulus {
            s - self.modulus
        } else {
            s
        }
    }
    #[inline]
    fn submod(&self, a: Word, b: Word) -> Word {
        if a >= b {
            a - b
        } else {
            a + self.modulus - b
        }
    }

    pub fn zero(&self) -> OElement {
        OElement::default()
    }
    pub fn one(&self) -> OElement {
        self.from_int(1)
    }
    pub fn from_int(&self, n: i128) -> OElement {
        let m = self.modulus as i128;
        let mut o = OElement::default();
        o.0[0] = n.rem_euclid(m) as Word;
        o
    }
    /// Element from coefficients in the basis 1, x, ..., reduced mod p^N.
    pub fn from_coeffs(&self, c: &[i128]) -> OElement {
        assert!(c.len() <= self.ext);
        let m = self.modulus as i128;
        let mut o = OElement::default();
        for (i, &x) in c.iter().enumerate() {
            o.0[i] = x.rem_euclid(m) as Word;
        }
        o
    }
    pub fn coeffs<'a>(&self, x: &'a OElement) -> &'a [Word] {
        &x.0[..self.ext]
    }
    pub fn p_power(&self, e: u32) -> OElement {
        if e >= self.prec {
            return self.zero();
        }
        self.from_int(pow_word(self.p, e) as i128)
    }

    pub fn is_zero(&self, x: &OElement) -> bool {
        x.0[..self.ext].iter().all(|&c| c == 0)
    }

    pub fn add(&self, a: &OElement, b: &OElement) -> OElement {
        let mut r = OElement::default();
        for i in 0..self.ext {
            r.0[i] = self.addmod(a.0[i], b.0[i]);
        }
        r
    }
    pub fn sub(&self, a: &OElement, b: &OElement) -> OElement {
        let mut r = OElement::default();
        for i in 0..self.ext {
            r.0[i] = self.submod(a.0[i], b.0[i]);
        }
        r
    }
    pub fn neg(&self, a: &OElement) -> OElement {
        self.sub(&self.zero(), a)
    }
    pub fn mul_scalar(&self, a: &OElement, s: u64) -> OElement {
        let s = s as Word % self.modulus;
        let mut r = OElement::default();
        for i in 0..self.ext {
            r.0[i] = self.mulmod(a.0[i], s);
        }
        r
    }
    pub fn mul(&self, a: &OElement, b: &OElement) -> OElement {
        if self.ext == 1 {
            let mut r = OElement::default();
            r.0[0] = self.mulmod(a.0[0], b.0[0]);
            return r;
        }
        let e = self.ext;
        let mut prod = [0 as Word; 2 * MAX_EXT];
        for i in 0..e {
            if a.0[i] == 0 {
                continue;
            }
            for j in 0..e {
                prod[i + j] = self.addmod(prod[i + j], self.mulmod(a.0[i], b.0[j]));
            }
        }
        // x^e = -sum g_i x^i
        for top in (e..2 * e - 1).rev() {
            let c = prod[top];
            if c == 0 {
                continue;
            }
            prod[top] = 0;
            for i in 0..e {
                let t = self.mulmod(c, self.g[i] as Word);
                prod[top - e + i] = self.submod(prod[top - e + i], t);
            }
        }
        let mut r = OElement::default();
        r.0[..e].copy_from_slice(&prod[..e]);
        r
    }
    pub fn pow(&self, a: &OElement, mut e: u64) -> OElement {
        let mut r = self.one();
        let mut b = *a;
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(&r, &b);
            }
            b = self.mul(&b, &b);
            e >>= 1;
        }
        r
    }

    /// Largest v <= N with p^v | x; `VAL_INF` when x = 0 mod p^N.
    pub fn valuation(&self, x: &OElement) -> Val {
        let mut v = VAL_INF;
        for &c in &x.0[..self.ext] {
            if c != 0 {
                let mut c = c;
                let mut k = 0;
                let p = self.p as Word;
                while c % p == 0 {
                    c /= p;
                    k += 1;
                }
                v = v.min(k);
            }
        }
        v
    }
    pub fn is_unit(&self, x: &OElement) -> bool {
        self.valuation(x) == 0
    }

    /// x / p^v, assuming valuation(x) >= v. The top v digits of the result are zero.
    pub fn div_p_power(&self, x: &OElement, v: u32) -> Option<OElement> {
        if v == 0 {
            return Some(*x);
        }
        if v >= self.prec {
            return if self.is_zero(x) {
                Some(self.zero())
            } else {
                None
            };
        }
        let d = pow_word(self.p, v);
        let mut r = OElement::default();
        for i in 0..self.ext {
            if !x.0[i].is_multiple_of(d) {
                return None;
            }
            r.0[i] = x.0[i] / d;
        }
        Some(r)
    }

    /// Inverse of a unit via residue-field inversion and Newton lifting.
    pub fn inv_unit(&self, u: &OElement) -> Option<OElement> {
        if !self.is_unit(u) {
            return None;
        }
        let k = self.residue_field();
        let r = k.inv(&self.reduce(u))?;
        let mut x = self.lift(&r);
        let two = self.from_int(2);
        let mut correct = 1u32;
        while correct < self.prec {
            let ux = self.mul(u, &x);
            x = self.mul(&x, &self.sub(&two, &ux));
            correct *= 2;
        }
        Some(x)
    }

    /// Split x = p^v * unit; `None` when x = 0 at precision.
    pub fn split(&self, x: &OElement) -> Option<(Val, OElement)> {
        let v = self.valuation(x);
        if v == VAL_INF {
            return None;
        }
        Some((v, self.div_p_power(x, v).expect("valuation divides")))
    }

    pub fn residue_field(&self) -> ResidueField {
        let mut g = [0u64; MAX_EXT];
        for i in 0..self.ext {
            g[i] = self.g[i] % self.p;
        }
        ResidueField {
            p: self.p,
            ext: self.ext,
            g,
        }
    }
    pub fn reduce(&self, x: &OElement) -> ResidueElement {
        let mut r = ResidueElement::default();
        for i in 0..self.ext {
            r.0[i] = (x.0[i] % self.p as Word) as u64;
        }
        r
    }
    /// Lift with coefficients in [0, p).
    pub fn lift(&self, x: &ResidueElement) -> OElement {
        let mut r = OElement::default();
        for i in 0..self.ext {
            r.0[i] = x.0[i] as Word;
        }
        r
    }
    /// Reduce to a coarser ring with the same defining polynomial.
    pub fn truncate_to(&self, x: &OElement, target: &Ring) -> OElement {
        let mut r = OElement::default();
        for i in 0..self.ext {
            r.0[i] = x.0[i] % target.modulus;
        }
        r
    }

    /// Base-p little-endian digits of each coordinate, joined with ','.
    pub fn digit_string(&self, x: &OElement) -> String {
        let mut parts = Vec::with_capacity(self.ext);
        for &c in &x.0[..self.ext] {
            let mut digits = Vec::with_capacity(self.prec as usize);
            let mut c = c;
            let p = self.p as Word;
            for _ in 0..self.prec {
                digits.push(c % p);
                c /= p;
            }
            // single characters up to base 36, dot-separated decimal digits beyond
            let s = if self.p <= 36 {
                digits
                    .iter()
                    .map(|&d| char::from_digit(d as u32, 36).expect("digit < 36"))
                    .collect::<String>()
            } else {
                digits
                    .iter()
                    .map(|d| d.to_string())
                    .collect::<Vec<_>>()
                    .join(".")
            };
            parts.push(s);
        }
        parts.join(",")
    }
}

/// k_E = F_p[x]/(g mod p).
#[derive(Clone, Debug)]
pub struct ResidueField {
    p: u64,
    ext: usize,
    g: [u64; MAX_EXT],
}

impl ResidueField {
    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn ext(&self) -> usize {
        self.ext
    }
    pub fn order(&self) -> u64 {
        pow_u64(self.p, self.ext as u32)
    }
    pub fn zero(&self) -> ResidueElement {
        ResidueElement::default()
    }
    pub fn one(&self) -> ResidueElement {
        self.from_int(1)
    }
    pub fn from_int(&self, n: i64) -> ResidueElement {
        let mut r = ResidueElement::default();
        r.0[0] = n.rem_euclid(self.p as i64) as u64;
        r
    }
    /// The element with index `code` in the enumeration sum_i c_i p^i.
    pub fn from_index(&self, mut code: u64) -> ResidueElement {
        let mut r = ResidueElement::default();
        for i in 0..self.ext {
            r.0[i] = code % self.p;
            code /= self.p;
        }
        r
    }
    pub fn elements(&self) -> impl Iterator<Item = ResidueElement> + '_ {
        (0..self.order()).map(move |c| self.from_index(c))
    }
    pub fn is_zero(&self, a: &ResidueElement) -> bool {
        a.0[..self.ext].iter().all(|&c| c == 0)
    }
    pub fn add(&self, a: &ResidueElement, b: &ResidueElement) -> ResidueElement {
        let mut r = ResidueElement::default();
        for i in 0..self.ext {
            r.0[i] = (a.0[i] + b.0[i]) % self.p;
        }
        r
    }
    pub fn sub(&self, a: &ResidueElement, b: &ResidueElement) -> ResidueElement {
        let mut r = ResidueElement::default();
        for i in 0..self.ext {
            r.0[i] = (a.0[i] + self.p - b.0[i]) % self.p;
        }
        r
    }
    pub fn neg(&self, a: &ResidueElement) -> ResidueElement {
        self.sub(&self.zero(), a)
    }
    pub fn mul(&self, a: &ResidueElement, b: &ResidueElement) -> ResidueElement {
        let e = self.ext;
        let p = self.p;
        let mut prod = [0u64; 2 * MAX_EXT];
        for i in 0..e {
            for j in 0..e {
                prod[i + j] = (prod[i + j] + a.0[i] * b.0[j]) % p;
            }
        }
        for top in (e..2 * e - 1).rev() {
            let c = prod[top];
            prod[top] = 0;
            for i in 0..e {
                prod[top - e + i] = (prod[top - e + i] + p * p - c * self.g[i] % p) % p;
            }
        }
        let mut r = ResidueElement::default();
        r.0[..e].copy_from_slice(&prod[..e]);
        r
    }
    pub fn pow(&self, a: &ResidueElement, mut e: u64) -> ResidueElement {
        let mut r = self.one();
        let mut b = *a;
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(&r, &b);
            }
            b = self.mul(&b, &b);
            e >>= 1;
        }
        r
    }
    pub fn inv(&self, a: &ResidueElement) -> Option<ResidueElement> {
        if self.is_zero(a) {
            return None;
        }
        Some(self.pow(a, self.order() - 2))
    }
    pub fn is_square(&self, a: &ResidueElement) -> bool {
        self.is_zero(a) || self.pow(a, (self.order() - 1) / 2) == self.one()
    }
}

/// The ambient arithmetic shared by every module.
#[derive(Clone, Debug)]
pub struct GlobalContext {
    pub p: u64,
    pub f: usize,
    pub ext_degree: usize,
    pub n: u32,
    pub d: usize,
    pub chi_delta: u64,
    pub seed: u64,
    ring: Ring,
}

impl GlobalContext {
    pub fn ring(&self) -> &Ring {
        &self.ring
    }
}

pub fn make_context(
    p: u64,
    f: usize,
    ext_degree: usize,
    n: u32,
    d: usize,
    seed: u64,
) -> Result<GlobalContext, ContextError> {
    if p == 2 || !is_prime(p) {
        return Err(ContextError::BadPrime(p));
    }
    if f == 0 {
        return Err(ContextError::NonPositive("f"));
    }
    if d == 0 {
        return Err(ContextError::NonPositive("D"));
    }
    if ext_degree == 0 || !ext_degree.is_multiple_of(f) {
        return Err(ContextError::BadExtDegree { ext: ext_degree, f });
    }
    let ring = Ring::new(p, ext_degree, n)?;
    Ok(GlobalContext {
        p,
        f,
        ext_degree,
        n,
        d,
        chi_delta: smallest_generator_mod_p2(p),
        seed,
        ring,
    })
}

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize)]
pub enum LinearError {
    #[error(
        "system is inconsistent at available precision (row {row}, residual valuation {valuation})"
    )]
    NoSolution { row: usize, valuation: Val },
    #[error("all candidate pivots vanish at available precision (rank {rank} < {needed})")]
    PrecisionExhausted { rank: usize, needed: usize },
}

#[derive(Debug, Clone)]
pub struct LinearSolution {
    pub x: Vec<OElement>,
    /// Valuation of the pivot product.
    pub loss: u32,
    pub rank: usize,
    /// Largest single pivot valuation; the solution is determined mod p^(N - max_pivot).
    pub max_pivot: u32,
}

/// Solve M x = b mod p^N by elimination with minimal-valuation pivots.
///
/// When the system is consistent the returned x satisfies M x = b exactly mod p^N.
/// With `full_rank` the column rank must be complete, otherwise free variables are set to 0.
pub fn solve_linear_general(
    ring: &Ring,
    m: &[Vec<OElement>],
    b: &[OElement],
    full_rank: bool,
) -> Result<LinearSolution, LinearError> {
    let rows = m.len();
    assert_eq!(rows, b.len());
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut a: Vec<Vec<OElement>> = m.to_vec();
    let mut rhs = b.to_vec();
    let mut col_perm: Vec<usize> = (0..cols).collect();
    let mut pivots: Vec<(Val, OElement)> = Vec::new();
    let mut rank = 0;
    while rank < rows.min(cols) {
        let mut best: Option<(Val, usize, usize)> = None;
        for r in rank..rows {
            for c in rank..cols {
                let v = ring.valuation(&a[r][c]);
                if v != VAL_INF && best.is_none_or(|(bv, _, _)| v < bv) {
                    best = Some((v, r, c));
                    if v == 0 {
                        break;
                    }
                }
            }
            if matches!(best, Some((0, _, _))) {
                break;
            }
        }
        let Some((v, pr, pc)) = best else { break };
        a.swap(rank, pr);
        rhs.swap(rank, pr);
        for row in a.iter_mut() {
            row.swap(rank, pc);
        }
        col_perm.swap(rank, pc);
        let unit = ring
            .div_p_power(&a[rank][rank], v)
            .expect("pivot valuation");
        let uinv = ring.inv_unit(&unit).expect("unit part invertible");
        for r in rank + 1..rows {
            if ring.is_zero(&a[r][rank]) {
                continue;
            }
            let q = ring
                .div_p_power(&a[r][rank], v)
                .expect("minimal pivot divides");
            let mult = ring.mul(&q, &uinv);
            for c in rank..cols {
                let t = ring.mul(&mult, &a[rank][c]);
                a[r][c] = ring.sub(&a[r][c], &t);
            }
            let t = ring.mul(&mult, &rhs[rank]);
            rhs[r] = ring.sub(&rhs[r], &t);
        }
        pivots.push((v, uinv));
        rank += 1;
    }
    for (r, val) in rhs.iter().enumerate().skip(rank) {
        if !ring.is_zero(val) {
            return Err(LinearError::NoSolution {
                row: r,
                valuation: ring.valuation(val),
            });
        }
    }
    if full_rank && rank < cols {
        return Err(LinearError::PrecisionExhausted { rank, needed: cols });
    }
    let mut y = vec![ring.zero(); cols];
    for i in (0..rank).rev() {
        let mut s = rhs[i];
        for c in i + 1..cols {
            let t = ring.mul(&a[i][c], &y[c]);
            s = ring.sub(&s, &t);
        }
        let (v, uinv) = pivots[i];
        let q = ring.div_p_power(&s, v).ok_or(LinearError::NoSolution {
            row: i,
            valuation: ring.valuation(&s),
        })?;
        y[i] = ring.mul(&q, &uinv);
    }
    let mut x = vec![ring.zero(); cols];
    for (i, &c) in col_perm.iter().enumerate() {
        x[c] = y[i];
    }
    let loss = pivots.iter().map(|(v, _)| *v).sum();
    let max_pivot = pivots.iter().map(|(v, _)| *v).max().unwrap_or(0);
    Ok(LinearSolution {
        x,
        loss,
        rank,
        max_pivot,
    })
}

/// Solve with full column rank required.
pub fn solve_linear(
    ring: &Ring,
    m: &[Vec<OElement>],
    b: &[OElement],
) -> Result<LinearSolution, LinearError> {
    solve_linear_general(ring, m, b, true)
}

/// Rank of a matrix over k_E.
pub fn residue_rank(k: &ResidueField, m: &[Vec<ResidueElement>]) -> usize {
    let mut a = m.to_vec();
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut rank = 0;
    for c in 0..cols {
        let Some(pr) = (rank..rows).find(|&r| !k.is_zero(&a[r][c])) else {
            continue;
        };
        a.swap(rank, pr);
        let inv = k.inv(&a[rank][c]).expect("nonzero");
        for r in 0..rows {
            if r != rank && !k.is_zero(&a[r][c]) {
                let f = k.mul(&a[r][c], &inv);
                for cc in c..cols {
                    let t = k.mul(&f, &a[rank][cc]);
                    a[r][cc] = k.sub(&a[r][cc], &t);
                }
            }
        }
        rank += 1;
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_delta_examples() {
        assert_eq!(make_context(3, 1, 1, 16, 12, 0).unwrap().chi_delta, 2);
        assert_eq!(make_context(5, 1, 1, 10, 12, 0).unwrap().chi_delta, 2);
        assert_eq!(smallest_generator_mod_p2(7), 3);
        assert!(matches!(
            make_context(2, 1, 1, 8, 8, 0),
            Err(ContextError::BadPrime(2))
        ));
        assert!(matches!(
            make_context(9, 1, 1, 8, 8, 0),
            Err(ContextError::BadPrime(9))
        ));
        assert!(matches!(
            make_context(3, 2, 3, 8, 8, 0),
            Err(ContextError::BadExtDegree { .. })
        ));
    }

    #[test]
    fn irreducible_choice() {
        assert_eq!(smallest_irreducible(3, 2), vec![1, 0, 1]);
        assert_eq!(smallest_irreducible(5, 2), vec![2, 0, 1]);
        // x^3 + 2x + 1 is the first cubic in this order over F_3
        assert_eq!(smallest_irreducible(3, 3), vec![1, 2, 0, 1]);
    }

    #[test]
    fn valuations() {
        let r = Ring::new(3, 1, 16).unwrap();
        assert_eq!(r.valuation(&r.zero()), VAL_INF);
        assert_eq!(r.valuation(&r.from_int(3)), 1);
        assert_eq!(r.valuation(&r.from_int(1 - 4)), 1);
        assert_eq!(r.valuation(&r.from_int(18)), 2);
    }

    #[test]
    fn inverse_in_extension() {
        let r = Ring::new(3, 2, 12).unwrap();
        let u = r.from_coeffs(&[2, 5]);
        let ui = r.inv_unit(&u).unwrap();
        assert_eq!(r.mul(&u, &ui), r.one());
        assert!(r.inv_unit(&r.from_int(3)).is_none());
    }

    #[test]
    fn solve_identity_and_scaled() {
        let r = Ring::new(5, 1, 10).unwrap();
        let id: Vec<Vec<OElement>> = (0..3)
            .map(|i| (0..3).map(|j| r.from_int((i == j) as i128)).collect())
            .collect();
        let b: Vec<OElement> = (0..3).map(|i| r.from_int(7 * i + 1)).collect();
        let s = solve_linear(&r, &id, &b).unwrap();
        assert_eq!(s.x, b);
        assert_eq!(s.loss, 0);
        let pid: Vec<Vec<OElement>> = id
            .iter()
            .map(|row| row.iter().map(|x| r.mul_scalar(x, 5)).collect())
            .collect();
        let pb: Vec<OElement> = b.iter().map(|x| r.mul_scalar(x, 5)).collect();
        let s = solve_linear(&r, &pid, &pb).unwrap();
        assert_eq!(s.loss, 3);
        for (x, y) in s.x.iter().zip(&b) {
            assert_eq!(r.truncate_to(x, &r.with_precision(9).unwrap()), *y);
        }
    }

    #[test]
    fn inconsistent_detected() {
        let r = Ring::new(3, 1, 8).unwrap();
        let m = vec![vec![r.from_int(3)]];
        let b = vec![r.from_int(1)];
        assert!(matches!(
            solve_linear(&r, &m, &b),
            Err(LinearError::NoSolution { .. })
        ));
        let z = vec![vec![r.zero()]];
        assert!(matches!(
            solve_linear(&r, &z, &[r.zero()]),
            Err(LinearError::PrecisionExhausted { .. })
        ));
    }

    #[test]
    fn wide_products_match_direct() {
        let p = 3u64;
        let n = max_precision(p);
        assert!(n >= 70);
        let r = Ring::new(p, 1, n).unwrap();
        let m = r.with_precision(38).unwrap().modulus();
        for (a, b) in [
            (m - 1, m - 1),
            (12345678901234567, 98765432109876543),
            (m / 3 + 7, m / 5 + 11),
        ] {
            let x = r.mul(&r.from_int(a as i128), &r.from_int(b as i128));
            let want = ((a * b) % r.modulus()) as i128;
            assert_eq!(x, r.from_int(want));
        }
        // (1 + p^h)^2 = 1 + 2 p^h + p^2h
        let h = n.div_ceil(2);
        let u = r.add(&r.one(), &r.p_power(h));
        let want = r.add(&r.one(), &r.mul_scalar(&r.p_power(h), 2));
        assert_eq!(r.mul(&u, &u), want);
        let inv = r.inv_unit(&r.from_int(-2)).unwrap();
        assert_eq!(r.mul(&inv, &r.from_int(-2)), r.one());
    }

    #[test]
    fn digits_little_endian() {
        let r = Ring::new(3, 1, 4).unwrap();
        assert_eq!(r.digit_string(&r.from_int(5)), "2100");
        assert_eq!(r.digit_string(&r.from_int(-1)), "2222");
    }
}
