//! Truncated series O_E[[π]] mod π^D, the τ-indexed product ring with its twisted
//! Frobenius and Γ-action, and 2×2 matrices over both.

use crate::padic::{vp_int, OElement, Ring, Val, VAL_INF};

/// Σ c_j π^j mod π^D.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Series {
    pub c: Vec<OElement>,
}

/// Coordinate-wise 2×2 matrix over series, one block per τ-coordinate.
pub type SMat = [[Series; 2]; 2];
/// 2×2 matrix over O_E.
pub type OMat = [[OElement; 2]; 2];

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TauSeries {
    pub coords: Vec<Series>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TauMatrix {
    pub coords: Vec<SMat>,
}

/// Binomial coefficient C(c, j) mod p^N for an integer c, by descending product with
/// the p-parts of numerator and j! tracked exactly.
pub fn binomial_mod(ring: &Ring, c: i128, j: usize) -> OElement {
    let p = ring.p();
    let mut vnum = 0u32;
    let mut vden = 0u32;
    let mut num = ring.one();
    let mut den = ring.one();
    let pp = p as i128;
    for i in 0..j as i128 {
        let a = c - i;
        if a == 0 {
            return ring.zero();
        }
        let va = vp_int(a, p);
        vnum += va;
        num = ring.mul(&num, &ring.from_int(a / pp.pow(va)));
        let b = i + 1;
        let vb = vp_int(b, p);
        vden += vb;
        den = ring.mul(&den, &ring.from_int(b / pp.pow(vb)));
    }
    assert!(vnum >= vden, "binomial coefficient must be integral");
    let den = ring.inv_unit(&den).expect("unit denominator");
    let shift = vnum - vden;
    ring.mul(&ring.mul(&num, &den), &ring.p_power(shift))
}

/// Table T[j][n] = coefficient of π^n in t(π)^j for a substitution π ↦ t(π), t(0) = 0.
#[derive(Clone, Debug)]
pub struct SubstTable {
    rows: Vec<Vec<OElement>>,
}

/// Arithmetic of truncated series over a fixed ring.
#[derive(Clone, Debug)]
pub struct SeriesRing {
    ring: Ring,
    d: usize,
    phi_table: SubstTable,
}

impl SeriesRing {
    pub fn new(ring: Ring, d: usize) -> Self {
        let mut sr = SeriesRing {
            ring,
            d,
            phi_table: SubstTable { rows: Vec::new() },
        };
        let phi = sr.phi_pi();
        sr.phi_table = sr.subst_table(&phi);
        sr
    }
    pub fn ring(&self) -> &Ring {
        &self.ring
    }
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn zero(&self) -> Series {
        Series {
            c: vec![self.ring.zero(); self.d],
        }
    }
    pub fn constant(&self, x: OElement) -> Series {
        let mut s = self.zero();
        s.c[0] = x;
        s
    }
    pub fn one(&self) -> Series {
        self.constant(self.ring.one())
    }
    pub fn from_ints(&self, c: &[i128]) -> Series {
        let mut s = self.zero();
        for (j, &x) in c.iter().enumerate().take(self.d) {
            s.c[j] = self.ring.from_int(x);
        }
        s
    }
    /// π^j.
    pub fn monomial(&self, j: usize) -> Series {
        let mut s = self.zero();
        if j < self.d {
            s.c[j] = self.ring.one();
        }
        s
    }
    pub fn is_zero(&self, a: &Series) -> bool {
        a.c.iter().all(|x| self.ring.is_zero(x))
    }
    pub fn add(&self, a: &Series, b: &Series) -> Series {
        Series {
            c: a.c
                .iter()
                .zip(&b.c)
                .map(|(x, y)| self.ring.add(x, y))
                .collect(),
        }
    }
    pub fn sub(&self, a: &Series, b: &Series) -> Series {
        Series {
            c: a.c
                .iter()
                .zip(&b.c)
                .map(|(x, y)| self.ring.sub(x, y))
                .collect(),
        }
    }
    pub fn neg(&self, a: &Series) -> Series {
        self.sub(&self.zero(), a)
    }
    pub fn scale(&self, a: &Series, s: &OElement) -> Series {
        Series {
            c: a.c.iter().map(|x| self.ring.mul(x, s)).collect(),
        }
    }
    pub fn mul(&self, a: &Series, b: &Series) -> Series {
        let r = &self.ring;
        let mut out = self.zero();
        for (i, x) in a.c.iter().enumerate() {
            if r.is_zero(x) {
                continue;
            }
            for (j, y) in b.c.iter().enumerate().take(self.d - i) {
                if r.is_zero(y) {
                    continue;
                }
                let t = r.mul(x, y);
                out.c[i + j] = r.add(&out.c[i + j], &t);
            }
        }
        out
    }
    pub fn pow(&self, a: &Series, e: u32) -> Series {
        (0..e).fold(self.one(), |acc, _| self.mul(&acc, a))
    }
    /// Multiply by π^s (truncating).
    pub fn shift_up(&self, a: &Series, s: usize) -> Series {
        let mut out = self.zero();
        for j in 0..self.d.saturating_sub(s) {
            out.c[j + s] = a.c[j];
        }
        out
    }
    /// Inverse of a series with unit constant term.
    pub fn inv(&self, a: &Series) -> Option<Series> {
        let r = &self.ring;
        let u0 = r.inv_unit(&a.c[0])?;
        let mut out = self.zero();
        out.c[0] = u0;
        for n in 1..self.d {
            let mut s = r.zero();
            for j in 1..=n {
                let t = r.mul(&a.c[j], &out.c[n - j]);
                s = r.add(&s, &t);
            }
            out.c[n] = r.neg(&r.mul(&s, &u0));
        }
        Some(out)
    }
    /// Minimal coefficient valuation.
    pub fn valuation(&self, a: &Series) -> Val {
        a.c.iter()
            .map(|x| self.ring.valuation(x))
            .min()
            .unwrap_or(VAL_INF)
    }
    /// Index of the first coefficient that is nonzero at precision.
    pub fn order(&self, a: &Series) -> Option<usize> {
        a.c.iter().position(|x| !self.ring.is_zero(x))
    }

    /// φ(π) = (1+π)^p − 1.
    pub fn phi_pi(&self) -> Series {
        let p = self.ring.p() as usize;
        let mut s = self.zero();
        for j in 1..=p.min(self.d.saturating_sub(1)) {
            s.c[j] = binomial_mod(&self.ring, p as i128, j);
        }
        s
    }
    /// γ_c(π) = (1+π)^c − 1 = Σ_{j≥1} C(c, j) π^j.
    pub fn gamma_pi(&self, c: u64) -> Series {
        let mut s = self.zero();
        for j in 1..self.d {
            s.c[j] = binomial_mod(&self.ring, c as i128, j);
        }
        s
    }
    /// q = φ(π)/π.
    pub fn q(&self) -> Series {
        let p = self.ring.p() as usize;
        let mut s = self.zero();
        for j in 0..p.min(self.d) {
            s.c[j] = binomial_mod(&self.ring, p as i128, j + 1);
        }
        s
    }

    pub fn subst_table(&self, t: &Series) -> SubstTable {
        assert!(self.ring.is_zero(&t.c[0]), "substitution needs t(0) = 0");
        let mut rows = Vec::with_capacity(self.d);
        let mut pw = self.one();
        for _ in 0..self.d {
            rows.push(pw.c.clone());
            pw = self.mul(&pw, t);
        }
        SubstTable { rows }
    }
    pub fn gamma_table(&self, c: u64) -> SubstTable {
        self.subst_table(&self.gamma_pi(c))
    }
    /// x(t(π)) using a precomputed table.
    pub fn subst(&self, x: &Series, table: &SubstTable) -> Series {
        let r = &self.ring;
        let mut out = self.zero();
        for (j, cj) in x.c.iter().enumerate() {
            if r.is_zero(cj) {
                continue;
            }
            // t^j has order >= j
            for n in j..self.d {
                let tn = &table.rows[j][n];
                if r.is_zero(tn) {
                    continue;
                }
                let v = r.mul(cj, tn);
                out.c[n] = r.add(&out.c[n], &v);
            }
        }
        out
    }
    /// π ↦ φ(π) on a single series.
    pub fn phi_subst(&self, x: &Series) -> Series {
        self.subst(x, &self.phi_table)
    }

    // 2×2 matrices over series.

    pub fn mat_zero(&self) -> SMat {
        [[self.zero(), self.zero()], [self.zero(), self.zero()]]
    }
    pub fn mat_id(&self) -> SMat {
        [[self.one(), self.zero()], [self.zero(), self.one()]]
    }
    pub fn mat_const(&self, m: &OMat) -> SMat {
        [
            [self.constant(m[0][0]), self.constant(m[0][1])],
            [self.constant(m[1][0]), self.constant(m[1][1])],
        ]
    }
    pub fn mat_add(&self, a: &SMat, b: &SMat) -> SMat {
        [
            [self.add(&a[0][0], &b[0][0]), self.add(&a[0][1], &b[0][1])],
            [self.add(&a[1][0], &b[1][0]), self.add(&a[1][1], &b[1][1])],
        ]
    }
    pub fn mat_sub(&self, a: &SMat, b: &SMat) -> SMat {
        [
            [self.sub(&a[0][0], &b[0][0]), self.sub(&a[0][1], &b[0][1])],
            [self.sub(&a[1][0], &b[1][0]), self.sub(&a[1][1], &b[1][1])],
        ]
    }
    pub fn mat_mul(&self, a: &SMat, b: &SMat) -> SMat {
        let e = |i: usize, j: usize| {
            self.add(&self.mul(&a[i][0], &b[0][j]), &self.mul(&a[i][1], &b[1][j]))
        };
        [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
    }
    pub fn mat_scale(&self, a: &SMat, s: &Series) -> SMat {
        [
            [self.mul(&a[0][0], s), self.mul(&a[0][1], s)],
            [self.mul(&a[1][0], s), self.mul(&a[1][1], s)],
        ]
    }
    pub fn mat_subst(&self, a: &SMat, table: &SubstTable) -> SMat {
        [
            [self.subst(&a[0][0], table), self.subst(&a[0][1], table)],
            [self.subst(&a[1][0], table), self.subst(&a[1][1], table)],
        ]
    }
    pub fn mat_det(&self, a: &SMat) -> Series {
        self.sub(&self.mul(&a[0][0], &a[1][1]), &self.mul(&a[0][1], &a[1][0]))
    }
    pub fn mat_adj(&self, a: &SMat) -> SMat {
        [
            [a[1][1].clone(), self.neg(&a[0][1])],
            [self.neg(&a[1][0]), a[0][0].clone()],
        ]
    }
    /// Coefficient block of π^j.
    pub fn mat_coeff(&self, a: &SMat, j: usize) -> OMat {
        [[a[0][0].c[j], a[0][1].c[j]], [a[1][0].c[j], a[1][1].c[j]]]
    }
    pub fn mat_set_coeff(&self, a: &mut SMat, j: usize, m: &OMat) {
        for r in 0..2 {
            for c in 0..2 {
                a[r][c].c[j] = m[r][c];
            }
        }
    }
    pub fn mat_valuation(&self, a: &SMat) -> Val {
        a.iter()
            .flat_map(|row| row.iter())
            .map(|s| self.valuation(s))
            .min()
            .unwrap_or(VAL_INF)
    }
    /// Minimal valuation over coefficients of degree < `upto`.
    pub fn mat_valuation_below(&self, a: &SMat, upto: usize) -> Val {
        let mut v = VAL_INF;
        for row in a {
            for s in row {
                for x in s.c.iter().take(upto) {
                    v = v.min(self.ring.valuation(x));
                }
            }
        }
        v
    }
    /// Smallest degree carrying a nonzero coefficient.
    pub fn mat_order(&self, a: &SMat) -> Option<usize> {
        a.iter()
            .flat_map(|row| row.iter())
            .filter_map(|s| self.order(s))
            .min()
    }

    // τ-indexed objects.

    pub fn tau_id(&self, f: usize) -> TauMatrix {
        TauMatrix {
            coords: vec![self.mat_id(); f],
        }
    }
    pub fn tau_zero(&self, f: usize) -> TauMatrix {
        TauMatrix {
            coords: vec![self.mat_zero(); f],
        }
    }
    pub fn tau_mul(&self, a: &TauMatrix, b: &TauMatrix) -> TauMatrix {
        TauMatrix {
            coords: a
                .coords
                .iter()
                .zip(&b.coords)
                .map(|(x, y)| self.mat_mul(x, y))
                .collect(),
        }
    }
    pub fn tau_sub(&self, a: &TauMatrix, b: &TauMatrix) -> TauMatrix {
        TauMatrix {
            coords: a
                .coords
                .iter()
                .zip(&b.coords)
                .map(|(x, y)| self.mat_sub(x, y))
                .collect(),
        }
    }
    pub fn tau_add(&self, a: &TauMatrix, b: &TauMatrix) -> TauMatrix {
        TauMatrix {
            coords: a
                .coords
                .iter()
                .zip(&b.coords)
                .map(|(x, y)| self.mat_add(x, y))
                .collect(),
        }
    }
    pub fn tau_valuation(&self, a: &TauMatrix) -> Val {
        a.coords
            .iter()
            .map(|m| self.mat_valuation(m))
            .min()
            .unwrap_or(VAL_INF)
    }
    /// Coordinate i of φ(x) is x[i+1 mod f] with π ↦ φ(π).
    pub fn apply_phi(&self, x: &TauMatrix) -> TauMatrix {
        let f = x.coords.len();
        TauMatrix {
            coords: (0..f)
                .map(|i| self.mat_subst(&x.coords[(i + 1) % f], &self.phi_table))
                .collect(),
        }
    }
    pub fn apply_phi_series(&self, x: &TauSeries) -> TauSeries {
        let f = x.coords.len();
        TauSeries {
            coords: (0..f)
                .map(|i| self.phi_subst(&x.coords[(i + 1) % f]))
                .collect(),
        }
    }
    /// Coordinate-wise π ↦ γ_c(π), given the table of γ_c.
    pub fn apply_gamma(&self, x: &TauMatrix, table: &SubstTable) -> TauMatrix {
        TauMatrix {
            coords: x.coords.iter().map(|m| self.mat_subst(m, table)).collect(),
        }
    }
    pub fn apply_gamma_series(&self, x: &TauSeries, table: &SubstTable) -> TauSeries {
        TauSeries {
            coords: x.coords.iter().map(|s| self.subst(s, table)).collect(),
        }
    }
    /// A·φ(A)···φ^{f−1}(A).
    pub fn norm_phi(&self, a: &TauMatrix) -> TauMatrix {
        let f = a.coords.len();
        let mut acc = a.clone();
        let mut cur = a.clone();
        for _ in 1..f {
            cur = self.apply_phi(&cur);
            acc = self.tau_mul(&acc, &cur);
        }
        acc
    }
}

pub fn omat_id(ring: &Ring) -> OMat {
    [[ring.one(), ring.zero()], [ring.zero(), ring.one()]]
}
pub fn omat_zero(ring: &Ring) -> OMat {
    [[ring.zero(), ring.zero()], [ring.zero(), ring.zero()]]
}
pub fn omat_mul(ring: &Ring, a: &OMat, b: &OMat) -> OMat {
    let e =
        |i: usize, j: usize| ring.add(&ring.mul(&a[i][0], &b[0][j]), &ring.mul(&a[i][1], &b[1][j]));
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}
pub fn omat_add(ring: &Ring, a: &OMat, b: &OMat) -> OMat {
    let e = |i: usize, j: usize| ring.add(&a[i][j], &b[i][j]);
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}
pub fn omat_sub(ring: &Ring, a: &OMat, b: &OMat) -> OMat {
    let e = |i: usize, j: usize| ring.sub(&a[i][j], &b[i][j]);
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}
pub fn omat_scale(ring: &Ring, a: &OMat, s: &OElement) -> OMat {
    let e = |i: usize, j: usize| ring.mul(&a[i][j], s);
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}
pub fn omat_det(ring: &Ring, a: &OMat) -> OElement {
    ring.sub(&ring.mul(&a[0][0], &a[1][1]), &ring.mul(&a[0][1], &a[1][0]))
}
pub fn omat_adj(ring: &Ring, a: &OMat) -> OMat {
    [[a[1][1], ring.neg(&a[0][1])], [ring.neg(&a[1][0]), a[0][0]]]
}
pub fn omat_valuation(ring: &Ring, a: &OMat) -> Val {
    a.iter()
        .flat_map(|r| r.iter())
        .map(|x| ring.valuation(x))
        .min()
        .unwrap_or(VAL_INF)
}
/// p^e · a^{-1} for a 2×2 matrix whose determinant has valuation v <= e.
pub fn omat_scaled_inverse(ring: &Ring, a: &OMat, e: u32) -> Option<OMat> {
    let det = omat_det(ring, a);
    let (v, u) = ring.split(&det)?;
    if v > e {
        return None;
    }
    let uinv = ring.inv_unit(&u)?;
    let s = ring.mul(&uinv, &ring.p_power(e - v));
    Some(omat_scale(ring, &omat_adj(ring, a), &s))
}

/// Integer p^e as an OElement, zero beyond precision.
pub fn p_pow_elem(ring: &Ring, e: u32) -> OElement {
    if e >= ring.precision() {
        ring.zero()
    } else {
        ring.from_int(crate::padic::pow_word(ring.p(), e) as i128)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sr(p: u64, n: u32, d: usize) -> SeriesRing {
        SeriesRing::new(Ring::new(p, 1, n).unwrap(), d)
    }

    #[test]
    fn phi_pi_and_q() {
        let s = sr(3, 10, 8);
        assert_eq!(s.phi_pi(), s.from_ints(&[0, 3, 3, 1]));
        assert_eq!(s.q(), s.from_ints(&[3, 3, 1]));
        assert_eq!(s.mul(&s.q(), &s.monomial(1)), s.phi_pi());
        let s5 = sr(5, 8, 8);
        assert_eq!(s5.phi_pi().c[5], s5.ring().one());
    }

    #[test]
    fn gamma_pi_examples() {
        let s = sr(3, 10, 8);
        assert_eq!(s.gamma_pi(2), s.from_ints(&[0, 2, 1]));
        assert_eq!(s.gamma_pi(1), s.monomial(1));
        assert_eq!(s.gamma_pi(4), s.from_ints(&[0, 4, 6, 4, 1]));
    }

    #[test]
    fn binomial_unit_argument() {
        let r = Ring::new(3, 1, 12).unwrap();
        // C(-1, j) = (-1)^j
        for j in 0..10 {
            let expect = if j % 2 == 0 { 1 } else { -1 };
            assert_eq!(binomial_mod(&r, -1, j), r.from_int(expect));
        }
        // C(10, 3) = 120
        assert_eq!(binomial_mod(&r, 10, 3), r.from_int(120));
    }

    #[test]
    fn phi_shift_direction() {
        let s = sr(3, 10, 8);
        let x = TauSeries {
            coords: vec![s.monomial(1), s.zero()],
        };
        let y = s.apply_phi_series(&x);
        assert_eq!(y.coords[0], s.zero());
        assert_eq!(y.coords[1], s.phi_pi());
    }

    #[test]
    fn series_inverse() {
        let s = sr(5, 8, 10);
        let a = s.from_ints(&[2, 7, 1, 0, 3]);
        let ai = s.inv(&a).unwrap();
        assert_eq!(s.mul(&a, &ai), s.one());
    }
}
