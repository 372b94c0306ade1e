//! Mod-p symbolic algebra in the variables X_0, ..., X_{f−1}: the reduction of Q_f,
//! its image mod I = (p, X), Claim A and the surjectivity of H ↦ H − Q H (p^{fk} Q^{-1}).

use std::collections::BTreeMap;

use serde::Serialize;

use crate::family::{TypeTag, TypedMatrixFamily};
use crate::padic::{residue_rank, ResidueElement, ResidueField};

/// Sparse polynomial over k_E; exponent vectors indexed by coordinate position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResiduePoly {
    pub terms: BTreeMap<Vec<u32>, ResidueElement>,
}

pub type PolyMat = [[ResiduePoly; 2]; 2];
pub type ResMat = [[ResidueElement; 2]; 2];

impl ResiduePoly {
    pub fn zero() -> Self {
        ResiduePoly {
            terms: BTreeMap::new(),
        }
    }
    pub fn constant(k: &ResidueField, c: ResidueElement, nvars: usize) -> Self {
        let mut r = Self::zero();
        if !k.is_zero(&c) {
            r.terms.insert(vec![0; nvars], c);
        }
        r
    }
    pub fn var(k: &ResidueField, i: usize, nvars: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut r = Self::zero();
        r.terms.insert(e, k.one());
        r
    }
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn add(&self, k: &ResidueField, o: &Self) -> Self {
        let mut r = self.clone();
        for (e, c) in &o.terms {
            let s = match r.terms.get(e) {
                Some(x) => k.add(x, c),
                None => *c,
            };
            if k.is_zero(&s) {
                r.terms.remove(e);
            } else {
                r.terms.insert(e.clone(), s);
            }
        }
        r
    }
    pub fn neg(&self, k: &ResidueField) -> Self {
        ResiduePoly {
            terms: self
                .terms
                .iter()
                .map(|(e, c)| (e.clone(), k.neg(c)))
                .collect(),
        }
    }
    pub fn mul(&self, k: &ResidueField, o: &Self) -> Self {
        let mut r = Self::zero();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                let mut t = Self::zero();
                t.terms.insert(e, k.mul(c1, c2));
                r = r.add(k, &t);
            }
        }
        r
    }
    /// Constant term, i.e. the image with every X_i set to 0.
    pub fn at_zero(&self, k: &ResidueField) -> ResidueElement {
        self.terms
            .iter()
            .find(|(e, _)| e.iter().all(|&x| x == 0))
            .map(|(_, c)| *c)
            .unwrap_or_else(|| k.zero())
    }
    /// A monomial with a positive exponent, if any.
    pub fn nonconstant_monomial(&self) -> Option<Vec<u32>> {
        self.terms
            .keys()
            .find(|e| e.iter().any(|&x| x > 0))
            .cloned()
    }
}

fn pm_zero() -> PolyMat {
    [
        [ResiduePoly::zero(), ResiduePoly::zero()],
        [ResiduePoly::zero(), ResiduePoly::zero()],
    ]
}

pub fn polymat_mul(k: &ResidueField, a: &PolyMat, b: &PolyMat) -> PolyMat {
    let mut r = pm_zero();
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = a[i][0].mul(k, &b[0][j]).add(k, &a[i][1].mul(k, &b[1][j]));
        }
    }
    r
}

pub fn resmat_mul(k: &ResidueField, a: &ResMat, b: &ResMat) -> ResMat {
    let e = |i: usize, j: usize| k.add(&k.mul(&a[i][0], &b[0][j]), &k.mul(&a[i][1], &b[1][j]));
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}

pub fn resmat_id(k: &ResidueField) -> ResMat {
    [[k.one(), k.zero()], [k.zero(), k.one()]]
}

/// Mod-p pattern of a type shape at position `i`: u·c(k) in the p^k slot, X_i, and 1.
pub fn pattern_mod_p(
    k: &ResidueField,
    t: TypeTag,
    weight: u64,
    unit: ResidueElement,
    i: usize,
    nvars: usize,
) -> PolyMat {
    let mut m = pm_zero();
    let ck = if weight == 0 { unit } else { k.zero() };
    let (a, b) = t.pk_pos();
    m[a][b] = ResiduePoly::constant(k, ck, nvars);
    let (a, b) = t.x_pos();
    m[a][b] = ResiduePoly::var(k, i, nvars);
    let (a, b) = t.one_pos();
    m[a][b] = ResiduePoly::constant(k, k.one(), nvars);
    m
}

/// Positions in product order P_1 P_2 ... P_{f−1} P_0.
pub fn product_order(f: usize) -> Vec<usize> {
    (1..f).chain(std::iter::once(0)).collect()
}

/// Q_f mod p.
pub fn qf_mod_p(
    k: &ResidueField,
    types: &[TypeTag],
    weights: &[u64],
    units: &[ResidueElement],
) -> PolyMat {
    let f = types.len();
    let mut acc: Option<PolyMat> = None;
    for i in product_order(f) {
        let pat = pattern_mod_p(k, types[i], weights[i], units[i], i, f);
        acc = Some(match acc {
            None => pat,
            Some(a) => polymat_mul(k, &a, &pat),
        });
    }
    acc.expect("f >= 1")
}

pub fn trace(k: &ResidueField, m: &PolyMat) -> ResiduePoly {
    m[0][0].add(k, &m[1][1])
}

/// Witness monomial when Tr(Q_f) mod p is nonconstant.
pub fn check_trace_nonconstant(k: &ResidueField, q: &PolyMat) -> Option<Vec<u32>> {
    trace(k, q).nonconstant_monomial()
}

/// Trace check over F_p with unit entries 1; units do not affect the X-monomials of the trace.
pub fn check_trace_nonconstant_types(types: &[TypeTag], weights: &[u64]) -> Option<Vec<u32>> {
    let k = crate::padic::Ring::new(3, 1, 1)
        .expect("F_3 ring")
        .residue_field();
    let units = vec![k.one(); types.len()];
    check_trace_nonconstant(&k, &qf_mod_p(&k, types, weights, &units))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ModITag {
    E11,
    E12,
    E21,
    E22,
    Zero,
    Other,
}

/// Classify a residue matrix as λ·E_ij (λ ≠ 0), zero, or other. Returns the scalar λ.
pub fn classify(k: &ResidueField, m: &ResMat) -> (ModITag, Option<ResidueElement>) {
    let nz: Vec<(usize, usize)> = (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .filter(|&(i, j)| !k.is_zero(&m[i][j]))
        .collect();
    match nz.as_slice() {
        [] => (ModITag::Zero, None),
        [(i, j)] => {
            let tag = match (i, j) {
                (0, 0) => ModITag::E11,
                (0, 1) => ModITag::E12,
                (1, 0) => ModITag::E21,
                _ => ModITag::E22,
            };
            (tag, Some(m[*i][*j]))
        }
        _ => (ModITag::Other, None),
    }
}

pub fn poly_at_zero(k: &ResidueField, m: &PolyMat) -> ResMat {
    [
        [m[0][0].at_zero(k), m[0][1].at_zero(k)],
        [m[1][0].at_zero(k), m[1][1].at_zero(k)],
    ]
}

/// Q_f mod I with its tag.
pub fn qf_mod_i(
    k: &ResidueField,
    types: &[TypeTag],
    weights: &[u64],
    units: &[ResidueElement],
) -> (ResMat, ModITag) {
    let m = poly_at_zero(k, &qf_mod_p(k, types, weights, units));
    let (tag, _) = classify(k, &m);
    (m, tag)
}

/// p^{k_max}·P_i^{-1} mod I = p^{k_max − k_i} adj(P_i) / (±u_i), reduced.
pub fn scaled_inverse_factor_mod_i(
    k: &ResidueField,
    t: TypeTag,
    weight: u64,
    k_max: u64,
    unit: ResidueElement,
) -> ResMat {
    if weight < k_max {
        return [[k.zero(), k.zero()], [k.zero(), k.zero()]];
    }
    let pat = poly_at_zero(k, &pattern_mod_p(k, t, weight, unit, 0, 1));
    let adj = [
        [pat[1][1], k.neg(&pat[0][1])],
        [k.neg(&pat[1][0]), pat[0][0]],
    ];
    let det_unit = if t.det_sign() < 0 { k.neg(&unit) } else { unit };
    let inv = k.inv(&det_unit).expect("unit");
    [
        [k.mul(&adj[0][0], &inv), k.mul(&adj[0][1], &inv)],
        [k.mul(&adj[1][0], &inv), k.mul(&adj[1][1], &inv)],
    ]
}

/// p^{f·k_max}·Q_f^{-1} mod I, as the reversed product of the per-position factors.
pub fn scaled_inverse_mod_i(
    k: &ResidueField,
    types: &[TypeTag],
    weights: &[u64],
    units: &[ResidueElement],
) -> ResMat {
    let k_max = weights.iter().copied().max().unwrap_or(0);
    let mut acc = resmat_id(k);
    for i in product_order(types.len()).into_iter().rev() {
        let fac = scaled_inverse_factor_mod_i(k, types[i], weights[i], k_max, units[i]);
        acc = resmat_mul(k, &acc, &fac);
    }
    acc
}

#[derive(Clone, Debug, Serialize)]
pub struct ClaimAReport {
    pub q_tag: ModITag,
    pub inverse_tag: ModITag,
    /// λ with p^{fk} Q^{-1} ≡ λ·Q mod I in the off-diagonal cases, as base-p digits.
    pub scalar: Option<String>,
    /// Whether λ = −1 as literally stated.
    pub literal_sign: Option<bool>,
    /// The relation between the two tags holds up to a unit.
    pub holds: bool,
    /// B ↦ B − Q̄ B T̄ is injective on 2×2 residue matrices, which gives B ≡ 0.
    pub forces_b_zero: bool,
}

fn res_to_string(k: &ResidueField, x: &ResidueElement) -> String {
    let d = &x.0[..k.ext()];
    if k.p() <= 36 {
        d.iter()
            .map(|d| char::from_digit(*d as u32, 36).expect("digit"))
            .collect()
    } else {
        d.iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(".")
    }
}

/// B ↦ B − Q B T on 2×2 matrices over k_E as a 4×4 matrix (row-major vectorization).
pub fn consolidated_operator(k: &ResidueField, q: &ResMat, t: &ResMat) -> Vec<Vec<ResidueElement>> {
    let mut m = vec![vec![k.zero(); 4]; 4];
    for a in 0..2 {
        for b in 0..2 {
            // output entry (a, b) = B_ab − Σ_{c,d} Q_ac B_cd T_db
            let row = 2 * a + b;
            m[row][row] = k.add(&m[row][row], &k.one());
            for c in 0..2 {
                for d in 0..2 {
                    let coef = k.mul(&q[a][c], &t[d][b]);
                    let col = 2 * c + d;
                    m[row][col] = k.sub(&m[row][col], &coef);
                }
            }
        }
    }
    m
}

pub fn verify_claim_a(
    k: &ResidueField,
    types: &[TypeTag],
    weights: &[u64],
    units: &[ResidueElement],
) -> ClaimAReport {
    let (q, q_tag) = qf_mod_i(k, types, weights, units);
    let inv = scaled_inverse_mod_i(k, types, weights, units);
    let (inverse_tag, inv_scalar) = classify(k, &inv);
    let (_, q_scalar) = classify(k, &q);
    let mut scalar = None;
    let mut literal_sign = None;
    let holds = match q_tag {
        ModITag::E12 | ModITag::E21 => {
            if inverse_tag == q_tag {
                let lam = k.mul(
                    &inv_scalar.expect("tagged"),
                    &k.inv(&q_scalar.expect("tagged")).expect("nonzero"),
                );
                literal_sign = Some(lam == k.neg(&k.one()));
                scalar = Some(res_to_string(k, &lam));
                true
            } else {
                false
            }
        }
        ModITag::E11 => inverse_tag == ModITag::E22,
        ModITag::E22 => inverse_tag == ModITag::E11,
        ModITag::Zero => true,
        ModITag::Other => false,
    };
    let op = consolidated_operator(k, &q, &inv);
    let forces_b_zero = residue_rank(k, &op) == 4;
    ClaimAReport {
        q_tag,
        inverse_tag,
        scalar,
        literal_sign,
        holds,
        forces_b_zero,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SurjectivityReport {
    /// Rank of (H_i) ↦ (H_i − P̄_i H_{i+1} T̄_i) on the 4f-dimensional space.
    pub rank_full: usize,
    pub dim_full: usize,
    /// Rank of H ↦ H − Q̄ H T̄ on 2×2 matrices.
    pub rank_consolidated: usize,
    pub surjective: bool,
}

/// Surjectivity of the degree-k lifting operator mod I.
pub fn check_operator_surjective(
    k: &ResidueField,
    types: &[TypeTag],
    weights: &[u64],
    units: &[ResidueElement],
) -> SurjectivityReport {
    let f = types.len();
    let k_max = weights.iter().copied().max().unwrap_or(0);
    let pbar: Vec<ResMat> = (0..f)
        .map(|i| poly_at_zero(k, &pattern_mod_p(k, types[i], weights[i], units[i], 0, 1)))
        .collect();
    let tbar: Vec<ResMat> = (0..f)
        .map(|i| scaled_inverse_factor_mod_i(k, types[i], weights[i], k_max, units[i]))
        .collect();
    let n = 4 * f;
    let mut m = vec![vec![k.zero(); n]; n];
    for i in 0..f {
        let j = (i + 1) % f;
        for a in 0..2 {
            for b in 0..2 {
                let row = 4 * i + 2 * a + b;
                m[row][row] = k.add(&m[row][row], &k.one());
                for c in 0..2 {
                    for d in 0..2 {
                        let coef = k.mul(&pbar[i][a][c], &tbar[i][d][b]);
                        let col = 4 * j + 2 * c + d;
                        m[row][col] = k.sub(&m[row][col], &coef);
                    }
                }
            }
        }
    }
    let rank_full = residue_rank(k, &m);
    let (q, _) = qf_mod_i(k, types, weights, units);
    let inv = scaled_inverse_mod_i(k, types, weights, units);
    let rank_consolidated = residue_rank(k, &consolidated_operator(k, &q, &inv));
    SurjectivityReport {
        rank_full,
        dim_full: n,
        rank_consolidated,
        surjective: rank_full == n && rank_consolidated == 4,
    }
}

/// Residue units of a family.
pub fn family_units(fam: &TypedMatrixFamily, ring: &crate::padic::Ring) -> Vec<ResidueElement> {
    (0..fam.f())
        .map(|i| ring.reduce(&fam.unit(ring, i)))
        .collect()
}

/// Every type vector the builder can emit for f positions with the given weights.
pub fn legal_type_vectors(weights: &[u64]) -> Vec<(crate::family::Case, Vec<u64>, Vec<TypeTag>)> {
    use crate::family::{type_vector, Case};
    let f = weights.len();
    let mut out = Vec::new();
    for mask in 0..(1u32 << f) {
        let mut ell = vec![0u64; 2 * f];
        for i in 0..f {
            if mask >> i & 1 == 1 {
                ell[i] = weights[i];
            } else {
                ell[f + i] = weights[i];
            }
        }
        out.push((
            Case::Induced,
            ell.clone(),
            type_vector(Case::Induced, &ell, weights),
        ));
        let lo = ell[..f].iter().any(|&x| x != 0);
        let hi = ell[f..].iter().any(|&x| x != 0);
        if lo && hi {
            out.push((
                Case::Split,
                ell.clone(),
                type_vector(Case::Split, &ell, weights),
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::Ring;

    fn f3() -> ResidueField {
        Ring::new(3, 1, 4).unwrap().residue_field()
    }

    #[test]
    fn single_patterns() {
        let k = f3();
        let one = vec![k.one()];
        let q = qf_mod_p(&k, &[TypeTag::T2], &[5], &one);
        assert_eq!(q[0][0], ResiduePoly::var(&k, 0, 1));
        assert_eq!(q[0][1], ResiduePoly::constant(&k, k.one(), 1));
        assert!(q[1][0].is_zero() && q[1][1].is_zero());
        let q = qf_mod_p(&k, &[TypeTag::T1], &[0], &one);
        assert_eq!(q[0][0], ResiduePoly::constant(&k, k.one(), 1));
        assert_eq!(q[1][0], ResiduePoly::var(&k, 0, 1));
    }

    #[test]
    fn mod_i_tags() {
        let k = f3();
        let one = vec![k.one()];
        assert_eq!(qf_mod_i(&k, &[TypeTag::T2], &[5], &one).1, ModITag::E12);
        assert_eq!(qf_mod_i(&k, &[TypeTag::T4], &[5], &one).1, ModITag::E21);
        assert_eq!(qf_mod_i(&k, &[TypeTag::T3], &[5], &one).1, ModITag::E11);
        assert_eq!(qf_mod_i(&k, &[TypeTag::T1], &[5], &one).1, ModITag::E22);
    }

    #[test]
    fn claim_a_single() {
        let k = f3();
        let one = vec![k.one()];
        let r = verify_claim_a(&k, &[TypeTag::T2], &[5], &one);
        assert!(r.holds && r.forces_b_zero);
        assert_eq!(r.inverse_tag, ModITag::E12);
        assert_eq!(r.literal_sign, Some(false));
        let r = verify_claim_a(&k, &[TypeTag::T3], &[5], &one);
        assert_eq!((r.q_tag, r.inverse_tag), (ModITag::E11, ModITag::E22));
    }

    #[test]
    fn trace_witness() {
        assert!(check_trace_nonconstant_types(&[TypeTag::T4], &[5]).is_some());
        assert!(check_trace_nonconstant_types(&[TypeTag::T2, TypeTag::T2], &[3, 3]).is_some());
    }

    #[test]
    fn zero_matrix_trace() {
        let k = f3();
        assert!(check_trace_nonconstant(&k, &pm_zero()).is_none());
    }
}
