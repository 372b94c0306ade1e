//! Weight combinatorics, parity type assignment and the matrices P(X) of a family.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::padic::{GlobalContext, OElement, Ring, Val, VAL_INF};
use crate::series::{omat_add, omat_id, omat_mul, OMat};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FamilyError {
    #[error("weights: expected {expected} entries, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("weights: largest weight {k_max} is below p = {p}")]
    WeightTooSmall { k_max: u64, p: u64 },
    #[error("ell: expected {expected} entries, got {got}")]
    EllCount { expected: usize, got: usize },
    #[error("ell: {{ell[{i}], ell[{j}]}} = {{{a}, {b}}} must equal {{0, {k}}}")]
    EllPair {
        i: usize,
        j: usize,
        a: u64,
        b: u64,
        k: u64,
    },
    #[error("ell: split case needs both halves nonzero")]
    SplitHalfZero,
    #[error("c_units: expected {expected} entries, got {got}")]
    UnitCount { expected: usize, got: usize },
    #[error("c_units[{0}] is not a unit")]
    NotUnit(usize),
    #[error("twist_c is not a unit")]
    TwistNotUnit,
    #[error("parameter alpha[{i}] has valuation {v}, needs at least {need}")]
    ParameterOutOfDisk { i: usize, v: Val, need: u32 },
    #[error("perturbation A[{i}] has valuation {v}, needs at least {need}")]
    PerturbationOutOfDisk { i: usize, v: Val, need: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    Induced,
    Split,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum TypeTag {
    T1,
    T2,
    T3,
    T4,
}

impl TypeTag {
    pub const ALL: [TypeTag; 4] = [TypeTag::T1, TypeTag::T2, TypeTag::T3, TypeTag::T4];

    /// t2 and t4.
    pub fn is_even(self) -> bool {
        matches!(self, TypeTag::T2 | TypeTag::T4)
    }
    /// Position of the variable entry X.
    pub fn x_pos(self) -> (usize, usize) {
        match self {
            TypeTag::T1 => (1, 0),
            TypeTag::T2 => (0, 0),
            TypeTag::T3 => (0, 1),
            TypeTag::T4 => (1, 1),
        }
    }
    /// Position of the entry u·p^k.
    pub fn pk_pos(self) -> (usize, usize) {
        match self {
            TypeTag::T1 => (0, 0),
            TypeTag::T2 => (1, 0),
            TypeTag::T3 => (1, 1),
            TypeTag::T4 => (0, 1),
        }
    }
    /// Position of the entry 1.
    pub fn one_pos(self) -> (usize, usize) {
        match self {
            TypeTag::T1 => (1, 1),
            TypeTag::T2 => (0, 1),
            TypeTag::T3 => (0, 0),
            TypeTag::T4 => (1, 0),
        }
    }
    /// Sign of det for the shape with entries (u p^k, X, 1).
    pub fn det_sign(self) -> i128 {
        if self.is_even() {
            -1
        } else {
            1
        }
    }
    pub fn name(self) -> &'static str {
        match self {
            TypeTag::T1 => "t1",
            TypeTag::T2 => "t2",
            TypeTag::T3 => "t3",
            TypeTag::T4 => "t4",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WeightProfile {
    pub k: Vec<u64>,
    /// Sorted distinct positive weights.
    pub w: Vec<u64>,
    /// I_0 ⊇ I_1 ⊇ ... ⊇ I_t = ∅.
    pub index_sets: Vec<Vec<usize>>,
    pub k_max: u64,
}

impl WeightProfile {
    pub fn new(k: &[u64]) -> Self {
        let mut w: Vec<u64> = k.iter().copied().filter(|&x| x > 0).collect();
        w.sort_unstable();
        w.dedup();
        let mut index_sets = Vec::with_capacity(w.len() + 1);
        let mut prev = 0;
        for &wj in w.iter().chain(std::iter::once(&u64::MAX)) {
            index_sets.push((0..k.len()).filter(|&i| k[i] > prev).collect());
            prev = wj;
        }
        WeightProfile {
            k: k.to_vec(),
            w,
            index_sets,
            k_max: k.iter().copied().max().unwrap_or(0),
        }
    }
}

/// Integer coefficients of an O_E element in the basis 1, x, ...; empty means 1.
pub type UnitCoeffs = Vec<i64>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FamilySpec {
    pub case: Case,
    pub ell: Vec<u64>,
    pub c_units: Vec<UnitCoeffs>,
    pub twist_c: UnitCoeffs,
    pub weights: WeightProfile,
}

impl FamilySpec {
    pub fn new(
        p: u64,
        case: Case,
        weights: &[u64],
        ell: &[u64],
        c_units: Vec<UnitCoeffs>,
        twist_c: UnitCoeffs,
    ) -> Result<Self, FamilyError> {
        let f = weights.len();
        let profile = WeightProfile::new(weights);
        if profile.k_max < p {
            return Err(FamilyError::WeightTooSmall {
                k_max: profile.k_max,
                p,
            });
        }
        if ell.len() != 2 * f {
            return Err(FamilyError::EllCount {
                expected: 2 * f,
                got: ell.len(),
            });
        }
        for i in 0..f {
            let (a, b) = (ell[i], ell[f + i]);
            let k = weights[i];
            if !((a == 0 && b == k) || (a == k && b == 0)) {
                return Err(FamilyError::EllPair {
                    i,
                    j: f + i,
                    a,
                    b,
                    k,
                });
            }
        }
        if case == Case::Split
            && (ell[..f].iter().all(|&x| x == 0) || ell[f..].iter().all(|&x| x == 0))
        {
            return Err(FamilyError::SplitHalfZero);
        }
        let c_units = if c_units.is_empty() {
            vec![vec![1]; f]
        } else {
            c_units
        };
        if c_units.len() != f {
            return Err(FamilyError::UnitCount {
                expected: f,
                got: c_units.len(),
            });
        }
        Ok(FamilySpec {
            case,
            ell: ell.to_vec(),
            c_units,
            twist_c,
            weights: profile,
        })
    }

    pub fn f(&self) -> usize {
        self.weights.k.len()
    }

    /// Reject units that vanish mod p.
    pub fn check_units(&self, ring: &Ring) -> Result<(), FamilyError> {
        for (i, u) in self.c_units.iter().enumerate() {
            if !ring.is_unit(&unit_elem(ring, u)) {
                return Err(FamilyError::NotUnit(i));
            }
        }
        if self.case == Case::Split && !ring.is_unit(&unit_elem(ring, &self.twist_c)) {
            return Err(FamilyError::TwistNotUnit);
        }
        Ok(())
    }
}

pub fn unit_elem(ring: &Ring, c: &[i64]) -> OElement {
    if c.is_empty() {
        return ring.one();
    }
    let v: Vec<i128> = c.iter().map(|&x| x as i128).collect();
    ring.from_coeffs(&v)
}

/// α(ℓ) = Σ_{n≥0} ⌊ℓ / (p^n (p−1))⌋.
pub fn alpha_of(p: u64, ell: u64) -> u64 {
    let mut s = 0;
    let mut d = p - 1;
    while d <= ell {
        s += ell / d;
        d *= p;
    }
    s
}

/// Σ_{j=1}^{ℓ} v_p(1 − χ^j), evaluated in the ring.
pub fn alpha_bruteforce(ring: &Ring, chi: u64, ell: u64) -> u64 {
    let chi = ring.from_int(chi as i128);
    let mut pw = ring.one();
    let mut s = 0u64;
    for _ in 1..=ell {
        pw = ring.mul(&pw, &chi);
        let v = ring.valuation(&ring.sub(&ring.one(), &pw));
        assert!(v != VAL_INF, "precision too small for brute-force α");
        s += v as u64;
    }
    s
}

pub fn compute_m(weights: &WeightProfile, p: u64) -> u64 {
    if weights.k.iter().all(|&k| k == p) {
        0
    } else {
        (weights.k_max - 1) / (p - 1)
    }
}

pub fn compute_m_k(weights: &WeightProfile, p: u64, trace_condition: bool) -> u64 {
    if weights.k.iter().all(|&k| k == p) && trace_condition {
        0
    } else {
        (weights.k_max - 1) / (p - 1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TypedMatrixFamily {
    pub spec: FamilySpec,
    pub types: Vec<TypeTag>,
    pub m: u64,
    pub m_k: u64,
    pub p: u64,
}

/// Types for P_1, ..., P_{f−1} then P_0, following the parity tables.
pub fn type_vector(case: Case, ell: &[u64], k: &[u64]) -> Vec<TypeTag> {
    let f = k.len();
    let mut types = vec![TypeTag::T1; f];
    let mut even_count = 0usize;
    for i in 1..f {
        let t = if ell[i] == 0 {
            if even_count.is_multiple_of(2) {
                TypeTag::T2
            } else {
                TypeTag::T1
            }
        } else if even_count.is_multiple_of(2) {
            TypeTag::T1
        } else {
            TypeTag::T2
        };
        if t.is_even() {
            even_count += 1;
        }
        types[i] = t;
    }
    let even = even_count.is_multiple_of(2);
    types[0] = match (case, ell[0] == 0, even) {
        (Case::Induced, true, true) => TypeTag::T4,
        (Case::Induced, true, false) => TypeTag::T3,
        (Case::Induced, false, true) => TypeTag::T2,
        (Case::Induced, false, false) => TypeTag::T1,
        (Case::Split, true, true) => TypeTag::T3,
        (Case::Split, true, false) => TypeTag::T4,
        (Case::Split, false, true) => TypeTag::T1,
        (Case::Split, false, false) => TypeTag::T2,
    };
    types
}

pub fn assign_types(spec: &FamilySpec, p: u64) -> TypedMatrixFamily {
    let types = type_vector(spec.case, &spec.ell, &spec.weights.k);
    let trace = crate::residue::check_trace_nonconstant_types(&types, &spec.weights.k).is_some();
    TypedMatrixFamily {
        m: compute_m(&spec.weights, p),
        m_k: compute_m_k(&spec.weights, p, trace),
        spec: spec.clone(),
        types,
        p,
    }
}

impl TypedMatrixFamily {
    pub fn f(&self) -> usize {
        self.types.len()
    }
    pub fn k(&self, i: usize) -> u64 {
        self.spec.weights.k[i]
    }
    pub fn k_max(&self) -> u64 {
        self.spec.weights.k_max
    }
    /// Unit u_i multiplying p^{k_i} at position i (twist included at position 0 when split).
    pub fn unit(&self, ring: &Ring, i: usize) -> OElement {
        let u = unit_elem(ring, &self.spec.c_units[i]);
        if i == 0 && self.spec.case == Case::Split {
            ring.mul(&u, &unit_elem(ring, &self.spec.twist_c))
        } else {
            u
        }
    }
    /// α(k_max − 1).
    pub fn alpha_k(&self) -> u64 {
        alpha_of(self.p, self.k_max() - 1)
    }

    /// The shape of type t with entries (u·pk, x, 1).
    pub fn shape(ring: &Ring, t: TypeTag, upk: OElement, x: OElement) -> OMat {
        let mut m = [[ring.zero(); 2]; 2];
        let (a, b) = t.pk_pos();
        m[a][b] = upk;
        let (a, b) = t.x_pos();
        m[a][b] = x;
        let (a, b) = t.one_pos();
        m[a][b] = ring.one();
        m
    }

    /// (Id + A_i)·P_i(α_i) per coordinate.
    pub fn evaluate_p(
        &self,
        ctx: &GlobalContext,
        alpha: &[OElement],
        a: Option<&[OMat]>,
        a_min_val: u32,
    ) -> Result<Vec<OMat>, FamilyError> {
        let ring = ctx.ring();
        let need = self.m as u32 + 1;
        for (i, x) in alpha.iter().enumerate() {
            let v = ring.valuation(x);
            if v < need {
                return Err(FamilyError::ParameterOutOfDisk { i, v, need });
            }
        }
        if let Some(a) = a {
            for (i, ai) in a.iter().enumerate() {
                let v = crate::series::omat_valuation(ring, ai);
                if v < a_min_val {
                    return Err(FamilyError::PerturbationOutOfDisk {
                        i,
                        v,
                        need: a_min_val,
                    });
                }
            }
        }
        Ok((0..self.f())
            .map(|i| {
                let upk = ring.mul(&self.unit(ring, i), &ring.p_power(self.k(i) as u32));
                let p = Self::shape(ring, self.types[i], upk, alpha[i]);
                match a {
                    Some(a) => omat_mul(ring, &omat_add(ring, &omat_id(ring), &a[i]), &p),
                    None => p,
                }
            })
            .collect())
    }

    /// (1, −α_i) for t1, t2 and (−α_i, 1) for t3, t4.
    pub fn filtration_pairs(&self, ring: &Ring, alpha: &[OElement]) -> Vec<(OElement, OElement)> {
        self.types
            .iter()
            .zip(alpha)
            .map(|(t, a)| match t {
                TypeTag::T1 | TypeTag::T2 => (ring.one(), ring.neg(a)),
                TypeTag::T3 | TypeTag::T4 => (ring.neg(a), ring.one()),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::make_context;

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_of(3, 4), 2);
        assert_eq!(alpha_of(3, 0), 0);
        assert_eq!(alpha_of(5, 3), 0);
        let r = Ring::new(3, 1, 20).unwrap();
        assert_eq!(alpha_bruteforce(&r, 2, 4), 2);
    }

    #[test]
    fn m_examples() {
        assert_eq!(compute_m(&WeightProfile::new(&[3, 3]), 3), 0);
        assert_eq!(compute_m(&WeightProfile::new(&[5, 3]), 3), 2);
        assert_eq!(compute_m(&WeightProfile::new(&[6, 5]), 5), 1);
        assert_eq!(compute_m_k(&WeightProfile::new(&[3, 3]), 3, false), 1);
    }

    #[test]
    fn weight_profile_sets() {
        let w = WeightProfile::new(&[5, 0, 3]);
        assert_eq!(w.w, vec![3, 5]);
        assert_eq!(w.index_sets, vec![vec![0, 2], vec![0], vec![]]);
    }

    #[test]
    fn type_tables() {
        assert_eq!(type_vector(Case::Induced, &[0, 5], &[5]), vec![TypeTag::T4]);
        assert_eq!(
            type_vector(Case::Induced, &[0, 3, 5, 0], &[5, 3]),
            vec![TypeTag::T4, TypeTag::T1]
        );
        assert_eq!(
            type_vector(Case::Split, &[3, 0, 0, 3], &[3, 3]),
            vec![TypeTag::T2, TypeTag::T2]
        );
    }

    #[test]
    fn spec_validation() {
        assert!(matches!(
            FamilySpec::new(3, Case::Induced, &[5], &[1, 4], vec![], vec![]),
            Err(FamilyError::EllPair { .. })
        ));
        assert!(matches!(
            FamilySpec::new(3, Case::Induced, &[2], &[0, 2], vec![], vec![]),
            Err(FamilyError::WeightTooSmall { .. })
        ));
        assert!(matches!(
            FamilySpec::new(3, Case::Split, &[3, 3], &[3, 3, 0, 0], vec![], vec![]),
            Err(FamilyError::SplitHalfZero)
        ));
    }

    #[test]
    fn evaluate_shapes() {
        let ctx = make_context(3, 1, 1, 16, 12, 0).unwrap();
        let r = ctx.ring();
        let spec = FamilySpec::new(3, Case::Induced, &[5], &[5, 0], vec![], vec![]).unwrap();
        let fam = assign_types(&spec, 3);
        assert_eq!(fam.types, vec![TypeTag::T2]);
        let alpha = vec![r.from_int(27)];
        let p = fam.evaluate_p(&ctx, &alpha, None, 0).unwrap();
        assert_eq!(p[0][0][0], r.from_int(27));
        assert_eq!(p[0][1][0], r.from_int(243));
        let low = vec![r.from_int(9)];
        assert!(fam.evaluate_p(&ctx, &low, None, 0).is_err());
    }
}
