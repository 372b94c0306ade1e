//! The filtered φ-module attached to Π: filtration lines, Hodge–Tate jumps,
//! weak admissibility and the fundamental-character exponents of the reduction.

use serde::Serialize;

use crate::family::{Case, FamilySpec, TypedMatrixFamily};
use crate::padic::{OElement, Ring, Val, VAL_INF};
use crate::residue::product_order;
use crate::series::{omat_adj, omat_det, omat_mul, OMat, Series, SeriesRing, TauMatrix};

pub type Vec2 = [OElement; 2];

#[derive(Clone, Debug, Serialize)]
pub struct FiltrationCoordinate {
    pub coordinate: usize,
    /// Generator (x_i, y_i) of Fil^j for 1 ≤ j ≤ k_i, as base-p digit strings.
    pub pair: [String; 2],
    /// Π_i·φ(v) = q^{k_i}·c verified exactly for the witness v.
    pub divisible: bool,
    /// c(0) has a unit entry, so the witness leaves Fil^{k_i+1}.
    pub jump_exact: bool,
    pub matches_display: bool,
}

#[derive(Clone, Debug)]
pub struct FilteredModuleData {
    pub frobenius: Vec<OMat>,
    pub fil_pairs: Vec<Vec2>,
    pub jumps: Vec<[u64; 2]>,
    pub coordinates: Vec<FiltrationCoordinate>,
}

impl FilteredModuleData {
    pub fn agrees(&self) -> bool {
        self.coordinates
            .iter()
            .all(|c| c.divisible && c.jump_exact && c.matches_display)
    }
}

/// Reads the filtration off Π through the criterion φ(v) ∈ q^j N.
///
/// `pi` is the (possibly perturbed) matrix, `twist` the factor Id+Â with Π = twist·shape,
/// `z` the z-polynomials and `a` the parameters.
pub fn extract_filtration(
    sr: &SeriesRing,
    fam: &TypedMatrixFamily,
    pi: &TauMatrix,
    twist: Option<&TauMatrix>,
    z: &[Vec<OElement>],
    a: &[OElement],
) -> FilteredModuleData {
    let ring = sr.ring();
    let q = sr.q();
    let mut coords = Vec::with_capacity(fam.f());
    let mut pairs = Vec::with_capacity(fam.f());
    let alpha: Vec<OElement> = (0..fam.f()).map(|i| ring.mul(&z[i][0], &a[i])).collect();
    let display = fam.filtration_pairs(ring, &alpha);
    for i in 0..fam.f() {
        let t = fam.types[i];
        let (_, c1) = t.one_pos();
        let c2 = 1 - c1;
        let mut zs = sr.zero();
        for (j, x) in z[i].iter().enumerate().take(sr.d()) {
            zs.c[j] = *x;
        }
        let mut v: [Series; 2] = [sr.zero(), sr.zero()];
        v[c2] = sr.one();
        v[c1] = sr.neg(&sr.scale(&zs, &a[i]));
        let phv = [sr.phi_subst(&v[0]), sr.phi_subst(&v[1])];
        let m = &pi.coords[i];
        let w = [
            sr.add(&sr.mul(&m[0][0], &phv[0]), &sr.mul(&m[0][1], &phv[1])),
            sr.add(&sr.mul(&m[1][0], &phv[0]), &sr.mul(&m[1][1], &phv[1])),
        ];
        // expected cofactor: twist · (u_i e_{pk-row})
        let (pr, _) = t.pk_pos();
        let u = fam.unit(ring, i);
        let mut c: [Series; 2] = [sr.zero(), sr.zero()];
        c[pr] = sr.constant(u);
        if let Some(tw) = twist {
            let tm = &tw.coords[i];
            c = [
                sr.add(&sr.mul(&tm[0][0], &c[0]), &sr.mul(&tm[0][1], &c[1])),
                sr.add(&sr.mul(&tm[1][0], &c[0]), &sr.mul(&tm[1][1], &c[1])),
            ];
        }
        let qk = sr.pow(&q, fam.k(i) as u32);
        let divisible = sr.mul(&qk, &c[0]) == w[0] && sr.mul(&qk, &c[1]) == w[1];
        let jump_exact = fam.k(i) == 0 || ring.is_unit(&c[0].c[0]) || ring.is_unit(&c[1].c[0]);
        let pair = [v[0].c[0], v[1].c[0]];
        let matches_display = pair[0] == display[i].0 && pair[1] == display[i].1;
        coords.push(FiltrationCoordinate {
            coordinate: i,
            pair: [ring.digit_string(&pair[0]), ring.digit_string(&pair[1])],
            divisible,
            jump_exact,
            matches_display,
        });
        pairs.push(pair);
    }
    FilteredModuleData {
        frobenius: crate::wach::pi_mod_pi(sr, pi),
        fil_pairs: pairs,
        jumps: (0..fam.f()).map(|i| hodge_tate_jumps(fam.k(i))).collect(),
        coordinates: coords,
    }
}

/// Jump multiset of a rank-2 filtration dropping to rank 1 at 1 and to 0 past k.
pub fn hodge_tate_jumps(k: u64) -> [u64; 2] {
    [0, k]
}

pub fn hodge_tate_type(fmd: &FilteredModuleData) -> Vec<[u64; 2]> {
    fmd.jumps.clone()
}

#[derive(Clone, Debug, Serialize)]
pub struct LineCertificate {
    /// Coordinates at which the line equals the filtration line.
    pub on_filtration: Vec<usize>,
    pub t_n: u32,
    pub t_h: u64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeakAdmissibility {
    pub t_n: Val,
    pub t_h: u64,
    /// "lines", "scalar" or "irreducible-at-precision".
    pub structure: String,
    pub lines: Vec<LineCertificate>,
    pub verdict: bool,
}

fn normalize(ring: &Ring, v: &Vec2) -> Option<Vec2> {
    let m = ring.valuation(&v[0]).min(ring.valuation(&v[1]));
    if m == VAL_INF {
        return None;
    }
    Some([
        ring.div_p_power(&v[0], m).unwrap(),
        ring.div_p_power(&v[1], m).unwrap(),
    ])
}

fn apply(ring: &Ring, m: &OMat, v: &Vec2) -> Vec2 {
    [
        ring.add(&ring.mul(&m[0][0], &v[0]), &ring.mul(&m[0][1], &v[1])),
        ring.add(&ring.mul(&m[1][0], &v[0]), &ring.mul(&m[1][1], &v[1])),
    ]
}

fn same_line(ring: &Ring, a: &Vec2, b: &Vec2, threshold: u32) -> bool {
    let d = ring.sub(&ring.mul(&a[0], &b[1]), &ring.mul(&a[1], &b[0]));
    ring.valuation(&d) >= threshold
}

/// Square root in O_E of x = p^{2e}·u with u a square mod p, by Hensel.
pub fn sqrt(ring: &Ring, x: &OElement) -> Option<OElement> {
    let (v, u) = ring.split(x)?;
    if v % 2 == 1 {
        return None;
    }
    let k = ring.residue_field();
    let ub = ring.reduce(&u);
    let s0 = k.elements().find(|s| k.mul(s, s) == ub)?;
    let mut s = ring.lift(&s0);
    let two_inv = ring.inv_unit(&ring.from_int(2))?;
    for _ in 0..8 {
        let sinv = ring.inv_unit(&s)?;
        s = ring.mul(&ring.add(&s, &ring.mul(&u, &sinv)), &two_inv);
    }
    Some(ring.mul(&s, &ring.p_power(v / 2)))
}

/// φ-stable rank-one subobjects from the eigenlines of Q_f at the position after 0,
/// propagated by L_i = P_i L_{i+1}.
pub fn weak_admissibility(
    ring: &Ring,
    frob: &[OMat],
    fil: &[Vec2],
    k: &[u64],
) -> WeakAdmissibility {
    let f = frob.len();
    let order = product_order(f);
    let start = order[0];
    let q = order.iter().fold(crate::series::omat_id(ring), |acc, &j| {
        omat_mul(ring, &acc, &frob[j])
    });
    let t_n = ring.valuation(&omat_det(ring, &q));
    let t_h: u64 = k.iter().sum();
    let threshold = ring.precision() / 2;

    let propagate = |l1: Vec2| -> Option<Vec<Vec2>> {
        let mut l = vec![[ring.zero(); 2]; f];
        l[start] = l1;
        for &j in order.iter().rev() {
            if j == start {
                continue;
            }
            l[j] = normalize(ring, &apply(ring, &frob[j], &l[(j + 1) % f]))?;
        }
        Some(l)
    };
    let certify = |l: &[Vec2], lambda_val: u32| -> LineCertificate {
        let on: Vec<usize> = (0..f)
            .filter(|&i| k[i] > 0 && same_line(ring, &l[i], &fil[i], threshold))
            .collect();
        let th: u64 = on.iter().map(|&i| k[i]).sum();
        LineCertificate {
            pass: lambda_val as u64 >= th,
            on_filtration: on,
            t_n: lambda_val,
            t_h: th,
        }
    };

    let tr = ring.add(&q[0][0], &q[1][1]);
    let det = omat_det(ring, &q);
    let disc = ring.sub(&ring.mul(&tr, &tr), &ring.mul_scalar(&det, 4));
    let two_inv = ring.inv_unit(&ring.from_int(2)).expect("p odd");
    let mut lines = Vec::new();
    let structure;
    let scalar = ring.is_zero(&q[0][1])
        && ring.is_zero(&q[1][0])
        && ring.is_zero(&ring.sub(&q[0][0], &q[1][1]));
    if scalar {
        structure = "scalar";
        let lv = ring.valuation(&q[0][0]);
        // every line is stable; the ones meeting a filtration line are the only candidates
        let mut seen: Vec<Vec2> = Vec::new();
        for i in 0..f {
            if k[i] == 0 {
                continue;
            }
            let mut l = fil[i];
            let mut j = i;
            let mut ok = true;
            while j != start {
                match normalize(ring, &apply(ring, &omat_adj(ring, &frob[j]), &l)) {
                    Some(x) => l = x,
                    None => {
                        ok = false;
                        break;
                    }
                }
                j = (j + 1) % f;
            }
            if !ok || seen.iter().any(|s| same_line(ring, s, &l, threshold)) {
                continue;
            }
            seen.push(l);
            if let Some(all) = propagate(l) {
                lines.push(certify(&all, lv));
            }
        }
    } else if let Some(s) = if ring.is_zero(&disc) {
        Some(ring.zero())
    } else {
        sqrt(ring, &disc)
    } {
        structure = "lines";
        let mut roots = vec![ring.mul(&ring.add(&tr, &s), &two_inv)];
        if !ring.is_zero(&s) {
            roots.push(ring.mul(&ring.sub(&tr, &s), &two_inv));
        }
        for lambda in roots {
            let m = [
                [ring.sub(&q[0][0], &lambda), q[0][1]],
                [q[1][0], ring.sub(&q[1][1], &lambda)],
            ];
            let v0 = [m[0][1], ring.neg(&m[0][0])];
            let v1 = [m[1][1], ring.neg(&m[1][0])];
            let pick = if ring.valuation(&m[0][0]).min(ring.valuation(&m[0][1]))
                <= ring.valuation(&m[1][0]).min(ring.valuation(&m[1][1]))
            {
                v0
            } else {
                v1
            };
            if let Some(l1) = normalize(ring, &pick) {
                if let Some(all) = propagate(l1) {
                    lines.push(certify(&all, ring.valuation(&lambda)));
                }
            }
        }
    } else {
        structure = "irreducible-at-precision";
    }
    let verdict = t_n as u64 == t_h && lines.iter().all(|l| l.pass);
    WeakAdmissibility {
        t_n,
        t_h,
        structure: structure.into(),
        lines,
        verdict,
    }
}

/// A module that must fail: Frobenius diag(1, p^{k_i}) with the filtration on the slope-0 line.
pub fn inadmissible_control(ring: &Ring, k: &[u64]) -> WeakAdmissibility {
    let frob: Vec<OMat> = k
        .iter()
        .map(|&ki| {
            [
                [ring.one(), ring.zero()],
                [ring.zero(), ring.p_power(ki as u32)],
            ]
        })
        .collect();
    let fil: Vec<Vec2> = k.iter().map(|_| [ring.one(), ring.zero()]).collect();
    weak_admissibility(ring, &frob, &fil, k)
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct ReductionExponents {
    pub kind: Case,
    pub modulus: u64,
    pub beta: u64,
    /// p^f·β for the induced case, β′ for the split case.
    pub beta_prime: u64,
}

/// Exponents of the fundamental characters: induced mod p^{2f}−1, split mod p^f−1.
pub fn reduction_exponents(p: u64, spec: &FamilySpec) -> ReductionExponents {
    exponents_of(p, spec.case, &spec.ell)
}

pub fn exponents_of(p: u64, case: Case, ell: &[u64]) -> ReductionExponents {
    let f = ell.len() / 2;
    let p = p as i128;
    let sum = |range: std::ops::Range<usize>, shift: usize| -> i128 {
        range
            .map(|i| ell[i] as i128 * p.pow((i - shift) as u32))
            .sum()
    };
    match case {
        Case::Induced => {
            let modulus = p.pow(2 * f as u32) - 1;
            let beta = (-sum(0..2 * f, 0)).rem_euclid(modulus);
            let pf = p.pow(f as u32);
            ReductionExponents {
                kind: Case::Induced,
                modulus: modulus as u64,
                beta: beta as u64,
                beta_prime: (beta * pf).rem_euclid(modulus) as u64,
            }
        }
        Case::Split => {
            let modulus = p.pow(f as u32) - 1;
            ReductionExponents {
                kind: Case::Split,
                modulus: modulus as u64,
                beta: (-sum(0..f, 0)).rem_euclid(modulus) as u64,
                beta_prime: (-sum(f..2 * f, f)).rem_euclid(modulus) as u64,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{assign_types, FamilySpec};

    #[test]
    fn exponents() {
        let s = FamilySpec::new(3, Case::Induced, &[5], &[0, 5], vec![], vec![]).unwrap();
        let e = reduction_exponents(3, &s);
        assert_eq!((e.modulus, e.beta, e.beta_prime), (8, 1, 3));
        let e = exponents_of(3, Case::Split, &[1, 0, 0, 1]);
        assert_eq!((e.modulus, e.beta, e.beta_prime), (8, 7, 5));
    }

    #[test]
    fn hensel_sqrt() {
        let r = Ring::new(5, 1, 12).unwrap();
        let x = r.from_int(4 * 25 * 11 * 11);
        let s = sqrt(&r, &x).unwrap();
        assert_eq!(r.mul(&s, &s), x);
        assert!(sqrt(&r, &r.from_int(2)).is_none());
        assert!(sqrt(&r, &r.from_int(5)).is_none());
    }

    #[test]
    fn control_is_inadmissible() {
        let r = Ring::new(3, 1, 12).unwrap();
        let w = inadmissible_control(&r, &[5, 3]);
        assert!(!w.verdict);
        assert_eq!(w.t_n, 8);
    }

    #[test]
    fn split_zero_parameter_lines() {
        let r = Ring::new(3, 2, 14).unwrap();
        let s = FamilySpec::new(3, Case::Split, &[3, 3], &[3, 0, 0, 3], vec![], vec![2]).unwrap();
        let fam = assign_types(&s, 3);
        let ctx = crate::padic::make_context(3, 2, 2, 14, 10, 0).unwrap();
        let zero = vec![r.zero(); 2];
        let frob = fam.evaluate_p(&ctx, &zero, None, 0).unwrap();
        let fil: Vec<Vec2> = fam
            .filtration_pairs(&r, &zero)
            .into_iter()
            .map(|(x, y)| [x, y])
            .collect();
        let w = weak_admissibility(&r, &frob, &fil, &[3, 3]);
        assert_eq!(w.structure, "lines");
        assert_eq!(w.lines.len(), 2);
        assert!(w.verdict, "{w:?}");
    }
}
