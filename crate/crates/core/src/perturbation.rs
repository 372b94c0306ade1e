//! Constant perturbations A, their series lifts Â and the perturbed solve.

use rand::Rng as _;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::padic::{OElement, Ring, Val, VAL_INF};
use crate::series::{omat_valuation, OMat, Series, SeriesRing, TauMatrix};
use crate::wach::{GammaSolution, SolveError, WachProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Hash)]
pub enum Regime {
    /// A ∈ M_2(p^{α(k−1)} O_E)
    #[serde(rename = "theorem-a-i")]
    C0,
    /// A ∈ M_2(p^{1+α(k−1)} O_E)
    #[serde(rename = "theorem-a-ii")]
    C1,
}

impl Regime {
    pub fn c(self) -> u32 {
        match self {
            Regime::C0 => 0,
            Regime::C1 => 1,
        }
    }
    pub fn name(self) -> &'static str {
        match self {
            Regime::C0 => "theorem-a-i",
            Regime::C1 => "theorem-a-ii",
        }
    }
}

#[derive(Debug, Error, Clone, Serialize)]
pub enum PerturbError {
    #[error("A[{coordinate}] has valuation {have}, outside the disk p^{need}")]
    OutsideDisk {
        coordinate: usize,
        have: Val,
        need: Val,
    },
    #[error("coefficient at degree {degree} has valuation {have} < {need} required for division by 1 - chi^{degree}")]
    Division { degree: usize, have: Val, need: Val },
}

#[derive(Clone, Debug)]
pub struct PerturbationData {
    pub a: Vec<OMat>,
    pub a_hat: TauMatrix,
    pub pi_a: TauMatrix,
    /// det(Id + Â_i), a unit series per coordinate.
    pub det_unit: Vec<Series>,
    /// Σ v_p(1 − χ^j) over the divisions performed.
    pub division_loss: u32,
}

fn one_minus_chi_pow(ring: &Ring, chi: u64, j: usize) -> OElement {
    let c = ring.pow(&ring.from_int(chi as i128), j as u64);
    ring.sub(&ring.one(), &c)
}

/// Â with Â ≡ A mod π and (Id+Â)·G ≡ G·γ(Id+Â) mod π^k, built coefficient by coefficient.
pub fn build_a_hat(
    sr: &SeriesRing,
    a: &[OMat],
    g: &TauMatrix,
    chi: u64,
    k_max: usize,
) -> Result<(TauMatrix, u32), PerturbError> {
    let ring = sr.ring();
    let f = a.len();
    let table = sr.gamma_table(chi);
    let id = sr.tau_id(f);
    let mut hat = TauMatrix {
        coords: a.iter().map(|m| sr.mat_const(m)).collect(),
    };
    let mut loss = 0;
    for j in 1..k_max.min(sr.d()) {
        let one_plus = sr.tau_add(&id, &hat);
        let rhs = sr.tau_mul(g, &sr.apply_gamma(&one_plus, &table));
        let lhs = sr.tau_mul(&one_plus, g);
        let e = sr.tau_sub(&rhs, &lhs);
        let (v, unit) = ring
            .split(&one_minus_chi_pow(ring, chi, j))
            .expect("1 - chi^j is nonzero for a generator");
        let uinv = ring.inv_unit(&unit).expect("unit");
        for (i, m) in e.coords.iter().enumerate() {
            let c = sr.mat_coeff(m, j);
            let mut out = c;
            for r in 0..2 {
                for s in 0..2 {
                    let have = ring.valuation(&c[r][s]);
                    if have < v {
                        return Err(PerturbError::Division {
                            degree: j,
                            have,
                            need: v,
                        });
                    }
                    let q = ring.div_p_power(&c[r][s], v).expect("checked valuation");
                    out[r][s] = ring.mul(&q, &uinv);
                }
            }
            sr.mat_set_coeff(&mut hat.coords[i], j, &out);
        }
        loss += v;
    }
    Ok((hat, loss))
}

/// Rejects A with an entry of valuation below `min_val`.
pub fn check_disk(ring: &Ring, a: &[OMat], min_val: u32) -> Result<(), PerturbError> {
    for (i, m) in a.iter().enumerate() {
        let v = omat_valuation(ring, m);
        if v < min_val {
            return Err(PerturbError::OutsideDisk {
                coordinate: i,
                have: v,
                need: min_val,
            });
        }
    }
    Ok(())
}

pub fn perturb(
    sr: &SeriesRing,
    pi: &TauMatrix,
    a: &[OMat],
    g: &TauMatrix,
    chi: u64,
    k_max: usize,
) -> Result<PerturbationData, PerturbError> {
    let (a_hat, division_loss) = build_a_hat(sr, a, g, chi, k_max)?;
    let id = sr.tau_id(a.len());
    let one_plus = sr.tau_add(&id, &a_hat);
    let pi_a = sr.tau_mul(&one_plus, pi);
    let det_unit = one_plus.coords.iter().map(|m| sr.mat_det(m)).collect();
    Ok(PerturbationData {
        a: a.to_vec(),
        a_hat,
        pi_a,
        det_unit,
        division_loss,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConjugationReport {
    /// Â ≡ A mod π exactly.
    pub constant_term_matches: bool,
    /// First π-degree whose coefficient has valuation below the trusted precision.
    pub first_nonzero_degree: Option<usize>,
    /// Minimal valuation of the difference below degree k.
    pub margin_below_k: Val,
    /// Minimal valuation of the whole difference (≥ 1 means ≡ 0 mod p).
    pub min_valuation: Val,
    pub trusted_precision: u32,
}

/// Compares (Id+Â)·G with G·γ(Id+Â) (the integral form of the conjugation identity).
pub fn verify_conjugation(
    sr: &SeriesRing,
    data: &PerturbationData,
    g: &TauMatrix,
    chi: u64,
    k_max: usize,
) -> ConjugationReport {
    let ring = sr.ring();
    let f = data.a.len();
    let table = sr.gamma_table(chi);
    let one_plus = sr.tau_add(&sr.tau_id(f), &data.a_hat);
    let diff = sr.tau_sub(
        &sr.tau_mul(&one_plus, g),
        &sr.tau_mul(g, &sr.apply_gamma(&one_plus, &table)),
    );
    let trusted = ring.precision().saturating_sub(data.division_loss);
    let mut first = None;
    let mut min_val = VAL_INF;
    let mut below_k = VAL_INF;
    for d in 0..sr.d() {
        let v = diff
            .coords
            .iter()
            .map(|m| omat_valuation(ring, &sr.mat_coeff(m, d)))
            .min()
            .unwrap_or(VAL_INF);
        min_val = min_val.min(v);
        if first.is_none() && v < trusted {
            first = Some(d);
        }
        if d < k_max {
            below_k = below_k.min(v);
        }
    }
    let constant_term_matches = data
        .a_hat
        .coords
        .iter()
        .zip(&data.a)
        .all(|(m, a)| sr.mat_coeff(m, 0) == *a);
    let n = ring.precision();
    ConjugationReport {
        constant_term_matches,
        first_nonzero_degree: first,
        margin_below_k: below_k.min(n),
        min_valuation: min_val.min(n),
        trusted_precision: trusted,
    }
}

#[derive(Clone, Debug)]
pub struct PerturbedSolve {
    pub solution: GammaSolution,
    /// Minimal valuation of the corrections applied to the seeded degrees.
    pub seed_agreement: Val,
}

/// Solve for Π_Â with degrees below k seeded from the unperturbed G.
pub fn solve_perturbed(
    sr: &SeriesRing,
    pi_a: &TauMatrix,
    k: &[u64],
    chi: u64,
    base: &TauMatrix,
) -> Result<PerturbedSolve, SolveError> {
    let k_max = k.iter().copied().max().unwrap_or(0) as usize;
    let mut seed = base.clone();
    for m in seed.coords.iter_mut() {
        for d in k_max..sr.d() {
            sr.mat_set_coeff(m, d, &crate::series::omat_zero(sr.ring()));
        }
    }
    let solution = WachProblem::new(sr, pi_a, k, chi).solve_from(seed)?;
    let seed_agreement = solution
        .steps
        .iter()
        .filter(|s| s.degree < k_max)
        .map(|s| s.correction_valuation)
        .min()
        .unwrap_or(sr.ring().precision());
    Ok(PerturbedSolve {
        solution,
        seed_agreement,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainStep {
    pub s: usize,
    pub rbar_margin: Val,
    pub h_margin: Val,
    pub pass: bool,
}

/// H_Â^{(s)} ≡ H^{(s)} and R̄_Â^{(s)} ≡ R̄^{(s)} mod p at every lift step.
pub fn verify_mod_i_chain(
    ring: &Ring,
    base: &GammaSolution,
    pert: &GammaSolution,
) -> Vec<ChainStep> {
    base.lifts
        .iter()
        .zip(&pert.lifts)
        .map(|(x, y)| {
            let rm = x
                .rbar
                .iter()
                .zip(&y.rbar)
                .map(|(a, b)| crate::wach::omat_diff_valuation(ring, a, b))
                .min()
                .unwrap_or(VAL_INF);
            let hm =
                x.h.iter()
                    .zip(&y.h)
                    .map(|(a, b)| crate::wach::omat_diff_valuation(ring, a, b))
                    .min()
                    .unwrap_or(VAL_INF);
            ChainStep {
                s: x.s,
                rbar_margin: rm.min(ring.precision()),
                h_margin: hm.min(ring.precision()),
                pass: x.s == y.s && rm >= 1 && hm >= 1,
            }
        })
        .collect()
}

fn uniform(ring: &Ring, rng: &mut ChaCha8Rng, base_val: u32) -> OElement {
    let n = ring.precision();
    if base_val >= n {
        return ring.zero();
    }
    let bound = crate::padic::pow_word(ring.p(), n - base_val);
    let c: Vec<i128> = (0..ring.ext())
        .map(|_| rng.gen_range(0..bound) as i128)
        .collect();
    ring.mul(&ring.from_coeffs(&c), &ring.p_power(base_val))
}

/// A with entries p^{c+α}·u, u uniform mod p^{N−c−α}.
pub fn sample_a(ring: &Ring, rng: &mut ChaCha8Rng, f: usize, min_val: u32) -> Vec<OMat> {
    (0..f)
        .map(|_| {
            let mut m = [[ring.zero(); 2]; 2];
            for row in m.iter_mut() {
                for x in row.iter_mut() {
                    *x = uniform(ring, rng, min_val);
                }
            }
            m
        })
        .collect()
}

/// Scalar A = p^{min_val}·u·Id per coordinate.
pub fn sample_scalar_a(ring: &Ring, rng: &mut ChaCha8Rng, f: usize, min_val: u32) -> Vec<OMat> {
    (0..f)
        .map(|_| {
            let s = uniform(ring, rng, min_val);
            [[s, ring.zero()], [ring.zero(), s]]
        })
        .collect()
}

/// a_i = p·u with u uniform mod p^{N−m−1}, so α_i = p^m a_i lies in p^m m_E.
pub fn sample_params(ring: &Ring, rng: &mut ChaCha8Rng, f: usize, m: u32) -> Vec<OElement> {
    let n = ring.precision();
    (0..f)
        .map(|_| {
            let top = n.saturating_sub(m + 1);
            let bound = crate::padic::pow_word(ring.p(), top);
            let c: Vec<i128> = (0..ring.ext())
                .map(|_| rng.gen_range(0..bound.max(1)) as i128)
                .collect();
            ring.mul(&ring.from_coeffs(&c), &ring.p_power(1))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{assign_types, Case, FamilySpec};
    use crate::wach::{build_pi, choose_z};
    use rand::SeedableRng;

    fn setup() -> (
        SeriesRing,
        crate::family::TypedMatrixFamily,
        Vec<Vec<OElement>>,
    ) {
        let ring = Ring::new(3, 1, 16).unwrap();
        let sr = SeriesRing::new(ring, 12);
        let spec = FamilySpec::new(3, Case::Induced, &[5], &[0, 5], vec![], vec![]).unwrap();
        let fam = assign_types(&spec, 3);
        let a = vec![sr.ring().from_int(3)];
        let (z, _) = choose_z(&sr, &fam, 2, &[a], 2).unwrap();
        (sr, fam, z)
    }

    #[test]
    fn zero_and_scalar_perturbations() {
        let (sr, fam, z) = setup();
        let r = sr.ring().clone();
        let data = build_pi(&sr, &fam, &[r.from_int(6)], &z);
        let g = WachProblem::new(&sr, &data.pi, &[5], 2).solve().unwrap();
        let zero = vec![[[r.zero(); 2]; 2]];
        let (hat, _) = build_a_hat(&sr, &zero, &g.g, 2, 5).unwrap();
        assert_eq!(hat, sr.tau_zero(1));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sa = sample_scalar_a(&r, &mut rng, 1, 2);
        let (hat, _) = build_a_hat(&sr, &sa, &g.g, 2, 5).unwrap();
        assert_eq!(hat.coords[0], sr.mat_const(&sa[0]));
    }

    #[test]
    fn generic_perturbation_conjugates_and_resolves() {
        let (sr, fam, z) = setup();
        let r = sr.ring().clone();
        let data = build_pi(&sr, &fam, &[r.from_int(6)], &z);
        let g = WachProblem::new(&sr, &data.pi, &[5], 2).solve().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = sample_a(&r, &mut rng, 1, 3);
        let pd = perturb(&sr, &data.pi, &a, &g.g, 2, 5).unwrap();
        let rep = verify_conjugation(&sr, &pd, &g.g, 2, 5);
        assert!(rep.constant_term_matches);
        assert!(rep.first_nonzero_degree.is_none_or(|d| d >= 5));
        assert!(rep.min_valuation >= 1);
        let ps = solve_perturbed(&sr, &pd.pi_a, &[5], 2, &g.g).unwrap();
        assert_eq!(ps.solution.residual_valuation, VAL_INF);
        let chain = verify_mod_i_chain(&r, &g, &ps.solution);
        assert!(!chain.is_empty() && chain.iter().all(|c| c.pass));
    }

    #[test]
    fn zero_perturbation_reproduces_solution() {
        let (sr, fam, z) = setup();
        let r = sr.ring().clone();
        let data = build_pi(&sr, &fam, &[r.from_int(3)], &z);
        let g = WachProblem::new(&sr, &data.pi, &[5], 2).solve().unwrap();
        let zero = vec![[[r.zero(); 2]; 2]];
        let pd = perturb(&sr, &data.pi, &zero, &g.g, 2, 5).unwrap();
        let ps = solve_perturbed(&sr, &pd.pi_a, &[5], 2, &g.g).unwrap();
        assert_eq!(ps.solution.g, g.g);
    }

    #[test]
    fn outside_disk_fires_division_assertion() {
        let (sr, fam, z) = setup();
        let r = sr.ring().clone();
        let data = build_pi(&sr, &fam, &[r.from_int(6)], &z);
        let g = WachProblem::new(&sr, &data.pi, &[5], 2).solve().unwrap();
        // a unit off-diagonal entry cannot absorb the divisions by 1 - 4 and 1 - 16
        let a = vec![[[r.zero(), r.one()], [r.zero(), r.zero()]]];
        assert!(build_a_hat(&sr, &a, &g.g, 2, 5).is_err());
    }
}
