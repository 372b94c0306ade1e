//! Wach-module matrices Π(a) and the Γ-action matrix G with Π·φ(G) = G·γ(Π),
//! solved degree by degree in π.

use serde::Serialize;
use thiserror::Error;

use crate::family::TypedMatrixFamily;
use crate::padic::{solve_linear, solve_linear_general, LinearError, OElement, Ring, Val, VAL_INF};
use crate::series::{
    omat_mul, omat_scaled_inverse, omat_sub, OMat, SMat, Series, SeriesRing, SubstTable, TauMatrix,
};

#[derive(Debug, Error, Clone, Serialize)]
pub enum SolveError {
    #[error("obstruction at degree {degree} ({phase}): {error}")]
    Obstruction {
        degree: usize,
        phase: &'static str,
        error: LinearError,
    },
    #[error("z determination failed: {0}")]
    NoZ(String),
}

/// Π(a) together with the data it was built from.
#[derive(Clone, Debug)]
pub struct PiData {
    pub family: TypedMatrixFamily,
    /// Coefficients of z_i in π, degree ≤ k_max − 1.
    pub z: Vec<Vec<OElement>>,
    pub a: Vec<OElement>,
    pub units: Vec<OElement>,
    pub pi: TauMatrix,
}

/// Π_i = type shape with u_i q^{k_i} and a_i φ(z_i).
pub fn build_pi(
    sr: &SeriesRing,
    fam: &TypedMatrixFamily,
    a: &[OElement],
    z: &[Vec<OElement>],
) -> PiData {
    let ring = sr.ring();
    let q = sr.q();
    let units: Vec<OElement> = (0..fam.f()).map(|i| fam.unit(ring, i)).collect();
    let coords = (0..fam.f())
        .map(|i| {
            let t = fam.types[i];
            let mut m = sr.mat_zero();
            let (r, c) = t.pk_pos();
            m[r][c] = sr.scale(&sr.pow(&q, fam.k(i) as u32), &units[i]);
            let mut zs = sr.zero();
            for (j, x) in z[i].iter().enumerate().take(sr.d()) {
                zs.c[j] = *x;
            }
            let (r, c) = t.x_pos();
            m[r][c] = sr.scale(&sr.phi_subst(&zs), &a[i]);
            let (r, c) = t.one_pos();
            m[r][c] = sr.one();
            m
        })
        .collect();
    PiData {
        family: fam.clone(),
        z: z.to_vec(),
        a: a.to_vec(),
        units,
        pi: TauMatrix { coords },
    }
}

/// z_i = p^{m_k} for every coordinate.
pub fn constant_z(ring: &Ring, fam: &TypedMatrixFamily) -> Vec<Vec<OElement>> {
    (0..fam.f())
        .map(|_| vec![ring.p_power(fam.m_k as u32)])
        .collect()
}

/// Π mod π.
pub fn pi_mod_pi(sr: &SeriesRing, pi: &TauMatrix) -> Vec<OMat> {
    pi.coords.iter().map(|m| sr.mat_coeff(m, 0)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct DegreeStep {
    pub degree: usize,
    pub phase: &'static str,
    pub loss: u32,
    /// Minimal valuation of the correction added at this degree, capped at N.
    pub correction_valuation: Val,
}

#[derive(Clone, Debug)]
pub struct LiftStep {
    /// s with the new coefficient at π^{s−1}.
    pub s: usize,
    pub rbar: Vec<OMat>,
    pub h: Vec<OMat>,
}

#[derive(Clone, Debug)]
pub struct GammaSolution {
    pub g: TauMatrix,
    pub achieved_degree: usize,
    /// Minimal valuation of the defect below π^D; `VAL_INF` when it vanishes mod p^N.
    pub residual_valuation: Val,
    pub steps: Vec<DegreeStep>,
    pub lifts: Vec<LiftStep>,
}

impl GammaSolution {
    pub fn total_loss(&self) -> u32 {
        self.steps.iter().map(|s| s.loss).sum()
    }
    pub fn max_loss(&self) -> u32 {
        self.steps.iter().map(|s| s.loss).max().unwrap_or(0)
    }
}

/// The equation G·γ(Π) − Π·φ(G) = S for a fixed Π, γ and source S.
pub struct WachProblem<'a> {
    pub sr: &'a SeriesRing,
    pub pi: &'a TauMatrix,
    pub k: Vec<u64>,
    gamma: SubstTable,
    gamma_pi: TauMatrix,
    source: Option<TauMatrix>,
}

impl<'a> WachProblem<'a> {
    pub fn new(sr: &'a SeriesRing, pi: &'a TauMatrix, k: &[u64], chi: u64) -> Self {
        let gamma = sr.gamma_table(chi);
        let gamma_pi = sr.apply_gamma(pi, &gamma);
        WachProblem {
            sr,
            pi,
            k: k.to_vec(),
            gamma,
            gamma_pi,
            source: None,
        }
    }
    pub fn with_source(mut self, s: TauMatrix) -> Self {
        self.source = Some(s);
        self
    }
    pub fn gamma_table(&self) -> &SubstTable {
        &self.gamma
    }
    fn f(&self) -> usize {
        self.pi.coords.len()
    }
    fn k_max(&self) -> usize {
        self.k.iter().copied().max().unwrap_or(0) as usize
    }

    /// Δ = G·γ(Π) − Π·φ(G) − S.
    pub fn defect(&self, g: &TauMatrix) -> TauMatrix {
        let sr = self.sr;
        let lhs = sr.tau_mul(g, &self.gamma_pi);
        let rhs = sr.tau_mul(self.pi, &sr.apply_phi(g));
        let d = sr.tau_sub(&lhs, &rhs);
        match &self.source {
            Some(s) => sr.tau_sub(&d, s),
            None => d,
        }
    }

    /// Solve degrees 1..D−1 starting from `start`, adding corrections at each degree.
    pub fn solve_from(&self, start: TauMatrix) -> Result<GammaSolution, SolveError> {
        let sr = self.sr;
        let ring = sr.ring();
        let f = self.f();
        let p0 = pi_mod_pi(sr, self.pi);
        let k_max = self.k_max();
        let mut g = start;
        let mut steps = Vec::new();
        let mut lifts = Vec::new();
        for d in 1..sr.d() {
            let delta = self.defect(&g);
            let rhs: Vec<OMat> = delta
                .coords
                .iter()
                .map(|m| {
                    let c = sr.mat_coeff(m, d);
                    [
                        [ring.neg(&c[0][0]), ring.neg(&c[0][1])],
                        [ring.neg(&c[1][0]), ring.neg(&c[1][1])],
                    ]
                })
                .collect();
            let (x, loss, phase) = if d < k_max {
                let (x, loss) =
                    base_step(ring, &p0, d, &rhs).map_err(|e| SolveError::Obstruction {
                        degree: d,
                        phase: "base",
                        error: e,
                    })?;
                (x, loss, "base")
            } else {
                let (x, rbar, loss) =
                    lift_step(ring, &p0, d, &rhs).map_err(|e| SolveError::Obstruction {
                        degree: d,
                        phase: "lift",
                        error: e,
                    })?;
                lifts.push(LiftStep {
                    s: d + 1,
                    rbar,
                    h: x.clone(),
                });
                (x, loss, "lift")
            };
            let mut cv = VAL_INF;
            for i in 0..f {
                cv = cv.min(crate::series::omat_valuation(ring, &x[i]));
                let cur = sr.mat_coeff(&g.coords[i], d);
                let new = crate::series::omat_add(ring, &cur, &x[i]);
                sr.mat_set_coeff(&mut g.coords[i], d, &new);
            }
            steps.push(DegreeStep {
                degree: d,
                phase,
                loss,
                correction_valuation: cv.min(ring.precision()),
            });
        }
        let residual = sr.tau_valuation(&self.defect(&g));
        Ok(GammaSolution {
            g,
            achieved_degree: sr.d(),
            residual_valuation: residual,
            steps,
            lifts,
        })
    }

    pub fn solve(&self) -> Result<GammaSolution, SolveError> {
        self.solve_from(self.sr.tau_id(self.f()))
    }
}

/// Unknown index of entry (r, c) of coordinate i.
fn idx(i: usize, r: usize, c: usize) -> usize {
    4 * i + 2 * r + c
}

/// X_i P_i − p^d P_i X_{i+1} = rhs_i over all coordinates.
fn base_step(
    ring: &Ring,
    p0: &[OMat],
    d: usize,
    rhs: &[OMat],
) -> Result<(Vec<OMat>, u32), LinearError> {
    let f = p0.len();
    let n = 4 * f;
    let pd = ring.p_power(d as u32);
    let mut m = vec![vec![ring.zero(); n]; n];
    let mut b = vec![ring.zero(); n];
    for i in 0..f {
        let j = (i + 1) % f;
        for r in 0..2 {
            for c in 0..2 {
                let row = idx(i, r, c);
                for t in 0..2 {
                    let col = idx(i, r, t);
                    m[row][col] = ring.add(&m[row][col], &p0[i][t][c]);
                    let col = idx(j, t, c);
                    let v = ring.mul(&pd, &p0[i][r][t]);
                    m[row][col] = ring.sub(&m[row][col], &v);
                }
                b[row] = rhs[i][r][c];
            }
        }
    }
    let sol = solve_linear(ring, &m, &b)?;
    let x = (0..f)
        .map(|i| {
            [
                [sol.x[idx(i, 0, 0)], sol.x[idx(i, 0, 1)]],
                [sol.x[idx(i, 1, 0)], sol.x[idx(i, 1, 1)]],
            ]
        })
        .collect();
    Ok((x, sol.loss))
}

/// Solve X·P = B for 2×2 matrices; exact residual when consistent.
pub fn right_divide(ring: &Ring, p: &OMat, b: &OMat) -> Result<(OMat, u32), LinearError> {
    // (X P)_{rc} = Σ_t X_{rt} P_{tc}
    let mut m = vec![vec![ring.zero(); 4]; 4];
    let mut rhs = vec![ring.zero(); 4];
    for r in 0..2 {
        for c in 0..2 {
            for t in 0..2 {
                m[2 * r + c][2 * r + t] = p[t][c];
            }
            rhs[2 * r + c] = b[r][c];
        }
    }
    let s = solve_linear(ring, &m, &rhs)?;
    Ok(([[s.x[0], s.x[1]], [s.x[2], s.x[3]]], s.loss))
}

/// Lift step at degree d ≥ k_max: R̄_i P_i = rhs_i, then
/// H_i − P_i H_{i+1} T_i = R̄_i with T_i = p^d P_i^{-1}, solved through the consolidated
/// equation H − Q H T = V at the position after 0 and back-substituted.
fn lift_step(
    ring: &Ring,
    p0: &[OMat],
    d: usize,
    rhs: &[OMat],
) -> Result<(Vec<OMat>, Vec<OMat>, u32), LinearError> {
    let f = p0.len();
    let mut loss = 0;
    let mut rbar = Vec::with_capacity(f);
    for i in 0..f {
        let (r, l) = right_divide(ring, &p0[i], &rhs[i])?;
        loss += l;
        rbar.push(r);
    }
    let t: Vec<OMat> = p0
        .iter()
        .map(|p| omat_scaled_inverse(ring, p, d as u32).expect("det valuation ≤ d"))
        .collect();
    let order = crate::residue::product_order(f);
    let id = crate::series::omat_id(ring);
    // V = Σ_j (P before j) R̄_j (T before j, reversed)
    let mut v = crate::series::omat_zero(ring);
    let mut pre = id;
    let mut post = id;
    for &j in &order {
        let term = omat_mul(ring, &omat_mul(ring, &pre, &rbar[j]), &post);
        v = crate::series::omat_add(ring, &v, &term);
        pre = omat_mul(ring, &pre, &p0[j]);
        post = omat_mul(ring, &t[j], &post);
    }
    let (q, tt) = (pre, post);
    // (H − Q H T)_{ab} = H_ab − Σ Q_ac H_cd T_db
    let mut m = vec![vec![ring.zero(); 4]; 4];
    for a in 0..2 {
        for b in 0..2 {
            let row = 2 * a + b;
            m[row][row] = ring.add(&m[row][row], &ring.one());
            for c in 0..2 {
                for dd in 0..2 {
                    let coef = ring.mul(&q[a][c], &tt[dd][b]);
                    m[row][2 * c + dd] = ring.sub(&m[row][2 * c + dd], &coef);
                }
            }
        }
    }
    let vv = vec![v[0][0], v[0][1], v[1][0], v[1][1]];
    let s = solve_linear(ring, &m, &vv)?;
    loss += s.loss;
    let start = order[0];
    let mut h = vec![crate::series::omat_zero(ring); f];
    h[start] = [[s.x[0], s.x[1]], [s.x[2], s.x[3]]];
    // back-substitute along the chain in reverse: H_j = R̄_j + P_j H_{j+1} T_j
    for &j in order.iter().rev() {
        if j == start {
            continue;
        }
        let next = h[(j + 1) % f];
        let term = omat_mul(ring, &omat_mul(ring, &p0[j], &next), &t[j]);
        h[j] = crate::series::omat_add(ring, &rbar[j], &term);
    }
    Ok((h, rbar, loss))
}

/// Cocycle comparison: fresh G for χ², against G_δ·γ_δ(G_δ).
#[derive(Clone, Debug, Serialize)]
pub struct CocycleReport {
    pub power: u32,
    pub margin: Val,
}

pub fn cocycle_check(
    sr: &SeriesRing,
    pi: &TauMatrix,
    k: &[u64],
    chi: u64,
    g: &GammaSolution,
    power: u32,
) -> Result<CocycleReport, SolveError> {
    if power <= 1 {
        return Ok(CocycleReport {
            power,
            margin: sr.ring().precision(),
        });
    }
    let m = sr.ring().modulus();
    let chi_pow = (0..power).fold(1u128, |acc, _| acc * chi as u128 % m) as u64;
    let fresh = WachProblem::new(sr, pi, k, chi_pow).solve()?;
    let table = sr.gamma_table(chi);
    let mut prod = g.g.clone();
    let mut cur = g.g.clone();
    for _ in 1..power {
        cur = sr.apply_gamma(&cur, &table);
        prod = sr.tau_mul(&prod, &cur);
    }
    let diff = sr.tau_sub(&prod, &fresh.g);
    Ok(CocycleReport {
        power,
        margin: sr.tau_valuation(&diff).min(sr.ring().precision()),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LatticeReport {
    pub coordinate: usize,
    pub integral: bool,
    /// Π_i · W_i = q^{k_max}·Id holds exactly.
    pub identity_holds: bool,
}

/// Witness W_i = q^{k_max − k_i} adj(Π_i) / (det(Π_i)/q^{k_i}) with Π_i W_i = q^{k_max}.
/// `unit_part[i]` is the unit series det(Π_i)/q^{k_i}.
pub fn lattice_condition_check(
    sr: &SeriesRing,
    pi: &TauMatrix,
    k: &[u64],
    unit_part: &[Series],
) -> Vec<LatticeReport> {
    let k_max = k.iter().copied().max().unwrap_or(0);
    let q = sr.q();
    pi.coords
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let inv = sr.inv(&unit_part[i]);
            let integral = inv.is_some();
            let identity_holds = match inv {
                None => false,
                Some(u) => {
                    let s = sr.mul(&sr.pow(&q, (k_max - k[i]) as u32), &u);
                    let w = sr.mat_scale(&sr.mat_adj(m), &s);
                    let lhs = sr.mat_mul(m, &w);
                    let qk = sr.pow(&q, k_max as u32);
                    let rhs: SMat = [[qk.clone(), sr.zero()], [sr.zero(), qk]];
                    lhs == rhs
                }
            };
            LatticeReport {
                coordinate: i,
                integral,
                identity_holds,
            }
        })
        .collect()
}

/// det(Π_i)/q^{k_i} for the unperturbed shape: ±u_i.
pub fn shape_unit_parts(sr: &SeriesRing, data: &PiData) -> Vec<Series> {
    let ring = sr.ring();
    (0..data.family.f())
        .map(|i| {
            let u = data.units[i];
            let s = if data.family.types[i].det_sign() < 0 {
                ring.neg(&u)
            } else {
                u
            };
            sr.constant(s)
        })
        .collect()
}

/// Parameters for z determination.
#[derive(Clone, Debug, Serialize)]
pub struct ZReport {
    pub strategy: String,
    pub working_precision: u32,
    /// Number of scalar conditions imposed on the z coefficients.
    pub conditions: usize,
    pub unknowns: usize,
    /// Largest pivot valuation met while solving for z.
    pub max_pivot: u32,
    /// Digits of z that agree between solves at two precisions.
    pub determined_digits: u32,
}

const Z_CHECK_GAP: u32 = 8;

/// Truncated jets O_E[ζ_p][t]/(t^m) around π = ζ_p − 1; entry s·(p−1) + e is the
/// coefficient of t^s ζ^e.
struct RootJet<'a> {
    ring: &'a Ring,
    p: usize,
    m: usize,
}

impl RootJet<'_> {
    /// x·((ζ − 1) + t).
    fn times_u(&self, x: &[OElement]) -> Vec<OElement> {
        let (r, w) = (self.ring, self.p - 1);
        let mut out = vec![r.zero(); x.len()];
        for s in 0..self.m {
            let blk = &x[s * w..(s + 1) * w];
            // ζ·blk with ζ^{p−1} = −(1 + ζ + ⋯ + ζ^{p−2}), then − blk
            let top = blk[w - 1];
            for e in 0..w {
                let shifted = if e == 0 { r.zero() } else { blk[e - 1] };
                let v = r.sub(&r.sub(&shifted, &top), &blk[e]);
                out[s * w + e] = r.add(&out[s * w + e], &v);
            }
            if s + 1 < self.m {
                for e in 0..w {
                    out[(s + 1) * w + e] = r.add(&out[(s + 1) * w + e], &blk[e]);
                }
            }
        }
        out
    }

    fn eval(&self, x: &Series) -> Vec<OElement> {
        let r = self.ring;
        let mut acc = vec![r.zero(); self.m * (self.p - 1)];
        for c in x.c.iter().rev() {
            acc = self.times_u(&acc);
            acc[0] = r.add(&acc[0], c);
        }
        acc
    }
}

fn embed(big: &SeriesRing, x: &TauMatrix) -> TauMatrix {
    let mut out = big.tau_zero(x.coords.len());
    for (o, m) in out.coords.iter_mut().zip(&x.coords) {
        for r in 0..2 {
            for c in 0..2 {
                for (j, v) in m[r][c].c.iter().enumerate() {
                    o[r][c].c[j] = *v;
                }
            }
        }
    }
    out
}

fn tau_adj(sr: &SeriesRing, x: &TauMatrix) -> TauMatrix {
    TauMatrix {
        coords: x.coords.iter().map(|m| sr.mat_adj(m)).collect(),
    }
}

/// The direction π^j in the S-entry of coordinate `coord`.
fn direction(sr: &SeriesRing, fam: &TypedMatrixFamily, coord: usize, j: usize) -> TauMatrix {
    let mut d = sr.tau_zero(fam.f());
    let (r, c) = fam.types[coord].x_pos();
    d.coords[coord][r][c] = sr.phi_subst(&sr.monomial(j));
    d
}

/// For each direction π^j, j < k_max, of the S_coord-entry: the jets at π = ζ_p − 1 of
/// the S_coord-linear part of (G·γ(Π) − Π·φ(G))·adj γ(Π), with G cut below π^{k_max}.
/// Integrality of G − Π·φ(G)·γ(Π)^{-1} means these vanish to order k_i in coordinate i.
///
/// The responses to each direction have denominators; everything is scaled by the
/// smallest p^s that clears them.
fn root_conditions(
    ring: &Ring,
    fam: &TypedMatrixFamily,
    chi: u64,
    coord: usize,
) -> Result<Vec<Vec<OElement>>, SolveError> {
    let f = fam.f();
    let p = ring.p() as usize;
    let k = fam.spec.weights.k.clone();
    let k_max = fam.k_max() as usize;
    let zero_a = vec![ring.zero(); f];
    let zero_z = vec![vec![ring.zero()]; f];
    let small = SeriesRing::new(ring.clone(), k_max);
    let pi_s = build_pi(&small, fam, &zero_a, &zero_z).pi;
    let prob = WachProblem::new(&small, &pi_s, &k, chi);
    let g0_s = prob.solve()?.g;
    let phi_g0_s = small.apply_phi(&g0_s);
    let sources: Vec<TauMatrix> = (0..k_max)
        .map(|j| {
            let ds = direction(&small, fam, coord, j);
            small.tau_sub(
                &small.tau_mul(&ds, &phi_g0_s),
                &small.tau_mul(&g0_s, &small.apply_gamma(&ds, prob.gamma_table())),
            )
        })
        .collect();
    let respond = |src: &TauMatrix, sc: &OElement| {
        WachProblem::new(&small, &pi_s, &k, chi)
            .with_source(tau_scale(&small, src, sc))
            .solve_from(small.tau_zero(f))
            .map(|s| s.g)
    };
    let mut found = None;
    for s in 0..ring.precision() / 2 {
        let sc = ring.p_power(s);
        if let Ok(ys) = sources
            .iter()
            .map(|src| respond(src, &sc))
            .collect::<Result<Vec<_>, _>>()
        {
            found = Some((sc, ys));
            break;
        }
    }
    let (scale, ys) = found.ok_or_else(|| {
        SolveError::NoZ(format!(
            "coordinate {coord}: responses not integral below half precision"
        ))
    })?;

    let dp = k
        .iter()
        .map(|&ki| ((p - 1) * ki as usize).max(p * (ki as usize - 1)))
        .max()
        .unwrap_or(0);
    let bound = (p + 1) * k_max + (3 * chi as usize + 1) * dp + 2;
    let big = SeriesRing::new(ring.clone(), bound);
    let pi0 = build_pi(&big, fam, &zero_a, &zero_z).pi;
    let gt = big.gamma_table(chi);
    let gpi0 = big.apply_gamma(&pi0, &gt);
    let adj0 = tau_adj(&big, &gpi0);
    let g0 = embed(&big, &g0_s);
    let phi_g0 = big.apply_phi(&g0);
    let delta0 = big.tau_sub(&big.tau_mul(&g0, &gpi0), &big.tau_mul(&pi0, &phi_g0));

    let jets: Vec<RootJet> = k
        .iter()
        .map(|&m| RootJet {
            ring,
            p,
            m: m as usize,
        })
        .collect();
    Ok(ys
        .iter()
        .enumerate()
        .map(|(j, y_s)| {
            let y = embed(&big, y_s);
            let d = direction(&big, fam, coord, j);
            let gd = big.apply_gamma(&d, &gt);
            let direct = big.tau_sub(&big.tau_mul(&g0, &gd), &big.tau_mul(&d, &phi_g0));
            let mut delta1 = big.tau_mul(&y, &gpi0);
            delta1 = big.tau_add(&delta1, &tau_scale(&big, &direct, &scale));
            delta1 = big.tau_sub(&delta1, &big.tau_mul(&pi0, &big.apply_phi(&y)));
            let fj = big.tau_add(
                &big.tau_mul(&delta1, &adj0),
                &tau_scale(&big, &big.tau_mul(&delta0, &tau_adj(&big, &gd)), &scale),
            );
            let mut out = Vec::new();
            for (i, m) in fj.coords.iter().enumerate() {
                for e in m.iter().flatten() {
                    out.extend(jets[i].eval(e));
                }
            }
            out
        })
        .collect())
}

fn tau_scale(sr: &SeriesRing, x: &TauMatrix, s: &OElement) -> TauMatrix {
    let c = sr.constant(*s);
    TauMatrix {
        coords: x.coords.iter().map(|m| sr.mat_scale(m, &c)).collect(),
    }
}

/// z_i = p^{m_k} + Σ_{1≤j<k_max} b_ij π^j from the root conditions of each coordinate,
/// with the largest pivot valuation met.
pub fn solve_z(
    ring: &Ring,
    fam: &TypedMatrixFamily,
    chi: u64,
) -> Result<(Vec<Vec<OElement>>, usize, u32), SolveError> {
    let pmk = ring.p_power(fam.m_k as u32);
    let mut zs = Vec::with_capacity(fam.f());
    let mut conditions = 0;
    let mut max_pivot = 0;
    for coord in 0..fam.f() {
        let cols = root_conditions(ring, fam, chi, coord)?;
        let mut z = vec![pmk];
        if cols.len() > 1 {
            let rows: Vec<Vec<OElement>> = (0..cols[0].len())
                .map(|r| cols[1..].iter().map(|c| c[r]).collect())
                .collect();
            let rhs: Vec<OElement> = cols[0]
                .iter()
                .map(|c| ring.neg(&ring.mul(c, &pmk)))
                .collect();
            conditions += rows.len();
            let sol = solve_linear_general(ring, &rows, &rhs, false)
                .map_err(|e| SolveError::NoZ(format!("coordinate {coord}: {e}")))?;
            max_pivot = max_pivot.max(sol.max_pivot);
            z.extend(sol.x);
        } else {
            let bad = cols[0].iter().find(|c| !ring.is_zero(c));
            if let Some(c) = bad {
                return Err(SolveError::NoZ(format!(
                    "coordinate {coord}: constant z violates integrality (valuation {})",
                    ring.valuation(&ring.mul(c, &pmk))
                )));
            }
        }
        zs.push(z);
    }
    Ok((zs, conditions, max_pivot))
}

/// Pick z: the constant p^{m_k} if it already meets the integrality conditions, otherwise
/// (budget permitting) the solution of the root conditions at the largest available
/// precision. The digits on which solves at two precisions agree are reported.
pub fn choose_z(
    sr: &SeriesRing,
    fam: &TypedMatrixFamily,
    chi: u64,
    probes: &[Vec<OElement>],
    budget: u32,
) -> Result<(Vec<Vec<OElement>>, ZReport), SolveError> {
    let ring = sr.ring();
    let k = fam.spec.weights.k.clone();
    let unknowns = fam.f() * (fam.k_max() as usize - 1);
    let maxw = crate::padic::max_precision(ring.p());
    let wide = ring.with_precision(maxw).expect("within maximum");
    let (zw, conditions, max_pivot) = solve_z(&wide, fam, chi)?;
    let z: Vec<Vec<OElement>> = zw
        .iter()
        .map(|v| v.iter().map(|x| wide.truncate_to(x, ring)).collect())
        .collect();
    let constant = z.iter().all(|v| v[1..].iter().all(|x| ring.is_zero(x)));
    if !constant && budget == 0 {
        return Err(SolveError::NoZ(
            "constant z violates integrality and the search budget is 0".into(),
        ));
    }
    let check = ring
        .with_precision(maxw - Z_CHECK_GAP)
        .expect("within maximum");
    let (zc, _, _) = solve_z(&check, fam, chi)?;
    let determined = zw
        .iter()
        .zip(&zc)
        .flat_map(|(u, v)| u.iter().zip(v))
        .map(|(x, y)| {
            let x = wide.truncate_to(x, &check);
            check.valuation(&check.sub(&x, y)).min(check.precision())
        })
        .min()
        .unwrap_or(check.precision());
    for a in probes {
        let data = build_pi(sr, fam, a, &z);
        WachProblem::new(sr, &data.pi, &k, chi).solve()?;
    }
    Ok((
        z,
        ZReport {
            strategy: if constant {
                "constant"
            } else {
                "root-vanishing"
            }
            .into(),
            working_precision: maxw,
            conditions,
            unknowns,
            max_pivot,
            determined_digits: determined,
        },
    ))
}

/// Difference valuation of two solutions.
pub fn solution_distance(sr: &SeriesRing, a: &TauMatrix, b: &TauMatrix) -> Val {
    sr.tau_valuation(&sr.tau_sub(a, b))
}

/// Per-coordinate Π mod p as digit-free equality helper.
pub fn congruent_mod_p(sr: &SeriesRing, a: &TauMatrix, b: &TauMatrix) -> bool {
    solution_distance(sr, a, b) >= 1
}

pub fn omat_diff_valuation(ring: &Ring, a: &OMat, b: &OMat) -> Val {
    crate::series::omat_valuation(ring, &omat_sub(ring, a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{assign_types, Case, FamilySpec};
    use crate::padic::Ring;

    fn k1() -> (SeriesRing, TypedMatrixFamily) {
        let ring = Ring::new(3, 1, 16).unwrap();
        let sr = SeriesRing::new(ring, 12);
        let spec = FamilySpec::new(3, Case::Induced, &[5], &[0, 5], vec![], vec![]).unwrap();
        (sr, assign_types(&spec, 3))
    }

    #[test]
    fn trivial_gamma_gives_identity() {
        let (sr, fam) = k1();
        let r = sr.ring();
        let z = constant_z(r, &fam);
        let data = build_pi(&sr, &fam, &[r.from_int(3)], &z);
        let sol = WachProblem::new(&sr, &data.pi, &[5], 1).solve().unwrap();
        assert_eq!(sol.g, sr.tau_id(1));
    }

    #[test]
    fn zero_parameter_solves_with_constant_z() {
        let (sr, fam) = k1();
        let r = sr.ring();
        let z = constant_z(r, &fam);
        let data = build_pi(&sr, &fam, &[r.zero()], &z);
        let sol = WachProblem::new(&sr, &data.pi, &[5], 2).solve().unwrap();
        assert_eq!(sol.residual_valuation, VAL_INF);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { r.one() } else { r.zero() };
                assert_eq!(sol.g.coords[0][i][j].c[0], want);
            }
        }
    }

    #[test]
    fn constant_z_obstructs_then_root_z_solves() {
        let (sr, fam) = k1();
        let r = sr.ring();
        let z = constant_z(r, &fam);
        let a = vec![r.from_int(3)];
        let data = build_pi(&sr, &fam, &a, &z);
        assert!(matches!(
            WachProblem::new(&sr, &data.pi, &[5], 2).solve(),
            Err(SolveError::Obstruction { degree: 1, .. })
        ));
        let (z, rep) = choose_z(&sr, &fam, 2, std::slice::from_ref(&a), 2).unwrap();
        assert_eq!(rep.strategy, "root-vanishing");
        assert_eq!(r.coeffs(&z[0][0])[0], 9);
        assert_eq!(r.coeffs(&z[0][1])[0] % 81, 72);
        let data = build_pi(&sr, &fam, &[r.from_int(6)], &z);
        let sol = WachProblem::new(&sr, &data.pi, &[5], 2).solve().unwrap();
        assert_eq!(sol.residual_valuation, VAL_INF);
    }

    #[test]
    fn zero_budget_rejects() {
        let (sr, fam) = k1();
        let r = sr.ring();
        let a = vec![r.from_int(3)];
        assert!(choose_z(&sr, &fam, 2, &[a], 0).is_err());
    }

    // The leading z coefficients for weight 5 at p = 3 are 9, 45/4, 93/32, 3/128; they were
    // first recovered by rational reconstruction from a truncated-horizon solve.
    #[test]
    fn k1_z_matches_rational_coefficients() {
        let (_, fam) = k1();
        let ring = Ring::new(3, 1, 40).unwrap();
        let (z, conditions, pivot) = solve_z(&ring, &fam, 2).unwrap();
        assert!(conditions >= 4);
        let expect = [(9i128, 1i128), (45, 4), (93, 32), (3, 128)];
        for (j, &(num, den)) in expect.iter().enumerate() {
            let lhs = ring.mul(&z[0][j], &ring.from_int(den));
            let v = ring.valuation(&ring.sub(&lhs, &ring.from_int(num)));
            assert!(v >= 40 - pivot, "coefficient {j} agrees only to {v} digits");
        }
    }

    #[test]
    fn solved_z_has_degree_below_k_max() {
        let (_, fam) = k1();
        let ring = Ring::new(3, 1, 40).unwrap();
        let (z, _, _) = solve_z(&ring, &fam, 2).unwrap();
        assert!(z.iter().all(|c| c.len() <= 5));
    }
}
