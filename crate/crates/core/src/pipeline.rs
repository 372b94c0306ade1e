//! Orchestration of a run: family data, Wach solves, perturbation sweeps and the
//! verification checks, assembled into a deterministic report.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::family::{alpha_of, TypedMatrixFamily, WeightProfile};
use crate::filtered::{
    extract_filtration, hodge_tate_type, inadmissible_control, reduction_exponents,
    weak_admissibility, FiltrationCoordinate, ReductionExponents, Vec2, WeakAdmissibility,
};
use crate::padic::{max_precision, GlobalContext, OElement, Ring};
use crate::perturbation::{
    check_disk, perturb, sample_a, sample_params, sample_scalar_a, solve_perturbed,
    verify_conjugation, verify_mod_i_chain, ChainStep, ConjugationReport, PerturbationData,
    PerturbedSolve, Regime,
};
use crate::reduction::{compare, residual_mod_p, Comparison, NegativeControl, Residual};
use crate::residue::{
    check_operator_surjective, check_trace_nonconstant, family_units, qf_mod_i, qf_mod_p,
    verify_claim_a, ClaimAReport, ModITag, SurjectivityReport,
};
use crate::series::{OMat, SeriesRing, TauMatrix};
use crate::wach::{
    build_pi, choose_z, cocycle_check, lattice_condition_check, shape_unit_parts, CocycleReport,
    DegreeStep, GammaSolution, LatticeReport, PiData, SolveError, WachProblem, ZReport,
};

pub const SCHEMA: &str = "wach-forge-report/1";

#[derive(Debug, Clone, thiserror::Error)]
pub enum RunError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("solver obstruction: {0}")]
    Obstruction(String),
    #[error("verification failure: {0}")]
    Verification(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => 2,
            RunError::Obstruction(_) => 3,
            RunError::Verification(_) => 4,
            RunError::Io(_) => 1,
        }
    }
}

fn base_label(b: usize) -> String {
    if b == 0 {
        "a=0".to_string()
    } else {
        format!("a[{}]", b - 1)
    }
}

fn obstruction(label: &str, e: SolveError) -> RunError {
    RunError::Obstruction(format!("{label}: {e}"))
}

// rng streams, one per sampled quantity
const STREAM_PARAMS: u64 = 1;
const STREAM_FIXED_A: u64 = 10;
const STREAM_GLOBAL_A: u64 = 20;
const STREAM_WA_A: u64 = 30;
const STREAM_LEMMA_A: u64 = 40;
const STREAM_SCALAR_A: u64 = 50;
const STREAM_NEGATIVE: u64 = 60;

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn regime_index(r: Regime) -> u64 {
    r.c() as u64
}

/// Validated context, family and chosen z.
pub struct Setup {
    pub cfg: RunConfig,
    pub ctx: GlobalContext,
    pub fam: TypedMatrixFamily,
    pub sr: SeriesRing,
    pub z: Vec<Vec<OElement>>,
    pub zreport: ZReport,
    /// a = 0 followed by the sampled parameters.
    pub params: Vec<Vec<OElement>>,
}

impl Setup {
    /// Working ring (precision W).
    pub fn ring(&self) -> &Ring {
        self.sr.ring()
    }
    /// Ring at the configured precision N: parameters are sampled and reported here.
    pub fn io_ring(&self) -> &Ring {
        self.ctx.ring()
    }
    pub fn n(&self) -> u32 {
        self.ctx.n
    }
    pub fn chi(&self) -> u64 {
        self.ctx.chi_delta
    }
    pub fn k(&self) -> &[u64] {
        &self.fam.spec.weights.k
    }
    pub fn k_max(&self) -> usize {
        self.fam.k_max() as usize
    }
    pub fn alpha_k(&self) -> u32 {
        self.fam.alpha_k() as u32
    }
}

pub fn validate(cfg: &RunConfig) -> Result<(GlobalContext, TypedMatrixFamily), RunError> {
    cfg.validate().map_err(|e| RunError::Validation(e.0))
}

/// Solves run with N guard digits (capped by the word size); results are reported at N.
pub fn working_precision(ctx: &GlobalContext) -> u32 {
    (2 * ctx.n).min(max_precision(ctx.p))
}

pub fn prepare(cfg: &RunConfig) -> Result<Setup, RunError> {
    let (ctx, fam) = validate(cfg)?;
    let work = ctx
        .ring()
        .with_precision(working_precision(&ctx))
        .map_err(|e| RunError::Validation(format!("precision: {e}")))?;
    let sr = SeriesRing::new(work, cfg.d);
    let mut r = rng(cfg.seed, STREAM_PARAMS);
    let mut params = vec![vec![ctx.ring().zero(); fam.f()]];
    for _ in 0..cfg.samples_a.max(cfg.samples_big_a).max(1) {
        params.push(sample_params(ctx.ring(), &mut r, fam.f(), fam.m as u32));
    }
    let probes: Vec<Vec<OElement>> = params.iter().skip(1).take(2).cloned().collect();
    let (z, zreport) = choose_z(&sr, &fam, ctx.chi_delta, &probes, cfg.z_search_budget)
        .map_err(|e| obstruction("z selection", e))?;
    Ok(Setup {
        cfg: cfg.clone(),
        ctx,
        fam,
        sr,
        z,
        zreport,
        params,
    })
}

fn digits(ring: &Ring, xs: &[OElement]) -> Vec<String> {
    xs.iter().map(|x| ring.digit_string(x)).collect()
}

fn omat_digits(ring: &Ring, m: &OMat) -> [[String; 2]; 2] {
    [
        [ring.digit_string(&m[0][0]), ring.digit_string(&m[0][1])],
        [ring.digit_string(&m[1][0]), ring.digit_string(&m[1][1])],
    ]
}

// ---------------------------------------------------------------- build

#[derive(Clone, Debug, Serialize)]
pub struct ContextSection {
    pub p: u64,
    pub f: usize,
    pub ext_degree: usize,
    #[serde(rename = "N")]
    pub n: u32,
    /// Precision of the internal solves.
    pub working_precision: u32,
    #[serde(rename = "D")]
    pub d: usize,
    pub chi_delta: u64,
    pub defining_poly: Vec<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilySection {
    pub types: Vec<&'static str>,
    pub weights: WeightProfile,
    pub m: u64,
    pub m_k: u64,
    pub alpha_k_minus_1: u64,
    /// α(ℓ) for ℓ = 0..k_max.
    pub alpha_table: Vec<u64>,
    pub filtration_rule: Vec<&'static str>,
    pub filtration_at_zero: Vec<[String; 2]>,
    pub exponents: ReductionExponents,
}

pub fn context_section(ctx: &GlobalContext) -> ContextSection {
    ContextSection {
        p: ctx.p,
        f: ctx.f,
        ext_degree: ctx.ext_degree,
        n: ctx.n,
        working_precision: working_precision(ctx),
        d: ctx.d,
        chi_delta: ctx.chi_delta,
        defining_poly: ctx.ring().defining_poly(),
    }
}

pub fn family_section(ctx: &GlobalContext, fam: &TypedMatrixFamily) -> FamilySection {
    let ring = ctx.ring();
    let zero = vec![ring.zero(); fam.f()];
    FamilySection {
        types: fam.types.iter().map(|t| t.name()).collect(),
        weights: fam.spec.weights.clone(),
        m: fam.m,
        m_k: fam.m_k,
        alpha_k_minus_1: fam.alpha_k(),
        alpha_table: (0..=fam.k_max()).map(|l| alpha_of(ctx.p, l)).collect(),
        filtration_rule: fam
            .types
            .iter()
            .map(|t| match t {
                crate::family::TypeTag::T1 | crate::family::TypeTag::T2 => "(1, -alpha)",
                _ => "(-alpha, 1)",
            })
            .collect(),
        filtration_at_zero: fam
            .filtration_pairs(ring, &zero)
            .iter()
            .map(|(x, y)| [ring.digit_string(x), ring.digit_string(y)])
            .collect(),
        exponents: reduction_exponents(ctx.p, &fam.spec),
    }
}

// ---------------------------------------------------------------- solves

pub struct BaseSolve {
    pub data: PiData,
    pub sol: GammaSolution,
}

pub fn solve_base(setup: &Setup, a: &[OElement], label: &str) -> Result<BaseSolve, RunError> {
    let data = build_pi(&setup.sr, &setup.fam, a, &setup.z);
    let sol = WachProblem::new(&setup.sr, &data.pi, setup.k(), setup.chi())
        .solve()
        .map_err(|e| obstruction(label, e))?;
    Ok(BaseSolve { data, sol })
}

pub struct PertOutcome {
    pub data: PerturbationData,
    pub conj: ConjugationReport,
    pub solved: PerturbedSolve,
    pub chain: Vec<ChainStep>,
}

pub fn solve_perturbation(
    setup: &Setup,
    base: &BaseSolve,
    a: &[OMat],
    min_val: u32,
    label: &str,
) -> Result<PertOutcome, RunError> {
    let sr = &setup.sr;
    check_disk(setup.ring(), a, min_val)
        .map_err(|e| RunError::Verification(format!("{label}: {e}")))?;
    let data = perturb(
        sr,
        &base.data.pi,
        a,
        &base.sol.g,
        setup.chi(),
        setup.k_max(),
    )
    .map_err(|e| RunError::Verification(format!("{label}: {e}")))?;
    let conj = verify_conjugation(sr, &data, &base.sol.g, setup.chi(), setup.k_max());
    let solved = solve_perturbed(sr, &data.pi_a, setup.k(), setup.chi(), &base.sol.g)
        .map_err(|e| obstruction(label, e))?;
    let chain = verify_mod_i_chain(setup.ring(), &base.sol, &solved.solution);
    Ok(PertOutcome {
        data,
        conj,
        solved,
        chain,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveRecord {
    pub label: String,
    pub params: Vec<String>,
    pub achieved_degree: usize,
    /// Minimal valuation of the defect below π^D; N means it vanishes at working precision.
    pub residual_margin: u32,
    pub total_loss: u32,
    pub max_loss: u32,
    pub steps: Vec<DegreeStep>,
}

fn solve_record(setup: &Setup, label: &str, a: &[OElement], sol: &GammaSolution) -> SolveRecord {
    SolveRecord {
        label: label.into(),
        params: digits(setup.io_ring(), a),
        achieved_degree: sol.achieved_degree,
        residual_margin: sol.residual_valuation.min(setup.n()),
        total_loss: sol.total_loss(),
        max_loss: sol.max_loss(),
        steps: sol.steps.clone(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ZSection {
    pub report: ZReport,
    pub polynomials: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveSection {
    pub z: ZSection,
    pub solves: Vec<SolveRecord>,
    pub cocycle: CocycleReport,
    pub lattice: Vec<LatticeReport>,
    /// Digits on which solves at precision W and W − 4 agree, capped at N.
    pub determined_digits: Option<u32>,
    pub required_margin: u32,
    pub axioms_pass: bool,
}

fn determined_digits(setup: &Setup, a: &[OElement], g: &TauMatrix) -> Option<u32> {
    let ring = setup.ring();
    let lo = ring.with_precision(ring.precision().checked_sub(4)?).ok()?;
    let srl = SeriesRing::new(lo.clone(), setup.sr.d());
    let cut = |x: &OElement| ring.truncate_to(x, &lo);
    let a_lo: Vec<OElement> = a.iter().map(cut).collect();
    let z_lo: Vec<Vec<OElement>> = setup
        .z
        .iter()
        .map(|z| z.iter().map(cut).collect())
        .collect();
    let data = build_pi(&srl, &setup.fam, &a_lo, &z_lo);
    let sol = WachProblem::new(&srl, &data.pi, setup.k(), setup.chi())
        .solve()
        .ok()?;
    let mut v = lo.precision();
    for (x, y) in sol.g.coords.iter().zip(&g.coords) {
        for r in 0..2 {
            for s in 0..2 {
                for d in 0..setup.sr.d() {
                    let diff = lo.sub(&x[r][s].c[d], &cut(&y[r][s].c[d]));
                    v = v.min(lo.valuation(&diff));
                }
            }
        }
    }
    Some(v.min(setup.n()))
}

pub fn solve_section(setup: &Setup, bases: &[BaseSolve]) -> Result<SolveSection, RunError> {
    let ring = setup.ring();
    let n = setup.n();
    let required = n.saturating_sub(setup.alpha_k() + 4);
    let solves: Vec<SolveRecord> = bases
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let label = base_label(i);
            solve_record(setup, &label, &b.data.a, &b.sol)
        })
        .collect();
    let probe = bases.get(1).unwrap_or(&bases[0]);
    let mut cocycle = cocycle_check(
        &setup.sr,
        &probe.data.pi,
        setup.k(),
        setup.chi(),
        &probe.sol,
        2,
    )
    .map_err(|e| obstruction("cocycle", e))?;
    cocycle.margin = cocycle.margin.min(n);
    let mut lattice = Vec::new();
    for b in bases {
        let units = shape_unit_parts(&setup.sr, &b.data);
        lattice.extend(lattice_condition_check(
            &setup.sr,
            &b.data.pi,
            setup.k(),
            &units,
        ));
    }
    let dd = determined_digits(setup, &probe.data.a, &probe.sol.g);
    let axioms_pass = solves
        .iter()
        .all(|s| s.residual_margin >= required && s.achieved_degree == setup.sr.d())
        && cocycle.margin >= required
        && lattice.iter().all(|l| l.integral && l.identity_holds)
        && dd.is_some_and(|d| d >= n)
        && setup.zreport.determined_digits >= ring.precision();
    Ok(SolveSection {
        z: ZSection {
            report: setup.zreport.clone(),
            polynomials: setup.z.iter().map(|z| digits(ring, z)).collect(),
        },
        solves,
        cocycle,
        lattice,
        determined_digits: dd,
        required_margin: required,
        axioms_pass,
    })
}

// ---------------------------------------------------------------- verify

#[derive(Clone, Debug, Serialize)]
pub struct ResidueGates {
    pub trace_witness: Option<Vec<u32>>,
    pub qf_mod_i: ModITag,
    /// Only in the equal-weight regime.
    pub claim_a: Option<ClaimAReport>,
    pub surjectivity: SurjectivityReport,
    pub pass: bool,
}

pub fn residue_gates(ctx: &GlobalContext, fam: &TypedMatrixFamily) -> ResidueGates {
    let k = ctx.ring().residue_field();
    let units = family_units(fam, ctx.ring());
    let w = &fam.spec.weights.k;
    let trace_witness = check_trace_nonconstant(&k, &qf_mod_p(&k, &fam.types, w, &units));
    let (_, tag) = qf_mod_i(&k, &fam.types, w, &units);
    let equal = w.iter().all(|&x| x == w[0] && x > 0);
    let claim_a = equal.then(|| verify_claim_a(&k, &fam.types, w, &units));
    let surjectivity = check_operator_surjective(&k, &fam.types, w, &units);
    let pass = trace_witness.is_some()
        && surjectivity.surjective
        && claim_a.as_ref().is_none_or(|c| c.holds && c.forces_b_zero);
    ResidueGates {
        trace_witness,
        qf_mod_i: tag,
        claim_a,
        surjectivity,
        pass,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaRecord {
    pub label: String,
    pub regime: Regime,
    pub scalar: bool,
    pub conjugation: ConjugationReport,
    /// Every coefficient of Â vanishes mod p (required in regime theorem-a-ii).
    pub hat_zero_mod_p: bool,
    /// Â = A exactly (required for scalar A).
    pub hat_equals_a: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MemberRecord {
    pub label: String,
    pub params: Vec<String>,
    pub perturbation: Option<Vec<[[String; 2]; 2]>>,
    pub regime: Option<Regime>,
    pub residual_margin: u32,
    pub seed_agreement: Option<u32>,
    pub weak_admissibility: WeakAdmissibility,
    pub hodge_tate: Vec<[u64; 2]>,
    pub hodge_tate_matches: bool,
    pub filtration: Vec<FiltrationCoordinate>,
    pub filtration_agrees: bool,
    pub exponents: ReductionExponents,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainRecord {
    pub label: String,
    pub steps: Vec<ChainStep>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualDump {
    pub pi: Vec<[[Vec<String>; 2]; 2]>,
    pub g: Vec<[[Vec<String>; 2]; 2]>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NegativeControlSection {
    pub reduction: NegativeControl,
    pub inadmissible: WeakAdmissibility,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifySection {
    pub residue: ResidueGates,
    pub lemma: Vec<LemmaRecord>,
    pub members: Vec<MemberRecord>,
    pub constancy_fixed_a: Vec<Comparison>,
    pub constancy_global: Vec<Comparison>,
    pub chain: Vec<ChainRecord>,
    pub exponents: ReductionExponents,
    pub exponents_invariant: bool,
    pub negative_control: NegativeControlSection,
    pub baseline_residual: ResidualDump,
    pub checks: Vec<Check>,
    pub verdict: bool,
}

/// One solved family member: base solve index plus an optional perturbation.
struct MemberJob {
    label: String,
    base: usize,
    a_mat: Option<Vec<OMat>>,
    regime: Option<Regime>,
}

struct Member {
    job_label: String,
    base: usize,
    regime: Option<Regime>,
    pert: Option<PertOutcome>,
}

impl Member {
    fn residual(&self, bases: &[BaseSolve]) -> Residual {
        match &self.pert {
            Some(p) => Residual {
                pi: p.data.pi_a.clone(),
                g: p.solved.solution.g.clone(),
            },
            None => Residual {
                pi: bases[self.base].data.pi.clone(),
                g: bases[self.base].sol.g.clone(),
            },
        }
    }
}

fn min_val(setup: &Setup, r: Regime) -> u32 {
    setup.alpha_k() + r.c()
}

fn member_record(setup: &Setup, bases: &[BaseSolve], m: &Member) -> MemberRecord {
    let ring = setup.ring();
    let sr = &setup.sr;
    let base = &bases[m.base];
    let res = m.residual(bases);
    let twist = m
        .pert
        .as_ref()
        .map(|p| sr.tau_add(&sr.tau_id(setup.fam.f()), &p.data.a_hat));
    let fmd = extract_filtration(
        sr,
        &setup.fam,
        &res.pi,
        twist.as_ref(),
        &setup.z,
        &base.data.a,
    );
    let fil: Vec<Vec2> = fmd.fil_pairs.clone();
    let wa = weak_admissibility(ring, &fmd.frobenius, &fil, setup.k());
    let ht = hodge_tate_type(&fmd);
    let want: Vec<[u64; 2]> = setup.k().iter().map(|&k| [0, k]).collect();
    let residual_margin = match &m.pert {
        Some(p) => p.solved.solution.residual_valuation,
        None => base.sol.residual_valuation,
    }
    .min(setup.n());
    MemberRecord {
        label: m.job_label.clone(),
        params: digits(setup.io_ring(), &base.data.a),
        perturbation: m.pert.as_ref().map(|p| {
            p.data
                .a
                .iter()
                .map(|x| omat_digits(setup.io_ring(), x))
                .collect()
        }),
        regime: m.regime,
        residual_margin,
        seed_agreement: m.pert.as_ref().map(|p| p.solved.seed_agreement),
        hodge_tate_matches: ht == want,
        hodge_tate: ht,
        filtration_agrees: fmd.agrees(),
        filtration: fmd.coordinates,
        weak_admissibility: wa,
        exponents: reduction_exponents(setup.ctx.p, &setup.fam.spec),
    }
}

fn lemma_records(setup: &Setup, base: &BaseSolve) -> Result<Vec<LemmaRecord>, RunError> {
    let ring = setup.ring();
    let sr = &setup.sr;
    let f = setup.fam.f();
    let mut jobs = Vec::new();
    for &r in &setup.cfg.regimes {
        let mut g = rng(setup.cfg.seed, STREAM_LEMMA_A + regime_index(r));
        for i in 0..setup.cfg.samples_lemma {
            jobs.push((
                format!("{}:A[{i}]", r.name()),
                r,
                false,
                sample_a(setup.io_ring(), &mut g, f, min_val(setup, r)),
            ));
        }
        let mut g = rng(setup.cfg.seed, STREAM_SCALAR_A + regime_index(r));
        jobs.push((
            format!("{}:scalar", r.name()),
            r,
            true,
            sample_scalar_a(setup.io_ring(), &mut g, f, min_val(setup, r)),
        ));
    }
    let out = crate::par::map(&jobs, |(label, r, scalar, a)| {
        check_disk(ring, a, min_val(setup, *r))
            .map_err(|e| RunError::Verification(format!("{label}: {e}")))?;
        let data = perturb(
            sr,
            &base.data.pi,
            a,
            &base.sol.g,
            setup.chi(),
            setup.k_max(),
        )
        .map_err(|e| RunError::Verification(format!("{label}: {e}")))?;
        let conj = verify_conjugation(sr, &data, &base.sol.g, setup.chi(), setup.k_max());
        let hat_zero_mod_p = sr.tau_valuation(&data.a_hat) >= 1;
        let hat_equals_a = data
            .a_hat
            .coords
            .iter()
            .zip(a.iter())
            .all(|(m, x)| *m == sr.mat_const(x));
        let mut pass = conj.constant_term_matches
            && conj.first_nonzero_degree.is_none_or(|d| d >= setup.k_max());
        if *r == Regime::C1 {
            pass &= hat_zero_mod_p && conj.min_valuation >= 1;
        }
        if *scalar {
            pass &= hat_equals_a;
        }
        Ok(LemmaRecord {
            label: label.clone(),
            regime: *r,
            scalar: *scalar,
            conjugation: conj,
            hat_zero_mod_p,
            hat_equals_a,
            pass,
        })
    });
    out.into_iter().collect()
}

pub fn verify_section(setup: &Setup, bases: &[BaseSolve]) -> Result<VerifySection, RunError> {
    let ring = setup.ring();
    let sr = &setup.sr;
    let f = setup.fam.f();
    let cfg = &setup.cfg;
    let n_a = cfg.samples_a.min(bases.len() - 1);
    let n_big = cfg.samples_big_a;

    let mut jobs: Vec<MemberJob> = vec![MemberJob {
        label: "baseline".into(),
        base: 0,
        a_mat: None,
        regime: None,
    }];
    // fixed A per regime, varying a
    let mut fixed_groups = Vec::new();
    for &r in &cfg.regimes {
        let a = sample_a(
            setup.io_ring(),
            &mut rng(cfg.seed, STREAM_FIXED_A + regime_index(r)),
            f,
            min_val(setup, r),
        );
        let start = jobs.len();
        for b in 0..=n_a {
            jobs.push(MemberJob {
                label: format!("{}:fixed-A:{}", r.name(), base_label(b)),
                base: b,
                a_mat: Some(a.clone()),
                regime: Some(r),
            });
        }
        fixed_groups.push((start, jobs.len()));
    }
    // A in the smaller disk against the global baseline
    let mut global = Vec::new();
    if cfg.regimes.contains(&Regime::C1) {
        let mut g = rng(cfg.seed, STREAM_GLOBAL_A);
        for i in 0..n_big {
            let a = sample_a(setup.io_ring(), &mut g, f, min_val(setup, Regime::C1));
            for b in 1..=n_big.min(bases.len() - 1) {
                global.push(jobs.len());
                jobs.push(MemberJob {
                    label: format!("theorem-a-ii:A[{i}]:{}", base_label(b)),
                    base: b,
                    a_mat: Some(a.clone()),
                    regime: Some(Regime::C1),
                });
            }
        }
    }
    // weak admissibility over the larger disk
    if cfg.regimes.contains(&Regime::C0) {
        let mut g = rng(cfg.seed, STREAM_WA_A);
        for i in 0..n_big {
            let a = sample_a(setup.io_ring(), &mut g, f, min_val(setup, Regime::C0));
            for b in 1..=n_a {
                jobs.push(MemberJob {
                    label: format!("theorem-a-i:A[{i}]:{}", base_label(b)),
                    base: b,
                    a_mat: Some(a.clone()),
                    regime: Some(Regime::C0),
                });
            }
        }
    }
    // negative control: A of valuation exactly α(k−1)
    let alpha = setup.alpha_k();
    let mut neg_a = sample_a(
        setup.io_ring(),
        &mut rng(cfg.seed, STREAM_NEGATIVE),
        f,
        alpha,
    );
    neg_a[0][0][1] = ring.p_power(alpha);
    let neg_start = jobs.len();
    for b in [0usize, 1] {
        jobs.push(MemberJob {
            label: format!("negative-control:{}", base_label(b)),
            base: b.min(bases.len() - 1),
            a_mat: Some(neg_a.clone()),
            regime: Some(Regime::C0),
        });
    }

    let solved: Vec<Result<Member, RunError>> = crate::par::map(&jobs, |j| {
        let pert = match &j.a_mat {
            None => None,
            Some(a) => Some(solve_perturbation(
                setup,
                &bases[j.base],
                a,
                j.regime.map_or(0, |r| min_val(setup, r)),
                &j.label,
            )?),
        };
        Ok(Member {
            job_label: j.label.clone(),
            base: j.base,
            regime: j.regime,
            pert,
        })
    });
    let members: Vec<Member> = solved.into_iter().collect::<Result<_, _>>()?;
    let residuals: Vec<Residual> = members.iter().map(|m| m.residual(bases)).collect();
    let records: Vec<MemberRecord> = crate::par::map(&members, |m| member_record(setup, bases, m));

    let mut constancy_fixed_a = Vec::new();
    for &(s, e) in &fixed_groups {
        for i in s + 1..e {
            constancy_fixed_a.push(compare(
                sr,
                &members[i].job_label,
                &members[s].job_label,
                &residuals[i],
                &residuals[s],
            ));
        }
    }
    let mut constancy_global = Vec::new();
    let mut chain = Vec::new();
    for &i in &global {
        constancy_global.push(compare(
            sr,
            &members[i].job_label,
            "baseline",
            &residuals[i],
            &residuals[0],
        ));
        let steps = members[i]
            .pert
            .as_ref()
            .map(|p| p.chain.clone())
            .unwrap_or_default();
        chain.push(ChainRecord {
            label: members[i].job_label.clone(),
            pass: !steps.is_empty() && steps.iter().all(|s| s.pass),
            steps,
        });
    }

    let lemma = lemma_records(setup, bases.get(1).unwrap_or(&bases[0]))?;

    let moved = compare(
        sr,
        "negative-control",
        "baseline",
        &residuals[neg_start],
        &residuals[0],
    );
    let fixed = compare(
        sr,
        "negative-control:a[1]",
        "negative-control:a[0]",
        &residuals[neg_start + 1],
        &residuals[neg_start],
    );
    let outside_disk_rejected = if alpha == 0 {
        true
    } else {
        let mut out = neg_a.clone();
        out[0][0][1] = ring.p_power(alpha - 1);
        check_disk(ring, &out, alpha).is_err()
    };
    let negative_control = NegativeControlSection {
        reduction: NegativeControl {
            residual_moves: !moved.equal_mod_p,
            moved_margin: moved.margin,
            fixed_a_equal: fixed.equal_mod_p,
            outside_disk_rejected,
        },
        inadmissible: inadmissible_control(ring, setup.k()),
    };

    let residue = residue_gates(&setup.ctx, &setup.fam);
    let exponents = reduction_exponents(setup.ctx.p, &setup.fam.spec);
    let exponents_invariant = records.iter().all(|r| r.exponents == exponents);
    let n = setup.n();
    let checks = vec![
        Check {
            name: "residue-gates",
            pass: residue.pass,
        },
        Check {
            name: "weak-admissibility",
            pass: records.iter().all(|r| {
                r.weak_admissibility.verdict
                    && r.hodge_tate_matches
                    && r.weak_admissibility.t_n as u64 == setup.k().iter().sum::<u64>()
            }),
        },
        Check {
            name: "wach-residuals",
            pass: records.iter().all(|r| r.residual_margin == n),
        },
        Check {
            name: "constancy-fixed-A",
            pass: constancy_fixed_a.iter().all(|c| c.equal_mod_p),
        },
        Check {
            name: "constancy-global",
            pass: constancy_global.iter().all(|c| c.equal_mod_p) && chain.iter().all(|c| c.pass),
        },
        Check {
            name: "perturbation-lemma",
            pass: lemma.iter().all(|l| l.pass),
        },
        Check {
            name: "filtration-agreement",
            pass: records.iter().all(|r| r.filtration_agrees),
        },
        Check {
            name: "exponents",
            pass: exponents_invariant,
        },
        Check {
            name: "negative-control",
            pass: !negative_control.inadmissible.verdict
                && negative_control.reduction.outside_disk_rejected
                && negative_control.reduction.fixed_a_equal,
        },
    ];
    let verdict = checks.iter().all(|c| c.pass);
    Ok(VerifySection {
        residue,
        lemma,
        members: records,
        constancy_fixed_a,
        constancy_global,
        chain,
        exponents,
        exponents_invariant,
        negative_control,
        baseline_residual: ResidualDump {
            pi: residual_mod_p(sr, &residuals[0].pi),
            g: residual_mod_p(sr, &residuals[0].g),
        },
        checks,
        verdict,
    })
}

// ---------------------------------------------------------------- report

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Build,
    Solve,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Build => "build",
            Command::Solve => "solve",
            Command::Verify => "verify",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: Command,
    pub config_hash: String,
    pub config: RunConfig,
    pub context: ContextSection,
    pub family: FamilySection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySection>,
    pub verdict: bool,
}

pub fn solve_bases(setup: &Setup) -> Result<Vec<BaseSolve>, RunError> {
    let labels: Vec<(usize, String)> = (0..setup.params.len())
        .map(|i| {
            (
                i,
                if i == 0 {
                    "a=0".into()
                } else {
                    format!("a[{}]", i - 1)
                },
            )
        })
        .collect();
    crate::par::map(&labels, |(i, l)| solve_base(setup, &setup.params[*i], l))
        .into_iter()
        .collect()
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Report, RunError> {
    let (ctx, fam) = validate(cfg)?;
    let mut report = Report {
        schema: SCHEMA,
        command: cmd,
        config_hash: cfg.content_hash(),
        config: cfg.clone(),
        context: context_section(&ctx),
        family: family_section(&ctx, &fam),
        solve: None,
        verify: None,
        verdict: true,
    };
    if cmd == Command::Build {
        return Ok(report);
    }
    let setup = prepare(cfg)?;
    let bases = solve_bases(&setup)?;
    let solve = solve_section(&setup, &bases)?;
    report.verdict = solve.axioms_pass;
    report.solve = Some(solve);
    if cmd == Command::Verify {
        let v = verify_section(&setup, &bases)?;
        report.verdict &= v.verdict;
        report.verify = Some(v);
    }
    Ok(report)
}

/// Human-readable summary.
pub fn summary(r: &Report) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "wach-forge {} p={} f={} N={} D={} types={:?} m={} m_k={}\n",
        r.command.name(),
        r.context.p,
        r.context.f,
        r.context.n,
        r.context.d,
        r.family.types,
        r.family.m,
        r.family.m_k
    ));
    s.push_str(&format!(
        "exponents: beta={} beta'={} mod {}\n",
        r.family.exponents.beta, r.family.exponents.beta_prime, r.family.exponents.modulus
    ));
    if let Some(sv) = &r.solve {
        s.push_str(&format!(
            "z: {} {:?}\ncocycle margin {} (required {}), lattice {}, determined digits {:?}\n",
            sv.z.report.strategy,
            sv.z.polynomials,
            sv.cocycle.margin,
            sv.required_margin,
            if sv.lattice.iter().all(|l| l.identity_holds) {
                "ok"
            } else {
                "FAILED"
            },
            sv.determined_digits
        ));
        for x in &sv.solves {
            s.push_str(&format!(
                "  solve {}: residual margin {}, loss {} (max {})\n",
                x.label, x.residual_margin, x.total_loss, x.max_loss
            ));
        }
    }
    if let Some(v) = &r.verify {
        for c in &v.checks {
            s.push_str(&format!(
                "  {:<22} {}\n",
                c.name,
                if c.pass { "pass" } else { "FAIL" }
            ));
        }
    }
    s.push_str(&format!(
        "verdict: {}\n",
        if r.verdict { "pass" } else { "FAIL" }
    ));
    s
}
