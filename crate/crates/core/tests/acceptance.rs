//! End-to-end acceptance criteria C1–C10 at the three pinned configurations.
//!
//! Prints one `C<n> PASS|FAIL` line per criterion. Criteria listed in `KNOWN_RED` are
//! expected to fail and the test asserts that they still do. Runs without the libtest
//! harness so the criterion lines are always printed.

use std::time::{Duration, Instant};

use serde_json::Value;
use wach_forge::config::RunConfig;
use wach_forge::family::{alpha_bruteforce, alpha_of};
use wach_forge::padic::{max_precision, smallest_generator_mod_p2, Ring};
use wach_forge::pipeline::{self, Command};
use wach_forge::residue::{
    check_operator_surjective, check_trace_nonconstant_types, legal_type_vectors, qf_mod_i,
    verify_claim_a, ModITag,
};

const KNOWN_RED: &[&str] = &["C2"];

const K1: &str = r#"{"p":3,"f":1,"N":16,"D":12,"weights":[5],"case":"induced","ell":[0,5]}"#;
const K2: &str = r#"{"p":3,"f":2,"N":16,"D":14,"weights":[5,3],"case":"induced","ell":[0,3,5,0]}"#;
const K3: &str =
    r#"{"p":3,"f":2,"N":14,"D":10,"weights":[3,3],"case":"split","ell":[3,0,0,3],"twist_c":[2]}"#;

// time budgets per criterion
const C1_BUDGET: Duration = Duration::from_secs(1);
const C2_BUDGET: Duration = Duration::from_secs(5);
const C3_BUDGET_PER_CONFIG: Duration = Duration::from_secs(120);
// shared verify run covers C4–C6
const VERIFY_BUDGET: Duration = Duration::from_secs(15 * 60);

// residual margin slack below N − α(k−1)
const C3_SLACK: i64 = 4;
const C4_SAMPLES_A: usize = 5;
const C4_SAMPLES_BIG_A: usize = 3;
const C5_SAMPLES_A: usize = 5;
const C6_PAIRS: usize = 9;
const C7_SAMPLES: usize = 5;

struct Verdict {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn verdict(id: &'static str, failures: Vec<String>, ok_detail: String) -> Verdict {
    let pass = failures.is_empty();
    Verdict {
        id,
        pass,
        detail: if pass { ok_detail } else { failures.join("; ") },
    }
}

struct Run {
    name: &'static str,
    report: Value,
    elapsed: Duration,
    bytes: String,
}

fn verify(name: &'static str, text: &str) -> Run {
    let cfg = RunConfig::from_json(text).unwrap();
    let t = Instant::now();
    let r = pipeline::run(Command::Verify, &cfg).unwrap_or_else(|e| panic!("{name}: {e}"));
    let elapsed = t.elapsed();
    let bytes = serde_json::to_string_pretty(&r).unwrap();
    Run {
        name,
        report: serde_json::from_str(&bytes).unwrap(),
        elapsed,
        bytes,
    }
}

fn arr(v: &Value) -> &Vec<Value> {
    v.as_array().expect("array")
}

fn c1() -> Verdict {
    let t = Instant::now();
    let mut bad = Vec::new();
    let mut n = 0;
    for p in [3u64, 5, 7] {
        let ring = Ring::new(p, 1, max_precision(p)).unwrap();
        let chi = smallest_generator_mod_p2(p);
        for l in 0..=50 {
            n += 1;
            let (a, b) = (alpha_of(p, l), alpha_bruteforce(&ring, chi, l));
            if a != b {
                bad.push(format!("p={p} l={l}: {a} vs {b}"));
            }
        }
    }
    let dt = t.elapsed();
    if dt > C1_BUDGET {
        bad.push(format!("took {dt:?}"));
    }
    verdict("C1", bad, format!("{n} cases in {dt:?}"))
}

/// Returns the criterion verdict and whether the parts other than the literal tag claim hold.
fn c2() -> (Verdict, bool) {
    let t = Instant::now();
    let mut tag_bad = Vec::new();
    let mut other_bad = Vec::new();
    let mut n = 0;
    for p in [3u64, 5] {
        let k = Ring::new(p, 1, 2).unwrap().residue_field();
        for weight in p..p + 3 {
            for f in 1..=3 {
                let w = vec![weight; f];
                let units = vec![k.one(); f];
                for (case, ell, types) in legal_type_vectors(&w) {
                    n += 1;
                    let (_, tag) = qf_mod_i(&k, &types, &w, &units);
                    if !matches!(tag, ModITag::E12 | ModITag::E21) {
                        tag_bad.push(format!("p={p} {case:?} {ell:?} -> {tag:?}"));
                    }
                    let claim = verify_claim_a(&k, &types, &w, &units);
                    let trace = check_trace_nonconstant_types(&types, &w);
                    let surj = check_operator_surjective(&k, &types, &w, &units);
                    if !(claim.holds && claim.forces_b_zero && trace.is_some() && surj.surjective) {
                        other_bad.push(format!("p={p} {case:?} {ell:?}"));
                    }
                }
            }
        }
    }
    let dt = t.elapsed();
    let mut bad = Vec::new();
    if !tag_bad.is_empty() {
        bad.push(format!(
            "Q_f mod I is not E12/E21 for {} of {n} vectors (first: {})",
            tag_bad.len(),
            tag_bad[0]
        ));
    }
    if !other_bad.is_empty() {
        bad.push(format!(
            "claim A/trace/surjectivity fail: {}",
            other_bad.join(", ")
        ));
    }
    if dt > C2_BUDGET {
        bad.push(format!("took {dt:?}"));
    }
    let others_ok = other_bad.is_empty() && dt <= C2_BUDGET;
    (
        verdict("C2", bad, format!("{n} vectors in {dt:?}")),
        others_ok,
    )
}

fn c3(runs: &[Run]) -> Verdict {
    let mut bad = Vec::new();
    for r in runs {
        let n = r.report["context"]["N"].as_i64().unwrap();
        let alpha = r.report["family"]["alpha_k_minus_1"].as_i64().unwrap();
        let need = n - alpha - C3_SLACK;
        let solve = &r.report["solve"];
        for s in arr(&solve["solves"]) {
            let m = s["residual_margin"].as_i64().unwrap();
            if m < need {
                bad.push(format!("{} {}: margin {m} < {need}", r.name, s["label"]));
            }
        }
        let cocycle = &solve["cocycle"];
        if cocycle["power"] != 2 || cocycle["margin"].as_i64().unwrap() < need {
            bad.push(format!("{} cocycle {}", r.name, cocycle));
        }
        for l in arr(&solve["lattice"]) {
            if l["integral"] != true || l["identity_holds"] != true {
                bad.push(format!("{} lattice {}", r.name, l["coordinate"]));
            }
        }
        if solve["axioms_pass"] != true {
            bad.push(format!("{} axioms", r.name));
        }
        if r.elapsed > C3_BUDGET_PER_CONFIG {
            bad.push(format!("{} took {:?}", r.name, r.elapsed));
        }
    }
    verdict(
        "C3",
        bad,
        "defect, cocycle and lattice checks hold at K1-K3".into(),
    )
}

fn members<'a>(r: &'a Run, prefix: &str) -> Vec<&'a Value> {
    arr(&r.report["verify"]["members"])
        .iter()
        .filter(|m| m["label"].as_str().unwrap().starts_with(prefix))
        .collect()
}

fn c4(runs: &[Run]) -> Verdict {
    let mut bad = Vec::new();
    for r in runs {
        let sum_k: i64 = arr(&r.report["config"]["weights"])
            .iter()
            .map(|x| x.as_i64().unwrap())
            .sum();
        let ms = members(r, "theorem-a-i:A[");
        let n_big = ms
            .iter()
            .map(|m| {
                m["label"]
                    .as_str()
                    .unwrap()
                    .split(':')
                    .nth(1)
                    .unwrap()
                    .to_string()
            })
            .collect::<std::collections::BTreeSet<_>>()
            .len();
        if ms.len() < C4_SAMPLES_A * C4_SAMPLES_BIG_A || n_big < C4_SAMPLES_BIG_A {
            bad.push(format!(
                "{}: only {} members over {n_big} A",
                r.name,
                ms.len()
            ));
        }
        let weights = arr(&r.report["config"]["weights"]);
        for m in ms.iter().chain(members(r, "baseline").iter()) {
            let wa = &m["weak_admissibility"];
            let lines_ok = arr(&wa["lines"]).iter().all(|l| l["pass"] == true);
            if wa["t_n"].as_i64() != Some(sum_k)
                || wa["t_h"].as_i64() != Some(sum_k)
                || !lines_ok
                || wa["verdict"] != true
            {
                bad.push(format!("{} {}: {}", r.name, m["label"], wa));
            }
            let ht = arr(&m["hodge_tate"]);
            let jumps_ok = ht.iter().zip(weights).all(|(j, k)| {
                let mut js: Vec<i64> = arr(j).iter().map(|x| x.as_i64().unwrap()).collect();
                js.sort();
                js == vec![0, k.as_i64().unwrap()]
            });
            if m["hodge_tate_matches"] != true || !jumps_ok || ht.len() != weights.len() {
                bad.push(format!("{} {}: Hodge-Tate {:?}", r.name, m["label"], ht));
            }
        }
    }
    verdict(
        "C4",
        bad,
        "t_N = t_H = sum k, all lines pass, HT types match".into(),
    )
}

fn c5(runs: &[Run]) -> Verdict {
    let mut bad = Vec::new();
    for r in runs {
        let cmp = arr(&r.report["verify"]["constancy_fixed_a"]);
        for regime in arr(&r.report["config"]["regimes"]) {
            let prefix = format!("{}:fixed-A:", regime.as_str().unwrap());
            let n = cmp
                .iter()
                .filter(|c| c["label"].as_str().unwrap().starts_with(&prefix))
                .count();
            if n < C5_SAMPLES_A {
                bad.push(format!("{} {prefix}: {n} comparisons", r.name));
            }
        }
        for c in cmp {
            if c["equal_mod_p"] != true {
                bad.push(format!("{} {} vs {}", r.name, c["label"], c["against"]));
            }
        }
    }
    verdict("C5", bad, "fixed-A residuals constant mod p".into())
}

fn c6(runs: &[Run]) -> Verdict {
    let mut bad = Vec::new();
    for r in runs {
        let v = &r.report["verify"];
        let cmp = arr(&v["constancy_global"]);
        if cmp.len() < C6_PAIRS {
            bad.push(format!("{}: {} comparisons", r.name, cmp.len()));
        }
        for c in cmp {
            if c["equal_mod_p"] != true || c["against"] != "baseline" {
                bad.push(format!("{} {}", r.name, c["label"]));
            }
        }
        let chain = arr(&v["chain"]);
        if chain.len() < C6_PAIRS {
            bad.push(format!("{}: {} chains", r.name, chain.len()));
        }
        for c in chain {
            if c["pass"] != true || arr(&c["steps"]).iter().any(|s| s["pass"] != true) {
                bad.push(format!("{} chain {}", r.name, c["label"]));
            }
        }
        if r.elapsed > VERIFY_BUDGET {
            bad.push(format!("{} took {:?}", r.name, r.elapsed));
        }
    }
    verdict(
        "C6",
        bad,
        "global residuals constant mod p, mod-I chain passes".into(),
    )
}

fn c7(runs: &[Run]) -> Verdict {
    let mut bad = Vec::new();
    for r in runs {
        let k_max = r.report["family"]["weights"]["k_max"].as_u64().unwrap();
        let lemma = arr(&r.report["verify"]["lemma"]);
        for regime in arr(&r.report["config"]["regimes"]) {
            let n = lemma
                .iter()
                .filter(|l| l["regime"] == *regime && l["scalar"] == false)
                .count();
            if n < C7_SAMPLES {
                bad.push(format!("{} {regime}: {n} samples", r.name));
            }
        }
        for l in lemma {
            let conj = &l["conjugation"];
            let mut ok = conj["constant_term_matches"] == true && l["pass"] == true;
            if l["regime"] == "theorem-a-i" {
                ok &= conj["first_nonzero_degree"]
                    .as_u64()
                    .is_none_or(|d| d >= k_max);
            } else {
                ok &= conj["min_valuation"].as_u64().unwrap() >= 1;
            }
            if l["scalar"] == true {
                ok &= l["hat_equals_a"] == true;
            }
            if !ok {
                bad.push(format!("{} {}", r.name, l["label"]));
            }
        }
    }
    verdict(
        "C7",
        bad,
        "A-hat lifts A, conjugation orders hold, scalars fixed".into(),
    )
}

fn c8(runs: &[Run]) -> Verdict {
    let mut bad = Vec::new();
    let mut n = 0;
    for r in runs {
        for m in arr(&r.report["verify"]["members"]) {
            n += 1;
            let fil = arr(&m["filtration"]);
            if m["filtration_agrees"] != true || fil.iter().any(|c| c["matches_display"] != true) {
                bad.push(format!("{} {}", r.name, m["label"]));
            }
        }
    }
    verdict("C8", bad, format!("{n} members"))
}

fn c9(runs: &[Run]) -> Verdict {
    let mut bad = Vec::new();
    // induced, f = 1, ell = (0, 5): beta = -(0 + 5p) mod p^2 - 1, paired with p·beta
    let modulus = 3i64 * 3 - 1;
    let beta = (-(5 * 3i64)).rem_euclid(modulus);
    let beta_prime = (3 * beta).rem_euclid(modulus);
    assert_eq!((beta, beta_prime, modulus), (1, 3, 8));
    let k1 = &runs[0];
    let e = &k1.report["family"]["exponents"];
    if e["beta"].as_i64() != Some(beta)
        || e["beta_prime"].as_i64() != Some(beta_prime)
        || e["modulus"].as_i64() != Some(modulus)
    {
        bad.push(format!("K1 exponents {e}"));
    }
    for r in runs {
        let v = &r.report["verify"];
        if v["exponents_invariant"] != true {
            bad.push(format!("{} exponents vary", r.name));
        }
        for m in arr(&v["members"]) {
            if m["exponents"] != r.report["family"]["exponents"] {
                bad.push(format!("{} {}", r.name, m["label"]));
            }
        }
    }
    verdict(
        "C9",
        bad,
        format!("K1 (beta, p beta) = ({beta}, {beta_prime}) mod {modulus}"),
    )
}

fn c10(runs: &[Run]) -> Verdict {
    let mut bad = Vec::new();
    for (r, text) in runs.iter().zip([K1, K2, K3]) {
        // a second run on a single worker must match the first byte for byte
        let again = wach_forge::par::with_jobs(1, || verify(r.name, text));
        if again.bytes != r.bytes {
            bad.push(format!("{} differs on rerun", r.name));
        }
    }
    verdict("C10", bad, "reports byte-identical across reruns".into())
}

fn main() {
    let runs = vec![verify("K1", K1), verify("K2", K2), verify("K3", K3)];
    for r in &runs {
        println!(
            "{} verify in {:?}, verdict {}",
            r.name, r.elapsed, r.report["verdict"]
        );
    }
    let (c2v, c2_rest) = c2();
    let all = vec![
        c1(),
        c2v,
        c3(&runs),
        c4(&runs),
        c5(&runs),
        c6(&runs),
        c7(&runs),
        c8(&runs),
        c9(&runs),
        c10(&runs),
    ];
    for v in &all {
        let red = if KNOWN_RED.contains(&v.id) {
            " (known red)"
        } else {
            ""
        };
        println!(
            "{} {}{red}: {}",
            v.id,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    assert!(c2_rest, "C2: claim A, trace or surjectivity failed");
    for v in &all {
        if KNOWN_RED.contains(&v.id) {
            assert!(!v.pass, "{} now passes; remove it from KNOWN_RED", v.id);
        } else {
            assert!(v.pass, "{} FAIL: {}", v.id, v.detail);
        }
    }
    for r in &runs {
        assert_eq!(r.report["verdict"], true, "{} verdict", r.name);
    }
}
