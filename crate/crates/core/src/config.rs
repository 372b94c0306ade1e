//! Run configuration and its validation.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::family::{alpha_of, assign_types, Case, FamilySpec, TypedMatrixFamily};
use crate::padic::{make_context, max_precision, GlobalContext};
use crate::perturbation::Regime;

fn default_samples_a() -> usize {
    5
}
fn default_samples_big_a() -> usize {
    3
}
fn default_samples_lemma() -> usize {
    5
}
fn default_budget() -> u32 {
    4
}
fn default_regimes() -> Vec<Regime> {
    vec![Regime::C0, Regime::C1]
}
fn default_margin() -> u32 {
    6
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub p: u64,
    pub f: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ext_degree: Option<usize>,
    #[serde(rename = "N")]
    pub n: u32,
    #[serde(rename = "D")]
    pub d: usize,
    #[serde(default)]
    pub seed: u64,
    pub weights: Vec<u64>,
    pub case: Case,
    pub ell: Vec<u64>,
    /// Coefficients of each c_i in the basis 1, x, …, x^{e−1} of O_E.
    #[serde(default)]
    pub c_units: Vec<Vec<i64>>,
    #[serde(default)]
    pub twist_c: Vec<i64>,
    #[serde(default = "default_samples_a")]
    pub samples_a: usize,
    #[serde(rename = "samples_A", default = "default_samples_big_a")]
    pub samples_big_a: usize,
    /// Perturbations per regime for the Â checks.
    #[serde(default = "default_samples_lemma")]
    pub samples_lemma: usize,
    #[serde(default = "default_budget")]
    pub z_search_budget: u32,
    #[serde(default = "default_regimes")]
    pub regimes: Vec<Regime>,
    #[serde(default = "default_margin")]
    pub margin: u32,
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ValidationError(pub String);

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ValidationError> {
        serde_json::from_str(text).map_err(|e| ValidationError(format!("config: {e}")))
    }

    pub fn ext(&self) -> usize {
        self.ext_degree.unwrap_or(self.f)
    }

    /// Canonical JSON (all defaults filled in).
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON.
    pub fn content_hash(&self) -> String {
        let d = Sha256::digest(self.canonical().as_bytes());
        d.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(GlobalContext, TypedMatrixFamily), ValidationError> {
        let err = |s: String| ValidationError(s);
        if self.weights.len() != self.f {
            return Err(err(format!(
                "weights: expected f = {} entries, got {}",
                self.f,
                self.weights.len()
            )));
        }
        let ctx = make_context(self.p, self.f, self.ext(), self.n, self.d, self.seed)
            .map_err(|e| err(format!("context: {e}")))?;
        let spec = FamilySpec::new(
            self.p,
            self.case,
            &self.weights,
            &self.ell,
            self.c_units.clone(),
            self.twist_c.clone(),
        )
        .map_err(|e| err(e.to_string()))?;
        spec.check_units(ctx.ring())
            .map_err(|e| err(e.to_string()))?;
        for (i, u) in self
            .c_units
            .iter()
            .chain(std::iter::once(&self.twist_c))
            .enumerate()
        {
            if u.len() > self.ext() {
                return Err(err(format!(
                    "c_units/twist_c[{i}]: {} coefficients exceed ext_degree {}",
                    u.len(),
                    self.ext()
                )));
            }
        }
        let k_max = spec.weights.k_max;
        if self.d < 2 * k_max as usize + 2 {
            return Err(err(format!(
                "D: {} is below 2·k_max + 2 = {}",
                self.d,
                2 * k_max + 2
            )));
        }
        let need = 2 + alpha_of(self.p, k_max - 1) as u32 + self.margin;
        if self.n < need {
            return Err(err(format!(
                "N: {} is below 2 + alpha(k_max - 1) + margin = {need}",
                self.n
            )));
        }
        let cap = max_precision(self.p);
        if self.n > cap {
            return Err(err(format!(
                "N: {} exceeds the limit {cap} for p = {}",
                self.n, self.p
            )));
        }
        if self.regimes.is_empty() {
            return Err(err("regimes: at least one regime is required".into()));
        }
        Ok((ctx.clone(), assign_types(&spec, self.p)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const K1: &str = r#"{"p":3,"f":1,"N":16,"D":12,"weights":[5],"case":"induced","ell":[0,5]}"#;

    #[test]
    fn parse_and_hash() {
        let c = RunConfig::from_json(K1).unwrap();
        assert_eq!(c.samples_a, 5);
        assert_eq!(c.regimes, vec![Regime::C0, Regime::C1]);
        let again = RunConfig::from_json(&c.canonical()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.content_hash(), again.content_hash());
        assert_eq!(c.content_hash().len(), 16);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_field_rejected() {
        let bad = K1.replace("\"p\":3", "\"p\":3,\"bogus\":1");
        assert!(RunConfig::from_json(&bad).is_err());
    }

    #[test]
    fn validation_messages() {
        let mut c = RunConfig::from_json(K1).unwrap();
        c.ell = vec![1, 5];
        assert!(c.validate().unwrap_err().0.starts_with("ell"));
        let mut c = RunConfig::from_json(K1).unwrap();
        c.weights = vec![2];
        c.ell = vec![0, 2];
        assert!(c.validate().unwrap_err().0.contains("below p"));
        let mut c = RunConfig::from_json(K1).unwrap();
        c.d = 8;
        assert!(c.validate().unwrap_err().0.starts_with("D"));
        let mut c = RunConfig::from_json(K1).unwrap();
        c.p = 2;
        assert!(c.validate().is_err());
    }
}
