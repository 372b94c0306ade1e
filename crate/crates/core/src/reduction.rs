//! Mod-p comparison of residual Wach data (Π mod p, G mod p).

use serde::Serialize;

use crate::padic::{Val, VAL_INF};
use crate::series::{SeriesRing, TauMatrix};

/// The pair whose reduction mod p is compared across the family.
#[derive(Clone, Debug)]
pub struct Residual {
    pub pi: TauMatrix,
    pub g: TauMatrix,
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub label: String,
    pub against: String,
    pub equal_mod_p: bool,
    /// Minimal valuation of the differences, capped at N.
    pub margin: Val,
}

pub fn residual_margin(sr: &SeriesRing, a: &Residual, b: &Residual) -> Val {
    let n = sr.ring().precision();
    let v = sr
        .tau_valuation(&sr.tau_sub(&a.pi, &b.pi))
        .min(sr.tau_valuation(&sr.tau_sub(&a.g, &b.g)));
    if v == VAL_INF {
        n
    } else {
        v.min(n)
    }
}

pub fn compare(
    sr: &SeriesRing,
    label: &str,
    against: &str,
    a: &Residual,
    b: &Residual,
) -> Comparison {
    let margin = residual_margin(sr, a, b);
    Comparison {
        label: label.into(),
        against: against.into(),
        equal_mod_p: margin >= 1,
        margin,
    }
}

/// Residual matrices mod p: per coordinate, per entry, the π-coefficients as digit strings.
pub fn residual_mod_p(sr: &SeriesRing, m: &TauMatrix) -> Vec<[[Vec<String>; 2]; 2]> {
    let ring = sr.ring();
    let rp = ring.with_precision(1).expect("precision 1");
    m.coords
        .iter()
        .map(|c| {
            let entry = |r: usize, s: usize| -> Vec<String> {
                c[r][s]
                    .c
                    .iter()
                    .map(|x| rp.digit_string(&ring.truncate_to(x, &rp)))
                    .collect()
            };
            [[entry(0, 0), entry(0, 1)], [entry(1, 0), entry(1, 1)]]
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct NegativeControl {
    /// A of valuation exactly α(k−1) moves the residual away from the A = 0 baseline.
    pub residual_moves: bool,
    pub moved_margin: Val,
    /// For that fixed A, two parameter values still share a residual.
    pub fixed_a_equal: bool,
    /// A of valuation α(k−1) − 1 is rejected by the Â construction.
    pub outside_disk_rejected: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::Ring;

    #[test]
    fn margins() {
        let ring = Ring::new(3, 1, 8).unwrap();
        let sr = SeriesRing::new(ring.clone(), 4);
        let a = Residual {
            pi: sr.tau_id(1),
            g: sr.tau_id(1),
        };
        assert_eq!(residual_margin(&sr, &a, &a), 8);
        let mut b = a.clone();
        b.g.coords[0][0][1].c[2] = ring.from_int(9);
        let c = compare(&sr, "x", "y", &a, &b);
        assert!(c.equal_mod_p);
        assert_eq!(c.margin, 2);
        let s = residual_mod_p(&sr, &b.g);
        assert_eq!(s[0][0][0], vec!["1", "0", "0", "0"]);
    }
}
