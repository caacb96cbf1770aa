//! Holonomies `c^{(g),±}` as limits of partial products, with certified
//! truncation error.

use serde::Serialize;

use super::spec::CocycleSpec;
use super::target::{HElem, MetricGroup};
use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::invariants::RhoLowerBound;
use crate::report::ser_f64;
use crate::shift::{homoclinic_n, Configuration};

/// Largest number of factors a holonomy may use.
pub const MAX_TERMS: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HolonomySign {
    Plus,
    Minus,
}

/// An (SDT) element `g` with the data needed for `f_g = c(g, .)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub g: GroupElement,
    pub g_inv: GroupElement,
    pub word: Vec<usize>,
    pub rho_hat: RhoLowerBound,
    /// Hölder constant `C_g` of `f_g`.
    pub c_g: f64,
}

impl CocycleSpec {
    /// Fails with [`Error::Unsupported`] when `g` has no declared summable
    /// lower bound `ρ̂`.
    pub fn anchor(&self, g: &GroupElement) -> Result<Anchor> {
        let model = self.model();
        let rho_hat = RhoLowerBound::declared(model, g)
            .ok_or_else(|| Error::Unsupported(format!("{} is not an (SDT) anchor", model.format_element(g))))?;
        let word = self.metric().geodesic_word(g)?;
        let (c_g, _) = self.holder_constants(&word);
        Ok(Anchor { g: g.clone(), g_inv: model.inverse(g), word, rho_hat, c_g })
    }

    /// `f_g(h x) = c(g, h x)`.
    pub fn f_at(&self, anchor: &Anchor, h: &GroupElement, x: &Configuration) -> HElem {
        self.evaluate_word_at(&anchor.word, h, x)
    }

    fn check_alphabet(&self, xs: &[&Configuration]) -> Result<()> {
        match xs.iter().find(|x| x.alphabet() != self.alphabet()) {
            Some(x) => Err(Error::Contract(format!("configuration alphabet {} differs from the cocycle's {}", x.alphabet(), self.alphabet()))),
            None => Ok(()),
        }
    }

    /// `c^{(g),+,(n)}(x, y) = (prod_{j<n} f(g^j x)^{-1}) (prod_{j<n} f(g^j y)^{-1})^{-1}`
    /// and `c^{(g),-,(n)}(x, y) = (prod_{1<=j<n} f(g^{-j} x)) (prod_{1<=j<n} f(g^{-j} y))^{-1}`,
    /// products ordered by increasing `j`. Also returns the accumulated
    /// magnitude of the factors, for rounding estimates.
    fn partial_with_mass(&self, anchor: &Anchor, x: &Configuration, y: &Configuration, n: u64, sign: HolonomySign) -> (HElem, f64) {
        let t = self.target();
        let model = self.model();
        let (mut px, mut py) = (t.identity(), t.identity());
        let mut mass = 0.0;
        let (start, step) = match sign {
            HolonomySign::Plus => (0, &anchor.g),
            HolonomySign::Minus => (1, &anchor.g_inv),
        };
        let mut h = model.pow(step, start as i64);
        for _ in start..n {
            let (fx, fy) = (self.f_at(anchor, &h, x), self.f_at(anchor, &h, y));
            mass += magnitude(&fx) + magnitude(&fy);
            match sign {
                HolonomySign::Plus => {
                    px = t.mul(&px, &t.inv(&fx));
                    py = t.mul(&py, &t.inv(&fy));
                }
                HolonomySign::Minus => {
                    px = t.mul(&px, &fx);
                    py = t.mul(&py, &fy);
                }
            }
            h = model.mul(step, &h);
        }
        (t.mul(&px, &t.inv(&py)), mass)
    }

    pub fn partial_product(&self, anchor: &Anchor, x: &Configuration, y: &Configuration, n: u64, sign: HolonomySign) -> HElem {
        self.partial_with_mass(anchor, x, y, n, sign).0
    }

    /// Certified upper bound on the distance from the `n`-th partial
    /// product to its limit: `C_g r^{-N-1} sum_{j>=n} r^{ρ̂(j)}`.
    pub fn tail_bound(&self, anchor: &Anchor, homoclinic_n: u64, n: u64) -> f64 {
        if anchor.c_g == 0.0 {
            return 0.0;
        }
        let r = self.r();
        anchor.c_g * r.powf(-(homoclinic_n as f64) - 1.0) * anchor.rho_hat.tail_sum(r, n)
    }

    /// Partial products at `n = 1, 2, 4, ...` until the certified tail is
    /// below `eps`.
    pub fn holonomy(&self, anchor: &Anchor, x: &Configuration, y: &Configuration, sign: HolonomySign, eps: f64) -> Result<HolonomyCertificate> {
        self.check_alphabet(&[x, y])?;
        let big_n = homoclinic_n(self.metric(), x, y)?;
        let cert = |value, n_used, tail_bound, rounding_bound| HolonomyCertificate {
            value,
            n_used,
            tail_bound,
            rounding_bound,
            sign,
            anchor: self.model().format_element(&anchor.g),
            homoclinic_n: big_n,
            c: anchor.c_g,
            r: self.r(),
            rho_hat: anchor.rho_hat,
        };
        if x == y {
            return Ok(cert(self.target().identity(), 0, 0.0, 0.0));
        }
        let mut n = 1;
        loop {
            let tail = self.tail_bound(anchor, big_n, n);
            if !tail.is_finite() {
                return Err(Error::Unsupported(format!("tail bound overflows for N = {big_n}")));
            }
            if tail < eps {
                let (value, mass) = self.partial_with_mass(anchor, x, y, n, sign);
                return Ok(cert(value, n, tail, rounding_estimate(self, n, mass)));
            }
            if n >= MAX_TERMS {
                return Err(Error::Unsupported(format!("tail bound {tail:e} still above {eps:e} after {n} terms")));
            }
            n *= 2;
        }
    }
}

fn magnitude(h: &HElem) -> f64 {
    match h {
        HElem::Vector(v) => v.iter().map(|x| x.abs()).sum(),
        HElem::Finite(_) => 0.0,
    }
}

/// Standard floating-point summation bound `2 (n + 2) u sum |terms|`.
fn rounding_estimate(spec: &CocycleSpec, n: u64, mass: f64) -> f64 {
    if spec.target().is_discrete() {
        0.0
    } else {
        2.0 * (n as f64 + 2.0) * f64::EPSILON * (mass + 1.0)
    }
}

/// A holonomy value with the data certifying it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolonomyCertificate {
    pub value: HElem,
    pub n_used: u64,
    /// Bound on `d(value, limit)` in exact arithmetic.
    #[serde(serialize_with = "ser_f64")]
    pub tail_bound: f64,
    /// Allowance for floating-point rounding in the partial product.
    #[serde(serialize_with = "ser_f64")]
    pub rounding_bound: f64,
    pub sign: HolonomySign,
    pub anchor: String,
    pub homoclinic_n: u64,
    #[serde(serialize_with = "ser_f64")]
    pub c: f64,
    #[serde(serialize_with = "ser_f64")]
    pub r: f64,
    pub rho_hat: RhoLowerBound,
}
