//! The untwisting pipeline: holonomy checks, specification decay, the
//! transfer map `b`, the homomorphism `ψ` and the Hölder modulus of `b`.

use std::collections::HashMap;
use std::sync::RwLock;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::holonomy::{Anchor, HolonomyCertificate, HolonomySign};
use super::spec::CocycleSpec;
use super::target::{HElem, MetricGroup};
use crate::error::{Error, Result};
use crate::group::{Ends, GroupElement};
use crate::report::{ser_f64, ser_f64_vec};
use crate::shift::{agreement_radius, glue, random_configuration, resample_outside, shift_act, ConeParams, Configuration};

/// Default accuracy for continuous targets.
pub const DEFAULT_EPSILON: f64 = 1e-8;

fn dist_to_e(spec: &CocycleSpec, h: &HElem) -> f64 {
    spec.target().dist(h, &spec.target().identity())
}

/// `max d(h(x,y) h(y,z), h(x,z))` over the triples; at most `3 eps` for a
/// cocycle.
pub fn holonomy_identity_check(spec: &CocycleSpec, anchor: &Anchor, triples: &[(Configuration, Configuration, Configuration)], sign: HolonomySign, eps: f64) -> Result<f64> {
    let t = spec.target();
    let defects = triples
        .par_iter()
        .map(|(x, y, z)| {
            let xy = spec.holonomy(anchor, x, y, sign, eps)?.value;
            let yz = spec.holonomy(anchor, y, z, sign, eps)?.value;
            let xz = spec.holonomy(anchor, x, z, sign, eps)?.value;
            Ok(t.dist(&t.mul(&xy, &yz), &xz))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(defects.into_iter().fold(0.0, f64::max))
}

/// `max d(c^{(g),+}(x,y), c^{(h),+}(x,y))`; at most `2 eps` in a one-ended
/// group with sub-exponential divergence.
pub fn generator_independence(spec: &CocycleSpec, g: &Anchor, h: &Anchor, pairs: &[(Configuration, Configuration)], eps: f64) -> Result<f64> {
    let model = spec.model();
    if model.declared_ends() != Ends::One || !model.declared_subexponential_divergence() {
        return Err(Error::Contract(format!("{model} is not declared one-ended with sub-exponential divergence")));
    }
    max_over_pairs(pairs, |x, y| {
        let a = spec.holonomy(g, x, y, HolonomySign::Plus, eps)?.value;
        let b = spec.holonomy(h, x, y, HolonomySign::Plus, eps)?.value;
        Ok(spec.target().dist(&a, &b))
    })
}

/// `max d(c^{(g),+}(x,y), c^{(g),-}(x,y))`.
pub fn plus_minus_agree(spec: &CocycleSpec, anchor: &Anchor, pairs: &[(Configuration, Configuration)], eps: f64) -> Result<f64> {
    max_over_pairs(pairs, |x, y| {
        let a = spec.holonomy(anchor, x, y, HolonomySign::Plus, eps)?.value;
        let b = spec.holonomy(anchor, x, y, HolonomySign::Minus, eps)?.value;
        Ok(spec.target().dist(&a, &b))
    })
}

fn max_over_pairs<F>(pairs: &[(Configuration, Configuration)], f: F) -> Result<f64>
where
    F: Fn(&Configuration, &Configuration) -> Result<f64> + Sync,
{
    let values = pairs.par_iter().map(|(x, y)| f(x, y)).collect::<Result<Vec<f64>>>()?;
    Ok(values.into_iter().fold(0.0, f64::max))
}

/// One row of the specification-decay experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayRow {
    pub r_cone: u64,
    pub n_spec: u64,
    pub pairs: usize,
    /// `max d(c^{(g),+}(x, x'), e)`.
    #[serde(serialize_with = "ser_f64")]
    pub observed: f64,
    /// `max (d(c^+(y, x'), e) + d(c^-(x, y), e))` through the glued `y`.
    #[serde(serialize_with = "ser_f64")]
    pub via_witness: f64,
    /// `2 C r^R sum_j r^{[r_j]}`.
    #[serde(serialize_with = "ser_f64")]
    pub bound: f64,
    /// Certified error of the computed holonomies.
    #[serde(serialize_with = "ser_f64")]
    pub slack: f64,
}

impl DecayRow {
    pub fn passed(&self) -> bool {
        self.observed <= self.bound + self.slack
    }
}

/// `sum_{j>=0} r^{floor(ρ(j)/4)}`, exact where `ρ` is and bounded through
/// `ρ̂` beyond.
pub fn quarter_sum(params: &ConeParams, r: f64) -> f64 {
    let range = params.profile.rho_range();
    let head: f64 = (0..=range).map(|j| r.powi((params.profile.compression(j).unwrap_or(0) / 4) as i32)).sum();
    head + params.profile.rho_hat().quarter_tail_sum(r, range + 1)
}

/// For each cone parameter `R`, samples `pairs` pairs `(x, x')` agreeing on
/// `B(N_spec(R))`, glues them to `y` and compares `d(c^+(x, x'), e)` with
/// the bound `2 C r^R sum_j r^{[r_j]}`.
pub fn specification_decay<G: Rng>(
    spec: &CocycleSpec,
    anchor: &Anchor,
    params: &ConeParams,
    r_list: &[u64],
    pairs: usize,
    eps: f64,
    rng: &mut G,
) -> Result<Vec<DecayRow>> {
    if params.a != anchor.g {
        return Err(Error::Contract("cone element and anchor differ".into()));
    }
    let metric = spec.metric();
    let r = spec.r();
    let sum = quarter_sum(params, r);
    let mut rows = Vec::new();
    for &big_r in r_list {
        let p = ConeParams { r: big_r, ..params.clone() };
        let n_spec = p.n_spec()?;
        let cells = metric.ball_elements(n_spec as u32 + 3)?;
        let mut samples = Vec::with_capacity(pairs);
        for _ in 0..pairs {
            let x = random_configuration(spec.alphabet(), &cells, 0.3, rng);
            let xp = resample_outside(metric, &x, &cells, n_spec as i64, 0.3, rng)?;
            samples.push((x, xp));
        }
        let results = samples
            .par_iter()
            .map(|(x, xp)| {
                let y = glue(x, xp, &p)?;
                let direct = spec.holonomy(anchor, x, xp, HolonomySign::Plus, eps)?;
                let right = spec.holonomy(anchor, &y, xp, HolonomySign::Plus, eps)?;
                let left = spec.holonomy(anchor, x, &y, HolonomySign::Minus, eps)?;
                let slack = [&direct, &right, &left].iter().map(|c| c.tail_bound + c.rounding_bound).sum::<f64>();
                Ok((dist_to_e(spec, &direct.value), dist_to_e(spec, &right.value) + dist_to_e(spec, &left.value), slack))
            })
            .collect::<Result<Vec<_>>>()?;
        let fold = |f: fn(&(f64, f64, f64)) -> f64| results.iter().map(f).fold(0.0, f64::max);
        rows.push(DecayRow {
            r_cone: big_r,
            n_spec,
            pairs,
            observed: fold(|t| t.0),
            via_witness: fold(|t| t.1),
            bound: 2.0 * anchor.c_g * r.powi(big_r as i32) * sum,
            slack: fold(|t| t.2),
        });
    }
    Ok(rows)
}

/// The transfer map `b(x) = c^{(g),+}(x, x̄)`, memoized. `b(x̄) = e`.
///
/// The holonomy is defined only up to left multiplication by a constant;
/// normalizing at `x̄` fixes `ψ` up to conjugation by that constant.
#[derive(Debug)]
pub struct TransferTable {
    spec: CocycleSpec,
    anchor: Anchor,
    eps: f64,
    cache: RwLock<HashMap<Configuration, HolonomyCertificate>>,
}

impl TransferTable {
    pub fn new(spec: &CocycleSpec, g: &GroupElement, eps: f64) -> Result<Self> {
        Ok(Self { spec: spec.clone(), anchor: spec.anchor(g)?, eps, cache: RwLock::new(HashMap::new()) })
    }

    pub fn spec(&self) -> &CocycleSpec {
        &self.spec
    }

    pub fn anchor(&self) -> &Anchor {
        &self.anchor
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn cached(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }

    /// `b(x)` with its certificate. Values are deterministic, so racing
    /// writers store identical entries.
    pub fn get(&self, x: &Configuration) -> Result<HolonomyCertificate> {
        if let Some(c) = self.cache.read().expect("cache lock").get(x) {
            return Ok(c.clone());
        }
        let bg = Configuration::background(self.spec.alphabet());
        let cert = self.spec.holonomy(&self.anchor, x, &bg, HolonomySign::Plus, self.eps)?;
        self.cache.write().expect("cache lock").entry(x.clone()).or_insert_with(|| cert.clone());
        Ok(cert)
    }

    pub fn value(&self, x: &Configuration) -> Result<HElem> {
        Ok(self.get(x)?.value)
    }

    /// `ψ_x(g) = b(g x)^{-1} c(g, x) b(x)`.
    pub fn untwisted(&self, g: &GroupElement, x: &Configuration) -> Result<HElem> {
        let t = self.spec.target();
        let gx = shift_act(self.spec.model(), g, x);
        let c = self.spec.evaluate(g, x)?;
        Ok(t.mul(&t.mul(&t.inv(&self.value(&gx)?), &c), &self.value(x)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiEntry {
    pub element: String,
    pub value: HElem,
    #[serde(serialize_with = "ser_f64")]
    pub constancy_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extraction {
    pub psi: Vec<PsiEntry>,
    pub samples: usize,
    #[serde(serialize_with = "ser_f64")]
    pub constancy_defect: f64,
    #[serde(serialize_with = "ser_f64")]
    pub homomorphism_defect: f64,
    #[serde(serialize_with = "ser_f64")]
    pub tolerance: f64,
}

/// `ψ(g)` from the first sample, with the largest deviation over the other
/// samples and the defect `max d(ψ(g) ψ(h), ψ(gh))` over the test set.
///
/// Fails with [`Error::Verification`] if the constancy defect exceeds `tol`.
pub fn extract_homomorphism(transfer: &TransferTable, tests: &[GroupElement], samples: &[Configuration], tol: f64) -> Result<Extraction> {
    let spec = transfer.spec();
    let t = spec.target();
    let model = spec.model();
    let first = samples.first().ok_or_else(|| Error::Contract("need at least one sample".into()))?;
    let mut psi = Vec::new();
    for g in tests {
        let rep = transfer.untwisted(g, first)?;
        let defects = samples.par_iter().map(|x| Ok(t.dist(&transfer.untwisted(g, x)?, &rep))).collect::<Result<Vec<f64>>>()?;
        psi.push((g.clone(), rep, defects.into_iter().fold(0.0, f64::max)));
    }
    let mut hom: f64 = 0.0;
    for (g, pg, _) in &psi {
        for (h, ph, _) in &psi {
            let gh = model.mul(g, h);
            let pgh = match psi.iter().find(|e| e.0 == gh) {
                Some(e) => e.1.clone(),
                None => transfer.untwisted(&gh, first)?,
            };
            hom = hom.max(t.dist(&t.mul(pg, ph), &pgh));
        }
    }
    let constancy = psi.iter().map(|e| e.2).fold(0.0, f64::max);
    let out = Extraction {
        psi: psi
            .into_iter()
            .map(|(g, value, d)| PsiEntry { element: model.format_element(&g), value, constancy_defect: d })
            .collect(),
        samples: samples.len(),
        constancy_defect: constancy,
        homomorphism_defect: hom,
        tolerance: tol,
    };
    if constancy > tol {
        return Err(Error::Verification(format!("constancy defect {constancy:e} exceeds tolerance {tol:e}")));
    }
    Ok(out)
}

/// Fitted Hölder modulus `d(b(x), b(x')) <= C'' r''^N` for `x = x'` on `B(N)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderFit {
    #[serde(serialize_with = "ser_f64")]
    pub c: f64,
    #[serde(serialize_with = "ser_f64")]
    pub r: f64,
    /// `max_distance[N]` over pairs agreeing on at least `B(N)`.
    #[serde(serialize_with = "ser_f64_vec")]
    pub max_distance: Vec<f64>,
    pub pairs_used: usize,
}

/// Fits the tightest envelope `C'' r''^N` anchored at `N = 0`:
/// `C'' = max_distance[0]` and `r'' = max_{N>=1} (max_distance[N] / C'')^{1/N}`.
/// A vanishing profile gives `r'' = 0`.
///
/// Refuses anchors not certified undistorted: the transfer map is only
/// claimed Hölder for those.
pub fn holder_modulus(transfer: &TransferTable, pairs: &[(Configuration, Configuration)]) -> Result<HolderFit> {
    if !transfer.anchor().rho_hat.is_linear() {
        return Err(Error::Unsupported(format!(
            "anchor {} is not certified undistorted",
            transfer.spec().model().format_element(&transfer.anchor().g)
        )));
    }
    let spec = transfer.spec();
    let metric = spec.metric();
    let measured = pairs
        .par_iter()
        .map(|(x, y)| {
            let Some(n) = agreement_radius(metric, x, y)? else { return Ok(None) };
            if n < 0 {
                return Ok(None);
            }
            Ok(Some((n as usize, spec.target().dist(&transfer.value(x)?, &transfer.value(y)?))))
        })
        .collect::<Result<Vec<_>>>()?;
    let measured: Vec<(usize, f64)> = measured.into_iter().flatten().collect();
    let top = measured.iter().map(|m| m.0).max().unwrap_or(0);
    let mut max_distance = vec![0.0f64; top + 1];
    for &(n, d) in &measured {
        for slot in &mut max_distance[..=n] {
            *slot = slot.max(d);
        }
    }
    let c = max_distance[0];
    let r = if c == 0.0 {
        0.0
    } else {
        max_distance.iter().enumerate().skip(1).map(|(n, &d)| (d / c).powf(1.0 / n as f64)).fold(0.0, f64::max)
    };
    Ok(HolderFit { c, r, max_distance, pairs_used: measured.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::spec::{images_from_basis, BlockMap};
    use crate::cocycle::target::TargetGroup;
    use crate::group::{GroupModel, WordMetric};
    use crate::invariants::{power_lengths, CompressionProfile};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn planted(target: TargetGroup, basis: &[HElem], weights: &[(&str, HElem)]) -> (GroupModel, CocycleSpec) {
        let m = GroupModel::lattice(2).unwrap();
        let metric = WordMetric::new(&m, 120).unwrap();
        let cells: Vec<GroupElement> = weights.iter().map(|(k, _)| m.parse_element(k).unwrap()).collect();
        let t = target.clone();
        let bstar = BlockMap::tabulate(&metric, 2, cells, |p| {
            p.iter().zip(weights).filter(|(&s, _)| s == 1).fold(t.identity(), |acc, (_, (_, w))| t.mul(&acc, w))
        })
        .unwrap();
        let phi = images_from_basis(&m, &target, basis).unwrap();
        (m.clone(), CocycleSpec::coboundary(&metric, 2, target, &phi, &bstar).unwrap())
    }

    fn samples(m: &GroupModel, n: usize, radius: u32, seed: u64) -> Vec<Configuration> {
        let cells = WordMetric::new(m, radius).unwrap().ball_elements(radius).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| random_configuration(2, &cells, 0.4, &mut rng)).collect()
    }

    #[test]
    fn transfer_recovers_bstar_difference() {
        let (m, c) = planted(TargetGroup::real(1), &[HElem::Vector(vec![0.0]), HElem::Vector(vec![0.0])], &[("(0,0)", HElem::Vector(vec![1.0]))]);
        let b = TransferTable::new(&c, &m.parse_element("(1,0)").unwrap(), 1e-8).unwrap();
        assert_eq!(b.value(&Configuration::background(2)).unwrap(), HElem::Vector(vec![0.0]));
        let x = Configuration::from_entries(2, [(m.identity(), 1)]).unwrap();
        assert_eq!(b.value(&x).unwrap(), HElem::Vector(vec![-1.0]));
        assert_eq!(b.cached(), 2);
    }

    #[test]
    fn roundtrip_over_z5() {
        let t = TargetGroup::cyclic(5).unwrap();
        let (m, c) = planted(t, &[HElem::Finite(2), HElem::Finite(3)], &[("(0,0)", HElem::Finite(1)), ("(1,1)", HElem::Finite(4))]);
        let b = TransferTable::new(&c, &m.parse_element("(0,1)").unwrap(), 0.25).unwrap();
        let tests: Vec<_> = ["(1,0)", "(0,1)", "(-1,0)", "(2,-1)"].iter().map(|s| m.parse_element(s).unwrap()).collect();
        let ex = extract_homomorphism(&b, &tests, &samples(&m, 20, 3, 1), 0.0).unwrap();
        let expected = [2, 3, 3, 1];
        for (e, want) in ex.psi.iter().zip(expected) {
            assert_eq!(e.value, HElem::Finite(want));
        }
        assert_eq!(ex.homomorphism_defect, 0.0);
    }

    #[test]
    fn plus_minus_and_independence() {
        let (m, c) = planted(TargetGroup::real(2), &[HElem::Vector(vec![1.0, 0.5]), HElem::Vector(vec![0.0, -2.0])], &[
            ("(0,0)", HElem::Vector(vec![1.0, 0.0])),
            ("(0,2)", HElem::Vector(vec![0.25, 0.5])),
        ]);
        let g = c.anchor(&m.parse_element("(1,0)").unwrap()).unwrap();
        let h = c.anchor(&m.parse_element("(0,1)").unwrap()).unwrap();
        let xs = samples(&m, 8, 3, 2);
        let pairs: Vec<_> = xs.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
        assert!(plus_minus_agree(&c, &g, &pairs, 1e-8).unwrap() <= 2e-8);
        assert!(generator_independence(&c, &g, &h, &pairs, 1e-8).unwrap() <= 2e-8);
        let triples: Vec<_> = xs.windows(3).map(|w| (w[0].clone(), w[1].clone(), w[2].clone())).collect();
        assert!(holonomy_identity_check(&c, &g, &triples, HolonomySign::Plus, 1e-8).unwrap() <= 3e-8);
    }

    #[test]
    fn independence_needs_one_end() {
        let m = GroupModel::cyclic();
        let metric = WordMetric::new(&m, 10).unwrap();
        let t = TargetGroup::real(1);
        let c = CocycleSpec::homomorphism(&metric, 2, t.clone(), &images_from_basis(&m, &t, &[HElem::Vector(vec![1.0])]).unwrap()).unwrap();
        let g = c.anchor(&m.parse_element("1").unwrap()).unwrap();
        assert!(matches!(generator_independence(&c, &g, &g, &[], 1e-8), Err(Error::Contract(_))));
    }

    #[test]
    fn holder_modulus_of_window_two_bstar() {
        let (m, c) = planted(TargetGroup::real(1), &[HElem::Vector(vec![0.5]), HElem::Vector(vec![0.0])], &[
            ("(0,0)", HElem::Vector(vec![1.0])),
            ("(1,0)", HElem::Vector(vec![0.375])),
            ("(0,2)", HElem::Vector(vec![0.125])),
        ]);
        let b = TransferTable::new(&c, &m.parse_element("(1,0)").unwrap(), 1e-8).unwrap();
        let metric = c.metric().clone();
        let cells = metric.ball_elements(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pairs = Vec::new();
        for i in 0..120 {
            let x = random_configuration(2, &cells, 0.5, &mut rng);
            let y = resample_outside(&metric, &x, &cells, (i % 6) as i64 - 1, 0.5, &mut rng).unwrap();
            pairs.push((x, y));
        }
        let fit = holder_modulus(&b, &pairs).unwrap();
        assert!(fit.max_distance[2..].iter().all(|&d| d == 0.0));
        assert!(fit.r <= c.r());
    }

    #[test]
    fn decay_bound_holds() {
        let (m, c) = planted(TargetGroup::real(1), &[HElem::Vector(vec![1.0]), HElem::Vector(vec![0.0])], &[
            ("(0,0)", HElem::Vector(vec![1.0])),
            ("(1,1)", HElem::Vector(vec![0.5])),
        ]);
        let a = m.parse_element("(1,0)").unwrap();
        let anchor = c.anchor(&a).unwrap();
        let profile = CompressionProfile::new(power_lengths(&m, &a, 80).unwrap()).unwrap();
        let params = ConeParams::new(c.metric(), profile, 0, 1.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows = specification_decay(&c, &anchor, &params, &[0, 1, 2], 5, 1e-8, &mut rng).unwrap();
        assert!(rows.iter().all(DecayRow::passed));
        assert!(rows[0].bound > rows[2].bound);
    }
}
