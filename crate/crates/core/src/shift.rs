//! Finitely supported configurations in `A^G`, the shift action, cone sets
//! and gluing for strong specification, and golden-mean subshifts.
//!
//! Only the homoclinic class of the all-background point `x̄` is modelled:
//! every configuration agrees with `x̄` off a finite set.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupModel, WordMetric};
use crate::invariants::CompressionProfile;

/// The background symbol.
pub const BACKGROUND: u8 = 0;

/// A point of `A^G` equal to the background off a finite support.
///
/// The support never stores background entries, so structural equality is
/// equality of configurations.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    alphabet: u8,
    support: BTreeMap<GroupElement, u8>,
}

impl Configuration {
    /// The background point `x̄`.
    pub fn background(alphabet: u8) -> Self {
        assert!(alphabet >= 1, "alphabet must be nonempty");
        Self { alphabet, support: BTreeMap::new() }
    }

    pub fn from_entries(alphabet: u8, entries: impl IntoIterator<Item = (GroupElement, u8)>) -> Result<Self> {
        let mut x = Self::background(alphabet);
        for (g, a) in entries {
            x.set(g, a)?;
        }
        Ok(x)
    }

    pub fn alphabet(&self) -> u8 {
        self.alphabet
    }

    pub fn support(&self) -> &BTreeMap<GroupElement, u8> {
        &self.support
    }

    pub fn is_background(&self) -> bool {
        self.support.is_empty()
    }

    pub fn at(&self, k: &GroupElement) -> u8 {
        self.support.get(k).copied().unwrap_or(BACKGROUND)
    }

    pub fn set(&mut self, k: GroupElement, symbol: u8) -> Result<()> {
        if symbol >= self.alphabet {
            return Err(Error::Contract(format!("symbol {symbol} outside alphabet of size {}", self.alphabet)));
        }
        if symbol == BACKGROUND {
            self.support.remove(&k);
        } else {
            self.support.insert(k, symbol);
        }
        Ok(())
    }

    /// Serializable form with normal forms as keys.
    pub fn to_file(&self, model: &GroupModel) -> ConfigurationFile {
        ConfigurationFile {
            alphabet: self.alphabet,
            background: BACKGROUND,
            support: self.support.iter().map(|(g, &a)| (model.format_element(g), a)).collect(),
        }
    }

    pub fn from_file(model: &GroupModel, file: &ConfigurationFile) -> Result<Self> {
        if file.background != BACKGROUND {
            return Err(Error::Parse(format!("background must be {BACKGROUND}")));
        }
        let mut x = Self::background(file.alphabet);
        for (g, a) in &file.support {
            x.set(model.parse_element(g)?, *a)?;
        }
        Ok(x)
    }
}

/// JSON form: `{alphabet, background, support: [[normal_form, symbol]]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigurationFile {
    pub alphabet: u8,
    pub background: u8,
    pub support: Vec<(String, u8)>,
}

/// `(h x)_k = x_{h^{-1} k}`: the support moves by left multiplication.
pub fn shift_act(model: &GroupModel, h: &GroupElement, x: &Configuration) -> Configuration {
    Configuration { alphabet: x.alphabet, support: x.support.iter().map(|(k, &a)| (model.mul(h, k), a)).collect() }
}

/// Symbol of `h x` at `k` without materializing the shifted point.
pub fn shifted_at(model: &GroupModel, h_inv: &GroupElement, x: &Configuration, k: &GroupElement) -> u8 {
    if x.support.is_empty() {
        return BACKGROUND;
    }
    x.at(&model.mul(h_inv, k))
}

fn disagreements<'a>(x: &'a Configuration, y: &'a Configuration) -> impl Iterator<Item = &'a GroupElement> {
    let keys: BTreeSet<&GroupElement> = x.support.keys().chain(y.support.keys()).collect();
    keys.into_iter().filter(move |k| x.at(k) != y.at(k))
}

/// Least `N` with `x = y` off `B(N)` (0 when equal).
pub fn homoclinic_n(metric: &WordMetric, x: &Configuration, y: &Configuration) -> Result<u64> {
    disagreements(x, y).try_fold(0, |m, k| Ok(m.max(metric.length_or_err(k)?)))
}

/// Largest `N` with `x = y` on `B(N)`, or `None` when `x = y`. Agreement on
/// `B(-1) = ∅` is encoded as `Some(-1)`.
pub fn agreement_radius(metric: &WordMetric, x: &Configuration, y: &Configuration) -> Result<Option<i64>> {
    let mut best: Option<u64> = None;
    for k in disagreements(x, y) {
        let l = metric.length_or_err(k)?;
        best = Some(best.map_or(l, |b| b.min(l)));
    }
    Ok(best.map(|l| l as i64 - 1))
}

/// Uniform random configuration supported in `cells`, each cell
/// non-background with probability `density`.
pub fn random_configuration<R: Rng>(alphabet: u8, cells: &[GroupElement], density: f64, rng: &mut R) -> Configuration {
    let mut x = Configuration::background(alphabet);
    for k in cells {
        if alphabet > 1 && rng.gen_bool(density) {
            x.support.insert(k.clone(), rng.gen_range(1..alphabet));
        }
    }
    x
}

/// A random `x'` that agrees with `x` on the cells of length `<= keep` and
/// is resampled on the remaining `cells`.
pub fn resample_outside<R: Rng>(metric: &WordMetric, x: &Configuration, cells: &[GroupElement], keep: i64, density: f64, rng: &mut R) -> Result<Configuration> {
    let mut y = x.clone();
    for k in cells {
        if metric.length_or_err(k)? as i64 > keep {
            let a = if x.alphabet > 1 && rng.gen_bool(density) { rng.gen_range(1..x.alphabet) } else { BACKGROUND };
            y.set(k.clone(), a)?;
        }
    }
    Ok(y)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubshiftSpec {
    FullShift { alphabet: u8 },
    /// Configurations where every `g F_j` contains a background cell.
    GoldenMean { alphabet: u8, forbidden: Vec<Vec<GroupElement>> },
}

impl SubshiftSpec {
    pub fn golden_mean(alphabet: u8, forbidden: Vec<Vec<GroupElement>>) -> Result<Self> {
        if forbidden.is_empty() || forbidden.iter().any(Vec::is_empty) {
            return Err(Error::Contract("golden-mean sets F_j must be nonempty".into()));
        }
        Ok(Self::GoldenMean { alphabet, forbidden })
    }

    pub fn alphabet(&self) -> u8 {
        match self {
            Self::FullShift { alphabet } | Self::GoldenMean { alphabet, .. } => *alphabet,
        }
    }

    /// `max_j max_{h in F_j} l(h)` (0 for the full shift).
    pub fn reach(&self, metric: &WordMetric) -> Result<u64> {
        match self {
            Self::FullShift { .. } => Ok(0),
            Self::GoldenMean { forbidden, .. } => forbidden.iter().flatten().try_fold(0, |m, h| Ok(m.max(metric.length_or_err(h)?))),
        }
    }

    /// Specification constants `(s', t')`.
    pub fn specification_constants(&self, metric: &WordMetric) -> Result<(f64, f64)> {
        Ok((1.0, 2.0 * self.reach(metric)? as f64))
    }
}

/// Decides `x ∈ X` for a subshift.
///
/// A constraint at `g` can only fail if `g F_j` meets the support, that is
/// `g ∈ supp · F_j^{-1}`; everywhere else `g F_j` is all background. The
/// window `B(window)` must contain all those `g`.
pub fn membership_check(metric: &WordMetric, x: &Configuration, spec: &SubshiftSpec, window: u64) -> Result<bool> {
    let SubshiftSpec::GoldenMean { forbidden, .. } = spec else {
        return Ok(true);
    };
    let model = metric.model();
    for f in forbidden {
        for k in x.support.keys() {
            for h in f {
                let g = model.mul(k, &model.inverse(h));
                if metric.length_or_err(&g)? > window {
                    return Err(Error::Contract(format!(
                        "window {window} misses the constraint at {}",
                        model.format_element(&g)
                    )));
                }
                if f.iter().all(|h2| x.at(&model.mul(&g, h2)) != BACKGROUND) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Clears symbols until `x` lies in the subshift. Each violated pattern loses
/// its cell farthest from the identity, so if `x` agrees on `B(n)` with a
/// point of the subshift, the result still does.
pub fn restrict_to_subshift(metric: &WordMetric, x: &Configuration, spec: &SubshiftSpec) -> Result<Configuration> {
    let SubshiftSpec::GoldenMean { forbidden, .. } = spec else {
        return Ok(x.clone());
    };
    let model = metric.model();
    let mut y = x.clone();
    'scan: loop {
        for k in y.support.keys() {
            for f in forbidden {
                for h in f {
                    let g = model.mul(k, &model.inverse(h));
                    let cells: Vec<GroupElement> = f.iter().map(|h2| model.mul(&g, h2)).collect();
                    if cells.iter().all(|c| y.at(c) != BACKGROUND) {
                        let mut far = None;
                        for c in cells {
                            let key = (metric.length_or_err(&c)?, c);
                            if far.as_ref().is_none_or(|f| &key > f) {
                                far = Some(key);
                            }
                        }
                        let (_, c) = far.expect("forbidden sets are nonempty");
                        y.set(c, BACKGROUND)?;
                        continue 'scan;
                    }
                }
            }
        }
        return Ok(y);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// Data defining the cones `a^{±j} B([ρ_a(j)/4] + R)`.
#[derive(Debug, Clone)]
pub struct ConeParams {
    pub metric: WordMetric,
    pub a: GroupElement,
    pub profile: CompressionProfile,
    pub r: u64,
    pub s_prime: f64,
    pub t_prime: f64,
}

impl ConeParams {
    pub fn new(metric: &WordMetric, profile: CompressionProfile, r: u64, s_prime: f64, t_prime: f64) -> Result<Self> {
        if s_prime < 1.0 || t_prime < 0.0 {
            return Err(Error::Contract("need s' >= 1 and t' >= 0".into()));
        }
        let a = profile.table().element.clone();
        Ok(Self { metric: metric.clone(), a, profile, r, s_prime, t_prime })
    }

    /// `[r_j] = floor(ρ_a(j) / 4)`.
    pub fn cone_radius(&self, j: u64) -> Result<u64> {
        Ok(self.profile.compression(j)? / 4 + self.r)
    }

    /// `N = ceil(s' l(a) ρ_a^{-1}(4R) + 2R + t')`.
    pub fn n_spec(&self) -> Result<u64> {
        let la = self.metric.length_or_err(&self.a)? as f64;
        let inv = self.profile.rho_inverse(4 * self.r)? as f64;
        Ok((self.s_prime * la * inv + 2.0 * self.r as f64 + self.t_prime).ceil() as u64)
    }

    /// Radius of the ball containing the intersection of the two cones.
    pub fn intersection_bound(&self) -> Result<u64> {
        Ok(self.metric.length_or_err(&self.a)? * self.profile.rho_inverse(4 * self.r)? + 2 * self.r)
    }

    /// Whether `k ∈ ∪_{j>=0} a^{±j} B([r_j] + R)`.
    ///
    /// Since `l(a^{∓j} k) >= ρ(j) - l(k)`, the piece for `j` can only
    /// contain `k` when `3 ρ(j) <= 4 (l(k) + R)`; `ρ̂` is monotone and below
    /// `ρ`, so the search stops at the first `j` failing that test for `ρ̂`.
    pub fn contains(&self, k: &GroupElement, sign: Sign) -> Result<bool> {
        let model = self.metric.model();
        let lk = self.metric.length_or_err(k)?;
        if lk <= self.r {
            return Ok(true);
        }
        let step = match sign {
            Sign::Plus => model.inverse(&self.a),
            Sign::Minus => self.a.clone(),
        };
        let rho_hat = self.profile.rho_hat();
        let limit = 4 * (lk + self.r);
        let mut probe = k.clone();
        let mut j = 0u64;
        while 3 * rho_hat.at(j) <= limit {
            if j > 0 && 3 * self.profile.compression(j)? <= limit && self.metric.length_or_err(&probe)? <= self.cone_radius(j)? {
                return Ok(true);
            }
            j += 1;
            probe = model.mul(&step, &probe);
        }
        Ok(false)
    }
}

/// Glues `x` (on the `+` cone) and `x'` (on the `-` cone) over the
/// background, assuming `x = x'` on `B(N)`.
pub fn glue(x: &Configuration, xp: &Configuration, params: &ConeParams) -> Result<Configuration> {
    let metric = &params.metric;
    let n_spec = params.n_spec()?;
    if let Some(agree) = agreement_radius(metric, x, xp)? {
        if agree < n_spec as i64 {
            return Err(Error::Contract(format!("x and x' agree only on B({agree}), gluing needs B({n_spec})")));
        }
    }
    let mut y = Configuration::background(x.alphabet.max(xp.alphabet));
    let keys: BTreeSet<&GroupElement> = x.support.keys().chain(xp.support.keys()).collect();
    for k in keys {
        let plus = params.contains(k, Sign::Plus)?;
        let minus = params.contains(k, Sign::Minus)?;
        if plus && minus && x.at(k) != xp.at(k) {
            return Err(Error::Internal(format!(
                "cones overlap at {} where x and x' differ",
                metric.model().format_element(k)
            )));
        }
        let a = if plus {
            x.at(k)
        } else if minus {
            xp.at(k)
        } else {
            BACKGROUND
        };
        y.set(k.clone(), a)?;
    }
    if !in_cone_set(params, x, &y, Sign::Plus)? || !in_cone_set(params, xp, &y, Sign::Minus)? {
        return Err(Error::Internal("glued point fails the cone post-check".into()));
    }
    Ok(y)
}

/// `(x, y) ∈ Δ^±(a, R)`, checked on the union of supports (elsewhere both
/// points are background).
pub fn in_cone_set(params: &ConeParams, x: &Configuration, y: &Configuration, sign: Sign) -> Result<bool> {
    for k in disagreements(x, y) {
        if params.contains(k, sign)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariants::power_lengths;

    fn z2() -> (GroupModel, WordMetric) {
        let m = GroupModel::lattice(2).unwrap();
        let metric = WordMetric::new(&m, 200).unwrap();
        (m, metric)
    }

    fn el(m: &GroupModel, s: &str) -> GroupElement {
        m.parse_element(s).unwrap()
    }

    fn cone(m: &GroupModel, metric: &WordMetric, a: &str, r: u64) -> ConeParams {
        let profile = CompressionProfile::new(power_lengths(m, &el(m, a), 64).unwrap()).unwrap();
        ConeParams::new(metric, profile, r, 1.0, 0.0).unwrap()
    }

    #[test]
    fn shift_convention() {
        let (m, _) = z2();
        let x = Configuration::from_entries(2, [(m.identity(), 1)]).unwrap();
        let y = shift_act(&m, &el(&m, "(1,0)"), &x);
        assert_eq!(y.at(&el(&m, "(1,0)")), 1);
        assert_eq!(shift_act(&m, &m.identity(), &x), x);
        let bg = Configuration::background(2);
        assert_eq!(shift_act(&m, &el(&m, "(3,-2)"), &bg), bg);
        assert_eq!(shifted_at(&m, &el(&m, "(-1,0)"), &x, &el(&m, "(1,0)")), 1);
    }

    #[test]
    fn homoclinic_radius() {
        let (m, metric) = z2();
        let x = Configuration::from_entries(2, [(el(&m, "(0,1)"), 1)]).unwrap();
        let mut y = x.clone();
        assert_eq!(homoclinic_n(&metric, &x, &y).unwrap(), 0);
        y.set(el(&m, "(2,3)"), 1).unwrap();
        assert_eq!(homoclinic_n(&metric, &x, &y).unwrap(), 5);
        assert_eq!(agreement_radius(&metric, &x, &y).unwrap(), Some(4));
        let z = Configuration::from_entries(2, [(el(&m, "(7,0)"), 1), (el(&m, "(1,1)"), 1)]).unwrap();
        assert_eq!(homoclinic_n(&metric, &z, &Configuration::background(2)).unwrap(), 7);
    }

    #[test]
    fn cone_membership_basics() {
        let (m, metric) = z2();
        let c0 = cone(&m, &metric, "(1,0)", 0);
        for j in 0..30 {
            assert!(c0.contains(&el(&m, &format!("({j},0)")), Sign::Plus).unwrap());
        }
        assert!(c0.contains(&m.identity(), Sign::Minus).unwrap());
        assert!(!c0.contains(&el(&m, "(5,0)"), Sign::Minus).unwrap());
        assert!(!c0.contains(&el(&m, "(0,3)"), Sign::Plus).unwrap());
        // j = 8 gives the piece (8,0) + B(2)
        assert!(c0.contains(&el(&m, "(8,2)"), Sign::Plus).unwrap());
        assert!(!c0.contains(&el(&m, "(7,2)"), Sign::Plus).unwrap());
    }

    #[test]
    fn cone_intersection_is_small() {
        let (m, metric) = z2();
        for r in [1u64, 2] {
            let c = cone(&m, &metric, "(1,0)", r);
            let bound = c.intersection_bound().unwrap();
            assert_eq!(bound, 4 * r + 2 * r);
            for g in metric.ball_elements(16).unwrap() {
                if c.contains(&g, Sign::Plus).unwrap() && c.contains(&g, Sign::Minus).unwrap() {
                    assert!(metric.length(&g).unwrap() <= bound);
                }
            }
        }
    }

    #[test]
    fn glue_separated_supports() {
        let (m, metric) = z2();
        let c = cone(&m, &metric, "(1,0)", 2);
        assert_eq!(c.n_spec().unwrap(), 12);
        let x = Configuration::from_entries(2, [(el(&m, "(15,0)"), 1)]).unwrap();
        let xp = Configuration::from_entries(2, [(el(&m, "(-15,0)"), 1)]).unwrap();
        let y = glue(&x, &xp, &c).unwrap();
        assert_eq!(y.at(&el(&m, "(15,0)")), 1);
        assert_eq!(y.at(&el(&m, "(-15,0)")), 1);
        assert_eq!(y.support().len(), 2);
        let bg = Configuration::background(2);
        assert_eq!(glue(&bg, &bg, &c).unwrap(), bg);
        assert_eq!(glue(&x, &x, &c).unwrap(), x);
    }

    #[test]
    fn glue_rejects_short_agreement() {
        let (m, metric) = z2();
        let c = cone(&m, &metric, "(1,0)", 2);
        let x = Configuration::from_entries(2, [(el(&m, "(5,0)"), 1)]).unwrap();
        let xp = Configuration::from_entries(2, [(el(&m, "(-5,0)"), 1)]).unwrap();
        assert!(matches!(glue(&x, &xp, &c), Err(Error::Contract(_))));
    }

    #[test]
    fn golden_mean_membership() {
        let (m, metric) = z2();
        let spec = SubshiftSpec::golden_mean(2, vec![vec![m.identity(), el(&m, "(1,0)")]]).unwrap();
        let bg = Configuration::background(2);
        assert!(membership_check(&metric, &bg, &spec, 0).unwrap());
        let one = Configuration::from_entries(2, [(m.identity(), 1)]).unwrap();
        assert!(membership_check(&metric, &one, &spec, 4).unwrap());
        let two = Configuration::from_entries(2, [(m.identity(), 1), (el(&m, "(1,0)"), 1)]).unwrap();
        assert!(!membership_check(&metric, &two, &spec, 4).unwrap());
        let far = Configuration::from_entries(2, [(el(&m, "(3,3)"), 1)]).unwrap();
        assert!(matches!(membership_check(&metric, &far, &spec, 3), Err(Error::Contract(_))));
        assert!(membership_check(&metric, &two, &SubshiftSpec::FullShift { alphabet: 2 }, 0).unwrap());
    }

    #[test]
    fn restriction_keeps_near_cells() {
        let (m, metric) = z2();
        let spec = SubshiftSpec::golden_mean(2, vec![vec![m.identity(), el(&m, "(1,0)")]]).unwrap();
        let x = Configuration::from_entries(2, [(m.identity(), 1), (el(&m, "(1,0)"), 1), (el(&m, "(2,0)"), 1)]).unwrap();
        let y = restrict_to_subshift(&metric, &x, &spec).unwrap();
        assert!(membership_check(&metric, &y, &spec, 6).unwrap());
        assert_eq!(y.at(&m.identity()), 1);
        assert_eq!(y, Configuration::from_entries(2, [(m.identity(), 1), (el(&m, "(2,0)"), 1)]).unwrap());
    }

    #[test]
    fn configuration_file_round_trip() {
        let (m, _) = z2();
        let x = Configuration::from_entries(3, [(el(&m, "(1,-2)"), 2), (m.identity(), 1)]).unwrap();
        let f = x.to_file(&m);
        let json = serde_json::to_string(&f).unwrap();
        let back: ConfigurationFile = serde_json::from_str(&json).unwrap();
        assert_eq!(Configuration::from_file(&m, &back).unwrap(), x);
        assert!(Configuration::from_entries(2, [(m.identity(), 2)]).is_err());
    }
}
