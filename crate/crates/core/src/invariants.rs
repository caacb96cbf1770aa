//! Distortion, compression and translation numbers of cyclic subgroups.
//!
//! For an infinite-order `g` and `T = {g, g^{-1}}`:
//!
//! * `Δ_g(x) = max { j >= 0 : l_S(g^j) <= x }` (distortion),
//! * `ρ_g(i) = min { l_S(g^j) : |j| >= i }` (compression),
//! * `ρ_g^{-1}(c) = sup { λ > 0 : ρ_g(λ) <= c }`.
//!
//! All values come from exact word lengths and are only reported on their
//! certified range: `Δ_g(x)` for `x <= R`, `ρ_g(i)` for `i <= Δ_g(R)`, where
//! `R` is the radius of the underlying metric. Queries outside that range
//! return [`Error::OutOfRange`].
//!
//! Real arguments are reduced to the integer grid: `Δ_g` is constant on
//! `[n, n + 1)` and `ρ_g` on `(n - 1, n]`, which is what the definitions give.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupModel, ModelKind, WordMetric, GeneratingSet};
use crate::report::{fmt_f64, ser_f64, ser_opt_f64, Csv};

/// An analytic lower bound `ρ̂(j) <= ρ_g(j)` valid for every `j`, which
/// finite enumeration cannot supply on its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RhoLowerBound {
    /// `ρ̂(j) = slope * j`; certifies that `g` is undistorted.
    Linear { slope: u64 },
    /// `ρ̂(j) = ceil(sqrt(multiplier * j))`.
    CeilSqrt { multiplier: u64 },
}

fn ceil_sqrt(n: u64) -> u64 {
    let mut s = (n as f64).sqrt() as u64;
    while s * s > n {
        s -= 1;
    }
    while s * s < n {
        s += 1;
    }
    s
}

impl RhoLowerBound {
    /// The declared bound for `g` in a built-in model, or `None` for the
    /// identity (the only finite-order element of any built-in).
    ///
    /// * lattices, `Z`: `l(g^j) = j l(g)` for the standard basis; with the
    ///   diagonal generator each letter moves the sup-norm by at most one,
    ///   so `l(g^j) >= j |g|_inf`;
    /// * Heisenberg `(x, y, z)`: projecting to `Z^2` is 1-Lipschitz, giving
    ///   `j (|x| + |y|)`; for central `(0, 0, z)` a word for `(0, 0, jz)`
    ///   traces a closed lattice path enclosing signed area `jz`, so its
    ///   length is at least `4 sqrt(j|z|) >= ceil(sqrt(j|z|))`;
    /// * free groups: `l(g^j) >= j` times the cyclically reduced length;
    /// * products: lengths add, so linear parts add and square-root parts
    ///   combine through `sqrt(a) + sqrt(b) >= sqrt(a + b)`.
    pub fn declared(model: &GroupModel, g: &GroupElement) -> Option<Self> {
        match (model.kind(), g) {
            (ModelKind::IntegerLattice(_), GroupElement::Lattice(v)) => {
                let slope = match model.generating_set() {
                    GeneratingSet::Standard => v.iter().map(|x| x.unsigned_abs()).sum(),
                    GeneratingSet::DiagonalAugmented => v.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0),
                };
                (slope > 0).then_some(Self::Linear { slope })
            }
            (ModelKind::InfiniteCyclic, GroupElement::Cyclic(n)) => (*n != 0).then_some(Self::Linear { slope: n.unsigned_abs() }),
            (ModelKind::DiscreteHeisenberg, GroupElement::Heisenberg([x, y, z])) => {
                let slope = x.unsigned_abs() + y.unsigned_abs();
                if slope > 0 {
                    Some(Self::Linear { slope })
                } else if *z != 0 {
                    Some(Self::CeilSqrt { multiplier: z.unsigned_abs() })
                } else {
                    None
                }
            }
            (ModelKind::FreeGroup(_), GroupElement::Free(w)) => {
                let mut lo = 0;
                let mut hi = w.len();
                while hi - lo >= 2 && w[lo] == -w[hi - 1] {
                    lo += 1;
                    hi -= 1;
                }
                let slope = (hi - lo) as u64;
                (slope > 0).then_some(Self::Linear { slope })
            }
            (ModelKind::DirectProduct(fs), GroupElement::Product(cs)) => {
                let parts: Vec<Self> = fs.iter().zip(cs).filter_map(|(f, c)| Self::declared(f, c)).collect();
                let linear: u64 = parts
                    .iter()
                    .map(|p| match p {
                        Self::Linear { slope } => *slope,
                        Self::CeilSqrt { .. } => 0,
                    })
                    .sum();
                if linear > 0 {
                    Some(Self::Linear { slope: linear })
                } else if parts.is_empty() {
                    None
                } else {
                    let multiplier = parts
                        .iter()
                        .map(|p| match p {
                            Self::CeilSqrt { multiplier } => *multiplier,
                            Self::Linear { .. } => 0,
                        })
                        .sum();
                    Some(Self::CeilSqrt { multiplier })
                }
            }
            _ => None,
        }
    }

    pub fn at(&self, j: u64) -> u64 {
        match *self {
            Self::Linear { slope } => slope * j,
            Self::CeilSqrt { multiplier } => ceil_sqrt(multiplier * j),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Self::Linear { .. })
    }

    /// Rigorous upper bound on `sum_{j >= n} r^{ρ̂(j)}` in closed form.
    ///
    /// The square-root case sums by blocks: `ρ̂(j) = k` holds for at most
    /// `(2k + m - 2) / m` values of `j`.
    pub fn tail_sum(&self, r: f64, n: u64) -> f64 {
        assert!(r > 0.0 && r < 1.0, "ratio must lie in (0, 1)");
        if n == 0 {
            return 1.0 + self.tail_sum(r, 1);
        }
        match *self {
            Self::Linear { slope } => {
                let q = r.powf(slope as f64);
                q.powf(n as f64) / (1.0 - q)
            }
            Self::CeilSqrt { multiplier } => {
                let m = multiplier as f64;
                let k0 = self.at(n);
                let last_in_block = (k0 * k0) / multiplier;
                let first_block = (last_in_block + 1 - n) as f64 * r.powf(k0 as f64);
                let k1 = (k0 + 1) as f64;
                let s0 = r.powf(k1) / (1.0 - r);
                let s1 = r.powf(k1) * (k1 - (k1 - 1.0) * r) / ((1.0 - r) * (1.0 - r));
                first_block + (2.0 * s1 + (m - 2.0) * s0) / m
            }
        }
    }

    /// Upper bound on `sum_{j >= n} r^{floor(ρ̂(j) / 4)}`, using
    /// `floor(t / 4) >= t / 4 - 3/4`.
    pub fn quarter_tail_sum(&self, r: f64, n: u64) -> f64 {
        r.powf(-0.75) * self.tail_sum(r.powf(0.25), n)
    }
}

/// Exact `(j, l_S(g^j))` for every `j >= 1` with `l_S(g^j) <= R`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLengthTable {
    pub element: GroupElement,
    pub radius: u64,
    pub entries: Vec<(u64, u64)>,
    pub rho_hat: RhoLowerBound,
}

impl PowerLengthTable {
    pub fn j_max(&self) -> u64 {
        self.entries.last().map_or(0, |e| e.0)
    }

    pub fn length_of_power(&self, j: u64) -> Option<u64> {
        self.entries.binary_search_by_key(&j, |e| e.0).ok().map(|i| self.entries[i].1)
    }

    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["j", "length"]);
        for (j, l) in &self.entries {
            csv.row(&[j.to_string(), l.to_string()]);
        }
        csv.finish()
    }
}

/// Powers of `g` inside the certified range of `metric`.
///
/// The search for powers stops once `ρ̂(j) > R`: no later power can have
/// length `<= R`.
pub fn power_lengths_in(metric: &WordMetric, g: &GroupElement) -> Result<PowerLengthTable> {
    let model = metric.model();
    if !model.contains(g) {
        return Err(Error::ModelMismatch { group: model.descriptor().into(), element: format!("{g:?}") });
    }
    let rho_hat = RhoLowerBound::declared(model, g)
        .ok_or_else(|| Error::Contract(format!("{} has finite order", model.format_element(g))))?;
    let radius = u64::from(metric.radius());
    let mut entries = Vec::new();
    let mut power = model.identity();
    let mut j = 1;
    while rho_hat.at(j) <= radius {
        power = model.mul(&power, g);
        if let Some(l) = metric.length(&power).filter(|&l| l <= radius) {
            entries.push((j, l));
        }
        j += 1;
    }
    Ok(PowerLengthTable { element: g.clone(), radius, entries, rho_hat })
}

/// Enumerates `B(R)` (or uses a closed form) and tabulates powers of `g`.
pub fn power_lengths(model: &GroupModel, g: &GroupElement, radius: u32) -> Result<PowerLengthTable> {
    power_lengths_in(&WordMetric::new(model, radius)?, g)
}

/// Exact `ρ_g` and `Δ_g` tables with the validated lower bound `ρ̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressionProfile {
    table: PowerLengthTable,
    /// `delta[x] = Δ_g(x)` for `0 <= x <= R`.
    delta: Vec<u64>,
    /// `rho[i] = ρ_g(i)` for `0 <= i <= Δ_g(R)`.
    rho: Vec<u64>,
}

impl CompressionProfile {
    /// Builds both tables and checks `ρ̂(j) <= ρ_g(j)` on the whole exact
    /// range, failing with [`Error::Verification`] if the declared bound is
    /// unsound.
    pub fn new(table: PowerLengthTable) -> Result<Self> {
        let radius = table.radius as usize;
        let mut delta = vec![0u64; radius + 1];
        for &(j, l) in &table.entries {
            for d in delta.iter_mut().skip(l as usize) {
                *d = (*d).max(j);
            }
        }
        let j_max = delta[radius] as usize;
        let mut rho = vec![0u64; j_max + 1];
        let mut best = u64::MAX;
        let mut idx = table.entries.len();
        for i in (1..=j_max).rev() {
            while idx > 0 && table.entries[idx - 1].0 as usize >= i {
                idx -= 1;
                best = best.min(table.entries[idx].1);
            }
            rho[i] = best;
        }
        for (i, &r) in rho.iter().enumerate().skip(1) {
            let bound = table.rho_hat.at(i as u64);
            if bound > r {
                return Err(Error::Verification(format!("declared lower bound ρ̂({i}) = {bound} exceeds ρ({i}) = {r}")));
            }
        }
        Ok(Self { table, delta, rho })
    }

    pub fn table(&self) -> &PowerLengthTable {
        &self.table
    }

    pub fn radius(&self) -> u64 {
        self.table.radius
    }

    /// Largest `i` with `ρ_g(i)` exact, namely `Δ_g(R)`.
    pub fn rho_range(&self) -> u64 {
        (self.rho.len() - 1) as u64
    }

    pub fn rho_hat(&self) -> RhoLowerBound {
        self.table.rho_hat
    }

    pub fn distortion(&self, x: u64) -> Result<u64> {
        self.delta
            .get(x as usize)
            .copied()
            .ok_or_else(|| Error::OutOfRange(format!("Δ({x}) needs radius {x} > {}", self.radius())))
    }

    pub fn compression(&self, i: u64) -> Result<u64> {
        self.rho
            .get(i as usize)
            .copied()
            .ok_or_else(|| Error::OutOfRange(format!("ρ({i}) is exact only up to {}", self.rho_range())))
    }

    /// `ρ` where exact, `ρ̂` beyond; always a lower bound for the true `ρ`.
    pub fn compression_or_bound(&self, i: u64) -> u64 {
        self.rho.get(i as usize).copied().unwrap_or_else(|| self.table.rho_hat.at(i))
    }

    /// `sup { λ > 0 : ρ_g(λ) <= c }`, which on the integer grid is the
    /// largest `i >= 1` with `ρ_g(i) <= c` (0 when there is none).
    pub fn rho_inverse(&self, c: u64) -> Result<u64> {
        if c > self.radius() {
            return Err(Error::OutOfRange(format!("ρ^-1({c}) needs radius {c} > {}", self.radius())));
        }
        Ok(self.rho.iter().enumerate().skip(1).filter(|(_, &r)| r <= c).map(|(i, _)| i as u64).max().unwrap_or(0))
    }

    pub fn rho_csv(&self) -> String {
        let mut csv = Csv::new(&["i", "rho"]);
        for (i, r) in self.rho.iter().enumerate().skip(1) {
            csv.row(&[i.to_string(), r.to_string()]);
        }
        csv.finish()
    }

    pub fn delta_csv(&self) -> String {
        let mut csv = Csv::new(&["x", "delta"]);
        for (x, d) in self.delta.iter().enumerate() {
            csv.row(&[x.to_string(), d.to_string()]);
        }
        csv.finish()
    }
}

/// Outcome of checking the elementary distortion inequalities.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct InequalityReport {
    pub checked: u64,
    pub violations: Vec<String>,
}

impl InequalityReport {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.violations.push(what());
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks on the exact range:
///
/// * `Δ(l(g^i)) >= i` and `ρ(i) <= l(g^i)`;
/// * `Δ(ρ(x) - 1) < x < ρ(Δ(x) + 1)` and `ρ^{-1}(x) <= Δ(x)`;
/// * `ρ` subadditive and `Δ` superadditive;
/// * both monotone.
pub fn check_distortion_inequalities(p: &CompressionProfile) -> InequalityReport {
    let mut rep = InequalityReport::default();
    let radius = p.radius();
    let jmax = p.rho_range();
    for &(i, l) in &p.table.entries {
        let d = p.distortion(l).unwrap();
        rep.check(d >= i, || format!("Δ(l(g^{i})) = {d} < {i}"));
        if let Ok(r) = p.compression(i) {
            rep.check(r <= l, || format!("ρ({i}) = {r} > l(g^{i}) = {l}"));
        }
    }
    for x in 1..=jmax {
        let r = p.compression(x).unwrap();
        let d = p.distortion(r - 1).unwrap();
        rep.check(d < x, || format!("Δ(ρ({x}) - 1) = {d} >= {x}"));
    }
    for x in 0..=radius {
        let d = p.distortion(x).unwrap();
        if d < jmax {
            let r = p.compression(d + 1).unwrap();
            rep.check(x < r, || format!("ρ(Δ({x}) + 1) = {r} <= {x}"));
        }
        let inv = p.rho_inverse(x).unwrap();
        rep.check(inv <= d, || format!("ρ^-1({x}) = {inv} > Δ({x}) = {d}"));
        if x > 0 {
            let prev = p.distortion(x - 1).unwrap();
            rep.check(prev <= d, || format!("Δ decreases at {x}"));
        }
    }
    for x in 1..=jmax {
        let r = p.compression(x).unwrap();
        rep.check(p.compression(x - 1).unwrap() <= r, || format!("ρ decreases at {x}"));
        for y in 1..=jmax - x {
            let lhs = p.compression(x + y).unwrap();
            let rhs = r + p.compression(y).unwrap();
            rep.check(lhs <= rhs, || format!("ρ({x}+{y}) = {lhs} > ρ({x}) + ρ({y}) = {rhs}"));
        }
    }
    for x in 0..=radius {
        for y in 0..=radius - x {
            let lhs = p.distortion(x + y).unwrap();
            let rhs = p.distortion(x).unwrap() + p.distortion(y).unwrap();
            rep.check(lhs >= rhs, || format!("Δ({x}+{y}) = {lhs} < Δ({x}) + Δ({y}) = {rhs}"));
        }
    }
    rep
}

/// The sequence `l(g^n)/n`, every term of which bounds `τ_S(g)` from above.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranslationEstimate {
    /// `(n, l(g^n)/n)` for every tabulated `n`.
    pub terms: Vec<(u64, f64)>,
    /// Running minimum of `terms`, which is non-increasing.
    pub running_min: Vec<(u64, f64)>,
    #[serde(serialize_with = "ser_f64")]
    pub best_upper_bound: f64,
    pub best_n: u64,
    /// `λ` with `τ_S(g) >= λ > 0`, present only when `ρ̂` is linear.
    #[serde(serialize_with = "ser_opt_f64")]
    pub undistorted_witness: Option<f64>,
}

impl TranslationEstimate {
    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["n", "ratio", "running_min"]);
        for ((n, t), (_, m)) in self.terms.iter().zip(&self.running_min) {
            csv.row(&[n.to_string(), fmt_f64(*t), fmt_f64(*m)]);
        }
        csv.finish()
    }
}

pub fn translation_number(table: &PowerLengthTable) -> Result<TranslationEstimate> {
    if table.entries.is_empty() {
        return Err(Error::Contract("translation number needs a nonempty power table".into()));
    }
    let terms: Vec<(u64, f64)> = table.entries.iter().map(|&(n, l)| (n, l as f64 / n as f64)).collect();
    let mut running_min = Vec::with_capacity(terms.len());
    let mut best = (0, f64::INFINITY);
    for &(n, t) in &terms {
        if t < best.1 {
            best = (n, t);
        }
        running_min.push((n, best.1));
    }
    let undistorted_witness = match table.rho_hat {
        RhoLowerBound::Linear { slope } => Some(slope as f64),
        RhoLowerBound::CeilSqrt { .. } => None,
    };
    Ok(TranslationEstimate { terms, running_min, best_upper_bound: best.1, best_n: best.0, undistorted_witness })
}

/// Partial sum of `sum_i r^{ρ_g(i)}` with a certified tail.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdtReport {
    #[serde(serialize_with = "ser_f64")]
    pub partial: f64,
    #[serde(serialize_with = "ser_f64")]
    pub tail_bound: f64,
    #[serde(serialize_with = "ser_f64")]
    pub r: f64,
    #[serde(rename = "T")]
    pub terms: u64,
}

/// `sum_{i=1}^{T} r^{ρ(i)}` (exact `ρ` where certified, `ρ̂` beyond) and a
/// closed-form bound on `sum_{i>T} r^{ρ̂(i)}`.
pub fn sdt_partial_sum(profile: &CompressionProfile, r: f64, terms: u64) -> Result<SdtReport> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Contract(format!("ratio {r} must lie in (0, 1)")));
    }
    let partial = (1..=terms).map(|i| r.powf(profile.compression_or_bound(i) as f64)).sum();
    let tail_bound = profile.rho_hat().tail_sum(r, terms + 1);
    Ok(SdtReport { partial, tail_bound, r, terms })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugationReport {
    pub conjugator_length: u64,
    /// `min_n ρ_{tgt^{-1}}(n) - (ρ_g(n) - 2 l(t))` over the checked range.
    pub min_slack: i64,
    pub checked_up_to: u64,
}

/// Verifies `ρ_{tgt^{-1}}(n) >= ρ_g(n) - 2 l_S(t)` on the common exact range.
pub fn conjugation_compression_check(metric: &WordMetric, g: &GroupElement, t: &GroupElement) -> Result<ConjugationReport> {
    let model = metric.model();
    let conj = model.conjugate(t, g);
    let pg = CompressionProfile::new(power_lengths_in(metric, g)?)?;
    let pc = CompressionProfile::new(power_lengths_in(metric, &conj)?)?;
    let t_len = metric.length_or_err(t)?;
    let range = pg.rho_range().min(pc.rho_range());
    if range == 0 {
        return Err(Error::OutOfRange("no power of g or its conjugate fits in the ball".into()));
    }
    let min_slack = (1..=range)
        .map(|n| pc.compression(n).unwrap() as i64 - (pg.compression(n).unwrap() as i64 - 2 * t_len as i64))
        .min()
        .unwrap();
    Ok(ConjugationReport { conjugator_length: t_len, min_slack, checked_up_to: range })
}
