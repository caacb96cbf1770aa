//! Divergence of point pairs in a Cayley graph and the divergence function.
//!
//! The divergence of `a, b` relative to `c` is the length of a shortest path
//! from `a` to `b` that avoids the ball of radius `d(c, {a, b})/2 - 2`
//! around `c`. Here the radius is `max(0, floor(d/2) - 2)` and the ball is
//! open, `{ v : d(c, v) < radius }`, so a zero radius removes nothing.
//!
//! Searches are confined to a window `B(W)` around the identity. A finite
//! answer is exact for the window ("window-exact") and only an upper bound
//! for the whole graph; a disconnected window makes no claim about the
//! group unless the group is a line, where an interior obstacle is a cut.

use std::collections::{HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{GeneratingSet, GroupElement, GroupModel, ModelKind, WordMetric};
use crate::report::{fmt_f64, ser_f64, Csv};

/// `max(0, floor(d/2) - 2)`.
pub fn forbidden_radius_for(distance: u64) -> u64 {
    (distance / 2).saturating_sub(2)
}

/// The Cayley ball `B(W)` as an indexed graph.
#[derive(Debug, Clone)]
pub struct Window {
    model: GroupModel,
    radius: u32,
    elements: Vec<GroupElement>,
    lengths: Vec<u32>,
    index: HashMap<GroupElement, u32>,
    /// `neighbors[i * |S| + s]` is the index of `g_i s`, or `u32::MAX`.
    neighbors: Vec<u32>,
}

impl Window {
    pub fn new(model: &GroupModel, radius: u32) -> Result<Self> {
        let table = crate::group::enumerate_ball(model, radius)?;
        let elements: Vec<GroupElement> = table.iter().map(|(g, _)| g.clone()).collect();
        let lengths: Vec<u32> = table.iter().map(|(_, l)| l).collect();
        let index: HashMap<GroupElement, u32> = elements.iter().enumerate().map(|(i, g)| (g.clone(), i as u32)).collect();
        let gens = model.generators();
        let mut neighbors = Vec::with_capacity(elements.len() * gens.len());
        for g in &elements {
            for s in gens {
                neighbors.push(index.get(&model.mul(g, &s.element)).copied().unwrap_or(u32::MAX));
            }
        }
        Ok(Self { model: model.clone(), radius, elements, lengths, index, neighbors })
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn model(&self) -> &GroupModel {
        &self.model
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.index.contains_key(g)
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    /// Elements of the window at distance exactly `n` from the identity.
    pub fn sphere(&self, n: u32) -> Vec<GroupElement> {
        self.elements.iter().zip(&self.lengths).filter(|(_, &l)| l == n).map(|(g, _)| g.clone()).collect()
    }

    /// Shortest path from `a` to `b` inside the window avoiding `blocked`.
    fn bfs(&self, a: u32, b: u32, blocked: &[bool]) -> Option<Vec<u32>> {
        let deg = self.model.generators().len();
        let mut parent = vec![u32::MAX; self.elements.len()];
        parent[a as usize] = a;
        let mut queue = VecDeque::from([a]);
        while let Some(v) = queue.pop_front() {
            if v == b {
                let mut path = vec![b];
                let mut cur = b;
                while cur != a {
                    cur = parent[cur as usize];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            for &w in &self.neighbors[v as usize * deg..(v as usize + 1) * deg] {
                if w != u32::MAX && !blocked[w as usize] && parent[w as usize] == u32::MAX {
                    parent[w as usize] = v;
                    queue.push_back(w);
                }
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DivergenceQuery {
    pub a: GroupElement,
    pub b: GroupElement,
    pub c: GroupElement,
    pub forbidden_radius: u64,
    pub window_radius: u32,
}

impl DivergenceQuery {
    /// Computes the forbidden radius from the exact word metric.
    pub fn new(metric: &WordMetric, a: GroupElement, b: GroupElement, c: GroupElement, window_radius: u32) -> Result<Self> {
        if c == a || c == b {
            return Err(Error::Contract("the obstacle c must differ from a and b".into()));
        }
        let d = metric.distance(&c, &a)?.min(metric.distance(&c, &b)?);
        Ok(Self { a, b, c, forbidden_radius: forbidden_radius_for(d), window_radius })
    }
}

/// Divergence value, ordered `Finite < DisconnectedInWindow < Infinite`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DivValue {
    Finite(u64),
    DisconnectedInWindow,
    Infinite,
}

impl DivValue {
    pub fn finite(&self) -> Option<u64> {
        match self {
            Self::Finite(v) => Some(*v),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Finite(v) => v.to_string(),
            Self::DisconnectedInWindow => "disconnected_in_window".into(),
            Self::Infinite => "inf".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    /// Window-exact shortest length with a witness path from `a` to `b`.
    Finite { length: u64, path: Vec<GroupElement> },
    DisconnectedInWindow,
    /// The removed ball disconnects the whole group.
    Infinite,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DivergenceResult {
    pub outcome: Outcome,
    pub relative_to: GroupElement,
    pub forbidden_radius: u64,
}

impl DivergenceResult {
    pub fn value(&self) -> DivValue {
        match &self.outcome {
            Outcome::Finite { length, .. } => DivValue::Finite(*length),
            Outcome::DisconnectedInWindow => DivValue::DisconnectedInWindow,
            Outcome::Infinite => DivValue::Infinite,
        }
    }
}

/// Position on a line for models whose Cayley graph is a line.
fn line_coordinate(model: &GroupModel, g: &GroupElement) -> Option<i64> {
    match (model.kind(), g) {
        (ModelKind::InfiniteCyclic, GroupElement::Cyclic(n)) => Some(*n),
        (ModelKind::IntegerLattice(1), GroupElement::Lattice(v)) if model.generating_set() == GeneratingSet::Standard => Some(v[0]),
        _ => None,
    }
}

pub fn avoidant_shortest_path(window: &Window, q: &DivergenceQuery) -> Result<DivergenceResult> {
    let model = window.model();
    let idx = |g: &GroupElement, what: &str| {
        window.index.get(g).copied().ok_or_else(|| {
            Error::Contract(format!("{what} = {} lies outside the window of radius {}", model.format_element(g), window.radius))
        })
    };
    let a = idx(&q.a, "a")?;
    let b = idx(&q.b, "b")?;
    idx(&q.c, "c")?;
    let done = |outcome| Ok(DivergenceResult { outcome, relative_to: q.c.clone(), forbidden_radius: q.forbidden_radius });

    if q.forbidden_radius >= 1 {
        if let (Some(x), Some(y), Some(z)) = (line_coordinate(model, &q.a), line_coordinate(model, &q.b), line_coordinate(model, &q.c)) {
            if x.min(y) < z && z < x.max(y) {
                return done(Outcome::Infinite);
            }
        }
    }

    let mut blocked = vec![false; window.len()];
    if q.forbidden_radius >= 1 {
        let inner = (q.forbidden_radius - 1) as u32;
        // B(W) is stored in BFS order, so its prefix is B(inner).
        for (h, &l) in window.elements.iter().zip(&window.lengths) {
            if l > inner {
                break;
            }
            if let Some(&v) = window.index.get(&model.mul(&q.c, h)) {
                blocked[v as usize] = true;
            }
        }
    }
    match window.bfs(a, b, &blocked) {
        Some(path) => done(Outcome::Finite {
            length: (path.len() - 1) as u64,
            path: path.into_iter().map(|i| window.elements[i as usize].clone()).collect(),
        }),
        None => done(Outcome::DisconnectedInWindow),
    }
}

/// A lower bound for `Div(a, b)`: the maximum over the sampled obstacles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DivPair {
    pub value: DivValue,
    pub witness_c: Option<GroupElement>,
}

pub fn div_pair(window: &Window, metric: &WordMetric, a: &GroupElement, b: &GroupElement, c_samples: &[GroupElement]) -> Result<DivPair> {
    let results: Vec<Result<(DivValue, usize)>> = c_samples
        .par_iter()
        .enumerate()
        .filter(|(_, c)| *c != a && *c != b)
        .map(|(i, c)| {
            let q = DivergenceQuery::new(metric, a.clone(), b.clone(), c.clone(), window.radius)?;
            Ok((avoidant_shortest_path(window, &q)?.value(), i))
        })
        .collect();
    let mut best: Option<(DivValue, usize)> = None;
    for r in results {
        let (v, i) = r?;
        if best.is_none_or(|(bv, _)| v > bv) {
            best = Some((v, i));
        }
    }
    Ok(match best {
        Some((value, i)) => DivPair { value, witness_c: Some(c_samples[i].clone()) },
        None => DivPair { value: DivValue::Finite(metric.distance(a, b)?), witness_c: None },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DivConfig {
    pub window_factor: u32,
    /// Endpoints `b` sampled per sphere (with `a` the identity).
    pub pair_budget: usize,
    /// Uniform obstacles per pair, on top of the geodesic from `a` to `b`.
    pub obstacle_budget: usize,
    /// Use every window element as an obstacle instead of sampling.
    pub exhaustive_obstacles: bool,
    pub seed: u64,
}

impl Default for DivConfig {
    fn default() -> Self {
        Self { window_factor: 4, pair_budget: 4, obstacle_budget: 16, exhaustive_obstacles: false, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DivRow {
    pub n: u64,
    pub estimate: DivValue,
    pub witness_a: GroupElement,
    pub witness_b: GroupElement,
    pub witness_c: Option<GroupElement>,
    pub window: u32,
}

/// Obstacle samples for the pair `(a, b)`: the interior vertices of a
/// geodesic, then seeded uniform draws from the window.
fn obstacle_samples(window: &Window, metric: &WordMetric, a: &GroupElement, b: &GroupElement, cfg: &DivConfig, rng: &mut ChaCha8Rng) -> Result<Vec<GroupElement>> {
    let model = window.model();
    if cfg.exhaustive_obstacles {
        return Ok(window.elements.iter().filter(|g| *g != a && *g != b).cloned().collect());
    }
    let word = metric.geodesic_word(&model.mul(&model.inverse(a), b))?;
    let mut out = Vec::new();
    let mut cur = a.clone();
    for &s in word.iter().take(word.len().saturating_sub(1)) {
        cur = model.mul(&cur, &model.generator(s).element);
        out.push(cur.clone());
    }
    out.extend(window.elements.choose_multiple(rng, cfg.obstacle_budget).filter(|g| *g != a && *g != b).cloned());
    Ok(out)
}

/// Estimates `Div_X(n)` for `n = 1..=n_max`, each as the running maximum
/// over sampled pairs at distance `<= n` inside the window `B(factor * n)`.
///
/// `metric` must certify lengths up to `2 * factor * n_max`.
pub fn div_function(metric: &WordMetric, n_max: u64, cfg: &DivConfig) -> Result<Vec<DivRow>> {
    let model = metric.model().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let a = model.identity();
    let mut rows: Vec<DivRow> = Vec::new();
    for n in 1..=n_max {
        let w = cfg.window_factor * n as u32;
        let window = Window::new(&model, w)?;
        let mut sphere = window.sphere(n as u32);
        sphere.shuffle(&mut rng);
        sphere.truncate(cfg.pair_budget.max(1));
        let mut best = rows.last().map(|r| (r.estimate, r.witness_b.clone(), r.witness_c.clone()));
        for b in sphere {
            let cs = obstacle_samples(&window, metric, &a, &b, cfg, &mut rng)?;
            let p = div_pair(&window, metric, &a, &b, &cs)?;
            if best.as_ref().is_none_or(|(v, _, _)| p.value > *v) {
                best = Some((p.value, b, p.witness_c));
            }
        }
        let (estimate, witness_b, witness_c) = best.expect("spheres in an infinite group are nonempty");
        rows.push(DivRow { n, estimate, witness_a: a.clone(), witness_b, witness_c, window: w });
    }
    Ok(rows)
}

pub fn div_rows_csv(model: &GroupModel, rows: &[DivRow]) -> String {
    let mut csv = Csv::new(&["n", "div_estimate", "witness_a", "witness_b", "witness_c", "window"]);
    for r in rows {
        csv.row(&[
            r.n.to_string(),
            r.estimate.label(),
            model.format_element(&r.witness_a),
            model.format_element(&r.witness_b),
            r.witness_c.as_ref().map_or_else(|| "none".into(), |c| model.format_element(c)),
            r.window.to_string(),
        ]);
    }
    csv.finish()
}

/// Descriptive growth summary of a divergence sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    /// Least-squares slope of `log Div(n)` against `log n`.
    #[serde(serialize_with = "ser_f64")]
    pub degree: f64,
    #[serde(serialize_with = "ser_f64")]
    pub intercept: f64,
    /// `max_n log(Div(n)) / n`.
    #[serde(serialize_with = "ser_f64")]
    pub subexp_statistic: f64,
    pub points_used: usize,
}

impl GrowthFit {
    pub fn summary(&self) -> String {
        format!("degree={} subexp={}", fmt_f64(self.degree), fmt_f64(self.subexp_statistic))
    }
}

pub fn classify_growth(seq: &[(u64, f64)]) -> Result<GrowthFit> {
    let pts: Vec<(f64, f64)> = seq
        .iter()
        .filter(|(n, v)| *n > 0 && v.is_finite() && *v > 0.0)
        .map(|&(n, v)| ((n as f64).ln(), v.ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::Contract(format!("growth fit needs at least 4 finite points, got {}", pts.len())));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let degree = sxy / sxx;
    let subexp_statistic = seq
        .iter()
        .filter(|(n, v)| *n > 0 && v.is_finite() && *v > 0.0)
        .map(|&(n, v)| v.ln() / n as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GrowthFit { degree, intercept: my - degree * mx, subexp_statistic, points_used: pts.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(desc: &str, w: u32) -> (GroupModel, Window, WordMetric) {
        let m = GroupModel::parse(desc).unwrap();
        let win = Window::new(&m, w).unwrap();
        let metric = WordMetric::new(&m, 2 * w).unwrap();
        (m, win, metric)
    }

    fn query(m: &GroupModel, win: &Window, metric: &WordMetric, a: &str, b: &str, c: &str) -> DivergenceResult {
        let q = DivergenceQuery::new(metric, m.parse_element(a).unwrap(), m.parse_element(b).unwrap(), m.parse_element(c).unwrap(), win.radius()).unwrap();
        avoidant_shortest_path(win, &q).unwrap()
    }

    /// Independent oracle: BFS on the integer grid with explicit L1 tests.
    fn grid_oracle(a: (i64, i64), b: (i64, i64), c: (i64, i64), w: i64) -> Option<u64> {
        let l1 = |p: (i64, i64), q: (i64, i64)| (p.0 - q.0).abs() + (p.1 - q.1).abs();
        let radius = ((l1(c, a).min(l1(c, b)) / 2) - 2).max(0);
        let ok = |p: (i64, i64)| p.0.abs() + p.1.abs() <= w && l1(p, c) >= radius;
        let mut dist = HashMap::from([(a, 0u64)]);
        let mut queue = VecDeque::from([a]);
        while let Some(p) = queue.pop_front() {
            if p == b {
                return Some(dist[&p]);
            }
            for d in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let q = (p.0 + d.0, p.1 + d.1);
                if ok(q) && !dist.contains_key(&q) {
                    dist.insert(q, dist[&p] + 1);
                    queue.push_back(q);
                }
            }
        }
        None
    }

    #[test]
    fn grid_detour_around_origin() {
        let (m, win, metric) = setup("z^2", 24);
        let r = query(&m, &win, &metric, "(-6,0)", "(6,0)", "(0,0)");
        assert_eq!(r.forbidden_radius, 1);
        assert_eq!(r.value(), DivValue::Finite(14));
        assert_eq!(grid_oracle((-6, 0), (6, 0), (0, 0), 24), Some(14));
        let Outcome::Finite { path, .. } = r.outcome else { panic!() };
        assert_eq!(path.first().unwrap(), &m.parse_element("(-6,0)").unwrap());
        assert_eq!(path.last().unwrap(), &m.parse_element("(6,0)").unwrap());
        assert!(!path.contains(&m.identity()));
    }

    #[test]
    fn grid_matches_oracle_for_many_obstacles() {
        let (m, win, metric) = setup("z^2", 30);
        for n in [6i64, 9, 12] {
            for c in [(0, 0), (1, 0), (0, 1), (-2, 1), (3, -3), (0, 5)] {
                let r = query(&m, &win, &metric, &format!("(-{n},0)"), &format!("({n},0)"), &format!("({},{})", c.0, c.1));
                assert_eq!(r.value().finite(), grid_oracle((-n, 0), (n, 0), c, 30), "n={n} c={c:?}");
            }
        }
    }

    #[test]
    fn line_cut_point_is_infinite() {
        let (m, win, metric) = setup("z", 40);
        let r = query(&m, &win, &metric, "-8", "8", "0");
        assert_eq!(r.forbidden_radius, 2);
        assert_eq!(r.value(), DivValue::Infinite);
        // Same search without the certificate: the window is cut too.
        let (m1, win1, metric1) = setup("z^1", 40);
        let _ = m1;
        let q = DivergenceQuery::new(&metric1, GroupElement::Lattice(vec![-8]), GroupElement::Lattice(vec![8]), GroupElement::Lattice(vec![0]), 40).unwrap();
        assert_eq!(avoidant_shortest_path(&win1, &q).unwrap().value(), DivValue::Infinite);
    }

    #[test]
    fn zero_radius_gives_geodesic_distance() {
        let (m, win, metric) = setup("heisenberg", 8);
        let r = query(&m, &win, &metric, "e", "(0,0,1)", "a");
        assert_eq!(r.forbidden_radius, 0);
        assert_eq!(r.value(), DivValue::Finite(4));
    }

    #[test]
    fn adjacent_points_have_divergence_one() {
        let (m, win, metric) = setup("z^2", 20);
        let a = m.parse_element("(0,0)").unwrap();
        let b = m.parse_element("(1,0)").unwrap();
        let cs: Vec<_> = win.elements().to_vec();
        assert_eq!(div_pair(&win, &metric, &a, &b, &cs).unwrap().value, DivValue::Finite(1));
    }

    #[test]
    fn obstacle_c_cannot_be_an_endpoint() {
        let (m, _, metric) = setup("z^2", 4);
        let e = m.identity();
        assert!(DivergenceQuery::new(&metric, e.clone(), m.parse_element("(1,0)").unwrap(), e, 4).is_err());
    }

    #[test]
    fn enlarging_the_window_never_lengthens() {
        let m = GroupModel::lattice(2).unwrap();
        let metric = WordMetric::new(&m, 80).unwrap();
        let mut last = DivValue::Infinite;
        for w in [8u32, 10, 14, 20, 40] {
            let win = Window::new(&m, w).unwrap();
            let r = query(&m, &win, &metric, "(-8,0)", "(8,0)", "(0,0)");
            assert!(r.value() <= last, "w = {w}");
            last = r.value();
        }
        assert_eq!(last, DivValue::Finite(20));
    }

    #[test]
    fn synthetic_growth_fits() {
        let lin: Vec<_> = (1..=20).map(|n| (n, 3.0 * n as f64)).collect();
        let fit = classify_growth(&lin).unwrap();
        assert!((fit.degree - 1.0).abs() < 0.1);
        let quad: Vec<_> = (1..=20).map(|n| (n, (n * n) as f64)).collect();
        assert!((classify_growth(&quad).unwrap().degree - 2.0).abs() < 0.1);
        assert!(classify_growth(&lin[..3]).is_err());
    }

    #[test]
    fn cyclic_group_divergence_turns_infinite() {
        let m = GroupModel::cyclic();
        let metric = WordMetric::new(&m, 200).unwrap();
        let rows = div_function(&metric, 14, &DivConfig::default()).unwrap();
        for r in &rows {
            if r.n >= 12 {
                assert_eq!(r.estimate, DivValue::Infinite, "n = {}", r.n);
            } else {
                assert!(r.estimate.finite().is_some());
            }
        }
    }

    #[test]
    fn divergence_function_is_monotone_and_deterministic() {
        let m = GroupModel::lattice(2).unwrap();
        let metric = WordMetric::new(&m, 100).unwrap();
        let cfg = DivConfig { window_factor: 4, ..DivConfig::default() };
        let rows = div_function(&metric, 10, &cfg).unwrap();
        assert!(rows.windows(2).all(|w| w[0].estimate <= w[1].estimate));
        assert_eq!(rows, div_function(&metric, 10, &cfg).unwrap());
    }
}
