//! Cocycles given by finite-window block maps on the generators.

use serde::{Deserialize, Serialize};

use super::target::{HElem, MetricGroup, TargetFile, TargetGroup};
use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupModel, WordMetric};
use crate::shift::{shifted_at, Configuration, BACKGROUND};

/// Default Hölder ratio.
pub const DEFAULT_R: f64 = 0.5;

/// Radius of the exact ball used for geodesic words when the model has no
/// closed form.
pub const DEFAULT_METRIC_RADIUS: u32 = 10;

/// A map `A^G -> H` reading the symbols on `cells`, stored as a dense table
/// indexed by `sum_i x_{cells[i]} |A|^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMap {
    cells: Vec<GroupElement>,
    window: u64,
    values: Vec<HElem>,
}

impl BlockMap {
    /// Tabulates `f` over all `|A|^{|cells|}` patterns.
    pub fn tabulate(metric: &WordMetric, alphabet: u8, cells: Vec<GroupElement>, mut f: impl FnMut(&[u8]) -> HElem) -> Result<Self> {
        let count = table_size(alphabet, cells.len())?;
        let window = cells.iter().try_fold(0, |m, k| Ok::<_, Error>(m.max(metric.length_or_err(k)?)))?;
        let mut pattern = vec![0u8; cells.len()];
        let values = (0..count)
            .map(|idx| {
                decode(idx, alphabet, &mut pattern);
                f(&pattern)
            })
            .collect();
        Ok(Self { cells, window, values })
    }

    pub fn constant(value: HElem) -> Self {
        Self { cells: Vec::new(), window: 0, values: vec![value] }
    }

    pub fn cells(&self) -> &[GroupElement] {
        &self.cells
    }

    /// `max l(k)` over the cells read.
    pub fn window(&self) -> u64 {
        self.window
    }

    pub fn values(&self) -> &[HElem] {
        &self.values
    }

    /// `f(h x)`, given `h^{-1}`.
    pub fn eval_shifted(&self, model: &GroupModel, h_inv: &GroupElement, x: &Configuration) -> &HElem {
        if x.is_background() {
            return &self.values[0];
        }
        let base = usize::from(x.alphabet());
        let mut idx = 0;
        for k in self.cells.iter().rev() {
            idx = idx * base + usize::from(shifted_at(model, h_inv, x, k));
        }
        &self.values[idx]
    }

    pub fn eval(&self, model: &GroupModel, x: &Configuration) -> &HElem {
        self.eval_shifted(model, &model.identity(), x)
    }

    pub fn eval_pattern(&self, alphabet: u8, pattern: &[u8]) -> &HElem {
        let idx = pattern.iter().rev().fold(0, |acc, &s| acc * usize::from(alphabet) + usize::from(s));
        &self.values[idx]
    }
}

fn table_size(alphabet: u8, cells: usize) -> Result<usize> {
    const MAX_TABLE: usize = 1 << 22;
    (0..cells)
        .try_fold(1usize, |acc, _| acc.checked_mul(usize::from(alphabet)).filter(|&n| n <= MAX_TABLE))
        .ok_or_else(|| Error::Unsupported(format!("a table over {cells} cells exceeds {MAX_TABLE} entries")))
}

fn decode(mut idx: usize, alphabet: u8, pattern: &mut [u8]) {
    for p in pattern.iter_mut() {
        *p = (idx % usize::from(alphabet)) as u8;
        idx /= usize::from(alphabet);
    }
}

/// A cocycle `c: G x A^G -> H` given by block maps `f_s = c(s, .)` for
/// every generator and extended along words by the cocycle identity.
#[derive(Debug, Clone)]
pub struct CocycleSpec {
    metric: WordMetric,
    alphabet: u8,
    target: TargetGroup,
    maps: Vec<BlockMap>,
    r: f64,
}

impl CocycleSpec {
    pub fn new(metric: &WordMetric, alphabet: u8, target: TargetGroup, maps: Vec<BlockMap>, r: f64) -> Result<Self> {
        let model = metric.model();
        if maps.len() != model.generators().len() {
            return Err(Error::Contract(format!("need one block map per generator ({}), got {}", model.generators().len(), maps.len())));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Contract(format!("Hölder ratio r = {r} must lie in (0, 1)")));
        }
        if alphabet == 0 {
            return Err(Error::Contract("alphabet must be nonempty".into()));
        }
        let mut maps = maps;
        for m in &mut maps {
            if m.values.len() != table_size(alphabet, m.cells.len())? {
                return Err(Error::Contract("block map table is not total".into()));
            }
            for v in &mut m.values {
                *v = target.normalize(v)?;
            }
        }
        Ok(Self { metric: metric.clone(), alphabet, target, maps, r })
    }

    /// The constant cocycle `c(s, x) = φ(s)`, with `images` indexed by
    /// generator. `φ` must respect the relators of the model.
    pub fn homomorphism(metric: &WordMetric, alphabet: u8, target: TargetGroup, images: &[HElem]) -> Result<Self> {
        let maps = images.iter().map(|v| BlockMap::constant(v.clone())).collect();
        Self::new(metric, alphabet, target, maps, DEFAULT_R)
    }

    /// `c(s, x) = b*(s x)^{-1} φ(s) b*(x)`, a coboundary twist of `φ`.
    pub fn coboundary(metric: &WordMetric, alphabet: u8, target: TargetGroup, images: &[HElem], bstar: &BlockMap) -> Result<Self> {
        let model = metric.model().clone();
        let mut maps = Vec::new();
        for (s, gen) in model.generators().iter().enumerate() {
            let s_inv = model.inverse(&gen.element);
            let mut cells: Vec<GroupElement> = bstar.cells.to_vec();
            cells.extend(bstar.cells.iter().map(|k| model.mul(&s_inv, k)));
            cells.sort_by_key(|k| (metric.length(k), k.clone()));
            cells.dedup();
            let phi = target.normalize(&images[s])?;
            let map = BlockMap::tabulate(metric, alphabet, cells.clone(), |pattern| {
                let x = Configuration::from_entries(alphabet, cells.iter().cloned().zip(pattern.iter().copied()))
                    .expect("patterns use the alphabet");
                let b_x = bstar.eval(&model, &x);
                let b_sx = bstar.eval_shifted(&model, &s_inv, &x);
                target.mul(&target.mul(&target.inv(b_sx), &phi), b_x)
            })?;
            maps.push(map);
        }
        Self::new(metric, alphabet, target, maps, DEFAULT_R)
    }

    pub fn with_r(mut self, r: f64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Contract(format!("Hölder ratio r = {r} must lie in (0, 1)")));
        }
        self.r = r;
        Ok(self)
    }

    pub fn model(&self) -> &GroupModel {
        self.metric.model()
    }

    pub fn metric(&self) -> &WordMetric {
        &self.metric
    }

    pub fn alphabet(&self) -> u8 {
        self.alphabet
    }

    pub fn target(&self) -> &TargetGroup {
        &self.target
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn map(&self, s: usize) -> &BlockMap {
        &self.maps[s]
    }

    /// Copy with the table entry of generator `s` at `pattern` replaced.
    pub fn corrupted(&self, s: usize, pattern: &[u8], value: HElem) -> Result<Self> {
        let mut out = self.clone();
        let idx = pattern.iter().rev().fold(0, |acc, &p| acc * usize::from(self.alphabet) + usize::from(p));
        let slot = out.maps[s].values.get_mut(idx).ok_or_else(|| Error::Contract("pattern outside the table".into()))?;
        *slot = self.target.normalize(&value)?;
        Ok(out)
    }

    /// `C_s = D_s r^{-w_s}` with `D_s` the diameter of the table's range,
    /// so `d(f_s(x), f_s(y)) <= C_s r^n` whenever `x = y` on `B(n)`.
    pub fn generator_constant(&self, s: usize) -> f64 {
        let m = &self.maps[s];
        let mut distinct: Vec<&HElem> = Vec::new();
        for v in &m.values {
            if !distinct.contains(&v) {
                distinct.push(v);
            }
        }
        self.target.diameter(distinct.iter().copied()) * self.r.powi(-(m.window as i32))
    }

    /// `C = max_s C_s`.
    pub fn max_constant(&self) -> f64 {
        (0..self.maps.len()).map(|s| self.generator_constant(s)).fold(0.0, f64::max)
    }

    /// `(C_g, r)` for a word of length `k`: `C_g = sum_{i=1}^k C r^{-(i-1)}`,
    /// since the `i`-th factor sees a configuration shifted by `i - 1` letters.
    pub fn holder_constants(&self, word: &[usize]) -> (f64, f64) {
        let c = self.max_constant();
        ((0..word.len()).map(|i| c * self.r.powi(-(i as i32))).sum(), self.r)
    }

    /// `c(w_1 ... w_k, h x) = c(w_1, w_2...w_k h x) ... c(w_k, h x)`.
    pub fn evaluate_word_at(&self, word: &[usize], h: &GroupElement, x: &Configuration) -> HElem {
        let model = self.model();
        let mut acc = self.target.identity();
        let mut shift = h.clone();
        for &s in word.iter().rev() {
            let value = self.maps[s].eval_shifted(model, &model.inverse(&shift), x);
            acc = self.target.mul(value, &acc);
            shift = model.mul(&model.generator(s).element, &shift);
        }
        acc
    }

    /// `c(g, x)` along the canonical geodesic word of `g`.
    pub fn evaluate(&self, g: &GroupElement, x: &Configuration) -> Result<HElem> {
        let word = self.metric.geodesic_word(g)?;
        Ok(self.evaluate_word_at(&word, &self.model().identity(), x))
    }

    /// Largest `d(c(w, x), e)` over relators `w` and samples `x` (the
    /// background point is always included). Zero for a true cocycle.
    pub fn relation_consistency(&self, samples: &[Configuration]) -> f64 {
        let bg = Configuration::background(self.alphabet);
        let e = self.target.identity();
        let model = self.model();
        let mut worst: f64 = 0.0;
        for rel in model.relators() {
            for x in std::iter::once(&bg).chain(samples) {
                worst = worst.max(self.target.dist(&self.evaluate_word_at(&rel, &model.identity(), x), &e));
            }
        }
        worst
    }

    pub fn to_file(&self) -> CocycleFile {
        let model = self.model();
        let generators = model
            .generators()
            .iter()
            .zip(&self.maps)
            .map(|(gen, m)| {
                let mut pattern = vec![0u8; m.cells.len()];
                GeneratorFile {
                    symbol: gen.name.clone(),
                    window: m.window,
                    cells: Some(m.cells.iter().map(|k| model.format_element(k)).collect()),
                    table: m
                        .values
                        .iter()
                        .enumerate()
                        .map(|(idx, v)| {
                            decode(idx, self.alphabet, &mut pattern);
                            (pattern.clone(), v.clone())
                        })
                        .collect(),
                }
            })
            .collect();
        CocycleFile {
            group: model.descriptor().into(),
            alphabet: self.alphabet,
            background: BACKGROUND,
            r: self.r,
            target: self.target.to_file(),
            generators,
        }
    }

    /// Builds a spec from its file form. `cells` defaults to `B(window)` in
    /// breadth-first order.
    pub fn from_file(file: &CocycleFile) -> Result<Self> {
        let model = GroupModel::parse(&file.group)?;
        let metric = WordMetric::new(&model, DEFAULT_METRIC_RADIUS)?;
        if file.background != BACKGROUND {
            return Err(Error::Parse(format!("background must be {BACKGROUND}")));
        }
        let target = TargetGroup::from_file(&file.target)?;
        let mut maps: Vec<Option<BlockMap>> = vec![None; model.generators().len()];
        for g in &file.generators {
            let s = model.generator_index(&g.symbol).ok_or_else(|| Error::Parse(format!("unknown generator {:?}", g.symbol)))?;
            let cells = match &g.cells {
                Some(cs) => cs.iter().map(|c| model.parse_element(c)).collect::<Result<Vec<_>>>()?,
                None => metric.ball_elements(g.window as u32)?,
            };
            let window = cells.iter().try_fold(0, |m, k| Ok::<_, Error>(m.max(metric.length_or_err(k)?)))?;
            if window > g.window {
                return Err(Error::Parse(format!("generator {}: cells exceed window {}", g.symbol, g.window)));
            }
            let count = table_size(file.alphabet, cells.len())?;
            let mut values: Vec<Option<HElem>> = vec![None; count];
            for (pattern, v) in &g.table {
                if pattern.len() != cells.len() || pattern.iter().any(|&p| p >= file.alphabet) {
                    return Err(Error::Parse(format!("generator {}: bad pattern {pattern:?}", g.symbol)));
                }
                let idx = pattern.iter().rev().fold(0, |acc, &p| acc * usize::from(file.alphabet) + usize::from(p));
                values[idx] = Some(v.clone());
            }
            let values = values
                .into_iter()
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::Parse(format!("generator {}: table is not total", g.symbol)))?;
            maps[s] = Some(BlockMap { cells, window: g.window, values });
        }
        let maps = maps
            .into_iter()
            .enumerate()
            .map(|(s, m)| m.ok_or_else(|| Error::Parse(format!("missing generator {}", model.generator(s).name))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(&metric, file.alphabet, target, maps, file.r)
    }
}

fn default_r() -> f64 {
    DEFAULT_R
}

/// JSON form of a [`CocycleSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocycleFile {
    pub group: String,
    pub alphabet: u8,
    #[serde(default)]
    pub background: u8,
    #[serde(default = "default_r")]
    pub r: f64,
    pub target: TargetFile,
    pub generators: Vec<GeneratorFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorFile {
    pub symbol: String,
    pub window: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<String>>,
    pub table: Vec<(Vec<u8>, HElem)>,
}

/// Images of all generators from images of `a, b, ...` (every other
/// generator is the inverse of its predecessor).
pub fn images_from_basis(model: &GroupModel, target: &TargetGroup, basis: &[HElem]) -> Result<Vec<HElem>> {
    if basis.len() * 2 != model.generators().len() {
        return Err(Error::Contract(format!("need {} basis images", model.generators().len() / 2)));
    }
    Ok(basis.iter().flat_map(|h| [h.clone(), target.inv(h)]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (GroupModel, WordMetric) {
        let m = GroupModel::lattice(2).unwrap();
        let metric = WordMetric::new(&m, 50).unwrap();
        (m, metric)
    }

    fn el(m: &GroupModel, s: &str) -> GroupElement {
        m.parse_element(s).unwrap()
    }

    /// `b*(x) = x_e + x_{(1,0)} / 4` over `R`.
    fn bstar(m: &GroupModel, metric: &WordMetric) -> BlockMap {
        BlockMap::tabulate(metric, 2, vec![m.identity(), el(m, "(1,0)")], |p| HElem::Vector(vec![p[0] as f64 + p[1] as f64 / 4.0])).unwrap()
    }

    fn cob(m: &GroupModel, metric: &WordMetric) -> CocycleSpec {
        let t = TargetGroup::real(1);
        let phi = images_from_basis(m, &t, &[HElem::Vector(vec![1.5]), HElem::Vector(vec![-0.25])]).unwrap();
        CocycleSpec::coboundary(metric, 2, t, &phi, &bstar(m, metric)).unwrap()
    }

    fn v(h: &HElem) -> f64 {
        match h {
            HElem::Vector(v) => v[0],
            _ => unreachable!(),
        }
    }

    #[test]
    fn homomorphism_is_constant() {
        let (m, metric) = setup();
        let t = TargetGroup::cyclic(5).unwrap();
        let phi = images_from_basis(&m, &t, &[HElem::Finite(2), HElem::Finite(1)]).unwrap();
        let c = CocycleSpec::homomorphism(&metric, 2, t, &phi).unwrap();
        let x = Configuration::from_entries(2, [(el(&m, "(1,1)"), 1)]).unwrap();
        assert_eq!(c.evaluate(&el(&m, "(2,-1)"), &x).unwrap(), HElem::Finite(3));
        assert_eq!(c.evaluate(&m.identity(), &x).unwrap(), HElem::Finite(0));
        assert_eq!(c.relation_consistency(&[x]), 0.0);
        assert_eq!(c.holder_constants(&[0, 2]).0, 0.0);
    }

    #[test]
    fn coboundary_telescopes() {
        let (m, metric) = setup();
        let c = cob(&m, &metric);
        let b = bstar(&m, &metric);
        let x = Configuration::from_entries(2, [(m.identity(), 1), (el(&m, "(-1,0)"), 1), (el(&m, "(0,-2)"), 1)]).unwrap();
        for g in ["(1,0)", "(2,0)", "(-1,2)", "(3,-2)", "(0,0)"] {
            let g = el(&m, g);
            let GroupElement::Lattice(ref gv) = g else { unreachable!() };
            let phi = 1.5 * gv[0] as f64 - 0.25 * gv[1] as f64;
            let gx = crate::shift::shift_act(&m, &g, &x);
            let expected = -v(b.eval(&m, &gx)) + phi + v(b.eval(&m, &x));
            assert!((v(&c.evaluate(&g, &x).unwrap()) - expected).abs() < 1e-12);
        }
        assert!(c.relation_consistency(&[x]) <= 1e-12);
    }

    #[test]
    fn corrupted_table_breaks_relations() {
        let (m, metric) = setup();
        let c = cob(&m, &metric);
        let pattern = vec![0u8; c.map(0).cells().len()];
        let bad = c.corrupted(0, &pattern, HElem::Vector(vec![9.0])).unwrap();
        assert!(bad.relation_consistency(&[]) > 0.0);
    }

    #[test]
    fn holder_constants_for_two_letters() {
        let (m, metric) = setup();
        let c = cob(&m, &metric);
        let cmax = c.max_constant();
        let (cg, r) = c.holder_constants(&metric.geodesic_word(&el(&m, "(2,0)")).unwrap());
        assert_eq!(r, 0.5);
        assert!((cg - cmax * (1.0 + 1.0 / r)).abs() < 1e-12);
        // c(a, x) = 1.5 - x_(-1,0) + 0.75 x_e + 0.25 x_(1,0): window 1, diameter 2
        assert!((c.generator_constant(0) - 2.0 * 2.0).abs() < 1e-12);
    }

    #[test]
    fn file_round_trip() {
        let (m, metric) = setup();
        let c = cob(&m, &metric);
        let json = serde_json::to_string(&c.to_file()).unwrap();
        let back = CocycleSpec::from_file(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.to_file(), c.to_file());
        let x = Configuration::from_entries(2, [(el(&m, "(1,0)"), 1)]).unwrap();
        assert_eq!(back.evaluate(&el(&m, "(1,1)"), &x).unwrap(), c.evaluate(&el(&m, "(1,1)"), &x).unwrap());
    }

    #[test]
    fn incomplete_tables_are_rejected() {
        let (_, metric) = setup();
        let mut f = cob(&metric.model().clone(), &metric).to_file();
        f.generators[0].table.pop();
        assert!(matches!(CocycleSpec::from_file(&f), Err(Error::Parse(_))));
        f.generators.pop();
        assert!(CocycleSpec::from_file(&f).is_err());
    }
}
