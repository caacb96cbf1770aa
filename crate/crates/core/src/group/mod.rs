//! Exact arithmetic in the built-in finitely generated groups.
//!
//! Every element is kept in a canonical normal form, so equality of elements
//! is equality of forms and multiplication is a cheap closed formula:
//!
//! * `z^d`: integer vectors under addition,
//! * `z`: integers,
//! * `heisenberg`: triples `(x, y, z)` with
//!   `(x, y, z)(x', y', z') = (x + x', y + y', z + z' + x y')`,
//! * `free:r`: freely reduced words,
//! * `prod(G, H)`: tuples of components.
//!
//! Generating sets are ordered and symmetric: generator `2k + 1` is the
//! inverse of generator `2k`.

mod ball;
mod metric;

pub use ball::{enumerate_ball, enumerate_ball_with_budget, BallTable, DEFAULT_BALL_BUDGET};
pub use metric::WordMetric;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of ends, declared per built-in group rather than computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ends {
    One,
    Two,
    InfinitelyMany,
}

/// Which symmetric generating set a lattice model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratingSet {
    /// `±e_i`.
    Standard,
    /// `±e_i` together with `±(e_1 + ... + e_d)`.
    DiagonalAugmented,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelKind {
    IntegerLattice(usize),
    DiscreteHeisenberg,
    FreeGroup(usize),
    InfiniteCyclic,
    DirectProduct(Vec<GroupModel>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generator {
    pub name: String,
    pub element: GroupElement,
    /// Index of the inverse generator in the same generating set.
    pub inverse: usize,
}

/// A canonical normal form.
///
/// Free-group letters are `±(i + 1)` for the `i`-th basis element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GroupElement {
    Lattice(Vec<i64>),
    Heisenberg([i64; 3]),
    Cyclic(i64),
    Free(Vec<i32>),
    Product(Vec<GroupElement>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupModel {
    kind: ModelKind,
    generating_set: GeneratingSet,
    generators: Vec<Generator>,
    descriptor: String,
}

const LETTERS: &[u8] = b"abcdefghijklmnop";

fn letter_pair(i: usize) -> (String, String) {
    let c = LETTERS[i] as char;
    (c.to_string(), c.to_ascii_uppercase().to_string())
}

fn push_pair(gens: &mut Vec<Generator>, names: (String, String), g: GroupElement, g_inv: GroupElement) {
    let k = gens.len();
    gens.push(Generator { name: names.0, element: g, inverse: k + 1 });
    gens.push(Generator { name: names.1, element: g_inv, inverse: k });
}

impl GroupModel {
    /// `Z^d` with the standard basis.
    pub fn lattice(d: usize) -> Result<Self> {
        Self::lattice_with(d, GeneratingSet::Standard)
    }

    /// `Z^d` with the standard basis plus the all-ones diagonal.
    pub fn lattice_diagonal(d: usize) -> Result<Self> {
        Self::lattice_with(d, GeneratingSet::DiagonalAugmented)
    }

    fn lattice_with(d: usize, generating_set: GeneratingSet) -> Result<Self> {
        if d == 0 || d > LETTERS.len() {
            return Err(Error::Parse(format!("lattice rank must be in 1..={}", LETTERS.len())));
        }
        let mut generators = Vec::with_capacity(2 * d + 2);
        for i in 0..d {
            let mut e = vec![0; d];
            e[i] = 1;
            let neg = e.iter().map(|v| -v).collect();
            push_pair(&mut generators, letter_pair(i), GroupElement::Lattice(e), GroupElement::Lattice(neg));
        }
        let descriptor = if generating_set == GeneratingSet::DiagonalAugmented {
            push_pair(
                &mut generators,
                ("q".into(), "Q".into()),
                GroupElement::Lattice(vec![1; d]),
                GroupElement::Lattice(vec![-1; d]),
            );
            format!("z^{d}+diag")
        } else {
            format!("z^{d}")
        };
        Ok(Self { kind: ModelKind::IntegerLattice(d), generating_set, generators, descriptor })
    }

    pub fn cyclic() -> Self {
        let mut generators = Vec::new();
        push_pair(&mut generators, letter_pair(0), GroupElement::Cyclic(1), GroupElement::Cyclic(-1));
        Self {
            kind: ModelKind::InfiniteCyclic,
            generating_set: GeneratingSet::Standard,
            generators,
            descriptor: "z".into(),
        }
    }

    /// Discrete Heisenberg group with `a = (1,0,0)` and `b = (0,1,0)`.
    pub fn heisenberg() -> Self {
        let mut generators = Vec::new();
        push_pair(&mut generators, letter_pair(0), GroupElement::Heisenberg([1, 0, 0]), GroupElement::Heisenberg([-1, 0, 0]));
        push_pair(&mut generators, letter_pair(1), GroupElement::Heisenberg([0, 1, 0]), GroupElement::Heisenberg([0, -1, 0]));
        Self {
            kind: ModelKind::DiscreteHeisenberg,
            generating_set: GeneratingSet::Standard,
            generators,
            descriptor: "heisenberg".into(),
        }
    }

    pub fn free(rank: usize) -> Result<Self> {
        if rank == 0 || rank > LETTERS.len() {
            return Err(Error::Parse(format!("free rank must be in 1..={}", LETTERS.len())));
        }
        let mut generators = Vec::new();
        for i in 0..rank {
            let l = i as i32 + 1;
            push_pair(&mut generators, letter_pair(i), GroupElement::Free(vec![l]), GroupElement::Free(vec![-l]));
        }
        Ok(Self {
            kind: ModelKind::FreeGroup(rank),
            generating_set: GeneratingSet::Standard,
            generators,
            descriptor: format!("free:{rank}"),
        })
    }

    /// Direct product with the union generating set, so lengths add.
    pub fn product(factors: Vec<GroupModel>) -> Result<Self> {
        if factors.len() < 2 {
            return Err(Error::Parse("a product needs at least two factors".into()));
        }
        let mut generators = Vec::new();
        for (fi, factor) in factors.iter().enumerate() {
            for gen in factor.generators.iter().step_by(2) {
                let inv = &factor.generators[gen.inverse];
                let embed = |g: &GroupElement| {
                    let comps = factors
                        .iter()
                        .enumerate()
                        .map(|(j, f)| if j == fi { g.clone() } else { f.identity() })
                        .collect();
                    GroupElement::Product(comps)
                };
                push_pair(
                    &mut generators,
                    (format!("{}{fi}", gen.name), format!("{}{fi}", inv.name)),
                    embed(&gen.element),
                    embed(&inv.element),
                );
            }
        }
        let descriptor = format!(
            "prod({})",
            factors.iter().map(|f| f.descriptor.as_str()).collect::<Vec<_>>().join(",")
        );
        Ok(Self {
            kind: ModelKind::DirectProduct(factors),
            generating_set: GeneratingSet::Standard,
            generators,
            descriptor,
        })
    }

    /// Parses `z^d`, `z`, `heisenberg`, `free:r` and `prod(desc,desc,...)`.
    pub fn parse(descriptor: &str) -> Result<Self> {
        let s = descriptor.trim();
        if s == "z" {
            return Ok(Self::cyclic());
        }
        if s == "heisenberg" {
            return Ok(Self::heisenberg());
        }
        if let Some(rest) = s.strip_prefix("z^") {
            let (rank, diag) = match rest.strip_suffix("+diag") {
                Some(r) => (r, true),
                None => (rest, false),
            };
            let d: usize = rank.parse().map_err(|_| Error::Parse(format!("bad lattice rank in {s:?}")))?;
            return if diag { Self::lattice_diagonal(d) } else { Self::lattice(d) };
        }
        if let Some(rest) = s.strip_prefix("free:") {
            let r: usize = rest.parse().map_err(|_| Error::Parse(format!("bad free rank in {s:?}")))?;
            return Self::free(r);
        }
        if let Some(inner) = s.strip_prefix("prod(").and_then(|r| r.strip_suffix(')')) {
            let factors = split_top_level(inner, ',')
                .into_iter()
                .map(Self::parse)
                .collect::<Result<Vec<_>>>()?;
            return Self::product(factors);
        }
        Err(Error::Parse(format!("unknown group descriptor {s:?}")))
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn generating_set(&self) -> GeneratingSet {
        self.generating_set
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn generator(&self, index: usize) -> &Generator {
        &self.generators[index]
    }

    pub fn generator_index(&self, name: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.name == name)
    }

    pub fn declared_ends(&self) -> Ends {
        match &self.kind {
            ModelKind::IntegerLattice(1) | ModelKind::InfiniteCyclic | ModelKind::FreeGroup(1) => Ends::Two,
            ModelKind::IntegerLattice(_) | ModelKind::DiscreteHeisenberg => Ends::One,
            ModelKind::FreeGroup(_) => Ends::InfinitelyMany,
            // All factors are infinite, and a product of two infinite groups has one end.
            ModelKind::DirectProduct(_) => Ends::One,
        }
    }

    /// Whether the divergence function is known to grow sub-exponentially
    /// (linear for lattices and products, quadratic for Heisenberg).
    pub fn declared_subexponential_divergence(&self) -> bool {
        self.declared_ends() == Ends::One
    }

    pub fn identity(&self) -> GroupElement {
        match &self.kind {
            ModelKind::IntegerLattice(d) => GroupElement::Lattice(vec![0; *d]),
            ModelKind::DiscreteHeisenberg => GroupElement::Heisenberg([0; 3]),
            ModelKind::FreeGroup(_) => GroupElement::Free(Vec::new()),
            ModelKind::InfiniteCyclic => GroupElement::Cyclic(0),
            ModelKind::DirectProduct(fs) => GroupElement::Product(fs.iter().map(|f| f.identity()).collect()),
        }
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        match (&self.kind, g) {
            (ModelKind::IntegerLattice(d), GroupElement::Lattice(v)) => v.len() == *d,
            (ModelKind::DiscreteHeisenberg, GroupElement::Heisenberg(_)) => true,
            (ModelKind::InfiniteCyclic, GroupElement::Cyclic(_)) => true,
            (ModelKind::FreeGroup(r), GroupElement::Free(w)) => {
                w.iter().all(|&l| l != 0 && l.unsigned_abs() as usize <= *r)
                    && w.windows(2).all(|p| p[0] != -p[1])
            }
            (ModelKind::DirectProduct(fs), GroupElement::Product(cs)) => {
                fs.len() == cs.len() && fs.iter().zip(cs).all(|(f, c)| f.contains(c))
            }
            _ => false,
        }
    }

    fn check(&self, g: &GroupElement) -> Result<()> {
        if self.contains(g) {
            Ok(())
        } else {
            Err(Error::ModelMismatch { group: self.descriptor.clone(), element: format!("{g:?}") })
        }
    }

    /// Product `ab` in normal form.
    pub fn multiply(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.mul(a, b))
    }

    /// Unchecked multiplication; both arguments must belong to the model.
    pub fn mul(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        match (a, b) {
            (GroupElement::Lattice(u), GroupElement::Lattice(v)) => {
                GroupElement::Lattice(u.iter().zip(v).map(|(x, y)| x + y).collect())
            }
            (GroupElement::Heisenberg([x, y, z]), GroupElement::Heisenberg([x2, y2, z2])) => {
                GroupElement::Heisenberg([x + x2, y + y2, z + z2 + x * y2])
            }
            (GroupElement::Cyclic(m), GroupElement::Cyclic(n)) => GroupElement::Cyclic(m + n),
            (GroupElement::Free(u), GroupElement::Free(v)) => {
                let mut out = u.clone();
                for &l in v {
                    if out.last() == Some(&-l) {
                        out.pop();
                    } else {
                        out.push(l);
                    }
                }
                GroupElement::Free(out)
            }
            (GroupElement::Product(us), GroupElement::Product(vs)) => {
                let ModelKind::DirectProduct(fs) = &self.kind else { unreachable!("product element outside product model") };
                GroupElement::Product(fs.iter().zip(us.iter().zip(vs)).map(|(f, (u, v))| f.mul(u, v)).collect())
            }
            _ => panic!("mismatched normal forms {a:?} and {b:?}"),
        }
    }

    pub fn inverse(&self, g: &GroupElement) -> GroupElement {
        match g {
            GroupElement::Lattice(v) => GroupElement::Lattice(v.iter().map(|x| -x).collect()),
            GroupElement::Heisenberg([x, y, z]) => GroupElement::Heisenberg([-x, -y, x * y - z]),
            GroupElement::Cyclic(n) => GroupElement::Cyclic(-n),
            GroupElement::Free(w) => GroupElement::Free(w.iter().rev().map(|l| -l).collect()),
            GroupElement::Product(cs) => {
                let ModelKind::DirectProduct(fs) = &self.kind else { unreachable!("product element outside product model") };
                GroupElement::Product(fs.iter().zip(cs).map(|(f, c)| f.inverse(c)).collect())
            }
        }
    }

    /// `g^n` for any integer `n`, by repeated squaring.
    pub fn pow(&self, g: &GroupElement, n: i64) -> GroupElement {
        let mut base = if n < 0 { self.inverse(g) } else { g.clone() };
        let mut e = n.unsigned_abs();
        let mut acc = self.identity();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        acc
    }

    /// `a b a^{-1}`.
    pub fn conjugate(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        self.mul(&self.mul(a, b), &self.inverse(a))
    }

    /// Evaluates the word `w_1 w_2 ... w_k` of generator indices.
    pub fn eval_word(&self, word: &[usize]) -> GroupElement {
        word.iter().fold(self.identity(), |acc, &s| self.mul(&acc, &self.generators[s].element))
    }

    /// Words that evaluate to the identity: every `s s^{-1}` plus the
    /// defining relators of the model.
    pub fn relators(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = (0..self.generators.len()).map(|s| vec![s, self.generators[s].inverse]).collect();
        match &self.kind {
            ModelKind::IntegerLattice(d) => {
                for i in 0..*d {
                    for j in i + 1..*d {
                        out.push(vec![2 * i, 2 * j, 2 * i + 1, 2 * j + 1]);
                    }
                }
                if self.generating_set == GeneratingSet::DiagonalAugmented {
                    // q = e_1 + ... + e_d
                    let mut w = vec![2 * d];
                    w.extend((0..*d).map(|i| 2 * i + 1));
                    out.push(w);
                }
            }
            ModelKind::DiscreteHeisenberg => {
                let z = [0, 2, 1, 3];
                let z_inv = [2, 0, 3, 1];
                for s in [0usize, 2] {
                    let mut w = vec![s];
                    w.extend(z);
                    w.push(s + 1);
                    w.extend(z_inv);
                    out.push(w);
                }
            }
            ModelKind::DirectProduct(fs) => {
                let mut offset = 0;
                let mut ranges = Vec::new();
                for f in fs {
                    for rel in f.relators() {
                        out.push(rel.iter().map(|s| s + offset).collect());
                    }
                    ranges.push(offset..offset + f.generators.len());
                    offset += f.generators.len();
                }
                for (i, ri) in ranges.iter().enumerate() {
                    for rj in &ranges[i + 1..] {
                        for s in ri.clone().step_by(2) {
                            for t in rj.clone().step_by(2) {
                                out.push(vec![s, t, s + 1, t + 1]);
                            }
                        }
                    }
                }
            }
            ModelKind::FreeGroup(_) | ModelKind::InfiniteCyclic => {}
        }
        out
    }

    /// Word length in closed form where one is known: the L1 norm on `Z^d`
    /// with the standard basis, `|n|` on `Z`, reduced length in free groups,
    /// and sums of those on products.
    pub fn closed_form_length(&self, g: &GroupElement) -> Option<u64> {
        match (&self.kind, g) {
            (ModelKind::IntegerLattice(_), GroupElement::Lattice(v)) if self.generating_set == GeneratingSet::Standard => {
                Some(v.iter().map(|x| x.unsigned_abs()).sum())
            }
            (ModelKind::InfiniteCyclic, GroupElement::Cyclic(n)) => Some(n.unsigned_abs()),
            (ModelKind::FreeGroup(_), GroupElement::Free(w)) => Some(w.len() as u64),
            (ModelKind::DirectProduct(fs), GroupElement::Product(cs)) => {
                fs.iter().zip(cs).map(|(f, c)| f.closed_form_length(c)).sum()
            }
            _ => None,
        }
    }

    /// A geodesic word in closed form, for the models covered by
    /// [`closed_form_length`](Self::closed_form_length).
    pub fn closed_form_geodesic(&self, g: &GroupElement) -> Option<Vec<usize>> {
        match (&self.kind, g) {
            (ModelKind::IntegerLattice(_), GroupElement::Lattice(v)) if self.generating_set == GeneratingSet::Standard => {
                let mut w = Vec::new();
                for (i, &x) in v.iter().enumerate() {
                    let s = if x >= 0 { 2 * i } else { 2 * i + 1 };
                    w.extend(std::iter::repeat_n(s, x.unsigned_abs() as usize));
                }
                Some(w)
            }
            (ModelKind::InfiniteCyclic, GroupElement::Cyclic(n)) => {
                Some(vec![if *n >= 0 { 0 } else { 1 }; n.unsigned_abs() as usize])
            }
            (ModelKind::FreeGroup(_), GroupElement::Free(w)) => Some(
                w.iter()
                    .map(|&l| {
                        let i = (l.unsigned_abs() - 1) as usize;
                        if l > 0 { 2 * i } else { 2 * i + 1 }
                    })
                    .collect(),
            ),
            (ModelKind::DirectProduct(fs), GroupElement::Product(cs)) => {
                let mut out = Vec::new();
                let mut offset = 0;
                for (f, c) in fs.iter().zip(cs) {
                    out.extend(f.closed_form_geodesic(c)?.into_iter().map(|s| s + offset));
                    offset += f.generators.len();
                }
                Some(out)
            }
            _ => None,
        }
    }

    /// Parses an element given either as a normal form (`(2,3)`, `(0,0,1)`,
    /// `-4`, `(g|h)`) or as a word over generator names (`abA`, `e` for the
    /// identity; `z` is an alias for `[a,b]` in the Heisenberg group).
    pub fn parse_element(&self, s: &str) -> Result<GroupElement> {
        let s = s.trim();
        if s.is_empty() || s == "e" {
            return Ok(self.identity());
        }
        let parsed = match &self.kind {
            ModelKind::InfiniteCyclic if s.parse::<i64>().is_ok() => Some(GroupElement::Cyclic(s.parse().unwrap())),
            ModelKind::IntegerLattice(_) | ModelKind::DiscreteHeisenberg if s.starts_with('(') => {
                let nums = parse_tuple(s)?;
                Some(match self.kind {
                    ModelKind::DiscreteHeisenberg => {
                        let arr: [i64; 3] = nums
                            .try_into()
                            .map_err(|_| Error::Parse(format!("Heisenberg element needs 3 coordinates: {s:?}")))?;
                        GroupElement::Heisenberg(arr)
                    }
                    _ => GroupElement::Lattice(nums),
                })
            }
            ModelKind::DirectProduct(fs) if s.starts_with('(') && s.contains('|') => {
                let inner = &s[1..s.len() - 1];
                let parts = split_top_level(inner, '|');
                if parts.len() != fs.len() {
                    return Err(Error::Parse(format!("expected {} components in {s:?}", fs.len())));
                }
                Some(GroupElement::Product(
                    fs.iter().zip(parts).map(|(f, p)| f.parse_element(p)).collect::<Result<_>>()?,
                ))
            }
            _ => None,
        };
        let g = match parsed {
            Some(g) => g,
            None => self.eval_word(&self.parse_word(s)?),
        };
        self.check(&g)?;
        Ok(g)
    }

    /// Parses a word over generator names by greedy longest match.
    pub fn parse_word(&self, s: &str) -> Result<Vec<usize>> {
        let heis_alias = matches!(self.kind, ModelKind::DiscreteHeisenberg);
        let mut out = Vec::new();
        let mut rest = s;
        while !rest.is_empty() {
            if heis_alias && rest.starts_with('z') {
                out.extend([0, 2, 1, 3]);
                rest = &rest[1..];
                continue;
            }
            if heis_alias && rest.starts_with('Z') {
                out.extend([2, 0, 3, 1]);
                rest = &rest[1..];
                continue;
            }
            let best = self
                .generators
                .iter()
                .enumerate()
                .filter(|(_, g)| rest.starts_with(g.name.as_str()))
                .max_by_key(|(_, g)| g.name.len());
            match best {
                Some((i, g)) => {
                    out.push(i);
                    rest = &rest[g.name.len()..];
                }
                None => return Err(Error::Parse(format!("cannot parse {s:?} as a word in {}", self.descriptor))),
            }
        }
        Ok(out)
    }

    /// Renders a word of generator indices using generator names.
    pub fn word_to_string(&self, word: &[usize]) -> String {
        if word.is_empty() {
            return "e".into();
        }
        word.iter().map(|&s| self.generators[s].name.as_str()).collect()
    }

    /// Renders an element in its normal form.
    pub fn format_element(&self, g: &GroupElement) -> String {
        match g {
            GroupElement::Lattice(v) => {
                format!("({})", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))
            }
            GroupElement::Heisenberg([x, y, z]) => format!("({x},{y},{z})"),
            GroupElement::Cyclic(n) => n.to_string(),
            GroupElement::Free(w) => {
                if w.is_empty() {
                    "e".into()
                } else {
                    w.iter()
                        .map(|&l| {
                            let c = LETTERS[(l.unsigned_abs() - 1) as usize] as char;
                            if l > 0 { c } else { c.to_ascii_uppercase() }
                        })
                        .collect()
                }
            }
            GroupElement::Product(cs) => {
                let ModelKind::DirectProduct(fs) = &self.kind else { return format!("{g:?}") };
                format!(
                    "({})",
                    fs.iter().zip(cs).map(|(f, c)| f.format_element(c)).collect::<Vec<_>>().join("|")
                )
            }
        }
    }
}

impl fmt::Display for GroupModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.descriptor)
    }
}

fn parse_tuple(s: &str) -> Result<Vec<i64>> {
    let inner = s
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| Error::Parse(format!("expected a parenthesised tuple: {s:?}")))?;
    inner
        .split(',')
        .map(|p| p.trim().parse::<i64>().map_err(|_| Error::Parse(format!("bad coordinate {p:?} in {s:?}"))))
        .collect()
}

pub(crate) fn split_top_level(s: &str, sep: char) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            c if c == sep && depth == 0 => {
                parts.push(s[start..i].trim());
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    parts.push(s[start..].trim());
    parts
}
