use indexmap::IndexMap;

use super::{GroupElement, GroupModel};
use crate::error::{Error, Result};

/// Default cap on the number of stored elements.
pub const DEFAULT_BALL_BUDGET: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Entry {
    length: u32,
    /// Index of the BFS parent and the generator that extends it.
    parent: Option<(u32, u32)>,
}

/// Exact word lengths for every element of `B(R)`, in BFS order.
#[derive(Debug, Clone)]
pub struct BallTable {
    radius: u32,
    entries: IndexMap<GroupElement, Entry>,
    complete: bool,
}

impl BallTable {
    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Exact `l_S(g)`, or `None` when `g` lies outside the ball.
    pub fn word_length(&self, g: &GroupElement) -> Option<u32> {
        self.entries.get(g).map(|e| e.length)
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.entries.contains_key(g)
    }

    /// Index of `g` in BFS order.
    pub fn index_of(&self, g: &GroupElement) -> Option<usize> {
        self.entries.get_index_of(g)
    }

    pub fn element(&self, index: usize) -> &GroupElement {
        self.entries.get_index(index).expect("ball index out of range").0
    }

    /// Elements with their lengths, in BFS order (non-decreasing length).
    pub fn iter(&self) -> impl Iterator<Item = (&GroupElement, u32)> {
        self.entries.iter().map(|(g, e)| (g, e.length))
    }

    /// Elements of length exactly `n`.
    pub fn sphere(&self, n: u32) -> impl Iterator<Item = &GroupElement> {
        self.iter().filter(move |(_, l)| *l == n).map(|(g, _)| g)
    }

    /// Generator indices `w_1 .. w_k` with `w_1 ... w_k = g` and `k = l_S(g)`,
    /// read off the BFS parent pointers.
    pub fn geodesic_word(&self, g: &GroupElement) -> Option<Vec<usize>> {
        let mut idx = self.entries.get_index_of(g)?;
        let mut word = Vec::new();
        while let Some((parent, s)) = self.entries[idx].parent {
            word.push(s as usize);
            idx = parent as usize;
        }
        word.reverse();
        Some(word)
    }

    /// CSV with columns `normal_form,length`.
    pub fn to_csv(&self, model: &GroupModel) -> String {
        let mut out = String::from("normal_form,length\n");
        for (g, l) in self.iter() {
            out.push('"');
            out.push_str(&model.format_element(g));
            out.push_str("\",");
            out.push_str(&l.to_string());
            out.push('\n');
        }
        out
    }
}

/// Breadth-first enumeration of `B(radius)` from the identity over `S`.
pub fn enumerate_ball(model: &GroupModel, radius: u32) -> Result<BallTable> {
    enumerate_ball_with_budget(model, radius, DEFAULT_BALL_BUDGET)
}

/// As [`enumerate_ball`], failing with [`Error::ResourceExhausted`] (which
/// reports the largest completed radius) once more than `budget` elements
/// would be stored.
pub fn enumerate_ball_with_budget(model: &GroupModel, radius: u32, budget: usize) -> Result<BallTable> {
    let mut entries = IndexMap::new();
    entries.insert(model.identity(), Entry { length: 0, parent: None });
    let mut layer_start = 0;
    for n in 1..=radius {
        let layer_end = entries.len();
        for idx in layer_start..layer_end {
            let g = entries.get_index(idx).unwrap().0.clone();
            for (s, gen) in model.generators().iter().enumerate() {
                let h = model.mul(&g, &gen.element);
                if entries.contains_key(&h) {
                    continue;
                }
                if entries.len() >= budget {
                    return Err(Error::ResourceExhausted { budget, completed_radius: n - 1 });
                }
                entries.insert(h, Entry { length: n, parent: Some((idx as u32, s as u32)) });
            }
        }
        layer_start = layer_end;
    }
    Ok(BallTable { radius, entries, complete: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupModel;

    fn ball(desc: &str, r: u32) -> (GroupModel, BallTable) {
        let m = GroupModel::parse(desc).unwrap();
        let t = enumerate_ball(&m, r).unwrap();
        (m, t)
    }

    #[test]
    fn z2_unit_ball() {
        let (m, t) = ball("z^2", 1);
        assert_eq!(t.len(), 5);
        for s in ["(0,0)", "(1,0)", "(-1,0)", "(0,1)", "(0,-1)"] {
            assert!(t.contains(&m.parse_element(s).unwrap()));
        }
    }

    #[test]
    fn z2_ball_sizes_match_closed_form() {
        let (_, t) = ball("z^2", 12);
        for n in 0..=12u32 {
            let count = t.iter().filter(|(_, l)| *l <= n).count();
            assert_eq!(count as u32, 2 * n * n + 2 * n + 1);
        }
    }

    #[test]
    fn free_group_ball_size() {
        let (_, t) = ball("free:2", 6);
        assert_eq!(t.len(), 2 * 3usize.pow(6) - 1);
    }

    #[test]
    fn heisenberg_center_lengths() {
        let (m, t) = ball("heisenberg", 6);
        assert_eq!(t.word_length(&m.parse_element("(0,0,1)").unwrap()), Some(4));
        assert_eq!(t.word_length(&m.parse_element("(0,0,2)").unwrap()), Some(6));
        let w = t.geodesic_word(&m.parse_element("(0,0,1)").unwrap()).unwrap();
        assert_eq!(w.len(), 4);
        assert_eq!(m.eval_word(&w), m.parse_element("z").unwrap());
    }

    #[test]
    fn word_length_out_of_range_is_none() {
        let (m, t) = ball("z^2", 3);
        assert_eq!(t.word_length(&m.parse_element("(2,3)").unwrap()), None);
        assert_eq!(t.word_length(&m.identity()), Some(0));
        assert_eq!(t.geodesic_word(&m.identity()), Some(vec![]));
    }

    #[test]
    fn budget_reports_last_complete_radius() {
        let m = GroupModel::parse("z^2").unwrap();
        // |B(3)| = 25, |B(4)| = 41
        let err = enumerate_ball_with_budget(&m, 10, 30).unwrap_err();
        assert_eq!(err, Error::ResourceExhausted { budget: 30, completed_radius: 3 });
    }

    #[test]
    fn csv_export() {
        let (m, t) = ball("z", 1);
        assert_eq!(t.to_csv(&m), "normal_form,length\n\"0\",0\n\"1\",1\n\"-1\",1\n");
    }
}
