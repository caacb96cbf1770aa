use std::sync::Arc;

use super::{enumerate_ball_with_budget, BallTable, GroupElement, GroupModel, DEFAULT_BALL_BUDGET};
use crate::error::{Error, Result};

/// Exact word metric on a model, certified on `B(radius)`.
///
/// Models with a closed-form length formula answer every query exactly;
/// the rest (Heisenberg, diagonal-augmented lattices) are backed by a
/// complete BFS ball and return `None` outside it.
#[derive(Debug, Clone)]
pub struct WordMetric {
    model: GroupModel,
    radius: u32,
    ball: Option<Arc<BallTable>>,
}

impl WordMetric {
    pub fn new(model: &GroupModel, radius: u32) -> Result<Self> {
        Self::with_budget(model, radius, DEFAULT_BALL_BUDGET)
    }

    pub fn with_budget(model: &GroupModel, radius: u32, budget: usize) -> Result<Self> {
        let ball = if model.closed_form_length(&model.identity()).is_some() {
            None
        } else {
            Some(Arc::new(enumerate_ball_with_budget(model, radius, budget)?))
        };
        Ok(Self { model: model.clone(), radius, ball })
    }

    /// Wraps an existing complete table.
    pub fn from_ball(model: &GroupModel, ball: BallTable) -> Self {
        Self { model: model.clone(), radius: ball.radius(), ball: Some(Arc::new(ball)) }
    }

    pub fn model(&self) -> &GroupModel {
        &self.model
    }

    /// Radius up to which every length is guaranteed available.
    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn ball(&self) -> Option<&BallTable> {
        self.ball.as_deref()
    }

    pub fn is_closed_form(&self) -> bool {
        self.ball.is_none()
    }

    pub fn length(&self, g: &GroupElement) -> Option<u64> {
        match &self.ball {
            Some(t) => t.word_length(g).map(u64::from),
            None => self.model.closed_form_length(g),
        }
    }

    /// Like [`length`](Self::length) but with an `OutOfRange` error.
    pub fn length_or_err(&self, g: &GroupElement) -> Result<u64> {
        self.length(g).ok_or_else(|| {
            Error::OutOfRange(format!(
                "{} is outside the ball of radius {} in {}",
                self.model.format_element(g),
                self.radius,
                self.model
            ))
        })
    }

    /// `d(g, h) = l_S(g^{-1} h)`.
    pub fn distance(&self, g: &GroupElement, h: &GroupElement) -> Result<u64> {
        self.length_or_err(&self.model.mul(&self.model.inverse(g), h))
    }

    pub fn geodesic_word(&self, g: &GroupElement) -> Result<Vec<usize>> {
        let word = match &self.ball {
            Some(t) => t.geodesic_word(g),
            None => self.model.closed_form_geodesic(g),
        };
        word.ok_or_else(|| Error::OutOfRange(format!("no geodesic for {} within radius {}", self.model.format_element(g), self.radius)))
    }

    /// Elements of `B(n)` for `n <= radius`, in BFS order.
    pub fn ball_elements(&self, n: u32) -> Result<Vec<GroupElement>> {
        match &self.ball {
            Some(t) if n <= t.radius() => Ok(t.iter().take_while(|(_, l)| *l <= n).map(|(g, _)| g.clone()).collect()),
            Some(_) => Err(Error::OutOfRange(format!("ball of radius {n} exceeds table radius {}", self.radius))),
            None => {
                let t = enumerate_ball_with_budget(&self.model, n, DEFAULT_BALL_BUDGET)?;
                Ok(t.iter().map(|(g, _)| g.clone()).collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::enumerate_ball;

    #[test]
    fn closed_form_agrees_with_bfs() {
        for desc in ["z^2", "z^3", "z", "free:2", "prod(z,free:2)"] {
            let m = GroupModel::parse(desc).unwrap();
            let t = enumerate_ball(&m, 6).unwrap();
            for (g, l) in t.iter() {
                assert_eq!(m.closed_form_length(g), Some(u64::from(l)), "{desc}: {}", m.format_element(g));
            }
        }
    }

    #[test]
    fn heisenberg_uses_ball() {
        let m = GroupModel::heisenberg();
        let metric = WordMetric::new(&m, 6).unwrap();
        assert!(!metric.is_closed_form());
        assert_eq!(metric.length(&m.parse_element("(0,0,2)").unwrap()), Some(6));
        assert!(metric.length_or_err(&m.parse_element("(0,0,100)").unwrap()).is_err());
    }

    #[test]
    fn distance_is_left_invariant() {
        let m = GroupModel::lattice(2).unwrap();
        let metric = WordMetric::new(&m, 10).unwrap();
        let a = m.parse_element("(-6,0)").unwrap();
        let b = m.parse_element("(6,0)").unwrap();
        assert_eq!(metric.distance(&a, &b).unwrap(), 12);
    }
}
