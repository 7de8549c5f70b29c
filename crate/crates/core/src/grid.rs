//! Time grids and the trapezoid quadrature shared by every module.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("time grid needs at least two nodes, got {0}")]
    TooFewNodes(usize),
    #[error("time grid is not strictly increasing at node {index} ({prev} -> {next})")]
    NonmonotoneGrid { index: usize, prev: f64, next: f64 },
    #[error("time grid contains a non-finite node at index {0}")]
    NonFinite(usize),
    #[error("time {0} is not a node of the grid")]
    NotANode(f64),
    #[error("grids differ: {0}")]
    Mismatch(String),
}

/// Strictly increasing sequence of time nodes `t_0 < t_1 < ... < t_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn new(nodes: Vec<f64>) -> Result<Self, GridError> {
        if nodes.len() < 2 {
            return Err(GridError::TooFewNodes(nodes.len()));
        }
        for (i, t) in nodes.iter().enumerate() {
            if !t.is_finite() {
                return Err(GridError::NonFinite(i));
            }
        }
        for i in 1..nodes.len() {
            if nodes[i] <= nodes[i - 1] {
                return Err(GridError::NonmonotoneGrid {
                    index: i,
                    prev: nodes[i - 1],
                    next: nodes[i],
                });
            }
        }
        Ok(Self { nodes })
    }

    /// `steps` equal intervals on `[t0, t1]`; the last node is exactly `t1`.
    pub fn uniform(t0: f64, t1: f64, steps: usize) -> Result<Self, GridError> {
        if steps == 0 {
            return Err(GridError::TooFewNodes(1));
        }
        let h = (t1 - t0) / steps as f64;
        let mut nodes: Vec<f64> = (0..=steps).map(|k| t0 + k as f64 * h).collect();
        nodes[steps] = t1;
        Self::new(nodes)
    }

    /// Splits every interval into `factor` equal pieces.
    pub fn refine(&self, factor: usize) -> Self {
        let factor = factor.max(1);
        let mut nodes = Vec::with_capacity((self.nodes.len() - 1) * factor + 1);
        for w in self.nodes.windows(2) {
            let h = (w[1] - w[0]) / factor as f64;
            for j in 0..factor {
                nodes.push(w[0] + j as f64 * h);
            }
        }
        nodes.push(self.end());
        Self { nodes }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn end(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Step `t_{k+1} - t_k`.
    pub fn step(&self, k: usize) -> f64 {
        self.nodes[k + 1] - self.nodes[k]
    }

    pub fn max_step(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Index of the node equal to `t` (relative tolerance 1e-12 of the span).
    pub fn index_of(&self, t: f64) -> Result<usize, GridError> {
        let tol = 1e-12 * (self.end() - self.start()).abs().max(1.0);
        let k = self.nodes.partition_point(|&s| s < t - tol);
        if k < self.nodes.len() && (self.nodes[k] - t).abs() <= tol {
            Ok(k)
        } else {
            Err(GridError::NotANode(t))
        }
    }
}

/// Trapezoid weights for `∫_{t_0}^{t_k}` over the first `k + 1` nodes.
pub fn trapezoid_weights(nodes: &[f64], k: usize) -> impl Iterator<Item = f64> + '_ {
    (0..=k).map(move |j| {
        if k == 0 {
            return 0.0;
        }
        let left = if j > 0 { nodes[j] - nodes[j - 1] } else { 0.0 };
        let right = if j < k { nodes[j + 1] - nodes[j] } else { 0.0 };
        0.5 * (left + right)
    })
}

/// Running trapezoid integral `∫_{t_0}^{t_k} values` for every node.
pub fn cumulative_trapezoid(nodes: &[f64], values: &[f64]) -> Vec<f64> {
    debug_assert_eq!(nodes.len(), values.len());
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(acc);
    for k in 1..values.len() {
        acc += 0.5 * (nodes[k] - nodes[k - 1]) * (values[k] + values[k - 1]);
        out.push(acc);
    }
    out
}

/// Trapezoid value of `∫_{t_0}^{t_k} f(s) ds` from samples at the first `k + 1` nodes.
pub fn trapezoid_prefix(nodes: &[f64], k: usize, mut f: impl FnMut(usize) -> f64) -> f64 {
    let mut acc = 0.0;
    for j in 1..=k {
        acc += 0.5 * (nodes[j] - nodes[j - 1]) * (f(j) + f(j - 1));
    }
    acc
}

/// Classical linear Gronwall majorant on a grid.
///
/// Returns `y(t_k) = y0·exp(∫_{t_0}^{t_k} a) + ∫_{t_0}^{t_k} b(s)·exp(∫_s^{t_k} a) ds` where every
/// integral is the trapezoid rule on the grid. The outer integral is accumulated recursively:
/// `J_k = e^{A_k - A_{k-1}} J_{k-1} + h/2 (b_{k-1} e^{A_k - A_{k-1}} + b_k)`, which equals the
/// trapezoid sum with weights `exp(A_k - A_j)` without forming `exp(±A)` separately.
pub fn linear_majorant(nodes: &[f64], y0: f64, rate: &[f64], source: &[f64]) -> Vec<f64> {
    let prefix = cumulative_trapezoid(nodes, rate);
    let mut out = Vec::with_capacity(nodes.len());
    let mut forced = 0.0;
    out.push(y0);
    for k in 1..nodes.len() {
        let growth = (prefix[k] - prefix[k - 1]).exp();
        let h = nodes[k] - nodes[k - 1];
        forced = growth * forced + 0.5 * h * (source[k - 1] * growth + source[k]);
        out.push(y0 * prefix[k].exp() + forced);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert_eq!(TimeGrid::new(vec![0.0]), Err(GridError::TooFewNodes(1)));
        assert!(matches!(
            TimeGrid::new(vec![0.0, 1.0, 1.0]),
            Err(GridError::NonmonotoneGrid { index: 2, .. })
        ));
        assert!(matches!(
            TimeGrid::new(vec![0.0, f64::NAN]),
            Err(GridError::NonFinite(1))
        ));
    }

    #[test]
    fn uniform_hits_endpoint() {
        let g = TimeGrid::uniform(0.0, 0.3, 7).unwrap();
        assert_eq!(g.len(), 8);
        assert_eq!(g.end(), 0.3);
        assert_eq!(g.index_of(g.nodes()[3]).unwrap(), 3);
        assert!(g.index_of(0.01).is_err());
    }

    #[test]
    fn refine_keeps_coarse_nodes() {
        let g = TimeGrid::uniform(0.0, 1.0, 4).unwrap();
        let f = g.refine(3);
        assert_eq!(f.len(), 13);
        for (k, t) in g.nodes().iter().enumerate() {
            assert!((f.nodes()[3 * k] - t).abs() < 1e-15);
        }
    }

    #[test]
    fn weights_integrate_affine_exactly() {
        let g = TimeGrid::new(vec![0.0, 0.1, 0.35, 0.5, 1.0]).unwrap();
        let k = 4;
        let s: f64 = trapezoid_weights(g.nodes(), k)
            .zip(g.nodes())
            .map(|(w, t)| w * (2.0 * t + 1.0))
            .sum();
        assert!((s - 2.0).abs() < 1e-14);
        assert_eq!(trapezoid_weights(g.nodes(), 0).sum::<f64>(), 0.0);
    }

    #[test]
    fn majorant_constant_rate() {
        let g = TimeGrid::uniform(0.0, 1.0, 1000).unwrap();
        let n = g.len();
        let y = linear_majorant(g.nodes(), 1.0, &vec![1.0; n], &vec![0.0; n]);
        assert!((y[n - 1] - 1f64.exp()).abs() < 1e-12);
        let y = linear_majorant(g.nodes(), 0.0, &vec![0.0; n], &vec![1.0; n]);
        assert!((y[n - 1] - 1.0).abs() < 1e-12);
    }
}
