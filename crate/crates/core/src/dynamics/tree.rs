//! Binary prefix-sum tree for sampling an index proportionally to its weight.

#[derive(Debug, Clone)]
pub(crate) struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(weights: &[f64]) -> Self {
        let leaves = weights.len().next_power_of_two().max(1);
        let mut t = Self { leaves, nodes: vec![0.0; 2 * leaves] };
        t.rebuild(weights);
        t
    }

    pub fn rebuild(&mut self, weights: &[f64]) {
        let p = self.leaves;
        self.nodes[p..p + weights.len()].copy_from_slice(weights);
        self.nodes[p + weights.len()..].iter_mut().for_each(|v| *v = 0.0);
        for k in (1..p).rev() {
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    pub fn update(&mut self, i: usize, w: f64) {
        let mut k = self.leaves + i;
        self.nodes[k] = w;
        while k > 1 {
            k /= 2;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    /// Index `i` with `Σ_{j<i} w_j ≤ u < Σ_{j≤i} w_j`, for `u ∈ [0, total)`.
    pub fn find(&self, mut u: f64) -> usize {
        let mut k = 1;
        while k < self.leaves {
            let left = self.nodes[2 * k];
            if u < left || self.nodes[2 * k + 1] <= 0.0 {
                k *= 2;
            } else {
                u -= left;
                k = 2 * k + 1;
            }
        }
        k - self.leaves
    }
}
