use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BaselineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestOptions {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for ForestOptions {
    fn default() -> Self {
        ForestOptions {
            n_trees: 100,
            max_depth: 2,
            min_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

/// Bagged regression trees; prediction is the mean over trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Training data with each feature column sorted once, shared by all trees.
struct Presorted<'a> {
    xs: &'a [Vec<f64>],
    ys: &'a [f64],
    order: Vec<Vec<usize>>,
}

impl<'a> Presorted<'a> {
    fn new(xs: &'a [Vec<f64>], ys: &'a [f64]) -> Self {
        let p = xs[0].len();
        let order = (0..p)
            .map(|j| {
                let mut idx: Vec<usize> = (0..xs.len()).collect();
                idx.sort_by(|&a, &b| xs[a][j].total_cmp(&xs[b][j]));
                idx
            })
            .collect();
        Presorted { xs, ys, order }
    }

    /// Grows one tree on bootstrap counts `w`; `member[i]` marks rows in the
    /// current node.
    fn grow(&self, w: &[u32], opts: &ForestOptions) -> Tree {
        let mut nodes = Vec::new();
        let member: Vec<bool> = w.iter().map(|&c| c > 0).collect();
        self.grow_node(w, member, 0, opts, &mut nodes);
        Tree { nodes }
    }

    fn grow_node(&self, w: &[u32], member: Vec<bool>, depth: usize, opts: &ForestOptions, nodes: &mut Vec<Node>) -> usize {
        let id = nodes.len();
        let (mut sw, mut sy) = (0.0, 0.0);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (i, &m) in member.iter().enumerate() {
            if m {
                sw += w[i] as f64;
                sy += w[i] as f64 * self.ys[i];
                lo = lo.min(self.ys[i]);
                hi = hi.max(self.ys[i]);
            }
        }
        let mean = sy / sw;
        nodes.push(Node::Leaf(mean));
        if depth >= opts.max_depth || lo == hi {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(w, &member, opts) else {
            return id;
        };
        let (lm, rm): (Vec<bool>, Vec<bool>) = member
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let left = self.xs[i][feature] <= threshold;
                (m && left, m && !left)
            })
            .unzip();
        let left = self.grow_node(w, lm, depth + 1, opts, nodes);
        let right = self.grow_node(w, rm, depth + 1, opts, nodes);
        nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Split minimising the weighted squared error, over all features and
    /// midpoints between consecutive distinct values. First best wins.
    fn best_split(&self, w: &[u32], member: &[bool], opts: &ForestOptions) -> Option<(usize, f64)> {
        let (mut tw, mut ty, mut tyy) = (0.0, 0.0, 0.0);
        let mut count = 0usize;
        for (i, &m) in member.iter().enumerate() {
            if m {
                let wi = w[i] as f64;
                tw += wi;
                ty += wi * self.ys[i];
                tyy += wi * self.ys[i] * self.ys[i];
                count += w[i] as usize;
            }
        }
        let parent = tyy - ty * ty / tw;
        let mut best: Option<(f64, usize, f64)> = None;
        for (j, order) in self.order.iter().enumerate() {
            let (mut lw, mut ly, mut lyy) = (0.0, 0.0, 0.0);
            let mut lcount = 0usize;
            let mut prev: Option<usize> = None;
            for &i in order {
                if !member[i] {
                    continue;
                }
                if let Some(p) = prev {
                    let (a, b) = (self.xs[p][j], self.xs[i][j]);
                    if a < b && lcount >= opts.min_leaf && count - lcount >= opts.min_leaf {
                        let (rw, ry, ryy) = (tw - lw, ty - ly, tyy - lyy);
                        let sse = (lyy - ly * ly / lw) + (ryy - ry * ry / rw);
                        if sse < parent - 1e-12 * parent.abs() && best.is_none_or(|(s, _, _)| sse < s) {
                            best = Some((sse, j, 0.5 * (a + b)));
                        }
                    }
                }
                let wi = w[i] as f64;
                lw += wi;
                ly += wi * self.ys[i];
                lyy += wi * self.ys[i] * self.ys[i];
                lcount += w[i] as usize;
                prev = Some(i);
            }
        }
        best.map(|(_, j, t)| (j, t))
    }
}

pub fn fit_forest(xs: &[Vec<f64>], ys: &[f64], opts: &ForestOptions, seed: u64) -> Result<Forest, BaselineError> {
    if xs.len() < 5 {
        return Err(BaselineError::TooFewRows { needed: 5, found: xs.len() });
    }
    let data = Presorted::new(xs, ys);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = xs.len();
    let trees = (0..opts.n_trees)
        .map(|_| {
            let mut w = vec![0u32; n];
            for _ in 0..n {
                w[rng.random_range(0..n)] += 1;
            }
            data.grow(&w, opts)
        })
        .collect();
    Ok(Forest { trees })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn step_function_is_recovered() {
        let xs: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, 0.0]).collect();
        let ys: Vec<f64> = (0..40).map(|i| if i < 20 { 1.0 } else { 5.0 }).collect();
        let f = fit_forest(&xs, &ys, &ForestOptions::default(), 3).unwrap();
        assert!((f.predict(&[2.0, 0.0]) - 1.0).abs() < 1e-12);
        assert!((f.predict(&[35.0, 0.0]) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_under_seed() {
        let xs: Vec<Vec<f64>> = (0..30).map(|i| vec![(i * 7 % 11) as f64, (i * 3 % 5) as f64]).collect();
        let ys: Vec<f64> = xs.iter().map(|r| r[0] + r[1] * r[1]).collect();
        let a = fit_forest(&xs, &ys, &ForestOptions::default(), 9).unwrap();
        let b = fit_forest(&xs, &ys, &ForestOptions::default(), 9).unwrap();
        assert_eq!(a, b);
        assert!(a.trees.iter().all(|t| t.nodes.len() <= 7));
    }

    #[test]
    fn single_tree_split_matches_exhaustive_search() {
        // Full-weight tree: compare the root split with a brute-force scan.
        let xs: Vec<Vec<f64>> = (0..25).map(|i| vec![((i * 13) % 17) as f64, ((i * 5) % 7) as f64]).collect();
        let ys: Vec<f64> = xs.iter().map(|r| (r[0] - 8.0).abs() + 0.3 * r[1]).collect();
        let data = Presorted::new(&xs, &ys);
        let w = vec![1u32; xs.len()];
        let (j, t) = data.best_split(&w, &vec![true; xs.len()], &ForestOptions::default()).unwrap();
        let sse = |idx: &[usize]| {
            let m = idx.iter().map(|&i| ys[i]).sum::<f64>() / idx.len() as f64;
            idx.iter().map(|&i| (ys[i] - m).powi(2)).sum::<f64>()
        };
        let mut best = f64::INFINITY;
        for f in 0..2 {
            for thr in xs.iter().map(|r| r[f]) {
                let (l, r): (Vec<usize>, Vec<usize>) = (0..xs.len()).partition(|&i| xs[i][f] <= thr);
                if !l.is_empty() && !r.is_empty() {
                    best = best.min(sse(&l) + sse(&r));
                }
            }
        }
        let (l, r): (Vec<usize>, Vec<usize>) = (0..xs.len()).partition(|&i| xs[i][j] <= t);
        assert!((sse(&l) + sse(&r) - best).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn predictions_within_target_range(
            ys in prop::collection::vec(-50.0f64..50.0, 5..40),
            probe in -100.0f64..100.0,
        ) {
            let xs: Vec<Vec<f64>> = (0..ys.len()).map(|i| vec![i as f64, (i % 3) as f64]).collect();
            let f = fit_forest(&xs, &ys, &ForestOptions { n_trees: 10, ..Default::default() }, 1).unwrap();
            let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let p = f.predict(&[probe, probe]);
            prop_assert!(p >= lo - 1e-9 && p <= hi + 1e-9);
        }
    }
}
