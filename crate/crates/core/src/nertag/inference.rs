//! Chain inference on precomputed score tables.
//!
//! `state[t][y]` is the score of label `y` at position `t`, and
//! `trans[a][b]` the score of moving from label `a` to label `b`.

use crate::domain::NUM_LABELS;
use crate::scalar::{log_sum_exp, Scalar};

const L: usize = NUM_LABELS;

pub type Row<F> = [F; L];
pub type Square<F> = [[F; L]; L];

/// Output of forward-backward in probability space, plus both estimates of `log Z`.
#[derive(Debug, Clone)]
pub struct Marginals<F> {
    pub log_z: F,
    /// `log Z` recomputed from the backward recursion.
    pub log_z_backward: F,
    pub node: Vec<Row<F>>,
    pub edge: Vec<Square<F>>,
}

pub fn sequence_score<F: Scalar>(state: &[Row<F>], trans: &Square<F>, labels: &[usize]) -> F {
    let mut s = F::zero();
    for (t, &y) in labels.iter().enumerate() {
        s += state[t][y];
        if t > 0 {
            s += trans[labels[t - 1]][y];
        }
    }
    s
}

pub fn forward_backward<F: Scalar>(state: &[Row<F>], trans: &Square<F>) -> Marginals<F> {
    let n = state.len();
    assert!(n > 0, "forward_backward needs at least one position");

    let mut alpha = vec![[F::zero(); L]; n];
    alpha[0] = state[0];
    for t in 1..n {
        for y in 0..L {
            let prev = &alpha[t - 1];
            alpha[t][y] = log_sum_exp((0..L).map(|p| prev[p] + trans[p][y])) + state[t][y];
        }
    }

    let mut beta = vec![[F::zero(); L]; n];
    for t in (0..n - 1).rev() {
        for y in 0..L {
            let next = &beta[t + 1];
            beta[t][y] = log_sum_exp((0..L).map(|q| trans[y][q] + state[t + 1][q] + next[q]));
        }
    }

    let log_z = log_sum_exp(alpha[n - 1].iter().copied());
    let log_z_backward = log_sum_exp((0..L).map(|y| state[0][y] + beta[0][y]));

    let node = (0..n)
        .map(|t| {
            let mut row = [F::zero(); L];
            for y in 0..L {
                row[y] = (alpha[t][y] + beta[t][y] - log_z).exp();
            }
            row
        })
        .collect();
    let edge = (0..n.saturating_sub(1))
        .map(|t| {
            let mut sq = [[F::zero(); L]; L];
            for a in 0..L {
                for b in 0..L {
                    sq[a][b] =
                        (alpha[t][a] + trans[a][b] + state[t + 1][b] + beta[t + 1][b] - log_z).exp();
                }
            }
            sq
        })
        .collect();

    Marginals {
        log_z,
        log_z_backward,
        node,
        edge,
    }
}

/// Best label path and its score. Ties go to the lowest label index.
pub fn viterbi<F: Scalar>(state: &[Row<F>], trans: &Square<F>) -> (Vec<usize>, F) {
    let n = state.len();
    assert!(n > 0, "viterbi needs at least one position");

    let mut delta = vec![[F::zero(); L]; n];
    let mut back = vec![[0usize; L]; n];
    delta[0] = state[0];
    for t in 1..n {
        for y in 0..L {
            let mut best = 0;
            let mut best_score = delta[t - 1][0] + trans[0][y];
            for p in 1..L {
                let s = delta[t - 1][p] + trans[p][y];
                if s > best_score {
                    best = p;
                    best_score = s;
                }
            }
            delta[t][y] = best_score + state[t][y];
            back[t][y] = best;
        }
    }

    let mut last = 0;
    for y in 1..L {
        if delta[n - 1][y] > delta[n - 1][last] {
            last = y;
        }
    }
    let score = delta[n - 1][last];
    let mut path = vec![0; n];
    path[n - 1] = last;
    for t in (1..n).rev() {
        path[t - 1] = back[t][path[t]];
    }
    (path, score)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_potentials_are_uniform() {
        let state = vec![[0.0f64; L]; 3];
        let trans = [[0.0f64; L]; L];
        let m = forward_backward(&state, &trans);
        assert!((m.log_z - 3.0 * 9f64.ln()).abs() < 1e-12);
        for row in &m.node {
            for p in row {
                assert!((p - 1.0 / 9.0).abs() < 1e-12);
            }
        }
        assert_eq!(viterbi(&state, &trans).0, vec![0, 0, 0]);
    }

    #[test]
    fn single_position() {
        let mut row = [0.0f64; L];
        for (i, r) in row.iter_mut().enumerate() {
            *r = i as f64 * 0.1 - 0.3;
        }
        row[3] = 2.0;
        let m = forward_backward(&[row], &[[0.7; L]; L]);
        let lse = row.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((m.log_z - lse).abs() < 1e-12);
        assert!(m.edge.is_empty());
        assert_eq!(viterbi(&[row], &[[0.0; L]; L]), (vec![3], 2.0));
    }

    #[test]
    fn large_scores_do_not_overflow() {
        let mut state = vec![[0.0f64; L]; 4];
        state[1][2] = 1e4;
        state[2][5] = -1e4;
        let trans = [[1e3; L]; L];
        let m = forward_backward(&state, &trans);
        assert!(m.log_z.is_finite());
        assert!(m.node.iter().all(|r| r.iter().all(|p| p.is_finite())));
    }
}
