//! DOA-to-truth association.

use crate::error::{Error, Result};

/// Largest K for which the exhaustive assignment is used.
pub const MAX_EXHAUSTIVE_K: usize = 8;

fn permutations(n: usize) -> Vec<Vec<usize>> {
    // Heap's algorithm, iterative.
    let mut perm: Vec<usize> = (0..n).collect();
    let mut out = vec![perm.clone()];
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            out.push(perm.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// Mean squared error (degrees²) under the one-to-one assignment between
/// estimates and truth that minimizes the total squared error.
pub fn associate_and_score(estimates: &[f64], truth: &[f64]) -> Result<f64> {
    if estimates.len() != truth.len() || truth.is_empty() {
        return Err(Error::CountMismatch {
            estimates: estimates.len(),
            truth: truth.len(),
        });
    }
    let k = truth.len();
    if k > MAX_EXHAUSTIVE_K {
        return Err(Error::InvalidScene(format!(
            "exhaustive association supports at most {MAX_EXHAUSTIVE_K} targets, got {k}"
        )));
    }
    let best = permutations(k)
        .into_iter()
        .map(|p| {
            p.iter()
                .enumerate()
                .map(|(i, &j)| (estimates[j] - truth[i]).powi(2))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    Ok(best / k as f64)
}
