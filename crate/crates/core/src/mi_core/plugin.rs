//! Plug-in (maximum-likelihood) entropy and mutual information, in nats.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

/// Relabels symbols densely in order of first appearance.
fn densify<T: Hash + Eq + Copy>(xs: &[T]) -> (Vec<u32>, usize) {
    let mut ids: HashMap<T, u32> = HashMap::new();
    let dense = xs
        .iter()
        .map(|x| {
            let next = ids.len() as u32;
            *ids.entry(*x).or_insert(next)
        })
        .collect();
    (dense, ids.len())
}

fn counts(dense: &[u32], alphabet: usize) -> Vec<u64> {
    let mut c = vec![0u64; alphabet];
    for &x in dense {
        c[x as usize] += 1;
    }
    c
}

fn entropy_of_counts(c: &[u64], n: f64) -> f64 {
    c.iter()
        .filter(|&&k| k > 0)
        .map(|&k| {
            let p = k as f64 / n;
            -p * p.ln()
        })
        .sum()
}

pub fn entropy<T: Hash + Eq + Copy>(xs: &[T]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let (dense, alphabet) = densify(xs);
    entropy_of_counts(&counts(&dense, alphabet), xs.len() as f64)
}

/// `Σ p(x,y) ln(p(x,y) / (p(x) p(y)))` over observed pairs.
///
/// Pairs are visited in a fixed order so the result does not depend on hash
/// seeds. The value is clamped to `[0, min(H(X), H(Y))]` to absorb rounding.
pub fn plugin_mi<A, B>(xs: &[A], ys: &[B]) -> Result<f64>
where
    A: Hash + Eq + Copy,
    B: Hash + Eq + Copy,
{
    if xs.len() != ys.len() {
        return Err(Error::domain(format!(
            "sequence lengths differ: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.is_empty() {
        return Err(Error::domain("MI needs at least one sample"));
    }
    let n = xs.len() as f64;
    let (dx, nx) = densify(xs);
    let (dy, ny) = densify(ys);
    let cx = counts(&dx, nx);
    let cy = counts(&dy, ny);

    let term = |c: u64, x: usize, y: usize| -> f64 {
        let c = c as f64;
        (c / n) * (c * n / (cx[x] as f64 * cy[y] as f64)).ln()
    };

    let mut mi = 0.0;
    if nx.saturating_mul(ny) <= 1 << 22 {
        let mut joint = vec![0u64; nx * ny];
        for (&x, &y) in dx.iter().zip(&dy) {
            joint[x as usize * ny + y as usize] += 1;
        }
        for (i, &c) in joint.iter().enumerate() {
            if c > 0 {
                mi += term(c, i / ny, i % ny);
            }
        }
    } else {
        let mut pairs: Vec<u64> = dx
            .iter()
            .zip(&dy)
            .map(|(&x, &y)| ((x as u64) << 32) | y as u64)
            .collect();
        pairs.sort_unstable();
        let mut i = 0;
        while i < pairs.len() {
            let mut j = i + 1;
            while j < pairs.len() && pairs[j] == pairs[i] {
                j += 1;
            }
            let (x, y) = ((pairs[i] >> 32) as usize, (pairs[i] & 0xffff_ffff) as usize);
            mi += term((j - i) as u64, x, y);
            i = j;
        }
    }
    let cap = entropy_of_counts(&cx, n).min(entropy_of_counts(&cy, n));
    Ok(mi.clamp(0.0, cap))
}
