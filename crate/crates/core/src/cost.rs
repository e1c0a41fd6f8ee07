//! Shape entropy and the shape-set cost minimized during inference.

use crate::shape::Shape;

/// Shannon entropy in bits of a distribution given by raw counts.
/// Zero counts are ignored; an empty distribution has zero entropy.
///
/// Counts are summed in sorted order, so the result depends only on the
/// multiset of counts and not on the order they are supplied in.
pub fn entropy_of_counts(counts: impl IntoIterator<Item = usize>) -> f64 {
    let mut counts: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    counts.sort_unstable();
    let total: usize = counts.iter().sum();
    if counts.len() <= 1 {
        return 0.0;
    }
    let total = total as f64;
    -counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total;
            p * p.log2()
        })
        .sum::<f64>()
}

/// Entropy of a shape's block-type distribution.
pub fn entropy(s: &Shape) -> f64 {
    s.entropy()
}

/// `(1 + shape_count)^alpha · entropy_sum`.
pub fn cost_from_parts(shape_count: usize, entropy_sum: f64, alpha: f64) -> f64 {
    if entropy_sum == 0.0 {
        return 0.0;
    }
    (1.0 + shape_count as f64).powf(alpha) * entropy_sum
}

/// Natural log of [`cost_from_parts`], `-inf` for zero cost.
///
/// Search compares costs in this form: `(1 + #S)^alpha` overflows `f64` for
/// large alpha long before the comparison stops being meaningful.
pub fn log_cost(shape_count: usize, entropy_sum: f64, alpha: f64) -> f64 {
    if entropy_sum <= 0.0 {
        return f64::NEG_INFINITY;
    }
    alpha * (1.0 + shape_count as f64).ln() + entropy_sum.ln()
}

/// Cost of a collection of shapes.
pub fn cost<'a>(shapes: impl IntoIterator<Item = &'a Shape>, alpha: f64) -> f64 {
    let (n, sum) = entropy_total(shapes);
    cost_from_parts(n, sum, alpha)
}

/// Shape count and correctly rounded entropy sum.
pub fn entropy_total<'a>(shapes: impl IntoIterator<Item = &'a Shape>) -> (usize, f64) {
    let mut n = 0;
    let mut sum = ExactSum::default();
    for s in shapes {
        n += 1;
        sum.add(s.entropy());
    }
    (n, sum.value())
}

/// Exact running sum of floats (Shewchuk's non-overlapping partials), rounded
/// once on read. The rounded value depends only on the multiset of addends,
/// and adding `-x` cancels an earlier `x` exactly.
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn add(&mut self, mut x: f64) {
        let mut kept = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        self.partials.truncate(kept);
        self.partials.push(x);
    }

    /// The exact sum rounded to nearest, ties to even.
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let Some(&top) = p.last() else {
            return 0.0;
        };
        let mut n = p.len() - 1;
        let mut hi = top;
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}
