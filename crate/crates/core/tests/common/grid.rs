//! Exhaustive grid search over box-bounded spend vectors with a shared budget.

/// Every grid point of `[lo, hi]` with `resolution` points per axis whose total
/// respects the budget. With `equality`, the last coordinate absorbs the residual
/// budget and is not gridded.
pub fn points(lo: &[f64], hi: &[f64], budget: f64, resolution: usize, equality: bool) -> Vec<Vec<f64>> {
    let d = lo.len();
    let free = if equality { d - 1 } else { d };
    let mut out = Vec::new();
    let mut idx = vec![0usize; free];
    loop {
        let mut u: Vec<f64> = (0..free)
            .map(|i| lo[i] + (hi[i] - lo[i]) * idx[i] as f64 / (resolution - 1) as f64)
            .collect();
        let total: f64 = u.iter().sum();
        if equality {
            let last = budget - total;
            if last >= lo[d - 1] - 1e-12 && last <= hi[d - 1] + 1e-12 {
                u.push(last);
                out.push(u);
            }
        } else if total <= budget + 1e-12 {
            out.push(u);
        }
        let mut i = 0;
        loop {
            if i == free {
                return out;
            }
            idx[i] += 1;
            if idx[i] < resolution {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}
