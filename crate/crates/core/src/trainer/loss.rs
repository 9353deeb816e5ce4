use crate::error::{Error, Result};

/// Mean softmax cross-entropy over `m` rows of `k` logits, with its gradient
/// `(softmax − onehot) / m`.
pub fn cross_entropy(logits: &[f64], num_classes: usize, labels: &[usize]) -> Result<(f64, Vec<f64>)> {
    let m = labels.len();
    if logits.len() != m * num_classes {
        return Err(Error::Shape(format!(
            "{} logits for {m} rows of {num_classes} classes",
            logits.len()
        )));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("cross-entropy over zero rows".into()));
    }
    let mut grad = vec![0.0; logits.len()];
    let mut loss = 0.0;
    let scale = 1.0 / m as f64;
    for (row, &label) in labels.iter().enumerate() {
        if label >= num_classes {
            return Err(Error::IndexOutOfRange {
                what: "class label",
                index: label as u64,
                bound: num_classes as u64,
            });
        }
        let z = &logits[row * num_classes..(row + 1) * num_classes];
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = z.iter().map(|v| (v - max).exp()).sum();
        let log_sum = max + sum.ln();
        loss += log_sum - z[label];
        let g = &mut grad[row * num_classes..(row + 1) * num_classes];
        for (gi, zi) in g.iter_mut().zip(z) {
            *gi = (zi - log_sum).exp() * scale;
        }
        g[label] -= scale;
    }
    Ok((loss * scale, grad))
}
