use crate::error::{Error, Result};

/// Mean silhouette with Euclidean distance. Needs at least two labels and
/// at least two points under every label.
pub fn silhouette(points: &[[f64; 2]], labels: &[usize]) -> Result<f64> {
    if points.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} points but {} labels", points.len(), labels.len())));
    }
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; classes];
    for l in labels {
        counts[*l] += 1;
    }
    let present: Vec<usize> = (0..classes).filter(|c| counts[*c] > 0).collect();
    if present.len() < 2 {
        return Err(Error::TooFewPoints(format!("{} labeled groups, need 2", present.len())));
    }
    if let Some(c) = present.iter().find(|c| counts[**c] < 2) {
        return Err(Error::TooFewPoints(format!("label {c} has a single point")));
    }

    let mut total = 0.0;
    let mut sums = vec![0.0; classes];
    for (i, p) in points.iter().enumerate() {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for (q, l) in points.iter().zip(labels) {
            sums[*l] += ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
        }
        let own = labels[i];
        let a = sums[own] / (counts[own] - 1) as f64;
        let b =
            present.iter().filter(|c| **c != own).map(|c| sums[*c] / counts[*c] as f64).fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / points.len() as f64)
}

/// Average precision of one ranking: scores sorted descending (ties broken
/// by input order), averaging precision at the rank of every positive.
/// `None` when there are no positives.
pub fn average_precision(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if positive[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    (hits > 0).then(|| sum / hits as f64)
}

/// One-vs-rest average precision averaged over the classes that occur.
/// `scores[i][c]` is the score of sample `i` for class `c`.
pub fn mean_average_precision<const C: usize>(scores: &[[f64; C]], labels: &[usize]) -> f64 {
    let mut aps = Vec::with_capacity(C);
    for c in 0..C {
        let column: Vec<f64> = scores.iter().map(|s| s[c]).collect();
        let positive: Vec<bool> = labels.iter().map(|l| *l == c).collect();
        if let Some(ap) = average_precision(&column, &positive) {
            aps.push(ap);
        }
    }
    if aps.is_empty() {
        0.0
    } else {
        aps.iter().sum::<f64>() / aps.len() as f64
    }
}
