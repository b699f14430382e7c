use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Index of the largest probability; exact ties go to the lower class.
pub fn predicted_class(probs: &[f64]) -> usize {
    let mut best = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = k;
        }
    }
    best
}

/// Percentage of rows whose argmax matches the label.
pub fn accuracy(probs: &Matrix, labels: &[usize]) -> Result<f64> {
    if labels.is_empty() || probs.rows() != labels.len() {
        return Err(Error::shape(format!(
            "accuracy needs matching non-empty inputs, got {} predictions and {} labels",
            probs.rows(),
            labels.len()
        )));
    }
    let correct = labels
        .iter()
        .enumerate()
        .filter(|&(i, &y)| predicted_class(probs.row(i)) == y)
        .count();
    Ok(100.0 * correct as f64 / labels.len() as f64)
}

/// ROC AUC in percent via the Mann–Whitney U statistic with mid-ranks, so
/// tied scores count one half.
pub fn auc(scores: &[f64], labels: &[usize]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::invalid(format!("AUC needs binary labels, found {bad}")));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numerical("AUC scores must be finite".into()));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("AUC is undefined when only one class is present"));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the rank sum of the positives keeps mid-ranks integral.
    let mut rank_sum_x2: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end, mid-rank (start + 1 + end) / 2
        let mid_x2 = (start + 1 + end) as u64;
        let positives = order[start..end].iter().filter(|&&i| labels[i] == 1).count() as u64;
        rank_sum_x2 += mid_x2 * positives;
        start = end;
    }
    let pos_u = pos as u64;
    let u_x2 = rank_sum_x2 - pos_u * (pos_u + 1);
    Ok(100.0 * (u_x2 as f64 / 2.0) / (pos as f64 * neg as f64))
}
