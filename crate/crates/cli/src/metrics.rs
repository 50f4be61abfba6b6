use anyhow::bail;

pub fn accuracy(predicted: &[usize], actual: &[usize]) -> anyhow::Result<f64> {
    if predicted.len() != actual.len() || actual.is_empty() {
        bail!("accuracy needs equal-length, non-empty label vectors");
    }
    let hits = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    Ok(hits as f64 / actual.len() as f64)
}

/// Area under the ROC curve as the Mann-Whitney statistic: the chance a
/// random positive outscores a random negative, ties counting half.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> anyhow::Result<f64> {
    if scores.len() != positive.len() {
        bail!("scores and labels differ in length");
    }
    let pos: Vec<f64> = scores.iter().zip(positive).filter(|(_, &p)| p).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(positive).filter(|(_, &p)| !p).map(|(s, _)| *s).collect();
    if pos.is_empty() || neg.is_empty() {
        bail!("ROC-AUC needs both classes present");
    }
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 };
        }
    }
    Ok(wins / (pos.len() * neg.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_extremes_and_ties() {
        let labels = [false, false, true, true];
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &labels).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &labels).unwrap(), 0.0);
        assert_eq!(roc_auc(&[0.5; 4], &labels).unwrap(), 0.5);
        // one positive below one negative: 3 of 4 pairs ordered
        assert_eq!(roc_auc(&[0.1, 0.6, 0.5, 0.9], &labels).unwrap(), 0.75);
        assert!(roc_auc(&[0.1], &[true]).is_err());
    }

    #[test]
    fn accuracy_counts_hits() {
        assert_eq!(accuracy(&[0, 1, 1, 0], &[0, 1, 0, 0]).unwrap(), 0.75);
        assert!(accuracy(&[], &[]).is_err());
    }
}
