use crate::error::{Error, Result};

fn check_pair(op: &'static str, a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::dim(op, format!("lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::arg(format!("{op} of empty series")));
    }
    Ok(())
}

/// Mean absolute difference.
pub fn l1_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_pair("l1_loss", pred, target)?;
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

/// `∂L/∂pred`: `sign(pred − target)/B`, with 0 at exact ties.
pub fn l1_loss_backward(pred: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    check_pair("l1_loss", pred, target)?;
    let scale = 1.0 / pred.len() as f64;
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| match p.partial_cmp(t) {
            Some(std::cmp::Ordering::Greater) => scale,
            Some(std::cmp::Ordering::Less) => -scale,
            _ => 0.0,
        })
        .collect())
}

/// Mean absolute error between two RUL series.
pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair("mae", actual, predicted)?;
    Ok(actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p).abs())
        .sum::<f64>()
        / actual.len() as f64)
}
