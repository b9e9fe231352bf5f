use super::Parameters;
use crate::Label;

const VARIANCE_FLOOR: f64 = 1e-9;

/// Gaussian class-conditional densities per feature.
pub(super) fn fit(x: &[Vec<f64>], y: &[Label]) -> Parameters {
    let d = x[0].len();
    let n = x.len() as f64;
    let mut log_priors = [0.0; 2];
    let mut means = [vec![0.0; d], vec![0.0; d]];
    let mut variances = [vec![0.0; d], vec![0.0; d]];
    for c in 0..2 {
        let rows: Vec<&Vec<f64>> = x.iter().zip(y).filter(|(_, l)| l.is_unsafe() as usize == c).map(|(r, _)| r).collect();
        let m = rows.len() as f64;
        log_priors[c] = (m / n).ln();
        for j in 0..d {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / m;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / m;
            means[c][j] = mean;
            variances[c][j] = var.max(VARIANCE_FLOOR);
        }
    }
    Parameters::NaiveBayes {
        log_priors,
        means,
        variances,
    }
}

fn log_likelihood(mean: &[f64], var: &[f64], x: &[f64]) -> f64 {
    x.iter()
        .zip(mean.iter().zip(var))
        .map(|(v, (m, s2))| -0.5 * ((2.0 * std::f64::consts::PI * s2).ln() + (v - m).powi(2) / s2))
        .sum()
}

/// `log P(unsafe | x) - log P(safe | x)`.
pub(super) fn log_odds(log_priors: &[f64; 2], means: &[Vec<f64>; 2], variances: &[Vec<f64>; 2], x: &[f64]) -> f64 {
    log_priors[1] + log_likelihood(&means[1], &variances[1], x)
        - log_priors[0]
        - log_likelihood(&means[0], &variances[0], x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_priors_and_moments() {
        let x = vec![vec![0.0], vec![2.0], vec![10.0], vec![14.0]];
        let y = vec![Label::Safe, Label::Safe, Label::Unsafe, Label::Unsafe];
        let Parameters::NaiveBayes { log_priors, means, variances } = fit(&x, &y) else { panic!() };
        assert_eq!(log_priors, [0.5f64.ln(), 0.5f64.ln()]);
        assert_eq!(means, [vec![1.0], vec![12.0]]);
        assert_eq!(variances, [vec![1.0], vec![4.0]]);
        assert!(log_odds(&log_priors, &means, &variances, &[1.0]) < 0.0);
        assert!(log_odds(&log_priors, &means, &variances, &[12.0]) > 0.0);
    }

    #[test]
    fn constant_feature_gets_floor() {
        let x = vec![vec![3.0], vec![3.0], vec![3.0], vec![5.0]];
        let y = vec![Label::Safe, Label::Safe, Label::Unsafe, Label::Unsafe];
        let Parameters::NaiveBayes { variances, .. } = fit(&x, &y) else { panic!() };
        assert_eq!(variances[0][0], VARIANCE_FLOOR);
    }
}
