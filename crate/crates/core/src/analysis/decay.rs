//! Exponential decay-rate estimation.

use serde::Serialize;

use crate::error::{Result, SwarmError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub lambda_hat: f64,
    pub c_hat: f64,
    pub r_squared: f64,
    pub window: [f64; 2],
}

/// Least-squares fit of `log v = log C - λ t` over samples with `t` in
/// `window` (inclusive; `None` uses all samples). Nonpositive values are
/// skipped; fewer than two usable samples is [`SwarmError::WindowEmpty`].
pub fn fit_decay(times: &[f64], values: &[f64], window: Option<[f64; 2]>) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(SwarmError::InvalidArgument("times and values differ in length".into()));
    }
    let [lo, hi] = window.unwrap_or([f64::NEG_INFINITY, f64::INFINITY]);
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, v)| **t >= lo && **t <= hi && **v > 0.0 && v.is_finite())
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(SwarmError::WindowEmpty);
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if stt == 0.0 {
        return Err(SwarmError::WindowEmpty);
    }
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sty / stt;
    let icpt = my - slope * mt;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum();
    let r_squared = if ss_tot <= 1e-30 { 1.0 } else { 1.0 - ss_res / ss_tot };
    let window = [pts[0].0, pts[pts.len() - 1].0];
    Ok(DecayFit { lambda_hat: -slope, c_hat: icpt.exp(), r_squared, window })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential() {
        let ts: Vec<f64> = (0..20).map(|k| 0.1 * k as f64).collect();
        let vs: Vec<f64> = ts.iter().map(|t| 3.0 * (-2.0 * t).exp()).collect();
        let f = fit_decay(&ts, &vs, None).unwrap();
        assert!((f.lambda_hat - 2.0).abs() < 1e-10);
        assert!((f.c_hat - 3.0).abs() < 1e-10);
        assert!((f.r_squared - 1.0).abs() < 1e-10);
    }

    #[test]
    fn constant_series() {
        let ts = [0.0, 1.0, 2.0, 3.0];
        let f = fit_decay(&ts, &[0.5; 4], None).unwrap();
        assert!(f.lambda_hat.abs() < 1e-10);
        assert_eq!(f.r_squared, 1.0);
    }

    #[test]
    fn window_and_nonpositive_samples() {
        let ts = [0.0, 1.0, 2.0, 3.0];
        let vs = [1.0, 0.0, -1.0, 0.2];
        assert!(matches!(fit_decay(&ts, &vs, Some([0.5, 2.5])), Err(SwarmError::WindowEmpty)));
        let f = fit_decay(&ts, &vs, None).unwrap();
        assert_eq!(f.window, [0.0, 3.0]);
    }
}
