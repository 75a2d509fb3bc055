//! SSIM and the SSIM-ratio evaluation protocol.
//!
//! Maps are min-max normalized before comparison so the dynamic range
//! is 1 throughout. Per image, the relevance map and the SR map are
//! each scored against the saliency map of the original image, and the
//! ratio SSIM(SR)/SSIM(LRP) is the reported statistic.

use crate::error::{Result, SrError};
use crate::tensor::{normalize_minmax, Tensor};

#[derive(Debug, Clone)]
pub struct SsimConfig {
    /// Odd window side; shrunk to fit when a map is smaller.
    pub window: usize,
    /// Gaussian weighting sigma within the window.
    pub sigma: f64,
    /// Dynamic range D; stabilizers are C1 = (0.01 D)^2, C2 = (0.03 D)^2.
    pub dynamic_range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            dynamic_range: 1.0,
        }
    }
}

impl SsimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(SrError::invalid(format!(
                "SSIM window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if !(self.dynamic_range > 0.0) {
            return Err(SrError::invalid("dynamic range must be positive".to_string()));
        }
        if !(self.sigma > 0.0) {
            return Err(SrError::invalid("SSIM sigma must be positive".to_string()));
        }
        Ok(())
    }

    pub fn c1(&self) -> f64 {
        (0.01 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (0.03 * self.dynamic_range).powi(2)
    }
}

/// One evaluated image: SSIM of the LRP map and of the SR map against
/// the reference saliency map, and their ratio when defined.
#[derive(Debug, Clone)]
pub struct EvalRecord {
    pub id: String,
    pub ssim_lrp: f64,
    pub ssim_sr: f64,
    /// None when SSIM of the LRP map is not positive.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct EvalSummary {
    pub count: usize,
    pub defined: usize,
    pub undefined: usize,
    pub mean_ratio: Option<f64>,
}

fn gaussian_window(side: usize, sigma: f64) -> Vec<f64> {
    let r = (side / 2) as f64;
    let mut w = Vec::with_capacity(side * side);
    for y in 0..side {
        for x in 0..side {
            let dy = y as f64 - r;
            let dx = x as f64 - r;
            w.push((-(dy * dy + dx * dx) / (2.0 * sigma * sigma)).exp());
        }
    }
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Mean structural similarity over Gaussian-weighted sliding windows.
pub fn ssim(a: &Tensor, b: &Tensor, cfg: &SsimConfig) -> Result<f64> {
    cfg.validate()?;
    if a.shape() != b.shape() {
        return Err(SrError::invalid(format!(
            "SSIM inputs differ in shape: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if a.shape().len() != 2 {
        return Err(SrError::invalid(format!(
            "SSIM expects [H, W] maps, got {:?}",
            a.shape()
        )));
    }
    let (h, w) = (a.shape()[0], a.shape()[1]);
    let mut side = cfg.window.min(h).min(w);
    if side % 2 == 0 {
        side -= 1;
    }
    if side < 1 {
        return Err(SrError::invalid("map too small for SSIM".to_string()));
    }
    let weights = gaussian_window(side, cfg.sigma);
    let c1 = cfg.c1();
    let c2 = cfg.c2();

    let da = a.data();
    let db = b.data();
    let mut total = 0.0;
    let mut windows = 0usize;
    for wy in 0..=(h - side) {
        for wx in 0..=(w - side) {
            let mut mu_a = 0.0;
            let mut mu_b = 0.0;
            let mut ea2 = 0.0;
            let mut eb2 = 0.0;
            let mut eab = 0.0;
            let mut wi = 0;
            for y in wy..wy + side {
                let row = y * w + wx;
                for x in 0..side {
                    let va = da[row + x];
                    let vb = db[row + x];
                    let wt = weights[wi];
                    wi += 1;
                    mu_a += wt * va;
                    mu_b += wt * vb;
                    ea2 += wt * va * va;
                    eb2 += wt * vb * vb;
                    eab += wt * va * vb;
                }
            }
            let var_a = ea2 - mu_a * mu_a;
            let var_b = eb2 - mu_b * mu_b;
            let cov = eab - mu_a * mu_b;
            let num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
            let den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
            total += num / den;
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

/// Score one image: both maps against the reference saliency map. All
/// three are min-max normalized first so raw scales do not matter.
pub fn evaluate_image(
    id: &str,
    lrp_map: &Tensor,
    sr_map: &Tensor,
    reference: &Tensor,
    cfg: &SsimConfig,
) -> Result<EvalRecord> {
    if lrp_map.shape() != sr_map.shape() || lrp_map.shape() != reference.shape() {
        return Err(SrError::invalid(format!(
            "map shapes differ: lrp {:?}, sr {:?}, reference {:?}",
            lrp_map.shape(),
            sr_map.shape(),
            reference.shape()
        )));
    }
    let reference = normalize_minmax(reference);
    let ssim_lrp = ssim(&normalize_minmax(lrp_map), &reference, cfg)?;
    let ssim_sr = ssim(&normalize_minmax(sr_map), &reference, cfg)?;
    let ratio = if ssim_lrp > 0.0 {
        Some(ssim_sr / ssim_lrp)
    } else {
        None
    };
    Ok(EvalRecord {
        id: id.to_string(),
        ssim_lrp,
        ssim_sr,
        ratio,
    })
}

/// Arithmetic mean of the defined ratios.
pub fn aggregate(records: &[EvalRecord]) -> EvalSummary {
    let mut summary = EvalSummary {
        count: records.len(),
        ..EvalSummary::default()
    };
    let mut sum = 0.0;
    for r in records {
        match r.ratio {
            Some(v) => {
                summary.defined += 1;
                sum += v;
            }
            None => summary.undefined += 1,
        }
    }
    if summary.defined > 0 {
        summary.mean_ratio = Some(sum / summary.defined as f64);
    }
    summary
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor(h: usize, w: usize, f: impl Fn(usize, usize) -> f64) -> Tensor {
        let mut t = Tensor::zeros(vec![h, w]);
        for y in 0..h {
            for x in 0..w {
                t.set2(y, x, f(y, x));
            }
        }
        t
    }

    #[test]
    fn ssim_of_identical_maps_is_exactly_one() {
        let cfg = SsimConfig::default();
        let a = tensor(16, 16, |y, x| ((y * 31 + x * 17) % 11) as f64 / 10.0);
        assert_eq!(ssim(&a, &a, &cfg).unwrap(), 1.0);
    }

    #[test]
    fn ssim_constant_zero_vs_one_matches_closed_form() {
        let cfg = SsimConfig::default();
        let a = Tensor::zeros(vec![16, 16]);
        let b = tensor(16, 16, |_, _| 1.0);
        let got = ssim(&a, &b, &cfg).unwrap();
        let c1 = cfg.c1();
        assert!((got - c1 / (1.0 + c1)).abs() < 1e-12);
    }

    #[test]
    fn ssim_is_symmetric() {
        let cfg = SsimConfig::default();
        let a = tensor(20, 14, |y, x| ((y * 13 + x * 7) % 17) as f64 / 16.0);
        let b = tensor(20, 14, |y, x| ((y * 5 + x * 11) % 13) as f64 / 12.0);
        let ab = ssim(&a, &b, &cfg).unwrap();
        let ba = ssim(&b, &a, &cfg).unwrap();
        assert!((ab - ba).abs() < 1e-15);
    }

    #[test]
    fn ssim_rejects_shape_mismatch() {
        let cfg = SsimConfig::default();
        let a = Tensor::zeros(vec![8, 8]);
        let b = Tensor::zeros(vec![8, 9]);
        assert!(ssim(&a, &b, &cfg).is_err());
    }

    #[test]
    fn identical_maps_give_unit_ratio() {
        let cfg = SsimConfig::default();
        let m = tensor(16, 16, |y, x| ((y + x) % 7) as f64 / 6.0);
        let reference = tensor(16, 16, |y, x| ((y * 3 + x) % 5) as f64 / 4.0);
        let rec = evaluate_image("t", &m, &m, &reference, &cfg).unwrap();
        assert_eq!(rec.ratio, Some(1.0));
    }

    #[test]
    fn ratio_invariant_under_joint_affine_rescale() {
        let cfg = SsimConfig::default();
        let a = tensor(16, 16, |y, x| ((y * 31 + x * 17) % 11) as f64 / 10.0);
        let b = tensor(16, 16, |y, x| ((y * 7 + x * 3) % 9) as f64 / 8.0);
        let r = tensor(16, 16, |y, x| ((y + 2 * x) % 13) as f64 / 12.0);
        let rec = evaluate_image("base", &a, &b, &r, &cfg).unwrap();

        let scale = |t: &Tensor| {
            let mut s = t.clone();
            for v in s.data_mut() {
                *v = 4.0 * *v + 3.0;
            }
            s
        };
        let rec2 = evaluate_image("scaled", &scale(&a), &scale(&b), &scale(&r), &cfg).unwrap();
        assert!((rec.ssim_lrp - rec2.ssim_lrp).abs() < 1e-12);
        assert!((rec.ssim_sr - rec2.ssim_sr).abs() < 1e-12);
    }

    #[test]
    fn documented_reference_rows() {
        // Reported values for the two worked examples; their ratios and
        // two-row mean follow arithmetically.
        assert!((0.5040_f64 / 0.2756 - 1.8287).abs() < 5e-4);
        assert!((0.0828_f64 / 0.0490 - 1.6898).abs() < 5e-4);
        let records = vec![
            EvalRecord {
                id: "parachute".to_string(),
                ssim_lrp: 0.2756,
                ssim_sr: 0.5040,
                ratio: Some(1.8287),
            },
            EvalRecord {
                id: "wood rabbit".to_string(),
                ssim_lrp: 0.0490,
                ssim_sr: 0.0828,
                ratio: Some(1.6898),
            },
        ];
        let summary = aggregate(&records);
        assert_eq!(summary.defined, 2);
        assert!((summary.mean_ratio.unwrap() - 1.75925).abs() < 1e-12);
    }

    #[test]
    fn aggregate_edge_cases() {
        assert_eq!(aggregate(&[]).count, 0);
        assert!(aggregate(&[]).mean_ratio.is_none());

        let single = vec![EvalRecord {
            id: "one".to_string(),
            ssim_lrp: 0.5,
            ssim_sr: 0.6,
            ratio: Some(1.2),
        }];
        assert!((aggregate(&single).mean_ratio.unwrap() - 1.2).abs() < 1e-15);

        let undefined = vec![EvalRecord {
            id: "u".to_string(),
            ssim_lrp: 0.0,
            ssim_sr: 0.1,
            ratio: None,
        }];
        let s = aggregate(&undefined);
        assert_eq!(s.defined, 0);
        assert_eq!(s.undefined, 1);
        assert!(s.mean_ratio.is_none());
    }
}
