//! Canny edge extraction and the SR-map overlay.

use crate::casal::SaliencyMap;
use crate::error::{Result, SrError};
use crate::tensor::{Image, Tensor};

/// Binary edge grid plus the inputs needed to audit it: thresholds and
/// the normalized gradient magnitudes.
#[derive(Debug, Clone)]
pub struct EdgeMap {
    pub edges: Vec<bool>,
    pub height: usize,
    pub width: usize,
    pub low: f64,
    pub high: f64,
    pub magnitudes: Tensor,
}

impl EdgeMap {
    pub fn edge_count(&self) -> usize {
        self.edges.iter().filter(|&&e| e).count()
    }

    #[inline]
    pub fn is_edge(&self, y: usize, x: usize) -> bool {
        self.edges[y * self.width + x]
    }

    pub fn to_image(&self) -> Image {
        let values = self
            .edges
            .iter()
            .map(|&e| if e { 0.0 } else { 1.0 })
            .collect();
        Image::new(self.height, self.width, 1, values).expect("valid binary image")
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    let mut k = Vec::with_capacity(2 * radius + 1);
    for i in 0..=2 * radius {
        let d = i as f64 - radius as f64;
        k.push((-d * d / (2.0 * sigma * sigma)).exp());
    }
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable blur with clamp-to-edge borders on an [H, W] grid.
fn gaussian_blur(gray: &Tensor, sigma: f64) -> Tensor {
    let (h, w) = (gray.shape()[0], gray.shape()[1]);
    let kernel = gaussian_kernel(sigma);
    let radius = kernel.len() / 2;
    let mut tmp = Tensor::zeros(vec![h, w]);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, k) in kernel.iter().enumerate() {
                let sx = (x as isize + i as isize - radius as isize).clamp(0, w as isize - 1);
                acc += k * gray.at2(y, sx as usize);
            }
            tmp.set2(y, x, acc);
        }
    }
    let mut out = Tensor::zeros(vec![h, w]);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, k) in kernel.iter().enumerate() {
                let sy = (y as isize + i as isize - radius as isize).clamp(0, h as isize - 1);
                acc += k * tmp.at2(sy as usize, x);
            }
            out.set2(y, x, acc);
        }
    }
    out
}

/// Canny: luma -> Gaussian blur -> Sobel -> 4-direction non-maximum
/// suppression -> double-threshold hysteresis. Thresholds apply to the
/// gradient magnitude normalized by its maximum.
pub fn canny(img: &Image, sigma: f64, low: f64, high: f64) -> Result<EdgeMap> {
    if !(low > 0.0) || high < low {
        return Err(SrError::invalid(format!(
            "thresholds must satisfy high >= low > 0, got low={low} high={high}"
        )));
    }
    if !(sigma > 0.0) {
        return Err(SrError::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let (h, w) = (img.height(), img.width());
    let blurred = gaussian_blur(&img.to_gray(), sigma);

    // Sobel gradients, replicated borders.
    let sample = |y: isize, x: isize| -> f64 {
        blurred.at2(
            y.clamp(0, h as isize - 1) as usize,
            x.clamp(0, w as isize - 1) as usize,
        )
    };
    let mut gx = Tensor::zeros(vec![h, w]);
    let mut gy = Tensor::zeros(vec![h, w]);
    let mut mag = Tensor::zeros(vec![h, w]);
    let mut peak = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            let (yi, xi) = (y as isize, x as isize);
            let dx = sample(yi - 1, xi + 1) + 2.0 * sample(yi, xi + 1) + sample(yi + 1, xi + 1)
                - sample(yi - 1, xi - 1)
                - 2.0 * sample(yi, xi - 1)
                - sample(yi + 1, xi - 1);
            let dy = sample(yi + 1, xi - 1) + 2.0 * sample(yi + 1, xi) + sample(yi + 1, xi + 1)
                - sample(yi - 1, xi - 1)
                - 2.0 * sample(yi - 1, xi)
                - sample(yi - 1, xi + 1);
            let m = dx.hypot(dy);
            gx.set2(y, x, dx);
            gy.set2(y, x, dy);
            mag.set2(y, x, m);
            peak = peak.max(m);
        }
    }
    // A flat image still carries ~1e-16 blur noise; normalizing by that
    // peak would promote it to full-scale edges.
    if peak > 1e-9 {
        for v in mag.data_mut() {
            *v /= peak;
        }
    } else {
        for v in mag.data_mut() {
            *v = 0.0;
        }
    }

    // Non-maximum suppression along the quantized gradient direction.
    let mut thin = Tensor::zeros(vec![h, w]);
    for y in 0..h {
        for x in 0..w {
            let m = mag.at2(y, x);
            if m == 0.0 {
                continue;
            }
            let mut angle = gy.at2(y, x).atan2(gx.at2(y, x)).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            let (dy, dx): (isize, isize) = if !(22.5..157.5).contains(&angle) {
                (0, 1)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (1, 0)
            } else {
                (1, -1)
            };
            let neighbor = |sy: isize, sx: isize| -> f64 {
                let (ny, nx) = (y as isize + sy, x as isize + sx);
                if ny < 0 || ny >= h as isize || nx < 0 || nx >= w as isize {
                    0.0
                } else {
                    mag.at2(ny as usize, nx as usize)
                }
            };
            if m >= neighbor(dy, dx) && m >= neighbor(-dy, -dx) {
                thin.set2(y, x, m);
            }
        }
    }

    // Hysteresis: grow from strong pixels through weak ones (8-neighborhood).
    let mut edges = vec![false; h * w];
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if thin.at2(y, x) >= high && !edges[y * w + x] {
                edges[y * w + x] = true;
                stack.push((y, x));
                while let Some((cy, cx)) = stack.pop() {
                    for dy in -1isize..=1 {
                        for dx in -1isize..=1 {
                            let (ny, nx) = (cy as isize + dy, cx as isize + dx);
                            if ny < 0 || ny >= h as isize || nx < 0 || nx >= w as isize {
                                continue;
                            }
                            let (ny, nx) = (ny as usize, nx as usize);
                            if !edges[ny * w + nx] && thin.at2(ny, nx) >= low {
                                edges[ny * w + nx] = true;
                                stack.push((ny, nx));
                            }
                        }
                    }
                }
            }
        }
    }

    Ok(EdgeMap {
        edges,
        height: h,
        width: w,
        low,
        high,
        magnitudes: mag,
    })
}

/// Overlay the SR map on the edge drawing: edges in dark gray on white,
/// red channel raised to the SR value where it exceeds the base.
pub fn fuse(sr: &SaliencyMap, edges: &EdgeMap) -> Result<Image> {
    let (h, w) = (edges.height, edges.width);
    if sr.values.shape() != [h, w] {
        return Err(SrError::invalid(format!(
            "SR map shape {:?} does not match edge map {}x{}",
            sr.values.shape(),
            h,
            w
        )));
    }
    let mut out = Image::constant(h, w, 3, 1.0)?;
    for y in 0..h {
        for x in 0..w {
            let base: f64 = if edges.is_edge(y, x) { 0.25 } else { 1.0 };
            let red = base.max(sr.values.at2(y, x).clamp(0.0, 1.0));
            out.set_pixel(y, x, 0, red);
            out.set_pixel(y, x, 1, base);
            out.set_pixel(y, x, 2, base);
        }
    }
    Ok(out)
}
