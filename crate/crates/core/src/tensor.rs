//! Dense row-major float tensors, [0,1] image containers, and the
//! resampling/color primitives the rest of the pipeline consumes.

use crate::error::{Result, SrError};

/// Dense N-dimensional array of f64 in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(SrError::invalid(format!(
                "tensor shape {shape:?} has a zero dimension"
            )));
        }
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(SrError::invalid(format!(
                "tensor data length {} does not match shape {:?} (expected {})",
                data.len(),
                shape,
                expected
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(SrError::Numeric(
                "tensor contains non-finite values".to_string(),
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn filled(shape: Vec<usize>, value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![value; n],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Reinterpret the buffer under a new shape of equal element count.
    pub fn reshape(&self, shape: Vec<usize>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != self.data.len() {
            return Err(SrError::invalid(format!(
                "cannot reshape {:?} ({} elements) to {:?} ({} elements)",
                self.shape,
                self.data.len(),
                shape,
                expected
            )));
        }
        Ok(Self {
            shape,
            data: self.data.clone(),
        })
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the largest element, ties broken by lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        best
    }

    pub fn assert_finite(&self, context: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(SrError::Numeric(format!(
                "non-finite values produced by {context}"
            )))
        }
    }
}

/// 2-D accessor helpers for [H, W] tensors.
impl Tensor {
    pub fn at2(&self, y: usize, x: usize) -> f64 {
        debug_assert_eq!(self.shape.len(), 2);
        self.data[y * self.shape[1] + x]
    }

    pub fn set2(&mut self, y: usize, x: usize, v: f64) {
        debug_assert_eq!(self.shape.len(), 2);
        self.data[y * self.shape[1] + x] = v;
    }
}

/// Raster image: [H, W, C] tensor with C in {1, 3} and values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Tensor,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(SrError::invalid(format!(
                "image must have 1 or 3 channels, got {channels}"
            )));
        }
        if height == 0 || width == 0 {
            return Err(SrError::invalid(format!(
                "image dimensions must be positive, got {height}x{width}"
            )));
        }
        let data = Tensor::new(vec![height, width, channels], values)?;
        if data.data().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(SrError::invalid(
                "image values must lie in [0,1]".to_string(),
            ));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn constant(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn tensor(&self) -> &Tensor {
        &self.data
    }

    pub fn into_tensor(self) -> Tensor {
        self.data
    }

    pub fn pixel(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data.data()[(y * self.width + x) * self.channels + c]
    }

    pub fn set_pixel(&mut self, y: usize, x: usize, c: usize, v: f64) {
        self.data.data_mut()[(y * self.width + x) * self.channels + c] = v;
    }

    /// Rec. 601 luma; identity for single-channel images and exact for
    /// achromatic pixels (the coefficients do not sum to 1 in floats).
    pub fn to_gray(&self) -> Tensor {
        let mut out = Tensor::zeros(vec![self.height, self.width]);
        for y in 0..self.height {
            for x in 0..self.width {
                let v = if self.channels == 1 {
                    self.pixel(y, x, 0)
                } else {
                    let r = self.pixel(y, x, 0);
                    let g = self.pixel(y, x, 1);
                    let b = self.pixel(y, x, 2);
                    if r == g && g == b {
                        r
                    } else {
                        0.299 * r + 0.587 * g + 0.114 * b
                    }
                };
                out.set2(y, x, v);
            }
        }
        out
    }

    /// Replicate a single channel into gray RGB; identity for RGB input.
    pub fn to_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        let mut values = Vec::with_capacity(self.height * self.width * 3);
        for v in self.data.data() {
            values.extend_from_slice(&[*v, *v, *v]);
        }
        Image {
            height: self.height,
            width: self.width,
            channels: 3,
            data: Tensor::new(vec![self.height, self.width, 3], values).expect("valid rgb"),
        }
    }

    /// Wrap an arbitrary [H, W] tensor as a gray image after min-max
    /// normalization. Degenerate constant maps become all-black.
    pub fn from_map(map: &Tensor) -> Result<Self> {
        if map.shape().len() != 2 {
            return Err(SrError::invalid(format!(
                "expected an [H, W] map, got shape {:?}",
                map.shape()
            )));
        }
        let norm = normalize_minmax(map);
        Image::new(map.shape()[0], map.shape()[1], 1, norm.into_data())
    }
}

/// Bilinear resize with half-pixel-center alignment. Resizing to the
/// source dimensions is the identity map, element-exact.
pub fn resize_bilinear(img: &Image, new_h: usize, new_w: usize) -> Result<Image> {
    if new_h == 0 || new_w == 0 {
        return Err(SrError::invalid(format!(
            "resize target {new_h}x{new_w} has a zero dimension"
        )));
    }
    let (h, w, c) = (img.height(), img.width(), img.channels());
    if new_h == h && new_w == w {
        return Ok(img.clone());
    }
    let scale_y = h as f64 / new_h as f64;
    let scale_x = w as f64 / new_w as f64;
    let mut values = vec![0.0; new_h * new_w * c];
    for oy in 0..new_h {
        let sy = ((oy as f64 + 0.5) * scale_y - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let ty = sy - y0 as f64;
        for ox in 0..new_w {
            let sx = ((ox as f64 + 0.5) * scale_x - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let tx = sx - x0 as f64;
            for ch in 0..c {
                let top = img.pixel(y0, x0, ch) * (1.0 - tx) + img.pixel(y0, x1, ch) * tx;
                let bot = img.pixel(y1, x0, ch) * (1.0 - tx) + img.pixel(y1, x1, ch) * tx;
                let v = top * (1.0 - ty) + bot * ty;
                values[(oy * new_w + ox) * c + ch] = v.clamp(0.0, 1.0);
            }
        }
    }
    Image::new(new_h, new_w, c, values)
}

// sRGB D65 linear-light matrix. The white point is taken as the matrix
// applied to (1,1,1) so that every gray pixel maps to a = b = 0.
const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// sRGB in [0,1] to CIE L*a*b* under D65. L in [0,100].
pub fn rgb_to_lab(img: &Image) -> Result<Image> {
    if img.channels() != 3 {
        return Err(SrError::invalid(
            "rgb_to_lab requires a 3-channel image".to_string(),
        ));
    }
    let (h, w) = (img.height(), img.width());
    let wp: Vec<f64> = SRGB_TO_XYZ.iter().map(|row| row.iter().sum()).collect();
    let mut out = Tensor::zeros(vec![h, w, 3]);
    for y in 0..h {
        for x in 0..w {
            let r = srgb_to_linear(img.pixel(y, x, 0));
            let g = srgb_to_linear(img.pixel(y, x, 1));
            let b = srgb_to_linear(img.pixel(y, x, 2));
            let mut f_xyz = [0.0; 3];
            for (i, row) in SRGB_TO_XYZ.iter().enumerate() {
                let v = row[0] * r + row[1] * g + row[2] * b;
                f_xyz[i] = lab_f(v / wp[i]);
            }
            let idx = (y * w + x) * 3;
            out.data_mut()[idx] = 116.0 * f_xyz[1] - 16.0;
            out.data_mut()[idx + 1] = 500.0 * (f_xyz[0] - f_xyz[1]);
            out.data_mut()[idx + 2] = 200.0 * (f_xyz[1] - f_xyz[2]);
        }
    }
    // Lab images carry values outside [0,1]; bypass the Image range check.
    Ok(Image {
        height: h,
        width: w,
        channels: 3,
        data: out,
    })
}

/// Affine rescale to [0,1]; constant input maps to all zeros.
pub fn normalize_minmax(t: &Tensor) -> Tensor {
    let lo = t.min();
    let hi = t.max();
    let mut out = t.clone();
    if hi > lo {
        let inv = hi - lo;
        for v in out.data_mut() {
            *v = (*v - lo) / inv;
        }
    } else {
        for v in out.data_mut() {
            *v = 0.0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(h: usize, w: usize, values: Vec<f64>) -> Image {
        Image::new(h, w, 1, values).unwrap()
    }

    #[test]
    fn tensor_rejects_mismatched_data() {
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor::new(vec![2, 0], vec![]).is_err());
        assert!(Tensor::new(vec![2], vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn resize_constant_image() {
        let img = Image::constant(4, 4, 1, 0.5).unwrap();
        let out = resize_bilinear(&img, 2, 2).unwrap();
        assert_eq!(out.height(), 2);
        assert_eq!(out.width(), 2);
        for &v in out.tensor().data() {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn resize_identity_is_exact() {
        let img = gray(2, 2, vec![0.1, 0.9, 0.3, 0.7]);
        let out = resize_bilinear(&img, 2, 2).unwrap();
        assert_eq!(out.tensor().data(), img.tensor().data());
    }

    #[test]
    fn resize_column_upsample_matches_hand_values() {
        // Half-pixel centers: 2x1 [0, 1] -> 3x1 [0, 0.5, 1].
        let img = gray(2, 1, vec![0.0, 1.0]);
        let out = resize_bilinear(&img, 3, 1).unwrap();
        let expect = [0.0, 0.5, 1.0];
        for (v, e) in out.tensor().data().iter().zip(expect) {
            assert!((v - e).abs() < 1e-12, "got {v}, want {e}");
        }
    }

    #[test]
    fn resize_rejects_zero_target() {
        let img = Image::constant(2, 2, 1, 0.5).unwrap();
        assert!(resize_bilinear(&img, 0, 2).is_err());
        assert!(resize_bilinear(&img, 2, 0).is_err());
    }

    #[test]
    fn lab_white_black_and_midgray() {
        let white = Image::constant(1, 1, 3, 1.0).unwrap();
        let lab = rgb_to_lab(&white).unwrap();
        assert!((lab.pixel(0, 0, 0) - 100.0).abs() < 1e-9);
        assert!(lab.pixel(0, 0, 1).abs() < 1e-9);
        assert!(lab.pixel(0, 0, 2).abs() < 1e-9);

        let black = Image::constant(1, 1, 3, 0.0).unwrap();
        let lab = rgb_to_lab(&black).unwrap();
        assert!(lab.pixel(0, 0, 0).abs() < 1e-9);
        assert!(lab.pixel(0, 0, 1).abs() < 1e-9);
        assert!(lab.pixel(0, 0, 2).abs() < 1e-9);

        // Frozen from the sRGB -> XYZ -> Lab reference formulas.
        let mid = Image::constant(1, 1, 3, 0.5).unwrap();
        let lab = rgb_to_lab(&mid).unwrap();
        assert!((lab.pixel(0, 0, 0) - 53.38897).abs() < 1e-3);
        assert!(lab.pixel(0, 0, 1).abs() < 1e-6);
        assert!(lab.pixel(0, 0, 2).abs() < 1e-6);
    }

    #[test]
    fn lab_rejects_single_channel() {
        let img = Image::constant(2, 2, 1, 0.5).unwrap();
        assert!(rgb_to_lab(&img).is_err());
    }

    #[test]
    fn lab_gray_pixels_have_zero_chroma() {
        for i in 0..=20 {
            let v = i as f64 / 20.0;
            let img = Image::constant(1, 1, 3, v).unwrap();
            let lab = rgb_to_lab(&img).unwrap();
            assert!(lab.pixel(0, 0, 1).abs() < 1e-6, "a at gray {v}");
            assert!(lab.pixel(0, 0, 2).abs() < 1e-6, "b at gray {v}");
        }
    }

    #[test]
    fn normalize_examples() {
        let t = Tensor::new(vec![3], vec![2.0, 4.0, 6.0]).unwrap();
        assert_eq!(normalize_minmax(&t).data(), &[0.0, 0.5, 1.0]);

        let t = Tensor::new(vec![3], vec![5.0, 5.0, 5.0]).unwrap();
        assert_eq!(normalize_minmax(&t).data(), &[0.0, 0.0, 0.0]);

        let t = Tensor::new(vec![3], vec![-1.0, 0.0, 3.0]).unwrap();
        assert_eq!(normalize_minmax(&t).data(), &[0.0, 0.25, 1.0]);
    }

    #[test]
    fn normalize_is_idempotent() {
        let t = Tensor::new(vec![5], vec![0.3, -2.0, 7.5, 1.0, 0.0]).unwrap();
        let once = normalize_minmax(&t);
        let twice = normalize_minmax(&once);
        assert_eq!(once.data(), twice.data());
    }

    #[test]
    fn argmax_breaks_ties_low() {
        let t = Tensor::new(vec![4], vec![0.5, 0.5, 0.2, 0.5]).unwrap();
        assert_eq!(t.argmax(), 0);
    }
}
