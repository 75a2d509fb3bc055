//! Context-aware saliency detection.
//!
//! A pixel is salient when the patch around it is dissimilar from its K
//! most similar patches, judged across scales. Dissimilarity divides
//! Lab color distance by a position term, so repeated texture far away
//! counts as strong evidence against saliency:
//!
//! ```text
//! d(p_i, p_j) = d_color(p_i, p_j) / (1 + c * d_position(p_i, p_j))
//! S_i = 1 - exp(-mean of the K smallest d)
//! ```
//!
//! Per-scale maps are averaged, then pixels outside the attended set
//! (mean saliency above the attention threshold) are damped by their
//! distance to the nearest attended pixel.
//!
//! Two search paths produce the K-set: an exhaustive scan over every
//! candidate patch and an optimized scan with norm-bound pruning and
//! early abandonment. Both visit candidates in the same order and
//! compute surviving dissimilarities with identical arithmetic, so the
//! optimized path returns the same means as the reference.

use crate::error::{Result, SrError};
use crate::tensor::{normalize_minmax, resize_bilinear, rgb_to_lab, Image, Tensor};
use rayon::prelude::*;
use std::collections::BinaryHeap;

/// Relative scales of the comparison patches within one single-scale pass.
const CANDIDATE_SCALES: [f64; 3] = [1.0, 0.5, 0.25];

#[derive(Debug, Clone)]
pub struct SaliencyConfig {
    /// Patches are (2r+1) x (2r+1) squares centered on each pixel.
    pub patch_radius: usize,
    /// Position penalty constant c; larger c forgives distant matches less.
    pub position_weight: f64,
    /// Number of most-similar patches averaged per pixel.
    pub k_nearest: usize,
    /// Image scales whose saliency maps are averaged.
    pub scales: Vec<f64>,
    /// Pixels with mean saliency above this form the attended set.
    pub attention_threshold: f64,
    /// Width the input is resized to before the patch search.
    pub working_width: usize,
}

impl Default for SaliencyConfig {
    fn default() -> Self {
        Self {
            patch_radius: 3,
            position_weight: 3.0,
            k_nearest: 64,
            scales: vec![1.0, 0.5, 0.25],
            attention_threshold: 0.8,
            working_width: 250,
        }
    }
}

impl SaliencyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_nearest < 1 {
            return Err(SrError::invalid("K must be at least 1".to_string()));
        }
        if self.position_weight < 0.0 {
            return Err(SrError::invalid("c must be non-negative".to_string()));
        }
        if self.scales.is_empty() || self.scales.iter().any(|&s| !(s > 0.0 && s <= 1.0)) {
            return Err(SrError::invalid(
                "scales must be nonempty with each value in (0,1]".to_string(),
            ));
        }
        if !(self.attention_threshold > 0.0 && self.attention_threshold < 1.0) {
            return Err(SrError::invalid(
                "attention threshold must lie in (0,1)".to_string(),
            ));
        }
        if self.working_width == 0 {
            return Err(SrError::invalid("working width must be positive".to_string()));
        }
        Ok(())
    }
}

/// Saliency values in [0,1] plus the attended mask (row-major [H, W]).
#[derive(Debug, Clone)]
pub struct SaliencyMap {
    pub values: Tensor,
    pub attended_mask: Vec<bool>,
    /// Candidates actually averaged per pixel (< K on tiny images).
    pub used_k: usize,
}

/// One single-scale map at the resolution it was computed at.
#[derive(Debug, Clone)]
pub struct ScaleSaliency {
    pub values: Tensor,
    pub used_k: usize,
}

/// d_color / (1 + c * d_position).
#[inline]
pub fn dissimilarity(d_color: f64, d_position: f64, c: f64) -> f64 {
    d_color / (1.0 + c * d_position)
}

/// A vectorized Lab patch (L,a,b triplet per pixel); `center` is in
/// units of the image diagonal.
#[derive(Debug, Clone)]
pub struct Patch {
    pub values: Vec<f64>,
    pub center: (f64, f64),
}

impl Patch {
    /// Pixels in the patch; color distance is normalized by this count.
    pub fn pixel_count(&self) -> usize {
        (self.values.len() / 3).max(1)
    }
}

/// Dissimilarity between two equally sized patches: Euclidean color
/// distance normalized by the pixel count over the position penalty.
pub fn patch_dissimilarity(a: &Patch, b: &Patch, c: f64) -> Result<f64> {
    if a.values.len() != b.values.len() {
        return Err(SrError::invalid(format!(
            "patch sizes differ: {} vs {}",
            a.values.len(),
            b.values.len()
        )));
    }
    let d_color = sum_sq_diff(&a.values, &b.values).sqrt() / a.pixel_count() as f64;
    let d_pos = ((a.center.0 - b.center.0).powi(2) + (a.center.1 - b.center.1).powi(2)).sqrt();
    Ok(dissimilarity(d_color, d_pos, c))
}

#[inline]
fn sum_sq_diff(a: &[f64], b: &[f64]) -> f64 {
    let mut ssq = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        ssq += d * d;
    }
    ssq
}

/// Same accumulation order as `sum_sq_diff`, abandoning once the running
/// sum can no longer fall below `limit`. Returns None when abandoned.
#[inline]
fn sum_sq_diff_bounded(a: &[f64], b: &[f64], limit: f64) -> Option<f64> {
    let mut ssq = 0.0;
    let mut i = 0;
    let n = a.len();
    while i < n {
        let stop = (i + 16).min(n);
        while i < stop {
            let d = a[i] - b[i];
            ssq += d * d;
            i += 1;
        }
        if ssq >= limit && i < n {
            return None;
        }
    }
    Some(ssq)
}

/// Diagonal between extreme pixel centers.
#[inline]
fn grid_diagonal(h: usize, w: usize) -> f64 {
    let dy = (h.saturating_sub(1)) as f64;
    let dx = (w.saturating_sub(1)) as f64;
    (dy * dy + dx * dx).sqrt().max(f64::MIN_POSITIVE)
}

// ---------------------------------------------------------------------
// Patch stores
// ---------------------------------------------------------------------

/// Patches of one pyramid level in a blocked layout: `values` holds
/// `count` consecutive vectors of `len` floats, centers pre-divided by
/// the base-level diagonal for the position term.
struct PatchStore {
    len: usize,
    count: usize,
    values: Vec<f64>,
    centers: Vec<(f64, f64)>,
    norms: Vec<f64>,
}

impl PatchStore {
    #[inline]
    fn patch(&self, idx: usize) -> &[f64] {
        &self.values[idx * self.len..(idx + 1) * self.len]
    }
}

/// Extract clamped (2r+1)^2 Lab patches for every pixel of `lab`, with
/// centers mapped into base-level coordinates and divided by its diagonal.
fn build_store(lab: &Image, radius: usize, base_h: usize, base_w: usize) -> PatchStore {
    let (h, w) = (lab.height(), lab.width());
    let side = 2 * radius + 1;
    let len = side * side * 3;
    let diag = grid_diagonal(base_h, base_w);
    let fy = h as f64 / base_h as f64;
    let fx = w as f64 / base_w as f64;
    let mut values = Vec::with_capacity(h * w * len);
    let mut centers = Vec::with_capacity(h * w);
    let mut norms = Vec::with_capacity(h * w);
    let r = radius as isize;
    for y in 0..h {
        for x in 0..w {
            let start = values.len();
            for dy in -r..=r {
                let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                for dx in -r..=r {
                    let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    values.push(lab.pixel(sy, sx, 0));
                    values.push(lab.pixel(sy, sx, 1));
                    values.push(lab.pixel(sy, sx, 2));
                }
            }
            let norm = values[start..].iter().map(|v| v * v).sum::<f64>().sqrt();
            norms.push(norm);
            // Half-pixel mapping of this level's center into base coords.
            let by = (y as f64 + 0.5) / fy - 0.5;
            let bx = (x as f64 + 0.5) / fx - 0.5;
            centers.push((by / diag, bx / diag));
        }
    }
    PatchStore {
        len,
        count: h * w,
        values,
        centers,
        norms,
    }
}

fn candidate_pyramid(scaled: &Image, radius: usize) -> Result<Vec<PatchStore>> {
    let (h, w) = (scaled.height(), scaled.width());
    let mut stores = Vec::with_capacity(CANDIDATE_SCALES.len());
    for &f in &CANDIDATE_SCALES {
        let lh = ((h as f64 * f).round() as usize).max(1);
        let lw = ((w as f64 * f).round() as usize).max(1);
        let level = resize_bilinear(scaled, lh, lw)?;
        let lab = rgb_to_lab(&level)?;
        stores.push(build_store(&lab, radius, h, w));
    }
    Ok(stores)
}

// ---------------------------------------------------------------------
// K most similar patches
// ---------------------------------------------------------------------

/// Max-heap entry; dissimilarities are always finite.
#[derive(PartialEq)]
struct HeapF(f64);

impl Eq for HeapF {}

impl PartialOrd for HeapF {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapF {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.partial_cmp(&other.0).expect("finite dissimilarity")
    }
}

struct KSmallest {
    k: usize,
    heap: BinaryHeap<HeapF>,
}

impl KSmallest {
    fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    #[inline]
    fn threshold(&self) -> Option<f64> {
        if self.heap.len() == self.k {
            self.heap.peek().map(|h| h.0)
        } else {
            None
        }
    }

    #[inline]
    fn offer(&mut self, d: f64) {
        if self.heap.len() < self.k {
            self.heap.push(HeapF(d));
        } else if d < self.heap.peek().expect("nonempty").0 {
            self.heap.pop();
            self.heap.push(HeapF(d));
        }
    }

    /// (mean dissimilarity, count). Sorted before summing so the two
    /// search paths reduce in the same order.
    fn finish(self) -> (f64, usize) {
        let mut items: Vec<f64> = self.heap.into_iter().map(|h| h.0).collect();
        if items.is_empty() {
            return (0.0, 0);
        }
        items.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let sum: f64 = items.iter().sum();
        (sum / items.len() as f64, items.len())
    }
}

fn saliency_at_pixel(
    query_idx: usize,
    stores: &[PatchStore],
    cfg: &SaliencyConfig,
    exhaustive: bool,
) -> (f64, usize) {
    let base = &stores[0];
    let q = base.patch(query_idx);
    let (qy, qx) = base.centers[query_idx];
    let q_norm = base.norms[query_idx];
    let n_pixels = (base.len / 3) as f64;
    let inv_len = 1.0 / n_pixels;
    let c = cfg.position_weight;

    let mut best = KSmallest::new(cfg.k_nearest);
    for (level, store) in stores.iter().enumerate() {
        for j in 0..store.count {
            if level == 0 && j == query_idx {
                continue;
            }
            let (cy, cx) = store.centers[j];
            let d_pos = ((qy - cy).powi(2) + (qx - cx).powi(2)).sqrt();
            let denom = 1.0 + c * d_pos;
            let ssq = if exhaustive {
                sum_sq_diff(q, store.patch(j))
            } else {
                match best.threshold() {
                    None => sum_sq_diff(q, store.patch(j)),
                    Some(tau) => {
                        // d >= tau is never inserted; prune on the norm
                        // bound, then abandon the sum once it proves it.
                        let norm_gap = (q_norm - store.norms[j]).abs() * inv_len / denom;
                        if norm_gap >= tau {
                            continue;
                        }
                        let limit = tau * denom * n_pixels;
                        match sum_sq_diff_bounded(q, store.patch(j), limit * limit) {
                            Some(ssq) => ssq,
                            None => continue,
                        }
                    }
                }
            };
            let d = dissimilarity(ssq.sqrt() * inv_len, d_pos, c);
            best.offer(d);
        }
    }
    let (mean, used) = best.finish();
    (1.0 - (-mean).exp(), used)
}

fn single_scale_impl(
    img: &Image,
    scale: f64,
    cfg: &SaliencyConfig,
    exhaustive: bool,
) -> Result<ScaleSaliency> {
    cfg.validate()?;
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(SrError::invalid(format!("scale {scale} not in (0,1]")));
    }
    let sh = ((img.height() as f64 * scale).round() as usize).max(1);
    let sw = ((img.width() as f64 * scale).round() as usize).max(1);
    let scaled = resize_bilinear(&img.to_rgb(), sh, sw)?;
    let stores = candidate_pyramid(&scaled, cfg.patch_radius)?;

    let results: Vec<(f64, usize)> = (0..sh * sw)
        .into_par_iter()
        .map(|i| saliency_at_pixel(i, &stores, cfg, exhaustive))
        .collect();
    let used_k = results.iter().map(|r| r.1).min().unwrap_or(0);
    let values = Tensor::new(vec![sh, sw], results.into_iter().map(|r| r.0).collect())?;
    Ok(ScaleSaliency { values, used_k })
}

/// Single-scale saliency with the pruned search path. The returned map
/// is at the scaled resolution.
pub fn single_scale_saliency(img: &Image, scale: f64, cfg: &SaliencyConfig) -> Result<ScaleSaliency> {
    single_scale_impl(img, scale, cfg, false)
}

/// Exhaustive O(n^2) reference for the same computation.
pub fn single_scale_saliency_ref(
    img: &Image,
    scale: f64,
    cfg: &SaliencyConfig,
) -> Result<ScaleSaliency> {
    single_scale_impl(img, scale, cfg, true)
}

/// Mean of the per-scale maps, each upsampled back to the input size.
pub fn multi_scale_saliency(img: &Image, cfg: &SaliencyConfig) -> Result<ScaleSaliency> {
    cfg.validate()?;
    let (h, w) = (img.height(), img.width());
    let mut acc = Tensor::zeros(vec![h, w]);
    let mut used_k = usize::MAX;
    for &scale in &cfg.scales {
        let single = single_scale_saliency(img, scale, cfg)?;
        used_k = used_k.min(single.used_k);
        let up = resize_bilinear(
            &Image::new(
                single.values.shape()[0],
                single.values.shape()[1],
                1,
                single.values.data().to_vec(),
            )?,
            h,
            w,
        )?;
        for (a, v) in acc.data_mut().iter_mut().zip(up.tensor().data()) {
            *a += v;
        }
    }
    let m = cfg.scales.len() as f64;
    for v in acc.data_mut() {
        *v /= m;
    }
    Ok(ScaleSaliency {
        values: acc,
        used_k,
    })
}

/// Exact squared Euclidean distance transform (lower-envelope passes
/// over columns then rows) from the seed set.
fn distance_transform(seeds: &[bool], h: usize, w: usize) -> Vec<f64> {
    // 1-D pass: out[q] = min_p (q - p)^2 + f[p], infinite f[p] skipped.
    fn dt_1d(f: &[f64], out: &mut Vec<f64>) {
        let n = f.len();
        out.clear();
        out.resize(n, f64::INFINITY);
        let mut v = vec![0usize; n];
        let mut z = vec![0.0f64; n + 1];
        let mut k = 0usize;
        let mut started = false;
        for q in 0..n {
            if !f[q].is_finite() {
                continue;
            }
            if !started {
                started = true;
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                continue;
            }
            let mut s;
            loop {
                let p = v[k];
                s = (f[q] + (q * q) as f64 - f[p] - (p * p) as f64)
                    / (2.0 * (q as f64 - p as f64));
                if s <= z[k] {
                    k -= 1;
                } else {
                    break;
                }
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
        }
        if !started {
            return;
        }
        let mut j = 0usize;
        for q in 0..n {
            while z[j + 1] < q as f64 {
                j += 1;
            }
            let p = v[j];
            let d = q as f64 - p as f64;
            out[q] = d * d + f[p];
        }
    }

    let mut grid: Vec<f64> = seeds
        .iter()
        .map(|&s| if s { 0.0 } else { f64::INFINITY })
        .collect();
    let mut col = vec![0.0; h];
    let mut buf = Vec::new();
    // Columns first, then rows.
    for x in 0..w {
        for y in 0..h {
            col[y] = grid[y * w + x];
        }
        dt_1d(&col, &mut buf);
        for y in 0..h {
            grid[y * w + x] = buf[y];
        }
    }
    let mut row = vec![0.0; w];
    for y in 0..h {
        row.copy_from_slice(&grid[y * w..(y + 1) * w]);
        dt_1d(&row, &mut buf);
        grid[y * w..(y + 1) * w].copy_from_slice(&buf);
    }
    grid
}

/// Damp non-attended pixels by distance to the nearest attended pixel:
/// `S_i = Sbar_i * (1 - d_foci)`. Attended pixels keep their value; a
/// map with no pixel above the threshold passes through unchanged.
pub fn immediate_context(sbar: &Tensor, cfg: &SaliencyConfig) -> Result<SaliencyMap> {
    cfg.validate()?;
    if sbar.shape().len() != 2 {
        return Err(SrError::invalid(format!(
            "expected an [H, W] map, got {:?}",
            sbar.shape()
        )));
    }
    let (h, w) = (sbar.shape()[0], sbar.shape()[1]);
    let attended: Vec<bool> = sbar
        .data()
        .iter()
        .map(|&v| v > cfg.attention_threshold)
        .collect();
    if !attended.iter().any(|&a| a) {
        return Ok(SaliencyMap {
            values: sbar.clone(),
            attended_mask: attended,
            used_k: cfg.k_nearest,
        });
    }
    let diag = grid_diagonal(h, w);
    let sq_dist = distance_transform(&attended, h, w);
    let mut values = sbar.clone();
    for (i, v) in values.data_mut().iter_mut().enumerate() {
        if !attended[i] {
            let d_foci = (sq_dist[i].sqrt() / diag).min(1.0);
            *v *= 1.0 - d_foci;
        }
    }
    Ok(SaliencyMap {
        values,
        attended_mask: attended,
        used_k: cfg.k_nearest,
    })
}

/// The full detector: resize to the working width, average single-scale
/// maps, apply immediate context, return to the input size, normalize.
/// Single-channel inputs are min-max normalized and replicated to gray
/// RGB before the Lab conversion.
pub fn context_aware_saliency(img: &Image, cfg: &SaliencyConfig) -> Result<SaliencyMap> {
    cfg.validate()?;
    let (h0, w0) = (img.height(), img.width());
    let rgb = if img.channels() == 1 {
        let norm = normalize_minmax(img.tensor());
        Image::new(h0, w0, 1, norm.into_data())?.to_rgb()
    } else {
        img.clone()
    };
    let f = cfg.working_width as f64 / w0 as f64;
    let wh = ((h0 as f64 * f).round() as usize).max(1);
    let working = resize_bilinear(&rgb, wh, cfg.working_width)?;

    let sbar = multi_scale_saliency(&working, cfg)?;
    let context = immediate_context(&sbar.values, cfg)?;

    let up = |t: &Tensor| -> Result<Tensor> {
        let img = Image::new(t.shape()[0], t.shape()[1], 1, t.data().to_vec())?;
        resize_bilinear(&img, h0, w0)?
            .into_tensor()
            .reshape(vec![h0, w0])
    };
    let values = normalize_minmax(&up(&context.values)?);
    let sbar_up = up(&sbar.values)?;
    let attended_mask = sbar_up
        .data()
        .iter()
        .map(|&v| v > cfg.attention_threshold)
        .collect();
    Ok(SaliencyMap {
        values,
        attended_mask,
        used_k: sbar.used_k,
    })
}

/// Saliency of a scalar map (a relevance map) instead of an image.
pub fn saliency_of_map(map: &Tensor, cfg: &SaliencyConfig) -> Result<SaliencyMap> {
    context_aware_saliency(&Image::from_map(map)?, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> SaliencyConfig {
        SaliencyConfig {
            patch_radius: 1,
            k_nearest: 8,
            working_width: 16,
            ..SaliencyConfig::default()
        }
    }

    #[test]
    fn config_rejects_bad_values() {
        let mut cfg = SaliencyConfig::default();
        cfg.k_nearest = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = SaliencyConfig::default();
        cfg.scales = vec![1.5];
        assert!(cfg.validate().is_err());
        let mut cfg = SaliencyConfig::default();
        cfg.attention_threshold = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = SaliencyConfig::default();
        cfg.position_weight = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn dissimilarity_formula_examples() {
        assert_eq!(dissimilarity(0.0, 0.0, 3.0), 0.0);
        assert_eq!(dissimilarity(1.0, 0.0, 7.0), 1.0);
        let d = dissimilarity(6.0, 2.0, 3.0);
        assert!((d - 6.0 / 7.0).abs() < 1e-12);
        // A K-mean of ln 2 maps to saliency 0.5.
        let mean = 2.0_f64.ln();
        assert!((1.0 - (-mean).exp() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn patch_dissimilarity_is_symmetric_and_zero_on_self() {
        let a = Patch {
            values: vec![1.0, 2.0, 3.0],
            center: (0.1, 0.2),
        };
        let b = Patch {
            values: vec![4.0, 0.0, 3.0],
            center: (0.4, 0.6),
        };
        let ab = patch_dissimilarity(&a, &b, 3.0).unwrap();
        let ba = patch_dissimilarity(&b, &a, 3.0).unwrap();
        assert!((ab - ba).abs() < 1e-15);
        assert_eq!(patch_dissimilarity(&a, &a, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn patch_dissimilarity_rejects_size_mismatch() {
        let a = Patch {
            values: vec![1.0; 3],
            center: (0.0, 0.0),
        };
        let b = Patch {
            values: vec![1.0; 6],
            center: (0.0, 0.0),
        };
        assert!(patch_dissimilarity(&a, &b, 1.0).is_err());
    }

    #[test]
    fn position_weight_never_increases_dissimilarity() {
        for c in [0.0, 0.5, 1.0, 3.0, 10.0] {
            let d = dissimilarity(2.0, 0.7, c);
            let d_more = dissimilarity(2.0, 0.7, c + 1.0);
            assert!(d_more <= d + 1e-15);
        }
    }

    #[test]
    fn uniform_image_has_zero_saliency() {
        let img = Image::constant(12, 12, 3, 0.4).unwrap();
        let map = single_scale_saliency(&img, 1.0, &small_cfg()).unwrap();
        for &v in map.values.data() {
            assert!(v.abs() < 1e-12);
        }
        let full = context_aware_saliency(&img, &small_cfg()).unwrap();
        for &v in full.values.data() {
            assert_eq!(v, 0.0);
        }
        assert!(full.attended_mask.iter().all(|&a| !a));
    }

    #[test]
    fn multi_scale_mean_of_equal_maps_is_identity() {
        // A constant image yields identical all-zero maps at every scale.
        let img = Image::constant(10, 10, 3, 0.7).unwrap();
        let cfg = small_cfg();
        let mean = multi_scale_saliency(&img, &cfg).unwrap();
        let single = single_scale_saliency(&img, 1.0, &cfg).unwrap();
        for (a, b) in mean.values.data().iter().zip(single.values.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn saliency_values_stay_in_unit_range() {
        // Image with a bright block on dark background.
        let mut img = Image::constant(14, 14, 3, 0.1).unwrap();
        for y in 4..8 {
            for x in 4..8 {
                for c in 0..3 {
                    img.set_pixel(y, x, c, 0.95);
                }
            }
        }
        let map = single_scale_saliency(&img, 1.0, &small_cfg()).unwrap();
        for &v in map.values.data() {
            assert!((0.0..1.0).contains(&v), "S^r out of range: {v}");
        }
        let full = context_aware_saliency(&img, &small_cfg()).unwrap();
        for &v in full.values.data() {
            assert!((0.0..=1.0).contains(&v), "S out of range: {v}");
        }
    }

    #[test]
    fn immediate_context_keeps_attended_and_damps_corner() {
        // Single attended center of an 11x11 map; the corner at
        // distance sqrt(50) over a sqrt(200) diagonal halves.
        let mut sbar = Tensor::zeros(vec![11, 11]);
        sbar.set2(5, 5, 0.9);
        sbar.set2(0, 0, 0.5);
        let cfg = SaliencyConfig::default();
        let out = immediate_context(&sbar, &cfg).unwrap();
        assert!((out.values.at2(5, 5) - 0.9).abs() < 1e-12);
        assert!((out.values.at2(0, 0) - 0.25).abs() < 1e-12);
        assert!(out.attended_mask[5 * 11 + 5]);
    }

    #[test]
    fn immediate_context_passthrough_without_foci() {
        let sbar = Tensor::new(vec![2, 2], vec![0.1, 0.4, 0.7, 0.79]).unwrap();
        let out = immediate_context(&sbar, &SaliencyConfig::default()).unwrap();
        assert_eq!(out.values.data(), sbar.data());
        assert!(out.attended_mask.iter().all(|&a| !a));
    }

    #[test]
    fn distance_transform_matches_brute_force() {
        let (h, w) = (7, 9);
        let mut seeds = vec![false; h * w];
        seeds[2 * w + 3] = true;
        seeds[6 * w + 8] = true;
        seeds[0] = true;
        let dt = distance_transform(&seeds, h, w);
        for y in 0..h {
            for x in 0..w {
                let mut best = f64::INFINITY;
                for sy in 0..h {
                    for sx in 0..w {
                        if seeds[sy * w + sx] {
                            let d = ((y as f64 - sy as f64).powi(2)
                                + (x as f64 - sx as f64).powi(2))
                            .sqrt();
                            best = best.min(d);
                        }
                    }
                }
                assert!(
                    (dt[y * w + x].sqrt() - best).abs() < 1e-9,
                    "at ({y},{x}): {} vs {best}",
                    dt[y * w + x].sqrt()
                );
            }
        }
    }

    #[test]
    fn map_input_equals_gray_replication() {
        let mut map = Tensor::zeros(vec![12, 12]);
        for y in 4..8 {
            for x in 4..8 {
                map.set2(y, x, 1.0);
            }
        }
        let cfg = small_cfg();
        let via_map = saliency_of_map(&map, &cfg).unwrap();
        let gray = Image::new(12, 12, 1, map.data().to_vec()).unwrap();
        let via_rgb = context_aware_saliency(&gray.to_rgb(), &cfg).unwrap();
        for (a, b) in via_map.values.data().iter().zip(via_rgb.values.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
