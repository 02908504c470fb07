//! Box algebra, overlap metrics, min/max similarity, and the IoU-family
//! regression losses (IoU / DIoU / CIoU) with analytic gradients.
//!
//! Boxes are center-based `(cx, cy, w, h)` in pixels. A box with zero area is
//! "degenerate": it is a legal value (empty masks occur during occlusion) and
//! scores zero overlap against everything instead of raising.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("box coordinates must be finite, got ({cx}, {cy}, {w}, {h})")]
    NonFinite { cx: f64, cy: f64, w: f64, h: f64 },
    #[error("box width/height must be non-negative, got w={w}, h={h}")]
    NegativeExtent { w: f64, h: f64 },
    #[error("sim_ratio inputs must be non-negative, got ({x}, {y})")]
    NegativeSimInput { x: f64, y: f64 },
    #[error("ground-truth box must be non-degenerate for IoU-family losses")]
    DegenerateGroundTruth,
    #[error("mask bit buffer has {got} bits, expected {expected} ({w}x{h})")]
    MaskSizeMismatch {
        got: usize,
        expected: usize,
        w: usize,
        h: usize,
    },
}

/// Axis-aligned box, center-based, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        if !(cx.is_finite() && cy.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(GeometryError::NonFinite { cx, cy, w, h });
        }
        if w < 0.0 || h < 0.0 {
            return Err(GeometryError::NegativeExtent { w, h });
        }
        Ok(Self { cx, cy, w, h })
    }

    /// Panicking constructor for coordinates known finite and non-negative.
    pub fn of(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self::new(cx, cy, w, h).expect("invalid box literal")
    }

    /// Convert from corner form (top-left x, y, width, height).
    pub fn from_tlwh(x: f64, y: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        Self::new(x + w / 2.0, y + h / 2.0, w, h)
    }

    /// Corner form (top-left x, y, width, height).
    pub fn to_tlwh(&self) -> (f64, f64, f64, f64) {
        (self.cx - self.w / 2.0, self.cy - self.h / 2.0, self.w, self.h)
    }

    /// Corner coordinates `(x1, y1, x2, y2)`.
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Width-over-height aspect ratio; `atan2`-friendly callers should use
    /// raw `w`/`h` instead.
    pub fn aspect_ratio(&self) -> f64 {
        self.w / self.h
    }

    /// Degenerate boxes have zero area and score zero overlap everywhere.
    pub fn is_degenerate(&self) -> bool {
        self.w * self.h == 0.0
    }
}

/// Intersection-over-Union of two boxes in `[0, 1]`.
///
/// Degenerate or disjoint boxes yield 0.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    if a.is_degenerate() || b.is_degenerate() {
        return 0.0;
    }
    let (ax1, ay1, ax2, ay2) = a.corners();
    let (bx1, by1, bx2, by2) = b.corners();
    let iw = ax2.min(bx2) - ax1.max(bx1);
    let ih = ay2.min(by2) - ay1.max(by1);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    inter / (a.area() + b.area() - inter)
}

/// `min(x, y) / max(x, y)` similarity of two non-negative scalars.
///
/// `sim_ratio(0, 0) = 1` (two empty quantities are perfectly similar) and
/// `sim_ratio(0, y>0) = 0`, so occlusion frames flow through scoring without
/// division-by-zero branches.
pub fn sim_ratio(x: f64, y: f64) -> Result<f64, GeometryError> {
    if x < 0.0 || y < 0.0 {
        return Err(GeometryError::NegativeSimInput { x, y });
    }
    Ok(sim_ratio_nonneg(x, y))
}

/// `sim_ratio` for inputs already known non-negative (areas, aspect ratios).
pub(crate) fn sim_ratio_nonneg(x: f64, y: f64) -> f64 {
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    if hi == 0.0 {
        1.0
    } else {
        lo / hi
    }
}

fn check_gt(gt: &BoundingBox) -> Result<(), GeometryError> {
    if gt.is_degenerate() {
        Err(GeometryError::DegenerateGroundTruth)
    } else {
        Ok(())
    }
}

/// `1 - IoU`, in `[0, 1]`.
pub fn iou_loss(pred: &BoundingBox, gt: &BoundingBox) -> Result<f64, GeometryError> {
    check_gt(gt)?;
    Ok(1.0 - iou(pred, gt))
}

/// `1 - IoU + rho^2/c^2`: IoU loss plus the normalized center-distance
/// penalty (squared center distance over squared enclosing-box diagonal).
pub fn diou_loss(pred: &BoundingBox, gt: &BoundingBox) -> Result<f64, GeometryError> {
    check_gt(gt)?;
    Ok(1.0 - iou(pred, gt) + center_distance_penalty(pred, gt))
}

/// Complete IoU loss: `1 - IoU + rho^2/c^2 + alpha*v`, where `v` is the
/// arctan aspect-ratio mismatch and `alpha = v / ((1 - IoU) + v)`.
///
/// Zero iff the boxes are identical. The aspect term is written as
/// `v^2 / ((1 - IoU) + v)`, defined as 0 when the denominator vanishes
/// (identical boxes).
pub fn ciou_loss(pred: &BoundingBox, gt: &BoundingBox) -> Result<f64, GeometryError> {
    check_gt(gt)?;
    let s = 1.0 - iou(pred, gt);
    let v = aspect_term(pred, gt);
    let alpha_v = if s + v > 0.0 { v * v / (s + v) } else { 0.0 };
    Ok(s + center_distance_penalty(pred, gt) + alpha_v)
}

fn center_distance_penalty(pred: &BoundingBox, gt: &BoundingBox) -> f64 {
    let rho2 = (pred.cx - gt.cx).powi(2) + (pred.cy - gt.cy).powi(2);
    let (ax1, ay1, ax2, ay2) = pred.corners();
    let (bx1, by1, bx2, by2) = gt.corners();
    let cw = ax2.max(bx2) - ax1.min(bx1);
    let ch = ay2.max(by2) - ay1.min(by1);
    let c2 = cw * cw + ch * ch;
    if c2 == 0.0 {
        0.0
    } else {
        rho2 / c2
    }
}

/// `v = 4/pi^2 * (atan2(w_gt, h_gt) - atan2(w, h))^2`.
///
/// `atan2` keeps degenerate predictions well-defined (atan2(0, 0) = 0).
fn aspect_term(pred: &BoundingBox, gt: &BoundingBox) -> f64 {
    let d = f64::atan2(gt.w, gt.h) - f64::atan2(pred.w, pred.h);
    4.0 / (std::f64::consts::PI * std::f64::consts::PI) * d * d
}

/// Gradient of a loss with respect to the predicted box `(cx, cy, w, h)`.
pub type BoxGrad = [f64; 4];

/// d(1 - IoU)/d pred.
pub fn iou_loss_grad(pred: &BoundingBox, gt: &BoundingBox) -> Result<BoxGrad, GeometryError> {
    check_gt(gt)?;
    let g = iou_grad(pred, gt);
    Ok([-g[0], -g[1], -g[2], -g[3]])
}

/// d(DIoU loss)/d pred.
pub fn diou_loss_grad(pred: &BoundingBox, gt: &BoundingBox) -> Result<BoxGrad, GeometryError> {
    check_gt(gt)?;
    let gi = iou_grad(pred, gt);
    let gd = center_distance_penalty_grad(pred, gt);
    Ok([gd[0] - gi[0], gd[1] - gi[1], gd[2] - gi[2], gd[3] - gi[3]])
}

/// d(CIoU loss)/d pred, differentiating the exact scalar in [`ciou_loss`]
/// (including the aspect trade-off's dependence on IoU and v), so it matches
/// central finite differences of the loss value.
pub fn ciou_loss_grad(pred: &BoundingBox, gt: &BoundingBox) -> Result<BoxGrad, GeometryError> {
    check_gt(gt)?;
    let gi = iou_grad(pred, gt);
    let gd = center_distance_penalty_grad(pred, gt);
    let s = 1.0 - iou(pred, gt);
    let v = aspect_term(pred, gt);
    let gv = aspect_term_grad(pred, gt);
    let mut out = [0.0; 4];
    for i in 0..4 {
        let ds = -gi[i];
        // T = v^2 / (s + v); dT = (2v v' (s+v) - v^2 (s' + v')) / (s+v)^2
        let dt = if s + v > 0.0 {
            let den = s + v;
            (2.0 * v * gv[i] * den - v * v * (ds + gv[i])) / (den * den)
        } else {
            0.0
        };
        out[i] = ds + gd[i] + dt;
    }
    Ok(out)
}

/// dIoU/d pred. Zero when the boxes are disjoint or either is degenerate
/// (the IoU is locally constant there).
fn iou_grad(pred: &BoundingBox, gt: &BoundingBox) -> BoxGrad {
    if pred.is_degenerate() || gt.is_degenerate() {
        return [0.0; 4];
    }
    let (ax1, ay1, ax2, ay2) = pred.corners();
    let (bx1, by1, bx2, by2) = gt.corners();
    let iw = ax2.min(bx2) - ax1.max(bx1);
    let ih = ay2.min(by2) - ay1.max(by1);
    if iw <= 0.0 || ih <= 0.0 {
        return [0.0; 4];
    }
    // Indicator derivatives of the clipped interval endpoints.
    let right = if ax2 < bx2 { 1.0 } else { 0.0 };
    let left = if ax1 > bx1 { 1.0 } else { 0.0 };
    let bottom = if ay2 < by2 { 1.0 } else { 0.0 };
    let top = if ay1 > by1 { 1.0 } else { 0.0 };
    let diw = [right - left, 0.0, 0.5 * (right + left), 0.0];
    let dih = [0.0, bottom - top, 0.0, 0.5 * (bottom + top)];
    let da = [0.0, 0.0, pred.h, pred.w];

    let inter = iw * ih;
    let union = pred.area() + gt.area() - inter;
    let mut out = [0.0; 4];
    for i in 0..4 {
        let dinter = ih * diw[i] + iw * dih[i];
        let dunion = da[i] - dinter;
        out[i] = (dinter * union - inter * dunion) / (union * union);
    }
    out
}

fn center_distance_penalty_grad(pred: &BoundingBox, gt: &BoundingBox) -> BoxGrad {
    let (ax1, ay1, ax2, ay2) = pred.corners();
    let (bx1, by1, bx2, by2) = gt.corners();
    let cw = ax2.max(bx2) - ax1.min(bx1);
    let ch = ay2.max(by2) - ay1.min(by1);
    let c2 = cw * cw + ch * ch;
    if c2 == 0.0 {
        return [0.0; 4];
    }
    let rho2 = (pred.cx - gt.cx).powi(2) + (pred.cy - gt.cy).powi(2);
    let drho2 = [2.0 * (pred.cx - gt.cx), 2.0 * (pred.cy - gt.cy), 0.0, 0.0];
    let right = if ax2 > bx2 { 1.0 } else { 0.0 };
    let left = if ax1 < bx1 { 1.0 } else { 0.0 };
    let bottom = if ay2 > by2 { 1.0 } else { 0.0 };
    let top = if ay1 < by1 { 1.0 } else { 0.0 };
    let dcw = [right - left, 0.0, 0.5 * (right + left), 0.0];
    let dch = [0.0, bottom - top, 0.0, 0.5 * (bottom + top)];
    let mut out = [0.0; 4];
    for i in 0..4 {
        let dc2 = 2.0 * cw * dcw[i] + 2.0 * ch * dch[i];
        out[i] = (drho2[i] * c2 - rho2 * dc2) / (c2 * c2);
    }
    out
}

fn aspect_term_grad(pred: &BoundingBox, gt: &BoundingBox) -> BoxGrad {
    let n2 = pred.w * pred.w + pred.h * pred.h;
    if n2 == 0.0 {
        return [0.0; 4];
    }
    let d = f64::atan2(gt.w, gt.h) - f64::atan2(pred.w, pred.h);
    let k = 8.0 / (std::f64::consts::PI * std::f64::consts::PI) * d;
    // d atan2(w, h)/dw = h/n2, /dh = -w/n2
    [0.0, 0.0, -k * pred.h / n2, k * pred.w / n2]
}

/// Row-major boolean grid; bit `(col, row)` covers the unit pixel square
/// `[col, col+1) x [row, row+1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, GeometryError> {
        if bits.len() != width * height {
            return Err(GeometryError::MaskSizeMismatch {
                got: bits.len(),
                expected: width * height,
                w: width,
                h: height,
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    /// Rasterize a box: a bit is set iff its pixel center lies inside the box.
    pub fn from_box(width: usize, height: usize, bbox: &BoundingBox) -> Self {
        let (x1, y1, x2, y2) = bbox.corners();
        let mut bits = vec![false; width * height];
        if !bbox.is_degenerate() {
            for row in 0..height {
                let py = row as f64 + 0.5;
                if py < y1 || py >= y2 {
                    continue;
                }
                for col in 0..width {
                    let px = col as f64 + 0.5;
                    if px >= x1 && px < x2 {
                        bits[row * width + col] = true;
                    }
                }
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, col: usize, row: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }
}

/// Tightest axis-aligned box around the set bits; `None` for an all-zero mask.
pub fn box_from_mask(mask: &BinaryMask) -> Option<BoundingBox> {
    let mut min_c = usize::MAX;
    let mut max_c = 0usize;
    let mut min_r = usize::MAX;
    let mut max_r = 0usize;
    let mut any = false;
    for row in 0..mask.height() {
        for col in 0..mask.width() {
            if mask.get(col, row) {
                any = true;
                min_c = min_c.min(col);
                max_c = max_c.max(col);
                min_r = min_r.min(row);
                max_r = max_r.max(row);
            }
        }
    }
    if !any {
        return None;
    }
    let w = (max_c - min_c + 1) as f64;
    let h = (max_r - min_r + 1) as f64;
    Some(BoundingBox::of(
        min_c as f64 + w / 2.0,
        min_r as f64 + h / 2.0,
        w,
        h,
    ))
}
