//! Deterministic replay of an action log onto a raster canvas, and pixel
//! agreement with a submitted image.
//!
//! Geometry: a pixel `(px, py)` is covered by a stroke when its centre
//! `(px + 0.5, py + 0.5)` lies within `line_width / 2` of some segment of the
//! polyline (of the point itself for single-point strokes). That gives round
//! caps and joins. Each action's coverage is a union, so a self-overlapping
//! stroke is composited once.

use std::collections::VecDeque;
use std::io::Cursor;

use image::{imageops, ImageFormat, Rgba, RgbaImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stroke_log::{ActionType, Canvas, DrawAction, DrawingSession, PointSample, Rgb};

/// Tolerance, per 8-bit channel, for two pixels to count as matching.
pub const MATCH_TOLERANCE: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderOptions {
    /// Samples per pixel axis; 1 renders hard edges, larger values antialias.
    pub supersample: u32,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { supersample: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RenderWarning {
    OutOfCanvasPoint { order: u32, point: usize, x: f64, y: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub image: RgbaImage,
    pub warnings: Vec<RenderWarning>,
}

/// Union of pixel (or sub-pixel) samples covered by one stroke.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageMask {
    width: u32,
    height: u32,
    scale: u32,
    samples: Vec<bool>,
    /// Inclusive pixel range `(x0, y0, x1, y1)` that may hold coverage.
    bounds: Option<(u32, u32, u32, u32)>,
}

impl CoverageMask {
    pub fn empty(canvas: Canvas, scale: u32) -> Self {
        let scale = scale.max(1);
        let (w, h) = (canvas.width * scale, canvas.height * scale);
        Self {
            width: canvas.width,
            height: canvas.height,
            scale,
            samples: vec![false; (w as usize) * (h as usize)],
            bounds: None,
        }
    }

    /// Hard-edged coverage of a polyline of the given width.
    pub fn of_stroke(points: &[(f64, f64)], line_width: f64, canvas: Canvas) -> Self {
        let mut mask = Self::empty(canvas, 1);
        mask.stamp(points, line_width);
        mask
    }

    pub fn stamp(&mut self, points: &[(f64, f64)], line_width: f64) {
        let radius = line_width / 2.0;
        match points {
            [] => {}
            [p] => self.stamp_segment(*p, *p, radius),
            _ => {
                for w in points.windows(2) {
                    self.stamp_segment(w[0], w[1], radius);
                }
            }
        }
    }

    fn stamp_segment(&mut self, a: (f64, f64), b: (f64, f64), radius: f64) {
        let s = f64::from(self.scale);
        let (sw, sh) = (self.width * self.scale, self.height * self.scale);
        // sample (i, j) sits at ((i + 0.5) / s, (j + 0.5) / s) in canvas units
        let range = |lo: f64, hi: f64, n: u32| -> (u32, u32) {
            let start = ((lo - radius) * s - 0.5).ceil().max(0.0);
            let end = ((hi + radius) * s - 0.5).floor().min(f64::from(n) - 1.0);
            if end < start {
                (1, 0)
            } else {
                (start as u32, end as u32)
            }
        };
        let (x0, x1) = range(a.0.min(b.0), a.0.max(b.0), sw);
        let (y0, y1) = range(a.1.min(b.1), a.1.max(b.1), sh);
        if x1 < x0 || y1 < y0 {
            return;
        }
        let px = (x0 / self.scale, y0 / self.scale, x1 / self.scale, y1 / self.scale);
        self.bounds = Some(match self.bounds {
            None => px,
            Some(b) => (b.0.min(px.0), b.1.min(px.1), b.2.max(px.2), b.3.max(px.3)),
        });
        for j in y0..=y1 {
            let cy = (f64::from(j) + 0.5) / s;
            for i in x0..=x1 {
                let cx = (f64::from(i) + 0.5) / s;
                if segment_distance((cx, cy), a, b) <= radius {
                    self.samples[(j * sw + i) as usize] = true;
                }
            }
        }
    }

    /// Covered fraction of pixel `(x, y)`.
    pub fn coverage(&self, x: u32, y: u32) -> f64 {
        let s = self.scale;
        let sw = self.width * s;
        let mut hits = 0u32;
        for j in y * s..(y + 1) * s {
            for i in x * s..(x + 1) * s {
                hits += u32::from(self.samples[(j * sw + i) as usize]);
            }
        }
        f64::from(hits) / f64::from(s * s)
    }

    /// Pixels with nonzero coverage and their covered fraction.
    pub fn covered(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        let (x0, y0, x1, y1) = self.bounds.unwrap_or((1, 1, 0, 0));
        (y0..=y1)
            .flat_map(move |y| (x0..=x1).map(move |x| (x, y)))
            .map(|(x, y)| (x, y, self.coverage(x, y)))
            .filter(|&(_, _, c)| c > 0.0)
    }

    /// Number of pixels with any coverage.
    pub fn count(&self) -> u64 {
        self.covered().count() as u64
    }

    pub fn union_with(&mut self, other: &CoverageMask) {
        assert_eq!(
            (self.width, self.height, self.scale),
            (other.width, other.height, other.scale),
            "masks must share geometry"
        );
        for (s, o) in self.samples.iter_mut().zip(&other.samples) {
            *s |= *o;
        }
        self.bounds = match (self.bounds, other.bounds) {
            (None, b) | (b, None) => b,
            (Some(a), Some(b)) => Some((a.0.min(b.0), a.1.min(b.1), a.2.max(b.2), a.3.max(b.3))),
        };
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    (p.0 - (a.0 + t * dx)).hypot(p.1 - (a.1 + t * dy))
}

fn blend(dst: u8, src: u8, alpha: f64) -> u8 {
    (f64::from(src) * alpha + f64::from(dst) * (1.0 - alpha)).round() as u8
}

fn composite(pixel: &mut Rgba<u8>, color: Rgb, alpha: f64) {
    if alpha <= 0.0 {
        return;
    }
    let [r, g, b, _] = pixel.0;
    pixel.0 = [
        blend(r, color.r, alpha),
        blend(g, color.g, alpha),
        blend(b, color.b, alpha),
        255,
    ];
}

/// Incremental replay state; applying a prefix and then the suffix equals
/// applying the whole log.
#[derive(Debug, Clone)]
pub struct Renderer {
    canvas: Canvas,
    options: RenderOptions,
    image: RgbaImage,
    warnings: Vec<RenderWarning>,
}

impl Renderer {
    pub fn new(canvas: Canvas, options: RenderOptions) -> Self {
        Self {
            canvas,
            options,
            image: RgbaImage::from_pixel(canvas.width, canvas.height, Rgba([255, 255, 255, 255])),
            warnings: Vec::new(),
        }
    }

    pub fn apply(&mut self, action: &DrawAction) {
        self.apply_points(action, &action.points);
    }

    fn apply_points(&mut self, action: &DrawAction, points: &[PointSample]) {
        let (w, h) = (f64::from(self.canvas.width), f64::from(self.canvas.height));
        for (i, p) in points.iter().enumerate() {
            if !(0.0..=w).contains(&p.x) || !(0.0..=h).contains(&p.y) {
                self.warnings.push(RenderWarning::OutOfCanvasPoint {
                    order: action.order,
                    point: i,
                    x: p.x,
                    y: p.y,
                });
            }
        }
        match action.action_type {
            ActionType::DrawLine | ActionType::Erase => {
                let color = if action.action_type == ActionType::Erase {
                    Rgb::WHITE
                } else {
                    action.color
                };
                let xy: Vec<_> = points.iter().map(|p| (p.x, p.y)).collect();
                let mut mask = CoverageMask::empty(self.canvas, self.options.supersample);
                mask.stamp(&xy, action.line_width);
                for (x, y, c) in mask.covered() {
                    composite(self.image.get_pixel_mut(x, y), color, action.opacity * c);
                }
            }
            ActionType::BucketFill => {
                if let Some(p) = points.first() {
                    self.fill(p.x, p.y, action.color, action.opacity);
                }
            }
        }
    }

    fn fill(&mut self, x: f64, y: f64, color: Rgb, opacity: f64) {
        let (w, h) = (self.canvas.width, self.canvas.height);
        let sx = (x.floor().max(0.0) as u32).min(w - 1);
        let sy = (y.floor().max(0.0) as u32).min(h - 1);
        let target = *self.image.get_pixel(sx, sy);
        let mut visited = vec![false; (w as usize) * (h as usize)];
        let mut queue = VecDeque::from([(sx, sy)]);
        visited[(sy * w + sx) as usize] = true;
        let mut region = Vec::new();
        while let Some((cx, cy)) = queue.pop_front() {
            region.push((cx, cy));
            let neighbours = [
                (cx.wrapping_sub(1), cy),
                (cx + 1, cy),
                (cx, cy.wrapping_sub(1)),
                (cx, cy + 1),
            ];
            for (nx, ny) in neighbours {
                if nx >= w || ny >= h {
                    continue;
                }
                let idx = (ny * w + nx) as usize;
                if !visited[idx] && *self.image.get_pixel(nx, ny) == target {
                    visited[idx] = true;
                    queue.push_back((nx, ny));
                }
            }
        }
        for (px, py) in region {
            composite(self.image.get_pixel_mut(px, py), color, opacity);
        }
    }

    pub fn finish(self) -> Reconstruction {
        Reconstruction {
            image: self.image,
            warnings: self.warnings,
        }
    }
}

pub fn reconstruct(session: &DrawingSession) -> Reconstruction {
    reconstruct_with(session, RenderOptions::default())
}

pub fn reconstruct_with(session: &DrawingSession, options: RenderOptions) -> Reconstruction {
    let mut renderer = Renderer::new(session.canvas, options);
    for action in &session.actions {
        renderer.apply(action);
    }
    renderer.finish()
}

/// State of the canvas at `t_ms`: finished actions are drawn whole, an action
/// in progress only up to its last point sampled at or before `t_ms`.
pub fn reconstruct_at(session: &DrawingSession, t_ms: i64, options: RenderOptions) -> Reconstruction {
    let mut renderer = Renderer::new(session.canvas, options);
    for action in &session.actions {
        if action.timestamp_end <= t_ms {
            renderer.apply(action);
        } else if action.timestamp_start <= t_ms {
            let upto = action.points.iter().take_while(|p| p.timestamp <= t_ms).count();
            if upto > 0 {
                renderer.apply_points(action, &action.points[..upto]);
            }
        }
    }
    renderer.finish()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImageError {
    #[error("could not decode image: {0}")]
    Decode(String),
    #[error("image sizes differ: {left:?} vs {right:?}")]
    DimensionMismatch { left: (u32, u32), right: (u32, u32) },
}

pub fn encode_png(image: &RgbaImage) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    image
        .write_to(&mut out, ImageFormat::Png)
        .expect("encoding to memory cannot fail");
    out.into_inner()
}

pub fn decode_png(bytes: &[u8]) -> Result<RgbaImage, ImageError> {
    image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map(|img| img.to_rgba8())
        .map_err(|e| ImageError::Decode(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fidelity {
    pub pixel_match_ratio: f64,
    /// Mean absolute RGB difference, scaled to [0, 1].
    pub mean_channel_error: f64,
    /// The second image was resized to the first's dimensions.
    pub resampled: bool,
}

fn flatten(p: Rgba<u8>) -> [u8; 3] {
    let a = f64::from(p.0[3]) / 255.0;
    [0, 1, 2].map(|i| blend(255, p.0[i], a))
}

/// Pixel agreement after flattening both images onto white. A size mismatch
/// is an error unless `resample` is set, in which case `other` is scaled to
/// the size of `reference`.
pub fn fidelity(reference: &RgbaImage, other: &RgbaImage, resample: bool) -> Result<Fidelity, ImageError> {
    let mut resampled = false;
    let resized;
    let other = if reference.dimensions() != other.dimensions() {
        if !resample {
            return Err(ImageError::DimensionMismatch {
                left: reference.dimensions(),
                right: other.dimensions(),
            });
        }
        resampled = true;
        resized = imageops::resize(
            other,
            reference.width(),
            reference.height(),
            imageops::FilterType::Triangle,
        );
        &resized
    } else {
        other
    };
    let pixels = u64::from(reference.width()) * u64::from(reference.height());
    if pixels == 0 {
        return Ok(Fidelity {
            pixel_match_ratio: 1.0,
            mean_channel_error: 0.0,
            resampled,
        });
    }
    let mut matched = 0u64;
    let mut error_sum = 0u64;
    for (a, b) in reference.pixels().zip(other.pixels()) {
        let (a, b) = (flatten(*a), flatten(*b));
        let diffs = [0, 1, 2].map(|i| a[i].abs_diff(b[i]));
        if diffs.iter().all(|&d| d <= MATCH_TOLERANCE) {
            matched += 1;
        }
        error_sum += diffs.iter().map(|&d| u64::from(d)).sum::<u64>();
    }
    Ok(Fidelity {
        pixel_match_ratio: matched as f64 / pixels as f64,
        mean_channel_error: error_sum as f64 / (3 * pixels) as f64 / 255.0,
        resampled,
    })
}
