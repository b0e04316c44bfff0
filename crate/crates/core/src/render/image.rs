use super::{Frame, RenderError, Result};
use crate::camera::CaptureConfig;

/// Bilinear resize with half-pixel centers and edge clamping. Each channel
/// is interpolated independently and rounded to nearest, ties up.
pub fn resize_bilinear(frame: &Frame, width: usize, height: usize) -> Result<Frame> {
    if width == 0 || height == 0 {
        return Err(RenderError::BadDimensions { width, height });
    }
    let (sw, sh) = (frame.width(), frame.height());
    if (sw, sh) == (width, height) {
        return Ok(frame.clone());
    }
    let axis = |dst: usize, src: usize| -> Vec<(usize, usize, f64)> {
        let scale = src as f64 / dst as f64;
        (0..dst)
            .map(|o| {
                let s = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(src - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let xs = axis(width, sw);
    let ys = axis(height, sh);
    let mut out = vec![0u8; width * height * 3];
    for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
        for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
            let (p00, p01) = (frame.pixel(x0, y0), frame.pixel(x1, y0));
            let (p10, p11) = (frame.pixel(x0, y1), frame.pixel(x1, y1));
            for c in 0..3 {
                let top = p00[c] as f64 * (1.0 - fx) + p01[c] as f64 * fx;
                let bottom = p10[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                out[(oy * width + ox) * 3 + c] = (v + 0.5).floor().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Frame::from_pixels(width, height, out)
}

/// Crops a `width`×`height` window whose offset is the floored half margin.
pub fn center_crop(frame: &Frame, width: usize, height: usize) -> Result<Frame> {
    if width == 0 || height == 0 {
        return Err(RenderError::BadDimensions { width, height });
    }
    if width > frame.width() || height > frame.height() {
        return Err(RenderError::CropTooLarge {
            crop_w: width,
            crop_h: height,
            width: frame.width(),
            height: frame.height(),
        });
    }
    let (ox, oy) = ((frame.width() - width) / 2, (frame.height() - height) / 2);
    let mut out = Vec::with_capacity(width * height * 3);
    for y in oy..oy + height {
        let row = (y * frame.width() + ox) * 3;
        out.extend_from_slice(&frame.pixels()[row..row + width * 3]);
    }
    Frame::from_pixels(width, height, out)
}

/// Network-input preprocessing: resize to the configured image size (a
/// no-op for frames rendered at that size), then center crop.
pub fn prepare_frame(frame: &Frame, config: &CaptureConfig) -> Result<Frame> {
    let resized = resize_bilinear(frame, config.image_width, config.image_height)?;
    center_crop(&resized, config.crop_width, config.crop_height)
}
