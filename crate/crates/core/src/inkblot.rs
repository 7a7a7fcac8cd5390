//! Mirror-symmetric inkblot rasters generated from a seed.
//!
//! Each image is built from three passes of ellipse pairs:
//! 150 pairs of 60x60, then 70 pairs of 20x20, then 150 pairs of 60x20
//! (width x height in pixels). The first ellipse of a pair sits in the left
//! half; the second is its reflection across the vertical midline with the
//! rotation negated.
//!
//! Rasterization only ever writes the left half. Each pass paints the
//! ellipse and its reflection restricted to `x < width / 2`, then copies the
//! left half onto the right. The result is bit-exactly symmetric regardless
//! of floating point rounding.

use std::io::Cursor;

use rayon::prelude::*;
use thiserror::Error;

use crate::seedcore::{RandomStream, Seed};

pub const CANVAS_WIDTH: u32 = 400;
pub const CANVAS_HEIGHT: u32 = 400;
pub const BACKGROUND: [u8; 3] = [255, 255, 255];

/// Ellipse colors, indexed by one stream draw.
pub const PALETTE: [[u8; 3]; 12] = [
    [0, 0, 0],
    [128, 0, 0],
    [220, 20, 60],
    [255, 140, 0],
    [218, 165, 32],
    [128, 128, 0],
    [34, 139, 34],
    [0, 128, 128],
    [0, 0, 128],
    [65, 105, 225],
    [128, 0, 128],
    [139, 69, 19],
];

/// `(pairs, width, height)` for each pass, in drawing order.
pub const LAYERS: [(usize, u32, u32); 3] = [(150, 60, 60), (70, 20, 20), (150, 60, 20)];

/// Label prefix of the per-image stream; the one-based image index follows as a big-endian u32.
pub const INKBLOT_LABEL: &[u8] = b"gotcha/v1/inkblot/";

#[derive(Debug, Error)]
pub enum InkblotError {
    #[error("at least one inkblot is required")]
    ZeroCount,
    #[error("ellipse {w}x{h} does not fit a {width}x{height} canvas")]
    EllipseTooLarge { w: u32, h: u32, width: u32, height: u32 },
    #[error("canvas width must be even and non-zero, got {0}x{1}")]
    BadCanvas(u32, u32),
    #[error("png encoding failed: {0}")]
    Encode(#[from] png::EncodingError),
    #[error("png decoding failed: {0}")]
    Decode(#[from] png::DecodingError),
    #[error("unsupported png layout: {0}")]
    Unsupported(String),
}

/// Row-major 8-bit RGB raster.
#[derive(Clone, PartialEq, Eq)]
pub struct InkblotImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
    index: usize,
}

impl std::fmt::Debug for InkblotImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InkblotImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("index", &self.index)
            .finish_non_exhaustive()
    }
}

impl InkblotImage {
    pub fn blank(width: u32, height: u32, index: usize) -> Result<Self, InkblotError> {
        if width == 0 || height == 0 || width % 2 != 0 {
            return Err(InkblotError::BadCanvas(width, height));
        }
        let pixels = BACKGROUND.repeat((width * height) as usize);
        Ok(InkblotImage { width, height, pixels, index })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// One-based position of this image in its generated set.
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let o = ((y * self.width + x) * 3) as usize;
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2]]
    }

    fn set(&mut self, x: u32, y: u32, c: [u8; 3]) {
        let o = ((y * self.width + x) * 3) as usize;
        self.pixels[o..o + 3].copy_from_slice(&c);
    }

    pub fn is_mirror_symmetric(&self) -> bool {
        (0..self.height).all(|y| (0..self.width / 2).all(|x| self.pixel(x, y) == self.pixel(self.width - 1 - x, y)))
    }

    /// Fraction of pixels that differ from the background.
    pub fn coverage(&self) -> f64 {
        let inked = self.pixels.chunks_exact(3).filter(|p| *p != BACKGROUND).count();
        inked as f64 / (self.width * self.height) as f64
    }

    pub fn same_raster(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height && self.pixels == other.pixels
    }

    fn reflect_left_half(&mut self) {
        let w = self.width as usize;
        for y in 0..self.height as usize {
            let row = &mut self.pixels[y * w * 3..(y + 1) * w * 3];
            for x in 0..w / 2 {
                let (l, r) = (x * 3, (w - 1 - x) * 3);
                row.copy_within(l..l + 3, r);
            }
        }
    }
}

/// One ellipse of a pair: center, full axis lengths, rotation, fill.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseSpec {
    pub center: (f64, f64),
    pub axes: (f64, f64),
    pub angle: f64,
    pub color: [u8; 3],
}

impl EllipseSpec {
    /// Reads one ellipse from the stream: x, y, angle, color (four draws, 32 bytes).
    pub fn sample(stream: &mut RandomStream, width: u32, height: u32, w: u32, h: u32) -> Self {
        let cx = stream.unit() * (width / 2) as f64;
        let cy = stream.unit() * height as f64;
        let angle = stream.angle();
        let color = PALETTE[stream.color_index(PALETTE.len())];
        EllipseSpec { center: (cx, cy), axes: (w as f64, h as f64), angle, color }
    }

    /// Reflection across the vertical midline of a canvas `width` pixels wide.
    pub fn mirrored(&self, width: u32) -> Self {
        EllipseSpec { center: (width as f64 - self.center.0, self.center.1), angle: -self.angle, ..*self }
    }

    /// Whether the point `(px, py)` lies inside or on the boundary.
    pub fn contains(&self, px: f64, py: f64) -> bool {
        let (a, b) = (self.axes.0 / 2.0, self.axes.1 / 2.0);
        let (s, c) = self.angle.sin_cos();
        let (dx, dy) = (px - self.center.0, py - self.center.1);
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / a) * (u / a) + (v / b) * (v / b) <= 1.0
    }

    fn paint_clipped(&self, image: &mut InkblotImage, x_limit: u32) {
        let r = self.axes.0.max(self.axes.1) / 2.0;
        let x0 = (self.center.0 - r).floor().max(0.0) as i64;
        let x1 = ((self.center.0 + r).ceil() as i64).min(x_limit as i64 - 1);
        let y0 = (self.center.1 - r).floor().max(0.0) as i64;
        let y1 = ((self.center.1 + r).ceil() as i64).min(image.height as i64 - 1);
        if x0 > x1 || y0 > y1 {
            return;
        }
        let (a, b) = (self.axes.0 / 2.0, self.axes.1 / 2.0);
        let (s, c) = self.angle.sin_cos();
        for y in y0..=y1 {
            let dy = y as f64 + 0.5 - self.center.1;
            for x in x0..=x1 {
                let dx = x as f64 + 0.5 - self.center.0;
                let u = dx * c + dy * s;
                let v = -dx * s + dy * c;
                if (u / a) * (u / a) + (v / b) * (v / b) <= 1.0 {
                    image.set(x as u32, y as u32, self.color);
                }
            }
        }
    }
}

/// Draws `t` mirrored ellipse pairs of size `w x h` and returns the specs of the left members.
pub fn draw_random_ellipse_pairs(
    image: &mut InkblotImage,
    stream: &mut RandomStream,
    t: usize,
    w: u32,
    h: u32,
) -> Result<Vec<EllipseSpec>, InkblotError> {
    if w > image.width || h > image.height {
        return Err(InkblotError::EllipseTooLarge { w, h, width: image.width, height: image.height });
    }
    let half = image.width / 2;
    let mut specs = Vec::with_capacity(t);
    for _ in 0..t {
        let e = EllipseSpec::sample(stream, image.width, image.height, w, h);
        e.paint_clipped(image, half);
        e.mirrored(image.width).paint_clipped(image, half);
        specs.push(e);
    }
    if t > 0 {
        image.reflect_left_half();
    }
    Ok(specs)
}

/// Stream for the `j`-th (one-based) image of a set.
pub fn image_stream(seed: &Seed, j: usize) -> RandomStream {
    let mut label = INKBLOT_LABEL.to_vec();
    label.extend_from_slice(&(j as u32).to_be_bytes());
    RandomStream::derive(seed, &label)
}

/// The `j`-th (one-based) image generated from `seed`. Independent of the set size.
pub fn generate_inkblot_image(seed: &Seed, j: usize) -> InkblotImage {
    generate_with_layers(seed, j, &LAYERS)
}

pub(crate) fn generate_with_layers(seed: &Seed, j: usize, layers: &[(usize, u32, u32)]) -> InkblotImage {
    let mut image = InkblotImage::blank(CANVAS_WIDTH, CANVAS_HEIGHT, j).expect("canvas constants are valid");
    let mut stream = image_stream(seed, j);
    for &(t, w, h) in layers {
        draw_random_ellipse_pairs(&mut image, &mut stream, t, w, h).expect("layer sizes fit the canvas");
    }
    image
}

/// `k` inkblots in canonical order `1..=k`.
pub fn generate_inkblot_images(k: usize, seed: &Seed) -> Result<Vec<InkblotImage>, InkblotError> {
    if k == 0 {
        return Err(InkblotError::ZeroCount);
    }
    Ok((1..=k).into_par_iter().map(|j| generate_inkblot_image(seed, j)).collect())
}

/// Lossless 8-bit RGB PNG with fixed encoder settings.
pub fn export_png(image: &InkblotImage) -> Result<Vec<u8>, InkblotError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, image.width, image.height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Balanced);
        enc.set_filter(png::Filter::Sub);
        let mut writer = enc.write_header()?;
        writer.write_image_data(&image.pixels)?;
        writer.finish()?;
    }
    Ok(out)
}

/// Decodes an 8-bit RGB PNG produced by [`export_png`].
pub fn decode_png(bytes: &[u8], index: usize) -> Result<InkblotImage, InkblotError> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info()?;
    let mut buf = vec![0u8; reader.output_buffer_size().ok_or_else(|| InkblotError::Unsupported("oversized".into()))?];
    let info = reader.next_frame(&mut buf)?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(InkblotError::Unsupported(format!("{:?}/{:?}", info.color_type, info.bit_depth)));
    }
    buf.truncate(info.buffer_size());
    Ok(InkblotImage { width: info.width, height: info.height, pixels: buf, index })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed(b: u8) -> Seed {
        Seed::from_bytes(vec![b; 32]).unwrap()
    }

    #[test]
    fn zero_pairs_leave_image_unchanged() {
        let mut img = InkblotImage::blank(CANVAS_WIDTH, CANVAS_HEIGHT, 1).unwrap();
        let before = img.clone();
        let mut s = RandomStream::from_seed(&seed(1));
        draw_random_ellipse_pairs(&mut img, &mut s, 0, 60, 60).unwrap();
        assert_eq!(img, before);
        assert_eq!(s.bytes_consumed(), 0);
    }

    #[test]
    fn oversize_ellipse_rejected() {
        let mut img = InkblotImage::blank(40, 40, 1).unwrap();
        let mut s = RandomStream::from_seed(&seed(1));
        assert!(matches!(
            draw_random_ellipse_pairs(&mut img, &mut s, 1, 60, 20),
            Err(InkblotError::EllipseTooLarge { .. })
        ));
    }

    // Oracle: paints both ellipses over the full canvas without the
    // half-plane trick, testing every pixel against the analytic shapes.
    #[test]
    fn single_pair_matches_direct_painting() {
        for b in 0..20u8 {
            let mut img = InkblotImage::blank(CANVAS_WIDTH, CANVAS_HEIGHT, 1).unwrap();
            let mut s = RandomStream::from_seed(&seed(b));
            let specs = draw_random_ellipse_pairs(&mut img, &mut s, 1, 60, 20).unwrap();
            let (e, m) = (specs[0], specs[0].mirrored(CANVAS_WIDTH));
            assert!(e.center.0 < (CANVAS_WIDTH / 2) as f64);
            let mut left_mismatch = 0;
            let mut right_mismatch = 0;
            for y in 0..CANVAS_HEIGHT {
                for x in 0..CANVAS_WIDTH {
                    let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                    let inside = e.contains(px, py) || m.contains(px, py);
                    let inked = img.pixel(x, y) != BACKGROUND;
                    if inside != inked {
                        if x < CANVAS_WIDTH / 2 {
                            left_mismatch += 1;
                        } else {
                            right_mismatch += 1;
                        }
                    }
                    if inked {
                        assert_eq!(img.pixel(x, y), e.color);
                    }
                }
            }
            assert_eq!(left_mismatch, 0);
            // Reflected coordinates may round differently on the boundary.
            assert!(right_mismatch <= 4, "right mismatch {right_mismatch}");
            assert!(img.is_mirror_symmetric());
        }
    }

    #[test]
    fn single_image_is_symmetric() {
        let img = generate_inkblot_image(&seed(9), 1);
        assert!(img.is_mirror_symmetric());
        assert_eq!((img.width(), img.height(), img.index()), (400, 400, 1));
    }

    #[test]
    fn zero_count_rejected() {
        assert!(matches!(generate_inkblot_images(0, &seed(1)), Err(InkblotError::ZeroCount)));
    }

    #[test]
    fn layer_order_matters() {
        let s = seed(21);
        let canonical = generate_inkblot_image(&s, 1);
        let swapped = generate_with_layers(&s, 1, &[LAYERS[2], LAYERS[1], LAYERS[0]]);
        assert!(!canonical.same_raster(&swapped));
    }

    #[test]
    fn png_round_trip_blank_and_generated() {
        let blank = InkblotImage::blank(CANVAS_WIDTH, CANVAS_HEIGHT, 1).unwrap();
        let decoded = decode_png(&export_png(&blank).unwrap(), 1).unwrap();
        assert!(decoded.pixels().chunks_exact(3).all(|p| p == BACKGROUND));
        let img = generate_inkblot_image(&seed(4), 2);
        let bytes = export_png(&img).unwrap();
        assert_eq!(&bytes[..8], b"\x89PNG\r\n\x1a\n");
        assert_eq!(decode_png(&bytes, 2).unwrap(), img);
    }

    #[test]
    fn stream_layout_per_image() {
        // 370 ellipses per image, 4 draws of 8 bytes each.
        let mut img = InkblotImage::blank(CANVAS_WIDTH, CANVAS_HEIGHT, 1).unwrap();
        let mut s = image_stream(&seed(3), 1);
        for &(t, w, h) in &LAYERS {
            draw_random_ellipse_pairs(&mut img, &mut s, t, w, h).unwrap();
        }
        assert_eq!(s.bytes_consumed(), 370 * 32);
        assert!(img.same_raster(&generate_inkblot_image(&seed(3), 1)));
    }
}
