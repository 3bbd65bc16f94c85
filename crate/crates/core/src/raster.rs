//! Single-channel floating-point rasters and bilinear sampling.
//!
//! Pixel `(x, y)` has its center at integer coordinates `(x, y)`; a pixel
//! covers `[x - 0.5, x + 0.5)`. Intensities are nominally in `[0, 1]`.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

/// How samples that fall outside the raster are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Border {
    Zero,
    Clamp,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("image must have non-zero size".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                context: "image pixel buffer",
                expected: width * height,
                actual: pixels.len(),
            });
        }
        if pixels.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image pixels"));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "image must have non-zero size");
        GrayImage {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "image must have non-zero size");
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        GrayImage {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.pixels[y * self.width + x] = v;
    }

    #[inline]
    fn fetch(&self, x: isize, y: isize, border: Border) -> f64 {
        let inside = x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height;
        match (inside, border) {
            (true, _) => self.pixels[y as usize * self.width + x as usize],
            (false, Border::Zero) => 0.0,
            (false, Border::Clamp) => {
                let cx = x.clamp(0, self.width as isize - 1) as usize;
                let cy = y.clamp(0, self.height as isize - 1) as usize;
                self.pixels[cy * self.width + cx]
            }
        }
    }

    /// Bilinear interpolation at continuous coordinates.
    pub fn sample(&self, x: f64, y: f64, border: Border) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (xi, yi) = (x0 as isize, y0 as isize);
        if fx == 0.0 && fy == 0.0 {
            return self.fetch(xi, yi, border);
        }
        let p00 = self.fetch(xi, yi, border);
        let p10 = self.fetch(xi + 1, yi, border);
        let p01 = self.fetch(xi, yi + 1, border);
        let p11 = self.fetch(xi + 1, yi + 1, border);
        let top = p00 + (p10 - p00) * fx;
        let bottom = p01 + (p11 - p01) * fx;
        top + (bottom - top) * fy
    }

    /// Resamples the rectangle with upper-left edge `(x, y)` and size `w × h`
    /// (continuous pixel units) onto an `out_w × out_h` grid.
    #[allow(clippy::too_many_arguments)]
    pub fn crop_resize(
        &self,
        x: f64,
        y: f64,
        w: f64,
        h: f64,
        out_w: usize,
        out_h: usize,
        border: Border,
    ) -> GrayImage {
        let sx = w / out_w as f64;
        let sy = h / out_h as f64;
        GrayImage::from_fn(out_w, out_h, |u, v| {
            let src_x = x + (u as f64 + 0.5) * sx;
            let src_y = y + (v as f64 + 0.5) * sy;
            self.sample(src_x, src_y, border)
        })
    }

    pub fn resize(&self, out_w: usize, out_h: usize) -> GrayImage {
        self.crop_resize(
            -0.5,
            -0.5,
            self.width as f64,
            self.height as f64,
            out_w,
            out_h,
            Border::Clamp,
        )
    }

    /// Integer crop `[x0, x0 + w) × [y0, y0 + h)`, zero outside the raster.
    pub fn crop(&self, x0: isize, y0: isize, w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |u, v| {
            self.fetch(x0 + u as isize, y0 + v as isize, Border::Zero)
        })
    }

    pub fn flip_horizontal(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| {
            self.get(self.width - 1 - x, y)
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Grayscale conversion with luma weights 0.299 / 0.587 / 0.114.
    pub fn from_dynamic(img: &DynamicImage) -> GrayImage {
        if let Some(l8) = img.as_luma8() {
            return GrayImage {
                width: l8.width() as usize,
                height: l8.height() as usize,
                pixels: l8.pixels().map(|p| f64::from(p[0]) / 255.0).collect(),
            };
        }
        let rgb = img.to_rgb32f();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        let pixels = rgb
            .pixels()
            .map(|p| {
                0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2])
            })
            .collect();
        GrayImage {
            width: w,
            height: h,
            pixels,
        }
    }

    pub fn open(path: &Path) -> Result<GrayImage> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(GrayImage::from_dynamic(&img))
    }

    pub fn to_luma8(&self) -> ImageBuffer<Luma<u8>, Vec<u8>> {
        let data = self
            .pixels
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        ImageBuffer::from_raw(self.width as u32, self.height as u32, data)
            .expect("buffer length matches dimensions")
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_luma8()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> GrayImage {
        GrayImage::from_fn(6, 4, |x, y| (x + 10 * y) as f64)
    }

    #[test]
    fn rejects_bad_buffers() {
        assert!(GrayImage::new(2, 2, vec![0.0; 3]).is_err());
        assert!(GrayImage::new(0, 2, vec![]).is_err());
        assert!(GrayImage::new(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn bilinear_is_exact_at_pixel_centers() {
        let img = ramp();
        for y in 0..4 {
            for x in 0..6 {
                assert_eq!(img.sample(x as f64, y as f64, Border::Zero), img.get(x, y));
            }
        }
        // Linear ramp is reproduced exactly in between.
        assert!((img.sample(1.5, 2.25, Border::Clamp) - 24.0).abs() < 1e-12);
    }

    #[test]
    fn border_modes() {
        let img = GrayImage::filled(3, 3, 1.0);
        assert_eq!(img.sample(-1.0, 1.0, Border::Zero), 0.0);
        assert_eq!(img.sample(-1.0, 1.0, Border::Clamp), 1.0);
        assert!((img.sample(-0.5, 1.0, Border::Zero) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unit_scale_crop_resize_copies_pixels() {
        let img = ramp();
        let out = img.crop_resize(0.5, 0.5, 3.0, 2.0, 3, 2, Border::Zero);
        assert_eq!(out, img.crop(1, 1, 3, 2));
        assert_eq!(img.resize(6, 4), img);
    }

    #[test]
    fn crop_pads_with_zero() {
        let img = GrayImage::filled(2, 2, 1.0);
        let c = img.crop(-1, -1, 3, 3);
        assert_eq!(c.pixels(), &[0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn flip_twice_is_identity() {
        let img = ramp();
        assert_eq!(img.flip_horizontal().get(0, 1), img.get(5, 1));
        assert_eq!(img.flip_horizontal().flip_horizontal(), img);
    }

    #[test]
    fn luma_weights() {
        let rgb = image::RgbImage::from_raw(1, 1, vec![255, 0, 0]).unwrap();
        let g = GrayImage::from_dynamic(&DynamicImage::ImageRgb8(rgb));
        assert!((g.get(0, 0) - 0.299).abs() < 1e-6);
    }
}
