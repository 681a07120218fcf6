//! Dense floating-point images and PNG/OpenEXR I/O.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Rgb, Rgb32FImage, Rgba, Rgba32FImage};

use crate::error::{Error, Result};

/// Row-major interleaved image with `f64` samples in linear color.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Image {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Image {
            width,
            height,
            channels,
            data,
        }
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Bilinear sample at continuous coordinates where pixel centers sit on integers.
    /// Writes `channels` values into `out` and returns false when outside the image.
    #[inline]
    pub fn sample_bilinear(&self, x: f64, y: f64, out: &mut [f64]) -> bool {
        let x = snap(x);
        let y = snap(y);
        let xmax = (self.width - 1) as f64;
        let ymax = (self.height - 1) as f64;
        if !(x >= 0.0 && y >= 0.0 && x <= xmax && y <= ymax) {
            return false;
        }
        let x0 = (x.floor() as usize).min(self.width - 1);
        let y0 = (y.floor() as usize).min(self.height - 1);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        if fx == 0.0 && fy == 0.0 {
            out.copy_from_slice(self.pixel(x0, y0));
            return true;
        }
        let (a, b, c, d) = (
            self.pixel(x0, y0),
            self.pixel(x1, y0),
            self.pixel(x0, y1),
            self.pixel(x1, y1),
        );
        for ch in 0..self.channels {
            let top = a[ch] + fx * (b[ch] - a[ch]);
            let bottom = c[ch] + fx * (d[ch] - c[ch]);
            out[ch] = top + fy * (bottom - top);
        }
        true
    }

    /// Keeps the first three channels.
    pub fn to_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        Image::from_fn(self.width, self.height, 3, |x, y, c| {
            self.pixel(x, y).get(c).copied().unwrap_or(0.0)
        })
    }

    pub fn load(path: &Path, srgb_to_linear: bool) -> Result<Image> {
        let dynimg = image::open(path).map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Image(other),
        })?;
        let is_float = matches!(
            dynimg,
            DynamicImage::ImageRgb32F(_) | DynamicImage::ImageRgba32F(_)
        );
        let rgb = dynimg.to_rgb32f();
        let (w, h) = rgb.dimensions();
        let decode = srgb_to_linear && !is_float;
        let data = rgb
            .into_raw()
            .into_iter()
            .map(|v| {
                let v = v as f64;
                if decode {
                    srgb_to_linear_value(v)
                } else {
                    v
                }
            })
            .collect();
        Ok(Image {
            width: w as usize,
            height: h as usize,
            channels: 3,
            data,
        })
    }

    /// Writes 8-bit sRGB PNG or float32 OpenEXR depending on the extension.
    pub fn save(&self, path: &Path) -> Result<()> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        match ext.as_deref() {
            Some("exr") => self.save_exr(path),
            _ => {
                let bytes = self.encode_png()?;
                std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
            }
        }
    }

    fn to_dynamic8(&self) -> DynamicImage {
        let to8 = |v: f64| (linear_to_srgb_value(v.clamp(0.0, 1.0)) * 255.0).round() as u8;
        match self.channels {
            4 => DynamicImage::ImageRgba8(ImageBuffer::<Rgba<u8>, _>::from_fn(
                self.width as u32,
                self.height as u32,
                |x, y| {
                    let p = self.pixel(x as usize, y as usize);
                    Rgba([to8(p[0]), to8(p[1]), to8(p[2]), (p[3].clamp(0.0, 1.0) * 255.0).round() as u8])
                },
            )),
            _ => DynamicImage::ImageRgb8(ImageBuffer::<Rgb<u8>, _>::from_fn(
                self.width as u32,
                self.height as u32,
                |x, y| {
                    let p = self.pixel(x as usize, y as usize);
                    let g = |c: usize| p.get(c).or(p.first()).copied().unwrap_or(0.0);
                    Rgb([to8(g(0)), to8(g(1)), to8(g(2))])
                },
            )),
        }
    }

    /// 8-bit sRGB PNG.
    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = std::io::Cursor::new(Vec::new());
        self.to_dynamic8().write_to(&mut out, image::ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    /// 8-bit sRGB JPEG of the color channels.
    pub fn encode_jpeg(&self, quality: u8) -> Result<Vec<u8>> {
        let rgb = self.to_rgb().to_dynamic8();
        let mut out = Vec::new();
        image::codecs::jpeg::JpegEncoder::new_with_quality(&mut out, quality).encode_image(&rgb)?;
        Ok(out)
    }

    fn save_exr(&self, path: &Path) -> Result<()> {
        let dynimg = if self.channels == 4 {
            DynamicImage::ImageRgba32F(Rgba32FImage::from_fn(
                self.width as u32,
                self.height as u32,
                |x, y| {
                    let p = self.pixel(x as usize, y as usize);
                    Rgba([p[0] as f32, p[1] as f32, p[2] as f32, p[3] as f32])
                },
            ))
        } else {
            DynamicImage::ImageRgb32F(Rgb32FImage::from_fn(
                self.width as u32,
                self.height as u32,
                |x, y| {
                    let p = self.pixel(x as usize, y as usize);
                    let g = |c: usize| p.get(c).or(p.first()).copied().unwrap_or(0.0) as f32;
                    Rgb([g(0), g(1), g(2)])
                },
            ))
        };
        dynimg.save(path)?;
        Ok(())
    }
}

/// Rounds coordinates within 1e-9 of an integer onto it, so identity warps sample exactly.
#[inline]
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

pub fn srgb_to_linear_value(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

pub fn linear_to_srgb_value(v: f64) -> f64 {
    if v <= 0.0031308 {
        v * 12.92
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}
