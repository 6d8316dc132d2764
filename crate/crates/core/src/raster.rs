//! Row-major pixel grids and panorama-aware sampling.
//!
//! All rasters in this crate share the same convention: continuous pixel
//! coordinates place texel centers at half-integers, the u axis wraps around
//! the longitude seam, and the v axis clamps at the poles.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Magic bytes of the 32-bit float raster container (16-byte header:
/// 8-byte magic, u32 LE width, u32 LE height, then row-major f32 LE data).
pub const F32_RASTER_MAGIC: &[u8; 8] = b"PANOF32\0";

/// Dense row-major grid of `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy> Raster<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Raster {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{} = {} entries", width, height, width * height),
                actual: format!("{} entries", data.len()),
            });
        }
        Ok(Raster {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> T {
        debug_assert!(u < self.width && v < self.height);
        self.data[v * self.width + u]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: T) {
        debug_assert!(u < self.width && v < self.height);
        self.data[v * self.width + u] = value;
    }

    /// Read with longitude wraparound on u and clamping on v.
    #[inline]
    pub fn get_wrapped(&self, u: isize, v: isize) -> T {
        let u = u.rem_euclid(self.width as isize) as usize;
        let v = v.clamp(0, self.height as isize - 1) as usize;
        self.data[v * self.width + u]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn same_shape<U>(&self, other: &Raster<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn map<U, F: FnMut(T) -> U>(&self, mut f: F) -> Raster<U> {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&t| f(t)).collect(),
        }
    }
}

impl Raster<f32> {
    /// Bilinear sample at continuous (u, v) with longitude wraparound.
    #[inline]
    pub fn sample_bilinear(&self, u: f64, v: f64) -> f32 {
        let x = u - 0.5;
        let y = (v - 0.5).clamp(0.0, self.height as f64 - 1.0);
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = (x - x0) as f32;
        let fy = (y - y0) as f32;
        let xi = (x0 as isize).rem_euclid(self.width as isize) as usize;
        let xj = (xi + 1) % self.width;
        let yi = y0 as usize;
        let yj = (yi + 1).min(self.height - 1);
        let row0 = yi * self.width;
        let row1 = yj * self.width;
        let a = self.data[row0 + xi];
        let b = self.data[row0 + xj];
        let c = self.data[row1 + xi];
        let d = self.data[row1 + xj];
        let top = a + (b - a) * fx;
        let bot = c + (d - c) * fx;
        top + (bot - top) * fy
    }

    /// Write the 16-byte-header binary float raster format.
    pub fn write_f32<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let path = path.as_ref();
        let io = |source| Error::Io {
            path: path.display().to_string(),
            source,
        };
        let mut buf =
            Vec::with_capacity(16 + self.data.len() * 4);
        buf.extend_from_slice(F32_RASTER_MAGIC);
        buf.extend_from_slice(&(self.width as u32).to_le_bytes());
        buf.extend_from_slice(&(self.height as u32).to_le_bytes());
        for value in &self.data {
            buf.extend_from_slice(&value.to_le_bytes());
        }
        let mut file = std::fs::File::create(path).map_err(io)?;
        file.write_all(&buf).map_err(io)
    }

    /// Read the binary float raster format written by [`Raster::write_f32`].
    pub fn read_f32<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let io = |source| Error::Io {
            path: path.display().to_string(),
            source,
        };
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .map_err(io)?
            .read_to_end(&mut bytes)
            .map_err(io)?;
        if bytes.len() < 16 || &bytes[..8] != F32_RASTER_MAGIC {
            return Err(Error::manifest(format!(
                "{}: not a float raster (bad magic or truncated header)",
                path.display()
            )));
        }
        let width = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let height = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let expected = 16 + width * height * 4;
        if bytes.len() != expected {
            return Err(Error::ShapeMismatch {
                expected: format!("{expected} bytes"),
                actual: format!("{} bytes", bytes.len()),
            });
        }
        let data = bytes[16..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Raster {
            width,
            height,
            data,
        })
    }
}

impl Raster<u8> {
    pub fn write_gray_png<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let path = path.as_ref();
        let img = image::GrayImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("raster length matches dimensions");
        img.save(path).map_err(|source| Error::Image {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read_gray_png<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|source| Error::Image {
                path: path.display().to_string(),
                source,
            })?
            .into_luma8();
        Ok(Raster {
            width: img.width() as usize,
            height: img.height() as usize,
            data: img.into_raw(),
        })
    }
}

/// Interleaved 8-bit RGB image with the same coordinate conventions.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbRaster {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbRaster {
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        RgbRaster {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> [u8; 3] {
        let i = (v * self.width + u) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, rgb: [u8; 3]) {
        let i = (v * self.width + u) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Per-pixel luminance in [0, 1], the matching substrate for photometric costs.
    pub fn to_luma(&self) -> Raster<f32> {
        let data = self
            .data
            .chunks_exact(3)
            .map(|px| {
                (0.2126 * px[0] as f32 + 0.7152 * px[1] as f32 + 0.0722 * px[2] as f32) / 255.0
            })
            .collect();
        Raster {
            width: self.width,
            height: self.height,
            data,
        }
    }

    pub fn write_png<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let path = path.as_ref();
        let img = image::RgbImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("raster length matches dimensions");
        img.save(path).map_err(|source| Error::Image {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read_png<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|source| Error::Image {
                path: path.display().to_string(),
                source,
            })?
            .into_rgb8();
        Ok(RgbRaster {
            width: img.width() as usize,
            height: img.height() as usize,
            data: img.into_raw(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_interpolates_and_wraps_longitude() {
        let mut r = Raster::filled(4, 2, 0.0f32);
        r.set(0, 0, 1.0);
        r.set(3, 0, 3.0);
        // Texel centers: (0.5, 0.5) -> 1.0, (3.5, 0.5) -> 3.0.
        assert_eq!(r.sample_bilinear(0.5, 0.5), 1.0);
        assert_eq!(r.sample_bilinear(3.5, 0.5), 3.0);
        // Halfway across the seam between texels 3 and 0.
        let seam = r.sample_bilinear(0.0, 0.5);
        assert!((seam - 2.0).abs() < 1e-6, "seam={seam}");
    }

    #[test]
    fn f32_roundtrip_preserves_bits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("depth.f32");
        let mut r = Raster::filled(5, 3, 0.0f32);
        r.set(2, 1, 1.25);
        r.set(4, 2, -7.5e-3);
        r.write_f32(&path).unwrap();
        let back = Raster::read_f32(&path).unwrap();
        assert_eq!(r, back);
    }

    #[test]
    fn f32_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bogus.f32");
        std::fs::write(&path, b"NOTMAGIC\x01\x00\x00\x00\x01\x00\x00\x00").unwrap();
        assert!(Raster::<f32>::read_f32(&path).is_err());
    }
}
