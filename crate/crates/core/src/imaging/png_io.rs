use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::imaging::ImageTensor;
use crate::scalar::Real;

/// Loads an 8-bit grayscale or RGB PNG, mapping `[0, 255]` to `[0, 1]`.
pub fn load_png<T: Real>(path: &Path) -> Result<ImageTensor<T>> {
    let unsupported = |reason: String| Error::UnsupportedImage {
        path: path.to_path_buf(),
        reason,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder.read_info().map_err(|e| unsupported(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| unsupported("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| unsupported(e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(unsupported(format!("bit depth {:?} (only 8-bit supported)", info.bit_depth)));
    }
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => return Err(unsupported(format!("color type {other:?}"))),
    };
    let (h, w) = (info.height as usize, info.width as usize);
    let stride = info.line_size;
    let scale = T::one() / T::lit(255.0);
    let data = Array3::from_shape_fn((channels, h, w), |(c, i, j)| {
        T::from_u8(buf[i * stride + j * channels + c]).unwrap() * scale
    });
    ImageTensor::from_array(data)
}

/// Saves as an 8-bit PNG: values are clamped to `[0, 1]` and rounded half-up.
pub fn save_png<T: Real>(image: &ImageTensor<T>, path: &Path) -> Result<()> {
    let (c, h, w) = (image.channels(), image.height(), image.width());
    let mut bytes = Vec::with_capacity(c * h * w);
    for i in 0..h {
        for j in 0..w {
            for ch in 0..c {
                let v = image.data()[[ch, i, j]].to_f64_lossy().clamp(0.0, 1.0);
                bytes.push((v * 255.0 + 0.5).floor() as u8);
            }
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    encoder.set_color(if c == 1 {
        png::ColorType::Grayscale
    } else {
        png::ColorType::Rgb
    });
    encoder.set_depth(png::BitDepth::Eight);
    let to_err = |e: png::EncodingError| Error::io(path, std::io::Error::other(e.to_string()));
    let mut writer = encoder.write_header().map_err(to_err)?;
    writer.write_image_data(&bytes).map_err(to_err)?;
    writer.finish().map_err(to_err)?;
    Ok(())
}
