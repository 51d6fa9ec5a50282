use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, ImageError, Result};
use crate::tensor::Tensor;

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            ImageError::NotFound(path.to_path_buf()).into()
        } else {
            Error::io(path, e)
        }
    })
}

fn corrupt(path: &Path, e: impl std::fmt::Display) -> Error {
    ImageError::Corrupt {
        path: path.to_path_buf(),
        detail: e.to_string(),
    }
    .into()
}

fn check_format(path: &Path, info: &png::Info) -> Result<()> {
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(ImageError::Unsupported {
            path: path.to_path_buf(),
            detail: format!("{:?}, {}-bit", info.color_type, info.bit_depth as u8),
        }
        .into());
    }
    Ok(())
}

/// Reads only the header: `(height, width)` of an 8-bit RGB PNG.
pub fn png_dimensions(path: impl AsRef<Path>) -> Result<(usize, usize)> {
    let path = path.as_ref();
    let mut decoder = png::Decoder::new(open(path)?);
    decoder.set_transformations(png::Transformations::IDENTITY);
    let reader = decoder.read_info().map_err(|e| corrupt(path, e))?;
    check_format(path, reader.info())?;
    let info = reader.info();
    Ok((info.height as usize, info.width as usize))
}

/// Loads an 8-bit RGB PNG as a (3, H, W) tensor with values `v / 255`.
pub fn load_png(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let mut decoder = png::Decoder::new(open(path)?);
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| corrupt(path, e))?;
    check_format(path, reader.info())?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| corrupt(path, "image too large"))?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(|e| corrupt(path, e))?;
    let (w, h) = (frame.width as usize, frame.height as usize);
    let stride = frame.line_size;
    let mut data = vec![0.0f32; 3 * h * w];
    for y in 0..h {
        let row = &buf[y * stride..y * stride + 3 * w];
        for x in 0..w {
            for c in 0..3 {
                data[(c * h + y) * w + x] = row[3 * x + c] as f32 / 255.0;
            }
        }
    }
    Tensor::new(3, h, w, data)
}

/// Clamps to `[0, 1]`, quantizes with `round(v·255)` and writes an 8-bit
/// RGB PNG. The file appears only once fully written.
pub fn save_png(tensor: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (c, h, w) = tensor.shape();
    if c != 3 {
        return Err(Error::shape(
            "save_png",
            format!("expected 3 channels, got {c}"),
        ));
    }
    let mut bytes = vec![0u8; 3 * h * w];
    for ch in 0..3 {
        for (i, &v) in tensor.channel(ch).iter().enumerate() {
            let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
            bytes[3 * i + ch] = (v * 255.0).round() as u8;
        }
    }
    write_atomically(path, |out| {
        let mut encoder = png::Encoder::new(out, w as u32, h as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().map_err(std::io::Error::other)?;
        writer.write_image_data(&bytes).map_err(std::io::Error::other)?;
        writer.finish().map_err(std::io::Error::other)
    })
}

/// Writes through a temporary file in the destination directory and renames
/// it into place on success.
pub(crate) fn write_atomically(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<&mut File>) -> std::io::Result<()>,
) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut out = BufWriter::new(tmp.as_file_mut());
        write(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
