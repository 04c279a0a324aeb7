//! Image, depth, flow and mask file I/O.
//!
//! Colors live in linear light inside the engine; sRGB conversion only
//! happens here, at the file boundary. Supported formats:
//!
//! - PNG, 8 or 16 bit, RGB or RGBA, for color (alpha is dropped).
//! - PFM (`Pf`, grayscale) or 16-bit grayscale PNG for depth.
//! - Middlebury `.flo` for flow fields.
//! - PNG masks, thresholded at half intensity.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use crate::error::AssetError;
use crate::grid::{ColorImage, DepthMap, FlowField, Grid, MaskImage, Rgb};

/// Smallest depth any loader will emit.
pub const DEPTH_MIN: f32 = 1e-4;

/// Fraction of non-positive depth pixels above which a depth map is rejected.
const DEGENERATE_DEPTH_FRACTION: f64 = 0.10;

/// `.flo` magic number; its little-endian bytes spell `PIEH`.
pub const FLO_MAGIC: f32 = 202021.25;

/// Standard sRGB electro-optical transfer function.
#[inline]
pub fn srgb_to_linear(s: f32) -> f32 {
    if s <= 0.04045 {
        s / 12.92
    } else {
        ((s + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
pub fn linear_to_srgb(l: f32) -> f32 {
    let l = l.clamp(0.0, 1.0);
    if l <= 0.003_130_8 {
        l * 12.92
    } else {
        1.055 * l.powf(1.0 / 2.4) - 0.055
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, AssetError> {
    fs::read(path).map_err(|e| AssetError::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), AssetError> {
    fs::write(path, bytes).map_err(|e| AssetError::io(path, e))
}

/// Raw decoded PNG samples, normalized to `[0, 1]`.
struct PngSamples {
    width: usize,
    height: usize,
    channels: usize,
    bit_depth: u8,
    samples: Vec<f32>,
    raw16: Option<Vec<u16>>,
}

fn decode_png(bytes: &[u8]) -> Result<PngSamples, AssetError> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| AssetError::MalformedImage(e.to_string()))?;
    let info = reader.info();
    let (width, height) = (info.width as usize, info.height as usize);
    if width == 0 || height == 0 {
        return Err(AssetError::ZeroDimension);
    }
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => {
            return Err(AssetError::UnsupportedFormat("indexed-color PNG".into()))
        }
    };
    let bit_depth = match info.bit_depth {
        png::BitDepth::Eight => 8,
        png::BitDepth::Sixteen => 16,
        other => {
            return Err(AssetError::UnsupportedFormat(format!(
                "{other:?}-bit PNG samples"
            )))
        }
    };
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| AssetError::MalformedImage("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let out = reader
        .next_frame(&mut buf)
        .map_err(|e| AssetError::MalformedImage(e.to_string()))?;
    let n = width * height * channels;
    let (samples, raw16) = if bit_depth == 8 {
        let mut samples = Vec::with_capacity(n);
        for row in buf.chunks(out.line_size).take(height) {
            samples.extend(row[..width * channels].iter().map(|&b| b as f32 / 255.0));
        }
        (samples, None)
    } else {
        let mut raw = Vec::with_capacity(n);
        for row in buf.chunks(out.line_size).take(height) {
            raw.extend(
                row[..width * channels * 2]
                    .chunks_exact(2)
                    .map(|b| u16::from_be_bytes([b[0], b[1]])),
            );
        }
        let samples = raw.iter().map(|&v| v as f32 / 65535.0).collect();
        (samples, Some(raw))
    };
    Ok(PngSamples {
        width,
        height,
        channels,
        bit_depth,
        samples,
        raw16,
    })
}

/// Decodes an 8/16-bit RGB(A) PNG into linear-light color.
pub fn decode_color(bytes: &[u8]) -> Result<ColorImage, AssetError> {
    let png = decode_png(bytes)?;
    if png.channels < 3 {
        return Err(AssetError::UnsupportedFormat(
            "color images must be RGB or RGBA".into(),
        ));
    }
    // 8-bit input goes through a table so each code decodes identically everywhere.
    let lut: Vec<f32> = (0..256).map(|b| srgb_to_linear(b as f32 / 255.0)).collect();
    let c = png.channels;
    let data = (0..png.width * png.height)
        .map(|i| {
            let px = &png.samples[i * c..i * c + 3];
            if png.bit_depth == 8 {
                let byte = |v: f32| lut[(v * 255.0).round() as usize];
                [byte(px[0]), byte(px[1]), byte(px[2])]
            } else {
                [
                    srgb_to_linear(px[0]),
                    srgb_to_linear(px[1]),
                    srgb_to_linear(px[2]),
                ]
            }
        })
        .collect();
    Ok(Grid::from_vec(png.width, png.height, data))
}

pub fn load_color(path: impl AsRef<Path>) -> Result<ColorImage, AssetError> {
    decode_color(&read_file(path.as_ref())?)
}

/// Encodes linear color as an 8-bit sRGB PNG.
pub fn encode_color_png(image: &ColorImage) -> Result<Vec<u8>, AssetError> {
    let mut bytes: Vec<u8> = Vec::with_capacity(image.len() * 3);
    for px in image.iter() {
        for &ch in px {
            bytes.push((linear_to_srgb(ch) * 255.0).round() as u8);
        }
    }
    encode_png(
        image.width(),
        image.height(),
        png::ColorType::Rgb,
        png::BitDepth::Eight,
        &bytes,
    )
}

fn encode_png(
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    data: &[u8],
) -> Result<Vec<u8>, AssetError> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width as u32, height as u32);
        encoder.set_color(color);
        encoder.set_depth(depth);
        let mut writer = encoder
            .write_header()
            .map_err(|e| AssetError::MalformedImage(e.to_string()))?;
        writer
            .write_image_data(data)
            .map_err(|e| AssetError::MalformedImage(e.to_string()))?;
    }
    Ok(out)
}

/// Writes `image` as an 8-bit sRGB PNG.
pub fn save_frame(image: &ColorImage, path: impl AsRef<Path>) -> Result<(), AssetError> {
    let bytes = encode_color_png(image)?;
    write_file(path.as_ref(), &bytes)
}

/// File name of the `index`-th output frame.
pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:05}.png")
}

/// Decodes a depth file, sniffing PFM vs PNG from the leading bytes.
/// `depth_scale` maps 16-bit PNG codes `v ↦ v / 65535 · depth_scale`.
pub fn decode_depth(bytes: &[u8], depth_scale: f32) -> Result<DepthMap, AssetError> {
    let raw = if bytes.starts_with(b"PF") {
        return Err(AssetError::ColorPfm);
    } else if bytes.starts_with(b"Pf") {
        decode_pfm(bytes)?
    } else if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        decode_depth_png(bytes, depth_scale)?
    } else {
        return Err(AssetError::UnsupportedFormat(
            "depth must be a PFM or 16-bit grayscale PNG".into(),
        ));
    };
    sanitize_depth(raw)
}

pub fn load_depth(path: impl AsRef<Path>, depth_scale: f32) -> Result<DepthMap, AssetError> {
    decode_depth(&read_file(path.as_ref())?, depth_scale)
}

fn decode_depth_png(bytes: &[u8], depth_scale: f32) -> Result<DepthMap, AssetError> {
    let png = decode_png(bytes)?;
    let raw = match (png.channels, png.raw16) {
        (1, Some(raw)) => raw,
        _ => {
            return Err(AssetError::UnsupportedFormat(
                "depth PNG must be 16-bit grayscale".into(),
            ))
        }
    };
    let data = raw
        .into_iter()
        .map(|v| v as f32 / 65535.0 * depth_scale)
        .collect();
    Ok(Grid::from_vec(png.width, png.height, data))
}

/// Clamps to [`DEPTH_MIN`] unless too many pixels need it.
fn sanitize_depth(mut depth: DepthMap) -> Result<DepthMap, AssetError> {
    let total = depth.len();
    let bad = depth.iter().filter(|d| !(d.is_finite() && **d > 0.0)).count();
    if bad as f64 > DEGENERATE_DEPTH_FRACTION * total as f64 {
        return Err(AssetError::DegenerateDepth { bad, total });
    }
    let far = depth
        .iter()
        .copied()
        .filter(|d| d.is_finite())
        .fold(DEPTH_MIN, f32::max);
    for d in depth.as_mut_slice() {
        *d = if d.is_nan() {
            DEPTH_MIN
        } else if d.is_infinite() && *d > 0.0 {
            far
        } else {
            d.max(DEPTH_MIN)
        };
    }
    Ok(depth)
}

/// Splits off one whitespace-delimited header token.
fn pfm_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str, AssetError> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(AssetError::MalformedPfm("truncated header".into()));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .map_err(|_| AssetError::MalformedPfm("non-ASCII header".into()))
}

/// Decodes a grayscale PFM. Rows are stored bottom-to-top; a negative
/// scale field means little-endian samples.
pub fn decode_pfm(bytes: &[u8]) -> Result<DepthMap, AssetError> {
    let mut pos = 0;
    match pfm_token(bytes, &mut pos)? {
        "Pf" => {}
        "PF" => return Err(AssetError::ColorPfm),
        other => return Err(AssetError::MalformedPfm(format!("bad magic {other:?}"))),
    }
    let parse_dim = |tok: &str| {
        tok.parse::<usize>()
            .map_err(|_| AssetError::MalformedPfm(format!("bad dimension {tok:?}")))
    };
    let width = parse_dim(pfm_token(bytes, &mut pos)?)?;
    let height = parse_dim(pfm_token(bytes, &mut pos)?)?;
    let scale_tok = pfm_token(bytes, &mut pos)?;
    let scale: f32 = scale_tok
        .parse()
        .map_err(|_| AssetError::MalformedPfm(format!("bad scale {scale_tok:?}")))?;
    if width == 0 || height == 0 {
        return Err(AssetError::ZeroDimension);
    }
    if scale == 0.0 || !scale.is_finite() {
        return Err(AssetError::MalformedPfm("scale must be finite and non-zero".into()));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let payload = bytes.get(pos..).unwrap_or(&[]);
    let expected = width * height * 4;
    if payload.len() < expected {
        return Err(AssetError::MalformedPfm(format!(
            "expected {expected} bytes of samples, found {}",
            payload.len()
        )));
    }
    let little = scale < 0.0;
    let mut data = vec![0f32; width * height];
    for (i, chunk) in payload[..expected].chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        let (x, file_row) = (i % width, i / width);
        data[(height - 1 - file_row) * width + x] = v;
    }
    Ok(Grid::from_vec(width, height, data))
}

/// Encodes a grayscale little-endian PFM (scale −1).
pub fn encode_pfm(depth: &DepthMap) -> Vec<u8> {
    let (w, h) = depth.dims();
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for y in (0..h).rev() {
        for x in 0..w {
            out.extend_from_slice(&depth.get(x, y).to_le_bytes());
        }
    }
    out
}

pub fn save_pfm(depth: &DepthMap, path: impl AsRef<Path>) -> Result<(), AssetError> {
    write_file(path.as_ref(), &encode_pfm(depth))
}

/// Encodes depth as 16-bit grayscale PNG, `v = round(d / depth_scale · 65535)`.
pub fn encode_depth_png(depth: &DepthMap, depth_scale: f32) -> Result<Vec<u8>, AssetError> {
    let mut bytes = Vec::with_capacity(depth.len() * 2);
    for &d in depth.iter() {
        let v = (d / depth_scale * 65535.0).round().clamp(0.0, 65535.0) as u16;
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    encode_png(
        depth.width(),
        depth.height(),
        png::ColorType::Grayscale,
        png::BitDepth::Sixteen,
        &bytes,
    )
}

/// Decodes a Middlebury `.flo` file.
pub fn decode_flo(bytes: &[u8]) -> Result<FlowField, AssetError> {
    if bytes.len() < 4 || bytes[..4] != FLO_MAGIC.to_le_bytes() {
        return Err(AssetError::NotFlo);
    }
    if bytes.len() < 12 {
        return Err(AssetError::TruncatedFlow {
            expected: 8,
            found: bytes.len() - 4,
        });
    }
    let int_at = |o: usize| i32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]);
    let (w, h) = (int_at(4), int_at(8));
    if w <= 0 || h <= 0 {
        return Err(AssetError::FloDimensions {
            width: w as i64,
            height: h as i64,
        });
    }
    let (w, h) = (w as usize, h as usize);
    let payload = &bytes[12..];
    let expected = w * h * 8;
    if payload.len() < expected {
        return Err(AssetError::TruncatedFlow {
            expected,
            found: payload.len(),
        });
    }
    let data = payload[..expected]
        .chunks_exact(8)
        .map(|c| {
            [
                f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
            ]
        })
        .collect();
    Ok(Grid::from_vec(w, h, data))
}

pub fn encode_flo(flow: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + flow.len() * 8);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(flow.width() as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height() as i32).to_le_bytes());
    for [u, v] in flow.iter() {
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn load_flow(path: impl AsRef<Path>) -> Result<FlowField, AssetError> {
    decode_flo(&read_file(path.as_ref())?)
}

pub fn save_flow(flow: &FlowField, path: impl AsRef<Path>) -> Result<(), AssetError> {
    write_file(path.as_ref(), &encode_flo(flow))
}

/// Decodes a PNG mask; a pixel is set when its first channel is at least half.
pub fn decode_mask(bytes: &[u8]) -> Result<MaskImage, AssetError> {
    let png = decode_png(bytes)?;
    let c = png.channels;
    let data = (0..png.width * png.height)
        .map(|i| png.samples[i * c] >= 0.5)
        .collect();
    Ok(Grid::from_vec(png.width, png.height, data))
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<MaskImage, AssetError> {
    decode_mask(&read_file(path.as_ref())?)
}

pub fn encode_mask_png(mask: &MaskImage) -> Result<Vec<u8>, AssetError> {
    let bytes: Vec<u8> = mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
    encode_png(
        mask.width(),
        mask.height(),
        png::ColorType::Grayscale,
        png::BitDepth::Eight,
        &bytes,
    )
}

/// Single-channel visualization of a mask or depth layer, for debug dumps.
pub fn save_mask(mask: &MaskImage, path: impl AsRef<Path>) -> Result<(), AssetError> {
    write_file(path.as_ref(), &encode_mask_png(mask)?)
}

/// Color and depth (plus optional flow and mask) of one input scene, with
/// dimensions checked once up front.
#[derive(Debug, Clone)]
pub struct AssetBundle {
    pub color: ColorImage,
    pub depth: DepthMap,
    pub flow: Option<FlowField>,
    pub mask: Option<MaskImage>,
}

impl AssetBundle {
    pub fn new(
        color: ColorImage,
        depth: DepthMap,
        flow: Option<FlowField>,
        mask: Option<MaskImage>,
    ) -> Result<Self, AssetError> {
        let (w, h) = color.dims();
        let check = |what: &'static str, dims: (usize, usize)| {
            if dims == (w, h) {
                Ok(())
            } else {
                Err(AssetError::DimensionMismatch {
                    what,
                    got_w: dims.0,
                    got_h: dims.1,
                    want_w: w,
                    want_h: h,
                })
            }
        };
        check("depth", depth.dims())?;
        if let Some(f) = &flow {
            check("flow", f.dims())?;
        }
        if let Some(m) = &mask {
            check("mask", m.dims())?;
        }
        Ok(Self {
            color,
            depth,
            flow,
            mask,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.color.dims()
    }
}

/// Checks the color image invariants: finite channels in `[0, 1]`.
pub fn is_valid_color(image: &ColorImage) -> bool {
    image
        .iter()
        .all(|px| px.iter().all(|c| c.is_finite() && (0.0..=1.0).contains(c)))
}

/// Converts one linear pixel to the 8-bit sRGB codes [`save_frame`] writes.
pub fn to_srgb8(px: Rgb) -> [u8; 3] {
    px.map(|c| (linear_to_srgb(c) * 255.0).round() as u8)
}
