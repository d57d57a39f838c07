//! Grayscale raster I/O.
//!
//! The on-disk format is deliberately minimal: a single ASCII header line
//! `"<width> <height>\n"` followed by exactly `width * height` raw bytes in
//! row-major order. Label maps use the binary convention `0 -> -1` and
//! `255 -> +1`; feature channels store values quantized to `0..=255` over
//! the unit interval.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{GridShape, Labeling};

fn encode(shape: GridShape, bytes: Vec<u8>) -> Vec<u8> {
    let mut out = format!("{} {}\n", shape.width, shape.height).into_bytes();
    out.extend(bytes);
    out
}

fn decode(raw: &[u8]) -> Result<(GridShape, &[u8])> {
    let newline = raw
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::MalformedHeader("missing newline after dimensions".into()))?;
    let header = std::str::from_utf8(&raw[..newline])
        .map_err(|_| Error::MalformedHeader("header is not ASCII".into()))?;
    let mut parts = header.split_whitespace();
    let width: usize = parts
        .next()
        .ok_or_else(|| Error::MalformedHeader("missing width".into()))?
        .parse()
        .map_err(|_| Error::MalformedHeader(format!("unparseable width in {header:?}")))?;
    let height: usize = parts
        .next()
        .ok_or_else(|| Error::MalformedHeader("missing height".into()))?
        .parse()
        .map_err(|_| Error::MalformedHeader(format!("unparseable height in {header:?}")))?;
    if parts.next().is_some() {
        return Err(Error::MalformedHeader(format!(
            "trailing tokens in header {header:?}"
        )));
    }
    let shape = GridShape::new(width, height)
        .map_err(|_| Error::MalformedHeader(format!("degenerate dimensions {width}x{height}")))?;
    let body = &raw[newline + 1..];
    if body.len() != shape.pixels() {
        return Err(Error::MalformedHeader(format!(
            "expected {} pixel bytes for {width}x{height}, found {}",
            shape.pixels(),
            body.len()
        )));
    }
    Ok((shape, body))
}

/// Write a labeling as a binary raster (`-1 -> 0`, `+1 -> 255`).
pub fn write_label_map(path: &Path, labeling: &Labeling, shape: GridShape) -> Result<()> {
    if labeling.len() != shape.pixels() {
        return Err(Error::DimensionMismatch {
            context: "label map",
            expected: shape.pixels(),
            actual: labeling.len(),
        });
    }
    let bytes: Vec<u8> = labeling
        .values()
        .iter()
        .map(|&v| if v == 1 { 255 } else { 0 })
        .collect();
    fs::write(path, encode(shape, bytes))?;
    Ok(())
}

/// Read a binary raster as a labeling (`0 -> -1`, `255 -> +1`).
pub fn read_label_map(path: &Path) -> Result<(Labeling, GridShape)> {
    let raw = fs::read(path)?;
    let (shape, body) = decode(&raw)?;
    let values: Vec<i8> = body
        .iter()
        .enumerate()
        .map(|(index, &byte)| match byte {
            0 => Ok(-1),
            255 => Ok(1),
            value => Err(Error::NonBinaryLabel { index, value }),
        })
        .collect::<Result<_>>()?;
    Ok((Labeling::new(values)?, shape))
}

/// Write one feature channel, quantizing the unit interval to `0..=255`.
/// Values outside `[0, 1]` are clamped.
pub fn write_channel(path: &Path, values: &[f64], shape: GridShape) -> Result<()> {
    if values.len() != shape.pixels() {
        return Err(Error::DimensionMismatch {
            context: "channel raster",
            expected: shape.pixels(),
            actual: values.len(),
        });
    }
    let bytes: Vec<u8> = values
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    fs::write(path, encode(shape, bytes))?;
    Ok(())
}

/// Read one feature channel back to unit-interval values.
pub fn read_channel(path: &Path) -> Result<(Vec<f64>, GridShape)> {
    let raw = fs::read(path)?;
    let (shape, body) = decode(&raw)?;
    let values = body.iter().map(|&b| b as f64 / 255.0).collect();
    Ok((values, shape))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn label_round_trip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = StdRng::seed_from_u64(5);
        for trial in 0..10 {
            let shape = GridShape::new(rng.gen_range(1..9), rng.gen_range(1..9)).unwrap();
            let values: Vec<i8> = (0..shape.pixels())
                .map(|_| if rng.gen_bool(0.5) { 1 } else { -1 })
                .collect();
            let labeling = Labeling::new(values).unwrap();
            let path = dir.path().join(format!("labels_{trial}.raster"));
            write_label_map(&path, &labeling, shape).unwrap();
            let (restored, restored_shape) = read_label_map(&path).unwrap();
            assert_eq!(restored, labeling);
            assert_eq!(restored_shape, shape);
        }
    }

    #[test]
    fn all_255_reads_as_all_foreground() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ones.raster");
        fs::write(&path, b"2 2\n\xff\xff\xff\xff").unwrap();
        let (labeling, shape) = read_label_map(&path).unwrap();
        assert_eq!(shape, GridShape::new(2, 2).unwrap());
        assert_eq!(labeling.values(), &[1, 1, 1, 1]);
    }

    #[test]
    fn mismatched_dimensions_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.raster");
        fs::write(&path, b"3 2\n\x00\x00\x00").unwrap();
        assert!(matches!(
            read_label_map(&path),
            Err(Error::MalformedHeader(_))
        ));
    }

    #[test]
    fn garbage_header_errors() {
        let dir = tempfile::tempdir().unwrap();
        for body in [&b"no dims here\n\x00"[..], b"4\n\x00", b"2 2 2\n\x00\x00\x00\x00"] {
            let path = dir.path().join("bad.raster");
            fs::write(&path, body).unwrap();
            assert!(matches!(
                read_label_map(&path),
                Err(Error::MalformedHeader(_))
            ));
        }
    }

    #[test]
    fn gray_values_are_rejected_for_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gray.raster");
        fs::write(&path, b"2 1\n\x00\x80").unwrap();
        match read_label_map(&path) {
            Err(Error::NonBinaryLabel { index, value }) => {
                assert_eq!(index, 1);
                assert_eq!(value, 0x80);
            }
            other => panic!("expected NonBinaryLabel, got {other:?}"),
        }
    }

    #[test]
    fn channel_round_trip_on_grid_points() {
        let dir = tempfile::tempdir().unwrap();
        let shape = GridShape::new(4, 2).unwrap();
        let values: Vec<f64> = (0..8).map(|k| (k * 30) as f64 / 255.0).collect();
        let path = dir.path().join("channel.raster");
        write_channel(&path, &values, shape).unwrap();
        let (restored, restored_shape) = read_channel(&path).unwrap();
        assert_eq!(restored_shape, shape);
        assert_eq!(restored, values);
    }

    #[test]
    fn channel_clamps_out_of_range_values() {
        let dir = tempfile::tempdir().unwrap();
        let shape = GridShape::new(2, 1).unwrap();
        let path = dir.path().join("clamped.raster");
        write_channel(&path, &[-0.5, 1.7], shape).unwrap();
        let (restored, _) = read_channel(&path).unwrap();
        assert_eq!(restored, vec![0.0, 1.0]);
    }

    #[test]
    fn wrong_length_labeling_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("never.raster");
        let shape = GridShape::new(3, 3).unwrap();
        let labeling = Labeling::all_background(4);
        assert!(write_label_map(&path, &labeling, shape).is_err());
    }
}
