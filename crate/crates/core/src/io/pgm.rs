//! Binary PGM (P5) image output for quick visual inspection of depth maps
//! and bird's-eye-view grids.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::bev::BevGrid;
use crate::depthmap::DepthMap;

pub fn write_pgm(
    path: &Path,
    width: usize,
    height: usize,
    pixels: &[u8],
) -> std::io::Result<()> {
    assert_eq!(pixels.len(), width * height, "pgm data/shape mismatch");
    let mut file = fs::File::create(path)?;
    write!(file, "P5\n{width} {height}\n255\n")?;
    file.write_all(pixels)?;
    Ok(())
}

/// Grayscale depth rendering with a fixed scale: 0 depth (nothing observed)
/// maps to black, `d_max` and beyond to white. The fixed scale keeps renders
/// of the same scene comparable across runs and modes.
pub fn depth_to_pixels(map: &DepthMap, d_max: f64) -> Vec<u8> {
    map.data()
        .iter()
        .map(|&d| ((d / d_max).clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

/// Occupancy rendering normalized to the grid's own peak (all black when
/// the grid is empty).
pub fn grid_to_pixels(grid: &BevGrid) -> Vec<u8> {
    let peak = grid.data().iter().cloned().fold(0.0f64, f64::max);
    if peak <= 0.0 {
        return vec![0u8; grid.data().len()];
    }
    grid.data()
        .iter()
        .map(|&v| ((v / peak).clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_payload_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        write_pgm(&path, 3, 2, &[0, 64, 128, 192, 255, 10]).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(&bytes[bytes.len() - 6..], &[0, 64, 128, 192, 255, 10]);
    }

    #[test]
    fn depth_scaling_is_fixed_and_clamped() {
        let map = DepthMap::new(4, 1, 16, vec![0.0, 29.0, 58.0, 100.0]);
        let px = depth_to_pixels(&map, 58.0);
        assert_eq!(px, vec![0, 128, 255, 255]);
    }
}
