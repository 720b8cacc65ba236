use std::path::Path;

use image::{GrayImage, Luma};

use crate::error::{Error, Result};
use crate::model::{CellId, Matrix, RegionConfig};

/// Loads a grayscale raster (PGM or PNG) as a static 0/1 matrix. The raster
/// must be exactly one pixel per grid cell; pixel row 0 is the northern edge.
/// Any non-zero pixel is 1.
pub fn import_raster(path: &Path, grid: &RegionConfig) -> Result<Matrix> {
    let img = image::open(path)
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .to_luma8();
    raster_to_matrix(&img, grid)
}

pub fn raster_to_matrix(img: &GrayImage, grid: &RegionConfig) -> Result<Matrix> {
    let (w, h) = img.dimensions();
    if w != grid.cols() || h != grid.rows() {
        return Err(Error::RasterShape {
            expected_w: grid.cols(),
            expected_h: grid.rows(),
            actual_w: w,
            actual_h: h,
        });
    }
    let cells = img
        .enumerate_pixels()
        .filter(|(_, _, p)| p.0[0] > 0)
        .map(|(x, y, _)| (CellId::new(x, h - 1 - y), 1.0));
    Ok(Matrix::new_static(*grid, cells.collect::<Vec<_>>()))
}

/// Renders a matrix's latest non-zero cells as a binary raster (255 = set).
pub fn matrix_to_raster(m: &Matrix) -> GrayImage {
    let (w, h) = (m.grid.cols(), m.grid.rows());
    let mut img = GrayImage::new(w, h);
    for (cell, series) in m.by_cell() {
        if series.last().is_some_and(|(_, v)| *v != 0.0) {
            img.put_pixel(cell.cx, h - 1 - cell.cy, Luma([255]));
        }
    }
    img
}

/// Writes a raster; the format follows the file extension (`.pgm` or `.png`).
pub fn write_raster(img: &GrayImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn north_row_maps_to_top_of_raster() {
        let grid = RegionConfig::square(3, 64.0);
        let mut img = GrayImage::new(3, 3);
        img.put_pixel(0, 0, Luma([7]));
        img.put_pixel(2, 2, Luma([255]));
        let m = raster_to_matrix(&img, &grid).unwrap();
        assert_eq!(m.static_value(CellId::new(0, 2)), 1.0);
        assert_eq!(m.static_value(CellId::new(2, 0)), 1.0);
        assert_eq!(m.len(), 2);
        assert_eq!(matrix_to_raster(&m).get_pixel(0, 0).0[0], 255);
    }

    #[test]
    fn wrong_shape_is_rejected() {
        let grid = RegionConfig::square(3, 64.0);
        let err = raster_to_matrix(&GrayImage::new(4, 3), &grid).unwrap_err();
        assert!(matches!(err, Error::RasterShape { actual_w: 4, .. }));
    }

    #[test]
    fn pgm_and_png_round_trip() {
        let grid = RegionConfig::square(4, 32.0);
        let m = Matrix::new_static(grid, vec![(CellId::new(1, 3), 1.0), (CellId::new(2, 0), 1.0)]);
        let dir = tempfile::tempdir().unwrap();
        for name in ["mask.pgm", "mask.png"] {
            let path = dir.path().join(name);
            write_raster(&matrix_to_raster(&m), &path).unwrap();
            assert_eq!(import_raster(&path, &grid).unwrap(), m);
        }
    }

    #[test]
    fn missing_file_names_path() {
        let err = import_raster(Path::new("/nonexistent/roads.pgm"), &RegionConfig::square(2, 8.0)).unwrap_err();
        assert!(err.to_string().contains("roads.pgm"), "{err}");
    }
}
