use crate::engine::result::{HeatmapGrid, RunResult, Sample};
use crate::engine::{DAY, HOUR};
use crate::error::ExportError;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const TIME_SERIES_HEADER: &str = "time_s,orders_per_hour,well_sortedness,mean_trip_time_to_pick,fill_level";

/// Pixels per storage tile in the raster image.
pub const TILE_PIXELS: usize = 8;

const BACKGROUND: [u8; 3] = [48, 48, 48];

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ExportError> {
    std::fs::write(path, bytes).map_err(|source| ExportError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// One header line plus one line per sample. Missing trip times stay empty.
pub fn time_series_csv(samples: &[Sample]) -> String {
    let mut out = String::with_capacity(64 * (samples.len() + 1));
    out.push_str(TIME_SERIES_HEADER);
    out.push('\n');
    for s in samples {
        let trip = s.mean_trip_time_to_pick.map(|t| t.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.time_s, s.orders_per_hour, s.well_sortedness, trip, s.fill_level
        );
    }
    out
}

pub fn export_time_series(result: &RunResult, path: &Path) -> Result<(), ExportError> {
    write_file(path, time_series_csv(&result.samples).as_bytes())
}

/// Score grid with the northmost row first, as in the image. Empty
/// locations are empty fields.
pub fn heatmap_csv(grid: &HeatmapGrid) -> String {
    let mut out = String::new();
    for row in (0..grid.rows).rev() {
        let line: Vec<String> = (0..grid.cols)
            .map(|col| grid.get(row, col).map(|v| v.to_string()).unwrap_or_default())
            .collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Blue for the lowest scores through cyan, yellow to red for the highest.
pub fn heat_color(t: f64) -> [u8; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let stops: [[f64; 3]; 4] = [
        [0.0, 0.0, 255.0],
        [0.0, 255.0, 255.0],
        [255.0, 255.0, 0.0],
        [255.0, 0.0, 0.0],
    ];
    let x = t * 3.0;
    let i = (x.floor() as usize).min(2);
    let f = x - i as f64;
    let mut c = [0u8; 3];
    for k in 0..3 {
        c[k] = (stops[i][k] + (stops[i + 1][k] - stops[i][k]) * f).round() as u8;
    }
    c
}

/// Binary PPM, score 0 cold and the grid maximum hot.
pub fn heatmap_ppm(grid: &HeatmapGrid) -> Vec<u8> {
    let max = grid.cells.iter().flatten().fold(0.0f64, |m, &v| m.max(v));
    let (w, h) = (grid.cols as usize * TILE_PIXELS, grid.rows as usize * TILE_PIXELS);
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.reserve(w * h * 3);
    for y in 0..h {
        let row = grid.rows - 1 - (y / TILE_PIXELS) as u32;
        for x in 0..w {
            let color = match grid.get(row, (x / TILE_PIXELS) as u32) {
                Some(v) if max > 0.0 => heat_color(v / max),
                Some(_) => heat_color(0.0),
                None => BACKGROUND,
            };
            out.extend_from_slice(&color);
        }
    }
    out
}

/// Writes `<stem>.csv` and `<stem>.ppm`.
pub fn export_heatmap(grid: &HeatmapGrid, stem: &Path) -> Result<(), ExportError> {
    write_file(&stem.with_extension("csv"), heatmap_csv(grid).as_bytes())?;
    write_file(&stem.with_extension("ppm"), &heatmap_ppm(grid))
}

/// `heatmap_d2_2200` for 22:00 on the second day.
pub fn heatmap_label(time_s: f64) -> String {
    let clock = time_s + 6.0 * HOUR;
    let day = (clock / DAY).floor() as i64 + 1;
    let secs = (clock - (day - 1) as f64 * DAY).round() as i64;
    format!("heatmap_d{day}_{:02}{:02}", secs / 3600, secs % 3600 / 60)
}

/// Writes the JSON result, the time series and every heatmap into `dir`,
/// returning the paths written.
pub fn write_run_artifacts(result: &RunResult, dir: &Path) -> Result<Vec<PathBuf>, ExportError> {
    std::fs::create_dir_all(dir).map_err(|source| ExportError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut written = Vec::new();
    let json = dir.join("result.json");
    write_file(&json, result.to_json().as_bytes())?;
    written.push(json);
    let series = dir.join("timeseries.csv");
    export_time_series(result, &series)?;
    written.push(series);
    for grid in &result.heatmaps {
        let stem = dir.join(heatmap_label(grid.time_s));
        export_heatmap(grid, &stem)?;
        written.push(stem.with_extension("csv"));
        written.push(stem.with_extension("ppm"));
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(cells: Vec<Option<f64>>, rows: u32, cols: u32) -> HeatmapGrid {
        HeatmapGrid {
            time_s: 0.0,
            rows,
            cols,
            cells,
        }
    }

    #[test]
    fn labels_use_wall_clock() {
        assert_eq!(heatmap_label(16.0 * HOUR), "heatmap_d1_2200");
        assert_eq!(heatmap_label(DAY), "heatmap_d2_0600");
        assert_eq!(heatmap_label(3.0 * DAY + 16.0 * HOUR), "heatmap_d4_2200");
    }

    #[test]
    fn color_ramp_ends() {
        assert_eq!(heat_color(0.0), [0, 0, 255]);
        assert_eq!(heat_color(1.0), [255, 0, 0]);
        assert_eq!(heat_color(f64::NAN), [0, 0, 255]);
    }

    #[test]
    fn empty_grid_is_background() {
        let g = grid(vec![None; 6], 2, 3);
        let ppm = heatmap_ppm(&g);
        let header = format!("P6\n{} {}\n255\n", 3 * TILE_PIXELS, 2 * TILE_PIXELS);
        assert!(ppm.starts_with(header.as_bytes()));
        let pixels = &ppm[header.len()..];
        assert_eq!(pixels.len(), 6 * TILE_PIXELS * TILE_PIXELS * 3);
        assert!(pixels.chunks(3).all(|p| p == BACKGROUND));
        assert_eq!(heatmap_csv(&g), ",,\n,,\n");
    }

    #[test]
    fn north_row_comes_first() {
        let g = grid(vec![Some(1.0), None, None, Some(2.0)], 2, 2);
        assert_eq!(heatmap_csv(&g), ",2\n1,\n");
        let ppm = heatmap_ppm(&g);
        let header = format!("P6\n{} {}\n255\n", 2 * TILE_PIXELS, 2 * TILE_PIXELS).len();
        // top-right pixel belongs to the hottest tile
        let top_right = header + (2 * TILE_PIXELS - 1) * 3;
        assert_eq!(&ppm[top_right..top_right + 3], &[255, 0, 0]);
    }

    #[test]
    fn empty_series_is_header_only() {
        assert_eq!(time_series_csv(&[]), format!("{TIME_SERIES_HEADER}\n"));
    }
}
