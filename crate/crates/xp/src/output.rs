//! CSV tables and their optional SVG rendering.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Result, XpError};
use crate::svg::{line_plot, Series};

/// How to draw a table.
#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_col: usize,
    pub y_cols: Vec<usize>,
    /// Split rows into one line per distinct value of this column.
    pub group_col: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Table {
    /// File stem.
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub plot: Option<PlotSpec>,
}

impl Table {
    pub fn new(name: &str, columns: Vec<String>) -> Self {
        Table {
            name: name.into(),
            columns,
            rows: Vec::new(),
            plot: None,
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn with_plot(mut self, plot: PlotSpec) -> Self {
        self.plot = Some(plot);
        self
    }

    /// Writes `<dir>/<name>.csv`: a `# config_hash=… seed=…` line, the
    /// header, then one row per record.
    pub fn write_csv(&self, dir: &Path, hash: &str, seed: u64) -> Result<PathBuf> {
        let path = dir.join(format!("{}.csv", self.name));
        let io = |e| XpError::io(&path, e);
        let mut file = File::create(&path).map_err(io)?;
        writeln!(file, "# config_hash={hash} seed={seed}").map_err(io)?;
        let mut w = csv::Writer::from_writer(file);
        let csv_err = |e: csv::Error| XpError::io(&path, e.into());
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))
                .map_err(csv_err)?;
        }
        w.flush().map_err(io)?;
        Ok(path)
    }

    pub fn write_svg(&self, dir: &Path) -> Result<Option<PathBuf>> {
        let Some(spec) = &self.plot else {
            return Ok(None);
        };
        let mut series = Vec::new();
        for &yc in &spec.y_cols {
            match spec.group_col {
                None => series.push(Series {
                    name: self.columns[yc].clone(),
                    points: self.rows.iter().map(|r| (r[spec.x_col], r[yc])).collect(),
                }),
                Some(gc) => {
                    let mut groups: Vec<f64> = self.rows.iter().map(|r| r[gc]).collect();
                    groups.dedup();
                    for g in groups {
                        series.push(Series {
                            name: format!("{} {}", self.columns[gc], g),
                            points: self
                                .rows
                                .iter()
                                .filter(|r| r[gc] == g)
                                .map(|r| (r[spec.x_col], r[yc]))
                                .collect(),
                        });
                    }
                }
            }
        }
        let legend = spec.group_col.is_none();
        let svg = line_plot(&spec.title, &spec.x_label, &spec.y_label, &series, legend);
        let path = dir.join(format!("{}.svg", self.name));
        std::fs::write(&path, svg).map_err(|e| XpError::io(&path, e))?;
        Ok(Some(path))
    }
}
