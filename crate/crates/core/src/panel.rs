//! Time-major data matrix shared by the generator, the detector and the CSV
//! readers and writers.

use std::io::{Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("row {row}: expected {expected} columns, found {found}")]
    Width { row: usize, expected: usize, found: usize },
    #[error("row {row}, column {column}: cannot parse {value:?} as a number")]
    Parse { row: usize, column: usize, value: String },
    #[error("row {row}: {source}")]
    Csv { row: usize, source: csv::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `rows × width` observations; row `t` holds `X_{1,t+1} … X_{d,t+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    width: usize,
    values: Vec<f64>,
}

impl Panel {
    pub fn zeros(width: usize, rows: usize) -> Self {
        Self { width, values: vec![0.0; width * rows] }
    }

    pub fn from_rows(width: usize, values: Vec<f64>) -> Self {
        assert!(width > 0 && values.len().is_multiple_of(width), "ragged panel");
        Self { width, values }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> usize {
        self.values.len() / self.width
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.width..(t + 1) * self.width]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.values[t * self.width..(t + 1) * self.width]
    }

    pub fn get(&self, t: usize, i: usize) -> f64 {
        self.values[t * self.width + i]
    }

    pub fn set(&mut self, t: usize, i: usize, v: f64) {
        self.values[t * self.width + i] = v;
    }

    /// Copies column `i` into a vector.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.values.iter().skip(i).step_by(self.width).copied().collect()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.width)
    }

    /// Writes headerless CSV, one row per time step.
    pub fn write_csv<W: Write>(&self, out: W, delimiter: u8) -> Result<(), PanelError> {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).has_headers(false).from_writer(out);
        for (t, row) in self.iter_rows().enumerate() {
            w.write_record(row.iter().map(|v| v.to_string()))
                .map_err(|source| PanelError::Csv { row: t, source })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a whole CSV file into memory.
    pub fn read_csv<R: Read>(input: R, format: CsvFormat) -> Result<Self, PanelError> {
        let mut rows = CsvRows::new(input, format);
        let mut values = Vec::new();
        let mut width = 0;
        while let Some(row) = rows.next_row()? {
            width = row.len();
            values.extend_from_slice(row);
        }
        if width == 0 {
            return Ok(Self { width: format.width.unwrap_or(1), values });
        }
        Ok(Self { width, values })
    }
}

/// Layout of an input CSV file.
#[derive(Debug, Clone, Copy)]
pub struct CsvFormat {
    pub delimiter: u8,
    pub has_header: bool,
    /// Expected number of columns; inferred from the first row when `None`.
    pub width: Option<usize>,
}

impl Default for CsvFormat {
    fn default() -> Self {
        Self { delimiter: b',', has_header: false, width: None }
    }
}

/// Row-by-row numeric CSV reader. Row indices in errors are 1-based data rows
/// (the header, if any, is not counted).
pub struct CsvRows<R: Read> {
    reader: csv::Reader<R>,
    record: csv::StringRecord,
    buf: Vec<f64>,
    width: Option<usize>,
    row: usize,
}

impl<R: Read> CsvRows<R> {
    pub fn new(input: R, format: CsvFormat) -> Self {
        let reader = csv::ReaderBuilder::new()
            .delimiter(format.delimiter)
            .has_headers(format.has_header)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(input);
        Self { reader, record: csv::StringRecord::new(), buf: Vec::new(), width: format.width, row: 0 }
    }

    /// Number of data rows returned so far.
    pub fn rows_read(&self) -> usize {
        self.row
    }

    pub fn next_row(&mut self) -> Result<Option<&[f64]>, PanelError> {
        let row = self.row + 1;
        let more = self
            .reader
            .read_record(&mut self.record)
            .map_err(|source| PanelError::Csv { row, source })?;
        if !more {
            return Ok(None);
        }
        let expected = *self.width.get_or_insert(self.record.len());
        if self.record.len() != expected {
            return Err(PanelError::Width { row, expected, found: self.record.len() });
        }
        self.buf.clear();
        for (column, field) in self.record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| PanelError::Parse {
                row,
                column: column + 1,
                value: field.to_string(),
            })?;
            if !v.is_finite() {
                return Err(PanelError::Parse { row, column: column + 1, value: field.to_string() });
            }
            self.buf.push(v);
        }
        self.row = row;
        Ok(Some(&self.buf))
    }
}
