//! CSV exchange format for datasets and embeddings.
//!
//! Header `x1,...,xd` (datasets) or `y1,...,yk` (embeddings), one row per
//! point, numbers in scientific notation with 17 significant digits so that
//! every `f64` survives a round trip exactly.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::PointCloud;

/// Formats a value with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn header(prefix: char, dim: usize) -> Vec<String> {
    (1..=dim).map(|j| format!("{prefix}{j}")).collect()
}

pub fn write_cloud<W: Write>(out: W, prefix: char, cloud: &PointCloud) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(prefix, cloud.dim()))?;
    for row in cloud.rows() {
        w.write_record(row.iter().map(|v| format_f64(*v)))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_cloud_file(path: &Path, prefix: char, cloud: &PointCloud) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_cloud(std::io::BufWriter::new(f), prefix, cloud)
}

/// Reads a cloud, checking the header when `prefix` is given.
pub fn read_cloud<R: Read>(input: R, prefix: Option<char>) -> Result<PointCloud> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let head = r.headers()?.clone();
    let dim = head.len();
    if dim == 0 {
        return Err(Error::Argument("empty CSV header".into()));
    }
    if let Some(p) = prefix {
        let expected = header(p, dim);
        if head.iter().zip(&expected).any(|(a, b)| a.trim() != b) {
            return Err(Error::Argument(format!(
                "CSV header {:?} does not match {}",
                head.iter().collect::<Vec<_>>(),
                expected.join(",")
            )));
        }
    }
    let mut data = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != dim {
            return Err(Error::Argument(format!(
                "row {i} has {} fields, expected {dim}",
                rec.len()
            )));
        }
        for field in rec.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Argument(format!("row {i}: cannot parse {field:?} as a number")))?;
            data.push(v);
        }
    }
    if data.is_empty() {
        return Err(Error::Argument("CSV has no data rows".into()));
    }
    PointCloud::new(dim, data)
}

pub fn read_cloud_file(path: &Path, prefix: Option<char>) -> Result<PointCloud> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_cloud(std::io::BufReader::new(f), prefix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_and_format() {
        let c = PointCloud::from_rows(&[[0.5, -1.0]]).unwrap();
        let mut buf = Vec::new();
        write_cloud(&mut buf, 'x', &c).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "x1,x2\n5.0000000000000000e-1,-1.0000000000000000e0\n");
    }

    #[test]
    fn header_mismatch_is_an_error() {
        let text = "y1,y2\n1,2\n";
        assert!(read_cloud(text.as_bytes(), Some('x')).is_err());
        assert!(read_cloud(text.as_bytes(), Some('y')).is_ok());
        assert!(read_cloud("y1\n".as_bytes(), None).is_err());
        assert!(read_cloud("y1,y2\n1,abc\n".as_bytes(), None).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(vals in prop::collection::vec(-1e12f64..1e12, 1..40)) {
            let dim = 1 + vals.len() % 3;
            let len = vals.len() / dim * dim;
            prop_assume!(len > 0);
            let c = PointCloud::new(dim, vals[..len].to_vec()).unwrap();
            let mut buf = Vec::new();
            write_cloud(&mut buf, 'x', &c).unwrap();
            let back = read_cloud(buf.as_slice(), Some('x')).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
