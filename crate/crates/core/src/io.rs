//! CSV data files: comma separated, header row of attribute names in schema
//! order, empty cell = missing, coded-flag cells hold the raw integer.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::schema::{
    decode_coded_field, encode_coded_field, AttributeKind, CellValue, Dataset, DatasetSchema,
    Record,
};

fn parse_cell(text: &str, schema: &DatasetSchema, col: usize, row: usize) -> Result<CellValue> {
    if text.is_empty() {
        return Ok(CellValue::Missing);
    }
    let attr = &schema.attributes()[col];
    match attr.kind() {
        AttributeKind::CodedFlag => {
            let raw: u64 = text.trim().parse().map_err(|_| Error::InvalidRecord {
                row,
                detail: format!("{}: `{text}` is not a non-negative integer code", attr.name()),
            })?;
            decode_coded_field(raw, attr).map(CellValue::FlagSet)
        }
        _ => Ok(CellValue::Category(text.to_string())),
    }
}

fn format_cell(cell: &CellValue, schema: &DatasetSchema, col: usize) -> Result<String> {
    Ok(match cell {
        CellValue::Missing => String::new(),
        CellValue::Category(c) => c.clone(),
        CellValue::FlagSet(flags) => {
            encode_coded_field(flags, &schema.attributes()[col])?.to_string()
        }
    })
}

/// Reads records whose header may omit the class attribute (filled as Missing).
/// Any other header mismatch is reported by name.
pub fn read_records<R: Read>(
    reader: R,
    schema: &DatasetSchema,
    allow_absent_class: bool,
    origin: &Path,
) -> Result<Vec<Record>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::csv(origin, e))?
        .iter()
        .map(str::to_string)
        .collect();

    let mut columns = Vec::with_capacity(header.len());
    for name in &header {
        let idx = schema
            .index_of(name)
            .ok_or_else(|| Error::Schema(format!("column `{name}` is not in the schema")))?;
        if columns.contains(&idx) {
            return Err(Error::Schema(format!("column `{name}` appears twice")));
        }
        columns.push(idx);
    }
    let expected: Vec<&str> = schema.names().collect();
    let in_order = header.iter().map(String::as_str).eq(expected.iter().copied());
    if !in_order {
        let class = schema.class_attribute();
        let without_class: Vec<&str> = expected
            .iter()
            .copied()
            .filter(|n| Some(*n) != class)
            .collect();
        let ok = allow_absent_class
            && class.is_some()
            && header.iter().map(String::as_str).eq(without_class.iter().copied());
        if !ok {
            let absent: Vec<&str> = expected
                .iter()
                .copied()
                .filter(|n| !header.iter().any(|h| h == n))
                .collect();
            return Err(Error::Schema(format!(
                "header does not match schema order [{}]; absent: [{}]",
                expected.join(", "),
                absent.join(", ")
            )));
        }
    }

    let mut records = Vec::new();
    for (row, result) in rdr.records().enumerate() {
        let line = result.map_err(|e| Error::csv(origin, e))?;
        if line.len() != header.len() {
            return Err(Error::InvalidRecord {
                row,
                detail: format!("{} fields, header has {}", line.len(), header.len()),
            });
        }
        let mut record = vec![CellValue::Missing; schema.len()];
        for (field, &col) in line.iter().zip(&columns) {
            record[col] = parse_cell(field, schema, col, row)?;
        }
        records.push(record);
    }
    Ok(records)
}

/// Reads a data file that must carry every schema attribute in order.
pub fn read_dataset(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let records = read_records(file, schema, false, path)?;
    Dataset::new(schema.clone(), records)
}

pub fn write_dataset_to<W: Write>(writer: W, ds: &Dataset, origin: &Path) -> Result<()> {
    let schema = ds.schema();
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(writer);
    wtr.write_record(schema.names())
        .map_err(|e| Error::csv(origin, e))?;
    for record in ds.records() {
        let fields = record
            .iter()
            .enumerate()
            .map(|(col, cell)| format_cell(cell, schema, col))
            .collect::<Result<Vec<_>>>()?;
        wtr.write_record(&fields).map_err(|e| Error::csv(origin, e))?;
    }
    wtr.flush().map_err(|e| Error::io(origin, e))
}

pub fn write_dataset(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset_to(std::io::BufWriter::new(file), ds, path)
}
