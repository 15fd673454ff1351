use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Result, RpuError};

use super::{DatasetRole, TripDataset, TripRecord};

pub const CSV_HEADER: [&str; 6] = ["passenger_id", "origin", "destination", "start_min", "end_min", "day_of_week"];

/// Loads a trip CSV. The dataset label is the file stem.
pub fn load_csv(path: impl AsRef<Path>, role: DatasetRole) -> Result<TripDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| RpuError::Io { path: path.to_owned(), source })?;
    let label = path.file_stem().map_or_else(|| "dataset".to_owned(), |s| s.to_string_lossy().into_owned());
    read_csv(file, role, label)
}

pub fn read_csv<R: Read>(reader: R, role: DatasetRole, label: impl Into<String>) -> Result<TripDataset> {
    let label = label.into();
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();

    for h in headers.iter() {
        if !CSV_HEADER.contains(&h) {
            return Err(RpuError::Schema(format!("unknown column '{h}'")));
        }
    }
    let mut pos = [0usize; 6];
    for (slot, name) in pos.iter_mut().zip(CSV_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| RpuError::Schema(format!("missing column '{name}'")))?;
    }

    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| RpuError::Parse { row: row_no, message: e.to_string() })?;
        let field = |k: usize| row.get(pos[k]).unwrap_or("");
        let minutes = |k: usize| {
            field(k).parse::<i64>().map_err(|_| RpuError::Parse {
                row: row_no,
                message: format!("{} is not an integer: '{}'", CSV_HEADER[k], field(k)),
            })
        };
        records.push(TripRecord {
            passenger_id: field(0).to_owned(),
            origin: field(1).to_owned(),
            destination: field(2).to_owned(),
            start_min: minutes(3)?,
            end_min: minutes(4)?,
            day_of_week: field(5).parse().map_err(|message| RpuError::Parse { row: row_no, message })?,
        });
    }
    if records.is_empty() {
        return Err(RpuError::EmptyDataset(label));
    }
    log::debug!("loaded {} rows into '{label}'", records.len());
    Ok(TripDataset::new(records, role, label))
}

pub fn write_csv_to<W: Write>(ds: &TripDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in ds.iter() {
        w.write_record([
            r.passenger_id.as_str(),
            &r.origin,
            &r.destination,
            &r.start_min.to_string(),
            &r.end_min.to_string(),
            r.day_of_week.as_str(),
        ])?;
    }
    w.flush().map_err(|e| RpuError::Csv(e.into()))?;
    Ok(())
}

pub fn write_csv(ds: &TripDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| RpuError::Io { path: path.to_owned(), source })?;
    write_csv_to(ds, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::DayOfWeek;

    const SAMPLE: &str = "passenger_id,origin,destination,start_min,end_min,day_of_week\n\
        p1,A,B,480,510,Mon\n\
        p1,B,A,1020,1050,Mon\n\
        p2,C,A,600,640,Sat\n";

    #[test]
    fn parses_three_rows() {
        let ds = read_csv(SAMPLE.as_bytes(), DatasetRole::Holdout, "real").unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.role(), DatasetRole::Holdout);
        assert_eq!(ds.records()[2].day_of_week, DayOfWeek::Sat);
        assert_eq!(ds.records()[1].start_min, 1020);
    }

    #[test]
    fn header_only_is_empty() {
        let err = read_csv(&b"passenger_id,origin,destination,start_min,end_min,day_of_week\n"[..], DatasetRole::Train, "t")
            .unwrap_err();
        assert!(matches!(err, RpuError::EmptyDataset(_)));
    }

    #[test]
    fn missing_and_unknown_columns_are_named() {
        let err = read_csv(&b"passenger_id,origin,destination,start_min,end_min\np,A,B,1,2\n"[..], DatasetRole::Train, "t")
            .unwrap_err();
        assert!(err.to_string().contains("day_of_week"), "{err}");
        let err = read_csv(
            &b"passenger_id,origin,destination,start_min,end_min,day_of_week,fare\np,A,B,1,2,Mon,3\n"[..],
            DatasetRole::Train,
            "t",
        )
        .unwrap_err();
        assert!(err.to_string().contains("fare"), "{err}");
    }

    #[test]
    fn non_integer_time_reports_row() {
        let csv = "passenger_id,origin,destination,start_min,end_min,day_of_week\np,A,B,1,2,Mon\np,A,B,7.5,9,Tue\n";
        match read_csv(csv.as_bytes(), DatasetRole::Train, "t").unwrap_err() {
            RpuError::Parse { row, message } => {
                assert_eq!(row, 2);
                assert!(message.contains("start_min"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn round_trips_through_writer() {
        let ds = read_csv(SAMPLE.as_bytes(), DatasetRole::Train, "real").unwrap();
        let mut buf = Vec::new();
        write_csv_to(&ds, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), SAMPLE);
    }
}
