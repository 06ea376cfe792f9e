//! File formats: calibration, sample and prior-test CSVs, model and
//! characteristics JSON, and estimate reports. Times are decimal years.

use std::io::{Read, Write};
use std::path::Path;

use csv::StringRecord;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::assay::{CalibrationRecord, PriorTest};
use crate::error::{Error, Result};
use crate::estimators::{CrossSectionRecord, IncidenceEstimate, Sample};

pub const CALIBRATION_HEADER: [&str; 2] = ["duration_years", "recent"];
pub const SAMPLE_HEADER: [&str; 6] = [
    "id",
    "hiv_positive",
    "rita_recent",
    "has_prior",
    "prior_time_years",
    "prior_result",
];
pub const PRIOR_HEADER: [&str; 2] = ["has_prior", "prior_time_years"];
pub const ESTIMATE_HEADER: [&str; 10] = [
    "method", "lambda", "variance", "ci_lower", "ci_upper", "n", "n_pos", "n_rec", "n_rec_pt", "flags",
];

/// Serde adapter writing booleans as `0`/`1`.
pub mod bool01 {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        let text = String::deserialize(d)?;
        match text.trim() {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(D::Error::custom(format!("expected 0 or 1, found `{other}`"))),
        }
    }
}

struct Columns {
    index: Vec<usize>,
}

impl Columns {
    fn locate(headers: &StringRecord, wanted: &[&str]) -> Result<Self> {
        let mut index = Vec::with_capacity(wanted.len());
        for name in wanted {
            let pos = headers
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| Error::schema(1, name, "required column is missing from the header"))?;
            index.push(pos);
        }
        Ok(Columns { index })
    }

    fn get<'r>(&self, rec: &'r StringRecord, k: usize) -> &'r str {
        rec.get(self.index[k]).map(str::trim).unwrap_or("")
    }
}

fn line_of(rec: &StringRecord) -> usize {
    rec.position().map(|p| p.line() as usize).unwrap_or(0)
}

fn parse_flag(text: &str, line: usize, column: &str) -> Result<Option<bool>> {
    match text {
        "" => Ok(None),
        "0" => Ok(Some(false)),
        "1" => Ok(Some(true)),
        other => Err(Error::schema(line, column, format!("expected 0, 1 or empty, found `{other}`"))),
    }
}

fn parse_number(text: &str, line: usize, column: &str) -> Result<Option<f64>> {
    if text.is_empty() {
        return Ok(None);
    }
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::schema(line, column, format!("expected a finite number, found `{text}`"))),
    }
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(r)
}

pub fn read_calibration_csv<R: Read>(input: R) -> Result<Vec<CalibrationRecord>> {
    let mut rdr = reader(input);
    let cols = Columns::locate(rdr.headers()?, &CALIBRATION_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let duration = parse_number(cols.get(&rec, 0), line, "duration_years")?
            .ok_or_else(|| Error::schema(line, "duration_years", "value is required"))?;
        if !(duration > 0.0) {
            return Err(Error::schema(line, "duration_years", "duration must be positive"));
        }
        let recent = parse_flag(cols.get(&rec, 1), line, "recent")?
            .ok_or_else(|| Error::schema(line, "recent", "value is required"))?;
        out.push(CalibrationRecord { duration, recent });
    }
    Ok(out)
}

pub fn write_calibration_csv<W: Write>(out: W, records: &[CalibrationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CALIBRATION_HEADER)?;
    for r in records {
        w.write_record([r.duration.to_string(), u8::from(r.recent).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn parse_sample_row(cols: &Columns, rec: &StringRecord) -> Result<CrossSectionRecord> {
    let line = line_of(rec);
    let id = cols.get(rec, 0);
    let positive = parse_flag(cols.get(rec, 1), line, "hiv_positive")?
        .ok_or_else(|| Error::schema(line, "hiv_positive", "value is required"))?;
    let recent = parse_flag(cols.get(rec, 2), line, "rita_recent")?;
    let has_prior = parse_flag(cols.get(rec, 3), line, "has_prior")?;
    let time = parse_number(cols.get(rec, 4), line, "prior_time_years")?;
    let result = parse_flag(cols.get(rec, 5), line, "prior_result")?;

    let record = if positive {
        let recent = recent.ok_or_else(|| Error::schema(line, "rita_recent", "required for HIV-positive rows"))?;
        let has_prior =
            has_prior.ok_or_else(|| Error::schema(line, "has_prior", "required for HIV-positive rows"))?;
        if has_prior {
            let t = time.ok_or_else(|| Error::schema(line, "prior_time_years", "required when has_prior=1"))?;
            if t < 0.0 {
                return Err(Error::schema(line, "prior_time_years", "prior time must be nonnegative"));
            }
            if result.is_none() {
                return Err(Error::schema(line, "prior_result", "required when has_prior=1"));
            }
        } else {
            if time.is_some() {
                return Err(Error::schema(line, "prior_time_years", "present although has_prior=0"));
            }
            if result.is_some() {
                return Err(Error::schema(line, "prior_result", "present although has_prior=0"));
            }
        }
        CrossSectionRecord {
            id: None,
            hiv_positive: true,
            rita_recent: Some(recent),
            has_prior,
            prior_time: time,
            prior_result: result,
        }
    } else {
        if recent.is_some() {
            return Err(Error::schema(line, "rita_recent", "must be empty for HIV-negative rows"));
        }
        if has_prior == Some(true) {
            return Err(Error::schema(line, "has_prior", "must be 0 or empty for HIV-negative rows"));
        }
        if time.is_some() {
            return Err(Error::schema(line, "prior_time_years", "must be empty for HIV-negative rows"));
        }
        if result.is_some() {
            return Err(Error::schema(line, "prior_result", "must be empty for HIV-negative rows"));
        }
        CrossSectionRecord::negative()
    };
    Ok(CrossSectionRecord {
        id: (!id.is_empty()).then(|| id.to_string()),
        ..record
    })
}

pub fn read_sample_csv<R: Read>(input: R) -> Result<Sample> {
    let mut rdr = reader(input);
    let cols = Columns::locate(rdr.headers()?, &SAMPLE_HEADER)?;
    let mut records = Vec::new();
    for rec in rdr.records() {
        records.push(parse_sample_row(&cols, &rec?)?);
    }
    Sample::new(records)
}

fn flag_text(v: Option<bool>) -> String {
    v.map(|b| u8::from(b).to_string()).unwrap_or_default()
}

pub fn write_sample_csv<W: Write>(out: W, sample: &Sample) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SAMPLE_HEADER)?;
    for r in sample.records() {
        w.write_record([
            r.id.clone().unwrap_or_default(),
            u8::from(r.hiv_positive).to_string(),
            flag_text(r.rita_recent),
            if r.hiv_positive { flag_text(Some(r.has_prior)) } else { String::new() },
            r.prior_time.map(|t| t.to_string()).unwrap_or_default(),
            flag_text(r.prior_result),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads prior tests either from a `has_prior,prior_time_years` file or from
/// a full sample file, in which case the HIV-positive rows are used.
pub fn read_prior_tests_csv<R: Read>(input: R) -> Result<Vec<PriorTest>> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().any(|h| h.trim() == "hiv_positive") {
        let cols = Columns::locate(&headers, &SAMPLE_HEADER)?;
        let mut out = Vec::new();
        for rec in rdr.records() {
            let r = parse_sample_row(&cols, &rec?)?;
            if r.hiv_positive {
                out.push(PriorTest {
                    has_prior: r.has_prior,
                    time: r.prior_time,
                });
            }
        }
        return Ok(out);
    }
    let cols = Columns::locate(&headers, &PRIOR_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let q = parse_flag(cols.get(&rec, 0), line, "has_prior")?
            .ok_or_else(|| Error::schema(line, "has_prior", "value is required"))?;
        let t = parse_number(cols.get(&rec, 1), line, "prior_time_years")?;
        match (q, t) {
            (true, None) => return Err(Error::schema(line, "prior_time_years", "required when has_prior=1")),
            (true, Some(t)) if t < 0.0 => {
                return Err(Error::schema(line, "prior_time_years", "prior time must be nonnegative"))
            }
            (false, Some(_)) => {
                return Err(Error::schema(line, "prior_time_years", "present although has_prior=0"))
            }
            _ => {}
        }
        out.push(PriorTest { has_prior: q, time: t });
    }
    Ok(out)
}

pub fn write_estimates_csv<W: Write>(out: W, estimates: &[IncidenceEstimate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ESTIMATE_HEADER)?;
    for e in estimates {
        w.write_record([
            e.method.name().to_string(),
            e.lambda.to_string(),
            e.variance.to_string(),
            e.ci_lower.to_string(),
            e.ci_upper.to_string(),
            e.n.to_string(),
            e.n_pos.to_string(),
            e.n_rec.to_string(),
            e.n_rec_pt.to_string(),
            e.flags.labels().join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::PriorTriple;

    #[test]
    fn sample_round_trip() {
        let mut recs = vec![
            CrossSectionRecord::negative(),
            CrossSectionRecord::positive(true, PriorTriple::NONE),
            CrossSectionRecord::positive(false, PriorTriple::tested(1.25, false)),
            CrossSectionRecord::positive(true, PriorTriple::tested(3.0000000000000004, true)),
        ];
        recs[0].id = Some("a-1".into());
        let s = Sample::new(recs).unwrap();
        let mut buf = Vec::new();
        write_sample_csv(&mut buf, &s).unwrap();
        let back = read_sample_csv(buf.as_slice()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn schema_errors_name_row_and_column() {
        let text = "id,hiv_positive,rita_recent,has_prior,prior_time_years,prior_result\n1,1,0,0,,\n2,1,1,0,0.5,\n";
        match read_sample_csv(text.as_bytes()) {
            Err(Error::Schema { line, column, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(column, "prior_time_years");
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = "id,hiv_positive\n1,1\n";
        assert!(matches!(read_sample_csv(text.as_bytes()), Err(Error::Schema { line: 1, .. })));
        let text = "duration_years,recent\n0.5,2\n";
        assert!(matches!(read_calibration_csv(text.as_bytes()), Err(Error::Schema { line: 2, .. })));
    }

    #[test]
    fn prior_tests_from_either_layout() {
        let short = "has_prior,prior_time_years\n1,0.5\n0,\n";
        assert_eq!(read_prior_tests_csv(short.as_bytes()).unwrap().len(), 2);
        let full = "id,hiv_positive,rita_recent,has_prior,prior_time_years,prior_result\n1,0,,,,\n2,1,1,1,0.5,0\n";
        let p = read_prior_tests_csv(full.as_bytes()).unwrap();
        assert_eq!(p, vec![PriorTest { has_prior: true, time: Some(0.5) }]);
    }

    #[test]
    fn calibration_round_trip() {
        let recs = vec![CalibrationRecord { duration: 0.1, recent: true }, CalibrationRecord { duration: 1.9, recent: false }];
        let mut buf = Vec::new();
        write_calibration_csv(&mut buf, &recs).unwrap();
        assert_eq!(read_calibration_csv(buf.as_slice()).unwrap(), recs);
    }
}
