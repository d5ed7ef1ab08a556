//! Readers and writers for the two input CSV schemas.
//!
//! Cases file: `month,cases`. Climate file:
//! `month,temp_avg,rainy_days,rainfall_mm,sun_hours,sun_days,humidity`.
//! UTF-8, header row required, `.` decimal point, no thousands separators.
//! Missing cells are a hard error; inputs are never imputed.

use std::io::{BufRead, BufReader, Read, Write};

use super::{AlignedPanel, CaseSeries, ClimateTable, ClimateVar, DataError, MonthIndex};

fn parse_err(line: usize, message: impl Into<String>) -> DataError {
    DataError::Parse {
        line,
        message: message.into(),
    }
}

fn split_row(line: &str) -> Vec<&str> {
    line.trim_end_matches('\r')
        .split(',')
        .map(str::trim)
        .collect()
}

fn parse_month(field: &str, line: usize) -> Result<MonthIndex, DataError> {
    field.parse().map_err(|e: String| parse_err(line, e))
}

fn parse_f64(field: &str, column: &str, line: usize) -> Result<f64, DataError> {
    if field.is_empty() {
        return Err(parse_err(
            line,
            format!("missing value in column `{column}`"),
        ));
    }
    field
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("bad number `{field}` in column `{column}`")))
}

/// Reads a `month,cases` file. The division label comes from the caller
/// (typically the file stem or config).
pub fn read_cases_csv<R: Read>(reader: R, division: &str) -> Result<CaseSeries, DataError> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    let header = match lines.next() {
        Some((_, Ok(h))) => h,
        _ => return Err(parse_err(1, "empty file")),
    };
    let cols = split_row(&header);
    for required in ["month", "cases"] {
        if !cols.contains(&required) {
            return Err(DataError::Schema {
                column: required.to_string(),
            });
        }
    }
    let month_at = cols.iter().position(|c| *c == "month").unwrap();
    let cases_at = cols.iter().position(|c| *c == "cases").unwrap();

    let mut months = Vec::new();
    let mut counts = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| parse_err(i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_row(&line);
        if fields.len() != cols.len() {
            return Err(parse_err(i + 1, format!("expected {} fields", cols.len())));
        }
        months.push(parse_month(fields[month_at], i + 1)?);
        let count: u32 = fields[cases_at]
            .parse()
            .map_err(|_| parse_err(i + 1, format!("bad case count `{}`", fields[cases_at])))?;
        counts.push(count);
    }
    Ok(CaseSeries {
        division: division.to_string(),
        months,
        counts,
    })
}

/// Reads the six-variable climate file; every column is required.
pub fn read_climate_csv<R: Read>(reader: R) -> Result<ClimateTable, DataError> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    let header = match lines.next() {
        Some((_, Ok(h))) => h,
        _ => return Err(parse_err(1, "empty file")),
    };
    let cols = split_row(&header);
    if !cols.contains(&"month") {
        return Err(DataError::Schema {
            column: "month".to_string(),
        });
    }
    let month_at = cols.iter().position(|c| *c == "month").unwrap();
    let mut var_at = [0usize; 6];
    for var in ClimateVar::ALL {
        let name = var.csv_header();
        match cols.iter().position(|c| *c == name) {
            Some(p) => var_at[var_index(var)] = p,
            None => {
                return Err(DataError::Schema {
                    column: name.to_string(),
                })
            }
        }
    }

    let mut months = Vec::new();
    let mut columns: [Vec<f64>; 6] = Default::default();
    for (i, line) in lines {
        let line = line.map_err(|e| parse_err(i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_row(&line);
        if fields.len() != cols.len() {
            return Err(parse_err(i + 1, format!("expected {} fields", cols.len())));
        }
        months.push(parse_month(fields[month_at], i + 1)?);
        for var in ClimateVar::ALL {
            let k = var_index(var);
            columns[k].push(parse_f64(fields[var_at[k]], var.csv_header(), i + 1)?);
        }
    }
    Ok(ClimateTable { months, columns })
}

fn var_index(var: ClimateVar) -> usize {
    ClimateVar::ALL.iter().position(|v| *v == var).unwrap()
}

/// Writes the panel's case series in the input schema.
pub fn write_cases_csv<W: Write>(panel: &AlignedPanel, mut w: W) -> std::io::Result<()> {
    writeln!(w, "month,cases")?;
    for (month, count) in panel.months().iter().zip(panel.cases()) {
        writeln!(w, "{month},{count}")?;
    }
    Ok(())
}

/// Writes the panel's climate columns in the input schema.
pub fn write_climate_csv<W: Write>(panel: &AlignedPanel, mut w: W) -> std::io::Result<()> {
    write!(w, "month")?;
    for var in ClimateVar::ALL {
        write!(w, ",{}", var.csv_header())?;
    }
    writeln!(w)?;
    for (i, month) in panel.months().iter().enumerate() {
        write!(w, "{month}")?;
        for var in ClimateVar::ALL {
            write!(w, ",{}", panel.climate(var)[i])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::align_panel;
    use super::*;

    const CASES: &str = "month,cases\n2022-01,12\n2022-02,30\n2022-03,7\n";
    const CLIMATE: &str = "month,temp_avg,rainy_days,rainfall_mm,sun_hours,sun_days,humidity\n\
                           2022-01,19.5,1,4.2,310,29,46\n\
                           2022-02,23.1,2,10,295.5,27,52.5\n\
                           2022-03,27.9,5,55.1,280,25,61\n";

    #[test]
    fn reads_cases_file() {
        let s = read_cases_csv(CASES.as_bytes(), "dhaka").unwrap();
        assert_eq!(s.division, "dhaka");
        assert_eq!(s.counts, vec![12, 30, 7]);
        assert_eq!(s.months[2].to_string(), "2022-03");
    }

    #[test]
    fn reads_climate_file() {
        let t = read_climate_csv(CLIMATE.as_bytes()).unwrap();
        assert_eq!(t.months.len(), 3);
        assert_eq!(
            t.columns[var_index(ClimateVar::Rainfall)],
            vec![4.2, 10.0, 55.1]
        );
        assert_eq!(
            t.columns[var_index(ClimateVar::Humidity)],
            vec![46.0, 52.5, 61.0]
        );
    }

    #[test]
    fn missing_column_names_the_column() {
        let bad = "month,temp_avg,rainy_days,rainfall_mm,sun_hours,sun_days\n2022-01,1,1,1,1,1\n";
        match read_climate_csv(bad.as_bytes()) {
            Err(DataError::Schema { column }) => assert_eq!(column, "humidity"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn missing_cell_is_a_hard_error() {
        let bad = "month,temp_avg,rainy_days,rainfall_mm,sun_hours,sun_days,humidity\n\
                   2022-01,19.5,1,,310,29,46\n";
        match read_climate_csv(bad.as_bytes()) {
            Err(DataError::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("rainfall_mm"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_month_reports_line() {
        let bad = "month,cases\n2022-1x,3\n";
        assert!(matches!(
            read_cases_csv(bad.as_bytes(), "d"),
            Err(DataError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn panel_round_trips_through_serialization() {
        let cases = read_cases_csv(CASES.as_bytes(), "dhaka").unwrap();
        let climate = read_climate_csv(CLIMATE.as_bytes()).unwrap();
        let panel = align_panel(&cases, &climate).unwrap();

        let mut cases_out = Vec::new();
        let mut climate_out = Vec::new();
        write_cases_csv(&panel, &mut cases_out).unwrap();
        write_climate_csv(&panel, &mut climate_out).unwrap();

        let reread = align_panel(
            &read_cases_csv(&cases_out[..], "dhaka").unwrap(),
            &read_climate_csv(&climate_out[..]).unwrap(),
        )
        .unwrap();
        assert_eq!(reread, panel);
    }
}
