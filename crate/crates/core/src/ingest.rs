//! Loading, membership filtering and cleaning of raw security panels.
//!
//! Missing numeric cells are carried as `NaN` until [`clean`] resolves them.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::Write;
use std::ops::Range;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PRICES_HEADER: [&str; 6] = ["permno", "date", "prc", "ret", "vol", "shrout"];
pub const MEMBERSHIP_HEADER: [&str; 3] = ["permno", "start_date", "end_date"];

const DATE_FORMAT: &str = "%Y-%m-%d";

/// One security-date observation. `prc` may be negative (CRSP marks
/// bid/ask midpoints that way).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationRow {
    pub permno: i64,
    pub date: NaiveDate,
    pub prc: f64,
    pub ret: f64,
    pub vol: f64,
    pub shrout: f64,
}

impl ObservationRow {
    pub fn numeric(&self) -> [f64; 4] {
        [self.prc, self.ret, self.vol, self.shrout]
    }

    fn set_numeric(&mut self, values: [f64; 4]) {
        [self.prc, self.ret, self.vol, self.shrout] = values;
    }
}

/// An index-membership interval. `end_date == None` means still a member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MembershipRow {
    pub permno: i64,
    pub start_date: NaiveDate,
    pub end_date: Option<NaiveDate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvKind {
    Prices,
    Membership,
}

#[derive(Debug)]
pub enum Loaded {
    Prices(Panel),
    Membership(Vec<MembershipRow>),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Panel {
    pub rows: Vec<ObservationRow>,
}

impl Panel {
    pub fn new(rows: Vec<ObservationRow>) -> Self {
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn sort(&mut self) {
        self.rows.sort_by_key(|r| (r.permno, r.date));
    }

    pub fn is_sorted(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| (w[0].permno, w[0].date) < (w[1].permno, w[1].date))
    }

    /// Contiguous row ranges, one per permno. Assumes the panel is sorted.
    pub fn groups(&self) -> Vec<Range<usize>> {
        group_ranges(&self.rows, |r| r.permno)
    }

    pub fn permnos(&self) -> Vec<i64> {
        let mut ids: Vec<i64> = self.rows.iter().map(|r| r.permno).collect();
        ids.dedup();
        ids
    }

    pub fn max_date(&self) -> Option<NaiveDate> {
        self.rows.iter().map(|r| r.date).max()
    }
}

pub(crate) fn group_ranges<T, K: PartialEq>(items: &[T], key: impl Fn(&T) -> K) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=items.len() {
        if i == items.len() || key(&items[i]) != key(&items[start]) {
            if i > start {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}

pub fn load_csv(path: impl AsRef<Path>, kind: CsvKind) -> Result<Loaded> {
    match kind {
        CsvKind::Prices => load_prices(path).map(Loaded::Prices),
        CsvKind::Membership => load_membership(path).map(Loaded::Membership),
    }
}

struct Table {
    reader: csv::Reader<File>,
    columns: Vec<usize>,
}

fn open_table(path: &Path, required: &[&str]) -> Result<Table> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let columns = required
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| Error::MissingColumn {
                    path: path.to_path_buf(),
                    column: (*name).to_string(),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table { reader, columns })
}

fn parse_date(path: &Path, row: usize, column: &str, cell: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(cell, DATE_FORMAT).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        message: format!("malformed date {cell:?} ({e}); expected YYYY-MM-DD"),
    })
}

fn parse_permno(path: &Path, row: usize, cell: &str) -> Result<i64> {
    cell.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        row,
        column: "permno".to_string(),
        message: format!("malformed integer id {cell:?}"),
    })
}

/// Empty or unparseable numeric cells become `NaN`.
fn parse_number(cell: &str) -> f64 {
    cell.parse().unwrap_or(f64::NAN)
}

/// Load a prices CSV (`permno,date,prc,ret,vol,shrout`). Row numbers in errors
/// are 1-based data rows (the header is row 0). Row order is preserved.
pub fn load_prices(path: impl AsRef<Path>) -> Result<Panel> {
    let path = path.as_ref();
    let mut table = open_table(path, &PRICES_HEADER)?;
    let mut rows = Vec::new();
    for (i, record) in table.reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::csv(path, e))?;
        let cell = |k: usize| record.get(table.columns[k]).unwrap_or("");
        rows.push(ObservationRow {
            permno: parse_permno(path, row, cell(0))?,
            date: parse_date(path, row, "date", cell(1))?,
            prc: parse_number(cell(2)),
            ret: parse_number(cell(3)),
            vol: parse_number(cell(4)),
            shrout: parse_number(cell(5)),
        });
    }
    Ok(Panel::new(rows))
}

/// Load a membership CSV (`permno,start_date,end_date`); blank `end_date`
/// marks an open interval.
pub fn load_membership(path: impl AsRef<Path>) -> Result<Vec<MembershipRow>> {
    let path = path.as_ref();
    let mut table = open_table(path, &MEMBERSHIP_HEADER)?;
    let mut rows = Vec::new();
    for (i, record) in table.reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::csv(path, e))?;
        let cell = |k: usize| record.get(table.columns[k]).unwrap_or("");
        let start_date = parse_date(path, row, "start_date", cell(1))?;
        let end_date = match cell(2) {
            "" => None,
            s => Some(parse_date(path, row, "end_date", s)?),
        };
        if let Some(end) = end_date {
            if end < start_date {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    column: "end_date".to_string(),
                    message: format!("end_date {end} precedes start_date {start_date}"),
                });
            }
        }
        rows.push(MembershipRow {
            permno: parse_permno(path, row, cell(0))?,
            start_date,
            end_date,
        });
    }
    Ok(rows)
}

fn fmt_number(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

pub fn write_prices(path: impl AsRef<Path>, panel: &Panel) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let res: csv::Result<()> = (|| {
        w.write_record(PRICES_HEADER)?;
        for r in &panel.rows {
            w.write_record([
                r.permno.to_string(),
                r.date.format(DATE_FORMAT).to_string(),
                fmt_number(r.prc),
                fmt_number(r.ret),
                fmt_number(r.vol),
                fmt_number(r.shrout),
            ])?;
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| Error::csv(path, e))
}

pub fn write_membership(path: impl AsRef<Path>, rows: &[MembershipRow]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("permno,start_date,end_date\n");
    for m in rows {
        let end = m
            .end_date
            .map(|d| d.format(DATE_FORMAT).to_string())
            .unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", m.permno, m.start_date.format(DATE_FORMAT), end));
    }
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Keep only price rows dated inside one of their permno's membership
/// intervals (both endpoints inclusive). Open intervals run to the latest
/// date in `prices`. Duplicate `(permno, date)` rows keep the first
/// occurrence. Output is sorted by `(permno, date)`.
pub fn merge_and_filter(prices: &Panel, membership: &[MembershipRow]) -> Panel {
    let Some(max_date) = prices.max_date() else {
        return Panel::default();
    };
    let mut intervals: BTreeMap<i64, Vec<(NaiveDate, NaiveDate)>> = BTreeMap::new();
    for m in membership {
        intervals
            .entry(m.permno)
            .or_default()
            .push((m.start_date, m.end_date.unwrap_or(max_date)));
    }
    let mut seen = HashSet::new();
    let rows = prices
        .rows
        .iter()
        .filter(|r| {
            intervals.get(&r.permno).is_some_and(|spans| {
                spans.iter().any(|&(s, e)| s <= r.date && r.date <= e)
            })
        })
        .filter(|r| seen.insert((r.permno, r.date)))
        .copied()
        .collect();
    let mut out = Panel::new(rows);
    out.sort();
    out
}

/// Forward fill `NaN` gaps in place; leading gaps become `0.0`.
/// Infinite values are treated as missing.
pub fn fill_forward_then_zero(values: &mut [f64]) {
    let mut last = f64::NAN;
    for v in values.iter_mut() {
        if v.is_finite() {
            last = *v;
        } else {
            *v = if last.is_nan() { 0.0 } else { last };
        }
    }
}

/// Resolve missing and infinite cells within each permno group: infinities
/// become missing, gaps are forward-filled in date order, and anything still
/// missing becomes zero. Expects a sorted panel.
pub fn clean(panel: &Panel) -> Panel {
    let mut out = panel.clone();
    for range in out.groups() {
        let group = &mut out.rows[range];
        for col in 0..4 {
            let mut values: Vec<f64> = group.iter().map(|r| r.numeric()[col]).collect();
            fill_forward_then_zero(&mut values);
            for (row, v) in group.iter_mut().zip(values) {
                let mut nums = row.numeric();
                nums[col] = v;
                row.set_numeric(nums);
            }
        }
    }
    out
}
