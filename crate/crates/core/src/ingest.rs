//! Transaction parsing, filtering, per-customer history and outlier flagging.
//!
//! Input is delimiter-separated text with a header row. The default column names are
//! `customer_id,order_date,revenue,cost,volume_tons,product_group,region`; dates are
//! ISO-8601 (`YYYY-MM-DD`) and decimals use `.` without thousands separators.
//! Malformed rows never abort a batch: they are returned as [`Reject`]s.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::features::{Feature, FeatureMatrix};
use crate::{Error, Result};

pub const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub customer_id: String,
    pub order_date: NaiveDate,
    pub revenue: f64,
    pub cost: f64,
    pub volume_tons: f64,
    pub product_group: String,
    pub region: String,
}

impl Transaction {
    pub fn profit(&self) -> f64 {
        self.revenue - self.cost
    }
}

/// Header names for each transaction field plus the field delimiter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schema {
    pub delimiter: char,
    pub customer_id: String,
    pub order_date: String,
    pub revenue: String,
    pub cost: String,
    pub volume_tons: String,
    pub product_group: String,
    pub region: String,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            delimiter: ',',
            customer_id: "customer_id".into(),
            order_date: "order_date".into(),
            revenue: "revenue".into(),
            cost: "cost".into(),
            volume_tons: "volume_tons".into(),
            product_group: "product_group".into(),
            region: "region".into(),
        }
    }
}

impl Schema {
    fn delimiter_byte(&self) -> Result<u8> {
        u8::try_from(self.delimiter)
            .ok()
            .filter(u8::is_ascii)
            .ok_or_else(|| Error::Schema(format!("delimiter {:?} is not ASCII", self.delimiter)))
    }

    fn columns(&self) -> [(&'static str, &str); 7] {
        [
            ("customer_id", &self.customer_id),
            ("order_date", &self.order_date),
            ("revenue", &self.revenue),
            ("cost", &self.cost),
            ("volume_tons", &self.volume_tons),
            ("product_group", &self.product_group),
            ("region", &self.region),
        ]
    }
}

/// A row that could not be turned into a [`Transaction`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    /// 1-based line number in the source (the header is line 1).
    pub row: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub transactions: Vec<Transaction>,
    pub rejects: Vec<Reject>,
}

/// Parses delimiter-separated transactions. Row order is preserved in both the
/// accepted list and the reject report.
pub fn parse_transactions<R: Read>(mut source: R, schema: &Schema) -> Result<ParseOutcome> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| Error::Schema(format!("source is not readable UTF-8 text: {e}")))?;
    if text.trim().is_empty() {
        return Ok(ParseOutcome::default());
    }

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter_byte()?)
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let headers = reader
        .headers()
        .map_err(|e| Error::Schema(format!("unreadable header: {e}")))?
        .clone();
    let mut index = [0usize; 7];
    for (slot, (field, name)) in index.iter_mut().zip(schema.columns()) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}` for field {field}")))?;
    }

    let mut out = ParseOutcome::default();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let row = e.position().map_or(0, |p| p.line());
                out.rejects.push(Reject {
                    row,
                    reason: format!("malformed record: {e}"),
                });
                continue;
            }
        };
        let row = record.position().map_or(0, |p| p.line());
        match parse_row(&record, &index) {
            Ok(t) => out.transactions.push(t),
            Err(reason) => out.rejects.push(Reject { row, reason }),
        }
    }
    Ok(out)
}

fn parse_row(record: &csv::StringRecord, index: &[usize; 7]) -> Result<Transaction, String> {
    let field = |i: usize, name: &str| {
        record
            .get(index[i])
            .ok_or_else(|| format!("missing field {name}"))
    };
    let number = |i: usize, name: &str| -> Result<f64, String> {
        let raw = field(i, name)?;
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("invalid number in {name}: {raw:?}")),
        }
    };

    let customer_id = field(0, "customer_id")?;
    if customer_id.is_empty() {
        return Err("empty customer_id".into());
    }
    let order_date = NaiveDate::parse_from_str(field(1, "order_date")?, DATE_FORMAT)
        .map_err(|_| "invalid date".to_string())?;
    let revenue = number(2, "revenue")?;
    let cost = number(3, "cost")?;
    let volume_tons = number(4, "volume_tons")?;
    if volume_tons < 0.0 {
        return Err("negative volume_tons".into());
    }
    Ok(Transaction {
        customer_id: customer_id.to_string(),
        order_date,
        revenue,
        cost,
        volume_tons,
        product_group: field(5, "product_group")?.to_string(),
        region: field(6, "region")?.to_string(),
    })
}

/// Writes transactions with the schema's header names. Numbers use the shortest
/// representation that parses back to the same `f64`.
pub fn write_transactions<W: Write>(sink: W, txns: &[Transaction], schema: &Schema) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(schema.delimiter_byte()?)
        .from_writer(sink);
    let io = |e: csv::Error| Error::Io(e.into());
    writer
        .write_record(schema.columns().iter().map(|(_, name)| *name))
        .map_err(io)?;
    for t in txns {
        writer
            .write_record([
                t.customer_id.clone(),
                t.order_date.format(DATE_FORMAT).to_string(),
                t.revenue.to_string(),
                t.cost.to_string(),
                t.volume_tons.to_string(),
                t.product_group.clone(),
                t.region.clone(),
            ])
            .map_err(io)?;
    }
    writer.flush()?;
    Ok(())
}

/// Time window plus optional dimension restrictions. Empty sets mean "no restriction".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub date_start: NaiveDate,
    pub date_end: NaiveDate,
    #[serde(default)]
    pub regions: BTreeSet<String>,
    #[serde(default)]
    pub product_groups: BTreeSet<String>,
    #[serde(default)]
    pub excluded_customers: BTreeSet<String>,
}

impl FilterSpec {
    pub fn window(date_start: NaiveDate, date_end: NaiveDate) -> Result<Self> {
        let spec = Self {
            date_start,
            date_end,
            regions: BTreeSet::new(),
            product_groups: BTreeSet::new(),
            excluded_customers: BTreeSet::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.date_start > self.date_end {
            return Err(Error::validation(
                "filter.date_start",
                format!("{} is after date_end {}", self.date_start, self.date_end),
            ));
        }
        Ok(())
    }

    /// Length of the window in days (`date_end - date_start`), at least 1.
    pub fn window_days(&self) -> u32 {
        (self.date_end - self.date_start).num_days().max(1) as u32
    }

    pub fn matches(&self, t: &Transaction) -> bool {
        (self.date_start..=self.date_end).contains(&t.order_date)
            && (self.regions.is_empty() || self.regions.contains(&t.region))
            && (self.product_groups.is_empty() || self.product_groups.contains(&t.product_group))
            && !self.excluded_customers.contains(&t.customer_id)
    }
}

pub fn filter_transactions(txns: &[Transaction], spec: &FilterSpec) -> Vec<Transaction> {
    txns.iter().filter(|t| spec.matches(t)).cloned().collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Rollup {
    pub revenue: f64,
    pub profit: f64,
    pub volume_tons: f64,
    pub transactions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerHistory {
    pub customer_id: String,
    pub transactions: Vec<Transaction>,
    /// Keyed by calendar month, `YYYY-MM`.
    pub monthly: BTreeMap<String, Rollup>,
}

/// Collects one customer's transactions in ascending date order (stable for ties)
/// with calendar-month rollups.
pub fn customer_history(txns: &[Transaction], customer_id: &str) -> Option<CustomerHistory> {
    let mut own: Vec<Transaction> = txns
        .iter()
        .filter(|t| t.customer_id == customer_id)
        .cloned()
        .collect();
    if own.is_empty() {
        return None;
    }
    own.sort_by_key(|t| t.order_date);
    let mut monthly: BTreeMap<String, Rollup> = BTreeMap::new();
    for t in &own {
        let key = format!("{:04}-{:02}", t.order_date.year(), t.order_date.month());
        let r = monthly.entry(key).or_default();
        r.revenue += t.revenue;
        r.profit += t.profit();
        r.volume_tons += t.volume_tons;
        r.transactions += 1;
    }
    Some(CustomerHistory {
        customer_id: customer_id.to_string(),
        transactions: own,
        monthly,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub transactions: usize,
    pub rejects: usize,
    pub customers: usize,
    pub date_start: Option<NaiveDate>,
    pub date_end: Option<NaiveDate>,
    pub regions: BTreeSet<String>,
    pub product_groups: BTreeSet<String>,
}

pub fn summarize(outcome: &ParseOutcome) -> DatasetSummary {
    let txns = &outcome.transactions;
    DatasetSummary {
        transactions: txns.len(),
        rejects: outcome.rejects.len(),
        customers: txns.iter().map(|t| &t.customer_id).collect::<BTreeSet<_>>().len(),
        date_start: txns.iter().map(|t| t.order_date).min(),
        date_end: txns.iter().map(|t| t.order_date).max(),
        regions: txns.iter().map(|t| t.region.clone()).collect(),
        product_groups: txns.iter().map(|t| t.product_group.clone()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outlier {
    pub customer_id: String,
    pub feature: Feature,
    pub z_value: f64,
}

/// Reports every standardized cell with `|z| > z_threshold`, largest `|z|` first.
/// Advisory only: nothing is removed.
pub fn flag_outliers(matrix: &FeatureMatrix, z_threshold: f64) -> Result<Vec<Outlier>> {
    if !(z_threshold > 0.0) {
        return Err(Error::Parameter {
            name: "z_threshold",
            message: format!("must be > 0, got {z_threshold}"),
        });
    }
    let z = matrix.standardized()?;
    let mut hits: Vec<Outlier> = Vec::new();
    for (customer, row) in matrix.customers.iter().zip(z) {
        for (&feature, &value) in matrix.features.iter().zip(row) {
            if value.abs() > z_threshold {
                hits.push(Outlier {
                    customer_id: customer.clone(),
                    feature,
                    z_value: value,
                });
            }
        }
    }
    // stable: equal magnitudes keep row-major order
    hits.sort_by(|a, b| b.z_value.abs().total_cmp(&a.z_value.abs()));
    Ok(hits)
}
