//! Per-customer feature derivation (RFM plus B2B extensions) and z-score standardization.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::ingest::{FilterSpec, Transaction};
use crate::{Error, Result};

/// Canonical feature identifiers. The snake_case strings are the public names used in
/// API payloads and label specs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    RecencyDays,
    Frequency,
    MonetaryRevenue,
    Profit,
    VolumeTons,
    InterpurchaseIntervalDays,
    AvgProfitPerTon,
}

impl Feature {
    pub const ALL: [Feature; 7] = [
        Feature::RecencyDays,
        Feature::Frequency,
        Feature::MonetaryRevenue,
        Feature::Profit,
        Feature::VolumeTons,
        Feature::InterpurchaseIntervalDays,
        Feature::AvgProfitPerTon,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Feature::RecencyDays => "recency_days",
            Feature::Frequency => "frequency",
            Feature::MonetaryRevenue => "monetary_revenue",
            Feature::Profit => "profit",
            Feature::VolumeTons => "volume_tons",
            Feature::InterpurchaseIntervalDays => "interpurchase_interval_days",
            Feature::AvgProfitPerTon => "avg_profit_per_ton",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::validation("feature", format!("unknown feature `{s}`")))
    }
}

/// Ordered, duplicate-free list of at least two features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Feature>", into = "Vec<Feature>")]
pub struct FeatureSelection(Vec<Feature>);

impl FeatureSelection {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        if features.len() < 2 {
            return Err(Error::validation(
                "selection",
                "at least 2 features must be selected",
            ));
        }
        for (i, f) in features.iter().enumerate() {
            if features[..i].contains(f) {
                return Err(Error::validation("selection", format!("duplicate feature `{f}`")));
            }
        }
        Ok(Self(features))
    }

    pub fn features(&self) -> &[Feature] {
        &self.0
    }

    pub fn position(&self, feature: Feature) -> Option<usize> {
        self.0.iter().position(|&f| f == feature)
    }
}

impl TryFrom<Vec<Feature>> for FeatureSelection {
    type Error = Error;

    fn try_from(v: Vec<Feature>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FeatureSelection> for Vec<Feature> {
    fn from(s: FeatureSelection) -> Self {
        s.0
    }
}

/// Profit and volume per customer regardless of the selection; cluster stats report
/// shares of these.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CustomerTotals {
    pub profit: f64,
    pub volume_tons: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    /// Row-major z-scores, same shape as the raw grid.
    pub values: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    /// Population standard deviation per feature.
    pub stds: Vec<f64>,
    pub constant: Vec<bool>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub customers: Vec<String>,
    pub features: Vec<Feature>,
    pub raw: Vec<Vec<f64>>,
    pub totals: Vec<CustomerTotals>,
    pub reference_date: NaiveDate,
    pub window_days: u32,
    pub standardization: Option<Standardization>,
}

impl FeatureMatrix {
    /// Builds an unstandardized matrix from explicit rows. Totals are read from the
    /// profit / volume columns when present and are zero otherwise.
    pub fn from_rows(customers: Vec<String>, features: Vec<Feature>, raw: Vec<Vec<f64>>) -> Result<Self> {
        if customers.len() != raw.len() || raw.iter().any(|r| r.len() != features.len()) {
            return Err(Error::Parameter {
                name: "raw",
                message: "grid shape does not match customers x features".into(),
            });
        }
        let col = |f: Feature| features.iter().position(|&x| x == f);
        let (p, v) = (col(Feature::Profit), col(Feature::VolumeTons));
        let totals = raw
            .iter()
            .map(|row| CustomerTotals {
                profit: p.map_or(0.0, |i| row[i]),
                volume_tons: v.map_or(0.0, |i| row[i]),
            })
            .collect();
        Ok(Self {
            customers,
            features,
            raw,
            totals,
            reference_date: NaiveDate::default(),
            window_days: 1,
            standardization: None,
        })
    }

    pub fn len(&self) -> usize {
        self.customers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.customers.is_empty()
    }

    pub fn customer_index(&self, customer_id: &str) -> Option<usize> {
        self.customers.iter().position(|c| c == customer_id)
    }

    pub fn column(&self, feature: Feature) -> Option<usize> {
        self.features.iter().position(|&f| f == feature)
    }

    pub fn standardized(&self) -> Result<&[Vec<f64>]> {
        self.standardization
            .as_ref()
            .map(|s| s.values.as_slice())
            .ok_or_else(|| Error::Parameter {
                name: "matrix",
                message: "feature matrix has not been standardized".into(),
            })
    }
}

#[derive(Default)]
struct Accumulator {
    first: Option<NaiveDate>,
    last: Option<NaiveDate>,
    count: u64,
    revenue: Vec<f64>,
    cost: Vec<f64>,
    volume: Vec<f64>,
}

/// Sums in value order so the result does not depend on input row order.
fn ordered_sum(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs.into_iter().sum()
}

/// Aggregates already-filtered transactions into one row per customer (sorted by id).
pub fn derive_features(
    txns: &[Transaction],
    selection: &FeatureSelection,
    window: &FilterSpec,
) -> Result<FeatureMatrix> {
    let mut per_customer: BTreeMap<&str, Accumulator> = BTreeMap::new();
    for t in txns {
        let acc = per_customer.entry(&t.customer_id).or_default();
        acc.first = Some(acc.first.map_or(t.order_date, |d| d.min(t.order_date)));
        acc.last = Some(acc.last.map_or(t.order_date, |d| d.max(t.order_date)));
        acc.count += 1;
        acc.revenue.push(t.revenue);
        acc.cost.push(t.cost);
        acc.volume.push(t.volume_tons);
    }
    if per_customer.is_empty() {
        return Err(Error::NoCustomers);
    }

    let reference_date = window.date_end;
    let window_days = window.window_days();
    let mut customers = Vec::with_capacity(per_customer.len());
    let mut raw = Vec::with_capacity(per_customer.len());
    let mut totals = Vec::with_capacity(per_customer.len());
    for (id, acc) in per_customer {
        let (first, last) = (acc.first.unwrap(), acc.last.unwrap());
        let (revenue, cost, volume) = (ordered_sum(acc.revenue), ordered_sum(acc.cost), ordered_sum(acc.volume));
        let profit = revenue - cost;
        // mean of consecutive gaps telescopes to (last - first) / (n - 1)
        let interval = if acc.count < 2 {
            f64::from(window_days)
        } else {
            (last - first).num_days() as f64 / (acc.count - 1) as f64
        };
        let row = selection
            .features()
            .iter()
            .map(|f| match f {
                Feature::RecencyDays => (reference_date - last).num_days() as f64,
                Feature::Frequency => acc.count as f64,
                Feature::MonetaryRevenue => revenue,
                Feature::Profit => profit,
                Feature::VolumeTons => volume,
                Feature::InterpurchaseIntervalDays => interval,
                Feature::AvgProfitPerTon => {
                    if volume == 0.0 {
                        0.0
                    } else {
                        profit / volume
                    }
                }
            })
            .collect();
        customers.push(id.to_string());
        raw.push(row);
        totals.push(CustomerTotals {
            profit,
            volume_tons: volume,
        });
    }

    Ok(FeatureMatrix {
        customers,
        features: selection.features().to_vec(),
        raw,
        totals,
        reference_date,
        window_days,
        standardization: None,
    })
}

/// Fills the standardized grid: `z = (x - mean) / population_std` per column.
/// Constant columns become all-zero and produce a warning.
pub fn standardize(mut matrix: FeatureMatrix) -> FeatureMatrix {
    let n = matrix.raw.len();
    let d = matrix.features.len();
    let mut values = vec![vec![0.0; d]; n];
    let mut means = vec![0.0; d];
    let mut stds = vec![0.0; d];
    let mut constant = vec![false; d];
    let mut warnings = Vec::new();

    for j in 0..d {
        let column: Vec<f64> = matrix.raw.iter().map(|r| r[j]).collect();
        let mean = column.iter().sum::<f64>() / n as f64;
        means[j] = mean;
        if column.iter().all(|&x| x == column[0]) {
            constant[j] = true;
            warnings.push(format!(
                "feature `{}` is constant across customers; standardized to 0",
                matrix.features[j]
            ));
            continue;
        }
        let var = column.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        stds[j] = std;
        for (row, x) in values.iter_mut().zip(&column) {
            row[j] = (x - mean) / std;
        }
    }

    matrix.standardization = Some(Standardization {
        values,
        means,
        stds,
        constant,
        warnings,
    });
    matrix
}
