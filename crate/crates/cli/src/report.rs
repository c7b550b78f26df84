//! Consistency checking of sweep artifacts: verifies every simulated row
//! sits between the analytic lower and upper bounds (at the emitted 99%
//! confidence), and measures the dB gap between the two-round and one-shot
//! curves at matched distortion targets.

use anyhow::{bail, Context};
use std::collections::BTreeMap;
use std::path::Path;

/// Minimal view of one CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub sensors: u64,
    pub bits: u64,
    pub rho: f64,
    pub lambda: f64,
    pub mu: f64,
    pub l: u64,
    pub db: f64,
    pub lower_clipped: f64,
    pub upper_total: Option<f64>,
    pub d_q: Option<f64>,
    pub one_shot: Option<f64>,
    pub avg_energy_exact: Option<f64>,
    pub empirical_mse: Option<f64>,
    pub mse_ci_low: Option<f64>,
    pub mse_ci_high: Option<f64>,
    pub flag: String,
}

/// A row whose empirical confidence interval escapes the analytic sandwich.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// 1-based data row number (header excluded).
    pub row: usize,
    pub detail: String,
}

/// Feedback gain extracted at one distortion target within one curve group.
#[derive(Debug, Clone, PartialEq)]
pub struct GapSummary {
    /// Group key `(m, b, rho, lambda, mu, l)` rendered as text.
    pub group: String,
    /// Distortion level at which the curves are compared.
    pub target: f64,
    /// `one-shot dB - two-round dB` at that distortion; positive means
    /// feedback saves energy. None when either curve never crosses the
    /// target inside the sweep.
    pub gap_db: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ConsistencyReport {
    pub rows_checked: usize,
    pub violations: Vec<Violation>,
    pub gaps: Vec<GapSummary>,
}

impl ConsistencyReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "checked {} simulated rows: {} violation(s)\n",
            self.rows_checked,
            self.violations.len()
        ));
        for v in &self.violations {
            out.push_str(&format!("  row {}: {}\n", v.row, v.detail));
        }
        for g in &self.gaps {
            match g.gap_db {
                Some(db) => out.push_str(&format!(
                    "  gap [{}] at D={:.3e}: {:.2} dB\n",
                    g.group, g.target, db
                )),
                None => out.push_str(&format!(
                    "  gap [{}] at D={:.3e}: not bracketed by the sweep\n",
                    g.group, g.target
                )),
            }
        }
        out
    }
}

fn get<'a>(
    record: &'a csv::StringRecord,
    idx: &BTreeMap<String, usize>,
    name: &str,
) -> anyhow::Result<&'a str> {
    let &i = idx
        .get(name)
        .with_context(|| format!("schema error: missing column '{name}'"))?;
    Ok(record.get(i).unwrap_or(""))
}

fn parse_req(s: &str, name: &str, row: usize) -> anyhow::Result<f64> {
    s.parse::<f64>()
        .with_context(|| format!("row {row}: cannot parse {name}='{s}'"))
}

fn parse_opt(s: &str, name: &str, row: usize) -> anyhow::Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_req(s, name, row).map(Some)
    }
}

/// Reads a sweep artifact back into rows.
pub fn read_rows(path: &Path) -> anyhow::Result<Vec<CsvRow>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let idx: BTreeMap<String, usize> = reader
        .headers()?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_string(), i))
        .collect();
    for required in crate::sweep::CSV_COLUMNS {
        if !idx.contains_key(*required) {
            bail!("schema error: missing column '{required}'");
        }
    }
    let mut rows = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record?;
        let row = n + 1;
        rows.push(CsvRow {
            sensors: parse_req(get(&record, &idx, "m")?, "m", row)? as u64,
            bits: parse_req(get(&record, &idx, "b")?, "b", row)? as u64,
            rho: parse_req(get(&record, &idx, "rho")?, "rho", row)?,
            lambda: parse_req(get(&record, &idx, "lambda")?, "lambda", row)?,
            mu: parse_req(get(&record, &idx, "mu")?, "mu", row)?,
            l: parse_req(get(&record, &idx, "l")?, "l", row)? as u64,
            db: parse_req(get(&record, &idx, "ebn0_db")?, "ebn0_db", row)?,
            lower_clipped: parse_req(
                get(&record, &idx, "lower_bound_clipped")?,
                "lower_bound_clipped",
                row,
            )?,
            upper_total: parse_opt(
                get(&record, &idx, "upper_bound_total")?,
                "upper_bound_total",
                row,
            )?,
            d_q: parse_opt(get(&record, &idx, "d_q")?, "d_q", row)?,
            one_shot: parse_opt(get(&record, &idx, "one_shot_bound")?, "one_shot_bound", row)?,
            avg_energy_exact: parse_opt(
                get(&record, &idx, "avg_energy_exact")?,
                "avg_energy_exact",
                row,
            )?,
            empirical_mse: parse_opt(get(&record, &idx, "empirical_mse")?, "empirical_mse", row)?,
            mse_ci_low: parse_opt(get(&record, &idx, "mse_ci_low")?, "mse_ci_low", row)?,
            mse_ci_high: parse_opt(get(&record, &idx, "mse_ci_high")?, "mse_ci_high", row)?,
            flag: get(&record, &idx, "flag")?.to_string(),
        });
    }
    Ok(rows)
}

/// dB abscissa where a monotone-decreasing curve crosses `target`, by linear
/// interpolation in (dB, ln D). Points must be sorted by dB.
pub fn crossing_db(curve: &[(f64, f64)], target: f64) -> Option<f64> {
    let lt = target.ln();
    for pair in curve.windows(2) {
        let (x0, y0) = pair[0];
        let (x1, y1) = pair[1];
        let (l0, l1) = (y0.ln(), y1.ln());
        if (l0 - lt) * (l1 - lt) <= 0.0 && l0 != l1 {
            return Some(x0 + (x1 - x0) * (l0 - lt) / (l0 - l1));
        }
    }
    None
}

fn group_key(r: &CsvRow) -> String {
    format!(
        "m={} b={} rho={} lambda={} mu={} l={}",
        r.sensors, r.bits, r.rho, r.lambda, r.mu, r.l
    )
}

/// Checks sandwich consistency and extracts feedback gains.
///
/// A violation is a simulated row whose 99% CI lies entirely below the
/// (clipped) lower bound or entirely above the upper bound. Gaps compare the
/// two-round curve on its average-energy abscissa against the one-shot curve
/// on the swept first-round energy, at targets spread between the group's
/// distortion floor and 1.
pub fn consistency_report(rows: &[CsvRow]) -> ConsistencyReport {
    let mut violations = Vec::new();
    let mut rows_checked = 0usize;
    for (i, r) in rows.iter().enumerate() {
        let (Some(ci_low), Some(ci_high)) = (r.mse_ci_low, r.mse_ci_high) else {
            continue;
        };
        rows_checked += 1;
        if ci_high < r.lower_clipped {
            violations.push(Violation {
                row: i + 1,
                detail: format!(
                    "empirical CI high {ci_high:.6e} below lower bound {:.6e}",
                    r.lower_clipped
                ),
            });
        }
        if let Some(upper) = r.upper_total {
            if ci_low > upper {
                violations.push(Violation {
                    row: i + 1,
                    detail: format!(
                        "empirical CI low {ci_low:.6e} above upper bound {upper:.6e}"
                    ),
                });
            }
        }
    }

    let mut groups: BTreeMap<String, Vec<&CsvRow>> = BTreeMap::new();
    for r in rows {
        if r.upper_total.is_some() {
            groups.entry(group_key(r)).or_default().push(r);
        }
    }
    let mut gaps = Vec::new();
    for (key, mut members) in groups {
        members.sort_by(|a, b| a.db.partial_cmp(&b.db).unwrap());
        if members.len() < 2 {
            continue;
        }
        let two_round: Vec<(f64, f64)> = members
            .iter()
            .filter_map(|r| {
                let e = r.avg_energy_exact?;
                Some((10.0 * e.log10(), r.upper_total?))
            })
            .collect();
        let one_shot: Vec<(f64, f64)> = members
            .iter()
            .filter_map(|r| Some((r.db, r.one_shot?)))
            .collect();
        let floor = members
            .iter()
            .filter_map(|r| r.d_q)
            .fold(f64::INFINITY, f64::min);
        if !floor.is_finite() {
            continue;
        }
        for factor in [5.0, 10.0, 20.0, 50.0] {
            let target = floor * factor;
            if target >= 1.0 {
                continue;
            }
            let gap_db = match (
                crossing_db(&two_round, target),
                crossing_db(&one_shot, target),
            ) {
                (Some(a), Some(b)) => Some(b - a),
                _ => None,
            };
            gaps.push(GapSummary {
                group: key.clone(),
                target,
                gap_db,
            });
        }
    }
    ConsistencyReport {
        rows_checked,
        violations,
        gaps,
    }
}

pub fn consistency_report_from_path(path: &Path) -> anyhow::Result<ConsistencyReport> {
    Ok(consistency_report(&read_rows(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn row(db: f64) -> CsvRow {
        CsvRow {
            sensors: 2,
            bits: 5,
            rho: 0.99,
            lambda: 0.25,
            mu: 1.0,
            l: 1,
            db,
            lower_clipped: 1e-4,
            upper_total: None,
            d_q: None,
            one_shot: None,
            avg_energy_exact: None,
            empirical_mse: None,
            mse_ci_low: None,
            mse_ci_high: None,
            flag: String::new(),
        }
    }

    #[test]
    fn crossing_interpolates_in_log_space() {
        // hand-built 3-point fixture: D = 10^(-x/10), crossing at exact dB
        let curve = vec![(0.0, 1.0), (10.0, 0.1), (20.0, 0.01)];
        assert_relative_eq!(crossing_db(&curve, 0.1).unwrap(), 10.0, epsilon = 1e-12);
        // ln-linear interpolation between the first two points:
        // target 0.5 -> x = 10 * ln(2)/ln(10)
        assert_relative_eq!(
            crossing_db(&curve, 0.5).unwrap(),
            10.0 * (2f64.ln() / 10f64.ln()),
            epsilon = 1e-12
        );
        assert!(crossing_db(&curve, 2.0).is_none());
        assert!(crossing_db(&curve, 0.001).is_none());
    }

    #[test]
    fn violations_are_flagged_per_row() {
        let mut good = row(10.0);
        good.upper_total = Some(0.5);
        good.empirical_mse = Some(0.01);
        good.mse_ci_low = Some(0.009);
        good.mse_ci_high = Some(0.011);
        let mut below = good.clone();
        below.mse_ci_low = Some(1e-6);
        below.mse_ci_high = Some(2e-6); // entirely under the lower bound
        let mut above = good.clone();
        above.mse_ci_low = Some(0.7);
        above.mse_ci_high = Some(0.8); // entirely over the upper bound
        let report = consistency_report(&[good, below, above]);
        assert_eq!(report.rows_checked, 3);
        assert_eq!(report.violations.len(), 2);
        assert_eq!(report.violations[0].row, 2);
        assert_eq!(report.violations[1].row, 3);
    }

    #[test]
    fn gap_extraction_on_synthetic_curves() {
        // two-round curve shifted 3 dB left of the one-shot curve
        let mut rows = Vec::new();
        for &db in &[0.0, 5.0, 10.0, 15.0, 20.0] {
            let mut r = row(db);
            r.d_q = Some(1e-3);
            // both curves pure exponentials in dB with the same slope
            r.upper_total = Some(10f64.powf(-(db + 3.0) / 10.0));
            r.one_shot = Some(10f64.powf(-db / 10.0));
            r.avg_energy_exact = Some(10f64.powf(db / 10.0)); // same abscissa
            rows.push(r);
        }
        let report = consistency_report(&rows);
        assert!(!report.gaps.is_empty());
        for g in &report.gaps {
            if let Some(db) = g.gap_db {
                assert_relative_eq!(db, 3.0, epsilon = 1e-9);
            }
        }
    }
}
