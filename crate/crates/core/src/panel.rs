//! Loss-count panels: exposures `m[r][j]` and losses `M[r][j]` per category `r`
//! and period `j`.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Exact header of the panel CSV format.
pub const PANEL_HEADER: [&str; 4] = ["period", "category", "exposures", "losses"];

/// Rectangular k-by-n panel of exposure and loss counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Panel {
    categories: Vec<String>,
    periods: Vec<String>,
    exposures: Vec<Vec<u64>>,
    losses: Vec<Vec<u64>>,
}

impl Panel {
    /// Builds a panel from category-major count matrices (`[r][j]`).
    pub fn new(
        categories: Vec<String>,
        periods: Vec<String>,
        exposures: Vec<Vec<u64>>,
        losses: Vec<Vec<u64>>,
    ) -> Result<Self> {
        let k = categories.len();
        let n = periods.len();
        if k == 0 || n == 0 {
            return Err(Error::domain("panel needs at least one category and one period"));
        }
        if exposures.len() != k || losses.len() != k {
            return Err(Error::domain("count matrices must have one row per category"));
        }
        for r in 0..k {
            if exposures[r].len() != n || losses[r].len() != n {
                return Err(Error::domain(format!(
                    "category {} does not have {n} periods",
                    categories[r]
                )));
            }
            for j in 0..n {
                if exposures[r][j] == 0 {
                    return Err(Error::domain(format!(
                        "zero exposures for category {} in period {}",
                        categories[r], periods[j]
                    )));
                }
                if losses[r][j] > exposures[r][j] {
                    return Err(Error::domain(format!(
                        "losses exceed exposures for category {} in period {}",
                        categories[r], periods[j]
                    )));
                }
            }
        }
        check_unique(&categories, "category")?;
        check_unique(&periods, "period")?;
        Ok(Panel {
            categories,
            periods,
            exposures,
            losses,
        })
    }

    /// Panel with generated labels `c1..ck` and `1..n`.
    pub fn from_counts(exposures: Vec<Vec<u64>>, losses: Vec<Vec<u64>>) -> Result<Self> {
        let k = exposures.len();
        let n = exposures.first().map_or(0, Vec::len);
        let categories = (1..=k).map(|r| format!("c{r}")).collect();
        let periods = (1..=n).map(|j| j.to_string()).collect();
        Panel::new(categories, periods, exposures, losses)
    }

    pub fn k(&self) -> usize {
        self.categories.len()
    }

    pub fn n(&self) -> usize {
        self.periods.len()
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn periods(&self) -> &[String] {
        &self.periods
    }

    pub fn exposures(&self) -> &[Vec<u64>] {
        &self.exposures
    }

    pub fn losses(&self) -> &[Vec<u64>] {
        &self.losses
    }

    pub fn m(&self, r: usize, j: usize) -> u64 {
        self.exposures[r][j]
    }

    pub fn big_m(&self, r: usize, j: usize) -> u64 {
        self.losses[r][j]
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == label)
    }

    /// Reorders categories: entry `i` of the result is category `order[i]`.
    pub fn permute_categories(&self, order: &[usize]) -> Result<Self> {
        if !is_permutation(order, self.k()) {
            return Err(Error::domain("not a permutation of the categories"));
        }
        Ok(Panel {
            categories: order.iter().map(|&r| self.categories[r].clone()).collect(),
            periods: self.periods.clone(),
            exposures: order.iter().map(|&r| self.exposures[r].clone()).collect(),
            losses: order.iter().map(|&r| self.losses[r].clone()).collect(),
        })
    }

    /// Reorders periods: entry `i` of the result is period `order[i]`.
    pub fn permute_periods(&self, order: &[usize]) -> Result<Self> {
        if !is_permutation(order, self.n()) {
            return Err(Error::domain("not a permutation of the periods"));
        }
        let pick = |rows: &[Vec<u64>]| -> Vec<Vec<u64>> {
            rows.iter()
                .map(|row| order.iter().map(|&j| row[j]).collect())
                .collect()
        };
        Ok(Panel {
            categories: self.categories.clone(),
            periods: order.iter().map(|&j| self.periods[j].clone()).collect(),
            exposures: pick(&self.exposures),
            losses: pick(&self.losses),
        })
    }
}

fn is_permutation(order: &[usize], len: usize) -> bool {
    let mut seen = vec![false; len];
    order.len() == len
        && order.iter().all(|&i| i < len && !std::mem::replace(&mut seen[i], true))
}

fn check_unique(labels: &[String], what: &str) -> Result<()> {
    let mut seen = HashMap::new();
    for (i, l) in labels.iter().enumerate() {
        if let Some(prev) = seen.insert(l.as_str(), i) {
            return Err(Error::domain(format!(
                "{what} label {l:?} repeated at positions {prev} and {i}"
            )));
        }
    }
    Ok(())
}

/// Parses the panel CSV format. Row numbers in errors are 1-based file lines,
/// the header being row 1.
pub fn parse_panel<R: Read>(stream: R) -> Result<Panel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(stream);
    let mut records = reader.records();

    let header = match records.next() {
        Some(rec) => rec.map_err(|e| csv_error(e, 1))?,
        None => return Err(Error::parse(1, "header", "missing header line")),
    };
    let header_fields: Vec<&str> = header.iter().collect();
    if header_fields != PANEL_HEADER {
        return Err(Error::parse(
            1,
            "header",
            format!("missing header: expected `{}`", PANEL_HEADER.join(",")),
        ));
    }

    let mut categories: Vec<String> = Vec::new();
    let mut periods: Vec<String> = Vec::new();
    let mut cat_index: HashMap<String, usize> = HashMap::new();
    let mut per_index: HashMap<String, usize> = HashMap::new();
    let mut period_row: Vec<u64> = Vec::new();
    let mut cells: HashMap<(usize, usize), (u64, u64, u64)> = HashMap::new();

    for (idx, rec) in records.enumerate() {
        let row = idx as u64 + 2;
        let rec = rec.map_err(|e| csv_error(e, row))?;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != 4 {
            let column = PANEL_HEADER.get(rec.len()).copied().unwrap_or("losses");
            return Err(Error::parse(
                row,
                column,
                format!("expected 4 fields, found {}", rec.len()),
            ));
        }
        let period = rec[0].to_string();
        let category = rec[1].to_string();
        if period.is_empty() {
            return Err(Error::parse(row, "period", "empty period label"));
        }
        if category.is_empty() {
            return Err(Error::parse(row, "category", "empty category label"));
        }
        let m = parse_count(&rec[2], row, "exposures")?;
        let big_m = parse_count(&rec[3], row, "losses")?;
        if m == 0 {
            return Err(Error::parse(row, "exposures", format!("zero exposures at row {row}")));
        }
        if big_m > m {
            return Err(Error::parse(
                row,
                "losses",
                format!("losses exceed exposures at row {row} ({big_m} > {m})"),
            ));
        }
        let r = *cat_index.entry(category.clone()).or_insert_with(|| {
            categories.push(category.clone());
            categories.len() - 1
        });
        let j = *per_index.entry(period.clone()).or_insert_with(|| {
            periods.push(period.clone());
            period_row.push(row);
            periods.len() - 1
        });
        if let Some(&(first, _, _)) = cells.get(&(r, j)) {
            return Err(Error::parse(
                row,
                "category",
                format!("duplicate cell ({period}, {category}) at row {row}, first seen at row {first}"),
            ));
        }
        cells.insert((r, j), (row, m, big_m));
    }

    if categories.is_empty() {
        return Err(Error::parse(2, "period", "panel has no data rows"));
    }
    let k = categories.len();
    let n = periods.len();
    let mut exposures = vec![vec![0u64; n]; k];
    let mut losses = vec![vec![0u64; n]; k];
    for j in 0..n {
        for r in 0..k {
            match cells.get(&(r, j)) {
                Some(&(_, m, big_m)) => {
                    exposures[r][j] = m;
                    losses[r][j] = big_m;
                }
                None => {
                    return Err(Error::parse(
                        period_row[j],
                        "category",
                        format!(
                            "ragged panel: category {} missing in period {} (period first seen at row {})",
                            categories[r], periods[j], period_row[j]
                        ),
                    ))
                }
            }
        }
    }
    Panel::new(categories, periods, exposures, losses)
}

fn parse_count(field: &str, row: u64, column: &str) -> Result<u64> {
    if field.is_empty() || !field.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::parse(
            row,
            column,
            format!("non-integer count {field:?}"),
        ));
    }
    field
        .parse::<u64>()
        .map_err(|e| Error::parse(row, column, format!("count {field:?} out of range: {e}")))
}

fn csv_error(e: csv::Error, row: u64) -> Error {
    let line = e.position().map_or(row, |p| p.line());
    Error::parse(line, "record", e.to_string())
}

/// Writes the panel in CSV format, period-major, categories in panel order.
pub fn write_panel<W: Write>(panel: &Panel, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(PANEL_HEADER).map_err(io)?;
    for j in 0..panel.n() {
        for r in 0..panel.k() {
            w.write_record([
                panel.periods[j].as_str(),
                panel.categories[r].as_str(),
                &panel.exposures[r][j].to_string(),
                &panel.losses[r][j].to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Panel serialized to a string.
pub fn panel_to_string(panel: &Panel) -> String {
    let mut buf = Vec::new();
    write_panel(panel, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("panel labels are utf-8")
}

/// Loss proportions `M[r][j] / m[r][j]`, indexed `[r][j]`.
pub fn observed_proportions(panel: &Panel) -> Vec<Vec<f64>> {
    panel
        .exposures
        .iter()
        .zip(&panel.losses)
        .map(|(ms, bs)| {
            ms.iter()
                .zip(bs)
                .map(|(&m, &b)| b as f64 / m as f64)
                .collect()
        })
        .collect()
}
