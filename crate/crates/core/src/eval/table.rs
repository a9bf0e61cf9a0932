//! Attack-success-rate tables: per-(category, variant) aggregation and the
//! CSV / Markdown / radar-data serializers used by the report command.

use std::collections::BTreeMap;

use super::{round_half_up_1dp, AttackRecord, Category, Variant};
use crate::Scalar;

/// Report table flavors and their column sets / display labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    /// Baselines plus the full pipeline.
    Main,
    /// Step-wise ablations.
    Ablation,
    /// Sequence-order ablation.
    Seq,
}

impl TableKind {
    pub fn variants(&self) -> &'static [Variant] {
        match self {
            TableKind::Main => {
                &[Variant::Direct, Variant::Rab, Variant::Daca, Variant::Veil, Variant::Tfm]
            }
            TableKind::Ablation => {
                &[Variant::WithoutTbp, Variant::WithoutCsm, Variant::WithMiddle, Variant::Tfm]
            }
            TableKind::Seq => &[Variant::RevsSeq, Variant::Tfm],
        }
    }

    pub fn label(&self, variant: Variant) -> &'static str {
        match (self, variant) {
            (TableKind::Main, Variant::Direct) => "TSB",
            (TableKind::Main, Variant::Rab) => "RAB",
            (TableKind::Main, Variant::Daca) => "DACA",
            (TableKind::Main, Variant::Veil) => "VEIL",
            (TableKind::Main, Variant::Tfm) => "Ours",
            (_, Variant::WithoutTbp) => "w/o TBP",
            (_, Variant::WithoutCsm) => "w/o CSM",
            (_, Variant::WithMiddle) => "with_middle",
            (_, Variant::RevsSeq) => "revs_seq",
            (_, v) => v.id_label(),
        }
    }
}

impl Variant {
    fn id_label(&self) -> &'static str {
        match self {
            Variant::Tfm => "TFM",
            other => other.id(),
        }
    }
}

/// Percentage table: category rows in canonical order, variant columns in
/// canonical order, plus an `Avg.` row holding the unweighted mean of each
/// column's category cells. Values are stored unrounded; rounding happens
/// at serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct AsrTable {
    pub categories: Vec<Category>,
    pub variants: Vec<Variant>,
    cells: Vec<Vec<Option<Scalar>>>,
    avg: Vec<Option<Scalar>>,
}

impl AsrTable {
    pub fn cell(&self, category: Category, variant: Variant) -> Option<Scalar> {
        let ci = self.categories.iter().position(|c| *c == category)?;
        let vi = self.variants.iter().position(|v| *v == variant)?;
        self.cells[ci][vi]
    }

    pub fn avg(&self, variant: Variant) -> Option<Scalar> {
        let vi = self.variants.iter().position(|v| *v == variant)?;
        self.avg[vi]
    }

    /// Column subset preserving order, with averages recomputed over the
    /// remaining cells.
    pub fn select(&self, variants: &[Variant]) -> AsrTable {
        let keep: Vec<usize> = variants
            .iter()
            .filter_map(|v| self.variants.iter().position(|x| x == v))
            .collect();
        let variants: Vec<Variant> = keep.iter().map(|&i| self.variants[i]).collect();
        let cells: Vec<Vec<Option<Scalar>>> = self
            .cells
            .iter()
            .map(|row| keep.iter().map(|&i| row[i]).collect())
            .collect();
        let avg = keep.iter().map(|&i| self.avg[i]).collect();
        AsrTable { categories: self.categories.clone(), variants, cells, avg }
    }

    /// Variants that actually have at least one cell.
    pub fn has_variant(&self, variant: Variant) -> bool {
        self.variants.contains(&variant)
    }

    fn format_cell(value: Option<Scalar>) -> String {
        match value {
            Some(v) => format!("{:.1}", round_half_up_1dp(v)),
            None => String::new(),
        }
    }

    /// Deterministic CSV with one column per variant and an `Avg.` row.
    pub fn to_csv(&self, kind: TableKind) -> String {
        let mut out = String::from("category");
        for v in &self.variants {
            out.push(',');
            out.push_str(kind.label(*v));
        }
        out.push('\n');
        for (ci, c) in self.categories.iter().enumerate() {
            out.push_str(c.label());
            for cell in &self.cells[ci] {
                out.push(',');
                out.push_str(&Self::format_cell(*cell));
            }
            out.push('\n');
        }
        out.push_str("Avg.");
        for a in &self.avg {
            out.push(',');
            out.push_str(&Self::format_cell(*a));
        }
        out.push('\n');
        out
    }

    /// Aligned Markdown rendering of the same table.
    pub fn to_markdown(&self, kind: TableKind) -> String {
        let mut rows: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["Category".to_string()];
        header.extend(self.variants.iter().map(|v| kind.label(*v).to_string()));
        rows.push(header);
        for (ci, c) in self.categories.iter().enumerate() {
            let mut row = vec![c.label().to_string()];
            row.extend(self.cells[ci].iter().map(|&v| Self::format_cell(v)));
            rows.push(row);
        }
        let mut avg_row = vec!["Avg.".to_string()];
        avg_row.extend(self.avg.iter().map(|&v| Self::format_cell(v)));
        rows.push(avg_row);

        let cols = rows[0].len();
        let widths: Vec<usize> = (0..cols)
            .map(|i| rows.iter().map(|r| r[i].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (ri, row) in rows.iter().enumerate() {
            out.push('|');
            for (i, cell) in row.iter().enumerate() {
                out.push_str(&format!(" {:<width$} |", cell, width = widths[i]));
            }
            out.push('\n');
            if ri == 0 {
                out.push('|');
                for w in &widths {
                    out.push_str(&format!("{:-<width$}|", "", width = w + 2));
                }
                out.push('\n');
            }
        }
        out
    }

    /// Long-form `category,variant,value` rows for external radar plots.
    pub fn to_radar_csv(&self) -> String {
        let mut out = String::from("category,variant,value\n");
        for (ci, c) in self.categories.iter().enumerate() {
            for (vi, v) in self.variants.iter().enumerate() {
                if let Some(val) = self.cells[ci][vi] {
                    out.push_str(&format!("{},{},{}\n", c.id(), v.id(), Self::format_cell(Some(val))));
                }
            }
        }
        out
    }
}

/// Aggregates records into per-(category, variant) success rates, rows and
/// columns in canonical order, plus the average row.
pub fn aggregate(records: &[AttackRecord]) -> AsrTable {
    let mut groups: BTreeMap<(usize, usize), Vec<&AttackRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.category.order(), r.variant.order()))
            .or_default()
            .push(r);
    }
    let mut categories: Vec<Category> = Vec::new();
    let mut variants: Vec<Variant> = Vec::new();
    for &(ci, vi) in groups.keys() {
        let c = Category::ALL[ci];
        let v = Variant::ALL[vi];
        if !categories.contains(&c) {
            categories.push(c);
        }
        if !variants.contains(&v) {
            variants.push(v);
        }
    }
    categories.sort_by_key(|c| c.order());
    variants.sort_by_key(|v| v.order());

    let cells: Vec<Vec<Option<Scalar>>> = categories
        .iter()
        .map(|c| {
            variants
                .iter()
                .map(|v| {
                    groups.get(&(c.order(), v.order())).map(|rs| {
                        let successes = rs.iter().filter(|r| r.success).count();
                        100.0 * successes as Scalar / rs.len() as Scalar
                    })
                })
                .collect()
        })
        .collect();

    let avg: Vec<Option<Scalar>> = (0..variants.len())
        .map(|vi| {
            let vals: Vec<Scalar> = cells.iter().filter_map(|row| row[vi]).collect();
            if vals.is_empty() {
                None
            } else {
                Some(vals.iter().sum::<Scalar>() / vals.len() as Scalar)
            }
        })
        .collect();

    AsrTable { categories, variants, cells, avg }
}
