//! Report emission: per-profile CSV and Markdown tables plus radar data,
//! deterministic byte-for-byte and golden-file tested.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::eval::{aggregate, AttackRecord, TableKind};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report io: {0}")]
    Io(#[from] std::io::Error),
    #[error("log has no records")]
    EmptyLog,
    #[error("profile `{profile}` is missing variant `{variant}`")]
    MissingVariant { profile: String, variant: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    MainTable,
    AblationTable,
    SeqTable,
    RadarCsv,
}

impl ReportKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "main-table" => Some(Self::MainTable),
            "ablation-table" => Some(Self::AblationTable),
            "seq-table" => Some(Self::SeqTable),
            "radar-csv" => Some(Self::RadarCsv),
            _ => None,
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::MainTable => "main-table",
            Self::AblationTable => "ablation-table",
            Self::SeqTable => "seq-table",
            Self::RadarCsv => "radar-csv",
        }
    }

    fn table_kind(&self) -> Option<TableKind> {
        match self {
            Self::MainTable => Some(TableKind::Main),
            Self::AblationTable => Some(TableKind::Ablation),
            Self::SeqTable => Some(TableKind::Seq),
            Self::RadarCsv => None,
        }
    }

    fn file_stem(&self) -> &'static str {
        match self {
            Self::MainTable => "main_table",
            Self::AblationTable => "ablation_table",
            Self::SeqTable => "seq_table",
            Self::RadarCsv => "radar",
        }
    }
}

/// Emits one report kind from a record set into `out_dir`, one file pair
/// (CSV + Markdown; radar: CSV only) per profile present. Returns the
/// written paths in deterministic order.
pub fn report(
    records: &[AttackRecord],
    kind: ReportKind,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>, ReportError> {
    if records.is_empty() {
        return Err(ReportError::EmptyLog);
    }
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;

    let mut by_profile: BTreeMap<&str, Vec<&AttackRecord>> = BTreeMap::new();
    for r in records {
        by_profile.entry(r.profile.as_str()).or_default().push(r);
    }

    let mut written = Vec::new();
    for (profile, rs) in by_profile {
        let owned: Vec<AttackRecord> = rs.into_iter().cloned().collect();
        let table = aggregate(&owned);
        match kind.table_kind() {
            Some(table_kind) => {
                for v in table_kind.variants() {
                    if !table.has_variant(*v) {
                        return Err(ReportError::MissingVariant {
                            profile: profile.to_string(),
                            variant: v.id().to_string(),
                        });
                    }
                }
                let selected = table.select(table_kind.variants());
                let csv_path = out_dir.join(format!("{}_{}.csv", kind.file_stem(), profile));
                std::fs::write(&csv_path, selected.to_csv(table_kind))?;
                written.push(csv_path);
                let md_path = out_dir.join(format!("{}_{}.md", kind.file_stem(), profile));
                std::fs::write(&md_path, selected.to_markdown(table_kind))?;
                written.push(md_path);
            }
            None => {
                let csv_path = out_dir.join(format!("{}_{}.csv", kind.file_stem(), profile));
                std::fs::write(&csv_path, table.to_radar_csv())?;
                written.push(csv_path);
            }
        }
    }
    Ok(written)
}
