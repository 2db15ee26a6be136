//! Line-oriented JSON reports. Each line is one record tagged by `record`.

use ldpsgd::sim::{Method, ReplicationOutcome, ReportCell};
use ldpsgd::{ConfidenceInterval, LossModel, Mu, SimDesign, SimulationReport, StepSchedule};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// One coefficient's interval from one replication at one checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub n: usize,
    pub level: f64,
    pub method: Method,
    pub label: String,
    pub j: usize,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub covered: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    /// Wall-clock seconds; absent when the report must be reproducible byte for byte.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

impl RunMetadata {
    pub fn new(runtime_seconds: Option<f64>) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            runtime_seconds,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub design: SimDesign,
    pub replications: usize,
    pub se_method: String,
    pub metadata: RunMetadata,
}

/// Final estimate and intervals for one coefficient of a data analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRecord {
    pub j: usize,
    pub name: String,
    pub estimate: f64,
    pub plugin: ConfidenceInterval,
    pub random_scaling: ConfidenceInterval,
}

/// Estimate and both intervals for one coefficient at one checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub n: usize,
    pub j: usize,
    pub name: String,
    pub estimate: f64,
    pub plugin: ConfidenceInterval,
    pub random_scaling: ConfidenceInterval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub rows: usize,
    pub response: String,
    pub columns: Vec<String>,
    pub model: LossModel,
    pub mu: Mu,
    pub schedule: StepSchedule,
    pub level: f64,
    pub seed: u64,
    pub plugin_label: String,
    pub random_scaling_label: String,
    /// GDP cost of one plug-in covariance release; absent without privacy.
    pub plugin_release_budget: Option<f64>,
    /// Plug-in releases made (one per checkpoint); composition is left to the reader.
    pub plugin_releases: usize,
    pub critical_paths: usize,
    pub critical_grid: usize,
    pub metadata: RunMetadata,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum Record {
    Replication(ReplicationRecord),
    Cell(ReportCell),
    SimulationSummary(SimulationSummary),
    Coefficient(CoefficientRecord),
    Trajectory(TrajectoryRecord),
    AnalysisSummary(AnalysisSummary),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub records: Vec<Record>,
}

impl Report {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| CliError::Report(format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<Record>>>()?;
        Ok(Self { records })
    }

    pub fn cells(&self) -> impl Iterator<Item = &ReportCell> {
        self.records.iter().filter_map(|r| match r {
            Record::Cell(c) => Some(c),
            _ => None,
        })
    }

    pub fn coefficients(&self) -> impl Iterator<Item = &CoefficientRecord> {
        self.records.iter().filter_map(|r| match r {
            Record::Coefficient(c) => Some(c),
            _ => None,
        })
    }

    pub fn trajectory(&self) -> impl Iterator<Item = &TrajectoryRecord> {
        self.records.iter().filter_map(|r| match r {
            Record::Trajectory(t) => Some(t),
            _ => None,
        })
    }

    pub fn analysis_summary(&self) -> Option<&AnalysisSummary> {
        self.records.iter().find_map(|r| match r {
            Record::AnalysisSummary(s) => Some(s),
            _ => None,
        })
    }

    pub fn simulation_summary(&self) -> Option<&SimulationSummary> {
        self.records.iter().find_map(|r| match r {
            Record::SimulationSummary(s) => Some(s),
            _ => None,
        })
    }

    /// Replication rows, then aggregated cells, then the summary.
    pub fn from_simulation(
        outcomes: &[ReplicationOutcome],
        report: &SimulationReport,
        metadata: RunMetadata,
    ) -> Self {
        let design = &report.design;
        let private = design.is_private();
        let mut records = Vec::new();
        for outcome in outcomes {
            for cp in &outcome.checkpoints {
                for li in &cp.intervals {
                    for method in Method::ALL {
                        for (j, ci) in li.for_method(method).iter().enumerate() {
                            records.push(Record::Replication(ReplicationRecord {
                                replication: outcome.index,
                                n: cp.n,
                                level: li.level,
                                method,
                                label: method.label(private).to_string(),
                                j,
                                estimate: cp.theta_bar[j],
                                lower: ci.lower,
                                upper: ci.upper,
                                covered: ci.contains(design.theta0[j]),
                            }));
                        }
                    }
                }
            }
        }
        records.extend(report.cells.iter().cloned().map(Record::Cell));
        records.push(Record::SimulationSummary(SimulationSummary {
            design: design.clone(),
            replications: report.replications,
            se_method: report.se_method.clone(),
            metadata,
        }));
        Self { records }
    }
}
