//! Campaign execution and artifact emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use barrier_fleet::metrics::{EncounterGrid, MetricsSummary};
use barrier_fleet::sim::{run_campaign, CampaignResult, Mode, Scenario, TickRecord};

/// Files written for one mode.
#[derive(Debug, Clone)]
pub struct ModeArtifacts {
    pub summary: MetricsSummary,
    pub files: Vec<PathBuf>,
}

#[derive(Debug)]
pub enum BatchError {
    Campaign(barrier_fleet::Error),
    Io(PathBuf, std::io::Error),
}

impl std::fmt::Display for BatchError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BatchError::Campaign(e) => write!(f, "campaign failed: {e}"),
            BatchError::Io(p, e) => write!(f, "cannot write {}: {e}", p.display()),
        }
    }
}

impl std::error::Error for BatchError {}

fn write(path: PathBuf, contents: &str) -> Result<PathBuf, BatchError> {
    fs::write(&path, contents).map_err(|e| BatchError::Io(path.clone(), e))?;
    Ok(path)
}

/// Folds negative zero into zero so it prints as `0`.
fn num(x: f64) -> f64 {
    x + 0.0
}

/// Per-tick log, one row per vehicle per tick. Values use Rust's shortest
/// round-trip float formatting; `min_h` is empty for a vehicle with no
/// contacts.
pub fn trajectory_csv(ticks: &[TickRecord]) -> String {
    let mut s = String::from("t,vehicle_id,x,y,theta,u_thr_nom,u_rud_nom,u_thr_safe,u_rud_safe,slack_total,min_h\n");
    for r in ticks {
        let h = r.min_h.map_or(String::new(), |h| num(h).to_string());
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{h}",
            num(r.t),
            r.vehicle_id,
            num(r.state.x),
            num(r.state.y),
            num(r.state.theta),
            num(r.u_nom.u_thr),
            num(r.u_nom.u_rud),
            num(r.u_safe.u_thr),
            num(r.u_safe.u_rud),
            num(r.slack_total),
        );
    }
    s
}

/// Writes summary JSON, heatmap CSV and trajectory CSVs for one campaign.
pub fn write_artifacts(
    result: &CampaignResult,
    template: &EncounterGrid,
    dir: &Path,
) -> Result<ModeArtifacts, BatchError> {
    fs::create_dir_all(dir).map_err(|e| BatchError::Io(dir.to_path_buf(), e))?;
    let mode = result.mode.as_str();
    let summary = result.summary(template);
    let mut files = vec![
        write(dir.join(format!("summary_{mode}.json")), &summary.to_json())?,
        write(dir.join(format!("heatmap_{mode}.csv")), &result.encounter_grid(template).to_csv())?,
    ];
    for leg in &result.legs {
        if let Some(ticks) = &leg.trajectory {
            files.push(write(dir.join(format!("trajectory_{mode}_leg{}.csv", leg.leg_index)), &trajectory_csv(ticks))?);
        }
    }
    Ok(ModeArtifacts { summary, files })
}

pub fn run_mode(
    scenario: &Scenario,
    mode: Mode,
    threads: Option<usize>,
    template: &EncounterGrid,
    dir: &Path,
) -> Result<ModeArtifacts, BatchError> {
    let mut s = scenario.clone();
    s.joust.mode = mode;
    let result = run_campaign(&s, threads).map_err(BatchError::Campaign)?;
    write_artifacts(&result, template, dir)
}

fn label(mode: &str) -> &'static str {
    match mode {
        "colregs_only" => "COLREGS only",
        "cbf_only" => "CBF only",
        _ => "COLREGS + CBF",
    }
}

pub fn table_header() -> String {
    "| Mode | V[β] | Near misses | Collisions | Extra time | Extra distance |\n|---|---|---|---|---|---|\n".to_string()
}

pub fn table_row(s: &MetricsSummary) -> String {
    let v = s.coverage_variance.map_or("n/a".to_string(), |v| format!("{v:.2}"));
    format!(
        "| {} | {v} | {} | {} | {:+.1}% | {:+.1}% |\n",
        label(&s.mode),
        s.near_misses,
        s.collisions,
        s.avg_extra_time_pct,
        s.avg_extra_distance_pct
    )
}

/// Runs all three modes on the same seed and writes `table2.md`.
pub fn run_table(
    scenario: &Scenario,
    threads: Option<usize>,
    template: &EncounterGrid,
    dir: &Path,
) -> Result<(String, Vec<ModeArtifacts>), BatchError> {
    let mut table = table_header();
    let mut out = Vec::new();
    for mode in Mode::ALL {
        let a = run_mode(scenario, mode, threads, template, dir)?;
        table.push_str(&table_row(&a.summary));
        out.push(a);
    }
    let path = write(dir.join("table2.md"), &table)?;
    if let Some(first) = out.first_mut() {
        first.files.push(path);
    }
    Ok((table, out))
}
