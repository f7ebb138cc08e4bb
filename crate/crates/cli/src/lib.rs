//! Commands behind the `ckmeans` binary: dataset generation, pipeline runs
//! with result files and figures, and replays of the six reference cases.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use ckmeans::dataset::BlobSpec;
use ckmeans::report::{self, Figure, PlotKind, PlotSpec};
use ckmeans::{
    generate_blobs, minmax_normalize, read_csv, run_ckmeans, write_csv, CkmeansOutcome,
    ComparisonTable, DataMatrix, PipelineConfig,
};
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Ok,
    NoIntersection,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSource {
    Blobs(BlobSpec),
    Csv { path: PathBuf, has_header: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Record of one command invocation, written as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: Option<PipelineConfig>,
    pub input: InputSource,
    /// Emitted files, relative to the output directory for `run` and `case`.
    pub outputs: Vec<PathBuf>,
    pub timings: Vec<StageTiming>,
    pub outcome: Outcome,
    pub initial_k: Option<usize>,
    pub final_k: Option<usize>,
    pub mean_si: Option<f64>,
    pub message: Option<String>,
}

impl RunManifest {
    pub fn total_seconds(&self) -> f64 {
        self.timings.iter().map(|t| t.seconds).sum()
    }
}

/// Parameters of the six reference cases: blob spec and filter width.
pub fn case_parameters(case_id: u8) -> Result<(BlobSpec, f64)> {
    let (n_samples, n_features, n_centroids, cluster_std, seed, mu) = match case_id {
        1 => (500, 2, 2, 5.0, 15, 0.4),
        2 => (500, 2, 3, 0.4, 12, 0.4),
        3 => (500, 3, 2, 3.5, 15, 0.4),
        4 => (500, 2, 5, 1.0, 2, 0.6),
        5 => (500, 6, 5, 1.5, 1, 0.6),
        6 => (100_000, 30, 5, 1.5, 1, 0.8),
        other => bail!("unknown case {other}; cases are numbered 1 to 6"),
    };
    Ok((
        BlobSpec {
            n_samples,
            n_features,
            n_centroids,
            cluster_std,
            seed,
        },
        mu,
    ))
}

pub fn cmd_generate(spec: &BlobSpec, out: &Path) -> Result<RunManifest> {
    let start = Instant::now();
    let data = generate_blobs(spec)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_csv(&data, out)?;
    Ok(RunManifest {
        config: None,
        input: InputSource::Blobs(spec.clone()),
        outputs: vec![out.to_path_buf()],
        timings: vec![StageTiming {
            stage: "generate".into(),
            seconds: start.elapsed().as_secs_f64(),
        }],
        outcome: Outcome::Ok,
        initial_k: None,
        final_k: None,
        mean_si: None,
        message: None,
    })
}

/// Runs the pipeline on `input` and writes results, figures and the
/// manifest into `outdir`.
pub fn cmd_run(
    input: &InputSource,
    config: &PipelineConfig,
    outdir: &Path,
    plots: bool,
) -> Result<RunManifest> {
    fs::create_dir_all(outdir).with_context(|| format!("creating {}", outdir.display()))?;
    let mut writer = Outputs::new(outdir);
    let mut timings = Vec::new();

    let start = Instant::now();
    let data = match input {
        InputSource::Blobs(spec) => {
            let data = generate_blobs(spec)?;
            write_csv(&data, outdir.join("data.csv"))?;
            writer.files.push("data.csv".into());
            data
        }
        InputSource::Csv { path, has_header } => read_csv(path, *has_header)?,
    };
    timings.push(StageTiming {
        stage: "load".into(),
        seconds: start.elapsed().as_secs_f64(),
    });

    let outcome = run_ckmeans(&data, config)?;
    timings.extend(
        outcome
            .timings()
            .iter()
            .map(|(stage, seconds)| StageTiming {
                stage: stage.clone(),
                seconds: *seconds,
            }),
    );

    let start = Instant::now();
    writer.write("result.json", &serde_json::to_string(&outcome)?)?;
    writer.write(
        "comparison.csv",
        &ComparisonTable::from_outcome(data.feature_names(), &outcome).to_csv(),
    )?;
    timings.push(StageTiming {
        stage: "write_results".into(),
        seconds: start.elapsed().as_secs_f64(),
    });

    if plots {
        let start = Instant::now();
        emit_figures(&mut writer, &data, &outcome)?;
        timings.push(StageTiming {
            stage: "figures".into(),
            seconds: start.elapsed().as_secs_f64(),
        });
    }

    let (status, initial_k, final_k, mean_si, message) = match &outcome {
        CkmeansOutcome::Clustered(r) => (
            Outcome::Ok,
            r.initial_k,
            Some(r.final_k),
            r.final_mean_si(),
            None,
        ),
        CkmeansOutcome::NoIntersection(r) => (
            Outcome::NoIntersection,
            r.initial_k,
            None,
            None,
            Some(r.message.clone()),
        ),
    };
    writer.files.push(MANIFEST_FILE.into());
    let manifest = RunManifest {
        config: Some(config.clone()),
        input: input.clone(),
        outputs: writer.files,
        timings,
        outcome: status,
        initial_k: Some(initial_k),
        final_k,
        mean_si,
        message,
    };
    fs::write(
        outdir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?,
    )
    .with_context(|| format!("writing {}", outdir.join(MANIFEST_FILE).display()))?;
    Ok(manifest)
}

/// Replays reference case `case_id` with its table parameters.
pub fn cmd_case(case_id: u8, outdir: &Path, plots: bool) -> Result<RunManifest> {
    let (spec, mu) = case_parameters(case_id)?;
    let config = PipelineConfig {
        mu,
        seed: spec.seed,
        ..PipelineConfig::default()
    };
    cmd_run(&InputSource::Blobs(spec), &config, outdir, plots)
}

struct Outputs<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path) -> Self {
        Self {
            dir,
            files: Vec::new(),
        }
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(name.into());
        Ok(())
    }

    fn figure(&mut self, stem: &str, figure: Figure) -> Result<()> {
        self.write(&format!("{stem}.svg"), &figure.svg)?;
        self.write(&format!("{stem}.csv"), &figure.sidecar)
    }
}

fn scatter_kind(data: &DataMatrix) -> PlotKind {
    if data.features() == 3 {
        PlotKind::Scatter3dProjection
    } else {
        PlotKind::Scatter2d
    }
}

/// Every figure that applies to the outcome and the data's dimensionality.
fn emit_figures(out: &mut Outputs, data: &DataMatrix, outcome: &CkmeansOutcome) -> Result<()> {
    let scatterable = matches!(data.features(), 2 | 3);
    let crisp: Vec<usize> = outcome.row_table().iter().map(|r| r.kmeans).collect();

    let result = match outcome {
        CkmeansOutcome::NoIntersection(_) => {
            if scatterable {
                let spec = PlotSpec::new(
                    scatter_kind(data),
                    "Data distribution (no intersection data)",
                );
                out.figure("scatter", report::plot_scatter(data, &crisp, &[], &spec)?)?;
            }
            return Ok(());
        }
        CkmeansOutcome::Clustered(r) => r,
    };
    let kept = &result.selection;
    let final_labels = &result.final_assignment.labels;

    if scatterable {
        let title = format!(
            "Data distribution, intersection data highlighted (μ = {})",
            result.config.mu
        );
        let spec = PlotSpec::new(scatter_kind(data), title);
        out.figure(
            "scatter",
            report::plot_scatter(data, &crisp, &kept.kept_indices, &spec)?,
        )?;

        let spec = PlotSpec::new(scatter_kind(data), "Intersection data by membership level");
        out.figure(
            "intersection",
            report::plot_intersection(&kept.kept_data, &kept.kept_memberships, &spec)?,
        )?;

        let spec = PlotSpec::new(
            scatter_kind(data),
            "Final k-means clustering of the intersection data",
        );
        out.figure(
            "kmeans",
            report::plot_scatter(&kept.kept_data, final_labels, &[], &spec)?,
        )?;
    }

    let spec = PlotSpec::new(PlotKind::Membership, "Membership of the intersection data");
    out.figure(
        "membership",
        report::plot_membership(&kept.kept_memberships, &spec)?,
    )?;

    if let Some(sil) = &result.final_silhouette {
        let spec = PlotSpec::new(
            PlotKind::Silhouette,
            format!(
                "Silhouette of the intersection clusters (SI = {:.4})",
                sil.mean_si
            ),
        );
        out.figure(
            "silhouette",
            report::plot_silhouette(sil, final_labels, &spec)?,
        )?;
    }

    if data.features() >= 3 {
        let normalized = minmax_normalize(&kept.kept_data);
        for cluster in 0..result.final_k {
            let name = cluster_name(cluster);
            let spec = PlotSpec::new(
                PlotKind::Radar,
                format!("MinMax normalized stacked radar, cluster {name}"),
            );
            out.figure(
                &format!("radar_{name}"),
                report::plot_radar(&normalized, final_labels, cluster, &spec)?,
            )?;
        }
    }
    Ok(())
}

/// `A`, `B`, ..., `Z`, `AA`, `AB`, ...
pub fn cluster_name(mut index: usize) -> String {
    let mut name = Vec::new();
    loop {
        name.push(b'A' + (index % 26) as u8);
        if index < 26 {
            break;
        }
        index = index / 26 - 1;
    }
    name.reverse();
    String::from_utf8(name).expect("ascii")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cluster_names() {
        assert_eq!(cluster_name(0), "A");
        assert_eq!(cluster_name(25), "Z");
        assert_eq!(cluster_name(26), "AA");
        assert_eq!(cluster_name(27), "AB");
    }

    #[test]
    fn case_table() {
        assert_eq!(case_parameters(1).unwrap().1, 0.4);
        assert_eq!(case_parameters(4).unwrap().1, 0.6);
        let (spec, mu) = case_parameters(6).unwrap();
        assert_eq!((spec.n_samples, spec.n_features, mu), (100_000, 30, 0.8));
        assert!(case_parameters(0).is_err());
        assert!(case_parameters(7).is_err());
    }
}
