//! Rendering of every output file, and writing them as a batch.
//!
//! CSV floats carry 17 significant digits (`{:.16e}`), enough to round-trip an
//! `f64`. Files are rendered in memory first; the target directory is probed
//! for writability before the first file is created.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use super::config::{ConfigCopy, ResolvedConfig};
use super::fit::{fit_exponential_rate, fit_log_rate, verify_bound, BoundReport, RateFit};
use super::monte_carlo::MonteCarloResult;
use crate::error::{Error, Result};
use crate::overshadow_graph::{
    candidates_from_fit, closed_sets, sink_components, strongly_connected_components,
    build_graph_from_fit, OvershadowGraph,
};
use crate::pseudo_truth::{fit_delta, preferred_actions, pseudo_truth_from_fit, FitTable, PseudoTruthReport};
use crate::thompson::{config_digest, Trace};

/// Float formatting used in every CSV file.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A rendered file waiting to be written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

impl OutputFile {
    fn new(name: &str, contents: String) -> Self {
        Self {
            name: name.to_owned(),
            contents,
        }
    }

    fn json<T: Serialize>(name: &str, value: &T) -> Result<Self> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        Ok(Self::new(name, text))
    }
}

fn csv(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn names(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| (*s).to_owned()).collect()
}

/// `t,sampled_index,action,reward,regret_increment,cum_regret,avg_regret`
pub fn trace_csv(trace: &Trace) -> String {
    let header = names(&[
        "t",
        "sampled_index",
        "action",
        "reward",
        "regret_increment",
        "cum_regret",
        "avg_regret",
    ]);
    let cum = trace.cumulative_regret();
    csv(
        &header,
        trace.steps.iter().zip(cum).map(|(s, c)| {
            vec![
                s.t.to_string(),
                s.sampled_index.to_string(),
                fmt_f64(s.action),
                fmt_f64(s.reward),
                fmt_f64(s.regret_increment),
                fmt_f64(c),
                fmt_f64(c / s.t as f64),
            ]
        }),
    )
}

/// `t,w_0,…,w_{K−1}` at each snapshot.
pub fn posterior_csv(trace: &Trace) -> String {
    let k = trace.snapshots.first().map_or(0, |s| s.log_weights.len());
    let mut header = vec!["t".to_owned()];
    header.extend((0..k).map(|i| format!("w_{i}")));
    csv(
        &header,
        trace.snapshots.iter().map(|s| {
            std::iter::once(s.t.to_string())
                .chain(s.weights().into_iter().map(fmt_f64))
                .collect()
        }),
    )
}

/// `param_index,delta_0,…` with one column per grid action.
pub fn delta_csv(fit: &FitTable) -> String {
    let mut header = vec!["param_index".to_owned()];
    header.extend((0..fit.n_actions()).map(|a| format!("delta_{a}")));
    csv(
        &header,
        fit.delta.iter().enumerate().map(|(i, row)| {
            std::iter::once(i.to_string())
                .chain(row.iter().map(|&v| fmt_f64(v)))
                .collect()
        }),
    )
}

fn series_csv(result: &MonteCarloResult, columns: &[(&str, &[f64])]) -> String {
    let mut header = vec!["t".to_owned()];
    header.extend(columns.iter().map(|(n, _)| (*n).to_owned()));
    csv(
        &header,
        result.times.iter().enumerate().map(|(i, t)| {
            std::iter::once(t.to_string())
                .chain(columns.iter().map(|(_, v)| fmt_f64(v[i])))
                .collect()
        }),
    )
}

fn map_series_csv(result: &MonteCarloResult) -> String {
    let mut header = vec!["t".to_owned()];
    for k in 0..result.map_series.len() {
        for stat in ["mean", "q25", "q75", "std"] {
            header.push(format!("theta{}_{stat}", k + 1));
        }
    }
    csv(
        &header,
        result.times.iter().enumerate().map(|(i, t)| {
            let mut row = vec![t.to_string()];
            for s in &result.map_series {
                row.extend([s.mean[i], s.q25[i], s.q75[i], s.std[i]].map(fmt_f64));
            }
            row
        }),
    )
}

fn histogram_csv(result: &MonteCarloResult, resolved: &ResolvedConfig) -> String {
    let header = names(&["t_start", "t_end", "action_index", "action", "count"]);
    let grid = &resolved.scenario.grid;
    csv(
        &header,
        result.action_histograms.iter().flat_map(|h| {
            h.counts.iter().enumerate().map(move |(a, c)| {
                vec![
                    h.t_start.to_string(),
                    h.t_end.to_string(),
                    a.to_string(),
                    fmt_f64(grid.action(a)),
                    c.to_string(),
                ]
            })
        }),
    )
}

/// Graph in DOT form with the pseudo-truth set highlighted.
pub fn graph_dot(graph: &OvershadowGraph, resolved: &ResolvedConfig, dagger: &[usize]) -> String {
    graph.to_dot(Some(&resolved.scenario.grid), dagger)
}

fn config_copy(resolved: &ResolvedConfig, seed: u64) -> Result<OutputFile> {
    let copy = ConfigCopy {
        config: resolved.config.clone(),
        digest: config_digest(&resolved.scenario, &resolved.settings, seed),
    };
    OutputFile::json("config.json", &copy)
}

/// `trace.csv`, `posterior.csv` and the config copy for one episode.
pub fn simulate_outputs(trace: &Trace, resolved: &ResolvedConfig, seed: u64) -> Result<Vec<OutputFile>> {
    Ok(vec![
        OutputFile::new("trace.csv", trace_csv(trace)),
        OutputFile::new("posterior.csv", posterior_csv(trace)),
        config_copy(resolved, seed)?,
    ])
}

/// `analysis.json` (the static report) and `delta_matrix.csv`.
pub fn analyze_outputs(report: &PseudoTruthReport, fit: &FitTable) -> Result<Vec<OutputFile>> {
    let summary = json!({
        "theta_dagger": report.theta_dagger,
        "epsilon": report.epsilon,
        "d": report.d,
        "a_const": report.a_const,
        "b_const": report.b_const,
        "delta_matrix_path": "delta_matrix.csv",
        "r_clip": report.r_clip,
        "tol": report.tol,
        "prior_mass_dagger": report.prior_mass_dagger,
        "top_class_union": report.top_class_union,
        "attainable_actions": report.attainable_actions,
    });
    Ok(vec![
        OutputFile::json("analysis.json", &summary)?,
        OutputFile::new("delta_matrix.csv", delta_csv(fit)),
    ])
}

/// Graph structure of a scenario: DOT text and the candidate-set summary.
pub fn graph_outputs(resolved: &ResolvedConfig) -> Result<(Vec<OutputFile>, OvershadowGraph)> {
    let tol = resolved.config.tol;
    let fit = fit_delta(&resolved.scenario)?;
    let phi = preferred_actions(&resolved.scenario)?;
    let graph = build_graph_from_fit(&fit, &phi, tol);
    let dagger = pseudo_truth_from_fit(&fit, tol);
    let (candidates, candidates_error) = match candidates_from_fit(&fit, &phi, &dagger, tol) {
        Ok(c) => (Some(c), None),
        Err(e @ Error::TooLarge(_)) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    let closed = match closed_sets(&graph) {
        Ok(c) => Some(c),
        Err(Error::TooLarge(_)) => None,
        Err(e) => return Err(e),
    };
    let summary = json!({
        "n": graph.n,
        "edge_count": graph.edges.len(),
        "phi": graph.phi,
        "theta_dagger": dagger,
        "strongly_connected_components": strongly_connected_components(&graph),
        "sink_components": sink_components(&graph),
        "closed_sets": closed,
        "candidates": candidates,
        "candidates_error": candidates_error,
    });
    let files = vec![
        OutputFile::new("graph.dot", graph_dot(&graph, resolved, &dagger)),
        OutputFile::json("candidates.json", &summary)?,
    ];
    Ok((files, graph))
}

/// Summary statistics written as `summary.json` by the Monte Carlo pipeline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub theta_dagger: Vec<usize>,
    pub epsilon: Option<f64>,
    pub d: f64,
    pub a_const: Option<f64>,
    pub b_const: Option<f64>,
    pub horizon: usize,
    pub replications: usize,
    /// Fit on `mean(1 − π_t(Θ†))` with values clipped at the log floor.
    pub fitted_rate: Option<RateFit>,
    /// Fit on `ln mean(1 − π_t(Θ†))`, tracked without underflow.
    pub fitted_rate_log: Option<RateFit>,
    pub fit_error: Option<String>,
    pub bound_report: Option<BoundReport>,
    pub final_dagger_mass_mean: f64,
    pub final_avg_regret_mean: f64,
    pub final_map_std: Vec<f64>,
    pub config_digest: String,
}

pub fn mc_summary(result: &MonteCarloResult, resolved: &ResolvedConfig) -> McSummary {
    let t_min = resolved.config.fit_start();
    let report = &result.report;
    let fitted_rate = fit_exponential_rate(&result.outside_mass_series, t_min);
    let fitted_rate_log = fit_log_rate(&result.times, &result.outside_log_mean, t_min);
    let fit_error = match (&fitted_rate, &fitted_rate_log) {
        (Err(e), _) | (_, Err(e)) => Some(e.to_string()),
        _ => None,
    };
    let bound_report = report
        .a_const
        .zip(report.b_const)
        .map(|(a, b)| verify_bound(&result.outside_mass_series, a, b));
    McSummary {
        theta_dagger: report.theta_dagger.clone(),
        epsilon: report.epsilon,
        d: report.d,
        a_const: report.a_const,
        b_const: report.b_const,
        horizon: resolved.settings.horizon,
        replications: result.replications,
        fitted_rate: fitted_rate.ok(),
        fitted_rate_log: fitted_rate_log.ok(),
        fit_error,
        bound_report,
        final_dagger_mass_mean: *result.dagger_mass_series.mean.last().unwrap_or(&f64::NAN),
        final_avg_regret_mean: *result.regret_series.mean.last().unwrap_or(&f64::NAN),
        final_map_std: result.final_map_std(),
        config_digest: config_digest(&resolved.scenario, &resolved.settings, resolved.config.base_seed),
    }
}

/// Every file of the Monte Carlo pipeline.
pub fn mc_outputs(result: &MonteCarloResult, resolved: &ResolvedConfig) -> Result<Vec<OutputFile>> {
    let (graph_files, _) = graph_outputs(resolved)?;
    let r = &result.regret_series;
    let m = &result.dagger_mass_series;
    let o = &result.outside_mass_series;
    let mut files = vec![
        OutputFile::new("map_series.csv", map_series_csv(result)),
        OutputFile::new(
            "regret_series.csv",
            series_csv(result, &[("mean", &r.mean), ("q25", &r.q25), ("q75", &r.q75), ("std", &r.std)]),
        ),
        OutputFile::new(
            "dagger_mass_series.csv",
            series_csv(
                result,
                &[
                    ("mean", &m.mean),
                    ("q25", &m.q25),
                    ("q75", &m.q75),
                    ("std", &m.std),
                    ("outside_mean", &o.mean),
                    ("outside_log_mean", &result.outside_log_mean),
                ],
            ),
        ),
        OutputFile::new("action_histograms.csv", histogram_csv(result, resolved)),
        OutputFile::json("summary.json", &mc_summary(result, resolved))?,
        config_copy(resolved, resolved.config.base_seed)?,
    ];
    files.extend(graph_files);
    Ok(files)
}

fn output_error(path: &Path, source: std::io::Error) -> Error {
    Error::Output {
        path: path.to_path_buf(),
        source,
    }
}

/// Creates `dir` if needed, checks it accepts files, then writes every file.
pub fn write_outputs(dir: &Path, files: &[OutputFile]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| output_error(dir, e))?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"").map_err(|e| output_error(dir, e))?;
    fs::remove_file(&probe).map_err(|e| output_error(&probe, e))?;
    let mut written = Vec::with_capacity(files.len());
    for f in files {
        let path = dir.join(&f.name);
        fs::write(&path, &f.contents).map_err(|e| output_error(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Compact listing used by the CLI after writing.
pub fn describe(paths: &[PathBuf]) -> String {
    let mut out = String::new();
    for p in paths {
        let _ = writeln!(out, "wrote {}", p.display());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::ExperimentConfig;
    use crate::experiments::monte_carlo::monte_carlo;
    use crate::pseudo_truth::analyze;
    use crate::thompson::run_episode;

    fn resolved(horizon: usize, reps: usize) -> ResolvedConfig {
        ExperimentConfig {
            horizon,
            replications: reps,
            ..ExperimentConfig::default()
        }
        .resolve()
        .unwrap()
    }

    fn assert_rectangular(text: &str) {
        let mut lines = text.lines();
        let width = lines.next().unwrap().split(',').count();
        for line in lines {
            assert_eq!(line.split(',').count(), width, "{line}");
        }
    }

    #[test]
    fn floats_have_seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
    }

    #[test]
    fn trace_files_are_rectangular() {
        let r = resolved(50, 1);
        let trace = run_episode(&r.scenario, &r.settings, 3).unwrap();
        let files = simulate_outputs(&trace, &r, 3).unwrap();
        let trace_text = &files[0].contents;
        assert!(trace_text.starts_with("t,sampled_index,action,reward,regret_increment,cum_regret,avg_regret\n"));
        assert_eq!(trace_text.lines().count(), 51);
        assert_rectangular(trace_text);
        let post = &files[1].contents;
        assert!(post.starts_with("t,w_0,w_1,"));
        assert_eq!(post.lines().next().unwrap().split(',').count(), 37);
        assert_rectangular(post);
    }

    #[test]
    fn mc_files_are_consistent() {
        let r = resolved(400, 2);
        let result = monte_carlo(&r).unwrap();
        let files = mc_outputs(&result, &r).unwrap();
        let by_name = |n: &str| files.iter().find(|f| f.name == n).unwrap();
        for f in files.iter().filter(|f| f.name.ends_with(".csv")) {
            assert_rectangular(&f.contents);
        }
        let summary: serde_json::Value = serde_json::from_str(&by_name("summary.json").contents).unwrap();
        for key in [
            "theta_dagger",
            "epsilon",
            "d",
            "a_const",
            "b_const",
            "fitted_rate",
            "fitted_rate_log",
            "bound_report",
            "config_digest",
        ] {
            assert!(summary.get(key).is_some(), "{key}");
        }
        assert!(by_name("graph.dot").contents.starts_with("digraph"));
        let copy = ExperimentConfig::from_json(&by_name("config.json").contents).unwrap();
        assert_eq!(copy.resolve().unwrap(), r);
    }

    #[test]
    fn analysis_json_has_documented_keys() {
        let r = resolved(10, 1);
        let (report, fit) = analyze(&r.scenario, r.config.tol, r.config.r_clip).unwrap();
        let files = analyze_outputs(&report, &fit).unwrap();
        let v: serde_json::Value = serde_json::from_str(&files[0].contents).unwrap();
        for key in ["theta_dagger", "epsilon", "d", "a_const", "b_const", "delta_matrix_path"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(files[1].contents.lines().count(), 37);
        assert_rectangular(&files[1].contents);
    }

    #[test]
    fn unwritable_directory_fails_before_writing() {
        let tmp = tempfile::tempdir().unwrap();
        let blocker = tmp.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        let target = blocker.join("out");
        let files = vec![OutputFile::new("a.csv", "t\n".into())];
        assert!(matches!(write_outputs(&target, &files), Err(Error::Output { .. })));

        let ok = tmp.path().join("nested/out");
        let written = write_outputs(&ok, &files).unwrap();
        assert_eq!(written.len(), 1);
        assert_eq!(fs::read_dir(&ok).unwrap().count(), 1);
    }
}
