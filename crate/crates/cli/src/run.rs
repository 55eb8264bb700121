//! Command implementations. Each returns the paths it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rblab::clifford::{build_gateset, GateSet};
use rblab::export::{csv_table, fmt_f64};
use rblab::fit::fit_decay;
use rblab::gauge::{counterexample_epsilon_min, epsilon_min_search, gateset_agsi, gauge_report, wallman_gauge};
use rblab::rb::{estimate_r, run_rb, RbConfig, Spam};
use rblab::theory::{build_l_map, gamma_and_r_gamma, theory_report};
use serde_json::{json, Value};

use crate::config::{Command, ExperimentConfig};

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let files = match cfg.command {
        Command::Simulate => simulate(cfg)?,
        Command::Theory => theory(cfg)?,
        Command::Sweep => sweep(cfg)?,
        Command::GaugeDemo => gauge_demo(cfg)?,
        Command::Counterexample => counterexample(cfg)?,
    };
    let mut written = Vec::new();
    for (name, body) in files {
        let path = out.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}

fn provenance(cfg: &ExperimentConfig) -> Value {
    json!({ "seed": cfg.seed, "config": cfg })
}

/// CSV with the resolved config as leading `#` comment lines.
fn csv_with_header(cfg: &ExperimentConfig, body: String) -> String {
    format!(
        "# rblab {}\n# seed: {}\n# config: {}\n{body}",
        cfg.command,
        cfg.seed,
        serde_json::to_string(cfg).expect("serializable")
    )
}

fn json_with_header(cfg: &ExperimentConfig, mut body: Value) -> String {
    body.as_object_mut().expect("object").insert("provenance".into(), provenance(cfg));
    let mut s = serde_json::to_string_pretty(&body).expect("serializable");
    s.push('\n');
    s
}

fn gateset(cfg: &ExperimentConfig, param: Option<(&str, f64)>) -> Result<GateSet> {
    let model = cfg.error_model.build(param).context("building error model")?;
    Ok(build_gateset(&model)?)
}

fn rb_config(cfg: &ExperimentConfig) -> RbConfig {
    RbConfig {
        lengths: cfg.rb.lengths.clone(),
        k_per_length: cfg.rb.k_per_length,
        seed: cfg.seed,
        repeats: cfg.rb.repeats,
        spam: Spam::ideal(2),
    }
}

type Files = Vec<(&'static str, String)>;

fn simulate(cfg: &ExperimentConfig) -> Result<Files> {
    let gs = gateset(cfg, None)?;
    let rb = rb_config(cfg);
    let data = run_rb(&gs, &rb)?;
    let fit = fit_decay(&data, cfg.rb.fit_model).context("fitting the first repeat")?;
    let mut body = json!({ "fit": fit, "epsilon": gateset_agsi(&gs)? });
    if rb.repeats >= 2 {
        let est = estimate_r(&gs, &rb, cfg.rb.fit_model)?;
        body["repeats"] = json!({
            "count": rb.repeats,
            "failed": est.failed,
            "r_mean": est.r_mean,
            "r_std": est.r_std,
        });
    }
    Ok(vec![("rb_data.csv", csv_with_header(cfg, data.to_csv())), ("fit.json", json_with_header(cfg, body))])
}

fn theory(cfg: &ExperimentConfig) -> Result<Files> {
    let gs = gateset(cfg, None)?;
    let report = theory_report(&gs, &Spam::ideal(2), &cfg.rb.lengths)?;
    let mut body = report.to_json();
    body["epsilon"] = json!(gateset_agsi(&gs)?);
    Ok(vec![("decay.csv", csv_with_header(cfg, report.to_csv())), ("theory.json", json_with_header(cfg, body))])
}

fn sweep(cfg: &ExperimentConfig) -> Result<Files> {
    let spec = cfg.sweep.as_ref().context("missing [sweep] section")?;
    let rb = rb_config(cfg);
    let mut rows = Vec::with_capacity(spec.grid.len());
    for &value in &spec.grid {
        let gs = gateset(cfg, Some((&spec.parameter, value)))?;
        let est = estimate_r(&gs, &rb, cfg.rb.fit_model).with_context(|| format!("{} = {value}", spec.parameter))?;
        let gamma = gamma_and_r_gamma(&build_l_map(&gs, false), gs.dim())
            .with_context(|| format!("{} = {value}", spec.parameter))?;
        rows.push(vec![
            fmt_f64(value),
            fmt_f64(est.r_mean),
            fmt_f64(est.r_std),
            fmt_f64(gamma.r_gamma),
            fmt_f64(gateset_agsi(&gs)?),
        ]);
    }
    let body = csv_table(&[spec.parameter.as_str(), "r_hat", "r_std", "r_gamma", "epsilon"], rows);
    Ok(vec![("sweep.csv", csv_with_header(cfg, body))])
}

fn gauge_demo(cfg: &ExperimentConfig) -> Result<Files> {
    let gs = gateset(cfg, None)?;
    let wallman = wallman_gauge(&gs).context("Wallman gauge")?;
    let search = epsilon_min_search(&gs, cfg.gauge.restarts, cfg.seed)?;
    let best = gauge_report(&gs, &search.m_best, wallman.r_gamma)?;
    let m_rows: Vec<Vec<f64>> = search.m_best.matrix().row_iter().map(|r| r.iter().copied().collect()).collect();
    let body = json!({
        "epsilon": gateset_agsi(&gs)?,
        "wallman": wallman.to_json(),
        "epsilon_min_search": {
            "restarts": cfg.gauge.restarts,
            "epsilon_min": search.epsilon_min,
            "improved": search.improved,
            "min_choi_eigenvalue": search.min_choi_eigenvalue,
            "m_best": m_rows,
            "report": best,
        },
    });
    Ok(vec![("gauge.json", json_with_header(cfg, body))])
}

fn counterexample(cfg: &ExperimentConfig) -> Result<Files> {
    let ce = &cfg.counterexample;
    let sweep = counterexample_epsilon_min(ce.lambda, &ce.alpha_grid)?;
    Ok(vec![("counterexample.csv", csv_with_header(cfg, sweep.to_csv()))])
}
