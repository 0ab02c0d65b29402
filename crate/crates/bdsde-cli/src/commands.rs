//! One function per experiment command, plus the catalog listing.
//!
//! Ladder-style commands (refinement lists, truncation levels, repeated
//! frozen backward paths) fan their independent units out over the rayon
//! pool and reassemble results in index order, so outputs are identical at
//! any thread count.

use rayon::prelude::*;
use serde_json::{json, Value};

use bdsde_core::brownian::{resample_forward, sample_brownian, sample_brownian_coupled};
use bdsde_core::calculus::{cases, evaluate_tanaka_identity, SemimartingaleSpec};
use bdsde_core::catalog::{self, CatalogEntry, XiKind};
use bdsde_core::estimates::{
    cauchy_study_step2, check_lemma31, check_lemma32, convergence_study, uniqueness_probe,
    verify_heavy_tail_moments, EstimateReport,
};
use bdsde_core::generator::{validate_assumptions, SampleCloud};
use bdsde_core::grid::make_grid;
use bdsde_core::solver::{lp_norms, solve_bdsde, Scheme};

use crate::config::{Command, ExperimentConfig, Format};
use crate::error::CliError;
use crate::output::{fmt, OutputDir};

pub fn run(config: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    match config.command {
        Command::VerifyTanaka => verify_tanaka(config, out),
        Command::CheckAssumptions => check_assumptions(config, out),
        Command::Solve => solve(config, out),
        Command::Estimates => estimates(config, out),
        Command::Cauchy => cauchy(config, out),
        Command::Convergence => convergence(config, out),
        Command::Uniqueness => uniqueness(config, out),
    }
}

fn problem(config: &ExperimentConfig) -> Result<CatalogEntry, CliError> {
    let section = config
        .problem
        .as_ref()
        .expect("validated: problem section present");
    let xi = section.xi.map(XiKind::from);
    Ok(catalog::build(&section.name, section.param, xi)?)
}

fn tanaka_case(name: &str) -> Result<(SemimartingaleSpec, usize, usize), CliError> {
    match name {
        "constant" => Ok((cases::constant(vec![0.7, -0.2], 1, 1), 1, 1)),
        "classical_ito" => Ok((cases::classical_ito(), 1, 1)),
        "smooth_2d" => Ok((cases::smooth_2d(), 2, 1)),
        other => Err(CliError::config(format!(
            "unknown tanaka case `{other}`; known: constant, classical_ito, smooth_2d"
        ))),
    }
}

fn verify_tanaka(config: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    let section = config.tanaka.as_ref().expect("validated");
    let (spec, dim_d, dim_l) = tanaka_case(&section.case)?;
    let ladder = config.grid.ladder()?;
    let anchor = *ladder.iter().max().expect("nonempty ladder");
    let mc = &config.monte_carlo;

    let reports = ladder
        .par_iter()
        .map(|&steps| -> Result<_, CliError> {
            let grid = make_grid(config.grid.horizon, steps)?;
            let bundle = sample_brownian_coupled(
                &grid,
                mc.paths,
                dim_d,
                dim_l,
                mc.master_seed,
                anchor,
            )?;
            let report =
                evaluate_tanaka_identity(&spec, &bundle, &grid, config.p, section.epsilon)?;
            Ok((steps, report))
        })
        .collect::<Result<Vec<_>, _>>()?;

    if config.wants(Format::Json) {
        let levels: Vec<Value> = reports
            .iter()
            .map(|(steps, r)| {
                let paths = r.paths() as f64;
                let mean = |v: &[f64]| v.iter().sum::<f64>() / paths;
                json!({
                    "steps": steps,
                    "residual_rms": r.residual_rms,
                    "local_time_flag": r.local_time_flag,
                    "mean_terms": {
                        "lhs": mean(&r.lhs),
                        "initial": mean(&r.initial_term),
                        "drift": mean(&r.drift_term),
                        "backward": mean(&r.backward_term),
                        "forward": mean(&r.forward_term),
                        "g_trace": mean(&r.g_trace_term),
                        "h_trace": mean(&r.h_trace_term),
                    },
                })
            })
            .collect();
        out.write_json(
            "tanaka_report.json",
            json!({
                "case": section.case,
                "p": config.p,
                "epsilon": section.epsilon,
                "paths": mc.paths,
                "levels": levels,
            }),
        )?;
    }
    if config.wants(Format::Csv) {
        let mut rows = Vec::new();
        for (steps, r) in &reports {
            for (path, residual) in r.residual.iter().enumerate() {
                rows.push(vec![steps.to_string(), path.to_string(), fmt(*residual)]);
            }
        }
        out.write_csv("tanaka_residuals.csv", &["steps", "path", "residual"], &rows)?;
    }
    Ok(())
}

fn check_assumptions(config: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    let entry = problem(config)?;
    let section = &config.assumptions;
    let cloud = SampleCloud {
        t_max: config.grid.horizon,
        y_radius: section.y_radius,
        z_radius: section.z_radius,
        count: section.samples,
        seed: config.monte_carlo.master_seed,
        tolerance: section.tolerance,
    };
    let reports = validate_assumptions(&entry.gen, &cloud)?;

    if config.wants(Format::Json) {
        let items: Vec<Value> = reports
            .iter()
            .map(|r| {
                json!({
                    "condition": r.condition.label(),
                    "samples_tested": r.samples_tested,
                    "worst_ratio": r.worst_ratio,
                    "violation_count": r.violation_count,
                    "passed": r.passed,
                })
            })
            .collect();
        out.write_json(
            "assumptions_report.json",
            json!({
                "problem": entry.name,
                "description": entry.description,
                "declared": {
                    "lambda": entry.gen.lambda,
                    "mu": entry.gen.mu,
                    "alpha": entry.gen.alpha,
                },
                "conditions": items,
            }),
        )?;
    }
    if config.wants(Format::Csv) {
        let mut rows = Vec::new();
        for r in &reports {
            for v in &r.violations {
                rows.push(vec![
                    r.condition.label().to_string(),
                    fmt(v.t),
                    fmt(v.y[0]),
                    fmt(v.z[0]),
                    fmt(v.y_alt[0]),
                    fmt(v.z_alt[0]),
                    fmt(v.ratio),
                ]);
            }
        }
        out.write_csv(
            "assumption_violations.csv",
            &["condition", "t", "y", "z", "y_alt", "z_alt", "ratio"],
            &rows,
        )?;
    }
    Ok(())
}

fn solve(config: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    let entry = problem(config)?;
    let steps = config.grid.single_steps()?;
    let grid = make_grid(config.grid.horizon, steps)?;
    let mc = &config.monte_carlo;
    if mc.b_path_count > mc.paths {
        return Err(CliError::config(
            "`monte_carlo.b_path_count` cannot exceed `monte_carlo.paths`".into(),
        ));
    }
    let bundle = sample_brownian(
        &grid,
        mc.paths,
        entry.gen.dim_d,
        entry.gen.dim_l,
        mc.master_seed,
    )?;

    let solutions = (0..mc.b_path_count)
        .into_par_iter()
        .map(|b| -> Result<_, CliError> {
            let cfg = config.solver.to_solver_config(mc, b);
            Ok(solve_bdsde(&entry.gen, &grid, &bundle, &cfg)?)
        })
        .collect::<Result<Vec<_>, _>>()?;

    if config.wants(Format::Json) {
        let per_b: Vec<Value> = solutions
            .iter()
            .map(|sol| {
                let norms = lp_norms(sol, config.p).expect("p validated positive");
                json!({
                    "frozen_b_index": sol.frozen_b_index(),
                    "y0": sol.diagnostics.y0,
                    "y0_stderr": sol.diagnostics.y0_stderr,
                    "s_p": norms.s_p,
                    "m_p": norms.m_p,
                    "max_condition_estimate": sol
                        .diagnostics
                        .cond_numbers
                        .iter()
                        .cloned()
                        .fold(0.0f64, f64::max),
                    "max_picard_iters": sol.diagnostics.picard_iters.iter().max(),
                })
            })
            .collect();
        let y0_mean = solutions
            .iter()
            .map(|s| s.diagnostics.y0[0])
            .sum::<f64>()
            / solutions.len() as f64;
        out.write_json(
            "solution_summary.json",
            json!({
                "problem": entry.name,
                "steps": steps,
                "paths": mc.paths,
                "p": config.p,
                "y0_mean_over_b": y0_mean,
                "runs": per_b,
            }),
        )?;
    }
    if config.wants(Format::Csv) {
        let sol = &solutions[0];
        let k = sol.dim_k();
        let d = entry.gen.dim_d;
        let mut header: Vec<String> = vec!["path".into(), "step".into(), "t".into()];
        for a in 0..k {
            header.push(format!("y{a}"));
        }
        for a in 0..k {
            for c in 0..d {
                header.push(format!("z{a}{c}"));
            }
        }
        let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let mut rows = Vec::new();
        for m in 0..sol.paths() {
            for i in 0..=steps {
                let mut row = vec![m.to_string(), i.to_string(), fmt(grid.node(i))];
                for v in sol.y().at(m, i) {
                    row.push(fmt(*v));
                }
                if i < steps {
                    for v in sol.z().at(m, i) {
                        row.push(fmt(*v));
                    }
                } else {
                    for _ in 0..k * d {
                        row.push(String::new());
                    }
                }
                rows.push(row);
            }
        }
        out.write_csv("solution.csv", &header_refs, &rows)?;
    }
    if config.dump_paths {
        dump_driver(out, "w_paths.csv", bundle.w(), steps)?;
        dump_driver(out, "b_paths.csv", bundle.b(), steps)?;
    }
    Ok(())
}

/// Debug dump of one driver: row = path, columns = time nodes (coordinates
/// interleaved per node for multi-dimensional drivers).
fn dump_driver(
    out: &OutputDir,
    name: &str,
    nodes: &bdsde_core::PathArray,
    steps: usize,
) -> Result<(), CliError> {
    let dim = nodes.width();
    let mut header: Vec<String> = vec!["path".into()];
    for i in 0..=steps {
        for c in 0..dim {
            header.push(if dim == 1 {
                format!("t{i}")
            } else {
                format!("t{i}_c{c}")
            });
        }
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut rows = Vec::new();
    for m in 0..nodes.paths() {
        let mut row = vec![m.to_string()];
        for i in 0..=steps {
            for v in nodes.at(m, i) {
                row.push(fmt(*v));
            }
        }
        rows.push(row);
    }
    out.write_csv(name, &header_refs, &rows)?;
    Ok(())
}

fn estimate_row(problem: &str, steps: usize, b: usize, r: &EstimateReport) -> Vec<String> {
    let lemma = match r.lemma {
        bdsde_core::estimates::LemmaId::L31 => "L31",
        bdsde_core::estimates::LemmaId::L32 => "L32",
        bdsde_core::estimates::LemmaId::C22 => "C22",
    };
    vec![
        problem.to_string(),
        steps.to_string(),
        b.to_string(),
        lemma.to_string(),
        fmt(r.lhs),
        fmt(r.supy_term),
        fmt(r.xi_term),
        fmt(r.f0_term),
        fmt(r.g0_term),
        fmt(r.mixed_g0_term),
        fmt(r.ratio),
        fmt(r.mc_stderr),
    ]
}

fn estimates(config: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    let entry = problem(config)?;
    let ladder = config.grid.ladder()?;
    let anchor = *ladder.iter().max().expect("nonempty");
    let mc = &config.monte_carlo;

    let units: Vec<(usize, usize)> = ladder
        .iter()
        .flat_map(|&n| (0..mc.b_path_count).map(move |b| (n, b)))
        .collect();
    let results = units
        .par_iter()
        .map(|&(steps, b)| -> Result<_, CliError> {
            let grid = make_grid(config.grid.horizon, steps)?;
            let bundle = sample_brownian_coupled(
                &grid,
                mc.paths,
                entry.gen.dim_d,
                entry.gen.dim_l,
                mc.master_seed,
                anchor,
            )?;
            let cfg = config.solver.to_solver_config(mc, b);
            let sol = solve_bdsde(&entry.gen, &grid, &bundle, &cfg)?;
            let l31 = check_lemma31(&sol, &entry.gen, &bundle, config.p)?;
            let l32 = check_lemma32(&sol, &entry.gen, &bundle, config.p)?;
            Ok((steps, b, l31, l32))
        })
        .collect::<Result<Vec<_>, _>>()?;

    if config.wants(Format::Json) {
        let items: Vec<Value> = results
            .iter()
            .map(|(steps, b, l31, l32)| {
                let to_json = |r: &EstimateReport| {
                    json!({
                        "lhs": r.lhs,
                        "supy_term": r.supy_term,
                        "xi_term": r.xi_term,
                        "f0_term": r.f0_term,
                        "g0_term": r.g0_term,
                        "mixed_g0_term": r.mixed_g0_term,
                        "ratio": r.ratio,
                        "mc_stderr": r.mc_stderr,
                    })
                };
                json!({
                    "steps": steps,
                    "frozen_b_index": b,
                    "lemma31": to_json(l31),
                    "lemma32": to_json(l32),
                })
            })
            .collect();
        out.write_json(
            "estimates_report.json",
            json!({
                "problem": entry.name,
                "p": config.p,
                "paths": mc.paths,
                "runs": items,
            }),
        )?;
    }
    if config.wants(Format::Csv) {
        let mut rows = Vec::new();
        for (steps, b, l31, l32) in &results {
            rows.push(estimate_row(&entry.name, *steps, *b, l31));
            rows.push(estimate_row(&entry.name, *steps, *b, l32));
        }
        out.write_csv(
            "estimates.csv",
            &[
                "problem",
                "steps",
                "b_index",
                "lemma",
                "lhs",
                "supy_term",
                "xi_term",
                "f0_term",
                "g0_term",
                "mixed_g0_term",
                "ratio",
                "mc_stderr",
            ],
            &rows,
        )?;
    }
    Ok(())
}

fn cauchy(config: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    let entry = problem(config)?;
    let section = config.cauchy.as_ref().expect("validated");
    let steps = config.grid.single_steps()?;
    let grid = make_grid(config.grid.horizon, steps)?;
    let mc = &config.monte_carlo;

    // Pre-verify the moment conditions when the terminal condition is the
    // heavy-tail family: the study targets p-integrable data that is not
    // square-integrable.
    let problem_section = config.problem.as_ref().expect("validated");
    let beta = match problem_section.xi {
        Some(crate::config::XiConfig::HeavyTail { beta }) => Some(beta),
        None if problem_section.name == "heavy_tail_xi" => {
            Some(problem_section.param.unwrap_or(0.6))
        }
        _ => None,
    };
    let moment_check = if let Some(beta) = beta {
        let check = verify_heavy_tail_moments(beta, config.p, config.grid.horizon)?;
        if !check.p_moment_finite {
            return Err(CliError::Numerical(format!(
                "moment oracle: E|xi|^p diverges for beta = {beta}, p = {}",
                config.p
            )));
        }
        if check.square_moment_finite {
            return Err(CliError::Numerical(format!(
                "moment oracle: E|xi|^2 is finite for beta = {beta}; the study needs \
                 square-non-integrable data"
            )));
        }
        Some(check)
    } else {
        None
    };

    let bundle = sample_brownian(
        &grid,
        mc.paths,
        entry.gen.dim_d,
        entry.gen.dim_l,
        mc.master_seed,
    )?;
    let cfg = config.solver.to_solver_config(mc, 0);
    let study = cauchy_study_step2(&entry.gen, &grid, &bundle, &section.n_values, config.p, &cfg)
        .map_err(|e: bdsde_core::Error| CliError::Numerical(e.to_string()))?;

    if config.wants(Format::Json) {
        let pairs: Vec<Value> = (0..study.sp_distances.len())
            .map(|j| {
                json!({
                    "n_low": study.n_values[j],
                    "n_high": study.n_values[j + 1],
                    "sp_distance": study.sp_distances[j],
                    "sp_stderr": study.sp_stderrs[j],
                    "mp_distance": study.mp_distances[j],
                    "mp_stderr": study.mp_stderrs[j],
                })
            })
            .collect();
        out.write_json(
            "cauchy_report.json",
            json!({
                "problem": entry.name,
                "p": config.p,
                "n_values": study.n_values,
                "moment_oracle": moment_check.map(|c| json!({
                    "p_moment_finite": c.p_moment_finite,
                    "square_moment_finite": c.square_moment_finite,
                    "p_diff_ratio": c.p_diff_ratio,
                    "square_diff_ratio": c.square_diff_ratio,
                })),
                "consecutive_distances": pairs,
            }),
        )?;
    }
    if config.wants(Format::Csv) {
        let rows: Vec<Vec<String>> = (0..study.sp_distances.len())
            .map(|j| {
                vec![
                    study.n_values[j].to_string(),
                    study.n_values[j + 1].to_string(),
                    fmt(study.sp_distances[j]),
                    fmt(study.sp_stderrs[j]),
                    fmt(study.mp_distances[j]),
                    fmt(study.mp_stderrs[j]),
                ]
            })
            .collect();
        out.write_csv(
            "cauchy.csv",
            &["n_low", "n_high", "sp_distance", "sp_stderr", "mp_distance", "mp_stderr"],
            &rows,
        )?;
    }
    Ok(())
}

fn convergence(config: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    let entry = problem(config)?;
    let closed = entry.closed_form.ok_or_else(|| {
        CliError::config(format!(
            "problem `{}` has no registered closed form",
            entry.name
        ))
    })?;
    let ladder = config.grid.ladder()?;
    let mc = &config.monte_carlo;
    let cfg = config.solver.to_solver_config(mc, 0);
    let table = convergence_study(
        &entry.gen,
        closed,
        config.grid.horizon,
        &ladder,
        mc.paths,
        mc.master_seed,
        &cfg,
    )?;

    if config.wants(Format::Json) {
        let rows: Vec<Value> = table
            .rows
            .iter()
            .map(|r| {
                json!({
                    "steps": r.steps,
                    "error": r.error,
                    "empirical_rate": r.empirical_rate,
                })
            })
            .collect();
        out.write_json(
            "convergence_report.json",
            json!({
                "problem": entry.name,
                "paths": mc.paths,
                "rows": rows,
            }),
        )?;
    }
    if config.wants(Format::Csv) {
        let rows: Vec<Vec<String>> = table
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.steps.to_string(),
                    fmt(r.error),
                    r.empirical_rate.map(fmt).unwrap_or_default(),
                ]
            })
            .collect();
        out.write_csv("convergence.csv", &["steps", "error", "empirical_rate"], &rows)?;
    }
    Ok(())
}

fn uniqueness(config: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    let entry = problem(config)?;
    let steps = config.grid.single_steps()?;
    let grid = make_grid(config.grid.horizon, steps)?;
    let mc = &config.monte_carlo;
    let bundle = sample_brownian(
        &grid,
        mc.paths,
        entry.gen.dim_d,
        entry.gen.dim_l,
        mc.master_seed,
    )?;

    // variant (a): the two schemes on the same ensemble
    let cfg_a = config.solver.to_solver_config(mc, 0);
    let mut cfg_b = cfg_a.clone();
    cfg_b.scheme = match cfg_a.scheme {
        Scheme::Explicit => Scheme::ImplicitPicard,
        Scheme::ImplicitPicard => Scheme::Explicit,
    };
    let scheme_probe = uniqueness_probe(&entry.gen, &grid, &bundle, &bundle, &cfg_a, &cfg_b)?;

    // variant (b): independent regression ensemble (fresh forward driver,
    // same frozen backward path), same scheme
    let bundle_alt = resample_forward(&bundle, &grid, mc.master_seed.wrapping_add(1))?;
    let seed_probe = uniqueness_probe(&entry.gen, &grid, &bundle, &bundle_alt, &cfg_a, &cfg_a)?;

    if config.wants(Format::Json) {
        let to_json = |label: &str, r: &bdsde_core::estimates::UniquenessReport| {
            json!({
                "variant": label,
                "y0_a": r.y0_a,
                "y0_b": r.y0_b,
                "y0_gap": r.y0_gap,
                "combined_stderr": r.stderr,
            })
        };
        out.write_json(
            "uniqueness_report.json",
            json!({
                "problem": entry.name,
                "steps": steps,
                "paths": mc.paths,
                "probes": [
                    to_json("scheme", &scheme_probe),
                    to_json("seed", &seed_probe),
                ],
            }),
        )?;
    }
    if config.wants(Format::Csv) {
        let rows = vec![
            vec![
                "scheme".to_string(),
                fmt(scheme_probe.y0_a),
                fmt(scheme_probe.y0_b),
                fmt(scheme_probe.y0_gap),
                fmt(scheme_probe.stderr),
            ],
            vec![
                "seed".to_string(),
                fmt(seed_probe.y0_a),
                fmt(seed_probe.y0_b),
                fmt(seed_probe.y0_gap),
                fmt(seed_probe.stderr),
            ],
        ];
        out.write_csv(
            "uniqueness.csv",
            &["variant", "y0_a", "y0_b", "y0_gap", "combined_stderr"],
            &rows,
        )?;
    }
    Ok(())
}

/// One line per catalog entry: name, dimensions, validated assumption
/// profile (from a quick sampling run) and closed-form availability.
pub fn list_catalog() -> Result<String, CliError> {
    let cloud = SampleCloud {
        count: 2000,
        seed: 0xC0FFEE,
        ..SampleCloud::default()
    };
    let mut lines = Vec::new();
    for entry in catalog::all_default() {
        let reports = validate_assumptions(&entry.gen, &cloud)?;
        let mut marks = Vec::new();
        for r in &reports {
            let label = r.condition.label();
            let mark = if r.passed {
                match r.condition {
                    bdsde_core::generator::Condition::H2i => {
                        format!("{label} ok (lambda={})", entry.gen.lambda)
                    }
                    bdsde_core::generator::Condition::H2ii => {
                        format!("{label} ok (mu={})", entry.gen.mu)
                    }
                    bdsde_core::generator::Condition::H2iii => {
                        format!("{label} ok (alpha={})", entry.gen.alpha)
                    }
                    _ => format!("{label} ok"),
                }
            } else {
                format!("{label} VIOLATED")
            };
            marks.push(mark);
        }
        lines.push(format!(
            "{:<16} k={} d={} l={}  closed-form={}  {}  | {}",
            entry.name,
            entry.gen.dim_k,
            entry.gen.dim_d,
            entry.gen.dim_l,
            if entry.closed_form.is_some() { "yes" } else { "no" },
            marks.join("  "),
            entry.description,
        ));
    }
    Ok(lines.join("\n"))
}

