use compandor::report::{self, TABLE_LEVELS};
use compandor::{
    monte_carlo_sqnr, Codebook, Design, DesignConfig, DistortionReport, ModelDump, ModelKind,
    MonteCarloReport,
};
use serde::Serialize;

use crate::args::{DesignArgs, FigureArgs, Format, MonteCarloArgs, SweepArgs, TablesArgs};
use crate::error::CliError;
use crate::output::{format_exact, format_sig, timestamp, to_json, Outputs, RunManifest, Table};
use crate::settings::{FileSettings, DEFAULT_LEVELS, DEFAULT_SAMPLES, DEFAULT_SEED};

const REPORT_COLUMNS: [&str; 6] = [
    "d_g",
    "d_o_exact",
    "d_o_closed",
    "d_total",
    "sqnr_db",
    "sqnr_db_closed_overload",
];

fn report_fields(r: &DistortionReport) -> Vec<String> {
    [
        r.d_g,
        r.d_o_exact,
        r.d_o_closed,
        r.d_total,
        r.sqnr_db,
        r.sqnr_db_closed_overload,
    ]
    .into_iter()
    .map(format_exact)
    .collect()
}

#[derive(Serialize)]
struct DesignOutput<'a> {
    config: &'a DesignConfig,
    report: &'a DistortionReport,
    model: ModelDump,
    codebook: &'a Codebook,
}

pub fn design(args: &DesignArgs, file: &FileSettings) -> Result<(), CliError> {
    let config = file.design_config(&args.design)?;
    let format = file.format(args.format, Format::Json)?;
    let design = Design::build(config)?;
    let report = design.distortion()?;

    let bytes = match format {
        Format::Json => to_json(&DesignOutput {
            config: &config,
            report: &report,
            model: design.model_dump(),
            codebook: &design.codebook,
        })?,
        Format::Csv => {
            let mut header = vec![
                "levels", "model", "sigma", "segments", "x_max", "y_max", "step",
            ];
            header.extend(REPORT_COLUMNS);
            let mut t = Table::new(&header);
            let cb = &design.codebook;
            let mut row = vec![
                config.levels.to_string(),
                config.model.to_string(),
                format_exact(config.sigma),
                config.segments.to_string(),
                format_exact(cb.x_max),
                format_exact(cb.y_max),
                format_exact(cb.step),
            ];
            row.extend(report_fields(&report));
            t.push(row);
            t.to_csv()?
        }
    };

    let mut outputs = Outputs::default();
    outputs.emit(args.out.as_deref(), &bytes)?;
    if let Some(p) = &args.dump_model {
        outputs.emit(Some(p), &to_json(&design.model_dump())?)?;
    }
    if let Some(p) = &args.dump_codebook {
        outputs.emit(Some(p), &to_json(&design.codebook)?)?;
    }
    let manifest_anchor = args
        .out
        .as_deref()
        .or(outputs.written().first().map(|p| p.as_path()));
    RunManifest::new("design", Some(config), &outputs).write_beside(manifest_anchor)
}

fn sig(values: &[f64]) -> Vec<String> {
    values.iter().copied().map(format_sig).collect()
}

fn sign(v: f64) -> String {
    if v < 0.0 { "-" } else { "+" }.to_string()
}

pub fn tables_data(which: u8) -> Result<Table, CliError> {
    Ok(match which {
        1 => {
            let mut t = Table::new(&["levels", "x1", "x2", "c_x1", "c_x2", "m1", "m2"]);
            for r in report::linear_spline_table(&TABLE_LEVELS)? {
                let mut row = vec![r.levels.to_string()];
                row.extend(sig(&[r.x1, r.x_max, r.c_x1, r.c_x2, r.m1, r.m2]));
                t.push(row);
            }
            t
        }
        2 => {
            let names = ["a1", "b1", "d1", "a2", "b2", "d2"];
            let mut header = vec!["levels".to_string(), "x1".into(), "x2".into()];
            header.extend(names.iter().map(|n| n.to_string()));
            header.extend(names.iter().map(|n| format!("abs_{n}")));
            header.extend(names.iter().map(|n| format!("sign_{n}")));
            let mut t = Table {
                header,
                rows: Vec::new(),
            };
            for r in report::quadratic_spline_table(&TABLE_LEVELS)? {
                let c = r.coefficients();
                let mut row = vec![r.levels.to_string()];
                row.extend(sig(&[r.x1, r.x_max]));
                row.extend(sig(&c));
                row.extend(c.iter().map(|v| format_sig(v.abs())));
                row.extend(c.iter().map(|&v| sign(v)));
                t.push(row);
            }
            t
        }
        3 => {
            let mut t = Table::new(&[
                "levels",
                "sqnr_fds_db",
                "sqnr_qs_db",
                "sqnr_oc_db",
                "sqnr_fds_closed_overload_db",
                "sqnr_qs_closed_overload_db",
                "sqnr_oc_closed_overload_db",
                "sqnr_rs_db_published_reference",
            ]);
            for &n in &TABLE_LEVELS {
                let reports = ModelKind::ALL
                    .iter()
                    .map(|&k| Design::build(DesignConfig::new(n, k))?.distortion())
                    .collect::<compandor::Result<Vec<_>>>()?;
                let mut row = vec![n.to_string()];
                row.extend(reports.iter().map(|r| format_sig(r.sqnr_db)));
                row.extend(
                    reports
                        .iter()
                        .map(|r| format_sig(r.sqnr_db_closed_overload)),
                );
                row.push(
                    report::reference_sqnr_db(n)
                        .map(format_sig)
                        .unwrap_or_default(),
                );
                t.push(row);
            }
            t
        }
        other => return Err(CliError::Usage(format!("no table {other}"))),
    })
}

/// JSON form of a table: one object per row, keyed by header.
fn table_json(t: &Table) -> Result<Vec<u8>, CliError> {
    let rows: Vec<serde_json::Map<String, serde_json::Value>> = t
        .rows
        .iter()
        .map(|r| {
            t.header
                .iter()
                .zip(r)
                .map(|(h, v)| {
                    let value = v
                        .parse::<f64>()
                        .ok()
                        .and_then(serde_json::Number::from_f64)
                        .map(serde_json::Value::Number)
                        .unwrap_or_else(|| serde_json::Value::String(v.clone()));
                    (h.clone(), value)
                })
                .collect()
        })
        .collect();
    to_json(&serde_json::json!({ "rows": rows }))
}

pub fn tables(args: &TablesArgs, file: &FileSettings) -> Result<(), CliError> {
    let format = file.format(args.format, Format::Csv)?;
    let t = tables_data(args.which)?;
    let bytes = match format {
        Format::Csv => t.to_csv()?,
        Format::Json => table_json(&t)?,
    };
    let mut outputs = Outputs::default();
    outputs.emit(args.out.as_deref(), &bytes)?;
    RunManifest::new(&format!("tables {}", args.which), None, &outputs)
        .write_beside(args.out.as_deref())
}

pub fn figure_data(which: u8, levels: usize, samples: usize) -> Result<Table, CliError> {
    Ok(match which {
        1 => {
            let mut t = Table::new(&["x", "c", "g_s1", "g_s2"]);
            for r in report::compressor_curves(levels, samples)? {
                t.push(sig(&r));
            }
            t
        }
        2 => {
            let mut t = Table::new(&["bits", "sqnr_fds_db", "sqnr_qs_db", "sqnr_oc_db"]);
            for r in report::sqnr_vs_bits(&TABLE_LEVELS)? {
                t.push(sig(&r));
            }
            t
        }
        other => return Err(CliError::Usage(format!("no figure {other}"))),
    })
}

pub fn figure(args: &FigureArgs, file: &FileSettings) -> Result<(), CliError> {
    let levels = file.pick(args.levels, "levels", DEFAULT_LEVELS)?;
    let t = figure_data(args.which, levels, args.samples)?;
    let mut outputs = Outputs::default();
    outputs.emit(args.out.as_deref(), &t.to_csv()?)?;
    RunManifest::new(&format!("figure {}", args.which), None, &outputs)
        .write_beside(args.out.as_deref())
}

#[derive(Serialize)]
struct MonteCarloOutput<'a> {
    config: &'a DesignConfig,
    analytic: &'a DistortionReport,
    monte_carlo: &'a MonteCarloReport,
    difference_db: f64,
    timestamp: String,
}

pub fn montecarlo(args: &MonteCarloArgs, file: &FileSettings) -> Result<(), CliError> {
    let config = file.design_config(&args.design)?;
    let samples = file.pick(args.samples, "samples", DEFAULT_SAMPLES)?;
    let seed = file.pick(args.seed, "seed", DEFAULT_SEED)?;
    let shards = file.pick(args.shards, "shards", 1)?;
    let design = Design::build(config)?;
    let analytic = design.distortion()?;
    let mc = monte_carlo_sqnr(&design, samples, seed, shards)?;
    let out = MonteCarloOutput {
        config: &config,
        analytic: &analytic,
        monte_carlo: &mc,
        difference_db: mc.empirical_sqnr_db - analytic.sqnr_db,
        timestamp: timestamp(),
    };
    let mut outputs = Outputs::default();
    outputs.emit(args.out.as_deref(), &to_json(&out)?)?;
    RunManifest::new("montecarlo", Some(config), &outputs).write_beside(args.out.as_deref())
}

#[derive(Serialize)]
struct SweepJsonRow {
    levels: usize,
    model: ModelKind,
    sigma: f64,
    x_max: Option<f64>,
    report: Option<DistortionReport>,
    error: Option<String>,
}

pub fn sweep(args: &SweepArgs, file: &FileSettings) -> Result<(), CliError> {
    let levels = if args.levels.is_empty() {
        match file.get::<usize>("levels")? {
            Some(n) => vec![n],
            None => TABLE_LEVELS.to_vec(),
        }
    } else {
        args.levels.clone()
    };
    let models = match &args.models {
        Some(m) => m.clone(),
        None => match file.get::<ModelKind>("model")? {
            Some(m) => vec![m],
            None => ModelKind::ALL.to_vec(),
        },
    };
    if models.is_empty() {
        return Err(CliError::Usage("sweep needs at least one model".into()));
    }
    let sigma = file.pick(args.sigma, "sigma", 1.0)?;
    let format = file.format(args.format, Format::Csv)?;

    let result = report::sweep(&levels, &models, sigma)?;
    for n in &result.duplicates {
        eprintln!("warning: duplicate level count {n} ignored");
    }

    let bytes = match format {
        Format::Csv => {
            let mut header = vec!["levels", "model", "sigma", "status", "x_max"];
            header.extend(REPORT_COLUMNS);
            header.push("error");
            let mut t = Table::new(&header);
            for r in &result.rows {
                let mut row = vec![
                    r.levels.to_string(),
                    r.model.to_string(),
                    format_exact(r.sigma),
                ];
                match &r.outcome {
                    Ok((x_max, rep)) => {
                        row.push("ok".into());
                        row.push(format_exact(*x_max));
                        row.extend(report_fields(rep));
                        row.push(String::new());
                    }
                    Err(e) => {
                        row.push("failed".into());
                        row.extend(std::iter::repeat_n(String::new(), 1 + REPORT_COLUMNS.len()));
                        row.push(e.to_string());
                    }
                }
                t.push(row);
            }
            t.to_csv()?
        }
        Format::Json => {
            let rows: Vec<SweepJsonRow> = result
                .rows
                .iter()
                .map(|r| {
                    let (x_max, report, error) = match &r.outcome {
                        Ok((x, rep)) => (Some(*x), Some(*rep), None),
                        Err(e) => (None, None, Some(e.to_string())),
                    };
                    SweepJsonRow {
                        levels: r.levels,
                        model: r.model,
                        sigma: r.sigma,
                        x_max,
                        report,
                        error,
                    }
                })
                .collect();
            to_json(&serde_json::json!({ "rows": rows, "duplicates": result.duplicates }))?
        }
    };
    let mut outputs = Outputs::default();
    outputs.emit(args.out.as_deref(), &bytes)?;
    RunManifest::new("sweep", None, &outputs).write_beside(args.out.as_deref())?;

    let failed = result.failures();
    if failed > 0 {
        return Err(CliError::PartialFailure {
            failed,
            total: result.rows.len(),
        });
    }
    Ok(())
}
