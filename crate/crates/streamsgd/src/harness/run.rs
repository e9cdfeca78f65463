//! Executes a resolved [`RunConfig`] and writes its CSV, SVG and manifest files.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::bandit::{check_region_lemmas, conic_margin, run_bandit, BanditOptions};
use crate::datagen::ProblemSpec;
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentKind, RunConfig, Variant, VerifyOptions};
use crate::harness::svg::{emit_svg, Axes, Series};
use crate::inference::{coverage_experiment, unwhiten, whiten_and_test};
use crate::numerics::{inv_sqrt_psd, sym_eigendecompose, Mat, Rng, Stream, DEFAULT_FLOOR};
use crate::par::{replicate, with_jobs};
use crate::record::mean_std;
use crate::sgd_dense::{run_dense, DenseRun};
use crate::sgd_sparse::{run_sparse, SparseRun};

/// Files written by a run plus a short human-readable report.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
    /// False when a verify check failed.
    pub ok: bool,
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn slug(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect();
    let s = s.trim_matches('_').to_string();
    if s.is_empty() {
        "variant".into()
    } else {
        s
    }
}

struct Writer<'a> {
    root: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn csv(&mut self, rel: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        self.files.push(path);
        Ok(())
    }

    fn text(&mut self, rel: &str, body: &str) -> Result<()> {
        let path = self.root.join(rel);
        fs::write(&path, body)?;
        self.files.push(path);
        Ok(())
    }
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

/// Runs the experiment inside a pool of `cfg.jobs` workers.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    fs::create_dir_all(&cfg.out)?;
    let mut w = Writer {
        root: &cfg.out,
        files: Vec::new(),
    };
    let (mut lines, ok) = with_jobs(cfg.jobs, || match cfg.kind {
        ExperimentKind::Regress => run_regress(cfg, &mut w).map(|l| (l, true)),
        ExperimentKind::Sparse => run_sparse_kind(cfg, &mut w).map(|l| (l, true)),
        ExperimentKind::Bandit => run_bandit_kind(cfg, &mut w).map(|l| (l, true)),
        ExperimentKind::Infer => run_infer(cfg, &mut w).map(|l| (l, true)),
        ExperimentKind::Verify => run_verify(cfg, &mut w),
    })?;
    w.text("manifest.toml", &cfg.manifest()?)?;
    lines.push(format!(
        "wrote {} files to {}",
        w.files.len(),
        cfg.out.display()
    ));
    Ok(RunSummary {
        files: w.files,
        lines,
        ok,
    })
}

fn grid(cfg: &RunConfig) -> BTreeSet<u64> {
    cfg.log.points(cfg.horizon).into_iter().collect()
}

fn plot(w: &mut Writer<'_>, series: Vec<Series>, mut axes: Axes) -> Result<()> {
    let positive = series.iter().all(|s| s.points.iter().all(|p| p.1 > 0.0));
    axes.y_log &= positive;
    w.text("plot.svg", &emit_svg(&series, &axes)?)
}

fn run_regress(cfg: &RunConfig, w: &mut Writer<'_>) -> Result<Vec<String>> {
    let mut agg = Vec::new();
    let mut series = Vec::new();
    let mut lines = Vec::new();
    for v in &cfg.variants {
        let runs: Vec<Result<DenseRun>> = replicate(cfg.replications, |r| {
            let mut stream = v.streams.build(&v.spec, cfg.seed, r as u64)?;
            run_dense(&v.spec, &mut stream, &v.schedule, cfg.horizon, &cfg.log)
        });
        let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
        let keep = cfg.horizon > 0;
        for (r, run) in runs.iter().enumerate() {
            let rows: Vec<Vec<String>> = run
                .points
                .iter()
                .filter(|_| keep)
                .map(|p| vec![p.t.to_string(), num(p.err_sq), p.phase.as_str().to_string()])
                .collect();
            w.csv(
                &format!("{}/rep_{r:03}.csv", slug(&v.label)),
                &header(&["t", "err_sq", "phase"]),
                &rows,
            )?;
        }
        let series_in: Vec<Vec<f64>> = runs
            .iter()
            .map(|r| r.errors().iter().map(|p| p.1).collect())
            .collect();
        let (mean, std) = mean_std(&series_in);
        let ts: Vec<u64> = runs[0].points.iter().map(|p| p.t).collect();
        if keep {
            for (k, &t) in ts.iter().enumerate() {
                agg.push(vec![
                    v.label.clone(),
                    t.to_string(),
                    num(mean[k]),
                    num(std[k]),
                ]);
            }
        }
        series.push(Series {
            label: v.label.clone(),
            points: ts
                .iter()
                .zip(&mean)
                .filter(|(t, _)| **t > 0)
                .map(|(t, m)| (*t as f64, *m))
                .collect(),
        });
        lines.push(format!(
            "{}: mean final err_sq = {}",
            v.label,
            mean.last().copied().unwrap_or(f64::NAN)
        ));
    }
    w.csv(
        "aggregate.csv",
        &header(&["variant", "t", "err_sq_mean", "err_sq_std"]),
        &agg,
    )?;
    if cfg.plot && cfg.horizon > 0 {
        plot(
            w,
            series,
            Axes {
                title: "estimation error".into(),
                x_label: "t".into(),
                y_label: "||beta_t - beta*||^2".into(),
                x_log: true,
                y_log: true,
            },
        )?;
    }
    Ok(lines)
}

fn is_recovered(run: &SparseRun, spec: &ProblemSpec) -> bool {
    match (&run.support, &spec.support) {
        (Some(s), Some(truth)) => s.is_superset_of(truth),
        _ => false,
    }
}

fn run_sparse_kind(cfg: &RunConfig, w: &mut Writer<'_>) -> Result<Vec<String>> {
    let on_grid = grid(cfg);
    let keep = cfg.horizon > 0;
    let mut agg = Vec::new();
    let mut summary = Vec::new();
    let mut series = Vec::new();
    let mut lines = Vec::new();
    for v in &cfg.variants {
        let runs: Vec<Result<SparseRun>> = replicate(cfg.replications, |r| {
            let mut stream = v.streams.build(&v.spec, cfg.seed, r as u64)?;
            run_sparse(
                &v.spec,
                &mut stream,
                &v.schedule,
                &v.sparse,
                cfg.horizon,
                &cfg.log,
            )
        });
        let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
        let dense = v.sparse.compare_dense;
        let mut cols = vec!["t", "err_sq", "err_sq_on_support", "support_size", "event"];
        if dense {
            cols.push("dense_err_sq");
        }
        for (r, run) in runs.iter().enumerate() {
            let rows: Vec<Vec<String>> = run
                .points
                .iter()
                .enumerate()
                .filter(|_| keep)
                .map(|(k, p)| {
                    let mut row = vec![
                        p.t.to_string(),
                        num(p.err_sq),
                        num(p.err_sq_on_support),
                        p.support_size.to_string(),
                        p.event.map(|i| (i + 1).to_string()).unwrap_or_default(),
                    ];
                    if let Some(d) = &run.dense {
                        row.push(num(d[k].err_sq));
                    }
                    row
                })
                .collect();
            w.csv(
                &format!("{}/rep_{r:03}.csv", slug(&v.label)),
                &header(&cols),
                &rows,
            )?;
            summary.push(vec![
                v.label.clone(),
                r.to_string(),
                num(run.final_error()),
                run.final_dense_error().map(num).unwrap_or_default(),
                is_recovered(run, &v.spec).to_string(),
                run.events.len().to_string(),
            ]);
        }
        let pick = |f: &dyn Fn(&SparseRun, usize) -> f64| -> Vec<Vec<f64>> {
            runs.iter()
                .map(|run| {
                    run.points
                        .iter()
                        .enumerate()
                        .filter(|(_, p)| on_grid.contains(&p.t))
                        .map(|(k, _)| f(run, k))
                        .collect()
                })
                .collect()
        };
        let (mean, std) = mean_std(&pick(&|r, k| r.points[k].err_sq));
        let (size, _) = mean_std(&pick(&|r, k| r.points[k].support_size as f64));
        let dense_mean = dense.then(|| {
            mean_std(&pick(&|r, k| {
                r.dense.as_ref().map_or(f64::NAN, |d| d[k].err_sq)
            }))
            .0
        });
        let ts: Vec<u64> = runs[0]
            .points
            .iter()
            .map(|p| p.t)
            .filter(|t| on_grid.contains(t))
            .collect();
        if keep {
            for (k, &t) in ts.iter().enumerate() {
                agg.push(vec![
                    v.label.clone(),
                    t.to_string(),
                    num(mean[k]),
                    num(std[k]),
                    dense_mean.as_ref().map(|d| num(d[k])).unwrap_or_default(),
                    num(size[k]),
                ]);
            }
        }
        let pts = |m: &[f64]| -> Vec<(f64, f64)> {
            ts.iter()
                .zip(m)
                .filter(|(t, _)| **t > 0)
                .map(|(t, e)| (*t as f64, *e))
                .collect()
        };
        series.push(Series {
            label: format!("{} sparse", v.label),
            points: pts(&mean),
        });
        if let Some(d) = &dense_mean {
            series.push(Series {
                label: format!("{} dense", v.label),
                points: pts(d),
            });
        }
        let recovered = runs.iter().filter(|r| is_recovered(r, &v.spec)).count();
        lines.push(format!(
            "{}: support recovered in {recovered}/{} replications, mean final err_sq = {}",
            v.label,
            runs.len(),
            mean.last().copied().unwrap_or(f64::NAN)
        ));
    }
    w.csv(
        "aggregate.csv",
        &header(&[
            "variant",
            "t",
            "err_sq_mean",
            "err_sq_std",
            "dense_err_sq_mean",
            "support_size_mean",
        ]),
        &agg,
    )?;
    w.csv(
        "summary.csv",
        &header(&[
            "variant",
            "replication",
            "final_err_sq",
            "final_dense_err_sq",
            "support_recovered",
            "updates",
        ]),
        &summary,
    )?;
    if cfg.plot && keep {
        plot(
            w,
            series,
            Axes {
                title: "sparse vs dense estimation error".into(),
                x_label: "t".into(),
                y_label: "||beta_t - beta*||^2".into(),
                x_log: true,
                y_log: true,
            },
        )?;
    }
    Ok(lines)
}

fn bandit_options(v: &Variant) -> BanditOptions {
    let cutoff = match v.explore {
        crate::schedules::ExplorationSchedule::TwoPhaseZero { t1, .. } => Some(t1),
        _ => None,
    };
    BanditOptions {
        explore: v.explore,
        cutoff,
        track_inference: false,
    }
}

fn run_bandit_kind(cfg: &RunConfig, w: &mut Writer<'_>) -> Result<Vec<String>> {
    let keep = cfg.horizon > 0;
    let k = cfg.variants.first().map_or(0, |v| v.spec.num_arms());
    let arm_cols: Vec<String> = (1..=k).map(|a| format!("err_sq_arm_{a}")).collect();
    let mut agg = Vec::new();
    let mut series = Vec::new();
    let mut lines = Vec::new();
    for v in &cfg.variants {
        if v.spec.num_arms() != k {
            return Err(Error::Config(
                "all variants must have the same number of arms".into(),
            ));
        }
        let report = run_bandit(
            &v.spec,
            &v.streams,
            &v.schedule,
            &bandit_options(v),
            cfg.horizon,
            &cfg.log,
            cfg.replications,
            cfg.seed,
        )?;
        let mut rep_header = header(&["t", "regret_cum"]);
        rep_header.extend(arm_cols.iter().cloned());
        rep_header.push("explore_frac".into());
        for (r, run) in report.runs.iter().enumerate() {
            let rows: Vec<Vec<String>> = (0..run.t.len())
                .filter(|_| keep)
                .map(|p| {
                    let mut row = vec![run.t[p].to_string(), num(run.regret_cum[p])];
                    row.extend(run.err_sq[p].iter().map(|e| num(*e)));
                    row.push(num(run.explore_frac[p]));
                    row
                })
                .collect();
            w.csv(
                &format!("{}/rep_{r:03}.csv", slug(&v.label)),
                &rep_header,
                &rows,
            )?;
        }
        let (mean, std) = report.ledger.mean_std();
        let errs = report.mean_errors();
        let explore = report.mean_explore_frac();
        if keep {
            for (p, &t) in report.ledger.t.iter().enumerate() {
                let mut row = vec![v.label.clone(), t.to_string(), num(mean[p]), num(std[p])];
                row.extend(errs[p].iter().map(|e| num(*e)));
                row.push(num(explore[p]));
                agg.push(row);
            }
        }
        series.push(Series {
            label: v.label.clone(),
            points: report
                .ledger
                .t
                .iter()
                .zip(&mean)
                .map(|(t, m)| (*t as f64, *m))
                .collect(),
        });
        let after: u64 = report
            .runs
            .iter()
            .map(|r| r.pulls_after_cutoff.iter().sum::<u64>())
            .sum();
        let mut line = format!(
            "{} ({}): mean final regret = {}",
            v.label,
            v.explore,
            report.ledger.final_mean()
        );
        if let crate::schedules::ExplorationSchedule::TwoPhaseZero { t1, .. } = v.explore {
            line.push_str(&format!(", cutoff t1 = {t1}, pulls after t1 = {after}"));
        }
        lines.push(line);
    }
    let mut agg_header = header(&["variant", "t", "regret_cum_mean", "regret_cum_std"]);
    agg_header.extend(arm_cols);
    agg_header.push("explore_frac".into());
    w.csv("aggregate.csv", &agg_header, &agg)?;
    if cfg.plot && keep {
        plot(
            w,
            series,
            Axes {
                title: "cumulative regret".into(),
                x_label: "t".into(),
                y_label: "regret".into(),
                x_log: false,
                y_log: false,
            },
        )?;
    }
    Ok(lines)
}

fn run_infer(cfg: &RunConfig, w: &mut Writer<'_>) -> Result<Vec<String>> {
    let mut summary = Vec::new();
    let mut lines = Vec::new();
    for v in &cfg.variants {
        let rep = coverage_experiment(
            &v.spec,
            &v.streams,
            &v.schedule,
            &v.explore,
            cfg.horizon,
            cfg.infer.level,
            cfg.replications,
            cfg.seed,
        )?;
        let rows: Vec<Vec<String>> = rep
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.replication.to_string(),
                    (r.arm + 1).to_string(),
                    (r.coordinate + 1).to_string(),
                    num(r.value),
                    r.covered.to_string(),
                ]
            })
            .collect();
        w.csv(
            &format!("{}/whitened.csv", slug(&v.label)),
            &header(&[
                "replication",
                "arm",
                "coordinate",
                "whitened_value",
                "covered",
            ]),
            &rows,
        )?;
        for (a, var) in rep.arms.iter().zip(&rep.variance) {
            for j in 0..a.marginal.len() {
                summary.push(vec![
                    v.label.clone(),
                    (a.arm + 1).to_string(),
                    (j + 1).to_string(),
                    num(a.marginal[j]),
                    num(a.rectangle),
                    num(a.ellipsoid),
                    num(var.empirical[j]),
                    num(var.theoretical[j]),
                ]);
            }
            lines.push(format!(
                "{} arm {}: coverage {:?} (level {}), rectangle {}, ellipsoid {}, max variance error {:.3}",
                v.label,
                a.arm + 1,
                a.marginal,
                cfg.infer.level,
                a.rectangle,
                a.ellipsoid,
                var.max_rel_error()
            ));
        }
    }
    w.csv(
        "summary.csv",
        &header(&[
            "variant",
            "arm",
            "coordinate",
            "coverage",
            "rectangle_coverage",
            "ellipsoid_coverage",
            "variance_empirical",
            "variance_formula",
        ]),
        &summary,
    )?;
    if cfg.plot {
        lines.push("plot skipped: infer runs write tables only".into());
    }
    Ok(lines)
}

/// One numerical self-check with its limit.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
}

impl Check {
    pub fn pass(&self) -> bool {
        self.value <= self.limit
    }
}

fn random_symmetric(rng: &mut Rng, n: usize) -> Mat {
    let a = Mat::from_fn(n, |_, _| rng.gaussian());
    let mut s = a.clone();
    s.add_scaled(1.0, &a.transpose());
    s.scaled(0.5)
}

/// Eigen-solver, whitening and conic-region self-checks.
pub fn verify_checks(opts: &VerifyOptions, seed: u64) -> Result<Vec<Check>> {
    let mut rng = Rng::substream(seed, 0, Stream::Aux);
    let (mut recon, mut ortho, mut whiten, mut inv_sqrt) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for m in 0..opts.eigen_matrices {
        let n = 1 + m % opts.eigen_max_dim;
        let a = random_symmetric(&mut rng, n);
        let e = sym_eigendecompose(&a, 1e-13)?;
        let mut diff = e.reconstruct();
        diff.add_scaled(-1.0, &a);
        recon = recon.max(diff.max_abs());
        let mut g = e.vectors.transpose().matmul(&e.vectors);
        g.add_scaled(-1.0, &Mat::identity(n));
        ortho = ortho.max(g.max_abs());

        // positive definite covariance for the whitening checks
        let b = Mat::from_fn(n, |_, _| rng.gaussian());
        let mut sigma = b.matmul(&b.transpose());
        sigma.add_scaled(1.0, &Mat::identity(n));
        let wm = inv_sqrt_psd(&sigma, DEFAULT_FLOOR)?;
        let mut id = wm.matmul(&sigma).matmul(&wm);
        id.add_scaled(-1.0, &Mat::identity(n));
        inv_sqrt = inv_sqrt.max(id.max_abs());
        let es = sym_eigendecompose(&sigma, 1e-13)?;
        let lambda_c: Vec<f64> = es.values.iter().map(|l| 0.5 + l).collect();
        let beta: Vec<f64> = (0..n).map(|_| rng.gaussian()).collect();
        let star: Vec<f64> = (0..n).map(|_| rng.gaussian()).collect();
        let t = 1 + rng.index(1_000_000) as u64;
        let z = whiten_and_test(&beta, &star, t, &es.vectors, &lambda_c)?;
        let back = unwhiten(&z, &star, t, &es.vectors, &lambda_c);
        for (x, y) in back.iter().zip(&beta) {
            whiten = whiten.max((x - y).abs());
        }
    }

    let mut violations = 0u64;
    let mut scale_gap = 0.0f64;
    for _ in 0..opts.region_specs {
        let arms: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..opts.region_dim).map(|_| rng.gaussian()).collect())
            .collect();
        let spec = ProblemSpec::bandit(arms, 1.0);
        let h0 = 0.5 * rng.uniform();
        violations += check_region_lemmas(&spec, h0, opts.region_samples, &mut rng)?.total();
    }
    let arms: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..opts.region_dim).map(|_| rng.gaussian()).collect())
        .collect();
    let mut x = vec![0.0; opts.region_dim];
    for _ in 0..opts.cone_pairs {
        rng.fill_gaussian(&mut x);
        let c = (4.0 * rng.gaussian()).exp();
        let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
        for i in 0..3 {
            let a = conic_margin(&x, i, &arms)?;
            let b = conic_margin(&cx, i, &arms)?;
            scale_gap = scale_gap.max((a - b).abs() / a.abs().max(1.0));
        }
    }
    Ok(vec![
        Check {
            name: "eigen_reconstruction",
            value: recon,
            limit: 1e-10,
        },
        Check {
            name: "eigen_orthogonality",
            value: ortho,
            limit: 1e-10,
        },
        Check {
            name: "inverse_sqrt_whitening",
            value: inv_sqrt,
            limit: 1e-8,
        },
        Check {
            name: "whiten_round_trip",
            value: whiten,
            limit: 1e-8,
        },
        Check {
            name: "region_violations",
            value: violations as f64,
            limit: 0.0,
        },
        Check {
            name: "cone_scale_invariance",
            value: scale_gap,
            limit: 1e-12,
        },
    ])
}

fn run_verify(cfg: &RunConfig, w: &mut Writer<'_>) -> Result<(Vec<String>, bool)> {
    let checks = verify_checks(&cfg.verify, cfg.seed)?;
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| {
            vec![
                c.name.to_string(),
                num(c.value),
                num(c.limit),
                c.pass().to_string(),
            ]
        })
        .collect();
    w.csv(
        "checks.csv",
        &header(&["check", "value", "limit", "pass"]),
        &rows,
    )?;
    let mut lines: Vec<String> = checks
        .iter()
        .map(|c| {
            format!(
                "{} {}: {} (limit {})",
                if c.pass() { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.limit
            )
        })
        .collect();
    let ok = checks.iter().all(Check::pass);
    if !ok {
        lines.push("some checks failed".into());
    }
    Ok((lines, ok))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::parse_config;

    fn cfg(text: &str, out: &Path) -> RunConfig {
        let mut c = parse_config(text).unwrap();
        c.out = out.to_path_buf();
        c
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("C_a=3"), "c_a_3");
        assert_eq!(slug("pi=5/(t-t1+50)"), "pi_5__t_t1_50");
        assert_eq!(slug("==="), "variant");
    }

    #[test]
    fn zero_horizon_writes_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(
            "kind = \"regress\"\nseed = 1\nhorizon = 0\nreplications = 2\n[problem]\ndim = 3\n",
            dir.path(),
        );
        run(&c).unwrap();
        let text = fs::read_to_string(dir.path().join("default/rep_000.csv")).unwrap();
        assert_eq!(text, "t,err_sq,phase\n");
        let agg = fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
        assert_eq!(agg, "variant,t,err_sq_mean,err_sq_std\n");
    }

    #[test]
    fn aggregate_is_reproducible() {
        let text =
            "kind = \"regress\"\nseed = 5\nhorizon = 2000\nreplications = 2\n[problem]\ndim = 3\n";
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run(&cfg(text, a.path())).unwrap();
        run(&cfg(text, b.path())).unwrap();
        let read = |d: &Path| fs::read(d.join("aggregate.csv")).unwrap();
        assert_eq!(read(a.path()), read(b.path()));
        assert!(read(a.path()).len() > 100);
    }

    #[test]
    fn bandit_preset_smoke() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(
            "preset = \"fig-lbd\"\nseed = 2\nhorizon = 3000\nreplications = 2\nplot = true\n[problem]\ndim = 4\n",
            dir.path(),
        );
        c.variants.retain(|v| v.label == "pi=5/(t-t1+50)");
        let summary = run(&c).unwrap();
        let agg = fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
        let head = agg.lines().next().unwrap();
        assert_eq!(
            head,
            "variant,t,regret_cum_mean,regret_cum_std,err_sq_arm_1,err_sq_arm_2,err_sq_arm_3,err_sq_arm_4,err_sq_arm_5,explore_frac"
        );
        assert!(agg.lines().count() > 10);
        assert!(dir.path().join("plot.svg").exists());
        assert!(summary.files.iter().any(|f| f.ends_with("manifest.toml")));
    }

    #[test]
    fn sparse_kind_writes_summary() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(
            "kind = \"sparse\"\nseed = 1\nhorizon = 5000\nreplications = 2\n[problem]\ndim = 12\nsparsity = 2\nsnr = 50.0\n[sparse]\ncompare_dense = true\nmin_gap = 500\n",
            dir.path(),
        );
        run(&c).unwrap();
        let s = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(s.lines().count(), 3);
        let rep = fs::read_to_string(dir.path().join("default/rep_001.csv")).unwrap();
        assert!(rep.starts_with("t,err_sq,err_sq_on_support,support_size,event,dense_err_sq\n"));
    }

    #[test]
    fn small_verify_passes() {
        let opts = VerifyOptions {
            eigen_matrices: 20,
            eigen_max_dim: 12,
            region_specs: 2,
            region_samples: 2000,
            region_dim: 3,
            cone_pairs: 500,
        };
        for c in verify_checks(&opts, 4).unwrap() {
            assert!(c.pass(), "{c:?}");
        }
    }
}
