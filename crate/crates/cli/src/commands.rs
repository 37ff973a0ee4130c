//! One runner per subcommand. Every runner writes its declared outputs and a
//! `<out>.config.json` sidecar; text outputs also start with the config line.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cdi_core::baselines::{spectral_bisection, write_similarity_csv};
use cdi_core::cdi::cdi;
use cdi_core::consensus::{simulate, PerturbationVector};
use cdi_core::graph::{load_graph, write_graph, write_positions, Graph};
use cdi_core::matching::mean_matching_communities;
use cdi_core::matching::synthetic::SubjectParams;
use cdi_core::optimizer::{cdi_perturbation_opt, direct_baseline_opt};
use cdi_core::spectra::MatrixKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::*;
use crate::experiments::{
    derive_seed, flock_sweep, kmeans_seeded_opt, run_methods, scan_communities, GraphSpec, PoolSpec, SubjectPool,
};
use crate::fit::fit_power_law;

/// Executes a configuration and records it beside the output.
pub fn run(config: &ExperimentConfig) -> Result<()> {
    if let Some(dir) = config.command.out().parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    match &config.command {
        Command::Generate(a) => generate(config, a),
        Command::Cdi(a) => cmd_cdi(a),
        Command::Optimize(a) => optimize(config, a),
        Command::Simulate(a) => cmd_simulate(config, a),
        Command::Compare(a) => compare(config, a),
        Command::Match(a) => cmd_match(config, a),
        Command::Bisect(a) => bisect(a),
    }?;
    config.save_sidecar()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn load(path: &Path) -> Result<Graph> {
    load_graph(path).with_context(|| format!("loading graph {}", path.display()))
}

fn pos_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".pos");
    PathBuf::from(s)
}

fn generate(config: &ExperimentConfig, a: &GenerateArgs) -> Result<()> {
    let spec = GraphSpec {
        family: a.family,
        n: a.n,
        k: a.k,
        kmin: a.kmin,
        kmax: a.kmax,
        dims: a.dims,
        thickness: a.thickness,
        weight: a.weight,
    };
    let g = spec.generate(a.seed)?;
    let mut w = create(&a.out)?;
    writeln!(w, "{}", config.header_line())?;
    write_graph(&g, &mut w)?;
    w.flush()?;
    if let Some(p) = g.positions() {
        let mut w = create(&pos_path(&a.out))?;
        write_positions(p, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn cmd_cdi(a: &CdiArgs) -> Result<()> {
    let g = load(&a.input)?;
    let found = cdi(&g, a.vectors, a.matrix)?;
    write_json(&a.out, &found.to_json())
}

fn optimize(config: &ExperimentConfig, a: &OptimizeArgs) -> Result<()> {
    if let Some(n) = a.flock {
        return flock(config, a, n);
    }
    let input = a.input.as_ref().context("--in or --flock is required")?;
    let g = load(input)?;
    let result = match a.method {
        Method::Cdi => cdi_perturbation_opt(&g, &cdi(&g, a.vectors, MatrixKind::Laplacian)?)?,
        Method::Kmeans => kmeans_seeded_opt(&g, &cdi(&g, a.vectors, MatrixKind::Laplacian)?, a.seed)?,
        Method::Direct => direct_baseline_opt(&g, a.multistart, a.seed)?,
    };
    write_json(&a.out, &result.to_json())
}

fn flock(config: &ExperimentConfig, a: &OptimizeArgs, n: usize) -> Result<()> {
    if a.method != Method::Cdi {
        bail!("the flock sweep optimises with --method cdi only");
    }
    let points = flock_sweep(n, a.thickness, &a.k, a.vectors, a.seed)?;
    let mut w = create(&a.out)?;
    writeln!(w, "{}", config.header_line())?;
    writeln!(w, "k,lambda1,communities,active_communities,evaluations,converged")?;
    for p in &points {
        writeln!(
            w,
            "{},{:e},{},{},{},{}",
            p.k, p.lambda1, p.communities, p.active_communities, p.evaluations, p.converged
        )?;
    }
    if a.fit == Some(Fit::Powerlaw) {
        let line = fit_comment(&points.iter().map(|p| (p.k as f64, p.lambda1)).collect::<Vec<_>>());
        if line.starts_with(FIT_UNAVAILABLE) {
            eprintln!("warning: power-law fit unavailable");
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

const FIT_UNAVAILABLE: &str = "# fit: unavailable";

/// Trailing comment of a flock sweep. A point with λ₁ = 0 (a closed class
/// left without input) has no logarithm; the fit is then declined while the
/// measured rows stay in the file.
fn fit_comment(points: &[(f64, f64)]) -> String {
    match fit_power_law(points) {
        Ok(fit) => format!("# fit: lambda1 = a k^b, a={:e}, b={}, r2={}", fit.a, fit.b, fit.r2),
        Err(e) => format!("{FIT_UNAVAILABLE}: {e:#}"),
    }
}

fn cmd_simulate(config: &ExperimentConfig, a: &SimulateArgs) -> Result<()> {
    let g = load(&a.input)?;
    let c = match &a.perturbation {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            let c: Vec<f64> = serde_json::from_value(value.get("c").cloned().context("perturbation JSON lacks `c`")?)?;
            PerturbationVector::new(c)?
        }
        None => PerturbationVector::uniform_on(g.n(), &(0..g.n()).collect::<Vec<_>>())?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let x0: Vec<f64> = (0..g.n()).map(|_| rng.random::<f64>()).collect();
    let trajectory = simulate(&g, &c, a.target, &x0, a.dt, a.t_end)?;
    let mut w = create(&a.out)?;
    writeln!(w, "{}", config.header_line())?;
    trajectory.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn compare(config: &ExperimentConfig, a: &CompareArgs) -> Result<()> {
    if a.methods.is_empty() {
        bail!("--methods is empty");
    }
    let items: Vec<(usize, usize)> = a
        .sizes
        .0
        .iter()
        .flat_map(|&n| (0..a.per_size).map(move |i| (n, i)))
        .collect();
    let rows: Vec<String> = items
        .par_iter()
        .map(|&(n, i)| -> Result<Vec<String>> {
            let spec = GraphSpec {
                family: a.family,
                n,
                k: a.k,
                kmin: a.kmin,
                kmax: a.kmax,
                dims: 2,
                thickness: 0.2,
                weight: a.weight,
            };
            let seed = derive_seed(a.seed, &[n as u64, i as u64]);
            let g = spec.generate(seed)?;
            let outcomes = run_methods(&g, &a.methods, a.vectors, a.multistart, seed)?;
            let reference = outcomes.iter().find(|o| o.method == Method::Direct).map(|o| o.result.lambda1);
            Ok(outcomes
                .iter()
                .map(|o| {
                    let ratio = reference.map(|r| format!("{}", o.result.lambda1 / r)).unwrap_or_default();
                    format!(
                        "{n},{},{seed},{},{:e},{ratio},{},{}",
                        i + 1,
                        o.method,
                        o.result.lambda1,
                        o.communities,
                        o.result.active_communities.len()
                    )
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut w = create(&a.out)?;
    writeln!(w, "{}", config.header_line())?;
    writeln!(w, "n,graph,seed,method,lambda1,ratio_to_direct,communities,active_communities")?;
    for row in rows {
        writeln!(w, "{row}")?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_match(config: &ExperimentConfig, a: &MatchArgs) -> Result<()> {
    if let Some(subjects) = a.synthetic {
        let spec = PoolSpec {
            subjects,
            params: SubjectParams::default(),
            jitter: a.jitter,
            dropout: a.dropout,
            heavy_subject: a.heavy_subject.map(|h| h.saturating_sub(1)),
            heavy_dropout: a.heavy_dropout,
            vectors: a.vectors,
            entry_threshold: a.entry_threshold,
            seed: a.seed,
        };
        if a.heavy_subject == Some(0) {
            bail!("--heavy-subject is 1-based");
        }
        let pool = SubjectPool::build(&spec)?;
        let matrix = pool.matrix(a.metric)?;
        let ids: Vec<String> = (1..=subjects).map(|i| format!("s{i}")).collect();
        let mut w = create(&a.out)?;
        writeln!(w, "{}", config.header_line())?;
        write_similarity_csv(&ids, &matrix, &mut w)?;
        w.flush()?;
        return Ok(());
    }
    if a.metric != Metric::Cdi {
        bail!("scan-pair matching reports the cdi metric only");
    }
    let (pa, pb) = (a.a.as_ref().context("--a required")?, a.b.as_ref().context("--b required")?);
    let ca = scan_communities(&load(pa)?, a.vectors, a.entry_threshold, &pa.display().to_string())?;
    let cb = scan_communities(&load(pb)?, a.vectors, a.entry_threshold, &pb.display().to_string())?;
    let report = mean_matching_communities(&ca, &cb)?;
    write_json(&a.out, &serde_json::to_value(&report)?)
}

fn bisect(a: &BisectArgs) -> Result<()> {
    let g = load(&a.input)?;
    let partition = spectral_bisection(&g, a.parts, a.threshold)?;
    let communities: Vec<Vec<usize>> = partition
        .communities
        .iter()
        .map(|c| c.iter().map(|v| v + 1).collect())
        .collect();
    write_json(
        &a.out,
        &serde_json::json!({ "method": partition.method, "communities": communities }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_comment_reports_the_law() {
        let line = fit_comment(&[(5.0, 0.02), (10.0, 0.01), (20.0, 0.005)]);
        assert!(line.starts_with("# fit: lambda1 = a k^b, a="), "{line}");
        assert!(line.ends_with("r2=1"), "{line}");
    }

    #[test]
    fn zero_rate_declines_the_fit() {
        let line = fit_comment(&[(4.0, 0.0), (8.0, 0.01), (16.0, 0.008)]);
        assert!(line.starts_with("# fit: unavailable: "), "{line}");
    }
}
