use crate::config::{ExperimentConfig, MetricChoice};
use circlesync::analysis::{
    classify_trichotomy, conjugate_system, estimate_hatz_minus_adaptive, mu_minus_from_fibers,
    sync_experiment, TrichotomyLabel,
};
use circlesync::ifs::{
    forward_orbit, inverse_forward_orbit, inverse_reversed_orbit, reversed_orbit, OrbitMode,
};
use circlesync::measure::{invariant_measure, wasserstein};
use circlesync::preserved::estimate_l;
use circlesync::{CirclePoint, GridMeasure, IfsWithProbabilities, Metric, PreservedSet};
use serde::Serialize;
use serde_json::{json, Value};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

pub enum Failure {
    Usage(String),
    Io(PathBuf, io::Error),
    Analysis(circlesync::Error),
}

impl From<circlesync::Error> for Failure {
    fn from(e: circlesync::Error) -> Self {
        Failure::Analysis(e)
    }
}

pub struct Context {
    pub config: ExperimentConfig,
    pub ifs: IfsWithProbabilities,
    pub out: PathBuf,
}

impl Context {
    fn create(&self, name: &str) -> Result<(PathBuf, BufWriter<File>), Failure> {
        let path = self.out.join(name);
        let file = File::create(&path).map_err(|e| Failure::Io(path.clone(), e))?;
        Ok((path, BufWriter::new(file)))
    }

    /// Creates `name` and hands a buffered writer to `body`.
    pub fn write(
        &self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    ) -> Result<(), Failure> {
        let (path, mut w) = self.create(name)?;
        body(&mut w).and_then(|_| w.flush()).map_err(|e| Failure::Io(path, e))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), Failure> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n")
        })
    }

    fn metric(&self, choice: MetricChoice) -> Result<Metric, Failure> {
        Ok(match choice {
            MetricChoice::Euclidean => Metric::Euclidean,
            MetricChoice::Rho => conjugate_system(&self.ifs, &self.config.analysis())?.rho(),
        })
    }
}

pub fn classify(ctx: &Context) -> Result<Value, Failure> {
    let result = classify_trichotomy(&ctx.ifs, &ctx.config.analysis())?;
    ctx.write_json("trichotomy.json", &result)?;
    ctx.write("defect_curve.csv", |w| result.evidence.preserved.write_defect_csv(w))?;
    ctx.write("sync_samples.csv", |w| result.evidence.sync.write_samples_csv(w))?;
    if let TrichotomyLabel::Invariance { common_measure } = &result.label {
        ctx.write("measure.csv", |w| common_measure.write_csv(w))?;
    }
    Ok(json!({ "label": result.label.name(), "k": result.k }))
}

pub fn invariant(ctx: &Context) -> Result<Value, Failure> {
    let c = &ctx.config;
    let solved = invariant_measure(&ctx.ifs, c.grid_size, c.solver.tol, c.solver.max_iter)?;
    ctx.write("measure.csv", |w| solved.measure.write_csv(w))?;
    Ok(json!({
        "iterations": solved.iterations,
        "residual": solved.residual,
        "averaged": solved.averaged,
    }))
}

pub fn sync(ctx: &Context) -> Result<Value, Failure> {
    let c = &ctx.config;
    let metric = ctx.metric(c.metric)?;
    let preserved = estimate_l(
        &ctx.ifs,
        &metric,
        c.preserved.s_grid,
        c.preserved.x_samples,
        c.preserved_tol(c.metric),
    )?;
    let report = sync_experiment(&ctx.ifs, &metric, preserved.estimate, &c.sync, c.seed);
    ctx.write("sync_samples.csv", |w| report.write_samples_csv(w))?;
    Ok(serde_json::to_value(&report).expect("report serializes"))
}

pub fn preserved(ctx: &Context) -> Result<Value, Failure> {
    let c = &ctx.config;
    let metric = ctx.metric(c.metric)?;
    let report = estimate_l(
        &ctx.ifs,
        &metric,
        c.preserved.s_grid,
        c.preserved.x_samples,
        c.preserved_tol(c.metric),
    )?;
    ctx.write_json("preserved.json", &report)?;
    ctx.write("defect_curve.csv", |w| report.write_defect_csv(w))?;
    Ok(serde_json::to_value(&report).expect("report serializes"))
}

pub fn fibers(ctx: &Context) -> Result<Value, Failure> {
    let c = &ctx.config;
    let analysis = c.analysis();
    let conj = conjugate_system(&ctx.ifs, &analysis)?;
    let k = match c.fibers.k {
        Some(k) => k,
        None => {
            let report = estimate_l(
                &conj.conjugated,
                &Metric::Euclidean,
                analysis.s_grid,
                analysis.x_samples,
                analysis.preserved_tol,
            )?;
            match report.estimate {
                PreservedSet::Finite(k) => k,
                // no finite lattice: the contraction check below reports it
                PreservedSet::AllDistances => 1,
            }
        }
    };
    let fiber = c.fiber();
    let hatz = estimate_hatz_minus_adaptive(&ctx.ifs, &ctx.ifs.symbol_stream(c.seed, 0), fiber.horizon, k, &fiber)?;
    let sampler = GridMeasure::lebesgue(c.grid_size)?;
    let avg = mu_minus_from_fibers(&ctx.ifs, &sampler, k, c.fibers.seeds, c.grid_size, &fiber, c.seed)?;
    ctx.write("fibers.jsonl", |w| {
        for f in &avg.fibers {
            serde_json::to_writer(&mut *w, f)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;
    ctx.write("mu_minus.csv", |w| avg.measure.write_csv(w))?;
    Ok(json!({
        "k": k,
        "hatz_minus": hatz.point.value(),
        "hatz_horizon": hatz.horizon,
        "fibers": avg.fibers.len(),
        "failed": avg.failed,
        "low_confidence": avg.low_confidence,
        "wasserstein_to_solver": wasserstein(&avg.measure, &conj.mu_minus)?,
    }))
}

pub fn simulate(ctx: &Context) -> Result<Value, Failure> {
    let c = &ctx.config;
    let omega = ctx.ifs.symbol_stream(c.seed, 0);
    let x = CirclePoint::new(c.simulate.x);
    let n = c.simulate.n;
    let trajectory = match c.simulate.mode {
        OrbitMode::Forward => forward_orbit(&ctx.ifs, x, &omega, n),
        OrbitMode::Reversed => reversed_orbit(&ctx.ifs, x, &omega, n),
        OrbitMode::InverseForward => inverse_forward_orbit(&ctx.ifs, x, &omega, n),
        OrbitMode::InverseReversed => inverse_reversed_orbit(&ctx.ifs, x, &omega, n),
    };
    ctx.write("trajectory.jsonl", |w| trajectory.write_jsonl(w))?;
    Ok(json!({ "points": trajectory.len(), "last": trajectory.last().value() }))
}

/// `summary.json`: the resolved config and seed, then either the command's
/// result or the error that stopped it.
pub fn write_summary(ctx: &Context, command: &str, outcome: Result<&Value, &circlesync::Error>) -> Result<(), Failure> {
    let mut summary = json!({
        "command": command,
        "seed": ctx.config.seed,
        "config": ctx.config,
    });
    match outcome {
        Ok(result) => {
            summary["status"] = json!("ok");
            summary["result"] = result.clone();
        }
        Err(e) => {
            summary["status"] = json!("error");
            summary["error"] = json!(e.name());
            summary["message"] = json!(e.to_string());
        }
    }
    ctx.write_json("summary.json", &summary)
}

pub fn ensure_dir(path: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(path).map_err(|e| Failure::Io(path.to_path_buf(), e))
}
