//! Cross-validation, fixed-edge and timing experiments over synthetic data.

use std::path::Path;
use std::time::Instant;

use dcggm_core::eval::{calibrate_edges, confusion, cross_validate, f1_score, CvResult, FitOutcome, DEFAULT_ZERO_TOL};
use dcggm_core::synthetic::derive_seed;
use dcggm_core::{make_dataset, Dataset, Estimator, GroundTruth, Kind, Method, SymMatrix};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{AppError, Result};
use crate::io::fmt_f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Cv,
    Fixed,
    Bench,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Cv => "cv",
            Mode::Fixed => "fixed",
            Mode::Bench => "bench",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = AppError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cv" => Ok(Mode::Cv),
            "fixed" => Ok(Mode::Fixed),
            "bench" => Ok(Mode::Bench),
            _ => Err(AppError::Usage(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub kind: Kind,
    pub p: usize,
    pub n: usize,
}

impl Scenario {
    pub fn label(&self) -> String {
        format!("{}_p{}_n{}", self.kind.as_str(), self.p, self.n)
    }
}

pub fn scenarios(cfg: &RunConfig) -> Vec<Scenario> {
    let mut out = Vec::new();
    for &kind in &cfg.kinds {
        for &p in &cfg.p_list {
            for n in cfg.sample_sizes(p) {
                out.push(Scenario { kind, p, n });
            }
        }
    }
    out
}

/// Seed of the dataset for one scenario and replicate.
pub fn data_seed(master: u64, sc: &Scenario, replicate: usize) -> u64 {
    derive_seed(master, &format!("data/{}/{}/{}/{}", sc.kind.as_str(), sc.p, sc.n, replicate))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub scenario: Scenario,
    pub replicate: usize,
    pub method: Method,
    /// `cv` or `fixed`; timing runs are reported as `fixed`.
    pub mode: Mode,
    pub param: f64,
    pub edges: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fit_seconds: f64,
}

impl ResultRow {
    pub const HEADER: [&'static str; 15] =
        ["kind", "p", "n", "replicate", "method", "mode", "param", "edges", "tp", "fp", "fn", "precision", "recall", "f1", "fit_seconds"];

    fn new(
        scenario: Scenario,
        replicate: usize,
        method: Method,
        mode: Mode,
        param: f64,
        fit: &FitOutcome,
        truth: &GroundTruth,
        fit_seconds: f64,
    ) -> Result<Self> {
        let c = confusion(&fit.omega, &truth.omega_true, DEFAULT_ZERO_TOL)?;
        Ok(ResultRow {
            scenario,
            replicate,
            method,
            mode: if mode == Mode::Cv { Mode::Cv } else { Mode::Fixed },
            param,
            edges: fit.edges,
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            precision: c.precision(),
            recall: c.recall(),
            f1: f1_score(&c),
            fit_seconds,
        })
    }

    fn record(&self) -> Vec<String> {
        let s = &self.scenario;
        vec![
            s.kind.as_str().into(),
            s.p.to_string(),
            s.n.to_string(),
            self.replicate.to_string(),
            self.method.as_str().into(),
            self.mode.as_str().into(),
            fmt_f64(self.param),
            self.edges.to_string(),
            self.tp.to_string(),
            self.fp.to_string(),
            self.fn_.to_string(),
            fmt_f64(self.precision),
            fmt_f64(self.recall),
            fmt_f64(self.f1),
            fmt_f64(self.fit_seconds),
        ]
    }
}

/// A fit or dataset that failed; the run carries on without it.
#[derive(Clone, Debug, PartialEq)]
pub struct FailureRow {
    pub scenario: Scenario,
    pub replicate: usize,
    pub method: Option<Method>,
    pub param: Option<f64>,
    /// Held-out fold for failures inside cross-validation.
    pub fold: Option<usize>,
    pub error: String,
}

impl FailureRow {
    const HEADER: [&'static str; 8] = ["kind", "p", "n", "replicate", "method", "param", "fold", "error"];

    fn record(&self) -> Vec<String> {
        let s = &self.scenario;
        vec![
            s.kind.as_str().into(),
            s.p.to_string(),
            s.n.to_string(),
            self.replicate.to_string(),
            self.method.map_or(String::new(), |m| m.as_str().into()),
            self.param.map_or(String::new(), fmt_f64),
            self.fold.map_or(String::new(), |f| f.to_string()),
            self.error.clone(),
        ]
    }
}

/// Cardinality bookkeeping for every reported DC fit.
#[derive(Clone, Debug, PartialEq)]
pub struct DcFitRow {
    pub scenario: Scenario,
    pub replicate: usize,
    pub mode: Mode,
    pub target: Option<usize>,
    pub k: usize,
    pub edges: usize,
    /// Nonzeros of `vec(O)`: the diagonal plus both copies of every edge.
    pub vec_l0: usize,
    pub constraint_gap: f64,
    pub outer_iterations: usize,
    pub converged: bool,
}

impl DcFitRow {
    const HEADER: [&'static str; 12] =
        ["kind", "p", "n", "replicate", "mode", "target", "k", "edges", "vec_l0", "constraint_gap", "outer_iterations", "converged"];

    fn new(scenario: Scenario, replicate: usize, mode: Mode, target: Option<usize>, k: usize, fit: &FitOutcome) -> Self {
        let p = scenario.p;
        let diag = (0..p).filter(|&j| fit.omega.get(j, j).abs() > DEFAULT_ZERO_TOL).count();
        DcFitRow {
            scenario,
            replicate,
            mode,
            target,
            k,
            edges: fit.edges,
            vec_l0: diag + 2 * fit.edges,
            constraint_gap: fit.constraint_gap.unwrap_or(0.0),
            outer_iterations: fit.iterations,
            converged: fit.converged,
        }
    }

    fn record(&self) -> Vec<String> {
        let s = &self.scenario;
        vec![
            s.kind.as_str().into(),
            s.p.to_string(),
            s.n.to_string(),
            self.replicate.to_string(),
            self.mode.as_str().into(),
            self.target.map_or(String::new(), |t| t.to_string()),
            self.k.to_string(),
            self.edges.to_string(),
            self.vec_l0.to_string(),
            fmt_f64(self.constraint_gap),
            self.outer_iterations.to_string(),
            self.converged.to_string(),
        ]
    }
}

/// Cross-validation curve of one method, averaged over replicates by grid
/// position.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    pub method: Method,
    pub param: f64,
    pub edges_mean: f64,
    pub holdout_ll_mean: f64,
}

impl CurveRow {
    pub const HEADER: [&'static str; 4] = ["method", "param", "edges_mean", "holdout_ll_mean"];

    fn record(&self) -> Vec<String> {
        vec![self.method.as_str().into(), fmt_f64(self.param), fmt_f64(self.edges_mean), fmt_f64(self.holdout_ll_mean)]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub method: Method,
    pub p: usize,
    pub n: usize,
    pub seconds_mean: f64,
}

impl BenchRow {
    pub const HEADER: [&'static str; 4] = ["method", "p", "n", "seconds_mean"];

    fn record(&self) -> Vec<String> {
        vec![self.method.as_str().into(), self.p.to_string(), self.n.to_string(), fmt_f64(self.seconds_mean)]
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<FailureRow>,
    pub dc_fits: Vec<DcFitRow>,
    pub curves: Vec<(Scenario, Vec<CurveRow>)>,
    pub bench: Vec<BenchRow>,
    /// Units of work (one method on one dataset, per target in fixed mode).
    pub cells: usize,
    pub failed_cells: usize,
}

/// Called after each finished dataset with a one-line summary.
pub type Progress<'a> = Option<&'a (dyn Fn(&str) + Sync)>;

pub fn run(cfg: &RunConfig, mode: Mode, progress: Progress) -> Result<Report> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads()?)
        .build()
        .map_err(|e| AppError::Usage(format!("thread pool: {e}")))?;
    Ok(match mode {
        Mode::Cv => pool.install(|| run_cv(cfg, progress)),
        Mode::Fixed => pool.install(|| run_fixed(cfg, progress)),
        Mode::Bench => run_bench(cfg, progress),
    })
}

#[derive(Default)]
struct CellOut {
    rows: Vec<ResultRow>,
    failures: Vec<FailureRow>,
    dc_fits: Vec<DcFitRow>,
    curves: Vec<(Method, CvResult)>,
    cells: usize,
    failed_cells: usize,
}

impl CellOut {
    fn fail(&mut self, sc: Scenario, replicate: usize, method: Option<Method>, param: Option<f64>, error: impl ToString) {
        self.failures.push(FailureRow { scenario: sc, replicate, method, param, fold: None, error: error.to_string() });
    }
}

fn jobs(cfg: &RunConfig) -> Vec<(Scenario, usize)> {
    scenarios(cfg).into_iter().flat_map(|sc| (0..cfg.replicates).map(move |r| (sc, r))).collect()
}

fn dataset(cfg: &RunConfig, sc: &Scenario, replicate: usize) -> dcggm_core::Result<(GroundTruth, Dataset)> {
    make_dataset(sc.kind, sc.p, sc.n, cfg.n_edges, data_seed(cfg.master_seed, sc, replicate))
}

fn timed<T>(record: bool, f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, if record { start.elapsed().as_secs_f64() } else { 0.0 })
}

fn merge(cells: Vec<CellOut>, report: &mut Report) -> Vec<Vec<(Method, CvResult)>> {
    let mut curves = Vec::with_capacity(cells.len());
    for c in cells {
        report.rows.extend(c.rows);
        report.failures.extend(c.failures);
        report.dc_fits.extend(c.dc_fits);
        report.cells += c.cells;
        report.failed_cells += c.failed_cells;
        curves.push(c.curves);
    }
    curves
}

fn announce(progress: Progress, mode: Mode, sc: &Scenario, replicate: usize, out: &CellOut) {
    if let Some(f) = progress {
        f(&format!("{} {} replicate {replicate}: {} rows, {} failures", mode.as_str(), sc.label(), out.rows.len(), out.failures.len()));
    }
}

/// Cross-validated model selection for every scenario, replicate and method.
pub fn run_cv(cfg: &RunConfig, progress: Progress) -> Report {
    let jobs = jobs(cfg);
    let cells: Vec<CellOut> = jobs
        .par_iter()
        .map(|&(sc, rep)| {
            let out = cv_cell(cfg, sc, rep);
            announce(progress, Mode::Cv, &sc, rep, &out);
            out
        })
        .collect();
    let mut report = Report::default();
    let curves = merge(cells, &mut report);
    for sc in scenarios(cfg) {
        let mut rows = Vec::new();
        for &m in &cfg.methods {
            let runs: Vec<&CvResult> = jobs
                .iter()
                .zip(&curves)
                .filter(|((s, _), _)| *s == sc)
                .flat_map(|(_, c)| c.iter().filter(|(cm, _)| *cm == m).map(|(_, r)| r))
                .collect();
            rows.extend(average_curve(m, &runs));
        }
        report.curves.push((sc, rows));
    }
    report
}

fn cv_cell(cfg: &RunConfig, sc: Scenario, rep: usize) -> CellOut {
    let mut out = CellOut { cells: cfg.methods.len(), ..CellOut::default() };
    let (truth, ds) = match dataset(cfg, &sc, rep) {
        Ok(d) => d,
        Err(e) => {
            out.fail(sc, rep, None, None, e);
            out.failed_cells = out.cells;
            return out;
        }
    };
    let fold_seed = derive_seed(ds.seed, "folds");
    for &m in &cfg.methods {
        let est = Estimator::new(m);
        let grid = est.grid(&ds.s, cfg.grid_points);
        let cv = match cross_validate(&est, &ds, &grid, cfg.folds, fold_seed) {
            Ok(cv) => cv,
            Err(e) => {
                out.fail(sc, rep, Some(m), None, e);
                out.failed_cells += 1;
                continue;
            }
        };
        for f in &cv.failures {
            out.failures.push(FailureRow {
                scenario: sc,
                replicate: rep,
                method: Some(m),
                param: Some(cv.grid[f.grid_index]),
                fold: Some(f.fold),
                error: f.error.to_string(),
            });
        }
        // time a standalone fit at the chosen point; the refit itself is buried in the sweep
        let seconds = if cfg.record_timing { timed(true, || est.fit(&ds.s, cv.chosen)).1 } else { 0.0 };
        match ResultRow::new(sc, rep, m, Mode::Cv, cv.chosen, &cv.refit, &truth, seconds) {
            Ok(row) => out.rows.push(row),
            Err(e) => {
                out.fail(sc, rep, Some(m), Some(cv.chosen), e);
                out.failed_cells += 1;
                continue;
            }
        }
        if m == Method::Dc {
            out.dc_fits.push(DcFitRow::new(sc, rep, Mode::Cv, None, cv.chosen as usize, &cv.refit));
        }
        out.curves.push((m, cv));
    }
    out
}

fn average_curve(method: Method, runs: &[&CvResult]) -> Vec<CurveRow> {
    let len = runs.iter().map(|r| r.grid.len()).min().unwrap_or(0);
    (0..len)
        .map(|i| {
            let mean = |f: &dyn Fn(&CvResult) -> f64| runs.iter().map(|r| f(r)).sum::<f64>() / runs.len() as f64;
            CurveRow {
                method,
                param: mean(&|r| r.grid[i]),
                edges_mean: mean(&|r| r.mean_edges[i]),
                holdout_ll_mean: mean(&|r| r.mean_holdout_ll[i]),
            }
        })
        .collect()
}

/// Every method tuned to each target edge count.
pub fn run_fixed(cfg: &RunConfig, progress: Progress) -> Report {
    let cells: Vec<CellOut> = jobs(cfg)
        .par_iter()
        .map(|&(sc, rep)| {
            let out = fixed_cell(cfg, sc, rep);
            announce(progress, Mode::Fixed, &sc, rep, &out);
            out
        })
        .collect();
    let mut report = Report::default();
    merge(cells, &mut report);
    report
}

fn fixed_cell(cfg: &RunConfig, sc: Scenario, rep: usize) -> CellOut {
    let mut out = CellOut { cells: cfg.methods.len() * cfg.targets.len(), ..CellOut::default() };
    let (truth, ds) = match dataset(cfg, &sc, rep) {
        Ok(d) => d,
        Err(e) => {
            out.fail(sc, rep, None, None, e);
            out.failed_cells = out.cells;
            return out;
        }
    };
    for &m in &cfg.methods {
        let est = Estimator::new(m);
        for &target in &cfg.targets {
            let (cal, seconds) = timed(cfg.record_timing, || calibrate_edges(&est, &ds.s, target));
            let row = cal.map_err(AppError::from).and_then(|cal| {
                let seconds = match (cfg.record_timing, cal.evaluations) {
                    (false, _) | (_, 1) => seconds,
                    _ => timed(true, || est.fit(&ds.s, cal.param)).1,
                };
                Ok((ResultRow::new(sc, rep, m, Mode::Fixed, cal.param, &cal.fit, &truth, seconds)?, cal))
            });
            match row {
                Ok((row, cal)) => {
                    if m == Method::Dc {
                        out.dc_fits.push(DcFitRow::new(sc, rep, Mode::Fixed, Some(target), cal.param as usize, &cal.fit));
                    }
                    out.rows.push(row);
                }
                Err(e) => {
                    out.fail(sc, rep, Some(m), None, format!("target {target}: {e}"));
                    out.failed_cells += 1;
                }
            }
        }
    }
    out
}

/// Median of `|s_jk|` over `j < k`.
pub fn median_abs_offdiag(s: &SymMatrix) -> f64 {
    let mut v: Vec<f64> = s.offdiag_upper().map(f64::abs).collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Parameter used by timing runs: half of all edges for DC, the median
/// absolute off-diagonal covariance as the penalty otherwise.
pub fn bench_param(method: Method, s: &SymMatrix) -> f64 {
    let p = s.dim();
    match method {
        Method::Dc => (p + 2 * (p * (p - 1) / 4)) as f64,
        _ => median_abs_offdiag(s),
    }
}

/// Wall-clock timing on the first replicate of each scenario. Runs
/// sequentially whatever the configured parallelism.
pub fn run_bench(cfg: &RunConfig, progress: Progress) -> Report {
    let mut report = Report::default();
    let mut totals: Vec<(Method, usize, usize, f64, usize)> = Vec::new();
    for sc in scenarios(cfg) {
        let mut out = CellOut { cells: cfg.methods.len(), ..CellOut::default() };
        match dataset(cfg, &sc, 0) {
            Err(e) => {
                out.fail(sc, 0, None, None, e);
                out.failed_cells = out.cells;
            }
            Ok((truth, ds)) => {
                for &m in &cfg.methods {
                    let est = Estimator::new(m);
                    let param = bench_param(m, &ds.s);
                    let mut last = None;
                    let mut seconds = 0.0;
                    for _ in 0..cfg.bench_runs {
                        let (fit, t) = timed(true, || est.fit(&ds.s, param));
                        seconds += t;
                        last = Some(fit);
                    }
                    let mean = seconds / cfg.bench_runs as f64;
                    let row = last
                        .expect("at least one run")
                        .map_err(AppError::from)
                        .and_then(|fit| Ok((ResultRow::new(sc, 0, m, Mode::Bench, param, &fit, &truth, mean)?, fit)));
                    match row {
                        Ok((row, fit)) => {
                            if m == Method::Dc {
                                out.dc_fits.push(DcFitRow::new(sc, 0, Mode::Bench, None, param as usize, &fit));
                            }
                            out.rows.push(row);
                            match totals.iter_mut().find(|t| (t.0, t.1, t.2) == (m, sc.p, sc.n)) {
                                Some(t) => {
                                    t.3 += mean;
                                    t.4 += 1;
                                }
                                None => totals.push((m, sc.p, sc.n, mean, 1)),
                            }
                        }
                        Err(e) => {
                            out.fail(sc, 0, Some(m), Some(param), e);
                            out.failed_cells += 1;
                        }
                    }
                }
            }
        }
        announce(progress, Mode::Bench, &sc, 0, &out);
        merge(vec![out], &mut report);
    }
    report.bench = totals
        .into_iter()
        .map(|(method, p, n, sum, count)| BenchRow { method, p, n, seconds_mean: sum / count as f64 })
        .collect();
    report
}

fn write_csv(path: &Path, header: &[&str], records: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let err = |e: csv::Error| AppError::format(path, e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for r in records {
        w.write_record(&r).map_err(err)?;
    }
    w.flush().map_err(AppError::io(path))
}

/// Writes `results.csv`, `failures.csv`, `dc_fits.csv` (when DC ran), and the
/// curve or timing tables of the mode.
///
/// Curves go to one `cv_curves_<kind>_p<p>_n<n>.csv` per scenario;
/// `cv_curves.csv` repeats the first scenario.
pub fn write_report(dir: &Path, mode: Mode, report: &Report) -> Result<()> {
    write_csv(&dir.join("results.csv"), &ResultRow::HEADER, report.rows.iter().map(ResultRow::record))?;
    write_csv(&dir.join("failures.csv"), &FailureRow::HEADER, report.failures.iter().map(FailureRow::record))?;
    if !report.dc_fits.is_empty() {
        write_csv(&dir.join("dc_fits.csv"), &DcFitRow::HEADER, report.dc_fits.iter().map(DcFitRow::record))?;
    }
    match mode {
        Mode::Cv => {
            for (i, (sc, rows)) in report.curves.iter().enumerate() {
                let name = format!("cv_curves_{}.csv", sc.label());
                write_csv(&dir.join(name), &CurveRow::HEADER, rows.iter().map(CurveRow::record))?;
                if i == 0 {
                    write_csv(&dir.join("cv_curves.csv"), &CurveRow::HEADER, rows.iter().map(CurveRow::record))?;
                }
            }
        }
        Mode::Bench => write_csv(&dir.join("bench.csv"), &BenchRow::HEADER, report.bench.iter().map(BenchRow::record))?,
        Mode::Fixed => {}
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::NRule;

    fn tiny() -> RunConfig {
        RunConfig {
            kinds: vec![Kind::Chain],
            p_list: vec![8],
            n_rule: NRule::Explicit(vec![40]),
            n_edges: 6,
            replicates: 2,
            methods: vec![Method::Dc, Method::Glasso],
            grid_points: 5,
            targets: vec![4, 6],
            record_timing: false,
            bench_runs: 2,
            ..RunConfig::default()
        }
    }

    #[test]
    fn cv_rows_per_cell() {
        let r = run_cv(&tiny(), None);
        assert_eq!(r.rows.len(), 4);
        assert_eq!((r.cells, r.failed_cells), (4, 0));
        assert_eq!(r.dc_fits.len(), 2);
        assert_eq!(r.curves.len(), 1);
        assert_eq!(r.curves[0].1.len(), 10);
        assert!(r.rows.iter().all(|row| row.tp + row.fn_ == 6 && row.fit_seconds == 0.0));
    }

    #[test]
    fn fixed_rows_per_target() {
        let r = run_fixed(&tiny(), None);
        assert_eq!(r.rows.len(), 8);
        let dc: Vec<f64> = r.rows.iter().filter(|row| row.method == Method::Dc).map(|row| row.param).collect();
        assert_eq!(dc, [16.0, 20.0, 16.0, 20.0]);
    }

    #[test]
    fn parallel_matches_sequential() {
        let one = RunConfig { parallelism: 1, ..tiny() };
        let three = RunConfig { parallelism: 3, ..tiny() };
        assert_eq!(run(&one, Mode::Fixed, None).unwrap(), run(&three, Mode::Fixed, None).unwrap());
    }

    #[test]
    fn bench_parameters() {
        let s = SymMatrix::from_rows(&[[1.0, 0.1, -0.4], [0.1, 1.0, 0.3], [-0.4, 0.3, 1.0]]).unwrap();
        assert_eq!(median_abs_offdiag(&s), 0.3);
        assert_eq!(bench_param(Method::Dc, &s), 5.0);
        assert_eq!(bench_param(Method::Dc, &SymMatrix::identity(200)), 200.0 + 2.0 * 9950.0);
        let r = run_bench(&tiny(), None);
        assert_eq!(r.bench.len(), 2);
        assert!(r.bench.iter().all(|b| b.seconds_mean > 0.0));
    }
}
