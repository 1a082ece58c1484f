//! Experiment configuration, read from JSON.

use std::path::PathBuf;
use std::str::FromStr;

use dcggm_core::{Kind, Method};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{AppError, Result};

/// How sample sizes are derived from `p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NRule {
    /// `n = round(r p)` for each ratio.
    Ratios(Vec<f64>),
    Explicit(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(with = "names")]
    pub kinds: Vec<Kind>,
    pub p_list: Vec<usize>,
    pub n_rule: NRule,
    pub n_edges: usize,
    pub replicates: usize,
    #[serde(with = "names")]
    pub methods: Vec<Method>,
    pub grid_points: usize,
    pub folds: usize,
    pub targets: Vec<usize>,
    pub master_seed: u64,
    /// Worker threads; 0 lets the pool decide. `DCGGM_THREADS` overrides.
    pub parallelism: usize,
    pub output_dir: PathBuf,
    /// With `false`, `fit_seconds` is written as 0 so reruns are byte-identical.
    pub record_timing: bool,
    /// Timed repetitions per bench cell.
    pub bench_runs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kinds: vec![Kind::Random, Kind::Chain],
            p_list: vec![50, 100, 200, 400],
            n_rule: NRule::Ratios(vec![0.5, 1.0, 2.0]),
            n_edges: 30,
            replicates: 30,
            methods: Method::ALL.to_vec(),
            grid_points: 100,
            folds: 5,
            targets: vec![20, 30, 40],
            master_seed: 1,
            parallelism: 0,
            output_dir: PathBuf::from("out"),
            record_timing: true,
            bench_runs: 10,
        }
    }
}

impl RunConfig {
    pub fn sample_sizes(&self, p: usize) -> Vec<usize> {
        match &self.n_rule {
            NRule::Ratios(r) => r.iter().map(|r| (r * p as f64).round() as usize).collect(),
            NRule::Explicit(n) => n.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("kinds", self.kinds.is_empty()),
            ("p_list", self.p_list.is_empty()),
            ("methods", self.methods.is_empty()),
            ("targets", self.targets.is_empty()),
            (
                "n_rule",
                match &self.n_rule {
                    NRule::Ratios(r) => r.is_empty(),
                    NRule::Explicit(n) => n.is_empty(),
                },
            ),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(AppError::Usage(format!("config field {name} must be nonempty")));
        }
        if self.replicates == 0 || self.grid_points == 0 || self.bench_runs == 0 {
            return Err(AppError::Usage("replicates, grid_points and bench_runs must be positive".into()));
        }
        if self.folds < 2 {
            return Err(AppError::Usage("folds must be at least 2".into()));
        }
        if let NRule::Ratios(r) = &self.n_rule {
            if r.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
                return Err(AppError::Usage("sample-size ratios must be positive".into()));
            }
        }
        for &p in &self.p_list {
            if p < 2 {
                return Err(AppError::Usage(format!("p = {p} is too small")));
            }
            if let Some(&n) = self.sample_sizes(p).iter().find(|&&n| n < self.folds) {
                return Err(AppError::Usage(format!("p = {p}: n = {n} is smaller than the fold count")));
            }
            for kind in &self.kinds {
                let max = kind.max_edges(p);
                if self.n_edges > max {
                    return Err(AppError::Usage(format!(
                        "{} graphs with p = {p} hold at most {max} edges, n_edges = {}",
                        kind.as_str(),
                        self.n_edges
                    )));
                }
            }
            if let Some(t) = self.targets.iter().find(|&&t| t > p * (p - 1) / 2) {
                return Err(AppError::Usage(format!("target {t} exceeds the {} pairs of p = {p}", p * (p - 1) / 2)));
            }
        }
        Ok(())
    }

    /// Thread count after applying `DCGGM_THREADS`.
    pub fn threads(&self) -> Result<usize> {
        match std::env::var("DCGGM_THREADS") {
            Ok(v) => v.trim().parse().map_err(|_| AppError::Usage(format!("DCGGM_THREADS must be an integer, got {v:?}"))),
            Err(_) => Ok(self.parallelism),
        }
    }
}

trait Named: FromStr + Copy {
    fn name(&self) -> &'static str;
}

impl Named for Kind {
    fn name(&self) -> &'static str {
        self.as_str()
    }
}

impl Named for Method {
    fn name(&self) -> &'static str {
        self.as_str()
    }
}

/// Lists of enums stored by name.
mod names {
    use super::*;

    pub fn serialize<S: Serializer, T: Named>(values: &[T], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(values.iter().map(Named::name))
    }

    pub fn deserialize<'de, D: Deserializer<'de>, T: Named>(d: D) -> Result<Vec<T>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| s.parse().map_err(|_| serde::de::Error::custom(format!("unknown name {s:?}"))))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let cfg = RunConfig { n_rule: NRule::Explicit(vec![25, 100]), ..RunConfig::default() };
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains(r#""kinds":["random","chain"]"#));
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_json_takes_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"p_list": [20], "methods": ["dc"], "n_rule": {"ratios": [2.0]}}"#).unwrap();
        assert_eq!(cfg.replicates, 30);
        assert_eq!(cfg.methods, [Method::Dc]);
        assert_eq!(cfg.sample_sizes(20), [40]);
        assert!(serde_json::from_str::<RunConfig>(r#"{"methods": ["lasso"]}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"typo": 1}"#).is_err());
    }

    #[test]
    fn validation() {
        assert!(RunConfig::default().validate().is_ok());
        let bad = RunConfig { kinds: vec![], ..RunConfig::default() };
        assert!(bad.validate().is_err());
        let bad = RunConfig { p_list: vec![5], kinds: vec![Kind::Chain], n_rule: NRule::Explicit(vec![50]), targets: vec![3], ..RunConfig::default() };
        assert!(bad.validate().unwrap_err().to_string().contains("at most 7 edges"));
    }
}
