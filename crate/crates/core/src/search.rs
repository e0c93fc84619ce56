//! Random hyperparameter search.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Int(i) => Some(i as f64),
            ParamValue::Float(f) => Some(f),
            _ => None,
        }
    }
}

impl std::fmt::Display for ParamValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

/// Where one hyperparameter is drawn from. Ranges are closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ParamDomain {
    Choice(Vec<ParamValue>),
    Uniform([f64; 2]),
    LogUniform([f64; 2]),
    IntRange([i64; 2]),
}

impl ParamDomain {
    fn validate(&self, name: &str) -> Result<()> {
        let bad = |why: &str| Err(Error::invalid(format!("search parameter `{name}`: {why}")));
        match self {
            ParamDomain::Choice(v) if v.is_empty() => bad("empty choice list"),
            ParamDomain::Uniform([lo, hi]) if !(lo.is_finite() && hi.is_finite() && lo <= hi) => {
                bad("uniform bounds must be finite with low ≤ high")
            }
            ParamDomain::LogUniform([lo, hi]) if !(*lo > 0.0 && hi.is_finite() && lo <= hi) => {
                bad("log-uniform bounds must satisfy 0 < low ≤ high")
            }
            ParamDomain::IntRange([lo, hi]) if lo > hi => bad("int range needs low ≤ high"),
            _ => Ok(()),
        }
    }

    fn sample(&self, rng: &mut crate::rng::Rng) -> ParamValue {
        match self {
            ParamDomain::Choice(v) => v[rng.gen_range(0..v.len())].clone(),
            ParamDomain::Uniform([lo, hi]) => ParamValue::Float(lo + (hi - lo) * rng.gen::<f64>()),
            ParamDomain::LogUniform([lo, hi]) => {
                let (a, b) = (lo.ln(), hi.ln());
                ParamValue::Float((a + (b - a) * rng.gen::<f64>()).exp())
            }
            ParamDomain::IntRange([lo, hi]) => ParamValue::Int(rng.gen_range(*lo..=*hi)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub params: BTreeMap<String, ParamDomain>,
    pub budget: usize,
    /// Metric key maximized across trials.
    pub objective: String,
    #[serde(default)]
    pub seed: u64,
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::invalid("search budget must be at least 1"));
        }
        if self.objective.is_empty() {
            return Err(Error::invalid("search objective must name a metric"));
        }
        self.params.iter().try_for_each(|(k, d)| d.validate(k))
    }

    /// Parameters of trial `index`, drawn from its own derived stream.
    pub fn draw(&self, index: usize) -> BTreeMap<String, ParamValue> {
        let mut rng = seeded(derive_seed(self.seed, index as u64));
        self.params
            .iter()
            .map(|(k, d)| (k.clone(), d.sample(&mut rng)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub params: BTreeMap<String, ParamValue>,
    pub objective: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: usize,
    pub trials: Vec<Trial>,
}

impl SearchResult {
    pub fn best_trial(&self) -> &Trial {
        &self.trials[self.best]
    }
}

/// Run `budget` independent draws. A trial whose runner fails (or returns
/// a non-finite objective) is logged and skipped; the highest objective
/// wins, earliest trial on ties. Fails only if every trial fails.
pub fn random_search<F>(space: &SearchSpace, mut runner: F) -> Result<SearchResult>
where
    F: FnMut(&BTreeMap<String, ParamValue>) -> Result<f64>,
{
    space.validate()?;
    let mut trials = Vec::with_capacity(space.budget);
    let mut best: Option<(usize, f64)> = None;
    for index in 0..space.budget {
        let params = space.draw(index);
        let (objective, error) = match runner(&params) {
            Ok(v) if v.is_finite() => (Some(v), None),
            Ok(v) => (None, Some(format!("non-finite objective {v}"))),
            Err(e) => (None, Some(e.to_string())),
        };
        if let Some(v) = objective {
            if best.map_or(true, |(_, b)| v > b) {
                best = Some((index, v));
            }
        }
        trials.push(Trial {
            index,
            params,
            objective,
            error,
        });
    }
    let (best, _) = best.ok_or_else(|| Error::invalid("every search trial failed"))?;
    Ok(SearchResult { best, trials })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(budget: usize) -> SearchSpace {
        let mut params = BTreeMap::new();
        params.insert(
            "learning_rate".to_string(),
            ParamDomain::Choice(vec![ParamValue::Float(0.0), ParamValue::Float(0.1)]),
        );
        params.insert("dim".to_string(), ParamDomain::IntRange([4, 8]));
        SearchSpace {
            params,
            budget,
            objective: "score".into(),
            seed: 3,
        }
    }

    #[test]
    fn budget_one_returns_the_draw() {
        let r = random_search(&space(1), |_| Ok(0.2)).unwrap();
        assert_eq!(r.best, 0);
        assert_eq!(r.trials.len(), 1);
        assert_eq!(r.trials[0].params, space(1).draw(0));
    }

    #[test]
    fn log_length_and_determinism() {
        let run = || random_search(&space(9), |p| Ok(p["learning_rate"].as_f64().unwrap())).unwrap();
        let r = run();
        assert_eq!(r.trials.len(), 9);
        assert_eq!(r, run());
        assert_eq!(r.best_trial().params["learning_rate"], ParamValue::Float(0.1));
        for t in &r.trials {
            let d = t.params["dim"].as_f64().unwrap();
            assert!((4.0..=8.0).contains(&d));
        }
    }

    #[test]
    fn failures_are_logged() {
        let mut calls = 0;
        let r = random_search(&space(4), |_| {
            calls += 1;
            if calls % 2 == 0 {
                Err(Error::invalid("boom"))
            } else {
                Ok(1.0)
            }
        });
        let r = r.unwrap();
        assert_eq!(r.best, 0);
        assert_eq!(r.trials[1].error.as_deref(), Some("invalid argument: boom"));
        assert!(random_search(&space(2), |_| Err(Error::invalid("no"))).is_err());
        assert!(random_search(&space(0), |_| Ok(1.0)).is_err());
    }

    #[test]
    fn domains_parse_from_toml_shapes() {
        let json = r#"{"a": {"log_uniform": [0.001, 0.1]}, "b": {"choice": ["x", 2, 0.5, true]}}"#;
        let m: BTreeMap<String, ParamDomain> = serde_json::from_str(json).unwrap();
        assert_eq!(m["a"], ParamDomain::LogUniform([0.001, 0.1]));
        assert_eq!(
            m["b"],
            ParamDomain::Choice(vec![
                ParamValue::Text("x".into()),
                ParamValue::Int(2),
                ParamValue::Float(0.5),
                ParamValue::Bool(true)
            ])
        );
    }
}
