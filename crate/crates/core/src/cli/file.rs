//! The JSON problem file.

use serde::Deserialize;

use crate::catalog::examples;
use crate::error::{Error, Result};
use crate::estimators::GridSchedule;
use crate::growth::Budgets;
use crate::polyhedral::PolyhedralFn;
use crate::problem::{CompositeProblem, Outer};
use crate::smooth::{FdSteps, SmoothMap, SmoothOracle};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    /// Optional; checked against `F` when both are present.
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub phi: Option<PhiSpec>,
    /// Components of `F` as expressions; the identity when absent.
    #[serde(rename = "F", default)]
    pub f: Option<Vec<String>>,
    pub g: PolyhedralFn,
    pub x_bar: Vec<f64>,
    #[serde(default)]
    pub options: Options,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum PhiSpec {
    Expr(String),
    Catalog(CatalogRef),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogRef {
    pub catalog: String,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    pub seed: u64,
    /// Subgradient of `f` at `x̄` for commands that take one (zero otherwise).
    pub v_bar: Option<Vec<f64>>,
    pub schedule: GridSchedule,
    pub budgets: Budgets,
    pub fd: FdSteps,
}

/// A parsed file with the effective seed applied everywhere.
pub struct Loaded {
    pub problem: CompositeProblem,
    pub options: Options,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn catalog_phi(id: &str) -> Result<SmoothOracle> {
        match id {
            "example_3_2" => Ok(examples::g32_oracle()),
            "example_3_3" => Ok(examples::f33_oracle()),
            "example_4_6" => Ok(examples::phi46_oracle()),
            _ => Err(Error::Schema(format!("unknown catalog phi {id:?}"))),
        }
    }

    pub fn build(self, seed_override: Option<u64>) -> Result<Loaded> {
        let n = self.n;
        let phi = match &self.phi {
            None => None,
            Some(PhiSpec::Expr(s)) => Some(SmoothOracle::parse(s, n)?.with_fd(self.options.fd)),
            Some(PhiSpec::Catalog(c)) => Some(Self::catalog_phi(&c.catalog)?),
        };
        let map = match &self.f {
            Some(srcs) => {
                let comps = srcs
                    .iter()
                    .map(|s| SmoothOracle::parse(s, n).map(|o| o.with_fd(self.options.fd)))
                    .collect::<Result<Vec<_>>>()?;
                SmoothMap::new(n, comps)?
            }
            None => SmoothMap::identity(n),
        };
        if let Some(m) = self.m {
            if m != map.dim_out() {
                return Err(Error::Schema(format!("m = {m} but F has {} components", map.dim_out())));
            }
        }
        let mut options = self.options;
        let seed = seed_override.unwrap_or(options.seed);
        options.seed = seed;
        options.schedule.seed = seed;
        options.budgets.seed = seed;
        options.schedule.validate()?;
        let v_bar = options.v_bar.clone().unwrap_or_else(|| vec![0.0; n]);
        let problem = CompositeProblem::with_subgradient(phi, map, Outer::Polyhedral(self.g), self.x_bar, v_bar)?;
        Ok(Loaded { problem, options })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX: &str = r#"{
        "n": 1, "m": 2,
        "phi": {"catalog": "example_4_6"},
        "F": ["-x", "-x^3"],
        "g": {"variant": "indicator", "set": {"A": [[1, 0], [0, 1]], "b": [0, 0]}},
        "x_bar": [0]
    }"#;

    #[test]
    fn parses_example() {
        let l = ProblemFile::from_json(EX).unwrap().build(Some(5)).unwrap();
        assert_eq!(l.problem.m(), 2);
        assert_eq!(l.options.schedule.seed, 5);
    }

    #[test]
    fn unknown_keys_carry_position() {
        let bad = EX.replace("\"x_bar\"", "\"xbar\": 1, \"x_bar\"");
        let err = ProblemFile::from_json(&bad).unwrap_err().to_string();
        assert!(err.contains("unknown field") && err.contains("line"), "{err}");
        let bad = EX.replace("\"n\": 1,", "\"n\": 1, \"options\": {\"sead\": 3},");
        assert!(ProblemFile::from_json(&bad).is_err());
    }

    #[test]
    fn m_mismatch_is_rejected() {
        let bad = EX.replace("\"m\": 2", "\"m\": 3");
        assert!(matches!(ProblemFile::from_json(&bad).unwrap().build(None), Err(Error::Schema(_))));
    }
}
