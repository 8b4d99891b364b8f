//! TOML problem files.
//!
//! ```toml
//! n = 2
//! f = "y/(1+x^2)"
//! g = "x"
//! S = [[-inf, inf]]   # open intervals; default: all of R
//! U = [-1.0, 1.0]     # default: all of R
//! R = 1.0             # default: 1
//!
//! [sweep]             # any SweepConfig field
//! radius_steps = 8
//!
//! [tolerances]        # any TransportOptions field
//! tol = 1e-8
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use bifurc::flow::TransportOptions;
use bifurc::{Expression, Interval, IntervalSet, ProblemPair, SweepConfig};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    pub f: String,
    #[serde(default)]
    pub g: Option<String>,
    #[serde(rename = "S", default)]
    pub s_set: Option<IntervalSet>,
    #[serde(rename = "U", default)]
    pub window: Option<Interval>,
    #[serde(rename = "R", default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub tolerances: Option<TransportOptions>,
}

/// A parsed problem file together with its raw bytes.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub path: PathBuf,
    pub bytes: Vec<u8>,
    pub file: ProblemFile,
}

impl LoadedProblem {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::Problem {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let file = ProblemFile::parse(&text).map_err(|message| CliError::Problem {
            path: path.to_path_buf(),
            message,
        })?;
        Ok(Self {
            path: path.to_path_buf(),
            bytes,
            file,
        })
    }
}

impl ProblemFile {
    /// Parses and validates; errors carry the TOML line and column.
    pub fn parse(text: &str) -> Result<Self, String> {
        let file: ProblemFile = toml::from_str(text).map_err(|e| e.to_string())?;
        file.validate()?;
        Ok(file)
    }

    fn validate(&self) -> Result<(), String> {
        if self.n == 0 {
            return Err("n must be at least 1".into());
        }
        self.f_expr().map_err(|e| format!("f: {e}"))?;
        if let Some(g) = &self.g {
            Expression::parse(g, self.n).map_err(|e| format!("g: {e}"))?;
        }
        if let Some(r) = self.radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(format!("R must be positive, got {r}"));
            }
        }
        if let Some(sweep) = &self.sweep {
            sweep.validate().map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    pub fn f_expr(&self) -> Result<Expression, bifurc::ExprError> {
        Expression::parse(&self.f, self.n)
    }

    /// The pair `(f, g)`; `what` names the command that needs `g`.
    pub fn pair(&self, what: &str) -> Result<ProblemPair, CliError> {
        let g = self
            .g
            .as_deref()
            .ok_or_else(|| CliError::Usage(format!("{what} needs an auxiliary function g")))?;
        Ok(ProblemPair::parse(&self.f, g, self.n)?)
    }

    /// `(f, g)` when `g` is given; otherwise `f` with `g = 0`, for ambient
    /// transports that never leave the ball where the field is `∇f`.
    pub fn pair_or_plain(&self) -> Result<(ProblemPair, bool), CliError> {
        match &self.g {
            Some(_) => Ok((self.pair("")?, true)),
            None => Ok((ProblemPair::parse(&self.f, "0", self.n)?, false)),
        }
    }

    pub fn s_set(&self) -> IntervalSet {
        self.s_set.clone().unwrap_or_else(IntervalSet::real_line)
    }

    pub fn window(&self) -> Interval {
        self.window.unwrap_or(Interval::REAL_LINE)
    }

    pub fn radius(&self) -> f64 {
        self.radius.unwrap_or(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_apply() {
        let p = ProblemFile::parse("n = 2\nf = \"y/(1+x^2)\"\ng = \"x\"\n").unwrap();
        assert_eq!(p.s_set(), IntervalSet::real_line());
        assert_eq!(p.window(), Interval::REAL_LINE);
        assert_eq!(p.radius(), 1.0);
        p.pair("scan").unwrap();
    }

    #[test]
    fn full_file_parses() {
        let text = r#"
n = 3
f = "x - 3*x^5*y^2 + 2*x^7*y^3 + y*z"
g = "y"
S = [[-inf, 0.0], [0.5, inf]]
U = [-2.0, 2.0]
R = 2.5

[sweep]
radius_steps = 4
directions = 64

[tolerances]
tol = 1e-6

[tolerances.controls]
rtol = 1e-10
"#;
        let p = ProblemFile::parse(text).unwrap();
        assert_eq!(p.s_set().0.len(), 2);
        assert!(!p.s_set().contains(0.25));
        assert!(p.window().contains(1.5) && !p.window().contains(2.5));
        let sweep = p.sweep.unwrap();
        assert_eq!(
            (sweep.radius_steps, sweep.directions, sweep.ratio),
            (4, 64, 2.0)
        );
        let tol = p.tolerances.unwrap();
        assert_eq!((tol.tol, tol.controls.rtol), (1e-6, 1e-10));
        assert_eq!(tol.controls.atol, TransportOptions::default().controls.atol);
    }

    #[test]
    fn errors_are_located() {
        let err = ProblemFile::parse("n = 2\nf = \"x\"\nbogus = 1\n").unwrap_err();
        assert!(err.contains("line 3"), "{err}");
        let err = ProblemFile::parse("n = 2\nf = \"x +* y\"\n").unwrap_err();
        assert!(err.starts_with("f:"), "{err}");
        let err = ProblemFile::parse("n = 2\nf = \"x\"\nR = -1\n").unwrap_err();
        assert!(err.contains("R must be positive"));
    }

    #[test]
    fn missing_g_is_reported() {
        let p = ProblemFile::parse("n = 2\nf = \"x\"\n").unwrap();
        assert!(matches!(p.pair("gs scans"), Err(CliError::Usage(_))));
        assert!(!p.pair_or_plain().unwrap().1);
    }
}
