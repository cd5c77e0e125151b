//! Polynomial trend formulas over the coordinates: terms `1`, `x`, `y`, `x*y`.

use std::fmt;
use std::str::FromStr;

use rapidkrig_core::{Matrix, Point};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    Intercept,
    X,
    Y,
    XY,
}

impl Term {
    fn eval(self, p: &Point<f64>) -> f64 {
        match self {
            Term::Intercept => 1.0,
            Term::X => p.x,
            Term::Y => p.y,
            Term::XY => p.x * p.y,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Term::Intercept => "1",
            Term::X => "x",
            Term::Y => "y",
            Term::XY => "x*y",
        }
    }
}

/// A trend formula such as `1+x+y+x*y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    terms: Vec<Term>,
}

impl Formula {
    pub fn intercept() -> Self {
        Self {
            terms: vec![Term::Intercept],
        }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Design matrix with one row per point.
    pub fn design(&self, points: &[Point<f64>]) -> Matrix<f64> {
        Matrix::from_fn(points.len(), self.terms.len(), |i, j| self.terms[j].eval(&points[i]))
    }
}

impl FromStr for Formula {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut terms = Vec::new();
        for raw in s.split('+') {
            let t: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
            let term = match t.as_str() {
                "1" => Term::Intercept,
                "x" => Term::X,
                "y" => Term::Y,
                "x*y" | "y*x" | "x:y" => Term::XY,
                other => {
                    return Err(CliError::Domain(format!(
                        "unknown covariate term '{other}'; use 1, x, y or x*y"
                    )))
                }
            };
            if terms.contains(&term) {
                return Err(CliError::Domain(format!("covariate term '{}' repeated", term.name())));
            }
            terms.push(term);
        }
        Ok(Self { terms })
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.terms.iter().map(|t| t.name()).collect();
        f.write_str(&names.join("+"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_design() {
        let f: Formula = "1 + x + y + x*y".parse().unwrap();
        assert_eq!(f.to_string(), "1+x+y+x*y");
        let m = f.design(&[Point::new(2.0, 3.0)]);
        assert_eq!(m.row(0), &[1.0, 2.0, 3.0, 6.0]);
        assert!("1+z".parse::<Formula>().is_err());
        assert!("x+x".parse::<Formula>().is_err());
    }
}
