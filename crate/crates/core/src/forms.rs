//! Differential forms on coordinate charts with expression coefficients.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr};

/// A 1-form `Σ γ_i dy^i` over named base coordinates. When built from a
/// potential `S`, the components are the symbolic partials of `S` and the
/// potential is kept alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct OneForm {
    vars: Vec<String>,
    components: Vec<Expr>,
    potential: Option<Expr>,
}

impl OneForm {
    pub fn new(vars: Vec<String>, components: Vec<Expr>) -> Result<Self> {
        if vars.len() != components.len() {
            return Err(Error::Dimension {
                what: "one-form components",
                expected: vars.len(),
                got: components.len(),
            });
        }
        Ok(OneForm {
            vars,
            components,
            potential: None,
        })
    }

    /// Parses the components from text.
    pub fn parse<S: AsRef<str>>(vars: &[&str], components: &[S]) -> Result<Self> {
        let comps = components
            .iter()
            .map(|c| crate::expr::parse(c.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(vars.iter().map(|s| s.to_string()).collect(), comps)
    }

    /// `dS`.
    pub fn exact(vars: Vec<String>, potential: Expr) -> Self {
        let components = potential.gradient(&vars);
        OneForm {
            vars,
            components,
            potential: Some(potential),
        }
    }

    pub fn zero(vars: Vec<String>) -> Self {
        let components = vec![Expr::zero(); vars.len()];
        OneForm {
            vars,
            components,
            potential: Some(Expr::zero()),
        }
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn potential(&self) -> Option<&Expr> {
        self.potential.as_ref()
    }

    pub(crate) fn with_potential(mut self, potential: Option<Expr>) -> Self {
        self.potential = potential;
        self
    }

    pub fn bind(&self, point: &[f64]) -> Result<Bindings> {
        if point.len() != self.dim() {
            return Err(Error::Dimension {
                what: "base point",
                expected: self.dim(),
                got: point.len(),
            });
        }
        let mut b = Bindings::new();
        b.assign(&self.vars, point);
        Ok(b)
    }

    /// Components at a base point.
    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>> {
        let b = self.bind(point)?;
        self.eval_with(&b)
    }

    pub fn eval_with(&self, b: &Bindings) -> Result<Vec<f64>> {
        Ok(self
            .components
            .iter()
            .map(|c| c.eval(b))
            .collect::<Result<Vec<_>, _>>()?)
    }

    /// Coefficients `∂_i γ_j − ∂_j γ_i` of `dγ`, as an antisymmetric matrix.
    pub fn exterior_derivative(&self) -> TwoForm {
        let m = self.dim();
        let mut upper = Vec::new();
        for i in 0..m {
            for j in (i + 1)..m {
                let c = self.components[j].differentiate(&self.vars[i])
                    - self.components[i].differentiate(&self.vars[j]);
                upper.push(c.simplify());
            }
        }
        TwoForm::from_upper(self.vars.clone(), upper)
    }

    /// Sum of two forms over the same coordinates.
    pub fn add(&self, other: &OneForm) -> Result<OneForm> {
        if self.vars != other.vars {
            return Err(Error::Invalid(
                "adding one-forms over different charts".into(),
            ));
        }
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| (a.clone() + b.clone()).simplify())
            .collect();
        let potential = match (&self.potential, &other.potential) {
            (Some(a), Some(b)) => Some((a.clone() + b.clone()).simplify()),
            _ => None,
        };
        Ok(OneForm {
            vars: self.vars.clone(),
            components,
            potential,
        })
    }

    /// Renames/re-expresses variables inside the coefficients.
    pub fn substitute(&self, map: &HashMap<String, Expr>) -> Vec<Expr> {
        self.components
            .iter()
            .map(|c| c.substitute(map).simplify())
            .collect()
    }
}

/// A 2-form `Σ_{i<j} β_ij dy^i ∧ dy^j` stored as a full antisymmetric matrix;
/// the lower triangle is the negation of the upper one.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoForm {
    vars: Vec<String>,
    matrix: Vec<Vec<Expr>>,
}

impl TwoForm {
    /// Builds the matrix from the strictly upper triangle listed row by row.
    #[allow(clippy::needless_range_loop)]
    pub fn from_upper(vars: Vec<String>, upper: Vec<Expr>) -> Self {
        let m = vars.len();
        let mut matrix = vec![vec![Expr::zero(); m]; m];
        let mut it = upper.into_iter();
        for i in 0..m {
            for j in (i + 1)..m {
                let c = it.next().unwrap_or_else(Expr::zero);
                matrix[j][i] = (-c.clone()).simplify();
                matrix[i][j] = c;
            }
        }
        TwoForm { vars, matrix }
    }

    pub fn zero(vars: Vec<String>) -> Self {
        let m = vars.len();
        TwoForm {
            vars,
            matrix: vec![vec![Expr::zero(); m]; m],
        }
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.matrix[i][j]
    }

    pub fn matrix(&self) -> &[Vec<Expr>] {
        &self.matrix
    }

    /// True when every coefficient simplified to the literal zero.
    pub fn is_identically_zero(&self) -> bool {
        self.matrix.iter().flatten().all(Expr::is_zero)
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<Vec<f64>>> {
        if point.len() != self.dim() {
            return Err(Error::Dimension {
                what: "two-form base point",
                expected: self.dim(),
                got: point.len(),
            });
        }
        let mut b = Bindings::new();
        b.assign(&self.vars, point);
        let mut out = vec![vec![0.0; self.dim()]; self.dim()];
        for (i, row) in self.matrix.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                out[i][j] = c.eval(&b)?;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exterior_derivative_of_rotation_form() {
        let g = OneForm::parse(&["y1", "y2"], &["-y2", "y1"]).unwrap();
        let d = g.exterior_derivative();
        assert_eq!(d.entry(0, 1), &Expr::Const(2.0));
        assert_eq!(d.entry(1, 0), &Expr::Const(-2.0));
    }

    #[test]
    fn exact_form_is_closed_symbolically() {
        let s = crate::expr::parse("x^2*y + sin(x*y)").unwrap();
        let g = OneForm::exact(vec!["x".into(), "y".into()], s);
        let d = g.exterior_derivative().eval(&[0.4, -1.3]).unwrap();
        assert!(d[0][1].abs() < 1e-14);
    }
}
