//! SCAD and adaptive-lasso estimators, both reduced to weighted graphical
//! lasso fits.

use crate::error::{Error, Result};
use crate::glasso::{glasso_fit, neg_log_likelihood, GlassoOptions, GlassoSolution, PenaltySpec};
use crate::matrix::SymMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScadParams {
    pub lambda: f64,
    pub a: f64,
}

impl ScadParams {
    pub fn new(lambda: f64) -> Self {
        ScadParams { lambda, a: 3.7 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidParameter("SCAD lambda must be finite and nonnegative"));
        }
        if !(self.a > 2.0) {
            return Err(Error::InvalidParameter("SCAD parameter a must exceed 2"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveParams {
    pub lambda: f64,
    pub gamma: f64,
    /// Weights are capped at `lambda * weight_cap`; a zero pilot entry gets the cap.
    pub weight_cap: f64,
}

impl AdaptiveParams {
    pub fn new(lambda: f64) -> Self {
        AdaptiveParams { lambda, gamma: 0.5, weight_cap: 1e6 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidParameter("adaptive lambda must be finite and nonnegative"));
        }
        if !(self.gamma > 0.0) || !(self.weight_cap > 0.0) {
            return Err(Error::InvalidParameter("adaptive gamma and weight cap must be positive"));
        }
        Ok(())
    }
}

/// The SCAD penalty: linear up to `lambda`, quadratic blend up to
/// `a lambda`, constant beyond.
pub fn scad_value(x: f64, params: &ScadParams) -> f64 {
    let (l, a, ax) = (params.lambda, params.a, x.abs());
    if ax <= l {
        l * ax
    } else if ax <= a * l {
        (a * l * ax - 0.5 * (x * x + l * l)) / (a - 1.0)
    } else {
        0.5 * (a + 1.0) * l * l
    }
}

/// Derivative of [`scad_value`] in `|x|`, the weight of a local linear
/// approximation around `x`.
pub fn scad_weight(x: f64, params: &ScadParams) -> f64 {
    let (l, a, ax) = (params.lambda, params.a, x.abs());
    if ax <= l {
        l
    } else {
        (a * l - ax).max(0.0) / (a - 1.0)
    }
}

/// `-log|O| + tr(O S) + sum_jk SCAD(o_jk)`.
pub fn scad_objective(omega: &SymMatrix, s: &SymMatrix, params: &ScadParams) -> Result<f64> {
    let pen: f64 = omega.as_slice().iter().map(|&o| scad_value(o, params)).sum();
    Ok(neg_log_likelihood(omega, s)? + pen)
}

/// SCAD by local linear approximation: a plain graphical lasso at `lambda`,
/// then `lla_rounds` refits with weights `scad_weight(o_jk)` taken from the
/// previous fit.
pub fn scad_fit(s: &SymMatrix, params: &ScadParams, opts: &GlassoOptions, lla_rounds: usize) -> Result<GlassoSolution> {
    Ok(scad_path(s, params, opts, lla_rounds)?.pop().expect("path holds the initial fit"))
}

/// Every LLA iterate of [`scad_fit`], starting with the plain lasso fit.
pub fn scad_path(
    s: &SymMatrix,
    params: &ScadParams,
    opts: &GlassoOptions,
    lla_rounds: usize,
) -> Result<alloc::vec::Vec<GlassoSolution>> {
    params.validate()?;
    let mut path = alloc::vec![glasso_fit(s, &PenaltySpec::Scalar(params.lambda), opts)?];
    for _ in 0..lla_rounds {
        let prev = &path[path.len() - 1].omega;
        let weights = SymMatrix::from_fn(s.dim(), |j, k| scad_weight(prev.get(j, k), params));
        path.push(glasso_fit(s, &PenaltySpec::Matrix(weights), opts)?);
    }
    Ok(path)
}

/// `lambda / |pilot_jk|^gamma`, capped at `lambda * weight_cap`.
pub fn adaptive_weights(pilot: &SymMatrix, params: &AdaptiveParams) -> SymMatrix {
    let cap = params.lambda * params.weight_cap;
    SymMatrix::from_fn(pilot.dim(), |j, k| {
        let mag = libm::pow(pilot.get(j, k).abs(), params.gamma);
        if mag == 0.0 {
            cap
        } else {
            (params.lambda / mag).min(cap)
        }
    })
}

/// Pilot penalty for the adaptive lasso, as a fraction of `max_{j<k} |s_jk|`.
pub const PILOT_FRACTION: f64 = 0.1;

/// Adaptive lasso: a pilot graphical lasso at `0.1 max|s_jk|` supplies the
/// weights for the final weighted fit.
pub fn adaptive_fit(s: &SymMatrix, params: &AdaptiveParams, opts: &GlassoOptions) -> Result<GlassoSolution> {
    params.validate()?;
    let pilot = glasso_fit(s, &PenaltySpec::Scalar(PILOT_FRACTION * s.max_abs_offdiag()), opts)?;
    adaptive_fit_with_pilot(s, &pilot.omega, params, opts)
}

pub fn adaptive_fit_with_pilot(
    s: &SymMatrix,
    pilot: &SymMatrix,
    params: &AdaptiveParams,
    opts: &GlassoOptions,
) -> Result<GlassoSolution> {
    params.validate()?;
    s.check_dim(pilot)?;
    glasso_fit(s, &PenaltySpec::Matrix(adaptive_weights(pilot, params)), opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scad_value_branches() {
        let p = ScadParams::new(1.0);
        assert_eq!(scad_value(0.5, &p), 0.5);
        assert!((scad_value(2.0, &p) - 4.9 / 2.7).abs() < 1e-12);
        assert!((scad_value(10.0, &p) - 2.35).abs() < 1e-12);
        assert_eq!(scad_value(-2.0, &p), scad_value(2.0, &p));
    }

    #[test]
    fn scad_value_continuous_at_knots() {
        for lambda in [0.1, 0.5, 1.0, 3.0] {
            let p = ScadParams::new(lambda);
            for knot in [lambda, p.a * lambda] {
                // one-sided limits: step small enough that slope * step stays under 1e-12
                let h = 1e-14;
                let below = scad_value(knot - h, &p);
                let above = scad_value(knot + h, &p);
                assert!((below - above).abs() < 1e-12, "lambda {lambda} knot {knot}");
            }
        }
    }

    #[test]
    fn scad_weight_examples() {
        let p = ScadParams::new(1.0);
        assert_eq!(scad_weight(0.0, &p), 1.0);
        assert!((scad_weight(2.0, &p) - 1.7 / 2.7).abs() < 1e-12);
        assert_eq!(scad_weight(10.0, &p), 0.0);
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let w = scad_weight(i as f64 * 0.05, &p);
            assert!(w >= 0.0 && w <= prev);
            prev = w;
        }
    }

    #[test]
    fn adaptive_weight_examples() {
        let one = SymMatrix::from_fn(2, |_, _| 1.0);
        let w = adaptive_weights(&one, &AdaptiveParams::new(0.5));
        assert!(w.as_slice().iter().all(|&v| v == 0.5));
        let four = SymMatrix::from_fn(2, |_, _| 4.0);
        assert_eq!(adaptive_weights(&four, &AdaptiveParams::new(1.0)).get(0, 1), 0.5);
        let w = adaptive_weights(&SymMatrix::identity(2), &AdaptiveParams::new(1.0));
        assert_eq!(w.get(0, 1), 1e6);
        assert_eq!(w.get(0, 0), 1.0);
    }

    #[test]
    fn parameter_validation() {
        let s = SymMatrix::identity(2);
        let bad = ScadParams { lambda: 0.1, a: 1.5 };
        assert!(matches!(scad_fit(&s, &bad, &GlassoOptions::default(), 3), Err(Error::InvalidParameter(_))));
        let bad = AdaptiveParams { gamma: 0.0, ..AdaptiveParams::new(0.1) };
        assert!(matches!(adaptive_fit(&s, &bad, &GlassoOptions::default()), Err(Error::InvalidParameter(_))));
    }
}
