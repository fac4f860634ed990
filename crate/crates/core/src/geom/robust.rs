use serde::{Deserialize, Serialize};

/// Huber penalty on a squared residual: `r²/2` inside `delta`, `delta·(r − delta/2)` outside.
pub fn huber(r_sq: f64, delta: f64) -> f64 {
    let r = r_sq.sqrt();
    if r <= delta {
        0.5 * r_sq
    } else {
        delta * (r - 0.5 * delta)
    }
}

/// `d huber / d r_sq`.
pub fn huber_derivative(r_sq: f64, delta: f64) -> f64 {
    let r = r_sq.sqrt();
    if r <= delta {
        0.5
    } else {
        0.5 * delta / r
    }
}

/// Penalty applied to squared residuals of the geometric losses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobustKernel {
    Huber,
    /// Plain `r²/2`, used to compare against the robust variant.
    Squared,
}

impl RobustKernel {
    pub fn eval(self, r_sq: f64, delta: f64) -> (f64, f64) {
        match self {
            RobustKernel::Huber => (huber(r_sq, delta), huber_derivative(r_sq, delta)),
            RobustKernel::Squared => (0.5 * r_sq, 0.5),
        }
    }
}
