//! Central finite-difference gradient checking.

use serde::Serialize;

use super::{ParamStore, Tape, Var};
use crate::error::Result;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

/// Denominator floor for relative error, so components that are zero
/// analytically and numerically do not divide by zero.
const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub scalars: usize,
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub label: String,
    pub params: Vec<ParamCheck>,
    pub max_relative_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<28} max rel err {:.3e}  {}\n",
            self.label,
            self.max_relative_error,
            if self.passed { "PASS" } else { "FAIL" }
        );
        for p in &self.params {
            out.push_str(&format!(
                "  {:<34} n={:<5} {:.3e}\n",
                p.name, p.scalars, p.max_relative_error
            ));
        }
        out
    }
}

/// Compares the tape gradient of `loss_fn` with central differences for
/// every scalar of every parameter in `store`.
pub fn grad_check<F>(
    label: &str,
    store: &mut ParamStore,
    loss_fn: F,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    store.zero_grads();
    let mut tape = Tape::new();
    let loss = loss_fn(&mut tape, store)?;
    tape.backward(loss, store)?;

    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let loss = loss_fn(&mut tape, store)?;
        Ok(tape.value(loss).get(0, 0))
    };

    let mut params = Vec::new();
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let analytic = store.grad(id).clone();
        let n = analytic.data().len();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            let orig = store.value(id).data()[j];
            store.value_mut(id).data_mut()[j] = orig + step;
            let up = eval(store)?;
            store.value_mut(id).data_mut()[j] = orig - step;
            let down = eval(store)?;
            store.value_mut(id).data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * step);
            worst = worst.max(relative_error(analytic.data()[j], numeric));
        }
        params.push(ParamCheck {
            name: store.name(id).to_string(),
            scalars: n,
            max_relative_error: worst,
        });
    }
    let max_relative_error = params.iter().map(|p| p.max_relative_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        label: label.to_string(),
        params,
        max_relative_error,
        tolerance,
        passed: max_relative_error < tolerance,
    })
}
