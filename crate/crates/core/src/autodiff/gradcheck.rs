use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckOptions {
    /// Central-difference step.
    pub step: f64,
    pub tolerance: f64,
    /// Magnitudes below this are treated as this when forming the relative
    /// error, so near-zero gradients are compared absolutely.
    pub scale_floor: f64,
    /// Check at most this many coordinates per parameter (sampled).
    pub max_coords_per_param: Option<usize>,
    /// Seed for coordinate sampling.
    pub seed: u64,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        GradcheckOptions {
            step: 1e-5,
            tolerance: 1e-4,
            scale_floor: 1e-6,
            max_coords_per_param: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coordinate {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub max_rel_error: f64,
    /// Coordinate with the largest relative error.
    pub worst: Option<Coordinate>,
    pub checked: usize,
    pub tolerance: f64,
    pub passed: bool,
    /// Set when a loss or gradient value was NaN or infinite.
    pub non_finite: Option<Coordinate>,
}

/// Compares reverse-mode gradients of `build` against central finite
/// differences, coordinate by coordinate. Leaves the store's parameter
/// values unchanged and its gradients zeroed.
pub fn gradcheck<F>(store: &mut ParamStore, build: F, opts: &GradcheckOptions) -> Result<GradcheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    store.zero_grad();
    let mut tape = Tape::new();
    let loss = build(&mut tape, store)?;
    tape.backward(loss, store)?;
    let analytic: Vec<Vec<f64>> = store
        .ids()
        .map(|id| store.get(id).grad().map(<[f64]>::to_vec).unwrap_or_default())
        .collect();
    store.zero_grad();
    gradcheck_with_analytic(store, build, &analytic, opts)
}

/// Like [`gradcheck`] but against caller-supplied analytic gradients, one
/// buffer per parameter in store order.
pub fn gradcheck_with_analytic<F>(
    store: &mut ParamStore,
    build: F,
    analytic: &[Vec<f64>],
    opts: &GradcheckOptions,
) -> Result<GradcheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = GradcheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        tolerance: opts.tolerance,
        passed: true,
        non_finite: None,
    };
    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let loss = build(&mut tape, store)?;
        tape.scalar(loss)
    };

    let ids: Vec<ParamId> = store.ids().collect();
    for (pid, grad) in ids.into_iter().zip(analytic) {
        let n = store.get(pid).values().len();
        let coords: Vec<usize> = match opts.max_coords_per_param {
            Some(k) if k < n => {
                let mut v = rand::seq::index::sample(&mut rng, n, k).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..n).collect(),
        };
        for i in coords {
            let orig = store.get(pid).values()[i];
            store.get_mut(pid).values_mut()[i] = orig + opts.step;
            let plus = eval(store)?;
            store.get_mut(pid).values_mut()[i] = orig - opts.step;
            let minus = eval(store)?;
            store.get_mut(pid).values_mut()[i] = orig;

            let numeric = (plus - minus) / (2.0 * opts.step);
            let a = grad.get(i).copied().unwrap_or(0.0);
            let scale = libm::fmax(libm::fmax(libm::fabs(a), libm::fabs(numeric)), opts.scale_floor);
            let rel_error = libm::fabs(a - numeric) / scale;
            let coord = Coordinate {
                param: store.name(pid).to_string(),
                index: i,
                analytic: a,
                numeric,
                rel_error,
            };
            report.checked += 1;
            if !(plus.is_finite() && minus.is_finite() && a.is_finite()) {
                report.passed = false;
                report.max_rel_error = f64::INFINITY;
                report.non_finite = Some(coord);
                return Ok(report);
            }
            if rel_error > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = rel_error;
                report.worst = Some(coord);
            }
        }
    }
    report.passed = report.max_rel_error < opts.tolerance;
    Ok(report)
}
