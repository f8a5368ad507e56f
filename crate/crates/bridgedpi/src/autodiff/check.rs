//! Central finite-difference verification of backward passes.
//!
//! The checker drives an arbitrary scalar-valued function of several tensors:
//! it runs backward once for analytic gradients, then perturbs coordinates
//! one at a time and compares. Functions must be deterministic — dropout must
//! use a pinned mask and batchnorm a fixed mode — and the checker verifies
//! this by evaluating twice before trusting any difference quotient.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::tape::{Tape, Tensor};
use super::values::Values;
use super::AdError;

/// Knobs for [`check_gradients`].
#[derive(Clone, Debug)]
pub struct FdConfig {
    /// Base step; the per-coordinate step is `step * max(1, |x|)`.
    pub step: f64,
    /// Maximum admissible relative error for [`FdReport::require`].
    pub tol: f64,
    /// Cap on checked coordinates per input; large inputs are subsampled
    /// deterministically. `None` checks everything.
    pub max_coords_per_input: Option<usize>,
    /// Seed for the subsampling choice.
    pub seed: u64,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig { step: 1e-5, tol: 1e-4, max_coords_per_input: None, seed: 0x5eed }
    }
}

/// The single worst coordinate found by a check.
#[derive(Clone, Debug)]
pub struct FdWorst {
    pub input: usize,
    pub coord: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

/// Outcome of one gradient check.
#[derive(Clone, Debug)]
pub struct FdReport {
    pub max_rel_err: f64,
    pub worst: Option<FdWorst>,
    pub coords_checked: usize,
    tol: f64,
}

impl FdReport {
    /// Error with the worst coordinate's diagnostics when the check exceeded
    /// its tolerance.
    pub fn require(&self) -> Result<(), AdError> {
        if self.max_rel_err <= self.tol {
            return Ok(());
        }
        let w = self.worst.clone().expect("nonzero error implies a worst coordinate");
        Err(AdError::GradientCheck {
            input: w.input,
            coord: w.coord,
            analytic: w.analytic,
            numeric: w.numeric,
            rel_err: w.rel_err,
        })
    }
}

/// Compare backward gradients of `f` against central differences at `inputs`.
///
/// `f` receives a fresh tape and one tracked tensor per input, and must
/// return a scalar. Every input is treated as differentiable.
pub fn check_gradients<F>(inputs: &[Values], f: F, cfg: &FdConfig) -> Result<FdReport, AdError>
where
    F: Fn(&Tape, &[Tensor]) -> Result<Tensor, AdError>,
{
    let eval = |points: &[Values]| -> Result<f64, AdError> {
        let tape = Tape::new();
        let tracked: Vec<Tensor> = points
            .iter()
            .map(|v| tape.leaf(&Arc::new(v.clone())))
            .collect();
        let out = f(&tape, &tracked)?;
        if out.vals().len() != 1 {
            return Err(AdError::NonScalarBackward { shape: out.shape().to_vec() });
        }
        Ok(out.item())
    };

    // Two forward passes must agree bitwise, otherwise difference quotients
    // are meaningless.
    let base = eval(inputs)?;
    let again = eval(inputs)?;
    if base.to_bits() != again.to_bits() {
        return Err(AdError::Nondeterministic { first: base, second: again });
    }

    // Analytic gradients.
    let tape = Tape::new();
    let arcs: Vec<Arc<Values>> = inputs.iter().map(|v| Arc::new(v.clone())).collect();
    let tracked: Vec<Tensor> = arcs.iter().map(|a| tape.leaf(a)).collect();
    let out = f(&tape, &tracked)?;
    let grads = tape.backward(&out)?;
    let analytic: Vec<Option<Values>> = arcs
        .iter()
        .map(|a| {
            let id = tape.leaf_id(a).expect("leaf registered above");
            grads.get(id).cloned()
        })
        .collect();

    let mut report = FdReport { max_rel_err: 0.0, worst: None, coords_checked: 0, tol: cfg.tol };
    let mut work: Vec<Values> = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        let coords: Vec<usize> = match cfg.max_coords_per_input {
            Some(cap) if input.len() > cap => {
                let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed.wrapping_add(i as u64));
                let mut picks = rand::seq::index::sample(&mut rng, input.len(), cap).into_vec();
                picks.sort_unstable();
                picks
            }
            _ => (0..input.len()).collect(),
        };
        for c in coords {
            let x = input.data()[c];
            let h = cfg.step * x.abs().max(1.0);
            work[i].data_mut()[c] = x + h;
            let plus = eval(&work)?;
            work[i].data_mut()[c] = x - h;
            let minus = eval(&work)?;
            work[i].data_mut()[c] = x;
            let numeric = (plus - minus) / (2.0 * h);
            let an = analytic[i].as_ref().map_or(0.0, |g| g.data()[c]);
            // The denominator floor keeps central-difference cancellation
            // noise (~1e-11 for O(1) outputs at step 1e-5) from inflating the
            // relative error on coordinates whose true gradient is zero.
            let rel = (numeric - an).abs() / numeric.abs().max(an.abs()).max(1e-6);
            report.coords_checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = Some(FdWorst { input: i, coord: c, analytic: an, numeric, rel_err: rel });
            }
        }
    }
    Ok(report)
}
