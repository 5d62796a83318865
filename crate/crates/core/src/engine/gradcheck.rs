//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;

use crate::engine::init::rng_for;
use crate::engine::params::{GradientStore, ParameterStore};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Groups with at most this many scalars are checked exhaustively;
    /// larger ones are sampled.
    pub max_coords_per_group: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            max_coords_per_group: 64,
            seed: 2023,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub name: String,
    pub checked: usize,
    /// Coordinates re-measured with a smaller step after a kink was detected.
    pub refined: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradCheckReport {
    pub groups: Vec<GroupReport>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.groups
            .iter()
            .map(|g| g.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn passes(&self, threshold: f64) -> bool {
        self.max_rel_error() < threshold
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares `analytic` against `(L(θ+eps) − L(θ−eps)) / 2eps` for the chosen
/// coordinates of every parameter group. `loss` must be a pure function of
/// the parameters (fixed batch, fixed dropout masks).
pub fn finite_difference_check(
    params: &ParameterStore<f64>,
    analytic: &GradientStore<f64>,
    loss: impl Fn(&ParameterStore<f64>) -> Result<f64>,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let mut work = params.clone();
    let mut report = GradCheckReport::default();
    for idx in 0..params.len() {
        let name = params.name(idx).to_string();
        let grad = analytic.by_index(idx).data().to_vec();
        let coords = choose_coords(&grad, opts, &name);
        let mut worst: f64 = 0.0;
        let mut refined = 0;
        for &c in &coords {
            let mut central = |h: f64| -> Result<f64> {
                let orig = params.by_index(idx).data()[c];
                work.by_index_mut(idx).data_mut()[c] = orig + h;
                let plus = loss(&work)?;
                work.by_index_mut(idx).data_mut()[c] = orig - h;
                let minus = loss(&work)?;
                work.by_index_mut(idx).data_mut()[c] = orig;
                Ok((plus - minus) / (2.0 * h))
            };
            // A ReLU kink inside [θ−h, θ+h] shows up as disagreement with the
            // half step; such coordinates are re-measured with steps shrinking
            // by a decade until the kink falls outside.
            let mut h = opts.eps;
            let mut numeric = central(h)?;
            for level in 0..=KINK_REFINEMENTS {
                let half = central(h / 2.0)?;
                if stencils_agree(numeric, half) || level == KINK_REFINEMENTS {
                    break;
                }
                if level == 0 {
                    refined += 1;
                }
                h /= 10.0;
                numeric = central(h)?;
            }
            worst = worst.max(relative_error(grad[c], numeric));
        }
        report.groups.push(GroupReport {
            name,
            checked: coords.len(),
            refined,
            max_rel_error: worst,
        });
    }
    Ok(report)
}

const KINK_REFINEMENTS: usize = 2;

/// Central differences at `h` and `h/2` differ by `O(h²)` on smooth
/// stretches and by `O(1)` across a kink.
fn stencils_agree(full: f64, half: f64) -> bool {
    (full - half).abs() <= 1e-5 * full.abs().max(half.abs()) + 1e-11
}

fn choose_coords(grad: &[f64], opts: &GradCheckOptions, name: &str) -> Vec<usize> {
    let n = grad.len();
    if n <= opts.max_coords_per_group {
        return (0..n).collect();
    }
    // Large groups (embedding tables) are mostly rows the batch never touched;
    // draw half of the budget from coordinates with a live gradient.
    let mut rng = rng_for(opts.seed, &format!("gradcheck/{name}"));
    let live: Vec<usize> = (0..n).filter(|&i| grad[i] != 0.0).collect();
    let half = (opts.max_coords_per_group / 2).min(live.len());
    let mut out: Vec<usize> = sample(&mut rng, live.len(), half)
        .into_iter()
        .map(|i| live[i])
        .collect();
    let rest = opts.max_coords_per_group - half;
    out.extend(sample(&mut rng, n, rest));
    out.sort_unstable();
    out.dedup();
    out
}
