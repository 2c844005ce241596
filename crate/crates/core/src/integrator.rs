//! Second-order leapfrog integration, split into three elementwise kernels.
//!
//! One elementary step is
//!
//! ```text
//! kernel 1:  h_i ← h_i + (δτ/2) p_i
//! kernel 2:  p_i ← p_i − δτ ∂H/∂h_i
//! kernel 3:  h_i ← h_i + (δτ/2) p_i
//! ```
//!
//! Each kernel is a barrier: it finishes over all sites before the next one
//! starts. Kernel 2 reads neighbouring `h` values, so it must not overlap
//! with a position update.

use crate::exec::Executor;
use crate::float::Real;
use crate::model::{PhaseState, Posterior, H_LIMIT};

/// A trajectory whose `|ΔH|` exceeds this is treated as divergent.
pub const DELTA_H_LIMIT: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MdConfigError {
    #[error("step size must be positive and finite, got {0}")]
    StepSize(f64),
    #[error("number of steps must be at least 1")]
    NoSteps,
}

/// Molecular-dynamics tuning: step size `δτ` and step count `k`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MdConfig {
    step_size: f64,
    n_steps: usize,
}

impl MdConfig {
    pub fn new(step_size: f64, n_steps: usize) -> Result<Self, MdConfigError> {
        if !(step_size.is_finite() && step_size > 0.0) {
            return Err(MdConfigError::StepSize(step_size));
        }
        if n_steps == 0 {
            return Err(MdConfigError::NoSteps);
        }
        Ok(MdConfig { step_size, n_steps })
    }

    /// `k` steps covering total length `l`.
    pub fn from_length(length: f64, n_steps: usize) -> Result<Self, MdConfigError> {
        if n_steps == 0 {
            return Err(MdConfigError::NoSteps);
        }
        MdConfig::new(length / n_steps as f64, n_steps)
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// `l = k · δτ`.
    pub fn trajectory_length(&self) -> f64 {
        self.n_steps as f64 * self.step_size
    }
}

impl Default for MdConfig {
    /// `k = 50`, `l = 1`.
    fn default() -> Self {
        MdConfig::from_length(1.0, 50).expect("valid default")
    }
}

/// Kernel 1: `h_i += (dt/2) p_i`.
pub fn kernel1_half_position<F: Real>(state: &mut PhaseState<F>, dt: F, exec: &Executor) {
    half_position(state, dt, exec);
}

/// Kernel 2: `p_i -= dt ∂H/∂h_i` at the current `h`. Returns `false` if any
/// updated momentum is non-finite or any `|h_i|` exceeds [`H_LIMIT`].
pub fn kernel2_momentum<F: Real>(
    state: &mut PhaseState<F>,
    dt: F,
    posterior: &Posterior<'_, F>,
    exec: &Executor,
) -> bool {
    let h = &state.h;
    let limit = F::of(H_LIMIT);
    exec.all_chunks_mut(&mut state.p, |off, c| {
        let mut ok = true;
        for (j, p) in c.iter_mut().enumerate() {
            let i = off + j;
            *p = *p - dt * posterior.grad_at(i, h);
            ok &= p.is_finite() && h[i].abs() <= limit;
        }
        ok
    })
}

/// Kernel 3: `h_i += (dt/2) p_i` using the updated momenta.
pub fn kernel3_half_position<F: Real>(state: &mut PhaseState<F>, dt: F, exec: &Executor) {
    half_position(state, dt, exec);
}

fn half_position<F: Real>(state: &mut PhaseState<F>, dt: F, exec: &Executor) {
    let half = dt * F::of(0.5);
    let p = &state.p;
    exec.map_chunks_mut(&mut state.h, |off, c| {
        for (j, h) in c.iter_mut().enumerate() {
            *h = *h + half * p[off + j];
        }
    });
}

fn full_position<F: Real>(state: &mut PhaseState<F>, dt: F, exec: &Executor) {
    let p = &state.p;
    exec.map_chunks_mut(&mut state.h, |off, c| {
        for (j, h) in c.iter_mut().enumerate() {
            *h = *h + dt * p[off + j];
        }
    });
}

/// One leapfrog step: kernel 1, kernel 2, kernel 3. Returns `false` on
/// divergence (the state is then unspecified).
pub fn elementary_step<F: Real>(
    state: &mut PhaseState<F>,
    dt: F,
    posterior: &Posterior<'_, F>,
    exec: &Executor,
) -> bool {
    kernel1_half_position(state, dt, exec);
    let ok = kernel2_momentum(state, dt, posterior, exec);
    kernel3_half_position(state, dt, exec);
    ok
}

/// Result of integrating one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory<F> {
    Completed(PhaseState<F>),
    /// The trajectory left the numerically safe region at step `step`
    /// (1-based); the partial state is discarded.
    Diverged { step: usize },
}

impl<F> Trajectory<F> {
    pub fn is_divergent(&self) -> bool {
        matches!(self, Trajectory::Diverged { .. })
    }

    pub fn state(self) -> Option<PhaseState<F>> {
        match self {
            Trajectory::Completed(s) => Some(s),
            Trajectory::Diverged { .. } => None,
        }
    }
}

/// Leapfrog integrator bound to an executor.
#[derive(Debug, Clone, Default)]
pub struct Leapfrog {
    exec: Executor,
    fuse_half_steps: bool,
}

impl Leapfrog {
    pub fn new(exec: Executor) -> Self {
        Leapfrog {
            exec,
            fuse_half_steps: false,
        }
    }

    /// Merges kernel 3 of one step with kernel 1 of the next into a single
    /// full position update. Changes rounding, not the scheme. The benchmark
    /// never enables this.
    pub fn fused(mut self, fuse: bool) -> Self {
        self.fuse_half_steps = fuse;
        self
    }

    pub fn executor(&self) -> &Executor {
        &self.exec
    }

    pub fn elementary_step<F: Real>(
        &self,
        state: &mut PhaseState<F>,
        dt: F,
        posterior: &Posterior<'_, F>,
    ) -> bool {
        elementary_step(state, dt, posterior, &self.exec)
    }

    /// Applies `k` elementary steps to `state` in place.
    pub fn integrate_in_place<F: Real>(
        &self,
        state: &mut PhaseState<F>,
        config: &MdConfig,
        posterior: &Posterior<'_, F>,
    ) -> Result<(), usize> {
        let dt = F::of(config.step_size());
        let k = config.n_steps();
        if !self.fuse_half_steps {
            for step in 1..=k {
                if !self.elementary_step(state, dt, posterior) {
                    return Err(step);
                }
            }
            return Ok(());
        }
        kernel1_half_position(state, dt, &self.exec);
        for step in 1..=k {
            if !kernel2_momentum(state, dt, posterior, &self.exec) {
                return Err(step);
            }
            if step < k {
                full_position(state, dt, &self.exec);
            }
        }
        kernel3_half_position(state, dt, &self.exec);
        Ok(())
    }

    /// Integrates a copy of `state` over `k` steps.
    pub fn integrate_trajectory<F: Real>(
        &self,
        state: &PhaseState<F>,
        config: &MdConfig,
        posterior: &Posterior<'_, F>,
    ) -> Trajectory<F> {
        let mut s = state.clone();
        match self.integrate_in_place(&mut s, config, posterior) {
            Ok(()) if s.is_finite() => Trajectory::Completed(s),
            Ok(()) => Trajectory::Diverged {
                step: config.n_steps(),
            },
            Err(step) => Trajectory::Diverged { step },
        }
    }
}
