use crate::error::{ensure_dim, Error, Result};
use crate::gradient::GradientVector;

/// Residual a worker carries into its next step. Starts at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorState {
    worker: usize,
    e: GradientVector,
}

/// What one error-compensated step produced.
#[derive(Debug, Clone, PartialEq)]
pub struct EfOutcome<P> {
    pub payload: P,
    /// `g_tilde = lr * g + e`.
    pub compensated: GradientVector,
    /// Estimate the parameters move by.
    pub estimate: GradientVector,
}

impl ErrorState {
    pub fn new(worker: usize, dim: usize) -> Self {
        ErrorState {
            worker,
            e: GradientVector::zeros(dim),
        }
    }

    pub fn worker(&self) -> usize {
        self.worker
    }

    pub fn error(&self) -> &GradientVector {
        &self.e
    }

    pub fn set(&mut self, e: GradientVector) -> Result<()> {
        ensure_dim(self.e.dim(), e.dim())?;
        self.e = e;
        Ok(())
    }

    /// `lr * g + e`.
    pub fn compensate(&self, g: &GradientVector, lr: f64) -> Result<GradientVector> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {lr}"
            )));
        }
        g.scale(lr)?.add(&self.e)
    }
}

/// One error-feedback step: compensate, run `pipeline` (compress, and
/// possibly merge and decompress) on `g_tilde`, then keep `g_tilde - g_hat`
/// as the new residual.
pub fn ef_step<P, F>(
    state: &mut ErrorState,
    g: &GradientVector,
    lr: f64,
    pipeline: F,
) -> Result<EfOutcome<P>>
where
    F: FnOnce(&GradientVector) -> Result<(P, GradientVector)>,
{
    let compensated = state.compensate(g, lr)?;
    let (payload, estimate) = pipeline(&compensated)?;
    state.set(compensated.sub(&estimate)?)?;
    Ok(EfOutcome {
        payload,
        compensated,
        estimate,
    })
}
