use crate::error::{Error, Result};

/// Multiplies the learning rate by `factor` once the monitored loss has
/// failed to improve on its best value by more than `min_delta` for more
/// than `patience` consecutive epochs.
#[derive(Debug, Clone)]
pub struct PlateauScheduler {
    lr: f64,
    factor: f64,
    patience: usize,
    min_delta: f64,
    best: f64,
    bad_epochs: usize,
}

impl PlateauScheduler {
    pub fn new(lr0: f64, factor: f64, patience: usize, min_delta: f64) -> Result<Self> {
        if !(lr0 > 0.0 && lr0.is_finite()) {
            return Err(Error::Config(format!("lr0 must be positive, got {lr0}")));
        }
        if !(factor > 0.0 && factor < 1.0) {
            return Err(Error::Config(format!("plateau factor must lie in (0, 1), got {factor}")));
        }
        if !(min_delta >= 0.0) {
            return Err(Error::Config(format!("min_delta must be >= 0, got {min_delta}")));
        }
        Ok(PlateauScheduler {
            lr: lr0,
            factor,
            patience,
            min_delta,
            best: f64::INFINITY,
            bad_epochs: 0,
        })
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    /// Record one epoch's monitored loss; returns the learning rate for the
    /// next epoch.
    pub fn step(&mut self, loss: f64) -> f64 {
        if loss < self.best - self.min_delta {
            self.best = loss;
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs > self.patience {
                self.lr *= self.factor;
                self.bad_epochs = 0;
            }
        }
        self.lr
    }
}
