use serde::{Deserialize, Serialize};

/// Reduce-on-plateau learning-rate schedule in "min" mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauState {
    pub best_metric: f64,
    pub epochs_since_improve: usize,
    pub patience: usize,
    pub factor: f64,
    pub min_lr: f64,
    /// Absolute decrease the metric must beat to count as improvement.
    pub threshold: f64,
}

impl Default for PlateauState {
    fn default() -> Self {
        Self::new(5, 0.5, 1e-6)
    }
}

impl PlateauState {
    pub fn new(patience: usize, factor: f64, min_lr: f64) -> Self {
        assert!(patience >= 1, "patience must be positive");
        assert!(factor > 0.0 && factor < 1.0, "factor must lie in (0, 1)");
        assert!(min_lr >= 0.0, "min_lr must be nonnegative");
        Self {
            best_metric: f64::INFINITY,
            epochs_since_improve: 0,
            patience,
            factor,
            min_lr,
            threshold: 1e-8,
        }
    }

    /// Consumes one validation metric and returns the learning rate to use next.
    pub fn step(&mut self, val_metric: f64, current_lr: f64) -> f64 {
        if val_metric < self.best_metric - self.threshold {
            self.best_metric = val_metric;
            self.epochs_since_improve = 0;
            return current_lr;
        }
        self.epochs_since_improve += 1;
        if self.epochs_since_improve > self.patience {
            self.epochs_since_improve = 0;
            return (current_lr * self.factor).max(self.min_lr).min(current_lr);
        }
        current_lr
    }
}
