//! Reduce-on-plateau learning rate schedule: after two consecutive epochs
//! without validation improvement, multiply the learning rate by `factor`.

use serde::{Deserialize, Serialize};

const PATIENCE: usize = 2;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlateauScheduler {
    current_lr: f64,
    factor: f64,
    best_val_loss: f64,
    epochs_since_improvement: usize,
}

impl PlateauScheduler {
    pub fn new(lr_start: f64, factor: f64) -> Self {
        PlateauScheduler {
            current_lr: lr_start,
            factor,
            best_val_loss: f64::INFINITY,
            epochs_since_improvement: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.current_lr
    }

    /// Advance one epoch with its validation loss; returns the learning rate
    /// to use next.
    pub fn step(&mut self, epoch_val_loss: f64) -> f64 {
        if epoch_val_loss < self.best_val_loss {
            self.best_val_loss = epoch_val_loss;
            self.epochs_since_improvement = 0;
        } else {
            self.epochs_since_improvement += 1;
            if self.epochs_since_improvement >= PATIENCE {
                self.current_lr *= self.factor;
                self.epochs_since_improvement = 0;
            }
        }
        self.current_lr
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drive(losses: &[f64], factor: f64) -> (f64, usize) {
        let mut s = PlateauScheduler::new(1.0, factor);
        let mut reductions = 0;
        let mut prev = s.lr();
        for &l in losses {
            let lr = s.step(l);
            if lr < prev {
                reductions += 1;
            }
            prev = lr;
        }
        (s.lr(), reductions)
    }

    #[test]
    fn improving_losses_keep_lr() {
        let (lr, reductions) = drive(&[1.0, 0.9, 0.8], 0.3);
        assert_eq!(lr, 1.0);
        assert_eq!(reductions, 0);
    }

    #[test]
    fn flat_losses_reduce_after_two_stalls() {
        // First epoch sets the best; the second and third fail to improve,
        // so the reduction lands on epoch 3.
        let mut s = PlateauScheduler::new(1.0, 0.3);
        assert_eq!(s.step(1.0), 1.0);
        assert_eq!(s.step(1.0), 1.0);
        assert_eq!(s.step(1.0), 0.3);
    }

    #[test]
    fn bumpy_trace_reduces_exactly_once() {
        let (lr, reductions) = drive(&[1.0, 0.9, 0.95, 0.93, 0.91], 0.5);
        assert_eq!(reductions, 1);
        assert_eq!(lr, 0.5);
    }

    #[test]
    fn lr_is_non_increasing() {
        let mut s = PlateauScheduler::new(0.1, 0.4);
        let mut prev = s.lr();
        for i in 0..50 {
            let loss = 1.0 + ((i * 7919) % 13) as f64 * 0.01;
            let lr = s.step(loss);
            assert!(lr <= prev && lr > 0.0);
            prev = lr;
        }
    }
}
