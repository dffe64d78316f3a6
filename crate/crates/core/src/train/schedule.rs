//! Reduce-on-plateau learning-rate schedule driven by validation loss.

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub learning_rate: f64,
    pub factor: f64,
    pub patience: usize,
    pub best: f64,
    pub bad_epochs: usize,
}

impl Schedule {
    pub fn new(initial_lr: f64, factor: f64, patience: usize) -> Self {
        Schedule {
            learning_rate: initial_lr,
            factor,
            patience,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    /// Records one epoch's validation loss. Returns true when the rate was
    /// cut: that happens once the loss has failed to set a strict new best
    /// for more than `patience` epochs in a row.
    pub fn observe(&mut self, val_loss: f64) -> bool {
        if val_loss < self.best {
            self.best = val_loss;
            self.bad_epochs = 0;
            return false;
        }
        self.bad_epochs += 1;
        if self.bad_epochs > self.patience {
            self.learning_rate *= self.factor;
            self.bad_epochs = 0;
            return true;
        }
        false
    }
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::new(1e-2, 0.1, 10)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eleven_flat_epochs_give_one_drop() {
        let mut s = Schedule::default();
        assert!(!s.observe(1.0));
        let drops: Vec<bool> = (0..11).map(|_| s.observe(1.0)).collect();
        assert_eq!(drops.iter().filter(|&&d| d).count(), 1);
        assert!(drops[10]);
        assert_eq!(s.learning_rate, 1e-2 * 0.1);
        // ten more flat epochs: counter was reset, no second drop yet
        assert!((0..10).all(|_| !s.observe(1.0)));
    }

    #[test]
    fn improvement_resets_counter() {
        let mut s = Schedule::default();
        s.observe(1.0);
        for _ in 0..10 {
            s.observe(2.0);
        }
        assert!(!s.observe(0.5));
        assert!((0..10).all(|_| !s.observe(0.5)));
        assert!(s.observe(0.5));
    }

    proptest! {
        #[test]
        fn rate_never_increases_and_drops_by_factor(losses in prop::collection::vec(0.0f64..1.0, 1..80)) {
            let mut s = Schedule::default();
            let mut prev = s.learning_rate;
            for l in losses {
                let dropped = s.observe(l);
                if dropped {
                    prop_assert_eq!(s.learning_rate, prev * 0.1);
                } else {
                    prop_assert_eq!(s.learning_rate, prev);
                }
                prev = s.learning_rate;
            }
        }
    }
}
