//! Inverted dropout.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Keep mask scaled by `1/(1-p)`; an all-ones mask when `p == 0`.
pub fn dropout_mask(len: usize, p: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("dropout rate {p} outside [0, 1)")));
    }
    if p == 0.0 {
        return Ok(vec![1.0; len]);
    }
    let keep = 1.0 / (1.0 - p);
    Ok((0..len).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect())
}

pub fn dropout(x: &[f64], p: f64, mode: Mode, rng: &mut impl Rng) -> Result<Vec<f64>> {
    match mode {
        Mode::Eval => {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("dropout rate {p} outside [0, 1)")));
            }
            Ok(x.to_vec())
        }
        Mode::Train => {
            let mask = dropout_mask(x.len(), p, rng)?;
            Ok(x.iter().zip(&mask).map(|(a, m)| a * m).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eval_mode_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = vec![0.3, -1.2, 7.0];
        assert_eq!(dropout(&x, 0.5, Mode::Eval, &mut rng).unwrap(), x);
    }

    #[test]
    fn zero_rate_is_identity_in_both_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = vec![0.3, -1.2, 7.0];
        assert_eq!(dropout(&x, 0.0, Mode::Train, &mut rng).unwrap(), x);
        assert_eq!(dropout(&x, 0.0, Mode::Eval, &mut rng).unwrap(), x);
    }

    #[test]
    fn train_mode_preserves_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ones = vec![1.0; 10];
        let samples = 100_000;
        let mut total = 0.0;
        for _ in 0..samples / 10 {
            total += dropout(&ones, 0.5, Mode::Train, &mut rng).unwrap().iter().sum::<f64>();
        }
        let mean = total / samples as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn rejects_rate_of_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(dropout(&[1.0], 1.0, Mode::Train, &mut rng).is_err());
    }
}
