//! Exponential moving average of parameters: `theta2 <- m * theta2 + (1 - m) * theta1`.

use crate::error::{Error, Result};

use super::network::NetworkParameters;

fn check_momentum(m: f64) -> Result<()> {
    if (0.0..1.0).contains(&m) {
        Ok(())
    } else {
        Err(Error::Config(format!("EMA momentum must lie in [0, 1), got {m}")))
    }
}

/// Returns the blend of `theta2` toward `theta1`.
pub fn ema_update(
    theta2: &NetworkParameters,
    theta1: &NetworkParameters,
    m: f64,
) -> Result<NetworkParameters> {
    let mut out = theta2.clone();
    ema_update_in_place(&mut out, theta1, m)?;
    Ok(out)
}

pub fn ema_update_in_place(
    theta2: &mut NetworkParameters,
    theta1: &NetworkParameters,
    m: f64,
) -> Result<()> {
    check_momentum(m)?;
    theta2.ensure_same_shape(theta1)?;
    if m == 0.0 {
        // exact copy, including the sign of zeros
        *theta2 = theta1.clone();
        return Ok(());
    }
    // written as a step toward theta1 so equal inputs stay bit-identical
    let keep = 1.0 - m;
    theta2.zip_apply(theta1, |t2, t1| *t2 += keep * (t1 - *t2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::network::init_network;
    use ndarray::{Array1, Array2};

    fn scalar(v: f64) -> NetworkParameters {
        NetworkParameters::from_parts(vec![1, 1], vec![Array2::from_elem((1, 1), v)], vec![Array1::zeros(1)])
            .unwrap()
    }

    #[test]
    fn scalar_blend() {
        let out = ema_update(&scalar(1.0), &scalar(0.0), 0.9).unwrap();
        assert!((out.weights()[0][(0, 0)] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn zero_momentum_copies() {
        let a = init_network(&[3, 4, 2], 1).unwrap();
        let b = init_network(&[3, 4, 2], 2).unwrap();
        assert_eq!(ema_update(&a, &b, 0.0).unwrap(), b);
    }

    #[test]
    fn fixed_point() {
        let a = init_network(&[3, 4, 2], 1).unwrap();
        let out = ema_update(&a, &a, 0.99).unwrap();
        assert_eq!(out, a);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = init_network(&[3, 4, 2], 1).unwrap();
        let b = init_network(&[3, 5, 2], 1).unwrap();
        assert!(matches!(ema_update(&a, &b, 0.5), Err(Error::Dimension(_))));
        assert!(ema_update(&a, &a, 1.0).is_err());
    }
}
