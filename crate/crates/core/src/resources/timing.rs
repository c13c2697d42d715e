//! FLOP-based time and utilization proxies.

use crate::error::{Error, Result};

/// Ratio of the weakest (static-pruning reference) capacity to this
/// client's capacity. Under static pruning the weakest client is fully
/// used (1.0) and every stronger client is proportionally idle.
pub fn utilization_factor(f_static: f64, f_c: f64) -> Result<f64> {
    if !crate::error::positive(f_static) || !crate::error::positive(f_c) {
        return Err(Error::InvalidArgument(format!(
            "capacities must be positive (f_static = {f_static}, f_c = {f_c})"
        )));
    }
    Ok(f_static / f_c)
}

/// Simulated seconds to run `total_flops` on a client of capacity `f_c`
/// FLOPS.
pub fn simulated_train_time(total_flops: f64, f_c: f64) -> Result<f64> {
    if !crate::error::non_negative(total_flops) || !crate::error::positive(f_c) {
        return Err(Error::InvalidArgument(format!(
            "need non-negative work and positive capacity (flops = {total_flops}, f_c = {f_c})"
        )));
    }
    Ok(total_flops / f_c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn utilization_examples() {
        assert_eq!(utilization_factor(10.0, 10.0).unwrap(), 1.0);
        assert_eq!(utilization_factor(10e9, 100e9).unwrap(), 0.1);
        // Weakest client of the fleet always sits at 1.0.
        let fleet = [10.0, 20.0, 40.0, 60.0, 100.0];
        let weakest = fleet.iter().cloned().fold(f64::INFINITY, f64::min);
        for f in fleet {
            let u = utilization_factor(weakest, f).unwrap();
            assert!(u > 0.0 && u <= 1.0);
        }
        assert_eq!(utilization_factor(weakest, weakest).unwrap(), 1.0);
    }

    #[test]
    fn train_time_is_linear_in_work() {
        assert_eq!(simulated_train_time(100e9, 10e9).unwrap(), 10.0);
        let t1 = simulated_train_time(50e9, 10e9).unwrap();
        let t2 = simulated_train_time(100e9, 10e9).unwrap();
        assert_eq!(t2, 2.0 * t1);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(utilization_factor(0.0, 1.0).is_err());
        assert!(simulated_train_time(1.0, 0.0).is_err());
        assert!(simulated_train_time(-1.0, 1.0).is_err());
    }
}
