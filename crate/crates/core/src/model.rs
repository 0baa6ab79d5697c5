//! Model parameters and the regime map of the mean-field equation.
//!
//! A network is described by four numbers: the EPSP jump amplitude `h`,
//! the reset potential `v_r`, the external Poisson rate `sigma0` and the
//! mean synaptic out-degree `J`. Everything downstream (particle
//! simulation, PDE, steady states) reads them from [`ModelParams`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used to reject `(1 - v_r) / h` values that are integers.
pub const INTEGER_RATIO_TOL: f64 = 1e-9;

/// `5 - 2 sqrt(6)`, the root of `J / (1 - J)^2 = 1/8` in `(0, 1)`.
pub const WEAK_COUPLING_FACTOR: f64 = 0.101_020_514_433_643_8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{name} = {value} is out of range ({expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("(1 - v_r) / h = {ratio} is an integer; a neuron reset to v_r could reach the threshold exactly")]
    IntegerRatio { ratio: f64 },
}

/// Validated model parameters.
///
/// Field names in serialized form follow the conventional symbols
/// (`h`, `v_r`, `sigma0`, `J`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "h")]
    pub jump: f64,
    #[serde(rename = "v_r")]
    pub v_reset: f64,
    #[serde(rename = "sigma0")]
    pub external_rate: f64,
    #[serde(rename = "J")]
    pub coupling: f64,
}

fn check_range(
    name: &'static str,
    value: f64,
    ok: bool,
    expected: &'static str,
) -> Result<(), ModelError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::OutOfRange {
            name,
            value,
            expected,
        })
    }
}

impl ModelParams {
    /// Validates raw inputs, including the non-integer ratio `(1 - v_r) / h`.
    pub fn validate(h: f64, v_r: f64, sigma0: f64, coupling: f64) -> Result<Self, ModelError> {
        let params = Self::validate_ranges(h, v_r, sigma0, coupling)?;
        let ratio = params.reset_gap_ratio();
        if (ratio - ratio.round()).abs() <= INTEGER_RATIO_TOL * ratio.abs().max(1.0) {
            return Err(ModelError::IntegerRatio { ratio });
        }
        Ok(params)
    }

    /// Range checks only. The finite-network simulator accepts integer
    /// ratios (it fires on `v >= 1`), the PDE machinery does not.
    pub fn validate_ranges(h: f64, v_r: f64, sigma0: f64, coupling: f64) -> Result<Self, ModelError> {
        check_range("h", h, h > 0.0 && h < 1.0, "0 < h < 1")?;
        check_range("v_r", v_r, v_r > 0.0 && v_r < 1.0, "0 < v_r < 1")?;
        check_range("sigma0", sigma0, sigma0 > 0.0, "sigma0 > 0")?;
        check_range("J", coupling, coupling >= 0.0, "J >= 0")?;
        Ok(Self {
            jump: h,
            v_reset: v_r,
            external_rate: sigma0,
            coupling,
        })
    }

    /// Same parameters with a different coupling.
    pub fn with_coupling(self, coupling: f64) -> Self {
        Self { coupling, ..self }
    }

    /// `(1 - v_r) / h`.
    pub fn reset_gap_ratio(&self) -> f64 {
        (1.0 - self.v_reset) / self.jump
    }

    /// `1 + floor((1 - v_r) / h)`: number of jumps a neuron sitting at the
    /// reset potential needs to fire when it never leaks.
    pub fn jumps_to_fire(&self) -> f64 {
        1.0 + self.reset_gap_ratio().floor()
    }

    /// Several constants of the well-posedness construction carry a
    /// `1 / (1 - 2h)` factor, so `h >= 1/2` leaves them without guarantees.
    pub fn large_jump_warning(&self) -> bool {
        self.jump >= 0.5
    }

    pub fn uniqueness_threshold(&self) -> f64 {
        uniqueness_threshold(self.jump, self.external_rate)
    }

    pub fn classify(&self) -> RegimeReport {
        classify(self)
    }
}

/// `(5 - 2 sqrt 6) (h/4)^(sigma0 + 1)`: couplings below this value have a
/// unique, globally exponentially stable steady state.
pub fn uniqueness_threshold(h: f64, sigma0: f64) -> f64 {
    WEAK_COUPLING_FACTOR * (h / 4.0).powf(sigma0 + 1.0)
}

/// Which of the known existence, stability and blow-up statements apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub global_wellposed: bool,
    pub blowup_all_data: bool,
    pub exists_one_ss: bool,
    pub exists_two_ss: bool,
    pub unique_stable_ss: bool,
    /// Right-hand sides of the inequalities behind each flag.
    pub thresholds: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

/// Classifies parameters with the exact (strict where stated) inequalities.
/// A coupling sitting exactly on a bound does not satisfy the regime.
pub fn classify(params: &ModelParams) -> RegimeReport {
    let h = params.jump;
    let sigma0 = params.external_rate;
    let j = params.coupling;
    let ratio = params.reset_gap_ratio();
    let jumps_to_fire = params.jumps_to_fire();
    let blowup_j = 1.0 + ratio;
    let two_ss_sigma0 = if j > 0.0 { (1.0 - h) / (4.0 * j) } else { f64::INFINITY };
    let uniq = params.uniqueness_threshold();

    let mut thresholds = BTreeMap::new();
    thresholds.insert("global_wellposed_J_below".to_string(), 1.0);
    thresholds.insert("blowup_J_at_least".to_string(), blowup_j);
    thresholds.insert("blowup_sigma0_above".to_string(), 1.0 / h);
    thresholds.insert("one_ss_J_below".to_string(), jumps_to_fire);
    thresholds.insert("two_ss_J_above".to_string(), jumps_to_fire);
    if two_ss_sigma0.is_finite() {
        thresholds.insert("two_ss_sigma0_below".to_string(), two_ss_sigma0);
    }
    thresholds.insert("unique_stable_J_below".to_string(), uniq);

    let mut warnings = Vec::new();
    if params.large_jump_warning() {
        warnings.push(format!(
            "h = {h} >= 1/2: constants with a 1/(1-2h) factor are not covered"
        ));
    }

    RegimeReport {
        global_wellposed: j < 1.0,
        blowup_all_data: j >= blowup_j && h * sigma0 > 1.0,
        exists_one_ss: j < jumps_to_fire,
        exists_two_ss: j > jumps_to_fire && sigma0 < two_ss_sigma0,
        unique_stable_ss: j < uniq,
        thresholds,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validate_accepts_fig1_parameters() {
        let p = ModelParams::validate(0.2, 0.1, 100.0, 0.0).unwrap();
        assert!((p.reset_gap_ratio() - 4.5).abs() < 1e-12);
    }

    #[test]
    fn validate_rejects_integer_ratio() {
        let err = ModelParams::validate(0.2, 0.2, 1.0, 0.0).unwrap_err();
        assert!(matches!(err, ModelError::IntegerRatio { .. }));
        // the finite-network path only checks ranges
        assert!(ModelParams::validate_ranges(0.1, 0.1, 200.0, 9.0).is_ok());
    }

    #[test]
    fn validate_rejects_out_of_range() {
        for (h, v_r, s, j) in [
            (0.2, 0.1, -1.0, 0.0),
            (0.0, 0.1, 1.0, 0.0),
            (1.0, 0.1, 1.0, 0.0),
            (0.2, 1.0, 1.0, 0.0),
            (0.2, 0.1, 1.0, -0.5),
            (0.2, 0.1, f64::NAN, 0.0),
        ] {
            let err = ModelParams::validate(h, v_r, s, j).unwrap_err();
            assert!(matches!(err, ModelError::OutOfRange { .. }), "{h} {v_r} {s} {j}");
        }
    }

    #[test]
    fn strong_coupling_blows_up() {
        let r = ModelParams::validate(0.2, 0.1, 6.0, 6.0).unwrap().classify();
        assert!(r.blowup_all_data);
        assert!(!r.exists_one_ss);
        assert!(!r.global_wellposed);
    }

    #[test]
    fn moderate_coupling_has_one_steady_state() {
        let r = ModelParams::validate(0.2, 0.1, 1.0, 0.5).unwrap().classify();
        assert!(r.global_wellposed);
        assert!(r.exists_one_ss);
        assert!(!r.exists_two_ss);
        assert!(!r.blowup_all_data);
    }

    #[test]
    fn two_steady_states_region() {
        let r = ModelParams::validate(0.2, 0.1, 0.02, 7.0).unwrap().classify();
        assert!(r.exists_two_ss);
        // 0.8 / 28
        assert!((r.thresholds["two_ss_sigma0_below"] - 0.028_571_428_571_428_57).abs() < 1e-15);
        assert!(!r.exists_one_ss);
    }

    #[test]
    fn boundary_coupling_is_not_in_regime() {
        // J exactly 1 + floor(4.5) = 5: neither strict inequality holds
        let r = ModelParams::validate(0.2, 0.1, 0.01, 5.0).unwrap().classify();
        assert!(!r.exists_one_ss);
        assert!(!r.exists_two_ss);
        let r = ModelParams::validate(0.2, 0.1, 1.0, 1.0).unwrap().classify();
        assert!(!r.global_wellposed);
    }

    #[test]
    fn uniqueness_threshold_values() {
        // (5 - 2 sqrt 6) * 0.05^2 and (5 - 2 sqrt 6) * 0.05, evaluated in extended precision
        assert!((uniqueness_threshold(0.2, 1.0) - 2.525_512_860_841_095e-4).abs() < 1e-18);
        assert!((uniqueness_threshold(0.2, 0.0) - 5.051_025_721_682_19e-3).abs() < 1e-17);
        assert!((WEAK_COUPLING_FACTOR - (5.0 - 2.0 * 6f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn large_jump_is_warned_not_rejected() {
        let p = ModelParams::validate(0.6, 0.1, 1.0, 0.0).unwrap();
        assert!(p.large_jump_warning());
        assert_eq!(p.classify().warnings.len(), 1);
    }

    #[test]
    fn report_serializes_flags_and_thresholds() {
        let r = ModelParams::validate(0.2, 0.1, 6.0, 6.0).unwrap().classify();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["blowup_all_data"], serde_json::Value::Bool(true));
        assert!(v["thresholds"]["blowup_J_at_least"].as_f64().unwrap() > 5.49);
    }

    fn params_strategy() -> impl Strategy<Value = ModelParams> {
        (0.01f64..0.99, 0.01f64..0.99, 1e-3f64..300.0, 0.0f64..30.0).prop_filter_map(
            "integer ratio",
            |(h, v_r, s, j)| ModelParams::validate(h, v_r, s, j).ok(),
        )
    }

    proptest! {
        #[test]
        fn blowup_and_existence_are_disjoint(p in params_strategy()) {
            let r = p.classify();
            prop_assert!(!(r.blowup_all_data && r.exists_one_ss));
        }

        #[test]
        fn unique_stable_implies_wellposed_and_existence(p in params_strategy()) {
            prop_assume!(p.uniqueness_threshold() > 0.0);
            let q = p.with_coupling(p.uniqueness_threshold() * 0.5);
            let r = q.classify();
            prop_assert!(r.unique_stable_ss);
            prop_assert!(r.global_wellposed);
            prop_assert!(r.exists_one_ss);
            prop_assert_eq!(r, q.classify());
        }

        #[test]
        fn threshold_decreases_with_rate(h in 0.01f64..0.99, s in 0.0f64..100.0, ds in 1e-3f64..10.0) {
            prop_assert!(uniqueness_threshold(h, s + ds) < uniqueness_threshold(h, s));
        }
    }
}
