use serde::{Deserialize, Serialize};

/// Trust attenuation of the photometric term as the map goes stale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DartConfig {
    /// When false the photometric weight stays at `w_max`.
    pub enabled: bool,
    pub w_min: f64,
    pub w_max: f64,
    /// Staleness (frames) at which the weight is halfway between the bounds.
    pub n_m: f64,
    /// Steepness.
    pub k: f64,
}

impl Default for DartConfig {
    fn default() -> Self {
        DartConfig {
            enabled: true,
            w_min: 0.1,
            w_max: 1.0,
            n_m: 5.0,
            k: 0.8,
        }
    }
}

/// `λ_p = w_min + (w_max − w_min) / (1 + exp(k (ΔN_f − N_m)))`.
pub fn dart_weight(frames_since_insertion: u32, cfg: &DartConfig) -> f64 {
    if !cfg.enabled {
        return cfg.w_max;
    }
    let x = cfg.k * (frames_since_insertion as f64 - cfg.n_m);
    cfg.w_min + (cfg.w_max - cfg.w_min) / (1.0 + x.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let c = DartConfig::default();
        let direct = 0.1 + 0.9 / (1.0 + (-4.0f64).exp());
        assert!((dart_weight(0, &c) - direct).abs() < 1e-15);
        assert!((dart_weight(0, &c) - 0.9838).abs() < 1e-4);
        assert_eq!(dart_weight(5, &c), 0.55);
        assert!((dart_weight(1000, &c) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn strictly_decreasing_and_bounded() {
        let c = DartConfig::default();
        let mut last = f64::INFINITY;
        for n in 0..40 {
            let w = dart_weight(n, &c);
            assert!(w < last && (c.w_min..=c.w_max).contains(&w));
            last = w;
        }
    }

    #[test]
    fn disabled_is_constant() {
        let c = DartConfig {
            enabled: false,
            ..Default::default()
        };
        assert_eq!(dart_weight(0, &c), 1.0);
        assert_eq!(dart_weight(50, &c), 1.0);
    }
}
