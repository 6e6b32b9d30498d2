//! Reference machine-type-communication KPI targets for 5G and 6G, used to
//! annotate reports. Read-only data.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KpiTarget {
    pub name: &'static str,
    pub target_5g: &'static str,
    pub target_6g: &'static str,
}

const TARGETS: &[KpiTarget] = &[
    KpiTarget { name: "per-link reliability", target_5g: "1-1e-5", target_6g: "1-1e-9" },
    KpiTarget { name: "e2e reliability", target_5g: "not considered", target_6g: "1-1e-6" },
    KpiTarget { name: "per-link latency", target_5g: "1 ms", target_6g: "0.1 ms" },
    KpiTarget { name: "e2e latency", target_5g: "5 ms", target_6g: "<1 ms" },
    KpiTarget { name: "connection set-up time", target_5g: "not considered", target_6g: "<1 ms" },
    KpiTarget { name: "connection density", target_5g: "1 device/m^2", target_6g: "up to 10 device/m^3" },
    KpiTarget { name: "downlink spectral efficiency", target_5g: "~25 bpcu", target_6g: "~40 bpcu" },
    KpiTarget { name: "device lifetime", target_5g: "10 years", target_6g: "40 years" },
    KpiTarget { name: "energy consumption", target_5g: "low", target_6g: "ultra-low" },
    KpiTarget { name: "positioning accuracy", target_5g: "30 cm", target_6g: "1 cm/5 mm" },
    KpiTarget { name: "jitter", target_5g: "1 us", target_6g: "<0.1 us" },
    KpiTarget { name: "e2e optimization", target_5g: "not considered", target_6g: "relevant" },
    KpiTarget { name: "dependability", target_5g: "not considered", target_6g: "relevant" },
];

/// Error probabilities behind the reliability targets.
const PER_LINK_5G_ERROR: f64 = 1e-5;
const PER_LINK_6G_ERROR: f64 = 1e-9;
const E2E_6G_ERROR: f64 = 1e-6;
const SPECTRAL_EFFICIENCY_5G: f64 = 25.0;
const SPECTRAL_EFFICIENCY_6G: f64 = 40.0;

#[derive(Debug, Clone, Copy, Default)]
pub struct KpiTargetTable;

impl KpiTargetTable {
    pub fn entries(&self) -> &'static [KpiTarget] {
        TARGETS
    }

    pub fn get(&self, name: &str) -> Option<&'static KpiTarget> {
        TARGETS.iter().find(|t| t.name == name)
    }
}

/// A KPI target set against a value produced by an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KpiAnnotation {
    pub kpi: String,
    pub target_5g: String,
    pub target_6g: String,
    pub observed: String,
    pub meets_5g: bool,
    pub meets_6g: bool,
}

fn annotation(name: &str, observed: String, meets_5g: bool, meets_6g: bool) -> KpiAnnotation {
    let t = KpiTargetTable.get(name).expect("known KPI name");
    KpiAnnotation {
        kpi: t.name.into(),
        target_5g: t.target_5g.into(),
        target_6g: t.target_6g.into(),
        observed,
        meets_5g,
        meets_6g,
    }
}

/// Which reliability classes a decoding-error target `epsilon` satisfies.
pub fn reliability_annotations(epsilon: f64) -> Vec<KpiAnnotation> {
    let observed = format!("1-{epsilon:e}");
    vec![
        annotation(
            "per-link reliability",
            observed.clone(),
            epsilon <= PER_LINK_5G_ERROR,
            epsilon <= PER_LINK_6G_ERROR,
        ),
        // The 5G column has no E2E reliability target.
        annotation("e2e reliability", observed, false, epsilon <= E2E_6G_ERROR),
    ]
}

pub fn spectral_efficiency_annotation(sum_rate_bpcu: f64) -> KpiAnnotation {
    annotation(
        "downlink spectral efficiency",
        format!("{sum_rate_bpcu:.3} bpcu"),
        sum_rate_bpcu >= SPECTRAL_EFFICIENCY_5G,
        sum_rate_bpcu >= SPECTRAL_EFFICIENCY_6G,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_is_complete() {
        assert_eq!(KpiTargetTable.entries().len(), 13);
        assert_eq!(KpiTargetTable.get("per-link latency").unwrap().target_6g, "0.1 ms");
        assert!(KpiTargetTable.get("throughput").is_none());
    }

    #[test]
    fn default_error_target_meets_e2e_but_not_per_link_6g() {
        let a = reliability_annotations(1e-6);
        assert!(a[0].meets_5g && !a[0].meets_6g);
        assert!(a[1].meets_6g);
        let b = reliability_annotations(1e-9);
        assert!(b[0].meets_6g);
    }
}
