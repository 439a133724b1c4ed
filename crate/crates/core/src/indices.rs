//! Multiplex activity indices.
//!
//! The mobility index (THM) is a raw cell-wise sum of person-unit matrices.
//! The communication index (THC) averages its components after each is
//! normalized to unit total — the only normalization that gives components
//! literally equal weight despite incomparable units. The combined index
//! (THA) is a convex combination of the normalized THM and THC, default
//! weights 0.6/0.4.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{FlowMatrix, FlowMeta, Year};
use crate::schema;

/// Per-component preprocessing before weighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    None,
    SumToOne,
    /// Divide by the largest cell; a sensitivity alternative exposed by the
    /// CLI, not used by the default index definitions.
    MaxToOne,
}

impl std::str::FromStr for Normalization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Normalization::None),
            "sum" | "sum-to-one" => Ok(Normalization::SumToOne),
            "max" | "max-to-one" => Ok(Normalization::MaxToOne),
            other => Err(Error::InvalidArgument(format!(
                "unknown normalization {other:?} (expected none, sum, or max)"
            ))),
        }
    }
}

/// A weighted combination of flow matrices.
pub struct IndexSpec<'a> {
    pub components: Vec<(&'a FlowMatrix, f64)>,
    pub normalization: Normalization,
    pub label: String,
    pub units: String,
}

impl<'a> IndexSpec<'a> {
    /// Σ weight · prep(component), cell-wise.
    pub fn build(&self) -> Result<FlowMatrix> {
        if self.components.is_empty() {
            return Err(Error::Validation(format!(
                "index {:?} has no components",
                self.label
            )));
        }
        let registry = Arc::clone(self.components[0].0.registry());
        let mut year = Some(self.components[0].0.year());
        for (m, w) in &self.components {
            if !(*w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "index weight must be positive, got {w} for {:?}",
                    m.activity_type()
                )));
            }
            if !m.registry().same_countries(&registry) {
                return Err(Error::RegistryMismatch);
            }
            if year != Some(m.year()) {
                year = None;
            }
        }
        let n = registry.len();
        let mut values = vec![0.0f64; n * n];
        for (m, w) in &self.components {
            let scale = match self.normalization {
                Normalization::None => 1.0,
                Normalization::SumToOne => {
                    let total = m.total();
                    if total <= 0.0 {
                        return Err(Error::ZeroTotalComponent {
                            label: m.activity_type().to_owned(),
                        });
                    }
                    1.0 / total
                }
                Normalization::MaxToOne => {
                    let max = m.values().iter().cloned().fold(0.0f64, f64::max);
                    if max <= 0.0 {
                        return Err(Error::ZeroTotalComponent {
                            label: m.activity_type().to_owned(),
                        });
                    }
                    1.0 / max
                }
            };
            for (out, v) in values.iter_mut().zip(m.values()) {
                *out += w * scale * v;
            }
        }
        FlowMatrix::new(
            registry,
            values,
            FlowMeta {
                activity_type: self.label.clone(),
                year: year.unwrap_or(Year::Undated),
                units: self.units.clone(),
            },
        )
    }
}

/// Mobility index: cell-wise sum of person-unit mobility matrices.
pub fn build_thm_index(mobility: &[FlowMatrix]) -> Result<FlowMatrix> {
    for m in mobility {
        if m.units() != "persons" {
            return Err(Error::UnitMismatch {
                expected: "persons".into(),
                found: m.units().into(),
                label: m.activity_type().into(),
            });
        }
    }
    IndexSpec {
        components: mobility.iter().map(|m| (m, 1.0)).collect(),
        normalization: Normalization::None,
        label: "THM".into(),
        units: "persons".into(),
    }
    .build()
}

/// Communication index: mean of unit-total-normalized components; output
/// total is 1.
pub fn build_thc_index(communication: &[FlowMatrix]) -> Result<FlowMatrix> {
    if communication.is_empty() {
        return Err(Error::Validation("THC index has no components".into()));
    }
    let w = 1.0 / communication.len() as f64;
    IndexSpec {
        components: communication.iter().map(|m| (m, w)).collect(),
        normalization: Normalization::SumToOne,
        label: "THC".into(),
        units: "share".into(),
    }
    .build()
}

/// Combined activity index: weighted sum of the normalized THM and THC.
/// The weight pair is normalized by its sum, so the output total is 1 for
/// any positive weights.
pub fn build_tha_index(
    thm: &FlowMatrix,
    thc: &FlowMatrix,
    weights: (f64, f64),
) -> Result<FlowMatrix> {
    let (w_m, w_c) = weights;
    if !(w_m > 0.0) || !(w_c > 0.0) || !w_m.is_finite() || !w_c.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "THA weights must be positive, got ({w_m}, {w_c})"
        )));
    }
    let s = w_m + w_c;
    IndexSpec {
        components: vec![(thm, w_m / s), (thc, w_c / s)],
        normalization: Normalization::SumToOne,
        label: "THA".into(),
        units: "share".into(),
    }
    .build()
}

/// Provenance sidecar describing how an index was assembled.
#[derive(Debug, Serialize)]
pub struct IndexProvenance {
    pub schema: &'static str,
    pub label: String,
    pub normalization: Normalization,
    pub components: Vec<ComponentInfo>,
}

#[derive(Debug, Serialize)]
pub struct ComponentInfo {
    pub activity_type: String,
    pub year: Year,
    pub units: String,
    pub weight: f64,
    pub total: f64,
}

impl IndexProvenance {
    pub fn describe(
        label: &str,
        normalization: Normalization,
        components: &[(&FlowMatrix, f64)],
    ) -> Self {
        Self {
            schema: schema::INDEX_PROVENANCE,
            label: label.to_owned(),
            normalization,
            components: components
                .iter()
                .map(|(m, w)| ComponentInfo {
                    activity_type: m.activity_type().to_owned(),
                    year: m.year(),
                    units: m.units().to_owned(),
                    weight: *w,
                    total: m.total(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::CountryRegistry;
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeMap;

    fn registry(n: usize) -> Arc<CountryRegistry> {
        let codes: Vec<String> = (0..n).map(|i| format!("C{i:02}")).collect();
        Arc::new(CountryRegistry::new(codes, BTreeMap::new()).unwrap())
    }

    fn persons(reg: &Arc<CountryRegistry>, label: &str, cell: (usize, usize), v: f64) -> FlowMatrix {
        FlowMatrix::from_fn(
            Arc::clone(reg),
            FlowMeta::new(label, Year::Dated(2010), "persons"),
            |i, j| if (i, j) == cell { v } else { 0.0 },
        )
        .unwrap()
    }

    #[test]
    fn thm_sums_cellwise() {
        let reg = registry(3);
        let a = persons(&reg, "tourism", (0, 1), 3.0);
        let b = persons(&reg, "migration", (0, 1), 4.0);
        let thm = build_thm_index(&[a, b]).unwrap();
        assert_eq!(thm.get(0, 1), 7.0);
        assert_eq!(thm.units(), "persons");
        assert_eq!(thm.activity_type(), "THM");
        assert_eq!(thm.year(), Year::Dated(2010));
    }

    #[test]
    fn thm_with_zero_matrix_is_identity() {
        let reg = registry(3);
        let a = persons(&reg, "tourism", (1, 2), 5.5);
        let z = FlowMatrix::zeros(
            Arc::clone(&reg),
            FlowMeta::new("refugees", Year::Dated(2010), "persons"),
        );
        let thm = build_thm_index(&[a.clone(), z]).unwrap();
        assert_eq!(thm.values(), a.values());
    }

    #[test]
    fn thm_rejects_unit_mismatch() {
        let reg = registry(3);
        let a = persons(&reg, "tourism", (0, 1), 3.0);
        let b = a.with_meta(FlowMeta::new("phone-calls", Year::Dated(1995), "minutes"));
        let err = build_thm_index(&[a, b]).unwrap_err();
        match err {
            Error::UnitMismatch { found, label, .. } => {
                assert_eq!(found, "minutes");
                assert_eq!(label, "phone-calls");
            }
            other => panic!("expected UnitMismatch, got {other:?}"),
        }
    }

    #[test]
    fn thc_of_identical_normalized_matrices_is_that_matrix() {
        let reg = registry(3);
        let m = persons(&reg, "remittances", (0, 2), 4.0);
        let thc = build_thc_index(&[m.clone(), m.clone(), m.clone()]).unwrap();
        assert_abs_diff_eq!(thc.get(0, 2), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(thc.total(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn thc_equalizes_components_regardless_of_raw_totals() {
        // Two toys, totals 10 and 1000, concentrated on opposite dyads:
        // the output holds 0.5 on each dyad.
        let reg = registry(2);
        let a = persons(&reg, "phone-calls", (0, 1), 10.0);
        let b = persons(&reg, "remittances", (1, 0), 1000.0);
        let thc = build_thc_index(&[a, b]).unwrap();
        assert_abs_diff_eq!(thc.get(0, 1), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(thc.get(1, 0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn single_component_thc_is_the_normalized_input() {
        let reg = registry(3);
        let m = FlowMatrix::from_fn(
            Arc::clone(&reg),
            FlowMeta::new("phone-calls", Year::Dated(1995), "minutes"),
            |i, j| ((i * 3 + j) % 4) as f64,
        )
        .unwrap();
        let thc = build_thc_index(&[m.clone()]).unwrap();
        let total = m.total();
        for (got, raw) in thc.values().iter().zip(m.values()) {
            assert_abs_diff_eq!(got, &(raw / total), epsilon = 1e-15);
        }
    }

    #[test]
    fn thc_names_zero_total_component() {
        let reg = registry(3);
        let a = persons(&reg, "phone-calls", (0, 1), 10.0);
        let z = FlowMatrix::zeros(
            Arc::clone(&reg),
            FlowMeta::new("remittances", Year::Dated(2010), "usd"),
        );
        match build_thc_index(&[a, z]).unwrap_err() {
            Error::ZeroTotalComponent { label } => assert_eq!(label, "remittances"),
            other => panic!("expected ZeroTotalComponent, got {other:?}"),
        }
    }

    #[test]
    fn thc_invariant_to_rescaling_one_component() {
        let reg = registry(3);
        let a = persons(&reg, "phone-calls", (0, 1), 2.0);
        let b = persons(&reg, "remittances", (2, 0), 6.0);
        let base = build_thc_index(&[a.clone(), b.clone()]).unwrap();
        let rescaled = build_thc_index(&[a.scaled(123.0).unwrap(), b]).unwrap();
        for (x, y) in base.values().iter().zip(rescaled.values()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-14);
        }
    }

    #[test]
    fn tha_is_a_convex_combination() {
        let reg = registry(3);
        let thm = persons(&reg, "THM", (0, 1), 50.0);
        let thc = persons(&reg, "THC", (1, 2), 2.0);
        let tha = build_tha_index(&thm, &thc, (0.6, 0.4)).unwrap();
        assert_abs_diff_eq!(tha.get(0, 1), 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(tha.get(1, 2), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(tha.total(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tha_of_identical_shapes_is_that_shape() {
        let reg = registry(3);
        let thm = persons(&reg, "THM", (0, 1), 9.0);
        let thc = persons(&reg, "THC", (0, 1), 0.4);
        let tha = build_tha_index(&thm, &thc, (0.6, 0.4)).unwrap();
        assert_abs_diff_eq!(tha.get(0, 1), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn tha_custom_equal_weights_average() {
        let reg = registry(3);
        let thm = persons(&reg, "THM", (0, 1), 10.0);
        let thc = persons(&reg, "THC", (2, 1), 5.0);
        let tha = build_tha_index(&thm, &thc, (0.5, 0.5)).unwrap();
        assert_abs_diff_eq!(tha.get(0, 1), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(tha.get(2, 1), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn index_outputs_are_valid_flow_matrices() {
        let reg = registry(4);
        let a = persons(&reg, "tourism", (0, 3), 7.0);
        let b = persons(&reg, "migration", (2, 1), 3.0);
        let thm = build_thm_index(&[a, b]).unwrap();
        assert!(thm.values().iter().all(|v| *v >= 0.0));
        for i in 0..4 {
            assert_eq!(thm.get(i, i), 0.0);
        }
    }
}
