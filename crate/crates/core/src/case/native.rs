//! Native JSON case documents.

use std::collections::BTreeMap;

use serde::Deserialize;

use super::{Branch, Bus, BusId, CaseError, DemandProfile, Generator, GridCase, Renewable};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseDocument {
    base_mva: f64,
    buses: Vec<Bus>,
    #[serde(default)]
    branches: Vec<Branch>,
    #[serde(default)]
    generators: Vec<Generator>,
    #[serde(default)]
    demand: DemandProfile,
    #[serde(default)]
    renewables: Vec<Renewable>,
    /// Optional bus → county sidecar, merged into `buses[].county`.
    #[serde(default)]
    counties: Option<BTreeMap<BusId, String>>,
}

/// Parses and validates a native case document.
pub fn parse_case(source: &str) -> Result<GridCase, CaseError> {
    let doc: CaseDocument = serde_json::from_str(source).map_err(|e| CaseError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut buses = doc.buses;
    if let Some(counties) = doc.counties {
        for (bus, county) in counties {
            let slot = buses
                .iter_mut()
                .find(|b| b.id == bus)
                .ok_or_else(|| CaseError::DanglingBus {
                    location: format!("counties.{bus}"),
                    bus,
                })?;
            match &slot.county {
                Some(existing) if *existing != county => {
                    return Err(CaseError::invalid(
                        format!("counties.{bus}"),
                        format!("conflicts with bus county `{existing}`"),
                    ));
                }
                _ => slot.county = Some(county),
            }
        }
    }
    let case = GridCase {
        base_mva: doc.base_mva,
        buses,
        branches: doc.branches,
        generators: doc.generators,
        demand: doc.demand,
        renewables: doc.renewables,
    };
    case.validate()?;
    Ok(case)
}

/// Canonical native serialisation. Floats are written in shortest
/// round-trip form, so parsing the output reproduces every value exactly.
pub fn to_native_json(case: &GridCase) -> String {
    serde_json::to_string_pretty(case).expect("grid case serialisation is infallible")
}

/// Serialises then re-parses a case.
pub fn round_trip(case: &GridCase) -> GridCase {
    parse_case(&to_native_json(case)).expect("a valid case must re-parse")
}
