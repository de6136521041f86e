//! Schema-versioned JSON views of fitted models, fit reports, and
//! partitions. The CLI writes these verbatim; keeping the serializers
//! here lets tests assert byte-level determinism against the same code
//! path.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::error::Result;
use crate::fit::{FitConfig, FitMode, FitReport};
use crate::graph::{DistanceMatrix, FlowNetwork};
use crate::hierarchy::Partition;
use crate::model::ObjectiveKind;
use crate::newick::to_newick;

pub const SCHEMA_VERSION: u32 = 1;

fn mode_name(mode: FitMode) -> &'static str {
    match mode {
        FitMode::Generic => "generic",
        FitMode::Spatial => "spatial",
        FitMode::GravityPrefit => "gravity-prefit",
    }
}

fn objective_name(kind: ObjectiveKind) -> &'static str {
    match kind {
        ObjectiveKind::LeastSquares => "least-squares",
        ObjectiveKind::PoissonNormal => "poisson-normal",
    }
}

pub fn node_names(net: &FlowNetwork) -> Vec<String> {
    net.nodes().iter().map(|r| r.id.clone()).collect()
}

/// Model dump: weights, per-bin g with its km edges, ladder, objective
/// kind and final value.
pub fn model_json(
    net: &FlowNetwork,
    dist: &DistanceMatrix,
    cfg: &FitConfig,
    report: &FitReport,
) -> Value {
    let g_bins: Vec<Value> = report
        .params
        .g
        .iter()
        .zip(dist.edges())
        .map(|(value, upper)| json!({ "upper_km": upper, "value": value }))
        .collect();
    json!({
        "schema": SCHEMA_VERSION,
        "mode": mode_name(cfg.mode),
        "objective": objective_name(cfg.objective.kind),
        "objective_value": report.final_objective,
        "nodes": node_names(net),
        "w_out": report.params.w_out,
        "w_in": report.params.w_in,
        "g": g_bins,
        "ladder": cfg.ladder,
    })
}

/// Full fit report: trajectory, move log, final params and hierarchy.
pub fn report_json(net: &FlowNetwork, report: &FitReport) -> Result<Value> {
    let names = node_names(net);
    let moves: Vec<Value> = report
        .moves
        .iter()
        .map(|m| {
            json!({
                "sweep": m.sweep,
                "kind": m.kind,
                "subtree": m.subtree.iter().map(|&i| names[i].clone()).collect::<Vec<_>>(),
                "target": m.target.iter().map(|&i| names[i].clone()).collect::<Vec<_>>(),
                "old_level": m.old_level,
                "new_level": m.new_level,
                "gain": m.gain,
            })
        })
        .collect();
    Ok(json!({
        "schema": SCHEMA_VERSION,
        "converged": report.converged,
        "sweeps": report.sweeps,
        "final_objective": report.final_objective,
        "prefit_objective": report.prefit_objective,
        "trajectory": report.trajectory,
        "moves": moves,
        "params": {
            "w_out": report.params.w_out,
            "w_in": report.params.w_in,
            "g": report.params.g,
        },
        "hierarchy": to_newick(&report.hierarchy, &names)?,
    }))
}

/// Partition dump `{level, labels}` keyed by node id.
pub fn partition_json(partition: &Partition, names: &[String], exact: Option<bool>) -> Result<Value> {
    if names.len() != partition.len() {
        return Err(crate::error::Error::Validation(format!(
            "{} names supplied for a partition of {} nodes",
            names.len(),
            partition.len()
        )));
    }
    let labels: BTreeMap<&str, u32> = names
        .iter()
        .map(String::as_str)
        .zip(partition.labels().iter().copied())
        .collect();
    let mut value = json!({
        "schema": SCHEMA_VERSION,
        "level": partition.level,
        "k": partition.community_count(),
        "labels": labels,
    });
    if let Some(exact) = exact {
        value["exact"] = json!(exact);
    }
    Ok(value)
}

/// Reads a partition written by [`partition_json`] back into label and
/// name vectors (sorted by node id).
pub fn partition_from_json(value: &Value) -> Result<(Partition, Vec<String>)> {
    let level = value
        .get("level")
        .and_then(Value::as_f64)
        .ok_or_else(|| crate::error::Error::Validation("partition JSON lacks a level".into()))?;
    let labels_obj = value
        .get("labels")
        .and_then(Value::as_object)
        .ok_or_else(|| crate::error::Error::Validation("partition JSON lacks labels".into()))?;
    let mut entries: Vec<(String, u32)> = Vec::with_capacity(labels_obj.len());
    for (name, label) in labels_obj {
        let label = label.as_u64().ok_or_else(|| {
            crate::error::Error::Validation(format!("label for `{name}` is not an integer"))
        })?;
        entries.push((name.clone(), label as u32));
    }
    entries.sort();
    let names: Vec<String> = entries.iter().map(|(n, _)| n.clone()).collect();
    let raw: Vec<u32> = entries.iter().map(|(_, l)| *l).collect();
    Ok((Partition::from_labels(level, &raw), names))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::Partition;

    #[test]
    fn partition_json_round_trip() {
        let p = Partition::from_labels(0.4, &[1, 1, 0, 2]);
        let names: Vec<String> = ["d", "c", "b", "a"].iter().map(|s| s.to_string()).collect();
        let v = partition_json(&p, &names, Some(true)).unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["k"], 3);
        let (q, qnames) = partition_from_json(&v).unwrap();
        assert_eq!(qnames, vec!["a", "b", "c", "d"]);
        // same grouping after sorting by name: d,c together; b alone; a alone
        assert_eq!(q.community_count(), 3);
        assert_eq!(q.labels()[2], q.labels()[3]); // c and d share a community
    }
}
