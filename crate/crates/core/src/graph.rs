//! Network data model: node registry, observed flows e(a, b), CSV
//! ingestion, great-circle distances, and distance binning.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius in kilometres (IUGG mean radius R1).
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// A geographic point in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::Validation(format!(
                "latitude {lat} out of range [-90, 90]"
            )));
        }
        if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::Validation(format!(
                "longitude {lon} out of range [-180, 180]"
            )));
        }
        Ok(GeoPoint { lat, lon })
    }
}

/// One node of the network: identifier, display label, optional location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: String,
    pub label: String,
    pub coordinate: Option<GeoPoint>,
}

impl NodeRecord {
    pub fn new(id: impl Into<String>) -> Self {
        let id = id.into();
        NodeRecord {
            label: id.clone(),
            id,
            coordinate: None,
        }
    }

    pub fn with_coordinate(mut self, lat: f64, lon: f64) -> Result<Self> {
        self.coordinate = Some(GeoPoint::new(lat, lon)?);
        Ok(self)
    }
}

/// Directed weighted network of observed flows, stored dense row-major
/// with `flows[a * n + b] = e(a, b)`.
///
/// Immutable after construction; shared reads are safe.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowNetwork {
    nodes: Vec<NodeRecord>,
    flows: Vec<f64>,
    index: HashMap<String, usize>,
    pub directed: bool,
}

impl FlowNetwork {
    pub fn new(nodes: Vec<NodeRecord>, flows: Vec<f64>) -> Result<Self> {
        let n = nodes.len();
        if flows.len() != n * n {
            return Err(Error::Validation(format!(
                "flow matrix has {} entries, expected {} for {} nodes",
                flows.len(),
                n * n,
                n
            )));
        }
        for (i, w) in flows.iter().enumerate() {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::Validation(format!(
                    "flow ({}, {}) is {}; flows must be finite and non-negative",
                    i / n,
                    i % n,
                    w
                )));
            }
        }
        let mut index = HashMap::with_capacity(n);
        for (i, rec) in nodes.iter().enumerate() {
            if index.insert(rec.id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate node id `{}`", rec.id)));
            }
        }
        Ok(FlowNetwork {
            nodes,
            flows,
            index,
            directed: true,
        })
    }

    /// Builds a network over an explicit node registry from parsed edge rows.
    /// Every endpoint must be present in the registry.
    pub fn with_registry(nodes: Vec<NodeRecord>, edges: &[EdgeRow]) -> Result<Self> {
        let n = nodes.len();
        let mut net = FlowNetwork::new(nodes, vec![0.0; n * n])?;
        let mut seen = HashSet::new();
        for row in edges {
            let a = net.index.get(&row.origin).copied().ok_or_else(|| {
                Error::Validation(format!(
                    "edge references unknown node id `{}` (line {})",
                    row.origin, row.line
                ))
            })?;
            let b = net.index.get(&row.destination).copied().ok_or_else(|| {
                Error::Validation(format!(
                    "edge references unknown node id `{}` (line {})",
                    row.destination, row.line
                ))
            })?;
            if !seen.insert((a, b)) {
                return Err(Error::Validation(format!(
                    "duplicate edge ({}, {}) at line {}",
                    row.origin, row.destination, row.line
                )));
            }
            net.flows[a * n + b] = row.weight;
        }
        Ok(net)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &NodeRecord {
        &self.nodes[i]
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn flow(&self, a: usize, b: usize) -> f64 {
        self.flows[a * self.node_count() + b]
    }

    pub fn flows(&self) -> &[f64] {
        &self.flows
    }

    /// True when every node carries a coordinate.
    pub fn fully_located(&self) -> bool {
        self.nodes.iter().all(|r| r.coordinate.is_some())
    }
}

/// One parsed `(origin, destination, weight)` row, with its source line.
#[derive(Debug, Clone)]
pub struct EdgeRow {
    pub origin: String,
    pub destination: String,
    pub weight: f64,
    pub line: u64,
}

/// Delimiter/header options for the CSV readers.
#[derive(Debug, Clone, Copy)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            delimiter: b',',
            has_header: true,
        }
    }
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Reads `(origin, destination, weight)` rows from a CSV file.
pub fn parse_edge_rows(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Vec<EdgeRow>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(options.has_header)
        .flexible(true)
        .from_path(path)
        .map_err(|e| parse_err(path, 0, e.to_string()))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(path, 0, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].trim().is_empty() {
            continue; // blank line
        }
        if record.len() < 3 {
            return Err(parse_err(
                path,
                line,
                format!("expected 3 fields (origin,destination,weight), got {}", record.len()),
            ));
        }
        let weight: f64 = record[2]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, line, format!("invalid weight `{}`", &record[2])))?;
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::Validation(format!(
                "{}:{}: weight {} is negative or not finite",
                path.display(),
                line,
                weight
            )));
        }
        rows.push(EdgeRow {
            origin: record[0].trim().to_string(),
            destination: record[1].trim().to_string(),
            weight,
            line,
        });
    }
    Ok(rows)
}

/// Parses an edge-list CSV into a network, registering nodes in order of
/// first appearance.
pub fn parse_edge_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<FlowNetwork> {
    let rows = parse_edge_rows(&path, options)?;
    let mut nodes = Vec::new();
    let mut seen = HashSet::new();
    for row in &rows {
        for id in [&row.origin, &row.destination] {
            if seen.insert(id.clone()) {
                nodes.push(NodeRecord::new(id.clone()));
            }
        }
    }
    FlowNetwork::with_registry(nodes, &rows)
}

/// Parses a node registry CSV with columns `id,label[,lat,lon]`.
pub fn parse_nodes_csv(path: impl AsRef<Path>) -> Result<Vec<NodeRecord>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| parse_err(path, 0, e.to_string()))?;
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(path, 0, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        if record.len() < 2 {
            return Err(parse_err(
                path,
                line,
                format!("expected at least 2 fields (id,label), got {}", record.len()),
            ));
        }
        let id = record[0].trim().to_string();
        if !ids.insert(id.clone()) {
            return Err(Error::Validation(format!(
                "{}:{}: duplicate node id `{}`",
                path.display(),
                line,
                id
            )));
        }
        let lat = record.get(2).map(str::trim).filter(|s| !s.is_empty());
        let lon = record.get(3).map(str::trim).filter(|s| !s.is_empty());
        let coordinate = match (lat, lon) {
            (None, None) => None,
            (Some(lat), Some(lon)) => {
                let lat: f64 = lat
                    .parse()
                    .map_err(|_| parse_err(path, line, format!("invalid latitude `{lat}`")))?;
                let lon: f64 = lon
                    .parse()
                    .map_err(|_| parse_err(path, line, format!("invalid longitude `{lon}`")))?;
                Some(GeoPoint::new(lat, lon).map_err(|e| {
                    Error::Validation(format!("{}:{}: {}", path.display(), line, e))
                })?)
            }
            _ => {
                return Err(parse_err(path, line, "latitude and longitude must both be present or both absent"));
            }
        };
        records.push(NodeRecord {
            id,
            label: record[1].trim().to_string(),
            coordinate,
        });
    }
    Ok(records)
}

/// Writes the full ordered-pair edge list (including zero flows) so a
/// re-parse reproduces the node registry and flow matrix exactly.
pub fn write_edge_csv<W: Write>(net: &FlowNetwork, mut out: W) -> Result<()> {
    writeln!(out, "origin,destination,weight")?;
    let n = net.node_count();
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            writeln!(
                out,
                "{},{},{}",
                net.node(a).id,
                net.node(b).id,
                net.flow(a, b)
            )?;
        }
    }
    Ok(())
}

/// Great-circle distance in km between two points (haversine on a sphere
/// of radius [`EARTH_RADIUS_KM`]).
pub fn great_circle_distance(p: GeoPoint, q: GeoPoint) -> f64 {
    let lat1 = p.lat.to_radians();
    let lat2 = q.lat.to_radians();
    let dlat = (q.lat - p.lat).to_radians() / 2.0;
    let dlon = (q.lon - p.lon).to_radians() / 2.0;
    let a = dlat.sin().powi(2) + lat1.cos() * lat2.cos() * dlon.sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

/// How pairwise distances are grouped into bins for the deterrence g(D).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum BinSpec {
    /// `count` equal-width bins over [0, max distance].
    Linear { count: usize },
    /// `count` geometric bins over [min positive distance, max distance];
    /// zero-distance pairs fall into the first bin.
    Logarithmic { count: usize },
    /// Explicit ascending upper edges in km; a distance above the last
    /// edge is an error.
    ExplicitEdges { edges: Vec<f64> },
}

impl BinSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            BinSpec::Linear { count } | BinSpec::Logarithmic { count } => {
                if *count == 0 {
                    return Err(Error::Validation("bin count must be at least 1".into()));
                }
            }
            BinSpec::ExplicitEdges { edges } => {
                if edges.is_empty() {
                    return Err(Error::Validation("explicit bin edges must be non-empty".into()));
                }
                if edges.iter().any(|e| !e.is_finite() || *e < 0.0) {
                    return Err(Error::Validation("bin edges must be finite and non-negative".into()));
                }
                if edges.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Validation("bin edges must be strictly ascending".into()));
                }
            }
        }
        Ok(())
    }
}

impl Default for BinSpec {
    fn default() -> Self {
        BinSpec::Logarithmic { count: 12 }
    }
}

/// Symmetric pairwise distances plus the bin id of every off-diagonal
/// pair. Bin `i` covers distances up to `edges[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
    bin_index: Vec<usize>,
    edges: Vec<f64>,
}

impl DistanceMatrix {
    /// Unit distances and a single bin: the generic-network reduction
    /// where d(a,b) := 1 and g has one value.
    pub fn unit(n: usize) -> Self {
        let mut values = vec![1.0; n * n];
        for i in 0..n {
            values[i * n + i] = 0.0;
        }
        DistanceMatrix {
            n,
            values,
            bin_index: vec![0; n * n],
            edges: vec![1.0],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bin_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.n + b]
    }

    pub fn bin(&self, a: usize, b: usize) -> usize {
        self.bin_index[a * self.n + b]
    }

    fn from_values(n: usize, values: Vec<f64>, spec: &BinSpec) -> Result<Self> {
        spec.validate()?;
        let mut dmax: f64 = 0.0;
        let mut dmin_pos = f64::INFINITY;
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let d = values[a * n + b];
                dmax = dmax.max(d);
                if d > 0.0 {
                    dmin_pos = dmin_pos.min(d);
                }
            }
        }
        let edges = match spec {
            BinSpec::Linear { count } => {
                if dmax <= 0.0 {
                    vec![0.0]
                } else {
                    (1..=*count).map(|i| dmax * i as f64 / *count as f64).collect()
                }
            }
            BinSpec::Logarithmic { count } => {
                if !dmin_pos.is_finite() || dmin_pos >= dmax {
                    vec![dmax]
                } else {
                    let ratio = (dmax / dmin_pos).powf(1.0 / *count as f64);
                    let mut edges: Vec<f64> =
                        (1..=*count).map(|i| dmin_pos * ratio.powi(i as i32)).collect();
                    *edges.last_mut().unwrap() = dmax;
                    if edges.windows(2).any(|w| w[0] >= w[1]) {
                        vec![dmax]
                    } else {
                        edges
                    }
                }
            }
            BinSpec::ExplicitEdges { edges } => edges.clone(),
        };
        let explicit = matches!(spec, BinSpec::ExplicitEdges { .. });
        let mut bin_index = vec![0usize; n * n];
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let d = values[a * n + b];
                let mut idx = edges.partition_point(|e| *e < d);
                if idx == edges.len() {
                    if explicit {
                        return Err(Error::Validation(format!(
                            "distance {:.3} km between nodes {} and {} exceeds the last bin edge {:.3}",
                            d,
                            a,
                            b,
                            edges.last().unwrap()
                        )));
                    }
                    idx = edges.len() - 1; // float guard: d == dmax by construction
                }
                bin_index[a * n + b] = idx;
            }
        }
        Ok(DistanceMatrix {
            n,
            values,
            bin_index,
            edges,
        })
    }

    /// Distances from node coordinates via [`great_circle_distance`].
    pub fn from_coordinates(net: &FlowNetwork, spec: &BinSpec) -> Result<Self> {
        let n = net.node_count();
        let mut coords = Vec::with_capacity(n);
        for rec in net.nodes() {
            match rec.coordinate {
                Some(c) => coords.push(c),
                None => {
                    return Err(Error::Validation(format!(
                        "node `{}` has no coordinate and no explicit distances were supplied",
                        rec.id
                    )))
                }
            }
        }
        let mut values = vec![0.0; n * n];
        for a in 0..n {
            for b in (a + 1)..n {
                let d = great_circle_distance(coords[a], coords[b]);
                values[a * n + b] = d;
                values[b * n + a] = d;
            }
        }
        Self::from_values(n, values, spec)
    }

    /// Distances from an explicit `(id_a, id_b, km)` pair list. Every
    /// off-diagonal pair must be covered in at least one direction;
    /// conflicting asymmetric entries are rejected.
    pub fn from_pairwise(
        net: &FlowNetwork,
        pairs: &[(String, String, f64)],
        spec: &BinSpec,
    ) -> Result<Self> {
        let n = net.node_count();
        let mut values = vec![f64::NAN; n * n];
        for i in 0..n {
            values[i * n + i] = 0.0;
        }
        for (ida, idb, km) in pairs {
            let a = net
                .node_index(ida)
                .ok_or_else(|| Error::Validation(format!("unknown node id `{ida}` in distance file")))?;
            let b = net
                .node_index(idb)
                .ok_or_else(|| Error::Validation(format!("unknown node id `{idb}` in distance file")))?;
            if !km.is_finite() || *km < 0.0 {
                return Err(Error::Validation(format!(
                    "distance ({ida}, {idb}) is {km}; must be finite and non-negative"
                )));
            }
            if a == b {
                if *km != 0.0 {
                    return Err(Error::Validation(format!(
                        "self-distance ({ida}, {idb}) must be zero, got {km}"
                    )));
                }
                continue;
            }
            for (x, y) in [(a, b), (b, a)] {
                let cell = &mut values[x * n + y];
                if cell.is_nan() {
                    *cell = *km;
                } else if *cell != *km {
                    return Err(Error::Validation(format!(
                        "conflicting distances for pair ({ida}, {idb}): {} vs {km}",
                        *cell
                    )));
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                if values[a * n + b].is_nan() {
                    return Err(Error::Validation(format!(
                        "missing distance for pair ({}, {})",
                        net.node(a).id,
                        net.node(b).id
                    )));
                }
            }
        }
        Self::from_values(n, values, spec)
    }
}

/// Builds the distance matrix from coordinates, or from an explicit
/// pairwise override when one is supplied.
pub fn build_distance_matrix(
    net: &FlowNetwork,
    spec: &BinSpec,
    explicit: Option<&[(String, String, f64)]>,
) -> Result<DistanceMatrix> {
    match explicit {
        Some(pairs) => DistanceMatrix::from_pairwise(net, pairs, spec),
        None => DistanceMatrix::from_coordinates(net, spec),
    }
}

/// Reads an `(id_a, id_b, km)` pairwise distance CSV.
pub fn parse_distance_csv(path: impl AsRef<Path>) -> Result<Vec<(String, String, f64)>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(|e| parse_err(path, 0, e.to_string()))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(path, 0, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() < 3 {
            return Err(parse_err(
                path,
                line,
                format!("expected 3 fields (id_a,id_b,km), got {}", record.len()),
            ));
        }
        let km: f64 = record[2]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, line, format!("invalid distance `{}`", &record[2])))?;
        out.push((record[0].trim().to_string(), record[1].trim().to_string(), km));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn temp_csv(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parse_single_row() {
        let f = temp_csv("origin,destination,weight\nA,B,5\n");
        let net = parse_edge_csv(f.path(), &CsvOptions::default()).unwrap();
        assert_eq!(net.node_count(), 2);
        assert_eq!(net.flow(0, 1), 5.0);
        assert_eq!(net.flow(1, 0), 0.0);
    }

    #[test]
    fn parse_header_only() {
        let f = temp_csv("origin,destination,weight\n");
        let net = parse_edge_csv(f.path(), &CsvOptions::default()).unwrap();
        assert_eq!(net.node_count(), 0);
    }

    #[test]
    fn negative_weight_rejected() {
        let f = temp_csv("origin,destination,weight\nA,B,-1\n");
        let err = parse_edge_csv(f.path(), &CsvOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn duplicate_pair_rejected() {
        let f = temp_csv("origin,destination,weight\nA,B,1\nA,B,2\n");
        let err = parse_edge_csv(f.path(), &CsvOptions::default()).unwrap_err();
        assert!(err.to_string().contains("duplicate edge"), "{err}");
    }

    #[test]
    fn malformed_row_reports_line() {
        let f = temp_csv("origin,destination,weight\nA,B,1\nA,C,not_a_number\n");
        let err = parse_edge_csv(f.path(), &CsvOptions::default()).unwrap_err();
        assert!(err.to_string().contains(":3:"), "{err}");
    }

    #[test]
    fn nodes_csv_with_coordinates() {
        let f = temp_csv("id,label,lat,lon\nNY,New York,40.7128,-74.0060\n");
        let recs = parse_nodes_csv(f.path()).unwrap();
        assert_eq!(recs.len(), 1);
        let c = recs[0].coordinate.unwrap();
        assert_eq!(c.lat, 40.7128);
        assert_eq!(c.lon, -74.0060);
    }

    #[test]
    fn nodes_csv_without_coordinates() {
        let f = temp_csv("id,label\nNY,New York\n");
        let recs = parse_nodes_csv(f.path()).unwrap();
        assert!(recs[0].coordinate.is_none());
    }

    #[test]
    fn nodes_csv_latitude_out_of_range() {
        let f = temp_csv("id,label,lat,lon\nX,Bad,95,0\n");
        assert!(parse_nodes_csv(f.path()).is_err());
    }

    #[test]
    fn nodes_csv_duplicate_id() {
        let f = temp_csv("id,label\nA,a\nA,b\n");
        assert!(parse_nodes_csv(f.path()).is_err());
    }

    #[test]
    fn haversine_identity() {
        let p = GeoPoint::new(40.7128, -74.0060).unwrap();
        assert_eq!(great_circle_distance(p, p), 0.0);
    }

    #[test]
    fn haversine_ny_to_la() {
        // frozen from an independent high-precision haversine computation
        let ny = GeoPoint::new(40.7128, -74.0060).unwrap();
        let la = GeoPoint::new(34.0522, -118.2437).unwrap();
        let d = great_circle_distance(ny, la);
        assert!((d - 3935.751690893986).abs() < 1e-6, "got {d}");
    }

    #[test]
    fn haversine_antipodal() {
        let p = GeoPoint::new(0.0, 0.0).unwrap();
        let q = GeoPoint::new(0.0, 180.0).unwrap();
        let d = great_circle_distance(p, q);
        assert!((d - std::f64::consts::PI * EARTH_RADIUS_KM).abs() < 1e-9, "got {d}");
    }

    fn two_node_net(coords: &[(f64, f64)]) -> FlowNetwork {
        let nodes: Vec<NodeRecord> = coords
            .iter()
            .enumerate()
            .map(|(i, (lat, lon))| {
                NodeRecord::new(format!("n{i}"))
                    .with_coordinate(*lat, *lon)
                    .unwrap()
            })
            .collect();
        let n = nodes.len();
        FlowNetwork::new(nodes, vec![0.0; n * n]).unwrap()
    }

    #[test]
    fn same_point_single_linear_bin() {
        let net = two_node_net(&[(10.0, 10.0), (10.0, 10.0)]);
        let dm = DistanceMatrix::from_coordinates(&net, &BinSpec::Linear { count: 1 }).unwrap();
        assert_eq!(dm.bin(0, 1), 0);
        assert_eq!(dm.bin(1, 0), 0);
    }

    #[test]
    fn explicit_edges_lookup() {
        let net = {
            let nodes = vec![NodeRecord::new("a"), NodeRecord::new("b")];
            FlowNetwork::new(nodes, vec![0.0; 4]).unwrap()
        };
        let pairs = vec![("a".to_string(), "b".to_string(), 500.0)];
        let dm = DistanceMatrix::from_pairwise(
            &net,
            &pairs,
            &BinSpec::ExplicitEdges { edges: vec![100.0, 1000.0] },
        )
        .unwrap();
        assert_eq!(dm.bin(0, 1), 1);
    }

    #[test]
    fn explicit_edges_overflow_rejected() {
        let net = {
            let nodes = vec![NodeRecord::new("a"), NodeRecord::new("b")];
            FlowNetwork::new(nodes, vec![0.0; 4]).unwrap()
        };
        let pairs = vec![("a".to_string(), "b".to_string(), 5000.0)];
        let err = DistanceMatrix::from_pairwise(
            &net,
            &pairs,
            &BinSpec::ExplicitEdges { edges: vec![100.0, 1000.0] },
        )
        .unwrap_err();
        assert!(err.to_string().contains("exceeds"), "{err}");
    }

    #[test]
    fn unit_matrix_is_single_bin() {
        let dm = DistanceMatrix::unit(4);
        assert_eq!(dm.bin_count(), 1);
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    assert_eq!(dm.bin(a, b), 0);
                    assert_eq!(dm.distance(a, b), 1.0);
                } else {
                    assert_eq!(dm.distance(a, b), 0.0);
                }
            }
        }
    }

    #[test]
    fn missing_coordinates_error_names_node() {
        let nodes = vec![NodeRecord::new("a"), NodeRecord::new("b")];
        let net = FlowNetwork::new(nodes, vec![0.0; 4]).unwrap();
        let err = DistanceMatrix::from_coordinates(&net, &BinSpec::default()).unwrap_err();
        assert!(err.to_string().contains("`a`"), "{err}");
    }

    #[test]
    fn edge_csv_round_trip() {
        let f = temp_csv("origin,destination,weight\nA,B,5\nB,A,2.5\nA,C,0.125\n");
        let net = parse_edge_csv(f.path(), &CsvOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_edge_csv(&net, &mut buf).unwrap();
        let f2 = temp_csv(std::str::from_utf8(&buf).unwrap());
        let net2 = parse_edge_csv(f2.path(), &CsvOptions::default()).unwrap();
        assert_eq!(net.flows(), net2.flows());
        assert_eq!(
            net.nodes().iter().map(|r| &r.id).collect::<Vec<_>>(),
            net2.nodes().iter().map(|r| &r.id).collect::<Vec<_>>()
        );
    }
}
