//! GeoJSON FeatureCollections of LineStrings in projected meters.

use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use super::{io_err, IoError};
use crate::geom::{Point, Polyline};
use crate::network::{
    ClassifiedNetwork, ClassifiedSection, RoadClass, RoadNetwork, SectionId, SegmentId,
};

#[derive(Debug, Clone, PartialEq)]
pub struct LineFeature {
    pub line: Polyline,
    pub properties: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LineCollection {
    pub crs_epsg: Option<u32>,
    pub features: Vec<LineFeature>,
}

pub fn write_line_collection(path: &Path, collection: &LineCollection) -> Result<(), IoError> {
    let features: Vec<Value> = collection
        .features
        .iter()
        .map(|f| {
            let coords: Vec<Value> = f.line.vertices().iter().map(|p| json!([p.x, p.y])).collect();
            json!({
                "type": "Feature",
                "properties": Value::Object(f.properties.clone()),
                "geometry": { "type": "LineString", "coordinates": coords },
            })
        })
        .collect();
    let mut root = Map::new();
    root.insert("type".into(), json!("FeatureCollection"));
    if let Some(epsg) = collection.crs_epsg {
        root.insert("crs_epsg".into(), json!(epsg));
    }
    root.insert("features".into(), Value::Array(features));
    let text = serde_json::to_string_pretty(&Value::Object(root)).expect("json serializes");
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_line_collection(path: &Path) -> Result<LineCollection, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let fmt = |reason: String| IoError::Format { path: path.to_path_buf(), reason };
    let root: Value = serde_json::from_str(&text).map_err(|e| fmt(format!("invalid JSON: {e}")))?;
    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(fmt("not a FeatureCollection".into()));
    }
    let crs_epsg = match root.get("crs_epsg") {
        None | Some(Value::Null) => None,
        Some(v) => Some(v.as_u64().and_then(|v| u32::try_from(v).ok()).ok_or_else(|| fmt(format!("bad crs_epsg {v}")))?),
    };
    let feats = root.get("features").and_then(Value::as_array).ok_or_else(|| fmt("missing features array".into()))?;
    let mut features = Vec::with_capacity(feats.len());
    for (i, f) in feats.iter().enumerate() {
        let ferr = |reason: String| IoError::Feature { path: path.to_path_buf(), feature: i, reason };
        let geom = f.get("geometry").ok_or_else(|| ferr("missing geometry".into()))?;
        let gtype = geom.get("type").and_then(Value::as_str).unwrap_or("<none>");
        if gtype != "LineString" {
            return Err(ferr(format!("geometry type {gtype} is not LineString")));
        }
        let coords = geom.get("coordinates").and_then(Value::as_array).ok_or_else(|| ferr("missing coordinates".into()))?;
        let pts = coords
            .iter()
            .map(|c| match c.as_array().map(|a| a.as_slice()) {
                Some([x, y, ..]) => match (x.as_f64(), y.as_f64()) {
                    (Some(x), Some(y)) => Ok(Point::new(x, y)),
                    _ => Err(ferr(format!("non-numeric coordinate {c}"))),
                },
                _ => Err(ferr(format!("bad position {c}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let line = Polyline::new(pts).map_err(|source| IoError::Geometry { path: path.to_path_buf(), feature: i, source })?;
        let properties = match f.get("properties") {
            None | Some(Value::Null) => Map::new(),
            Some(Value::Object(m)) => m.clone(),
            Some(other) => return Err(ferr(format!("properties must be an object, got {other}"))),
        };
        features.push(LineFeature { line, properties });
    }
    Ok(LineCollection { crs_epsg, features })
}

pub fn write_road_network(path: &Path, network: &RoadNetwork, crs_epsg: Option<u32>) -> Result<(), IoError> {
    let features = network
        .segments()
        .iter()
        .map(|(id, seg)| {
            let mut properties = Map::new();
            properties.insert("segment_id".into(), json!(id.to_string()));
            properties.insert("start_node".into(), json!(seg.start.0));
            properties.insert("end_node".into(), json!(seg.end.0));
            LineFeature { line: seg.line.clone(), properties }
        })
        .collect();
    write_line_collection(path, &LineCollection { crs_epsg, features })
}

/// Reads a network; node topology is rebuilt from coordinate-equal endpoints.
pub fn read_road_network(path: &Path) -> Result<RoadNetwork, IoError> {
    let collection = read_line_collection(path)?;
    let lines = collection.features.into_iter().enumerate().map(|(i, f)| {
        let id = f
            .properties
            .get("segment_id")
            .and_then(|v| v.as_str().map(str::to_owned).or_else(|| v.as_u64().map(|n| n.to_string())))
            .and_then(|s| s.parse::<u32>().ok())
            .unwrap_or(i as u32);
        (SegmentId(id), f.line)
    });
    RoadNetwork::from_polylines(lines).map_err(|source| IoError::Network { path: path.to_path_buf(), source })
}

pub fn write_classified_network(path: &Path, network: &ClassifiedNetwork, crs_epsg: Option<u32>) -> Result<(), IoError> {
    let features = network
        .sections()
        .iter()
        .map(|(id, s)| {
            let mut properties = Map::new();
            properties.insert("segment_id".into(), json!(id.to_string()));
            properties.insert("parent_segment".into(), json!(id.parent.0));
            properties.insert("road_class".into(), json!(s.class.get()));
            if let Some(p) = s.mean_probabilities {
                properties.insert("mean_probabilities".into(), json!(p));
            }
            LineFeature { line: s.line.clone(), properties }
        })
        .collect();
    write_line_collection(path, &LineCollection { crs_epsg, features })
}

pub fn read_classified_network(path: &Path) -> Result<ClassifiedNetwork, IoError> {
    let collection = read_line_collection(path)?;
    let mut out = ClassifiedNetwork::new();
    for (i, f) in collection.features.into_iter().enumerate() {
        let ferr = |reason: String| IoError::Feature { path: path.to_path_buf(), feature: i, reason };
        let raw = f.properties.get("road_class").ok_or_else(|| ferr("missing road_class".into()))?;
        let class = raw
            .as_u64()
            .and_then(|v| u8::try_from(v).ok())
            .and_then(RoadClass::new)
            .ok_or_else(|| ferr(format!("road_class {raw} outside 1..5")))?;
        let id = f
            .properties
            .get("segment_id")
            .and_then(|v| v.as_str().map(str::to_owned).or_else(|| v.as_u64().map(|n| n.to_string())))
            .and_then(|s| s.parse::<SectionId>().ok())
            .unwrap_or(SectionId { parent: SegmentId(i as u32), index: 0 });
        let mean_probabilities = f.properties.get("mean_probabilities").and_then(|v| {
            let a = v.as_array()?;
            if a.len() != 5 {
                return None;
            }
            let mut out = [0.0; 5];
            for (o, x) in out.iter_mut().zip(a) {
                *o = x.as_f64()?;
            }
            Some(out)
        });
        if out.sections().contains_key(&id) {
            return Err(ferr(format!("duplicate segment_id {id}")));
        }
        out.insert(id, ClassifiedSection { line: f.line, class, mean_probabilities });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(pts: &[(f64, f64)]) -> Polyline {
        Polyline::new(pts.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap()
    }

    #[test]
    fn network_round_trip_rebuilds_topology() {
        let dir = tempfile::tempdir().unwrap();
        let net = RoadNetwork::from_polylines([
            (SegmentId(3), line(&[(600_000.1, 200_000.3), (600_010.7, 200_000.3)])),
            (SegmentId(9), line(&[(600_010.7, 200_000.3), (600_020.0, 199_990.123_456_789)])),
        ])
        .unwrap();
        let p = dir.path().join("n.geojson");
        write_road_network(&p, &net, Some(21781)).unwrap();
        let back = read_road_network(&p).unwrap();
        assert_eq!(back, net);
        assert_eq!(read_line_collection(&p).unwrap().crs_epsg, Some(21781));
    }

    #[test]
    fn classified_round_trip_keeps_class() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = ClassifiedNetwork::new();
        c.insert(
            SectionId { parent: SegmentId(4), index: 1 },
            ClassifiedSection {
                line: line(&[(0.0, 0.0), (1.0 / 3.0, 2.0 / 7.0)]),
                class: RoadClass::new(3).unwrap(),
                mean_probabilities: Some([0.1, 0.2, 0.5, 0.1, 0.1]),
            },
        );
        let p = dir.path().join("c.geojson");
        write_classified_network(&p, &c, None).unwrap();
        assert_eq!(read_classified_network(&p).unwrap(), c);
    }

    #[test]
    fn rejects_bad_class_and_geometry() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.geojson");
        fs::write(
            &p,
            r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{"road_class":7},
               "geometry":{"type":"LineString","coordinates":[[0,0],[1,1]]}}]}"#,
        )
        .unwrap();
        assert!(matches!(read_classified_network(&p), Err(IoError::Feature { .. })));
        fs::write(
            &p,
            r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{},
               "geometry":{"type":"Point","coordinates":[0,0]}}]}"#,
        )
        .unwrap();
        assert!(matches!(read_road_network(&p), Err(IoError::Feature { .. })));
    }
}
