//! Topological road networks and their classified counterparts.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Point, Polyline};
use crate::raster::NUM_CLASSES;

/// Maximum distance between a segment endpoint and its node.
pub const NODE_TOLERANCE: f64 = 1e-6;

/// Road symbol class of the map legend, 1 (walking path) to 5 (reinforced
/// road wider than 5 m).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct RoadClass(u8);

impl RoadClass {
    pub const ALL: [RoadClass; NUM_CLASSES] = [RoadClass(1), RoadClass(2), RoadClass(3), RoadClass(4), RoadClass(5)];

    pub fn new(value: u8) -> Option<Self> {
        (1..=NUM_CLASSES as u8).contains(&value).then_some(RoadClass(value))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Zero-based position (class 1 -> 0), also the probability band index.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_index(index: usize) -> Self {
        assert!(index < NUM_CLASSES, "class index {index} out of range");
        RoadClass(index as u8 + 1)
    }
}

impl TryFrom<u8> for RoadClass {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        RoadClass::new(v).ok_or_else(|| format!("road class {v} outside 1..5"))
    }
}

impl From<RoadClass> for u8 {
    fn from(c: RoadClass) -> u8 {
        c.0
    }
}

impl fmt::Display for RoadClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SegmentId(pub u32);

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub line: Polyline,
    pub start: NodeId,
    pub end: NodeId,
}

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("segment {segment} references unknown node {node:?}")]
    UnknownNode { segment: SegmentId, node: NodeId },
    #[error("segment {segment} endpoint is {distance} m from its node")]
    EndpointMismatch { segment: SegmentId, distance: f64 },
    #[error("interior vertex {vertex} of segment {segment} coincides with a node")]
    InteriorNode { segment: SegmentId, vertex: usize },
    #[error("duplicate segment id {0}")]
    DuplicateSegment(SegmentId),
}

/// Nodes joined by polyline segments; nodes sit at segment endpoints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoadNetwork {
    nodes: BTreeMap<NodeId, Point>,
    segments: BTreeMap<SegmentId, Segment>,
}

fn coord_key(p: Point) -> (u64, u64) {
    // +0.0 and -0.0 compare equal and must share a node
    ((p.x + 0.0).to_bits(), (p.y + 0.0).to_bits())
}

impl RoadNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds the network from polylines, creating one node per distinct
    /// endpoint coordinate. Node ids follow first appearance in id order.
    pub fn from_polylines(lines: impl IntoIterator<Item = (SegmentId, Polyline)>) -> Result<Self, NetworkError> {
        let mut sorted: Vec<(SegmentId, Polyline)> = lines.into_iter().collect();
        sorted.sort_by_key(|(id, _)| *id);
        let mut net = RoadNetwork::new();
        let mut index: HashMap<(u64, u64), NodeId> = HashMap::new();
        for (id, line) in sorted {
            if net.segments.contains_key(&id) {
                return Err(NetworkError::DuplicateSegment(id));
            }
            let mut node_for = |p: Point, net: &mut RoadNetwork| {
                *index.entry(coord_key(p)).or_insert_with(|| {
                    let nid = NodeId(net.nodes.len() as u32);
                    net.nodes.insert(nid, p);
                    nid
                })
            };
            let start = node_for(line.first(), &mut net);
            let end = node_for(line.last(), &mut net);
            net.segments.insert(id, Segment { line, start, end });
        }
        Ok(net)
    }

    pub fn add_node(&mut self, id: NodeId, p: Point) {
        self.nodes.insert(id, p);
    }

    pub fn add_segment(&mut self, id: SegmentId, seg: Segment) -> Result<(), NetworkError> {
        if self.segments.contains_key(&id) {
            return Err(NetworkError::DuplicateSegment(id));
        }
        self.segments.insert(id, seg);
        Ok(())
    }

    pub fn nodes(&self) -> &BTreeMap<NodeId, Point> {
        &self.nodes
    }

    pub fn segments(&self) -> &BTreeMap<SegmentId, Segment> {
        &self.segments
    }

    pub fn segment(&self, id: SegmentId) -> Option<&Segment> {
        self.segments.get(&id)
    }

    pub fn node(&self, id: NodeId) -> Option<Point> {
        self.nodes.get(&id).copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Number of segment ends attached to each node (a closed loop counts twice).
    pub fn degrees(&self) -> BTreeMap<NodeId, usize> {
        let mut deg: BTreeMap<NodeId, usize> = self.nodes.keys().map(|&k| (k, 0)).collect();
        for s in self.segments.values() {
            *deg.entry(s.start).or_default() += 1;
            *deg.entry(s.end).or_default() += 1;
        }
        deg
    }

    pub fn total_length(&self) -> f64 {
        self.segments.values().map(|s| s.line.length()).sum()
    }

    /// Drops segments matching `pred`, returning them; orphaned nodes are removed.
    pub fn split_off(&mut self, mut pred: impl FnMut(SegmentId, &Segment) -> bool) -> Vec<(SegmentId, Segment)> {
        let ids: Vec<SegmentId> = self.segments.iter().filter(|(id, s)| pred(**id, s)).map(|(id, _)| *id).collect();
        let removed: Vec<(SegmentId, Segment)> =
            ids.into_iter().map(|id| (id, self.segments.remove(&id).unwrap())).collect();
        let used: std::collections::BTreeSet<NodeId> =
            self.segments.values().flat_map(|s| [s.start, s.end]).collect();
        self.nodes.retain(|id, _| used.contains(id));
        removed
    }

    /// Checks endpoint/node agreement and that no interior vertex is a node.
    pub fn validate(&self) -> Result<(), NetworkError> {
        let node_keys: HashMap<(u64, u64), NodeId> = self.nodes.iter().map(|(id, p)| (coord_key(*p), *id)).collect();
        for (&sid, seg) in &self.segments {
            for (nid, p) in [(seg.start, seg.line.first()), (seg.end, seg.line.last())] {
                let node = self.nodes.get(&nid).ok_or(NetworkError::UnknownNode { segment: sid, node: nid })?;
                let d = node.distance(p);
                if d > NODE_TOLERANCE {
                    return Err(NetworkError::EndpointMismatch { segment: sid, distance: d });
                }
            }
            let v = seg.line.vertices();
            for (i, p) in v.iter().enumerate().take(v.len() - 1).skip(1) {
                if node_keys.contains_key(&coord_key(*p)) {
                    return Err(NetworkError::InteriorNode { segment: sid, vertex: i });
                }
            }
        }
        Ok(())
    }
}

/// Identifier of a classified section: parent segment plus position along it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SectionId {
    pub parent: SegmentId,
    pub index: u32,
}

impl fmt::Display for SectionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.parent.0, self.index)
    }
}

impl FromStr for SectionId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (p, i) = s.split_once('.').unwrap_or((s, "0"));
        let parent = p.parse::<u32>().map_err(|e| format!("bad section id {s:?}: {e}"))?;
        let index = i.parse::<u32>().map_err(|e| format!("bad section id {s:?}: {e}"))?;
        Ok(SectionId { parent: SegmentId(parent), index })
    }
}

/// A piece of a segment carrying one road class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedSection {
    pub line: Polyline,
    pub class: RoadClass,
    /// Mean class probabilities over the section used for the decision.
    pub mean_probabilities: Option<[f64; NUM_CLASSES]>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassifiedNetwork {
    sections: BTreeMap<SectionId, ClassifiedSection>,
}

impl ClassifiedNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: SectionId, section: ClassifiedSection) {
        self.sections.insert(id, section);
    }

    pub fn sections(&self) -> &BTreeMap<SectionId, ClassifiedSection> {
        &self.sections
    }

    pub fn len(&self) -> usize {
        self.sections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    /// Sections of one parent segment, in order along it.
    pub fn sections_of(&self, parent: SegmentId) -> impl Iterator<Item = (&SectionId, &ClassifiedSection)> {
        let lo = SectionId { parent, index: 0 };
        let hi = SectionId { parent, index: u32::MAX };
        self.sections.range(lo..=hi)
    }

    /// One section per segment, each with the given class.
    pub fn from_assignment(network: &RoadNetwork, classes: &BTreeMap<SegmentId, RoadClass>) -> Self {
        let mut out = ClassifiedNetwork::new();
        for (&id, seg) in network.segments() {
            if let Some(&class) = classes.get(&id) {
                out.insert(
                    SectionId { parent: id, index: 0 },
                    ClassifiedSection { line: seg.line.clone(), class, mean_probabilities: None },
                );
            }
        }
        out
    }

    /// Length per class, indexed by [`RoadClass::index`].
    pub fn length_by_class(&self) -> [f64; NUM_CLASSES] {
        let mut out = [0.0; NUM_CLASSES];
        for s in self.sections.values() {
            out[s.class.index()] += s.line.length();
        }
        out
    }

    /// Number of distinct parent segments.
    pub fn parent_count(&self) -> usize {
        let mut parents: Vec<SegmentId> = self.sections.keys().map(|k| k.parent).collect();
        parents.dedup();
        parents.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(pts: &[(f64, f64)]) -> Polyline {
        Polyline::new(pts.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap()
    }

    #[test]
    fn shared_endpoint_becomes_one_node() {
        let net = RoadNetwork::from_polylines([
            (SegmentId(0), line(&[(0.0, 0.0), (10.0, 0.0)])),
            (SegmentId(1), line(&[(10.0, 0.0), (20.0, 5.0)])),
        ])
        .unwrap();
        assert_eq!(net.node_count(), 3);
        let deg = net.degrees();
        assert_eq!(deg.values().filter(|&&d| d == 2).count(), 1);
        net.validate().unwrap();
    }

    #[test]
    fn t_junction_has_one_degree_three_node() {
        let net = RoadNetwork::from_polylines([
            (SegmentId(0), line(&[(0.0, 0.0), (10.0, 0.0)])),
            (SegmentId(1), line(&[(10.0, 0.0), (20.0, 0.0)])),
            (SegmentId(2), line(&[(10.0, 0.0), (10.0, 10.0)])),
        ])
        .unwrap();
        assert_eq!(net.node_count(), 4);
        let deg = net.degrees();
        assert_eq!(deg.values().filter(|&&d| d == 3).count(), 1);
        assert_eq!(deg.values().filter(|&&d| d == 1).count(), 3);
    }

    #[test]
    fn interior_node_is_reported() {
        let net = RoadNetwork::from_polylines([
            (SegmentId(0), line(&[(0.0, 0.0), (10.0, 0.0), (20.0, 0.0)])),
            (SegmentId(1), line(&[(10.0, 0.0), (10.0, 10.0)])),
        ])
        .unwrap();
        assert!(matches!(net.validate(), Err(NetworkError::InteriorNode { .. })));
    }

    #[test]
    fn road_class_bounds() {
        assert!(RoadClass::new(0).is_none());
        assert!(RoadClass::new(6).is_none());
        assert_eq!(RoadClass::new(3).unwrap().index(), 2);
    }

    #[test]
    fn section_id_text_form() {
        let id: SectionId = "17.2".parse().unwrap();
        assert_eq!(id, SectionId { parent: SegmentId(17), index: 2 });
        assert_eq!(id.to_string(), "17.2");
        assert_eq!("4".parse::<SectionId>().unwrap().index, 0);
    }
}
