use super::{NodeRecord, RawModel};
use crate::error::{Error, Result};

pub type RailNode = NodeRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct RailSegment {
    pub element_id: usize,
    pub node_a: RailNode,
    pub node_b: RailNode,
    /// Arclength of node a [m].
    pub s_start: f64,
    /// [m]
    pub length: f64,
}

/// The chain of rail elements ordered by arclength.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RailLine {
    segments: Vec<RailSegment>,
}

impl RailLine {
    pub fn build(model: &RawModel) -> Result<Self> {
        let node = |id: usize| {
            model
                .nodes
                .iter()
                .find(|n| n.id == id)
                .cloned()
                .ok_or_else(|| Error::InvalidModel(format!("unknown node {id}")))
        };
        let mut segments: Vec<RailSegment> = Vec::with_capacity(model.elements.len());
        for e in &model.elements {
            let (a, b) = (node(e.node_a)?, node(e.node_b)?);
            let length = b.s - a.s;
            if !(length > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "element {}: arclength must increase from node {} to node {}",
                    e.id, a.id, b.id
                )));
            }
            if let Some(prev) = segments.last() {
                if prev.node_b.id != a.id {
                    return Err(Error::InvalidModel(format!(
                        "element {} does not start at the end node of element {}",
                        e.id, prev.element_id
                    )));
                }
            }
            segments.push(RailSegment {
                element_id: e.id,
                s_start: a.s,
                length,
                node_a: a,
                node_b: b,
            });
        }
        Ok(RailLine { segments })
    }

    pub fn segments(&self) -> &[RailSegment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn s_min(&self) -> f64 {
        self.segments.first().map_or(f64::NAN, |s| s.s_start)
    }

    pub fn s_max(&self) -> f64 {
        self.segments.last().map_or(f64::NAN, |s| s.node_b.s)
    }

    /// Element index and local coordinate `xi` in [0, 1] of arclength `s`.
    /// A shared node belongs to the downstream element.
    pub fn locate(&self, s: f64) -> Result<(usize, f64)> {
        let (min, max) = (self.s_min(), self.s_max());
        if self.segments.is_empty() || !(s >= min && s <= max) {
            return Err(Error::OutOfRange { s, min, max });
        }
        let idx = self.segments.partition_point(|seg| seg.s_start <= s) - 1;
        let seg = &self.segments[idx];
        let xi = ((s - seg.s_start) / seg.length).clamp(0.0, 1.0);
        Ok((idx, xi))
    }
}
