//! Ground-truth wireframe annotations.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Point2, Result};

/// Junctions in image pixels plus lines as index pairs into the junction list.
///
/// JSON form: `{"size":[W,H],"junctions":[[x,y],...],"lines":[[i,j],...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAnnotation")]
pub struct Annotation {
    pub size: [u32; 2],
    pub junctions: Vec<Point2>,
    pub lines: Vec<[usize; 2]>,
}

#[derive(Deserialize)]
struct RawAnnotation {
    size: [u32; 2],
    junctions: Vec<Point2>,
    lines: Vec<[usize; 2]>,
}

impl TryFrom<RawAnnotation> for Annotation {
    type Error = Error;

    fn try_from(raw: RawAnnotation) -> Result<Self> {
        Annotation::new(raw.size, raw.junctions, raw.lines)
    }
}

impl Annotation {
    pub fn new(size: [u32; 2], junctions: Vec<Point2>, lines: Vec<[usize; 2]>) -> Result<Self> {
        let ann = Self { size, junctions, lines };
        ann.validate()?;
        Ok(ann)
    }

    pub fn width(&self) -> u32 {
        self.size[0]
    }

    pub fn height(&self) -> u32 {
        self.size[1]
    }

    pub fn validate(&self) -> Result<()> {
        if self.size[0] == 0 || self.size[1] == 0 {
            return Err(Error::invalid("annotation", format!("image size {:?} must be positive", self.size)));
        }
        if let Some((i, p)) = self.junctions.iter().enumerate().find(|(_, p)| !p.is_finite()) {
            return Err(Error::invalid("annotation", format!("junction {i} {p:?} is not finite")));
        }
        let n = self.junctions.len();
        let mut seen = BTreeSet::new();
        for (k, &[a, b]) in self.lines.iter().enumerate() {
            if a >= n || b >= n {
                return Err(Error::invalid(
                    "annotation",
                    format!("line {k} [{a}, {b}] references a junction outside 0..{n}"),
                ));
            }
            if a == b {
                return Err(Error::invalid("annotation", format!("line {k} [{a}, {b}] joins a junction to itself")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::invalid("annotation", format!("line {k} [{a}, {b}] duplicates an earlier line")));
            }
        }
        Ok(())
    }

    /// Endpoints of every line, in annotation order.
    pub fn segments(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        self.lines.iter().map(|&[a, b]| (self.junctions[a], self.junctions[b]))
    }
}
