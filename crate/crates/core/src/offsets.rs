//! Discrete depth-shift classes laid out on a rotated ellipse.
//!
//! Class 0 is the aligned case `(0, 0)`. Classes `1..N` sit at equally spaced
//! parameter angles on the ellipse perimeter, starting at angle 0.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Pixel displacement of the depth plane. `dy` grows downward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OffsetClass {
    pub id: usize,
    pub dx: i32,
    pub dy: i32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseSpec {
    pub n_classes: usize,
    pub major_axis: f64,
    pub minor_axis: f64,
    /// Clockwise from the x-axis, degrees.
    pub rotation_deg: f64,
}

impl Default for EllipseSpec {
    fn default() -> Self {
        Self {
            n_classes: 9,
            major_axis: 32.0,
            minor_axis: 16.0,
            rotation_deg: 45.0,
        }
    }
}

pub fn generate_offsets(spec: &EllipseSpec) -> Result<Vec<OffsetClass>> {
    let EllipseSpec {
        n_classes: n,
        major_axis,
        minor_axis,
        rotation_deg,
    } = *spec;
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 offset classes, got {n}")));
    }
    if !(major_axis > 0.0 && minor_axis > 0.0) || !rotation_deg.is_finite() {
        return Err(Error::invalid(format!(
            "ellipse axes must be positive, got major {major_axis} minor {minor_axis}"
        )));
    }
    let (a, b) = (major_axis / 2.0, minor_axis / 2.0);
    let (sin_r, cos_r) = rotation_deg.to_radians().sin_cos();
    let mut classes = vec![OffsetClass { id: 0, dx: 0, dy: 0 }];
    for i in 1..n {
        let theta = ((i - 1) as f64 * 360.0 / (n - 1) as f64).to_radians();
        let (x, y) = (a * theta.cos(), b * theta.sin());
        let xr = x * cos_r + y * sin_r;
        let yr = -x * sin_r + y * cos_r;
        let class = OffsetClass {
            id: i,
            dx: xr.round() as i32,
            dy: yr.round() as i32,
        };
        if let Some(prev) = classes.iter().find(|c| (c.dx, c.dy) == (class.dx, class.dy)) {
            return Err(Error::invalid(format!(
                "degenerate ellipse: classes {} and {} both round to ({}, {})",
                prev.id, class.id, class.dx, class.dy
            )));
        }
        classes.push(class);
    }
    Ok(classes)
}

/// Class table shared by dataset manifests and checkpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffsetTable(Vec<OffsetClass>);

impl OffsetTable {
    pub fn new(classes: Vec<OffsetClass>) -> Result<Self> {
        for (i, c) in classes.iter().enumerate() {
            if c.id != i {
                return Err(Error::invalid(format!("offset class at position {i} has id {}", c.id)));
            }
            if classes[..i].iter().any(|p| (p.dx, p.dy) == (c.dx, c.dy)) {
                return Err(Error::invalid(format!("duplicate offset ({}, {})", c.dx, c.dy)));
            }
        }
        if classes.len() < 2 {
            return Err(Error::invalid("offset table needs at least 2 classes"));
        }
        Ok(Self(classes))
    }

    pub fn from_ellipse(spec: &EllipseSpec) -> Result<Self> {
        Self::new(generate_offsets(spec)?)
    }

    pub fn classes(&self) -> &[OffsetClass] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&OffsetClass> {
        self.0.get(id)
    }

    pub fn max_abs(&self) -> (usize, usize) {
        self.0.iter().fold((0, 0), |(mx, my), c| {
            (
                mx.max(c.dx.unsigned_abs() as usize),
                my.max(c.dy.unsigned_abs() as usize),
            )
        })
    }
}

/// `id:dx:dy` entries joined by `;`.
impl fmt::Display for OffsetTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{}:{}:{}", c.id, c.dx, c.dy)?;
        }
        Ok(())
    }
}

impl FromStr for OffsetTable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |part: &str| Error::Parse(format!("bad offset entry {part:?}, expected id:dx:dy"));
        let mut classes = Vec::new();
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let fields: Vec<&str> = part.split(':').collect();
            if fields.len() != 3 {
                return Err(bad(part));
            }
            classes.push(OffsetClass {
                id: fields[0].parse().map_err(|_| bad(part))?,
                dx: fields[1].parse().map_err(|_| bad(part))?,
                dy: fields[2].parse().map_err(|_| bad(part))?,
            });
        }
        OffsetTable::new(classes)
    }
}
