//! Concrete floor plans: every space placed with integer coordinates.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::fd::Domains;
use crate::model::Model;
use crate::problem::{CostSpec, Criterion, SpaceKind};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Placement {
    pub id: String,
    pub unit: String,
    pub kind: SpaceKind,
    pub x: i64,
    pub y: i64,
    pub l: i64,
    pub w: i64,
    /// Orientation branch of a rotatable room, when it has several.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<i64>,
    /// Staircase configuration code.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<i64>,
}

impl Placement {
    pub fn x2(&self) -> i64 {
        self.x + self.l
    }

    pub fn y2(&self) -> i64 {
        self.y + self.w
    }

    pub fn area(&self) -> i64 {
        self.l * self.w
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContourSize {
    pub id: String,
    pub l: i64,
    pub w: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Layout {
    pub units: Vec<ContourSize>,
    pub spaces: Vec<Placement>,
}

impl Layout {
    /// Reads a layout from domains in which every geometric variable is fixed.
    pub fn from_domains(m: &Model, d: &Domains) -> Layout {
        let spec = &m.problem.spec;
        let units = spec
            .units
            .iter()
            .zip(&m.contours)
            .map(|(u, c)| ContourSize { id: u.id.clone(), l: d.min(c.l), w: d.min(c.w) })
            .collect();
        let spaces = spec
            .spaces
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let r = m.spaces[i];
                Placement {
                    id: s.id.clone(),
                    unit: s.unit.clone(),
                    kind: s.kind,
                    x: d.min(r.x1),
                    y: d.min(r.y1),
                    l: d.min(r.l),
                    w: d.min(r.w),
                    orientation: m.orientation[i].map(|o| d.min(o)),
                    config: m.stair_config[i].map(|c| d.min(c)),
                }
            })
            .collect();
        Layout { units, spaces }
    }

    pub fn space(&self, id: &str) -> Option<&Placement> {
        self.spaces.iter().find(|p| p.id == id)
    }

    /// Raw value of a criterion, in modules or square modules.
    pub fn criterion(&self, c: Criterion) -> i64 {
        let contour_half_perimeter: i64 = self.units.iter().map(|u| u.l + u.w).sum();
        let half_perimeters: i64 = self.spaces.iter().map(|p| p.l + p.w).sum();
        match c {
            Criterion::CorridorArea => self
                .spaces
                .iter()
                .filter(|p| p.kind == SpaceKind::Corridor)
                .map(Placement::area)
                .sum(),
            Criterion::ExtraSpaceArea => {
                self.units.iter().map(|u| u.l * u.w).sum::<i64>() - self.spaces.iter().map(Placement::area).sum::<i64>()
            }
            Criterion::InternalWallLength => half_perimeters - contour_half_perimeter,
            Criterion::ExternalWallLength => 2 * contour_half_perimeter,
            Criterion::CombinedWallLength => half_perimeters + contour_half_perimeter,
        }
    }

    /// Weighted cost under `spec`.
    pub fn cost(&self, spec: &CostSpec) -> Ratio<i64> {
        let internal = Ratio::from_integer(self.criterion(Criterion::InternalWallLength));
        let external = Ratio::from_integer(self.criterion(Criterion::ExternalWallLength));
        let mut total = Ratio::from_integer(0);
        for c in Criterion::ALL {
            let w = spec.weight(c).0;
            if w == Ratio::from_integer(0) {
                continue;
            }
            let value = match c {
                Criterion::InternalWallLength => internal * spec.cost_internal_wall.0,
                Criterion::ExternalWallLength => external * spec.cost_external_wall.0,
                Criterion::CombinedWallLength => {
                    internal * spec.cost_internal_wall.0 + external * spec.cost_external_wall.0
                }
                _ => Ratio::from_integer(self.criterion(c)),
            };
            total += w * value;
        }
        total
    }

    /// Total length of shared boundary between spaces of the same unit.
    pub fn contact_length(&self) -> i64 {
        let mut total = 0;
        for (i, a) in self.spaces.iter().enumerate() {
            for b in &self.spaces[i + 1..] {
                if a.unit != b.unit {
                    continue;
                }
                let ox = a.x2().min(b.x2()) - a.x.max(b.x);
                let oy = a.y2().min(b.y2()) - a.y.max(b.y);
                if (a.y2() == b.y || b.y2() == a.y) && ox > 0 {
                    total += ox;
                }
                if (a.x2() == b.x || b.x2() == a.x) && oy > 0 {
                    total += oy;
                }
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(id: &str, kind: SpaceKind, x: i64, y: i64, l: i64, w: i64) -> Placement {
        Placement { id: id.into(), unit: "u".into(), kind, x, y, l, w, orientation: None, config: None }
    }

    #[test]
    fn criteria_of_a_split_square() {
        let lay = Layout {
            units: vec![ContourSize { id: "u".into(), l: 4, w: 4 }],
            spaces: vec![p("a", SpaceKind::Room, 0, 0, 4, 3), p("c", SpaceKind::Corridor, 0, 3, 4, 1)],
        };
        assert_eq!(lay.criterion(Criterion::CorridorArea), 4);
        assert_eq!(lay.criterion(Criterion::ExtraSpaceArea), 0);
        assert_eq!(lay.criterion(Criterion::InternalWallLength), 4);
        assert_eq!(lay.criterion(Criterion::ExternalWallLength), 16);
        assert_eq!(lay.contact_length(), lay.criterion(Criterion::InternalWallLength));
        let mut spec = CostSpec::single(Criterion::CombinedWallLength);
        spec.cost_external_wall = crate::problem::Weight::int(3);
        assert_eq!(lay.cost(&spec), Ratio::from_integer(4 + 48));
    }
}
