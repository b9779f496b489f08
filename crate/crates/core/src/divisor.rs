//! Divisors on the Riemann sphere and the Troyanov classification.
//!
//! A divisor is a finite list of cone points, each either a point of the
//! finite plane or the point at infinity, carrying an order `beta > -1`.
//! The sphere topology is fixed, so the conic Euler characteristic is
//! `2 + |D|` with `|D|` the sum of the orders.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the finite plane, identified with a complex number.
pub type Point = Complex64;

/// Default tolerance for detecting the critical wall.
pub const DEFAULT_CRITICAL_TOL: f64 = 1e-12;

/// Where a cone point sits on the sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Position {
    Finite(Point),
    Infinity,
}

/// One summand `beta * p` of a divisor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConePoint {
    pub position: Position,
    pub order: f64,
}

impl ConePoint {
    pub fn finite(z: Point, order: f64) -> Self {
        ConePoint { position: Position::Finite(z), order }
    }

    pub fn at_infinity(order: f64) -> Self {
        ConePoint { position: Position::Infinity, order }
    }

    /// Cone angle `2 pi (1 + beta)`.
    pub fn cone_angle(&self) -> f64 {
        2.0 * PI * (1.0 + self.order)
    }
}

/// A validated divisor: orders above -1, at most one point at infinity,
/// distinct finite positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Divisor {
    points: Vec<ConePoint>,
}

impl Divisor {
    pub fn new(points: Vec<ConePoint>) -> Result<Self> {
        let mut infinities = 0;
        for (i, p) in points.iter().enumerate() {
            if !p.order.is_finite() || p.order <= -1.0 {
                return Err(Error::InvalidDivisor(format!(
                    "point {i} has order {} (orders must be finite and > -1)",
                    p.order
                )));
            }
            match p.position {
                Position::Infinity => infinities += 1,
                Position::Finite(z) => {
                    if !(z.re.is_finite() && z.im.is_finite()) {
                        return Err(Error::InvalidDivisor(format!("point {i} has a non-finite position")));
                    }
                    for (j, q) in points[..i].iter().enumerate() {
                        if let Position::Finite(w) = q.position {
                            if w == z {
                                return Err(Error::InvalidDivisor(format!(
                                    "points {j} and {i} share the position ({}, {})",
                                    z.re, z.im
                                )));
                            }
                        }
                    }
                }
            }
        }
        if infinities > 1 {
            return Err(Error::InvalidDivisor("more than one point at infinity".into()));
        }
        Ok(Divisor { points })
    }

    /// Divisor from bare orders placed at arbitrary distinct finite positions.
    /// Only useful where positions do not matter (classification, areas).
    pub fn from_orders(orders: &[f64]) -> Result<Self> {
        Divisor::new(
            orders
                .iter()
                .enumerate()
                .map(|(i, &b)| ConePoint::finite(Point::new(i as f64, 0.0), b))
                .collect(),
        )
    }

    pub fn empty() -> Self {
        Divisor { points: Vec::new() }
    }

    pub fn points(&self) -> &[ConePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn orders(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.order).collect()
    }

    /// `|D|`, the sum of the orders.
    pub fn degree(&self) -> f64 {
        self.points.iter().map(|p| p.order).sum()
    }

    /// Order of the point at infinity, if there is one.
    pub fn infinity_order(&self) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.position == Position::Infinity)
            .map(|p| p.order)
    }

    /// Finite cone points as `(z, beta)` pairs, in input order.
    pub fn finite_points(&self) -> Vec<(Point, f64)> {
        self.points
            .iter()
            .filter_map(|p| match p.position {
                Position::Finite(z) => Some((z, p.order)),
                Position::Infinity => None,
            })
            .collect()
    }

    /// Index of the smallest order (first one on ties).
    pub fn min_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, p) in self.points.iter().enumerate() {
            match best {
                Some(b) if self.points[b].order <= p.order => {}
                _ => best = Some(i),
            }
        }
        best
    }

    /// Parse the JSON interchange format: an array of `{x, y, beta}` records,
    /// optionally with one `{"infinity": beta}` record.
    pub fn from_json(text: &str) -> Result<Self> {
        let records: Vec<Record> = serde_json::from_str(text)?;
        Divisor::new(records.into_iter().map(ConePoint::from).collect())
    }

    pub fn to_json(&self) -> String {
        let records: Vec<Record> = self.points.iter().map(|p| Record::from(*p)).collect();
        serde_json::to_string_pretty(&records).expect("divisor records serialize")
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
enum Record {
    Infinity {
        infinity: f64,
    },
    Finite {
        x: f64,
        y: f64,
        beta: f64,
    },
}

impl From<Record> for ConePoint {
    fn from(r: Record) -> Self {
        match r {
            Record::Finite { x, y, beta } => ConePoint::finite(Point::new(x, y), beta),
            Record::Infinity { infinity } => ConePoint::at_infinity(infinity),
        }
    }
}

impl From<ConePoint> for Record {
    fn from(p: ConePoint) -> Self {
        match p.position {
            Position::Finite(z) => Record::Finite { x: z.re, y: z.im, beta: p.order },
            Position::Infinity => Record::Infinity { infinity: p.order },
        }
    }
}

/// The five Troyanov cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassKind {
    Negative,
    Zero,
    Subcritical,
    Critical,
    Supercritical,
}

impl fmt::Display for ClassKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ClassKind::Negative => "Negative",
            ClassKind::Zero => "Zero",
            ClassKind::Subcritical => "Subcritical",
            ClassKind::Critical => "Critical",
            ClassKind::Supercritical => "Supercritical",
        };
        f.write_str(s)
    }
}

/// Result of [`classify`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivisorClass {
    pub kind: ClassKind,
    /// Conic Euler characteristic `2 + |D|`.
    pub chi: f64,
    /// `min{2, 2 + 2 min beta} - chi`; positive on the subcritical side.
    pub slack: f64,
    /// Index of the smallest order, `None` for the empty divisor.
    pub min_index: Option<usize>,
    /// Set when a positive-case divisor has an order outside (-1, 0), where
    /// the existence theory behind the classification was not stated.
    pub outside_hypotheses: bool,
}

/// `chi(S, D) = 2 + |D|`.
pub fn euler_char(divisor: &Divisor) -> f64 {
    2.0 + divisor.degree()
}

/// Critical threshold `min{2, 2 + 2 min beta}`; 2 for the empty divisor.
pub fn critical_threshold(orders: &[f64]) -> f64 {
    let min = orders.iter().copied().fold(f64::INFINITY, f64::min);
    if min.is_finite() {
        f64::min(2.0, 2.0 + 2.0 * min)
    } else {
        2.0
    }
}

/// Distance to the critical wall, `min{2, 2 + 2 min beta} - (2 + sum beta)`.
pub fn slack(orders: &[f64]) -> f64 {
    critical_threshold(orders) - (2.0 + orders.iter().sum::<f64>())
}

/// Troyanov classification. `|chi| <= tol` is the zero case and `|slack| <= tol`
/// with positive `chi` is critical.
pub fn classify(divisor: &Divisor, tol: f64) -> DivisorClass {
    let orders = divisor.orders();
    let chi = euler_char(divisor);
    let slack = slack(&orders);
    let kind = if chi < -tol {
        ClassKind::Negative
    } else if chi.abs() <= tol {
        ClassKind::Zero
    } else if slack.abs() <= tol {
        ClassKind::Critical
    } else if slack > 0.0 {
        ClassKind::Subcritical
    } else {
        ClassKind::Supercritical
    };
    let positive = matches!(
        kind,
        ClassKind::Subcritical | ClassKind::Critical | ClassKind::Supercritical
    );
    let outside_hypotheses = positive && orders.iter().any(|&b| b >= 0.0);
    DivisorClass {
        kind,
        chi,
        slack,
        min_index: divisor.min_index(),
        outside_hypotheses,
    }
}

/// Luo-Tian condition on cone angles: `2(n-2)pi < sum < 2(n-2)pi + 2 min`.
pub fn luo_tian_admissible(angles: &[f64]) -> Result<bool> {
    let n = angles.len();
    if n < 3 {
        return Err(Error::Domain(format!(
            "the angle condition needs at least 3 cone points, got {n}"
        )));
    }
    if let Some(a) = angles.iter().find(|&&a| !(a > 0.0 && a < 2.0 * PI)) {
        return Err(Error::Domain(format!("cone angle {a} is outside (0, 2pi)")));
    }
    let sum: f64 = angles.iter().sum();
    let min = angles.iter().copied().fold(f64::INFINITY, f64::min);
    let base = 2.0 * (n as f64 - 2.0) * PI;
    Ok(sum > base && sum < base + 2.0 * min)
}

/// Total area `2 pi (2 + |D|)` of a curvature-one conic metric.
pub fn total_area(divisor: &Divisor) -> f64 {
    2.0 * PI * (2.0 + divisor.degree())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(orders: &[f64]) -> Divisor {
        Divisor::from_orders(orders).unwrap()
    }

    #[test]
    fn euler_characteristic_examples() {
        assert_eq!(euler_char(&Divisor::empty()), 2.0);
        assert_eq!(euler_char(&d(&[-0.5, -0.5])), 1.0);
        assert_eq!(euler_char(&d(&[-0.5, -0.25, -0.25])), 1.0);
    }

    #[test]
    fn classification_examples() {
        let tol = DEFAULT_CRITICAL_TOL;
        assert_eq!(classify(&d(&[-0.5, -0.5, -0.5]), tol).kind, ClassKind::Subcritical);
        let c = classify(&d(&[-0.5, -0.25, -0.25]), tol);
        assert_eq!(c.kind, ClassKind::Critical);
        assert_eq!(c.slack, 0.0);
        assert_eq!(classify(&d(&[-0.75, -0.1, -0.1]), tol).kind, ClassKind::Supercritical);
        assert_eq!(classify(&d(&[-0.5; 5]), tol).kind, ClassKind::Negative);
        assert_eq!(classify(&d(&[-0.5; 4]), tol).kind, ClassKind::Zero);
    }

    #[test]
    fn football_is_critical_and_unequal_pair_is_not() {
        let tol = DEFAULT_CRITICAL_TOL;
        assert_eq!(classify(&d(&[-0.5, -0.5]), tol).kind, ClassKind::Critical);
        assert_eq!(classify(&d(&[-0.5, -0.3]), tol).kind, ClassKind::Supercritical);
        assert_eq!(classify(&Divisor::empty(), tol).kind, ClassKind::Critical);
    }

    #[test]
    fn positive_orders_raise_the_warning_flag() {
        let c = classify(&d(&[0.5, -0.2, -0.2]), DEFAULT_CRITICAL_TOL);
        assert!(c.outside_hypotheses);
        let c = classify(&d(&[-0.5, -0.3, -0.3]), DEFAULT_CRITICAL_TOL);
        assert!(!c.outside_hypotheses);
        assert_eq!(c.min_index, Some(0));
    }

    #[test]
    fn luo_tian_examples() {
        assert!(luo_tian_admissible(&[1.5 * PI; 3]).unwrap());
        assert!(!luo_tian_admissible(&[PI, 1.5 * PI, 1.5 * PI]).unwrap());
        assert!(!luo_tian_admissible(&[0.5 * PI; 3]).unwrap());
        assert!(luo_tian_admissible(&[PI, PI]).is_err());
        assert!(luo_tian_admissible(&[PI, PI, 7.0]).is_err());
    }

    #[test]
    fn total_area_examples() {
        assert!((total_area(&Divisor::empty()) - 4.0 * PI).abs() < 1e-15);
        assert!((total_area(&d(&[-0.5, -0.5])) - 2.0 * PI).abs() < 1e-15);
        assert!((total_area(&d(&[-0.5, -0.5, -0.5])) - PI).abs() < 1e-15);
    }

    #[test]
    fn invalid_divisors_are_rejected() {
        assert!(Divisor::from_orders(&[-1.0]).is_err());
        assert!(Divisor::new(vec![ConePoint::at_infinity(-0.5), ConePoint::at_infinity(-0.2)]).is_err());
        let z = Point::new(1.0, 0.0);
        assert!(Divisor::new(vec![ConePoint::finite(z, -0.5), ConePoint::finite(z, -0.2)]).is_err());
    }

    #[test]
    fn json_format_parses_both_record_kinds() {
        let text = r#"[{"x": 1.0, "y": 0.0, "beta": -0.25}, {"x": -1.0, "y": 0.0, "beta": -0.25}, {"infinity": -0.5}]"#;
        let div = Divisor::from_json(text).unwrap();
        assert_eq!(div.len(), 3);
        assert_eq!(div.infinity_order(), Some(-0.5));
        assert_eq!(classify(&div, DEFAULT_CRITICAL_TOL).kind, ClassKind::Critical);
        let back = Divisor::from_json(&div.to_json()).unwrap();
        assert_eq!(back, div);
        assert!(Divisor::from_json(r#"[{"x": 1.0, "beta": -0.2}]"#).is_err());
    }

    proptest! {
        #[test]
        fn luo_tian_matches_subcritical(orders in prop::collection::vec(-0.999f64..-0.001, 3..=5)) {
            let angles: Vec<f64> = orders.iter().map(|b| 2.0 * PI * (1.0 + b)).collect();
            let sub = classify(&d(&orders), 0.0).kind == ClassKind::Subcritical;
            prop_assert_eq!(luo_tian_admissible(&angles).unwrap(), sub);
        }

        #[test]
        fn classification_ignores_order_of_points(mut orders in prop::collection::vec(-0.99f64..0.0, 1..6), k in 0usize..6) {
            let before = classify(&d(&orders), DEFAULT_CRITICAL_TOL).kind;
            let len = orders.len();
            orders.rotate_left(k % len);
            orders.reverse();
            prop_assert_eq!(classify(&d(&orders), DEFAULT_CRITICAL_TOL).kind, before);
        }

        #[test]
        fn slack_is_lipschitz(a in prop::collection::vec(-0.99f64..0.0, 4), da in prop::collection::vec(-0.05f64..0.05, 4)) {
            let b: Vec<f64> = a.iter().zip(&da).map(|(x, y)| (x + y).clamp(-0.999, 0.0)).collect();
            let maxdiff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            prop_assert!((slack(&a) - slack(&b)).abs() <= (a.len() as f64 + 2.0) * maxdiff + 1e-12);
        }
    }
}
