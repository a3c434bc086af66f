//! User registration: admits a new sensing user only if every user,
//! including the newcomer, keeps its VIR at or above the threshold and the
//! head count stays within the capacity bound for the deployment envelope.

use std::fmt::{self, Write as _};

use crate::capacity::{n_max, CapacityQuery, FitParams};
use crate::error::{Error, Result};
use crate::geometry::{vir, Mover, Point2D, RadioConfig};
use crate::sra::MotionType;
use crate::traffic::TrafficKind;

#[derive(Debug, Clone, PartialEq)]
pub struct Registration {
    pub user_id: String,
    /// Where the subject sits.
    pub position: Point2D,
    /// The subject's own device.
    pub ue: Point2D,
    pub motion_type: MotionType,
    pub strategy: TrafficKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RejectReason {
    /// The candidate's own link would fall below the threshold.
    CandidateVir { vir: f64 },
    /// An admitted user's link would fall below the threshold.
    PairwiseVir { victim: String, vir: f64 },
    /// Admission would exceed the subject-count bound.
    Capacity { n_max: u32 },
    /// The subject or device lies outside the deployment envelope.
    OutsideEnvelope { distance: f64 },
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::CandidateVir { vir } => write!(f, "candidate VIR {vir:.3} below threshold"),
            RejectReason::PairwiseVir { victim, vir } => {
                write!(f, "pairwise VIR: user {victim} would drop to {vir:.3}")
            }
            RejectReason::Capacity { n_max } => write!(f, "capacity: at most {n_max} users"),
            RejectReason::OutsideEnvelope { distance } => {
                write!(f, "outside envelope: {distance:.3} m")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    /// Admitted with the low-pass cutoff chosen for its motion type.
    Admitted { f_cut: f64 },
    Rejected(RejectReason),
}

impl Decision {
    pub fn is_admitted(&self) -> bool {
        matches!(self, Decision::Admitted { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Registry {
    pub ap: Point2D,
    pub cfg: RadioConfig,
    pub beta: f64,
    /// Largest AP–subject distance served.
    pub radius: f64,
    /// Largest subject–device distance served.
    pub delta_r: f64,
    /// Motion intensity assumed for every subject.
    pub intensity: f64,
    users: Vec<Registration>,
}

impl Registry {
    pub fn new(ap: Point2D, cfg: RadioConfig, beta: f64, radius: f64, delta_r: f64) -> Result<Self> {
        cfg.validate()?;
        if !(beta > 0.0) {
            return Err(Error::domain("beta must be positive"));
        }
        if !(radius > delta_r && delta_r > 0.0) {
            return Err(Error::domain(format!(
                "need radius > delta_r > 0, got {radius} and {delta_r}"
            )));
        }
        Ok(Registry {
            ap,
            cfg,
            beta,
            radius,
            delta_r,
            intensity: 1.0,
            users: Vec::new(),
        })
    }

    pub fn users(&self) -> &[Registration] {
        &self.users
    }

    /// Subject-count bound for the envelope (radial layout, fitted series).
    pub fn capacity(&self) -> Result<u32> {
        let q = CapacityQuery {
            r: self.radius,
            delta_r: self.delta_r,
            beta: self.beta,
            cfg: self.cfg,
            k: 2,
        };
        q.validate()?;
        Ok(n_max(&q, &FitParams::for_alpha(self.cfg.alpha, 2)?))
    }

    fn link_vir(&self, user: &Registration, others: &[&Registration]) -> Result<f64> {
        let movers: Vec<Mover> = others.iter().map(|o| Mover::new(o.position, self.intensity)).collect();
        vir(&self.cfg, self.ap, user.ue, &Mover::new(user.position, self.intensity), &movers)
    }

    /// VIR of every admitted user's link, in admission order.
    pub fn virs(&self) -> Result<Vec<f64>> {
        self.users
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let others: Vec<&Registration> =
                    self.users.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, o)| o).collect();
                self.link_vir(u, &others)
            })
            .collect()
    }

    /// Whether every admitted link meets the threshold.
    pub fn invariant_holds(&self) -> Result<bool> {
        Ok(self.virs()?.iter().all(|&v| v >= self.beta))
    }

    /// Evaluates a candidate without changing the registry.
    pub fn evaluate(&self, reg: &Registration) -> Result<Decision> {
        if !reg.position.is_finite() || !reg.ue.is_finite() {
            return Err(Error::domain("registration positions must be finite"));
        }
        let d_as = self.ap.distance(&reg.position);
        if d_as > self.radius {
            return Ok(Decision::Rejected(RejectReason::OutsideEnvelope { distance: d_as }));
        }
        let d_se = reg.position.distance(&reg.ue);
        if d_se > self.delta_r {
            return Ok(Decision::Rejected(RejectReason::OutsideEnvelope { distance: d_se }));
        }
        let count = self.users.len() + 1;
        if count >= 3 {
            let cap = self.capacity()?;
            if count as u32 > cap {
                return Ok(Decision::Rejected(RejectReason::Capacity { n_max: cap }));
            }
        }
        // Admitted users are protected first, so an intruder in someone's
        // near field is reported against its victim.
        for (i, u) in self.users.iter().enumerate() {
            let mut others: Vec<&Registration> =
                self.users.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, o)| o).collect();
            others.push(reg);
            let v = self.link_vir(u, &others)?;
            if v < self.beta {
                return Ok(Decision::Rejected(RejectReason::PairwiseVir {
                    victim: u.user_id.clone(),
                    vir: v,
                }));
            }
        }
        let members: Vec<&Registration> = self.users.iter().collect();
        let own = self.link_vir(reg, &members)?;
        if own < self.beta {
            return Ok(Decision::Rejected(RejectReason::CandidateVir { vir: own }));
        }
        Ok(Decision::Admitted {
            f_cut: reg.motion_type.f_cut(),
        })
    }

    /// Admits the candidate if [`Registry::evaluate`] allows it.
    pub fn register(&mut self, reg: Registration) -> Result<Decision> {
        if self.users.iter().any(|u| u.user_id == reg.user_id) {
            return Err(Error::Registration(format!("user `{}` is already registered", reg.user_id)));
        }
        let d = self.evaluate(&reg)?;
        if d.is_admitted() {
            self.users.push(reg);
        }
        Ok(d)
    }

    pub fn deregister(&mut self, user_id: &str) -> Result<Registration> {
        let i = self
            .users
            .iter()
            .position(|u| u.user_id == user_id)
            .ok_or_else(|| Error::Registration(format!("unknown user `{user_id}`")))?;
        Ok(self.users.remove(i))
    }

    /// `user_id,x,y,ue_x,ue_y,motion_type,strategy,f_cut_hz`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("user_id,x,y,ue_x,ue_y,motion_type,strategy,f_cut_hz\n");
        for u in &self.users {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                u.user_id,
                u.position.x,
                u.position.y,
                u.ue.x,
                u.ue.y,
                u.motion_type.as_str(),
                u.strategy.as_str(),
                u.motion_type.f_cut()
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn registry() -> Registry {
        Registry::new(Point2D::new(0.0, 0.0), RadioConfig::normalized(), 50.0, 1.6, 0.16).unwrap()
    }

    fn user(id: &str, x: f64, y: f64, ux: f64, uy: f64) -> Registration {
        Registration {
            user_id: id.into(),
            position: Point2D::new(x, y),
            ue: Point2D::new(ux, uy),
            motion_type: MotionType::Respiration,
            strategy: TrafficKind::UlCsi,
        }
    }

    /// Subject on a corner of the square table, device 15 cm further out.
    fn corner(id: &str, sx: f64, sy: f64) -> Registration {
        let n = sx.hypot(sy);
        user(id, sx, sy, sx + 0.15 * sx / n, sy + 0.15 * sy / n)
    }

    fn table() -> Vec<Registration> {
        vec![
            corner("a", 1.0, 1.0),
            corner("b", -1.0, 1.0),
            corner("c", -1.0, -1.0),
            corner("d", 1.0, -1.0),
        ]
    }

    #[test]
    fn first_user_is_admitted_with_its_cutoff() {
        let mut r = registry();
        let d = r.register(corner("a", 1.0, 1.0)).unwrap();
        assert_eq!(d, Decision::Admitted { f_cut: 1.0 });
        let mut g = corner("g", -1.0, 1.0);
        g.motion_type = MotionType::Gesture;
        assert_eq!(r.register(g).unwrap(), Decision::Admitted { f_cut: 20.0 });
    }

    #[test]
    fn four_person_table_is_fully_admitted() {
        let mut r = registry();
        for u in table() {
            assert!(r.register(u).unwrap().is_admitted());
        }
        assert!(r.invariant_holds().unwrap());
        // Direct evaluation of one link with the three others interfering.
        let a = &r.users()[0];
        let d_ae = r.ap.distance(&a.ue);
        let p = |s: &Point2D| (r.ap.distance(s) * s.distance(&a.ue)).powi(-4);
        let expect = p(&a.position) / (d_ae.powi(-4) + 1.0 + r.users()[1..].iter().map(|u| p(&u.position)).sum::<f64>());
        assert!((r.virs().unwrap()[0] - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn candidate_next_to_a_device_is_rejected() {
        let mut r = registry();
        r.register(corner("a", 1.0, 1.0)).unwrap();
        let ue = r.users()[0].ue;
        // The intruder sits 1 cm from user a's device, its own device nearby.
        let intruder = user("x", ue.x - 0.01, ue.y, ue.x - 0.12, ue.y);
        match r.register(intruder).unwrap() {
            Decision::Rejected(reason) => {
                assert!(matches!(reason, RejectReason::PairwiseVir { ref victim, .. } if victim == "a"));
                assert!(reason.to_string().contains("pairwise VIR"));
            }
            d => panic!("{d:?}"),
        }
        assert_eq!(r.users().len(), 1);
    }

    #[test]
    fn duplicate_and_unknown_ids_are_errors() {
        let mut r = registry();
        r.register(corner("a", 1.0, 1.0)).unwrap();
        assert!(matches!(r.register(corner("a", -1.0, 1.0)), Err(Error::Registration(_))));
        assert!(matches!(r.deregister("zz"), Err(Error::Registration(_))));
    }

    #[test]
    fn register_then_deregister_restores_the_registry() {
        let mut r = registry();
        r.register(corner("a", 1.0, 1.0)).unwrap();
        let before = r.clone();
        r.register(corner("b", -1.0, 1.0)).unwrap();
        r.deregister("b").unwrap();
        assert_eq!(r, before);
    }

    #[test]
    fn deregistration_frees_room_for_a_rejected_candidate() {
        // a and b sit side by side; c sits right next to b's device. While b
        // is registered c breaks b's link; once b leaves, c fits beside a.
        let mut r = registry();
        r.register(corner("a", 1.0, 1.0)).unwrap();
        r.register(user("b", -1.0, 1.0, -1.1, 1.1)).unwrap();
        let c = user("c", -1.05, 1.12, -1.2, 1.15);
        assert!(!r.register(c.clone()).unwrap().is_admitted());
        r.deregister("b").unwrap();
        assert!(r.register(c).unwrap().is_admitted());
    }

    #[test]
    fn envelope_is_enforced() {
        let mut r = registry();
        let far = corner("f", 2.0, 2.0);
        assert!(matches!(
            r.register(far).unwrap(),
            Decision::Rejected(RejectReason::OutsideEnvelope { .. })
        ));
    }

    #[test]
    fn csv_lists_admitted_users() {
        let mut r = registry();
        r.register(corner("a", 1.0, 1.0)).unwrap();
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "user_id,x,y,ue_x,ue_y,motion_type,strategy,f_cut_hz");
        assert!(lines.next().unwrap().starts_with("a,1,1,"));
        assert!(csv.trim_end().ends_with("respiration,ul-csi,1"));
    }

    fn arb_user(id: usize) -> impl Strategy<Value = Registration> {
        (0.0f64..std::f64::consts::TAU, 0.3f64..1.5, 0.0f64..std::f64::consts::TAU, 0.03f64..0.16).prop_map(
            move |(a, r, b, d)| {
                let (x, y) = (r * a.cos(), r * a.sin());
                user(&format!("u{id}"), x, y, x + d * b.cos(), y + d * b.sin())
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn invariant_survives_random_sequences(
            users in proptest::collection::vec((0usize..1000).prop_flat_map(arb_user), 1..12),
            removals in proptest::collection::vec(any::<bool>(), 12),
        ) {
            let mut r = registry();
            for (i, mut u) in users.into_iter().enumerate() {
                u.user_id = format!("u{i}");
                r.register(u).unwrap();
                prop_assert!(r.invariant_holds().unwrap());
                if removals[i] && !r.users().is_empty() {
                    let id = r.users()[0].user_id.clone();
                    r.deregister(&id).unwrap();
                    prop_assert!(r.invariant_holds().unwrap());
                }
            }
        }

        #[test]
        fn feasible_sets_are_admitted_in_any_order(seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut order = table();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let mut r = registry();
            for u in order {
                prop_assert!(r.register(u).unwrap().is_admitted());
            }
        }
    }
}
