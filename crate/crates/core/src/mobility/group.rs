use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::entity::{init_entity, reflect, step_random_waypoint, uniform_point};
use super::{contain, EntityModel, GroupModel, MobilityError, MobilityState, ModelParams, Point};

/// One group: a leading reference (logical center, pursuit target or column
/// anchor) plus member positions and per-member offsets.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupState {
    pub model: GroupModel,
    pub leader: MobilityState,
    pub members: Vec<Point>,
    /// Column: line slot and wander offset are kept separately, slots fixed.
    /// Nomadic: wander offset from the reference point. RPGM: fixed offset
    /// of each reference point from the logical center.
    pub offsets: Vec<Point>,
}

fn in_disc<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Point {
    if radius <= 0.0 {
        return Point::default();
    }
    let r = radius * rng.random::<f64>().sqrt();
    let a = rng.random_range(0.0..TAU);
    Point::new(r * a.cos(), r * a.sin())
}

fn clamp_len(v: Point, max: f64) -> Point {
    let n = v.norm();
    if n > max && n > 0.0 {
        v * (max / n)
    } else {
        v
    }
}

fn column_slot(leader: &MobilityState, i: usize, n: usize, spacing: f64) -> Point {
    let perp = Point::new(-leader.direction.sin(), leader.direction.cos());
    leader.pos + perp * ((i as f64 - (n as f64 - 1.0) / 2.0) * spacing)
}

impl GroupState {
    /// Where each member is anchored this step.
    pub fn reference_points(&self, p: &ModelParams) -> Vec<Point> {
        let n = self.members.len();
        match self.model {
            GroupModel::Ecr => vec![Point::new(p.width / 2.0, p.height / 2.0); n],
            GroupModel::Column => (0..n)
                .map(|i| contain(column_slot(&self.leader, i, n, p.column_spacing), p.width, p.height))
                .collect(),
            GroupModel::Nomadic | GroupModel::Pursue => vec![self.leader.pos; n],
            GroupModel::Rpgm => self
                .offsets
                .iter()
                .map(|o| contain(self.leader.pos + *o, p.width, p.height))
                .collect(),
        }
    }
}

pub fn init_group<R: Rng + ?Sized>(model: GroupModel, p: &ModelParams, rng: &mut R) -> GroupState {
    let n = p.group_size.max(1);
    let mut leader = init_entity(EntityModel::RandomWaypoint, p, rng);
    let mut offsets = vec![Point::default(); n];
    let members = match model {
        GroupModel::Ecr => (0..n).map(|_| uniform_point(p, rng)).collect(),
        GroupModel::Column => {
            leader.speed = p.advance.norm();
            leader.direction = p.advance.y.atan2(p.advance.x);
            (0..n)
                .map(|i| contain(column_slot(&leader, i, n, p.column_spacing), p.width, p.height))
                .collect()
        }
        GroupModel::Nomadic => vec![leader.pos; n],
        GroupModel::Pursue => (0..n)
            .map(|_| contain(leader.pos + in_disc(p.group_radius, rng), p.width, p.height))
            .collect(),
        GroupModel::Rpgm => {
            offsets = (0..n).map(|_| in_disc(p.group_radius, rng)).collect();
            offsets
                .iter()
                .map(|o| contain(leader.pos + *o, p.width, p.height))
                .collect()
        }
    };
    GroupState {
        model,
        leader,
        members,
        offsets,
    }
}

/// Advances every member of the group by one step.
pub fn step_group<R: Rng + ?Sized>(
    model: GroupModel,
    mut g: GroupState,
    p: &ModelParams,
    rng: &mut R,
) -> Result<GroupState, MobilityError> {
    if g.model != model {
        return Err(MobilityError::WrongModel {
            model: format!("{:?}", g.model),
            expected: super::ModelKind::Group(model).name(),
        });
    }
    if g.members.is_empty() {
        return Err(MobilityError::OutOfRange {
            key: "group-size",
            detail: "group has no members".into(),
        });
    }
    let (w, h) = (p.width, p.height);
    let dt = p.step_time;
    match model {
        GroupModel::Ecr => {
            let decay = (-dt / p.ecr_tau).exp();
            let noise = p.ecr_sigma * (1.0 - (-2.0 * dt / p.ecr_tau).exp()).sqrt();
            let c = Point::new(w / 2.0, h / 2.0);
            for m in &mut g.members {
                let gx: f64 = StandardNormal.sample(rng);
                let gy: f64 = StandardNormal.sample(rng);
                let b = *m - c;
                *m = contain(c + Point::new(b.x * decay + noise * gx, b.y * decay + noise * gy), w, h);
            }
        }
        GroupModel::Column => {
            let mut pos = g.leader.pos + Point::new(g.leader.direction.cos(), g.leader.direction.sin()) * g.leader.speed;
            let mut dir = g.leader.direction;
            reflect(&mut pos, &mut dir, w, h);
            g.leader.pos = pos;
            g.leader.direction = dir;
            let n = g.members.len();
            let wander = p.min_speed * dt;
            for i in 0..n {
                g.offsets[i] = clamp_len(g.offsets[i] + in_disc(wander, rng), p.group_radius);
                let slot = column_slot(&g.leader, i, n, p.column_spacing);
                g.members[i] = contain(slot + g.offsets[i], w, h);
            }
        }
        GroupModel::Nomadic => {
            g.leader = step_random_waypoint(g.leader, p, rng);
            let wander = p.min_speed * dt;
            for i in 0..g.members.len() {
                g.offsets[i] = clamp_len(g.offsets[i] + in_disc(wander, rng), p.group_radius);
                g.members[i] = contain(g.leader.pos + g.offsets[i], w, h);
            }
        }
        GroupModel::Pursue => {
            g.leader = step_random_waypoint(g.leader, p, rng);
            let t = g.leader.pos;
            let k = p.pursuit_gain;
            for m in &mut g.members {
                let next = *m * (1.0 - k) + t * k + in_disc(p.pursuit_jitter, rng);
                *m = contain(next, w, h);
            }
        }
        GroupModel::Rpgm => {
            g.leader = step_random_waypoint(g.leader, p, rng);
            for i in 0..g.members.len() {
                let r = contain(g.leader.pos + g.offsets[i], w, h);
                g.members[i] = contain(r + in_disc(p.rpgm_deviation_max, rng), w, h);
            }
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pursue_with_full_gain_lands_on_target() {
        let p = ModelParams {
            pursuit_gain: 1.0,
            pursuit_jitter: 0.0,
            ..ModelParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut g = init_group(GroupModel::Pursue, &p, &mut rng);
        for _ in 0..50 {
            g = step_group(GroupModel::Pursue, g, &p, &mut rng).unwrap();
            assert!(g.members.iter().all(|m| *m == g.leader.pos));
        }
    }

    #[test]
    fn nomadic_members_stay_near_reference() {
        let p = ModelParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut g = init_group(GroupModel::Nomadic, &p, &mut rng);
        for _ in 0..5000 {
            g = step_group(GroupModel::Nomadic, g, &p, &mut rng).unwrap();
            for m in &g.members {
                assert!(m.dist(g.leader.pos) <= p.group_radius + 1e-9);
            }
        }
    }

    #[test]
    fn column_members_track_their_slots() {
        let p = ModelParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut g = init_group(GroupModel::Column, &p, &mut rng);
        for _ in 0..2000 {
            g = step_group(GroupModel::Column, g, &p, &mut rng).unwrap();
            for (m, r) in g.members.iter().zip(g.reference_points(&p)) {
                assert!(m.dist(r) <= p.group_radius + 1e-9);
            }
        }
    }

    #[test]
    fn wrong_model_is_rejected() {
        let p = ModelParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = init_group(GroupModel::Ecr, &p, &mut rng);
        assert!(step_group(GroupModel::Rpgm, g, &p, &mut rng).is_err());
    }
}
