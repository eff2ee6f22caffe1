use rand::Rng;

use super::{
    init_entity, init_group, step_entity, step_group, EntityModel, GroupState, MobilityError, MobilityState, ModelKind,
    ModelParams, Point, TraceRecord,
};

#[derive(Clone, Debug)]
enum Population {
    Entities(EntityModel, Vec<MobilityState>),
    Groups(Vec<GroupState>),
}

/// All mobile nodes of one model, stepped together. Group members are
/// numbered group by group.
#[derive(Clone, Debug)]
pub struct MobilityField {
    params: ModelParams,
    nodes: usize,
    pop: Population,
}

impl MobilityField {
    pub fn new<R: Rng + ?Sized>(kind: ModelKind, params: &ModelParams, nodes: usize, rng: &mut R) -> Result<Self, MobilityError> {
        params.validate()?;
        let pop = match kind {
            ModelKind::Entity(m) => Population::Entities(m, (0..nodes).map(|_| init_entity(m, params, rng)).collect()),
            ModelKind::Group(m) => {
                let size = params.group_size.max(1);
                let mut groups = Vec::new();
                let mut left = nodes;
                while left > 0 {
                    let p = ModelParams {
                        group_size: size.min(left),
                        ..params.clone()
                    };
                    groups.push(init_group(m, &p, rng));
                    left -= size.min(left);
                }
                Population::Groups(groups)
            }
        };
        Ok(Self {
            params: params.clone(),
            nodes,
            pop,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes
    }

    pub fn is_empty(&self) -> bool {
        self.nodes == 0
    }

    pub fn step_time(&self) -> f64 {
        self.params.step_time
    }

    pub fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(), MobilityError> {
        match &mut self.pop {
            Population::Entities(m, states) => {
                for s in states.iter_mut() {
                    *s = step_entity(*m, std::mem::replace(s, MobilityState::at(Point::default())), &self.params, rng)?;
                }
            }
            Population::Groups(groups) => {
                for g in groups.iter_mut() {
                    let model = g.model;
                    let taken = std::mem::replace(
                        g,
                        GroupState {
                            model,
                            leader: MobilityState::at(Point::default()),
                            members: Vec::new(),
                            offsets: Vec::new(),
                        },
                    );
                    *g = step_group(model, taken, &self.params, rng)?;
                }
            }
        }
        Ok(())
    }

    pub fn positions(&self) -> Vec<Point> {
        match &self.pop {
            Population::Entities(_, states) => states.iter().map(|s| s.pos).collect(),
            Population::Groups(groups) => groups.iter().flat_map(|g| g.members.iter().copied()).collect(),
        }
    }

    pub fn speeds(&self) -> Option<Vec<f64>> {
        match &self.pop {
            Population::Entities(_, states) => Some(states.iter().map(|s| s.speed).collect()),
            Population::Groups(_) => None,
        }
    }
}

/// Samples `nodes` trajectories every `step_time` seconds over `[0, duration]`.
pub fn generate_trace<R: Rng + ?Sized>(
    kind: ModelKind,
    params: &ModelParams,
    nodes: usize,
    duration: f64,
    rng: &mut R,
) -> Result<Vec<TraceRecord>, MobilityError> {
    let mut field = MobilityField::new(kind, params, nodes, rng)?;
    let steps = (duration / params.step_time).floor() as u64;
    let mut out = Vec::with_capacity(nodes * (steps as usize + 1));
    for k in 0..=steps {
        if k > 0 {
            field.advance(rng)?;
        }
        let t = k as f64 * params.step_time;
        for (i, p) in field.positions().into_iter().enumerate() {
            out.push(TraceRecord {
                time: t,
                node: i as u32,
                x: p.x,
                y: p.y,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn every_model_stays_inside() {
        let p = ModelParams::default();
        for kind in ModelKind::all() {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let trace = generate_trace(kind, &p, 7, 300.0, &mut rng).unwrap();
            assert_eq!(trace.len(), 7 * 301, "{kind}");
            for r in &trace {
                assert!(r.x >= 0.0 && r.x < p.width && r.y >= 0.0 && r.y < p.height, "{kind}: {r:?}");
            }
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let p = ModelParams::default();
        let kind: ModelKind = "gauss-markov".parse().unwrap();
        let a = generate_trace(kind, &p, 3, 100.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = generate_trace(kind, &p, 3, 100.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }
}
