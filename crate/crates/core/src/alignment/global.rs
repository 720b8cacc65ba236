use serde::{Deserialize, Serialize};

use super::{descriptor_distance, AlignmentParams, StableGroup};
use crate::model::WorldCoord;

/// Stable groups describing one world location across flights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalGroup {
    /// Indices into the stable-group slice passed to [`merge_global_groups`].
    pub members: Vec<usize>,
    pub coord: WorldCoord,
    pub mean_descriptor: Vec<f64>,
}

/// Greedy merge in input order. A stable group joins the first global group
/// within `t_d_m` meters whose mean descriptor is within `t_f`; otherwise it
/// founds a new one. Stable groups without a coordinate are skipped.
pub fn merge_global_groups(stable: &[StableGroup], params: &AlignmentParams) -> Vec<GlobalGroup> {
    let mut globals: Vec<GlobalGroup> = Vec::new();
    for (i, s) in stable.iter().enumerate() {
        let Some(coord) = s.coord else { continue };
        let target = globals.iter().position(|g| {
            coord.distance(&g.coord) < params.t_d_m
                && descriptor_distance(&s.mean_descriptor, &g.mean_descriptor) < params.t_f
        });
        match target {
            Some(gi) => {
                let g = &mut globals[gi];
                g.members.push(i);
                let n = g.members.len() as f64;
                g.coord.x += (coord.x - g.coord.x) / n;
                g.coord.y += (coord.y - g.coord.y) / n;
                g.coord.h += (coord.h - g.coord.h) / n;
                for (m, f) in g.mean_descriptor.iter_mut().zip(&s.mean_descriptor) {
                    *m += (f - *m) / n;
                }
            }
            None => globals.push(GlobalGroup {
                members: vec![i],
                coord,
                mean_descriptor: s.mean_descriptor.clone(),
            }),
        }
    }
    globals
}
