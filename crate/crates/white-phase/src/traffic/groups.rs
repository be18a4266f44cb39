//! Vehicle-group formation: a CAV leader plus trailing CHVs.

use super::{VehicleId, VehicleKind};

/// Position snapshot used for group formation, ordered front to back.
#[derive(Debug, Clone, Copy)]
pub struct GroupVehicle {
    pub id: VehicleId,
    pub kind: VehicleKind,
    /// Front-bumper position, ft.
    pub x: f64,
}

/// A CAV-led group: the unit of white-phase conflict separation.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleGroup {
    pub lane: usize,
    /// Leader (always a CAV), then its CHV followers front to back.
    pub members: Vec<VehicleId>,
    /// Indices into the formation snapshot, leader first.
    pub member_idx: Vec<usize>,
}

impl VehicleGroup {
    pub fn leader(&self) -> VehicleId {
        self.members[0]
    }

    pub fn last_member(&self) -> VehicleId {
        *self.members.last().unwrap()
    }
}

/// Forms groups from a front-to-back ordered lane snapshot.
///
/// Each group starts at a CAV and extends over the CHVs behind it until the
/// next CAV, or until adding the next CHV would stretch the group (leader
/// head to last-member tail) beyond `max_len`. CHVs ahead of the first CAV
/// stay ungrouped. Returns the groups plus a per-vehicle membership flag.
pub fn form_groups(
    lane: usize,
    vehicles: &[GroupVehicle],
    max_len: f64,
    vehicle_length: f64,
) -> (Vec<VehicleGroup>, Vec<bool>) {
    debug_assert!(
        vehicles.windows(2).all(|w| w[0].x >= w[1].x),
        "formation snapshot must be ordered front to back"
    );
    let mut groups = Vec::new();
    let mut member = vec![false; vehicles.len()];
    let mut i = 0;
    while i < vehicles.len() {
        if vehicles[i].kind != VehicleKind::Cav {
            i += 1;
            continue;
        }
        let head = vehicles[i].x;
        let mut group = VehicleGroup {
            lane,
            members: vec![vehicles[i].id],
            member_idx: vec![i],
        };
        member[i] = true;
        let mut j = i + 1;
        while j < vehicles.len()
            && vehicles[j].kind == VehicleKind::Chv
            && head - (vehicles[j].x - vehicle_length) <= max_len
        {
            group.members.push(vehicles[j].id);
            group.member_idx.push(j);
            member[j] = true;
            j += 1;
        }
        groups.push(group);
        // Skip only the absorbed CHVs; an over-length CHV stays ungrouped
        // and the scan continues behind it.
        i = j.max(i + 1);
        while i < vehicles.len() && vehicles[i].kind == VehicleKind::Chv {
            i += 1;
        }
    }
    (groups, member)
}
