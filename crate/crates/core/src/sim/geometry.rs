use crate::scalar::Scalar;

use super::{TraceFrame, VehicleState};

/// Axis-aligned rectangle in road coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint<T> {
    pub s_min: T,
    pub s_max: T,
    pub lat_min: T,
    pub lat_max: T,
}

/// Footprint of a vehicle; the body extends behind the front bumper along its heading.
pub fn footprint<T: Scalar>(vehicle: &VehicleState<T>) -> Footprint<T> {
    let rear = vehicle.rear();
    let half_width = vehicle.width / T::of(2.0);
    Footprint {
        s_min: vehicle.s.min(rear),
        s_max: vehicle.s.max(rear),
        lat_min: vehicle.lat - half_width,
        lat_max: vehicle.lat + half_width,
    }
}

pub fn overlap_area<T: Scalar>(a: &Footprint<T>, b: &Footprint<T>) -> T {
    let ds = a.s_max.min(b.s_max) - a.s_min.max(b.s_min);
    let dl = a.lat_max.min(b.lat_max) - a.lat_min.max(b.lat_min);
    if ds > T::zero() && dl > T::zero() {
        ds * dl
    } else {
        T::zero()
    }
}

/// Every pair of vehicles whose footprints overlap with positive area.
/// Pairs involving the ego come first, with the ego as the first element.
pub fn detect_collision<T: Scalar>(frame: &TraceFrame<T>) -> Vec<(String, String)> {
    let prints: Vec<_> = frame.vehicles.iter().map(footprint).collect();
    let mut ego_pairs = Vec::new();
    let mut other_pairs = Vec::new();
    for i in 0..frame.vehicles.len() {
        for j in (i + 1)..frame.vehicles.len() {
            if overlap_area(&prints[i], &prints[j]) > T::zero() {
                let (a, b) = (&frame.vehicles[i], &frame.vehicles[j]);
                if a.is_ego() {
                    ego_pairs.push((a.name.clone(), b.name.clone()));
                } else if b.is_ego() {
                    ego_pairs.push((b.name.clone(), a.name.clone()));
                } else {
                    other_pairs.push((a.name.clone(), b.name.clone()));
                }
            }
        }
    }
    ego_pairs.extend(other_pairs);
    ego_pairs
}
