use crate::scalar::Scalar;
use crate::scenario::Heading;
use crate::sim::{TraceFrame, VehicleState};

/// Nearest same-lane, same-direction vehicle whose front bumper is ahead of the ego's.
pub fn lead_vehicle<T: Scalar>(frame: &TraceFrame<T>) -> Option<(&VehicleState<T>, &VehicleState<T>)> {
    let ego = frame.ego()?;
    let lead = frame
        .vehicles
        .iter()
        .filter(|v| !v.is_ego() && v.heading == Heading::Forward && v.lane == ego.lane && v.s > ego.s)
        .min_by(|a, b| a.s.partial_cmp(&b.s).unwrap_or(std::cmp::Ordering::Equal))?;
    Some((ego, lead))
}

/// Bumper gap to the lead vehicle; absent when there is none or the bodies overlap.
fn lead_gap<T: Scalar>(frame: &TraceFrame<T>) -> Option<(T, &VehicleState<T>, &VehicleState<T>)> {
    let (ego, lead) = lead_vehicle(frame)?;
    let gap = lead.rear() - ego.s;
    (gap > T::zero()).then_some((gap, ego, lead))
}

/// Time headway to the lead vehicle in seconds.
pub fn compute_headway<T: Scalar>(frame: &TraceFrame<T>) -> Option<T> {
    let (gap, ego, _) = lead_gap(frame)?;
    (ego.speed > T::zero()).then(|| gap / ego.speed)
}

/// Time to collision with the lead vehicle, defined only while closing in.
pub fn compute_ttc<T: Scalar>(frame: &TraceFrame<T>) -> Option<T> {
    let (gap, ego, lead) = lead_gap(frame)?;
    let closing = ego.speed - lead.speed;
    (closing > T::zero()).then(|| gap / closing)
}
