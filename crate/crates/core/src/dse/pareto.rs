use super::{DseError, EvaluatedPoint};

/// `a` is no worse on both objectives and strictly better on one.
pub fn dominates(a: &EvaluatedPoint, b: &EvaluatedPoint) -> bool {
    a.latency_cycles <= b.latency_cycles
        && a.power_w <= b.power_w
        && (a.latency_cycles < b.latency_cycles || a.power_w < b.power_w)
}

/// Nondominated subset under (minimize latency, minimize power), sorted by
/// latency. Among points equal on both objectives only the one with the
/// smallest directive configuration is kept.
pub fn pareto_front(points: &[EvaluatedPoint]) -> Vec<EvaluatedPoint> {
    let mut sorted: Vec<&EvaluatedPoint> = points.iter().collect();
    sorted.sort_by(|a, b| {
        a.latency_cycles
            .cmp(&b.latency_cycles)
            .then(a.power_w.total_cmp(&b.power_w))
            .then_with(|| a.directives.cmp(&b.directives))
    });
    let mut front: Vec<EvaluatedPoint> = Vec::new();
    let mut best = f64::INFINITY;
    for p in sorted {
        if p.power_w < best {
            best = p.power_w;
            front.push(p.clone());
        }
    }
    front
}

/// Sampled points whose power lies within `delta_pwr` of the front member
/// nearest in latency (ties go to the lower-latency member). Returns only
/// the added points; an empty front or `delta_pwr == 0` adds nothing.
pub fn relax_pareto(front: &[EvaluatedPoint], sampled: &[EvaluatedPoint], delta_pwr: f64) -> Vec<EvaluatedPoint> {
    if front.is_empty() || delta_pwr <= 0.0 {
        return Vec::new();
    }
    let mut extra: Vec<EvaluatedPoint> = Vec::new();
    for p in sampled {
        if front.iter().any(|m| m.directives == p.directives) || extra.iter().any(|m| m.directives == p.directives) {
            continue;
        }
        let nearest = front
            .iter()
            .min_by_key(|m| (m.latency_cycles.abs_diff(p.latency_cycles), m.latency_cycles))
            .expect("front is non-empty");
        if p.power_w <= (1.0 + delta_pwr) * nearest.power_w {
            extra.push(p.clone());
        }
    }
    extra.sort_by(|a, b| a.latency_cycles.cmp(&b.latency_cycles).then_with(|| a.directives.cmp(&b.directives)));
    extra
}

/// Average distance from the reference set, in percent: for every exact
/// point, the smallest worst-case relative excess of any approximate point.
pub fn adrs(approx: &[(u64, f64)], exact: &[(u64, f64)]) -> Result<f64, DseError> {
    if exact.is_empty() {
        return Err(DseError::EmptyReferenceSet);
    }
    let total: f64 = exact
        .iter()
        .map(|&(lat, pwr)| {
            approx
                .iter()
                .map(|&(a_lat, a_pwr)| {
                    let dl = (a_lat as f64 - lat as f64) / lat as f64;
                    let dp = (a_pwr - pwr) / pwr;
                    0f64.max(dl).max(dp)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(total / exact.len() as f64 * 100.0)
}
