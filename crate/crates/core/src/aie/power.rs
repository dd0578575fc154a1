use serde::{Deserialize, Serialize};

use super::config::CalibrationProfile;
use super::placement::UtilizationReport;
use super::schedule::KernelSchedule;

/// Linear, calibrated dynamic-power model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub core_w: f64,
    pub memory_w: f64,
    pub total_w: f64,
    pub model: String,
}

/// `core = kernel tiles × core coefficient`;
/// `memory = (traffic of all replicas / reference traffic) × memory coefficient`.
pub fn estimate_power(utilization: &UtilizationReport, schedule: &KernelSchedule, calib: &CalibrationProfile) -> PowerEstimate {
    let core_w = utilization.kernel_tiles as f64 * calib.core_power_w_per_kernel;
    let traffic = schedule.memory_traffic_bytes * schedule.replicas as u64;
    let factor = if utilization.kernel_tiles == 0 {
        0.0
    } else {
        traffic as f64 / calib.reference_memory_traffic_bytes as f64
    };
    let memory_w = factor * calib.memory_power_w_at_reference;
    PowerEstimate { core_w, memory_w, total_w: core_w + memory_w, model: "linear-calibrated".into() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aie::{compute_utilization, map_to_schedule, TileArrayConfig};
    use crate::nn::{quantize_model, MlpModel};

    #[test]
    fn reference_split_and_scaling() {
        let array = TileArrayConfig::default();
        let calib = CalibrationProfile::vck190_reference();
        let q = quantize_model(&MlpModel::init(&[2, 8, 8, 2], 1, 1.0).unwrap(), 12).unwrap();
        let s = map_to_schedule(&q, &array, &calib).unwrap();
        let p = estimate_power(&compute_utilization(&s, &array).unwrap(), &s, &calib);
        assert_eq!((p.core_w, p.memory_w, p.total_w), (0.092, 0.501, 0.593));

        let two = s.replicated(2);
        let p2 = estimate_power(&compute_utilization(&two, &array).unwrap(), &two, &calib);
        assert_eq!(p2.core_w, 0.184);
        assert_eq!(p2.total_w, p2.core_w + p2.memory_w);

        let empty = KernelSchedule::empty(&array);
        let p0 = estimate_power(&compute_utilization(&empty, &array).unwrap(), &empty, &calib);
        assert_eq!((p0.core_w, p0.memory_w, p0.total_w), (0.0, 0.0, 0.0));
    }
}
