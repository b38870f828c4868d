#pragma once

#include <json.hpp>

#include "fricsym/dataset.hpp"

namespace fricsym {

/// Generates a quasi-static joint log from a JSON spec:
///
///   {
///     "joint_id": "2", "rate": 1000, "seed": 0, "noise_std": 0.0, "q0": 0.0,
///     "profile":  {"type": "constant_grid", "count": 90, "min": -2, "max": 2,
///                  "hold": 0.5, "ramp": 0.0}
///               | {"type": "trapezoid", "segments": [{"velocity": v, "hold": s, "ramp": s}, ...]}
///               | {"type": "sinusoid", "amplitude": a, "frequency": hz, "duration": s},
///     "friction": <model JSON> | [<model JSON>, ...],      (summed)
///     "gravity":  {"amplitude": 0, "phase": 0, "offset": 0, "loads": [0]},
///     "external": {"start": s, "end": s, "magnitude": Nm}
///   }
///
/// The profile is replayed once per load; tau_g = offset + (amplitude + load)
/// * sin(q + phase), tau_m = tau_g - tau_f - tau_ext + N(0, noise_std). Each
/// trapezoid (grid entry) is its own movement id. Throws DataError on a bad spec.
JointDataset synth_generate(const nlohmann::json& spec);

} // namespace fricsym
